#  Copyright 2022, roi-reacher authors
#
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License.
import csv
import json
import tempfile
from pathlib import Path

import numpy as np
import pytest

from roi_reacher.agent.dqn import AgentConfig
from roi_reacher.agent.networks import QNetworkVariant
from roi_reacher.agent.policies import NoOpPolicy
from roi_reacher.env.geometry import Action
from roi_reacher.imaging.corruption import Light
from roi_reacher.imaging.scene import SceneManifest
from roi_reacher.training.trainer import TrainConfig
from roi_reacher.utils.errors import ConfigurationError, EpisodeFinishedError
from roi_reacher.worksim.tasks import (
    MotionConfig,
    ScratchRewardConfig,
    WorkspaceEnv,
    WorkspaceOracle,
    deploy,
    deploy_cells,
    move_object,
    run_deploy_protocol,
    run_moving_object,
    scratch_reward,
    train_scratch,
    write_deploy_trace,
)
from roi_reacher.worksim.workspace import (
    CAMERA_STARTS,
    WorkspaceConfig,
    apply_robot_action,
    build_workspace,
    camera_start,
    projected_box,
    render,
)


@pytest.fixture(scope="module")
def workspace():
    return build_workspace(SceneManifest(), WorkspaceConfig(), seed=0)


def test_projection_of_centered_object(workspace):
    ws = workspace.with_camera((0.0, 0.0, 0.2))
    box = projected_box(ws)
    assert box.center == pytest.approx((180.0, 180.0))
    assert box.w == pytest.approx(360.0 * 0.12 / 0.8)
    assert projected_box(ws.with_camera((0.0, 0.0, 1.1))) is None


def test_projection_follows_camera(workspace):
    ws = workspace.with_camera((0.0, 0.0, 0.2))
    moved = apply_robot_action(ws, Action.ShiftLeft)
    assert moved.camera[0] == pytest.approx(-0.02)
    assert projected_box(moved).x > projected_box(ws).x
    up = apply_robot_action(ws, Action.ShiftUp)
    assert projected_box(up).y > projected_box(ws).y
    closer = ws.with_camera((0.0, 0.0, 0.6))
    assert projected_box(closer).w == pytest.approx(2 * projected_box(ws).w)


def test_moves_leaving_the_workspace_are_voided(workspace):
    edge = workspace.with_camera((0.3, 0.0, 0.5))
    assert apply_robot_action(edge, Action.ShiftRight) is edge
    assert apply_robot_action(edge, Action.NoOp) is edge
    assert apply_robot_action(edge, Action.ShiftLeft).camera[0] == pytest.approx(0.28)


def test_camera_starts(workspace):
    cfg = WorkspaceConfig()
    assert camera_start("M", workspace.world, cfg) == (0.0, 0.0, 0.25)
    assert camera_start("TL", workspace.world, cfg) == pytest.approx((-0.1, 0.1, 0.25))
    with pytest.raises(ConfigurationError):
        camera_start("center", workspace.world, cfg)


def test_render(workspace):
    frame = render(workspace)
    assert frame.shape == (360, 360, 3)
    assert np.array_equal(frame.data, render(workspace).data)
    moved = render(workspace.with_camera((0.05, 0.0, 0.4)))
    assert not np.array_equal(frame.data, moved.data)


def zoom_in_policy(state, pose) -> Action:
    return Action.ZoomIn


def test_zoom_in_reaches_goal_from_middle():
    cfg = WorkspaceConfig(start_jitter=0.0)
    ws = build_workspace(SceneManifest(), cfg, seed=0)
    success, steps, trace = deploy(zoom_in_policy, ws, t_max=cfg.t_max)
    assert success and steps == 30
    assert len(trace) == 31
    assert not trace[-2].success and trace[-1].success


def test_oracle_reaches_goal_from_every_start():
    outcomes = run_deploy_protocol(
        lambda rng: WorkspaceOracle(), SceneManifest(), WorkspaceConfig(), list(CAMERA_STARTS), [Light.Left], 1, seed=0
    )
    assert all(o.success for o in outcomes)
    assert all(o.steps <= 50 for o in outcomes)
    cells = deploy_cells(outcomes, list(CAMERA_STARTS))
    assert [c.name for c in cells] == list(CAMERA_STARTS)
    assert all(c.ratio == 1.0 for c in cells)


def test_noop_never_reaches_goal():
    outcomes = run_deploy_protocol(
        lambda rng: NoOpPolicy(), SceneManifest(), WorkspaceConfig(), ["M"], [Light.Left], trials=2, seed=0
    )
    assert not any(o.success for o in outcomes)
    assert all(o.steps == 50 for o in outcomes)


def test_start_jitter_is_seeded():
    args = (lambda rng: NoOpPolicy(), SceneManifest(), WorkspaceConfig(t_max=1), ["M"], [Light.Left], 3)
    first = run_deploy_protocol(*args, seed=0)
    second = run_deploy_protocol(*args, seed=0)
    assert [o.trace[0].camera for o in first] == [o.trace[0].camera for o in second]
    assert len({o.trace[0].camera for o in first}) == 3


def test_null_velocity_matches_static():
    args = (lambda rng: WorkspaceOracle(), SceneManifest(), WorkspaceConfig(), ["M", "TR"], [Light.Left], 2)
    static = run_deploy_protocol(*args, seed=0)
    motion = MotionConfig(velocity_range=(0.0, 0.0, 0.0))
    overall, moving = run_moving_object(
        args[0], args[1], args[2], motion, starts=args[3], lights=args[4], trials=args[5], seed=0
    )
    assert [o.trace for o in moving] == [o.trace for o in static]
    assert overall.name == "moving" and overall.n == 4


def test_object_motion_stays_bounded(workspace):
    motion = MotionConfig()
    rng = np.random.default_rng(0)
    ws = workspace
    origin = np.asarray(workspace.world.object_position)
    for _ in range(2000):
        ws = move_object(ws, motion, rng)
        assert np.all(np.abs(np.asarray(ws.object_position) - origin) <= np.asarray(motion.bounds) + 1e-12)
    # the goal region follows the object
    shift = np.asarray(ws.object_position) - origin
    assert ws.goal_region[0] == pytest.approx(np.asarray(ws.world.goal_min) + shift)


def test_scratch_reward_shaping(workspace):
    cfg = ScratchRewardConfig()
    rewards = [scratch_reward(workspace.with_camera((0.0, 0.0, z)), cfg) for z in np.linspace(0.2, 0.82, 20)]
    assert all(a < b for a, b in zip(rewards, rewards[1:]))
    outside = scratch_reward(workspace.with_camera((0.0, 0.0, 0.83)), cfg)
    inside = scratch_reward(workspace.with_camera((0.0, 0.0, 0.86)), cfg)
    assert inside - outside > cfg.success_bonus - 1e-9


def test_workspace_env():
    ws = build_workspace(SceneManifest(), WorkspaceConfig(t_max=3), seed=0)
    env = WorkspaceEnv(ws, ScratchRewardConfig(), rng=np.random.default_rng(0))
    state = env.reset()
    assert state.shape == (84, 84, 3)
    steps = 0
    while not env.done:
        result = env.step(Action.ShiftUp)
        steps += 1
    assert steps == 3 and result.terminal
    assert not result.info["reached_goal"]
    with pytest.raises(EpisodeFinishedError):
        env.step(Action.NoOp)


def test_deploy_trace_export(workspace):
    _, _, trace = deploy(zoom_in_policy, workspace, t_max=2)
    with tempfile.TemporaryDirectory() as tmp_dir:
        path = Path(tmp_dir) / "traces" / "M.jsonl"
        write_deploy_trace(trace, path)
        lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert [line["action"] for line in lines] == [None, "ZoomIn", "ZoomIn"]
    assert set(lines[0].keys()) == {"step", "action", "camera", "object_position", "success"}


def test_train_scratch_writes_curve():
    agent_cfg = AgentConfig(variant=QNetworkVariant.Compact, use_dynamic_filter=False)
    train_cfg = TrainConfig(total_episodes=2, checkpoint_every=2)
    with tempfile.TemporaryDirectory() as tmp_dir:
        result = train_scratch(
            SceneManifest(), WorkspaceConfig(t_max=3), agent_cfg, ScratchRewardConfig(), train_cfg, tmp_dir, seed=0
        )
        assert len(result.records) == 2
        assert [p.name for p in result.checkpoints] == ["ckpt_ep0.ckpt", "ckpt_ep2.ckpt"]
        with (Path(tmp_dir) / "running_success.csv").open() as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["episode", "running_success"]
        assert len(rows) == 3

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

"""
Reaching tasks in the workspace: zero-shot deployment of a localization policy (static or
moving object) and the Scratch baseline trained directly in the workspace.
"""

import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from roi_reacher.agent.dqn import AgentConfig
from roi_reacher.agent.policies import MOVES, Policy
from roi_reacher.env.geometry import Action, BoundingBox
from roi_reacher.env.localization import StepResult
from roi_reacher.evaluation.report import CellResult, aggregate, write_csv
from roi_reacher.imaging.corruption import Light
from roi_reacher.imaging.frame import Frame, crop_resize
from roi_reacher.imaging.scene import SceneManifest
from roi_reacher.training.metrics import running_success
from roi_reacher.training.trainer import TrainConfig, TrainResult, build_agent, run_training
from roi_reacher.utils.errors import ConfigurationError, EpisodeFinishedError
from roi_reacher.utils.seeding import make_rng
from roi_reacher.worksim.workspace import (
    CAMERA_STARTS,
    Vector,
    Workspace,
    WorkspaceConfig,
    apply_robot_action,
    build_workspace,
    camera_start,
    render,
    start_jitter,
)


# builds the policy of one deployment from its own generator
WorkspacePolicyFactory = Callable[[np.random.Generator], Policy]


@dataclass(frozen=True)
class MotionConfig:
    """
    velocity_range: per axis bound of the uniform velocity (units / step), resampled every step
    bounds: per axis maximum displacement of the object from its initial position, reflective
    """

    velocity_range: Vector = (0.005, 0.005, 0.002)
    bounds: Vector = (0.1, 0.1, 0.02)

    def __post_init__(self):
        if any(v < 0 for v in self.velocity_range) or any(b < 0 for b in self.bounds):
            raise ConfigurationError(f"motion: velocity_range and bounds should be >= 0: {self}")


@dataclass(frozen=True)
class DeployProtocol:
    starts: List[str] = dataclasses.field(default_factory=lambda: list(CAMERA_STARTS.keys()))
    lights: List[Light] = dataclasses.field(default_factory=lambda: [Light.Left])
    trials: int = 10

    def __post_init__(self):
        unknown = [s for s in self.starts if s not in CAMERA_STARTS]
        if len(unknown) > 0:
            raise ConfigurationError(f"deploy.starts: unknown {unknown}, valid: {list(CAMERA_STARTS)}")
        if self.trials < 1 or len(self.lights) == 0:
            raise ConfigurationError(f"deploy: trials and lights should not be empty: {self}")


@dataclass(frozen=True)
class ScratchRewardConfig:
    """
    reward = -distance_coefficient * |camera - object| (+ success_bonus when entering the goal)
    start_spread: half extents of the random start box around the canonical start (z: toward the object)
    The explorable region is the one of the workspace config.
    """

    success_bonus: float = 1.0
    distance_coefficient: float = 0.1
    start_spread: Vector = (0.1, 0.1, 0.2)

    def __post_init__(self):
        if self.distance_coefficient <= 0:
            raise ConfigurationError(f"scratch.distance_coefficient: should be positive, got {self}")


@dataclass(frozen=True)
class DeployRecord:
    step: int
    action: Optional[str]
    camera: Vector
    object_position: Vector
    success: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "step": self.step,
                "action": self.action,
                "camera": list(self.camera),
                "object_position": list(self.object_position),
                "success": self.success,
            },
            sort_keys=True,
        )


@dataclass(frozen=True)
class DeployOutcome:
    start: str
    light: Light
    trial: int
    success: bool
    steps: int
    trace: Tuple[DeployRecord, ...]


def write_deploy_trace(records: Iterable[DeployRecord], path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        for record in records:
            f.write(record.to_json() + "\n")


def observe(workspace: Workspace, state_size: int = 84) -> Frame:
    """
    Agent state: the whole hand-eye frame resized to the network input size.
    """
    size = workspace.cfg.image_size
    return crop_resize(render(workspace), BoundingBox(0.0, 0.0, float(size)), state_size)


def move_object(workspace: Workspace, motion: MotionConfig, rng: np.random.Generator) -> Workspace:
    """
    One random velocity step, reflected at the motion bounds around the initial object position.
    """
    velocity = rng.uniform(-np.asarray(motion.velocity_range), np.asarray(motion.velocity_range))
    origin = np.asarray(workspace.world.object_position)
    low, high = origin - np.asarray(motion.bounds), origin + np.asarray(motion.bounds)
    position = np.asarray(workspace.object_position) + velocity
    position = np.where(position > high, 2 * high - position, position)
    position = np.where(position < low, 2 * low - position, position)
    return workspace.with_object(tuple(np.clip(position, low, high)))


class WorkspaceOracle:
    """
    Scripted policy: the camera motion bringing the camera closest to the goal region.
    The pose it receives is the workspace itself.
    """

    def __call__(self, state: Frame, pose: Workspace) -> Action:
        distances = [pose.distance_to_goal(apply_robot_action(pose, a).camera) for a in MOVES]
        return MOVES[int(np.argmin(distances))]


def deploy(
    policy: Policy,
    workspace: Workspace,
    t_max: int = 50,
    motion: Optional[MotionConfig] = None,
    motion_rng: Optional[np.random.Generator] = None,
    state_size: int = 84,
) -> Tuple[bool, int, List[DeployRecord]]:
    """
    Run a policy as camera motions until the camera enters the goal region or t_max.
    :param policy: maps (state, workspace) to an action
    :param workspace: initial workspace, camera at its start position
    :param t_max: step cap
    :param motion: moving object settings, static object when None
    :param motion_rng: generator of the object velocities
    :param state_size: network input size
    :return: success flag, steps and trace
    """
    assert motion is None or motion_rng is not None, "a motion generator is required with a motion config"
    ws = workspace
    success = ws.in_goal()
    records = [DeployRecord(0, None, ws.camera, ws.object_position, success)]
    steps = 0
    while not success and steps < t_max:
        action = Action(policy(observe(ws, state_size), ws))
        ws = apply_robot_action(ws, action)
        if motion is not None:
            ws = move_object(ws, motion, motion_rng)
        steps += 1
        # latched, the episode stops at the first entry
        success = ws.in_goal()
        records.append(DeployRecord(steps, action.name, ws.camera, ws.object_position, success))
    return success, steps, records


def run_deploy_protocol(
    policy_factory: WorkspacePolicyFactory,
    scene: SceneManifest,
    cfg: WorkspaceConfig,
    starts: Sequence[str],
    lights: Sequence[Light],
    trials: int,
    seed: int,
    motion: Optional[MotionConfig] = None,
    state_size: int = 84,
) -> List[DeployOutcome]:
    """
    starts x lights x trials deployments, trials differ by their seeded start jitter.
    The object motion draws from its own generator: a null velocity range reproduces the static run.
    """
    assert trials >= 1, f"trials should be positive: {trials}"
    base = build_workspace(scene, cfg, seed=seed)
    outcomes = list()
    for start in starts:
        for light in lights:
            for trial in range(trials):
                jitter = start_jitter(cfg, make_rng(seed, "start", start, light.value, trial))
                workspace = dataclasses.replace(
                    base, camera=camera_start(start, base.world, cfg, jitter=jitter), light=light
                )
                policy = policy_factory(make_rng(seed, "policy", start, light.value, trial))
                motion_rng = make_rng(seed, "motion", start, light.value, trial) if motion is not None else None
                success, steps, trace = deploy(
                    policy, workspace, t_max=cfg.t_max, motion=motion, motion_rng=motion_rng, state_size=state_size
                )
                outcomes.append(DeployOutcome(start, light, trial, success, steps, tuple(trace)))
    return outcomes


def deploy_cells(outcomes: Sequence[DeployOutcome], starts: Sequence[str]) -> List[CellResult]:
    return [aggregate(start, [o.success for o in outcomes if o.start == start]) for start in starts]


def run_moving_object(
    policy_factory: WorkspacePolicyFactory,
    scene: SceneManifest,
    cfg: WorkspaceConfig,
    motion: MotionConfig,
    starts: Sequence[str],
    lights: Sequence[Light],
    trials: int,
    seed: int,
    state_size: int = 84,
) -> Tuple[CellResult, List[DeployOutcome]]:
    """
    Deployment with an object moving at a random velocity, resampled every step.
    :return: overall success ratio (binomial standard error) and the outcomes
    """
    outcomes = run_deploy_protocol(
        policy_factory, scene, cfg, starts, lights, trials, seed, motion=motion, state_size=state_size
    )
    overall = aggregate("moving", [o.success for o in outcomes])
    logging.info("moving object reaching: %s over %d trials", overall.formatted, overall.n)
    return overall, outcomes


def scratch_reward(workspace: Workspace, cfg: ScratchRewardConfig) -> float:
    """
    Distance shaping, plus the bonus when the camera is in the goal region.
    """
    value = -cfg.distance_coefficient * workspace.distance_to_object()
    if workspace.in_goal():
        value += cfg.success_bonus
    return value


class WorkspaceEnv:
    """
    Reaching task as a training environment, random start at every reset.
    """

    def __init__(
        self, workspace: Workspace, cfg: ScratchRewardConfig, rng: np.random.Generator, state_size: int = 84
    ):
        self.template = workspace
        self.cfg = cfg
        self.rng = rng
        self.state_size = state_size
        self.workspace = workspace
        self.step_index = 0
        self.done = True

    def random_start(self) -> Vector:
        ws_cfg = self.template.cfg
        ox, oy, _ = self.template.world.object_position
        sx, sy, sz = self.cfg.start_spread
        position = (
            ox + self.rng.uniform(-sx, sx),
            oy + self.rng.uniform(-sy, sy),
            ws_cfg.start_depth + self.rng.uniform(0.0, sz),
        )
        low, high = np.asarray(ws_cfg.explorable_min), np.asarray(ws_cfg.explorable_max)
        return tuple(float(c) for c in np.clip(position, low, high))

    def reset(self) -> Frame:
        self.workspace = self.template.with_camera(self.random_start())
        self.step_index = 0
        self.done = False
        return observe(self.workspace, self.state_size)

    def step(self, action: Action) -> StepResult:
        if self.done:
            raise EpisodeFinishedError("step() called after the terminal transition, call reset() first")
        self.step_index += 1
        self.workspace = apply_robot_action(self.workspace, action)
        reached_goal = self.workspace.in_goal()
        self.done = reached_goal or self.step_index >= self.template.cfg.t_max
        return StepResult(
            state=observe(self.workspace, self.state_size),
            reward=scratch_reward(self.workspace, self.cfg),
            terminal=self.done,
            info={
                "reached_goal": reached_goal,
                "distance": self.workspace.distance_to_object(),
                "step": self.step_index,
                "camera": self.workspace.camera,
            },
        )


def train_scratch(
    scene: SceneManifest,
    cfg: WorkspaceConfig,
    agent_cfg: AgentConfig,
    scratch_cfg: ScratchRewardConfig,
    train_cfg: TrainConfig,
    output_dir: Union[str, Path],
    seed: int = 0,
    config_hash: Optional[str] = None,
    window: int = 30,
) -> TrainResult:
    """
    Scratch baseline: the DQN machinery trained directly in the workspace.
    Also writes the running success curve (running_success.csv).
    """
    workspace = build_workspace(scene, cfg, seed=seed)
    seed = train_cfg.seed if train_cfg.seed is not None else seed
    env = WorkspaceEnv(workspace, scratch_cfg, rng=make_rng(seed, "scratch_env"))
    agent = build_agent(agent_cfg, train_cfg, seed=seed)
    result = run_training(
        env=env, agent=agent, train_cfg=train_cfg, output_dir=output_dir, config_hash=config_hash, name="scratch"
    )
    curve = running_success(result.records, window=window)
    write_csv(
        ["episode", "running_success"],
        [[r.episode, f"{value:.6f}"] for r, value in zip(result.records, curve)],
        Path(output_dir) / "running_success.csv",
    )
    return result

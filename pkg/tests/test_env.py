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
import json
import tempfile
from pathlib import Path

import numpy as np
import pytest

from roi_reacher.env.geometry import (
    Action,
    BoundingBox,
    TransitionConfig,
    candidate,
    is_legal,
    jaccard,
    sample_sigma,
    transition,
)
from roi_reacher.env.localization import (
    EnvConfig,
    LocalizationEnv,
    largest_containing_box,
    reward,
    reward_from_jaccard,
    spawn_box,
    write_trace,
)
from roi_reacher.imaging.frame import Frame
from roi_reacher.utils.errors import EpisodeFinishedError


def random_legal_box(rng: np.random.Generator, cfg: TransitionConfig) -> BoundingBox:
    w = float(rng.uniform(cfg.w_min, cfg.w_max))
    x = float(rng.uniform(0, cfg.image_size - w))
    y = float(rng.uniform(0, cfg.image_size - w))
    return BoundingBox(x, y, w)


def pixel_jaccard(a: BoundingBox, b: BoundingBox, size: int) -> float:
    mask_a = np.zeros((size, size), dtype=bool)
    mask_b = np.zeros((size, size), dtype=bool)
    mask_a[int(a.y) : int(a.y + a.w), int(a.x) : int(a.x + a.w)] = True
    mask_b[int(b.y) : int(b.y + b.w), int(b.x) : int(b.x + b.w)] = True
    return np.logical_and(mask_a, mask_b).sum() / np.logical_or(mask_a, mask_b).sum()


def test_reward_golden_values():
    cfg = EnvConfig()
    overlaps = [0.0, 0.3, 0.5, 0.8, 0.9]
    expected = [-1.0, -0.35, -0.25, -0.1, 1.0]
    for overlap, value in zip(overlaps, expected):
        assert reward_from_jaccard(overlap, cfg) == pytest.approx(value, abs=1e-12)
    gt = BoundingBox(100, 100, 50)
    assert reward(gt, gt, cfg) == 1.0
    assert reward(gt, BoundingBox(0, 0, 50), cfg) == -1.0


def test_reward_is_monotone_and_bounded():
    cfg = EnvConfig()
    threshold = cfg.success_threshold
    grid = np.concatenate([np.linspace(0.0, 1.0, 1001), [np.nextafter(threshold, 0.0), np.nextafter(threshold, 1.0)]])
    grid.sort()
    rewards = [reward_from_jaccard(float(j), cfg) for j in grid]
    assert all(a <= b for a, b in zip(rewards, rewards[1:]))
    assert all(-1.0 <= r <= 1.0 for r in rewards)
    for j, r in zip(grid, rewards):
        if j == 0:
            assert r == -1.0
        elif j <= threshold:
            assert -0.5 < r <= -0.1 + 1e-12
        else:
            assert r == 1.0
    assert reward_from_jaccard(threshold, cfg) == pytest.approx(-0.1)
    assert reward_from_jaccard(float(np.nextafter(threshold, 1.0)), cfg) == 1.0


def test_jaccard_against_pixel_count():
    rng = np.random.default_rng(0)
    size = 64
    for _ in range(10_000):
        a_w, b_w = (int(w) for w in rng.integers(1, 33, size=2))
        a = BoundingBox(int(rng.integers(0, size - a_w + 1)), int(rng.integers(0, size - a_w + 1)), a_w)
        b = BoundingBox(int(rng.integers(0, size - b_w + 1)), int(rng.integers(0, size - b_w + 1)), b_w)
        tolerance = 2 / min(a.area, b.area)
        assert abs(jaccard(a, b) - pixel_jaccard(a, b, size)) <= tolerance
        assert jaccard(a, b) == jaccard(b, a)
        assert jaccard(a, a) == 1.0


def test_jaccard_edge_cases():
    a = BoundingBox(0, 0, 10)
    assert jaccard(a, BoundingBox(10, 0, 10)) == 0.0
    assert jaccard(a, BoundingBox(2, 2, 5)) == pytest.approx(25 / 100)
    with pytest.raises(ValueError):
        jaccard(a, BoundingBox(0, 0, 0))


def test_transition_properties():
    cfg = TransitionConfig()
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        box = random_legal_box(rng, cfg)
        action = Action(int(rng.integers(0, len(Action))))
        sigma = float(rng.uniform(cfg.sigma_min, cfg.sigma_max))
        next_box = transition(box, action, sigma, cfg)
        raw = candidate(box, action, sigma)
        assert is_legal(next_box, cfg) or next_box == box
        if not is_legal(raw, cfg):
            assert next_box == box
            continue
        if action in (Action.ShiftLeft, Action.ShiftRight, Action.ShiftUp, Action.ShiftDown):
            assert next_box.w == box.w
        if action in (Action.ZoomIn, Action.ZoomOut):
            assert next_box.center[0] == pytest.approx(box.center[0], abs=1e-9)
            assert next_box.center[1] == pytest.approx(box.center[1], abs=1e-9)
        if action == Action.NoOp:
            assert next_box == box


def test_transition_examples():
    cfg = TransitionConfig()
    box = BoundingBox(100, 100, 100)
    assert transition(box, Action.ShiftRight, 0.1, cfg) == BoundingBox(110, 100, 100)
    assert transition(box, Action.ShiftUp, 0.1, cfg) == BoundingBox(100, 90, 100)
    zoomed = transition(box, Action.ZoomIn, 0.1, cfg)
    assert zoomed.w == pytest.approx(90)
    assert zoomed.center == pytest.approx(box.center)
    # voided at the image border
    corner = BoundingBox(0, 0, 100)
    assert transition(corner, Action.ShiftLeft, 0.1, cfg) == corner
    # voided below the minimum width
    small = BoundingBox(100, 100, 21)
    assert transition(small, Action.ZoomIn, 0.1, cfg) == small
    with pytest.raises(AssertionError):
        transition(box, Action.ShiftLeft, 0.5, cfg)


def test_sample_sigma():
    rng = np.random.default_rng(0)
    cfg = TransitionConfig()
    values = [sample_sigma(cfg, rng) for _ in range(1000)]
    assert min(values) >= cfg.sigma_min and max(values) <= cfg.sigma_max
    fixed = TransitionConfig(sigma_min=0.1, sigma_max=0.1)
    assert sample_sigma(fixed, rng) == 0.1


def test_spawn_box_contains_object():
    cfg = EnvConfig()
    rng = np.random.default_rng(2)
    for _ in range(10_000):
        gt = random_legal_box(rng, TransitionConfig(w_max=150))
        box = spawn_box(gt, cfg, rng)
        assert box.contains(gt)
        assert is_legal(box, cfg.transition)
        assert jaccard(gt, box) <= cfg.success_threshold or box == largest_containing_box(gt, cfg.transition)


def test_spawn_box_fallback():
    cfg = EnvConfig()
    gt = BoundingBox(0, 0, 340)
    box = spawn_box(gt, cfg, np.random.default_rng(0))
    assert box == BoundingBox(0, 0, 360)
    with pytest.raises(ValueError):
        spawn_box(BoundingBox(350, 350, 30), cfg, np.random.default_rng(0))


def uniform_image(size: int = 360) -> Frame:
    rng = np.random.default_rng(0)
    return Frame.from_array(rng.uniform(size=(size, size, 3)))


def test_env_episode():
    cfg = EnvConfig(t_max=5)
    gt = BoundingBox(150, 150, 60)
    env = LocalizationEnv(env_image=uniform_image(), gt_box=gt, cfg=cfg, rng=np.random.default_rng(0))
    state = env.reset()
    assert state.shape == (84, 84, 3)
    assert env.pose.contains(gt)
    steps = 0
    while not env.done:
        result = env.step(Action.NoOp)
        steps += 1
    assert steps == 5
    assert result.terminal and not result.info["reached_goal"]
    assert len(env.trace) == 6
    assert [r.step for r in env.trace] == list(range(6))
    with pytest.raises(EpisodeFinishedError):
        env.step(Action.NoOp)


def test_env_success_terminates():
    cfg = EnvConfig(transition=TransitionConfig(sigma_min=0.1, sigma_max=0.1))
    gt = BoundingBox(150, 150, 60)
    env = LocalizationEnv(env_image=uniform_image(), gt_box=gt, cfg=cfg, rng=np.random.default_rng(0))
    # overlap 0.69 before, 0.86 after one zoom in
    env.reset(start_box=BoundingBox(144, 144, 72))
    result = env.step(Action.ZoomIn)
    assert result.terminal and result.info["reached_goal"]
    assert result.reward == 1.0
    assert result.info["jaccard"] > cfg.success_threshold


def test_env_determinism():
    gt = BoundingBox(150, 150, 60)
    traces = list()
    for _ in range(2):
        env = LocalizationEnv(uniform_image(), gt, EnvConfig(), rng=np.random.default_rng(42))
        env.reset()
        for action in [Action.ZoomIn, Action.ShiftLeft, Action.ZoomOut, Action.ShiftDown]:
            if env.done:
                break
            env.step(action)
        traces.append([r.to_json() for r in env.trace])
    assert traces[0] == traces[1]


def test_trace_export():
    gt = BoundingBox(150, 150, 60)
    env = LocalizationEnv(uniform_image(), gt, EnvConfig(), rng=np.random.default_rng(3))
    env.reset()
    env.step(Action.ZoomIn)
    with tempfile.TemporaryDirectory() as tmp_dir:
        path = Path(tmp_dir) / "trace.jsonl"
        write_trace(env.trace, path)
        lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(lines) == 2
    assert lines[0]["action"] is None and lines[0]["reward"] is None
    assert lines[1]["action"] == "ZoomIn"
    assert set(lines[1].keys()) == {"step", "action", "box", "sigma", "jaccard", "reward", "terminal"}
    assert len(env.trace_states()) == 2

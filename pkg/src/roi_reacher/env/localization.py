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
Sequential object localization in a single image, as a Markov decision process.
The agent moves a square region of interest, the state is the resized crop.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from roi_reacher.env.geometry import Action, BoundingBox, TransitionConfig, is_legal, jaccard, sample_sigma, transition
from roi_reacher.imaging.frame import Frame, crop_resize
from roi_reacher.utils.errors import EpisodeFinishedError


@dataclass(frozen=True)
class SpawnConfig:
    scale_min: float = 1.2
    scale_max: float = 3.0
    max_resamples: int = 100

    def __post_init__(self):
        assert 1 < self.scale_min <= self.scale_max, f"invalid spawn scales: [{self.scale_min}, {self.scale_max}]"
        assert self.max_resamples >= 1, f"max_resamples should be positive: {self.max_resamples}"


@dataclass(frozen=True)
class EnvConfig:
    t_max: int = 50
    success_threshold: float = 0.8
    alpha: float = 0.5
    state_size: int = 84
    transition: TransitionConfig = field(default_factory=TransitionConfig)
    spawn: SpawnConfig = field(default_factory=SpawnConfig)

    def __post_init__(self):
        assert 0 < self.success_threshold < 1, f"success_threshold should be in (0, 1): {self.success_threshold}"
        assert self.alpha > 0, f"alpha should be positive: {self.alpha}"
        assert self.t_max >= 1, f"t_max should be positive: {self.t_max}"


@dataclass(frozen=True)
class StepResult:
    state: Frame
    reward: float
    terminal: bool
    info: Dict[str, object]


@dataclass(frozen=True)
class TraceRecord:
    """
    One line of an episode trace.
    """

    step: int
    action: Optional[str]
    box: Tuple[float, float, float]
    sigma: Optional[float]
    jaccard: float
    reward: Optional[float]
    terminal: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "step": self.step,
                "action": self.action,
                "box": list(self.box),
                "sigma": self.sigma,
                "jaccard": self.jaccard,
                "reward": self.reward,
                "terminal": self.terminal,
            },
            sort_keys=True,
        )


def write_trace(records: Iterable[TraceRecord], path: Union[str, Path]) -> None:
    """
    Export an episode trace as line-delimited JSON.
    """
    with Path(path).open("w") as f:
        for record in records:
            f.write(record.to_json() + "\n")


def reward(gt: BoundingBox, box: BoundingBox, cfg: EnvConfig) -> float:
    """
    +1 above the success threshold, alpha * (J - 1) on partial overlap, -1 without overlap.
    """
    return reward_from_jaccard(jaccard(gt, box), cfg)


def reward_from_jaccard(overlap: float, cfg: EnvConfig) -> float:
    # the threshold itself belongs to the partial overlap branch
    if overlap > cfg.success_threshold:
        return 1.0
    if overlap > 0:
        return cfg.alpha * (overlap - 1.0)
    return -1.0


def largest_containing_box(gt: BoundingBox, cfg: TransitionConfig) -> BoundingBox:
    """
    Biggest legal box containing the groundtruth, as close as possible to the groundtruth center.
    """
    w = min(cfg.w_max, cfg.image_size)
    cx, cy = gt.center
    x = min(max(cx - w / 2, 0.0), cfg.image_size - w)
    y = min(max(cy - w / 2, 0.0), cfg.image_size - w)
    return BoundingBox(x, y, w)


def spawn_box(gt: BoundingBox, cfg: EnvConfig, rng: np.random.Generator) -> BoundingBox:
    """
    Random initial box: contains the object, lies inside the image and is not already a success.
    :param gt: groundtruth box (legal)
    :param cfg: environment config
    :param rng: generator
    :return: initial box
    """
    tcfg = cfg.transition
    size = tcfg.image_size
    if not is_legal(gt, tcfg):
        raise ValueError(f"no legal containing box exists for groundtruth {gt.to_list()}")
    w_low = max(cfg.spawn.scale_min * gt.w, tcfg.w_min)
    w_high = min(cfg.spawn.scale_max * gt.w, tcfg.w_max, size)
    if w_low <= w_high:
        for _ in range(cfg.spawn.max_resamples):
            w = float(rng.uniform(w_low, w_high)) if w_low < w_high else w_low
            x_low, x_high = max(0.0, gt.x + gt.w - w), min(gt.x, size - w)
            y_low, y_high = max(0.0, gt.y + gt.w - w), min(gt.y, size - w)
            if x_low > x_high or y_low > y_high:
                continue
            x = float(rng.uniform(x_low, x_high)) if x_low < x_high else x_low
            y = float(rng.uniform(y_low, y_high)) if y_low < y_high else y_low
            box = BoundingBox(x, y, w)
            if box.contains(gt) and is_legal(box, tcfg) and jaccard(gt, box) <= cfg.success_threshold:
                return box
    return largest_containing_box(gt, tcfg)


def reset(
    env_image: Frame, gt_box: BoundingBox, cfg: EnvConfig, rng: np.random.Generator
) -> Tuple[Frame, BoundingBox]:
    """
    Start an episode from a random box.
    :return: initial state and box
    """
    box = spawn_box(gt=gt_box, cfg=cfg, rng=rng)
    return crop_resize(env_image, box, cfg.state_size), box


def step(
    env_image: Frame,
    gt: BoundingBox,
    box: BoundingBox,
    action: Action,
    step_index: int,
    cfg: EnvConfig,
    rng: np.random.Generator,
    sigma: Optional[float] = None,
) -> StepResult:
    """
    Apply an action and compute the reward of the next box.
    :param env_image: environment image
    :param gt: groundtruth box
    :param box: current box
    :param action: action to apply
    :param step_index: index of this step, starting at 1
    :param cfg: environment config
    :param rng: generator used to draw sigma
    :param sigma: displacement ratio, drawn from rng when not provided
    :return: next state, reward, terminal flag and info
    """
    assert 1 <= step_index <= cfg.t_max, f"step index {step_index} out of [1, {cfg.t_max}]"
    if sigma is None:
        sigma = sample_sigma(cfg.transition, rng)
    next_box = transition(box=box, action=Action(action), sigma=sigma, cfg=cfg.transition)
    overlap = jaccard(gt, next_box)
    reached_goal = overlap > cfg.success_threshold
    terminal = reached_goal or step_index == cfg.t_max
    return StepResult(
        state=crop_resize(env_image, next_box, cfg.state_size),
        reward=reward(gt, next_box, cfg),
        terminal=terminal,
        info={"jaccard": overlap, "box": next_box, "step": step_index, "reached_goal": reached_goal, "sigma": sigma},
    )


class LocalizationEnv:
    """
    Single owner episode state around the pure reset / step functions.
    """

    def __init__(self, env_image: Frame, gt_box: BoundingBox, cfg: EnvConfig, rng: np.random.Generator):
        self.env_image = env_image
        self.gt_box = gt_box
        self.cfg = cfg
        self.rng = rng
        self.box: Optional[BoundingBox] = None
        self.state: Optional[Frame] = None
        self.step_index = 0
        self.done = True
        self.trace: List[TraceRecord] = list()

    @property
    def pose(self) -> BoundingBox:
        return self.box

    def reset(self, start_box: Optional[BoundingBox] = None) -> Frame:
        """
        :param start_box: initial box, random spawn when not provided
        :return: initial state
        """
        if start_box is None:
            self.state, self.box = reset(env_image=self.env_image, gt_box=self.gt_box, cfg=self.cfg, rng=self.rng)
        else:
            self.box = start_box
            self.state = crop_resize(self.env_image, start_box, self.cfg.state_size)
        self.step_index = 0
        self.done = False
        self.trace = [
            TraceRecord(
                step=0,
                action=None,
                box=tuple(self.box.to_list()),
                sigma=None,
                jaccard=jaccard(self.gt_box, self.box),
                reward=None,
                terminal=False,
            )
        ]
        return self.state

    def step(self, action: Action) -> StepResult:
        if self.done:
            raise EpisodeFinishedError("step() called after the terminal transition, call reset() first")
        self.step_index += 1
        result = step(
            env_image=self.env_image,
            gt=self.gt_box,
            box=self.box,
            action=action,
            step_index=self.step_index,
            cfg=self.cfg,
            rng=self.rng,
        )
        self.box = result.info["box"]
        self.state = result.state
        self.done = result.terminal
        self.trace.append(
            TraceRecord(
                step=self.step_index,
                action=Action(action).name,
                box=tuple(self.box.to_list()),
                sigma=result.info["sigma"],
                jaccard=result.info["jaccard"],
                reward=result.reward,
                terminal=result.terminal,
            )
        )
        return result

    def trace_states(self) -> List[Frame]:
        """
        States seen along the current trace, rebuilt from the recorded boxes.
        """
        return [crop_resize(self.env_image, BoundingBox(*r.box), self.cfg.state_size) for r in self.trace]

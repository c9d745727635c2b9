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
Square region of interest algebra: overlap, state transition and legality.
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import List, Tuple

import numpy as np


class Action(IntEnum):
    """
    Discrete actions. Robot side names: move left / right / up / down / forward / backward / stop.
    """

    ShiftLeft = 0
    ShiftRight = 1
    ShiftUp = 2
    ShiftDown = 3
    ZoomIn = 4
    ZoomOut = 5
    NoOp = 6


NB_ACTIONS = len(Action)


@dataclass(frozen=True)
class BoundingBox:
    """
    Square box, continuous image coordinates.
    x, y: top left corner, w: side length (pixels)
    """

    x: float
    y: float
    w: float

    @property
    def center(self) -> Tuple[float, float]:
        return self.x + self.w / 2, self.y + self.w / 2

    @property
    def area(self) -> float:
        return self.w * self.w

    def contains(self, other: "BoundingBox") -> bool:
        return (
            self.x <= other.x
            and self.y <= other.y
            and other.x + other.w <= self.x + self.w
            and other.y + other.w <= self.y + self.w
        )

    def to_list(self) -> List[float]:
        return [self.x, self.y, self.w]


@dataclass(frozen=True)
class TransitionConfig:
    sigma_min: float = 0.05
    sigma_max: float = 0.15
    image_size: int = 360
    w_min: float = 20
    w_max: float = 360

    def __post_init__(self):
        assert 0 < self.sigma_min <= self.sigma_max < 1, f"invalid sigma range: [{self.sigma_min}, {self.sigma_max}]"
        assert 0 < self.w_min <= self.w_max, f"invalid width range: [{self.w_min}, {self.w_max}]"


def jaccard(a: BoundingBox, b: BoundingBox) -> float:
    """
    Intersection over union of 2 square boxes, computed in continuous coordinates.
    :param a: first box
    :param b: second box
    :return: overlap ratio in [0, 1]
    """
    if a.w <= 0 or b.w <= 0:
        raise ValueError(f"box width should be positive: {a.w}, {b.w}")
    inter_w = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    inter_h = min(a.y + a.w, b.y + b.w) - max(a.y, b.y)
    if inter_w <= 0 or inter_h <= 0:
        return 0.0
    intersection = inter_w * inter_h
    union = a.area + b.area - intersection
    return min(1.0, intersection / union)


def is_legal(box: BoundingBox, cfg: TransitionConfig) -> bool:
    """
    A legal box has its width in [w_min, w_max] and lies fully inside the image.
    """
    return (
        cfg.w_min <= box.w <= cfg.w_max
        and box.x >= 0
        and box.y >= 0
        and box.x + box.w <= cfg.image_size
        and box.y + box.w <= cfg.image_size
    )


def candidate(box: BoundingBox, action: Action, sigma: float) -> BoundingBox:
    """
    Apply an action without any legality check.
    Displacement is proportional to the box size: delta = sigma * w.
    """
    delta = sigma * box.w
    if action == Action.ShiftLeft:
        return BoundingBox(box.x - delta, box.y, box.w)
    if action == Action.ShiftRight:
        return BoundingBox(box.x + delta, box.y, box.w)
    if action == Action.ShiftUp:
        return BoundingBox(box.x, box.y - delta, box.w)
    if action == Action.ShiftDown:
        return BoundingBox(box.x, box.y + delta, box.w)
    # zoom keeps the center
    if action == Action.ZoomIn:
        return BoundingBox(box.x + delta / 2, box.y + delta / 2, box.w - delta)
    if action == Action.ZoomOut:
        return BoundingBox(box.x - delta / 2, box.y - delta / 2, box.w + delta)
    if action == Action.NoOp:
        return box
    raise Exception(f"unknown action: {action}")


def transition(box: BoundingBox, action: Action, sigma: float, cfg: TransitionConfig) -> BoundingBox:
    """
    Next box after an action. Illegal moves are voided: the input box is returned unchanged.
    :param box: current (legal) box
    :param action: action to apply
    :param sigma: displacement ratio, in [sigma_min, sigma_max]
    :param cfg: transition bounds
    :return: next box
    """
    assert cfg.sigma_min <= sigma <= cfg.sigma_max, f"sigma {sigma} out of [{cfg.sigma_min}, {cfg.sigma_max}]"
    next_box = candidate(box=box, action=Action(action), sigma=sigma)
    if not is_legal(next_box, cfg):
        return box
    return next_box


def sample_sigma(cfg: TransitionConfig, rng: np.random.Generator) -> float:
    """
    Per step displacement ratio, emulates robot control error.
    """
    if cfg.sigma_min == cfg.sigma_max:
        return cfg.sigma_min
    return float(rng.uniform(cfg.sigma_min, cfg.sigma_max))

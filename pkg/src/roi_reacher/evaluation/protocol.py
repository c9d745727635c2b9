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
Evaluation protocol: nine named start placements, trials, lights, corruption and thresholds.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from roi_reacher.env.geometry import BoundingBox, TransitionConfig
from roi_reacher.imaging.corruption import CorruptionSpec, Light
from roi_reacher.utils.errors import ConfigurationError


# where the object sits inside the start RoI, as (horizontal, vertical) signs of the RoI offset
START_POSITIONS: Dict[str, Tuple[int, int]] = {
    "M": (0, 0),
    "ML": (1, 0),
    "MR": (-1, 0),
    "T": (0, 1),
    "TL": (1, 1),
    "TR": (-1, 1),
    "B": (0, -1),
    "BL": (1, -1),
    "BR": (-1, -1),
}


@dataclass(frozen=True)
class EvalProtocol:
    start_positions: List[str] = field(default_factory=lambda: list(START_POSITIONS.keys()))
    trials_per_cell: int = 10
    lights: List[Light] = field(default_factory=lambda: [Light.Left])
    corruption: Optional[str] = None
    thresholds: List[float] = field(default_factory=lambda: [0.5, 0.6, 0.7, 0.8, 0.9])
    start_scale: float = 2.0
    export_trajectories: bool = True

    def __post_init__(self):
        if self.trials_per_cell < 1:
            raise ConfigurationError(f"eval.trials_per_cell: should be >= 1, got {self.trials_per_cell}")
        unknown = [p for p in self.start_positions if p not in START_POSITIONS]
        if len(unknown) > 0:
            raise ConfigurationError(f"eval.start_positions: unknown {unknown}, valid: {list(START_POSITIONS)}")
        if len(self.lights) == 0:
            raise ConfigurationError("eval.lights: at least one light is required")
        if self.corruption is not None:
            CorruptionSpec.parse(self.corruption)
        if list(self.thresholds) != sorted(self.thresholds) or any(not 0 < t < 1 for t in self.thresholds):
            raise ConfigurationError(f"eval.thresholds: should be sorted and in (0, 1), got {self.thresholds}")
        if self.start_scale <= 1:
            raise ConfigurationError(f"eval.start_scale: should be > 1, got {self.start_scale}")

    @property
    def corruption_spec(self) -> Optional[CorruptionSpec]:
        return None if self.corruption is None else CorruptionSpec.parse(self.corruption)

    def effective_lights(self) -> List[Light]:
        """
        A light corruption replaces the protocol lights.
        """
        spec = self.corruption_spec
        if spec is not None and spec.light is not None:
            return [spec.light]
        return list(self.lights)

    @property
    def episodes_per_cell(self) -> int:
        return self.trials_per_cell * len(self.effective_lights())


def start_box(position: str, gt: BoundingBox, cfg: TransitionConfig, scale: float = 2.0) -> BoundingBox:
    """
    Deterministic initial RoI, `scale` times the groundtruth width, placed so that the object
    appears at the named location of the RoI (M: middle, TL: top left...).
    Clamped into the image, which keeps the object inside whenever possible.
    """
    if position not in START_POSITIONS:
        raise ConfigurationError(f"unknown start position {position}, valid: {list(START_POSITIONS)}")
    sign_x, sign_y = START_POSITIONS[position]
    w = min(max(scale * gt.w, cfg.w_min), cfg.w_max, cfg.image_size)
    offset = (w - gt.w) / 2
    gcx, gcy = gt.center
    x = gcx + sign_x * offset - w / 2
    y = gcy + sign_y * offset - w / 2
    x = min(max(x, 0.0), cfg.image_size - w)
    y = min(max(y, 0.0), cfg.image_size - w)
    return BoundingBox(x, y, w)


def standard_error(p: float, n: int) -> float:
    """
    Binomial standard error sqrt(p (1 - p) / n).
    """
    assert 0.0 <= p <= 1.0, f"ratio should be in [0, 1]: {p}"
    assert n >= 1, f"n should be positive: {n}"
    return math.sqrt(p * (1.0 - p) / n)


def format_ratio(p: float, se: float) -> str:
    """
    Percentages with the standard error in brackets, ex.: 95.8 (4.1)
    """
    return f"{100 * p:.1f} ({100 * se:.1f})"

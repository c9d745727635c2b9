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
Policies map (state, pose) to an action. The pose is the RoI box in the image environment
and the camera position in the workspace; learned policies only look at the state.
"""

from typing import Any, Callable, Optional

import numpy as np

from roi_reacher.agent.dqn import DQNAgent
from roi_reacher.env.geometry import NB_ACTIONS, Action, BoundingBox, TransitionConfig, jaccard, transition


Policy = Callable[[Any, Any], Action]

MOVES = [a for a in Action if a != Action.NoOp]


class GreedyAgentPolicy:
    def __init__(self, agent: DQNAgent):
        self.agent = agent

    def __call__(self, state: Any, pose: Any) -> Action:
        return self.agent.act(self.agent.encode(state), greedy=True)


class RandomPolicy:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def __call__(self, state: Any, pose: Any) -> Action:
        return Action(int(self.rng.integers(0, NB_ACTIONS)))


class NoOpPolicy:
    def __call__(self, state: Any, pose: Any) -> Action:
        return Action.NoOp


def box_distance(a: BoundingBox, b: BoundingBox) -> float:
    """
    L1 distance between centers plus width difference, in pixels.
    """
    (acx, acy), (bcx, bcy) = a.center, b.center
    return abs(acx - bcx) + abs(acy - bcy) + abs(a.w - b.w)


class LocalizationOracle:
    """
    Scripted policy with access to the groundtruth box: among the moves that bring the box
    closer to the groundtruth (center and width), pick the one with the best next overlap.
    Outcomes are averaged over the sigma range (min, mid, max), a single value when sigma is fixed.
    Restricting to distance reducing moves rules out cycles.
    """

    def __init__(self, gt_box: BoundingBox, cfg: TransitionConfig):
        self.gt_box = gt_box
        self.cfg = cfg
        self.sigmas = sorted({cfg.sigma_min, (cfg.sigma_min + cfg.sigma_max) / 2, cfg.sigma_max})

    def _expected(self, box: BoundingBox, action: Action):
        boxes = [transition(box, action, sigma, self.cfg) for sigma in self.sigmas]
        overlap = float(np.mean([jaccard(self.gt_box, b) for b in boxes]))
        distance = float(np.mean([box_distance(b, self.gt_box) for b in boxes]))
        return overlap, distance

    def __call__(self, state: Any, pose: BoundingBox) -> Action:
        current = box_distance(pose, self.gt_box)
        best: Optional[Action] = None
        best_key = None
        fallback: Optional[Action] = None
        fallback_key = None
        for action in MOVES:
            overlap, distance = self._expected(pose, action)
            key = (overlap, -distance)
            if distance < current - 1e-9 and (best_key is None or key > best_key):
                best, best_key = action, key
            if fallback_key is None or key > fallback_key:
                fallback, fallback_key = action, key
        if best is not None:
            return best
        return fallback

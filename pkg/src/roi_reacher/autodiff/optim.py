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

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from roi_reacher.autodiff.tensor import Tensor


@dataclass
class OptimState:
    """
    Plain (non centered) RMSprop state.
    """

    lr: float = 0.001
    decay_rate: float = 0.99
    epsilon: float = 1e-8
    accumulators: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        assert self.lr > 0, f"lr should be positive: {self.lr}"
        assert 0 < self.decay_rate < 1, f"decay_rate should be in (0, 1): {self.decay_rate}"
        assert self.epsilon > 0, f"epsilon should be positive: {self.epsilon}"


def rmsprop_step(params: List[Tensor], grads: List[Optional[np.ndarray]], opt: OptimState) -> None:
    """
    In place update: acc = rho * acc + (1 - rho) * g^2 ; p = p - lr * g / (sqrt(acc) + eps)
    Parameters without gradient are left untouched.
    :param params: parameters to update
    :param grads: one gradient per parameter (or None)
    :param opt: optimizer state, accumulators are created (zeros) on first call
    """
    assert len(params) == len(grads), f"{len(params)} parameters for {len(grads)} gradients"
    if len(opt.accumulators) == 0:
        opt.accumulators = [np.zeros_like(p.data) for p in params]
    assert len(opt.accumulators) == len(params), "optimizer state was built for another parameter list"
    for p, g, acc in zip(params, grads, opt.accumulators):
        if g is None:
            continue
        assert g.shape == p.shape, f"gradient shape {g.shape} vs parameter shape {p.shape}"
        acc *= opt.decay_rate
        acc += (1.0 - opt.decay_rate) * g * g
        p.data -= (opt.lr * g / (np.sqrt(acc) + opt.epsilon)).astype(p.dtype)


class RMSprop:
    def __init__(self, params: List[Tensor], lr: float = 0.001, decay_rate: float = 0.99, epsilon: float = 1e-8):
        self.params = params
        self.state = OptimState(lr=lr, decay_rate=decay_rate, epsilon=epsilon)

    @property
    def lr(self) -> float:
        return self.state.lr

    @lr.setter
    def lr(self, value: float) -> None:
        assert value > 0, f"lr should be positive: {value}"
        self.state.lr = value

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        rmsprop_step(self.params, [p.grad for p in self.params], self.state)

    def state_dict(self) -> Dict[str, np.ndarray]:
        """
        Accumulators by parameter position, empty before the first step.
        """
        return {f"rmsprop.{index}": acc.copy() for index, acc in enumerate(self.state.accumulators)}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        if len(state) == 0:
            self.state.accumulators = list()
            return
        assert len(state) == len(self.params), f"{len(state)} accumulators for {len(self.params)} parameters"
        accumulators = list()
        for index, p in enumerate(self.params):
            acc = np.asarray(state[f"rmsprop.{index}"])
            assert acc.shape == p.shape, f"accumulator {index}: shape {acc.shape} vs {p.shape}"
            accumulators.append(acc.astype(p.dtype, copy=True))
        self.state.accumulators = accumulators


@dataclass(frozen=True)
class ExponentialDecay:
    """
    lr(updates) = max(lr_min, lr_start * rate ^ updates)
    """

    lr_start: float = 0.001
    rate: float = 0.99995
    lr_min: float = 1e-5

    def __post_init__(self):
        assert self.lr_start > 0 and 0 < self.rate <= 1, f"invalid schedule: {self}"

    def __call__(self, updates: int) -> float:
        return max(self.lr_min, self.lr_start * self.rate**updates)

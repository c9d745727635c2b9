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
Q-networks and the dynamic filter gate.
Networks also own the state codec: `encode` turns an environment state into the compact
array stored in replay, `batch_input` stacks encoded states into a network input.
"""

from enum import Enum
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from roi_reacher.autodiff import functional as F
from roi_reacher.autodiff.layers import Conv2d, Conv2dSpec, Flatten, Linear, Module, ReLU, Sequential, Sigmoid
from roi_reacher.autodiff.tensor import Tensor
from roi_reacher.env.geometry import NB_ACTIONS
from roi_reacher.imaging.frame import Frame


class QNetworkVariant(Enum):
    Compact = "compact"
    Standard = "standard"


# (out_channels, kernel, stride) per conv layer, then hidden FC width
QNETWORK_LAYERS: Dict[QNetworkVariant, Tuple[List[Tuple[int, int, int]], int]] = {
    QNetworkVariant.Compact: ([(16, 8, 4), (32, 4, 2)], 256),
    QNetworkVariant.Standard: ([(32, 8, 4), (64, 4, 2), (64, 3, 1)], 512),
}

# (kernel, dilation, padding), spatial size is preserved
DYNAMIC_FILTER_LAYERS: List[Tuple[int, int, int]] = [(3, 1, 1), (3, 2, 2), (3, 4, 4), (1, 1, 0)]


class QNetwork(Module):
    def __init__(
        self,
        variant: QNetworkVariant,
        rng: np.random.Generator,
        state_size: int = 84,
        in_channels: int = 3,
        n_actions: int = NB_ACTIONS,
        dtype=np.float32,
    ):
        self.variant = variant
        convs, hidden = QNETWORK_LAYERS[variant]
        layers: List[Module] = list()
        channels, size = in_channels, state_size
        for out_channels, kernel, stride in convs:
            spec = Conv2dSpec(in_channels=channels, out_channels=out_channels, kernel=kernel, stride=stride)
            layers += [Conv2d(spec, rng=rng, dtype=dtype), ReLU()]
            channels, size = out_channels, spec.output_size(size)
        layers += [
            Flatten(),
            Linear(channels * size * size, hidden, rng=rng, dtype=dtype),
            ReLU(),
            Linear(hidden, n_actions, rng=rng, dtype=dtype),
        ]
        self.layers = Sequential(*layers)

    def forward(self, x: Tensor) -> Tensor:
        return self.layers(x)


class DynamicFilter(Module):
    """
    Input conditioned gate: dilated 3x3 convs with ReLU, then a 1x1 conv with sigmoid.
    Output has the input shape, values in (0, 1).
    """

    def __init__(self, rng: np.random.Generator, channels: int = 3, dtype=np.float32):
        layers: List[Module] = list()
        for index, (kernel, dilation, padding) in enumerate(DYNAMIC_FILTER_LAYERS):
            spec = Conv2dSpec(channels, channels, kernel=kernel, dilation=dilation, padding=padding)
            layers.append(Conv2d(spec, rng=rng, dtype=dtype))
            layers.append(Sigmoid() if index == len(DYNAMIC_FILTER_LAYERS) - 1 else ReLU())
        self.layers = Sequential(*layers)

    def forward(self, x: Tensor) -> Tensor:
        return self.layers(x)


class PolicyNetwork(Module):
    """
    Q-network with an optional dynamic filter: q = Q(s * gate(s)) or q = Q(s).
    Both parts are trained jointly through the TD loss.
    """

    def __init__(
        self,
        variant: QNetworkVariant,
        use_dynamic_filter: bool,
        rng: np.random.Generator,
        state_size: int = 84,
        dtype=np.float32,
    ):
        self.variant = variant
        self.use_dynamic_filter = use_dynamic_filter
        self.state_size = state_size
        self.dtype = dtype
        self.dynamic_filter = DynamicFilter(rng=rng, dtype=dtype) if use_dynamic_filter else None
        self.q_network = QNetwork(variant, rng=rng, state_size=state_size, dtype=dtype)

    def gated_input(self, x: Tensor) -> Tensor:
        if self.dynamic_filter is None:
            return x
        return F.mul(x, self.dynamic_filter(x))

    def forward(self, x: Tensor) -> Tensor:
        return self.q_network(self.gated_input(x))

    def encode(self, state: Frame) -> np.ndarray:
        """
        8 bits channel first storage of a state.
        """
        assert state.shape == (self.state_size, self.state_size, 3), f"unexpected state shape {state.shape}"
        return np.ascontiguousarray(state.to_uint8().transpose(2, 0, 1))

    def batch_input(self, encoded: Sequence[np.ndarray]) -> Tensor:
        return Tensor(np.stack(encoded).astype(self.dtype) / self.dtype(255.0))

    def descriptor(self) -> Dict[str, Any]:
        return {
            "network": "policy",
            "variant": self.variant.value,
            "use_dynamic_filter": self.use_dynamic_filter,
            "state_size": self.state_size,
            "n_actions": NB_ACTIONS,
            "layers": [[name, list(shape)] for name, shape in self.layer_shapes()],
        }


class TabularQNetwork(Module):
    """
    One Q-value per (state, action): a bias free linear layer on one-hot states.
    Used to exercise the DQN machinery on small discrete problems.
    """

    def __init__(self, n_states: int, n_actions: int = NB_ACTIONS, dtype=np.float64):
        self.n_states = n_states
        self.n_actions = n_actions
        self.dtype = dtype
        self.table = Linear(n_states, n_actions, rng=np.random.default_rng(0), bias=False, dtype=dtype)
        self.table.weight.data[...] = 0.0

    def forward(self, x: Tensor) -> Tensor:
        return self.table(x)

    def encode(self, state: int) -> np.ndarray:
        assert 0 <= int(state) < self.n_states, f"state {state} out of [0, {self.n_states})"
        return np.asarray(int(state))

    def batch_input(self, encoded: Sequence[np.ndarray]) -> Tensor:
        one_hot = np.zeros((len(encoded), self.n_states), dtype=self.dtype)
        one_hot[np.arange(len(encoded)), np.asarray(encoded, dtype=np.int64)] = 1.0
        return Tensor(one_hot)

    def descriptor(self) -> Dict[str, Any]:
        return {"network": "tabular", "n_states": self.n_states, "n_actions": self.n_actions}

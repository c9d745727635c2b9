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
Layers with trainable parameters, PyTorch-like API (parameter layout included).
"""

from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from roi_reacher.autodiff import functional as F
from roi_reacher.autodiff.tensor import Tensor, parameter


@dataclass(frozen=True)
class Conv2dSpec:
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    dilation: int = 1
    padding: int = 0

    def __post_init__(self):
        assert self.in_channels > 0 and self.out_channels > 0, f"invalid channel counts: {self}"
        assert self.kernel > 0 and self.stride > 0 and self.dilation > 0, f"invalid conv spec: {self}"
        assert self.padding >= 0, f"padding should be >= 0: {self.padding}"

    def output_size(self, size: int) -> int:
        return F.conv_output_size(size, self.kernel, self.stride, self.dilation, self.padding)


def uniform_fan_in(shape: Tuple[int, ...], fan_in: int, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Module:
    """
    Parameters are discovered from attributes, in declaration order:
    Tensor attributes requiring a gradient, sub-modules and lists of sub-modules.
    """

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(prefix=f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(prefix=f"{prefix}{name}.{index}.")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return OrderedDict((name, p.data.copy()) for name, p in self.named_parameters())

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own.keys()) - set(state.keys()))
        unexpected = sorted(set(state.keys()) - set(own.keys()))
        assert len(missing) == 0 and len(unexpected) == 0, f"missing: {missing}, unexpected: {unexpected}"
        for name, p in own.items():
            value = np.asarray(state[name])
            assert value.shape == p.shape, f"{name}: shape {value.shape} vs expected {p.shape}"
            p.data = value.astype(p.dtype, copy=True)

    def layer_shapes(self) -> List[Tuple[str, Tuple[int, ...]]]:
        return [(name, p.shape) for name, p in self.named_parameters()]

    def astype(self, dtype) -> "Module":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self


class Conv2d(Module):
    def __init__(self, spec: Conv2dSpec, rng: np.random.Generator, dtype=np.float32):
        self.spec = spec
        fan_in = spec.in_channels * spec.kernel * spec.kernel
        shape = (spec.out_channels, spec.in_channels, spec.kernel, spec.kernel)
        self.weight = parameter(uniform_fan_in(shape, fan_in, rng, dtype), name="weight")
        self.bias = parameter(uniform_fan_in((spec.out_channels,), fan_in, rng, dtype), name="bias")

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(
            x, self.weight, self.bias, stride=self.spec.stride, padding=self.spec.padding, dilation=self.spec.dilation
        )


class Linear(Module):
    def __init__(
        self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True, dtype=np.float32
    ):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = parameter(uniform_fan_in((out_features, in_features), in_features, rng, dtype), name="weight")
        self.bias: Optional[Tensor] = None
        if bias:
            self.bias = parameter(uniform_fan_in((out_features,), in_features, rng, dtype), name="bias")

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class ReLU(Module):
    def forward(self, x: Tensor) -> Tensor:
        return F.relu(x)


class Sigmoid(Module):
    def forward(self, x: Tensor) -> Tensor:
        return F.sigmoid(x)


class Flatten(Module):
    def forward(self, x: Tensor) -> Tensor:
        return F.flatten(x)


class Sequential(Module):
    def __init__(self, *layers: Module):
        self.layers = list(layers)

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x


def count_params(module: Module) -> int:
    """
    Number of trainable scalars, biases included.
    """
    return int(sum(p.size for p in module.parameters()))

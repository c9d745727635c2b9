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
Reverse mode differentiation on numpy arrays.
A Tensor records the tensors it was computed from and a closure mapping its gradient
to the gradients of its parents. backward() walks the graph once, then the graph is released.
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    def __init__(
        self,
        data: np.ndarray,
        requires_grad: bool = False,
        parents: Tuple["Tensor", ...] = (),
        backward_fn: Optional[BackwardFn] = None,
        name: Optional[str] = None,
    ):
        """
        :param data: values, any shape
        :param requires_grad: leaf tensors with this flag receive a gradient in backward()
        :param parents: tensors this one has been computed from
        :param backward_fn: maps the gradient of this tensor to the gradients of the parents
        :param name: optional name, used by modules and checkpoints
        """
        self.data: np.ndarray = np.asarray(data)
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._consumed = False

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return len(self.parents) == 0

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        from roi_reacher.autodiff.functional import add

        return add(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        from roi_reacher.autodiff.functional import mul

        return mul(self, other)

    def _topological_order(self) -> List["Tensor"]:
        order: List[Tensor] = list()
        visited = set()
        stack = [(self, False)]
        while len(stack) > 0:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node.parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self) -> None:
        """
        Populate .grad of every leaf tensor requiring a gradient, reachable from this scalar.
        Gradients accumulate on leaves. The graph can't be used twice.
        """
        if self.data.size != 1:
            raise ValueError(f"backward() expects a scalar, got shape {self.shape}")
        if self._consumed:
            raise RuntimeError("backward() called twice on the same graph")
        if not self.requires_grad:
            raise RuntimeError("tensor doesn't require grad, nothing to differentiate")
        order = self._topological_order()
        grads: Dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node.is_leaf:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            parent_grads = node.backward_fn(grad)
            for parent, parent_grad in zip(node.parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + parent_grad
                else:
                    grads[id(parent)] = parent_grad
        for node in order:
            if not node.is_leaf:
                node._consumed = True
                node.backward_fn = None
                node.parents = ()
        self._consumed = True


def parameter(data: np.ndarray, name: Optional[str] = None) -> Tensor:
    """
    Trainable leaf tensor.
    """
    return Tensor(data=data, requires_grad=True, name=name)

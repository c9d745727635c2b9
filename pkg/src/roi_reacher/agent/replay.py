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

from dataclasses import dataclass
from typing import List, Optional

import numpy as np


@dataclass(frozen=True)
class Experience:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


class ReplayBuffer:
    """
    Fixed capacity ring, oldest experience evicted first.
    """

    def __init__(self, capacity: int = 5000):
        assert capacity > 0, f"capacity should be positive: {capacity}"
        self.capacity = capacity
        self.storage: List[Optional[Experience]] = [None] * capacity
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, experience: Experience) -> None:
        self.storage[self.cursor] = experience
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> List[Experience]:
        """
        Uniform sampling with replacement over the current content.
        """
        if self.size < batch_size:
            raise ValueError(f"can't sample {batch_size} experiences from a buffer of size {self.size}")
        indexes = rng.integers(0, self.size, size=batch_size)
        return [self.storage[i] for i in indexes]

    def contents(self) -> List[Experience]:
        """
        Stored experiences, oldest first.
        """
        if self.size < self.capacity:
            return list(self.storage[: self.size])
        return list(self.storage[self.cursor :] + self.storage[: self.cursor])

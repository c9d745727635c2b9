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
Seeded random generators.
Every consumer gets its own generator derived from the run seed and a stream name,
so adding random draws in one place never shifts the draws of another.
"""

import zlib

import numpy as np


def make_rng(seed: int, *stream: object) -> np.random.Generator:
    """
    Build an independent generator for a named stream.
    :param seed: top level seed of the run
    :param stream: stream identifiers (strings or integers), ex.: ("eval", cell_index, trial)
    :return: numpy generator
    """
    keys = [int(seed) & 0xFFFFFFFF]
    for item in stream:
        if isinstance(item, (int, np.integer)):
            keys.append(int(item) & 0xFFFFFFFF)
        else:
            keys.append(zlib.crc32(str(item).encode("utf-8")))
    return np.random.default_rng(np.random.SeedSequence(keys))

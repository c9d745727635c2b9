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
Shared functions related to logging, timings and output comparison.
"""

import logging
import os
import time
from contextlib import contextmanager
from typing import List, Sequence

import coloredlogs
import numpy as np

from roi_reacher.utils.errors import ConfigurationError


NB_THREADS_ENV = "ROI_REACHER_NB_THREADS"


def print_timings(name: str, timings: List[float]) -> None:
    """
    Format and print latencies.

    :param name: measured step name
    :param timings: latencies in seconds
    """
    if len(timings) == 0:
        print(f"[{name}] no measure")
        return
    mean_time = 1e3 * np.mean(timings)
    std_time = 1e3 * np.std(timings)
    min_time = 1e3 * np.min(timings)
    max_time = 1e3 * np.max(timings)
    median, percent_95_time, percent_99_time = 1e3 * np.percentile(timings, [50, 95, 99])
    print(
        f"[{name}] "
        f"mean={mean_time:.2f}ms, "
        f"sd={std_time:.2f}ms, "
        f"min={min_time:.2f}ms, "
        f"max={max_time:.2f}ms, "
        f"median={median:.2f}ms, "
        f"95p={percent_95_time:.2f}ms, "
        f"99p={percent_99_time:.2f}ms"
    )


def setup_logging(level: int = logging.INFO) -> None:
    """
    Set the generic Python logger, with colors on terminals
    :param level: logger level
    """
    coloredlogs.install(level=level, fmt="%(asctime)s %(levelname)-8s %(message)s", datefmt="%m/%d/%Y %H:%M:%S")


@contextmanager
def track_time(buffer: List[float]) -> None:
    """
    A context manager to perform latency measures
    :param buffer: a List where to save latencies for each measure
    """
    start = time.perf_counter()
    yield
    end = time.perf_counter()
    buffer.append(end - start)


def get_nb_threads() -> int:
    """
    Thread count for parallel evaluation, read from the environment.
    :return: number of worker threads, 1 means single-threaded (bit reproducible)
    """
    value = os.environ.get(NB_THREADS_ENV, "1")
    try:
        nb_threads = int(value)
    except ValueError:
        raise ConfigurationError(f"{NB_THREADS_ENV} should be an integer, got: {value}")
    if nb_threads < 1:
        raise ConfigurationError(f"{NB_THREADS_ENV} should be positive, got: {nb_threads}")
    return nb_threads


def to_numpy(tensors: Sequence) -> np.ndarray:
    """
    Convert list of autodiff / torch / numpy tensors to a numpy tensor
    :param tensors: list of tensors
    :return: numpy tensor
    """
    result = list()
    for t in tensors:
        if hasattr(t, "data") and isinstance(t.data, np.ndarray):
            result.append(t.data)
        elif hasattr(t, "detach"):
            result.append(t.detach().cpu().numpy())
        elif isinstance(t, np.ndarray):
            result.append(t)
        elif isinstance(t, (tuple, list)):
            result.append(to_numpy(t))
        else:
            raise Exception(f"unknown tensor type: {type(t)}")
    return np.asarray(result)


def compare_outputs(reference_output: np.ndarray, engine_output: np.ndarray) -> float:
    """
    Compare 2 outputs by computing the max of absolute value difference between them.

    :param reference_output: reference output
    :param engine_output: other engine output
    :return: difference between outputs as a single float
    """
    return float(np.max(np.abs(reference_output - engine_output)))

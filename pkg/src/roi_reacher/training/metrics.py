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
Per episode metrics, written to CSV by a background thread fed through a queue.
"""

import csv
import queue
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    total_reward: float
    steps: int
    final_jaccard: Optional[float]
    reached_goal: bool
    epsilon: float
    wall_time: float = 0.0


METRICS_HEADER = ["episode", "total_reward", "steps", "final_jaccard", "reached_goal", "epsilon"]


def _format_float(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def record_to_row(record: EpisodeRecord, with_wall_time: bool) -> List[str]:
    row = [
        str(record.episode),
        _format_float(record.total_reward),
        str(record.steps),
        _format_float(record.final_jaccard),
        str(int(record.reached_goal)),
        _format_float(record.epsilon),
    ]
    if with_wall_time:
        row.append(_format_float(record.wall_time))
    return row


def running_success(records: Sequence[EpisodeRecord], window: int = 30) -> List[float]:
    """
    Running mean of reached_goal over the last `window` episodes (fewer at the beginning).
    """
    assert window >= 1, f"window should be positive: {window}"
    result = list()
    total = 0
    for index, record in enumerate(records):
        total += int(record.reached_goal)
        if index >= window:
            total -= int(records[index - window].reached_goal)
        result.append(total / min(index + 1, window))
    return result


class MetricsWriter:
    """
    Append only CSV writer. Records are queued by the training loop and written by a
    dedicated thread in emission order. Use as a context manager.
    """

    _STOP = object()

    def __init__(self, path: Union[str, Path], with_wall_time: bool = False):
        self.path = Path(path)
        self.with_wall_time = with_wall_time
        self.queue: queue.Queue = queue.Queue()
        self.thread: Optional[threading.Thread] = None
        self.error: Optional[BaseException] = None

    def __enter__(self) -> "MetricsWriter":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        header = METRICS_HEADER + (["wall_time"] if self.with_wall_time else [])
        # fail early on unwritable paths, before any training happens
        with self.path.open("w", newline="") as f:
            csv.writer(f, lineterminator="\n").writerow(header)
        self.thread = threading.Thread(target=self._run, name="metrics_writer", daemon=True)
        self.thread.start()
        return self

    def _run(self) -> None:
        try:
            with self.path.open("a", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                while True:
                    record = self.queue.get()
                    if record is self._STOP:
                        break
                    writer.writerow(record_to_row(record, self.with_wall_time))
        except OSError as e:
            self.error = e

    def write(self, record: EpisodeRecord) -> None:
        self.queue.put(record)

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.queue.put(self._STOP)
        self.thread.join()
        if self.error is not None and exc_type is None:
            raise self.error

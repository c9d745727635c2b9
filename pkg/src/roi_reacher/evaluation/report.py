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
Evaluation reports: JSON document plus CSV companions for plotting.
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from roi_reacher.evaluation.protocol import format_ratio, standard_error


@dataclass(frozen=True)
class CellResult:
    name: str
    successes: int
    n: int

    @property
    def ratio(self) -> float:
        return self.successes / self.n

    @property
    def standard_error(self) -> float:
        return standard_error(self.ratio, self.n)

    @property
    def formatted(self) -> str:
        return format_ratio(self.ratio, self.standard_error)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "successes": self.successes,
            "n": self.n,
            "ratio": self.ratio,
            "standard_error": self.standard_error,
            "formatted": self.formatted,
        }


def aggregate(name: str, flags: Sequence[bool]) -> CellResult:
    return CellResult(name=name, successes=int(sum(bool(f) for f in flags)), n=len(flags))


@dataclass
class EvalReport:
    seed: int
    policy: str
    corruption: Optional[str]
    protocol: Dict[str, Any]
    cells: List[CellResult]
    overall: CellResult
    curve: List[Tuple[float, float]]
    mean_steps: float
    trajectories: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "policy": self.policy,
            "corruption": self.corruption,
            "protocol": self.protocol,
            "cells": [c.to_dict() for c in self.cells],
            "overall": self.overall.to_dict(),
            "curve": [{"threshold": t, "ratio": r} for t, r in self.curve],
            "mean_steps": self.mean_steps,
            "trajectories": self.trajectories,
        }


def write_json(document: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def write_csv(header: Sequence[str], rows: Sequence[Sequence[Any]], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_report(report: EvalReport, output_dir: Union[str, Path], name: str = "report") -> List[Path]:
    """
    :return: paths of the JSON report, the per cell CSV and the threshold curve CSV
    """
    output_dir = Path(output_dir)
    cell_header = ["cell", "successes", "n", "ratio", "standard_error", "formatted"]
    cell_rows = [
        [c.name, c.successes, c.n, f"{c.ratio:.6f}", f"{c.standard_error:.6f}", c.formatted] for c in report.cells
    ]
    return [
        write_json(report.to_dict(), output_dir / f"{name}.json"),
        write_csv(cell_header, cell_rows, output_dir / f"{name}_cells.csv"),
        write_csv(["threshold", "ratio"], [[t, f"{r:.6f}"] for t, r in report.curve], output_dir / f"{name}_curve.csv"),
    ]


@dataclass
class DeployTable:
    """
    Rows are models, columns are start positions (or objects), cells are success ratios.
    """

    columns: List[str]
    rows: Dict[str, List[CellResult]] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def add_row(self, name: str, cells: List[CellResult]) -> None:
        assert [c.name for c in cells] == self.columns, f"row {name} doesn't match the columns {self.columns}"
        self.rows[name] = cells

    def to_dict(self) -> Dict[str, Any]:
        return {
            "columns": self.columns,
            "rows": {name: [c.to_dict() for c in cells] for name, cells in self.rows.items()},
            "metadata": self.metadata,
        }

    def write(self, output_dir: Union[str, Path], name: str = "deploy") -> List[Path]:
        output_dir = Path(output_dir)
        rows = [[model] + [c.formatted for c in cells] for model, cells in self.rows.items()]
        return [
            write_json(self.to_dict(), output_dir / f"{name}.json"),
            write_csv(["model"] + self.columns, rows, output_dir / f"{name}.csv"),
        ]

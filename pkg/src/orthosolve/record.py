"""Per-iteration and terminal diagnostics of a single solve."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("iter", "obj", "feas", "kkt", "dx", "dz_gap", "dy", "elapsed_ms")

CONVERGED = "Converged"
BUDGET = "Budget"
DIVERGED = "Diverged"


@dataclass
class RunRecord:
    algorithm: str
    status: str
    total_iters: int
    X: np.ndarray
    Y: np.ndarray
    final_obj: float
    final_feas: float
    final_kkt: float
    stationarity_bound: float
    wall_ms: float
    params: dict
    rows: list = field(default_factory=list)
    invariant_violations: dict | None = None
    state: object = None

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def footer(self, timing: bool = True) -> dict:
        out = {
            "algorithm": self.algorithm,
            "status": self.status,
            "total_iters": self.total_iters,
            "final_obj": self.final_obj,
            "final_feas": self.final_feas,
            "final_kkt": self.final_kkt,
            "stationarity_bound": self.stationarity_bound,
            "wall_ms": self.wall_ms if timing else 0.0,
            "params": self.params,
        }
        if self.invariant_violations is not None:
            out["invariant_violations"] = self.invariant_violations
        return out

    def write_csv(self, path, timing: bool = True) -> None:
        with open(Path(path), "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in self.rows:
                row = list(row)
                if not timing:
                    row[-1] = 0.0
                writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])

    def write_json(self, path, timing: bool = True) -> None:
        Path(path).write_text(
            json.dumps(self.footer(timing), indent=2, sort_keys=True, default=_jsonable) + "\n",
            encoding="utf-8",
        )


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")

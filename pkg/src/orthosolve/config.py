"""JSON run configuration for the command line.

Example::

    {
      "problem": {"kind": "qp", "m": 20, "n": 2, "mu": 0.35, "seed": 0},
      "algorithm": "lsalm",
      "params": {"preset": "qp_baseline"},
      "stop": {"mode": "qp"},
      "init": {"seed": 10000},
      "output": {"csv": "run.csv", "json": "run.json", "log_every": 1}
    }

``problem.kind`` is ``qp``, ``spca``, ``gm`` or ``load`` (with ``path``).
``params`` holds LSALM fields (``rho``, ``lambda``, ``r``, ``alpha``,
``beta``, ``eps``, ``R_Y``, ...) or RGD fields; an optional ``preset`` key
(``qp_baseline``, ``sparse_pca``, ``graph_matching``) supplies defaults that
the other keys override.  ``init`` is ``{"seed": s}``, ``{"path": file}``,
``{"rsm_iters": k}``, ``{"rgd_iters": k}`` or ``{"spectral": true}``.
Relative paths are resolved against the config file's directory.  The
environment variable ``ORTHOSOLVE_SEED`` replaces the problem seed and the
initial-point seed (the latter becomes seed + 10000).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import RgdParams
from .errors import ParameterError
from .harness import INIT_SEED_OFFSET, make_initial, make_problem
from .lsalm import LsalmParams, StopRule
from .matcore import read_matrix

SEED_ENV = "ORTHOSOLVE_SEED"
ALGORITHMS = ("lsalm", "rgd")


@dataclass
class RunConfig:
    problem: dict
    algorithm: str = "lsalm"
    params: dict = field(default_factory=dict)
    stop: dict | None = None
    init: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ParameterError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if "kind" not in self.problem:
            raise ParameterError("problem.kind is required")

    def resolve(self, path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def seed(self) -> int:
        return int(self.problem.get("seed", 0))

    def build_problem(self):
        template = dict(self.problem)
        if template["kind"] == "load":
            template["path"] = self.resolve(template["path"])
        return make_problem(template, self.seed)

    def build_params(self, problem):
        raw = dict(self.params)
        preset = raw.pop("preset", None)
        if self.algorithm == "rgd":
            if preset is not None:
                raise ParameterError("rgd has no presets")
            return RgdParams.from_dict(raw)
        if "lambda" in raw:
            raw["lam"] = raw.pop("lambda")
        if preset == "qp_baseline":
            return LsalmParams.qp_baseline(**raw)
        if preset == "sparse_pca":
            return LsalmParams.sparse_pca(problem.m, problem.n, problem.smooth_lipschitz, **raw)
        if preset == "graph_matching":
            return LsalmParams.graph_matching(**raw)
        if preset is not None:
            raise ParameterError(f"unknown preset {preset!r}")
        return LsalmParams.from_dict(raw)

    def build_stop(self, problem) -> StopRule:
        if self.stop is None:
            return StopRule.for_problem(problem.name)
        return StopRule(**self.stop)

    def build_initial(self, problem) -> np.ndarray:
        if "path" in self.init:
            return read_matrix(self.resolve(self.init["path"]))
        return make_initial(problem, self.init, self.seed + INIT_SEED_OFFSET)

    @property
    def log_every(self) -> int:
        return int(self.output.get("log_every", 1))

    def output_path(self, key: str) -> Path | None:
        value = self.output.get(key)
        return None if value is None else self.resolve(value)


def load_config(path) -> RunConfig:
    """Read a config file and apply the ``ORTHOSOLVE_SEED`` override."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FileNotFoundError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict) or "problem" not in data:
        raise ParameterError(f"{path}: expected an object with a 'problem' entry")
    cfg = RunConfig(
        problem=dict(data["problem"]),
        algorithm=data.get("algorithm", "lsalm"),
        params=dict(data.get("params", {})),
        stop=data.get("stop"),
        init=dict(data.get("init", {})),
        output=dict(data.get("output", {})),
        base_dir=path.parent,
    )
    override = os.environ.get(SEED_ENV)
    if override:
        try:
            seed = int(override)
        except ValueError:
            raise ParameterError(f"{SEED_ENV} must be an integer, got {override!r}") from None
        cfg.problem["seed"] = seed
        if "seed" in cfg.init:
            cfg.init["seed"] = seed + INIT_SEED_OFFSET
    return cfg

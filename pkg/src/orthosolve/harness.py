"""Experiment drivers: instance generation, parameter sweeps and summary metrics."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import rgd_warmstart, rsm_warmstart
from .errors import DomainError, EmptyBatch, ParameterError, ShapeMismatch
from .lsalm import LsalmParams, StopRule, init_feasible, run
from .matcore import SplitMix64
from .problems import (
    gen_graph_matching,
    gen_qp,
    gen_spca,
    load_problem,
    spectral_start,
    synthetic_points,
)
from .record import CONVERGED

SWEEPABLE = ("rho", "lambda", "r", "alpha", "beta", "eps")
INIT_SEED_OFFSET = 10000
SPARSITY_THRESHOLD = 1e-5


# instances ---------------------------------------------------------------


def make_problem(template: dict, seed: int):
    """Build a problem from a template dict and an instance seed.

    Template keys: ``kind`` in ``qp | spca | gm | load``; ``m``, ``n``, ``mu``;
    ``p`` (sparse PCA rows); ``noise`` (graph-matching landmark jitter, default 0)
    and ``edges`` (``delaunay`` or ``complete``); ``path`` (for ``load``).
    """
    kind = template.get("kind")
    if kind == "qp":
        return gen_qp(int(template["m"]), int(template["n"]), float(template["mu"]), seed)
    if kind == "spca":
        return gen_spca(int(template["p"]), int(template["m"]), int(template["n"]),
                        float(template["mu"]), seed)
    if kind == "gm":
        n = int(template["n"])
        pts1 = synthetic_points(n, seed)
        pts2 = pts1 + float(template.get("noise", 0.0)) * SplitMix64(seed + 1).normal(pts1.shape)
        return gen_graph_matching(pts1, pts2, float(template.get("mu", 2.0)), seed=seed,
                                  edges=template.get("edges", "delaunay"))
    if kind == "load":
        return load_problem(template["path"])
    raise ParameterError(f"unknown problem kind {kind!r}")


def make_initial(problem, init: dict | None, seed: int) -> np.ndarray:
    """Feasible starting point: a seeded random orthonormal matrix, optionally warm-started.

    ``init`` keys: ``seed`` (overrides ``seed``), ``rsm_iters`` (subgradient
    warm start), ``rgd_iters`` with ``rgd_step`` (fixed-step gradient warm
    start), or ``spectral`` (graph matching: leading eigenvector of ``K``).
    """
    init = init or {}
    if init.get("spectral"):
        return spectral_start(problem)
    X0 = init_feasible(problem.m, problem.n, int(init.get("seed", seed)))
    if init.get("rsm_iters"):
        X0 = rsm_warmstart(problem, int(init["rsm_iters"]), X0)
    if init.get("rgd_iters"):
        X0 = rgd_warmstart(problem, int(init["rgd_iters"]), X0, float(init.get("rgd_step", 0.1)))
    return X0


# sweeps ------------------------------------------------------------------


@dataclass(frozen=True)
class Grid2D:
    r_values: tuple
    beta_values: tuple


@dataclass
class SweepSpec:
    """One-parameter sweep (``varied``/``values``) or an ``r`` x ``beta`` grid."""

    base_params: LsalmParams
    problem: dict
    seeds: tuple
    varied: str | None = None
    values: tuple = ()
    grid: Grid2D | None = None
    stop: StopRule | None = None
    init: dict | None = None

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        self.values = tuple(float(v) for v in self.values)
        if not self.seeds:
            raise ParameterError("a sweep needs at least one instance seed")
        if self.grid is None:
            if self.varied not in SWEEPABLE:
                raise ParameterError(f"cannot sweep {self.varied!r}; choose from {SWEEPABLE}")
            if not self.values:
                raise ParameterError("sweep values must be nonempty")
        elif not (self.grid.r_values and self.grid.beta_values):
            raise ParameterError("grid axes must be nonempty")

    @property
    def instances(self) -> int:
        return len(self.seeds)

    @property
    def axis_names(self) -> tuple:
        return ("r", "beta") if self.grid is not None else (self.varied,)

    def cells(self) -> list:
        if self.grid is not None:
            return [(r, b) for r in self.grid.r_values for b in self.grid.beta_values]
        return [(v,) for v in self.values]

    def params_for(self, cell) -> LsalmParams:
        changes = {}
        for name, value in zip(self.axis_names, cell):
            changes["lam" if name == "lambda" else name] = float(value)
        return replace(self.base_params, **changes)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        grid = None
        if "grid" in d:
            grid = Grid2D(tuple(float(v) for v in d["grid"]["r"]),
                          tuple(float(v) for v in d["grid"]["beta"]))
        stop = StopRule(**d["stop"]) if "stop" in d else None
        seeds = d.get("seeds")
        if seeds is None:
            seeds = range(int(d.get("first_seed", 0)), int(d.get("first_seed", 0))
                          + int(d["instances"]))
        return cls(base_params=LsalmParams.from_dict(d["params"]), problem=dict(d["problem"]),
                   seeds=tuple(seeds), varied=d.get("varied"),
                   values=tuple(d.get("values", ())), grid=grid, stop=stop,
                   init=d.get("init"))


@dataclass(frozen=True)
class SweepCell:
    values: tuple
    instances: int
    converged_count: int
    diverged_count: int
    budget_count: int
    mean_iters: float
    mean_final_feas: float
    mean_final_obj: float


@dataclass
class SweepResult:
    axis_names: tuple
    cells: list = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*self.axis_names, "instances", "converged_count", "diverged_count",
                        "budget_count", "mean_iters", "mean_feas", "mean_obj"])
            for c in self.cells:
                w.writerow([*(repr(v) for v in c.values), c.instances, c.converged_count,
                            c.diverged_count, c.budget_count, repr(c.mean_iters),
                            repr(c.mean_final_feas), repr(c.mean_final_obj)])


def _mean(xs) -> float:
    return float(np.mean(xs)) if len(xs) else math.nan


def _solve_one(args):
    spec, cell, seed, factory = args
    problem = factory(seed) if factory is not None else make_problem(spec.problem, seed)
    X0 = make_initial(problem, spec.init, seed + INIT_SEED_OFFSET)
    stop = spec.stop or StopRule.for_problem(problem.name)
    rec = run(problem, spec.params_for(cell), stop, X0, log_every=10**9)
    return rec.status, rec.total_iters, rec.final_feas, rec.final_obj


def run_sweep(spec: SweepSpec, jobs: int = 1, problem_factory=None) -> SweepResult:
    """Solve every (cell, seed) pair and aggregate per cell.

    Means of iterations, feasibility and objective are over converged runs
    only (``nan`` when none converged).  ``problem_factory(seed)`` replaces
    the template when given; it must be picklable for ``jobs > 1``.
    Results do not depend on ``jobs``.
    """
    cells = spec.cells()
    tasks = [(spec, cell, seed, problem_factory) for cell in cells for seed in spec.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_solve_one, tasks))
    else:
        outcomes = [_solve_one(t) for t in tasks]
    result = SweepResult(axis_names=spec.axis_names)
    k = spec.instances
    for i, cell in enumerate(cells):
        chunk = outcomes[i * k:(i + 1) * k]
        ok = [o for o in chunk if o[0] == CONVERGED]
        result.cells.append(SweepCell(
            values=tuple(float(v) for v in cell),
            instances=k,
            converged_count=len(ok),
            diverged_count=sum(o[0] == "Diverged" for o in chunk),
            budget_count=sum(o[0] == "Budget" for o in chunk),
            mean_iters=_mean([o[1] for o in ok]),
            mean_final_feas=_mean([o[2] for o in ok]),
            mean_final_obj=_mean([o[3] for o in ok]),
        ))
    return result


# metrics -----------------------------------------------------------------


def sparsity(X: np.ndarray, threshold: float = SPARSITY_THRESHOLD) -> float:
    """Fraction of entries with ``|x| < threshold``."""
    if not threshold > 0:
        raise ParameterError(f"threshold must be positive, got {threshold}")
    X = np.asarray(X)
    return float(np.count_nonzero(np.abs(X) < threshold)) / X.size


def round_assignment(X: np.ndarray) -> np.ndarray:
    """Round a square matrix to a permutation matrix.

    Each row first takes its argmax column.  While some column is claimed by
    several rows, the row with the largest entry there keeps it and every
    other claimant moves to the currently unclaimed column where its entry is
    largest.  Ties go to the lowest index.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ShapeMismatch(f"rounding needs a square matrix, got shape {X.shape}")
    n = X.shape[0]
    choice = np.argmax(X, axis=1)
    while True:
        counts = np.bincount(choice, minlength=n)
        crowded = np.flatnonzero(counts > 1)
        if crowded.size == 0:
            break
        col = crowded[0]
        rows = np.flatnonzero(choice == col)
        winner = rows[np.argmax(X[rows, col])]
        for row in rows:
            if row == winner:
                continue
            empty = np.flatnonzero(np.bincount(choice, minlength=n) == 0)
            choice[row] = empty[np.argmax(X[row, empty])]
    out = np.zeros((n, n))
    out[np.arange(n), choice] = 1.0
    return out


def is_permutation(P: np.ndarray) -> bool:
    P = np.asarray(P)
    return (P.ndim == 2 and P.shape[0] == P.shape[1] and bool(np.all((P == 0) | (P == 1)))
            and bool(np.all(P.sum(axis=0) == 1)) and bool(np.all(P.sum(axis=1) == 1)))


def f_measure(pred: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of rows whose assignment agrees; precision and recall coincide."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ShapeMismatch(f"shapes differ: {pred.shape} vs {truth.shape}")
    for P, label in ((pred, "pred"), (truth, "truth")):
        if not is_permutation(P):
            raise DomainError(f"{label} is not a permutation matrix")
    return float(np.sum(pred * truth)) / pred.shape[0]


def batch_stats(records, threshold: float = SPARSITY_THRESHOLD) -> dict:
    """Average time, iterations, time per iteration, objective and sparsity.

    Keys without a prefix average over all records; ``converged_*`` keys
    average over converged records only.
    """
    records = list(records)
    if not records:
        raise EmptyBatch("batch_stats needs at least one record")

    def summary(recs):
        if not recs:
            return dict.fromkeys(("time_ms", "iters", "time_per_iter_ms", "obj", "sparsity"),
                                 math.nan)
        return {
            "time_ms": _mean([r.wall_ms for r in recs]),
            "iters": _mean([r.total_iters for r in recs]),
            "time_per_iter_ms": _mean([r.wall_ms / max(r.total_iters, 1) for r in recs]),
            "obj": _mean([r.final_obj for r in recs]),
            "sparsity": _mean([sparsity(r.X, threshold) for r in recs]),
        }

    counts = {}
    for r in records:
        counts[r.status] = counts.get(r.status, 0) + 1
    out = {"count": len(records), "status_counts": counts}
    out.update({f"mean_{k}": v for k, v in summary(records).items()})
    out.update({f"converged_mean_{k}": v
                for k, v in summary([r for r in records if r.converged]).items()})
    return out

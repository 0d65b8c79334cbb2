"""Linearized smoothing augmented Lagrangian method for ``X^T X = I``.

One iteration maps ``(X, Y, Z)`` to

1. ``X+ = prox_{g/(r + 1/lam) + i_X}(V)`` with
   ``V = (X/lam + r Z - (grad l(X) + 2 X (Y + rho G(X)))) / (r + 1/lam)``,
2. ``Z+ = Z + beta (X+ - Z)``,
3. ``Y+ = proj_{||Y||_F <= R_Y}(Y + alpha (G(X+) - eps Y))``,

where ``G(X) = X^T X - I``.  No retraction, QR or SVD is used inside the
loop; only matrix products and the proximal map of ``g`` on the primal set.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import InfeasibleStart, NumericalBreakdown, ParameterError, ShapeMismatch
from .matcore import frobenius_norm, gram_residual, op_norm_dense, random_orthonormal
from .problems import Problem
from .record import BUDGET, CONVERGED, DIVERGED, RunRecord
from .sets import DualBall

START_FEAS_TOL = 1e-8


@dataclass(frozen=True)
class LsalmParams:
    rho: float
    lam: float
    r: float
    alpha: float
    beta: float
    eps: float
    R_Y: float
    R_X_op: float = 10.0
    max_iter: int = 30000
    divergence_factor: float = 10.0

    def __post_init__(self):
        bad = []
        if not self.rho >= 0:
            bad.append(f"rho={self.rho} (need >= 0)")
        for name in ("lam", "r", "alpha", "eps", "R_Y", "R_X_op", "divergence_factor"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                bad.append(f"{name}={value} (need > 0)")
        if not 0 < self.beta < 1:
            bad.append(f"beta={self.beta} (need 0 < beta < 1)")
        if not (isinstance(self.max_iter, int) and self.max_iter >= 1):
            bad.append(f"max_iter={self.max_iter} (need integer >= 1)")
        if bad:
            raise ParameterError("invalid LSALM parameters: " + ", ".join(bad))

    @property
    def prox_scale(self) -> float:
        return self.r + 1.0 / self.lam

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LsalmParams":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown LSALM parameters: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def qp_baseline(cls, **overrides) -> "LsalmParams":
        base = cls(rho=0.15, lam=1.35, r=1.25, alpha=0.1, beta=0.44, eps=1e-8, R_Y=5.0)
        return replace(base, **overrides)

    @classmethod
    def sparse_pca(cls, m: int, n: int, smooth_lipschitz: float, **overrides) -> "LsalmParams":
        alpha = float(round(0.07 * math.sqrt(m * n))) or 1.0
        base = cls(rho=10.0, lam=1.0 / smooth_lipschitz, r=15.0, alpha=alpha, beta=0.5,
                   eps=1e-10, R_Y=1e3)
        return replace(base, **overrides)

    @classmethod
    def graph_matching(cls, **overrides) -> "LsalmParams":
        base = cls(rho=1.0, lam=0.025, r=1.0, alpha=6.0, beta=0.2, eps=1e-9, R_Y=1e3)
        return replace(base, **overrides)


@dataclass(frozen=True)
class StopRule:
    """Termination test.

    ``qp``: ``dx + dz_gap <= tol_dx`` and ``feas <= tol_feas``.
    ``spca``: ``dx <= tol_dx`` and ``feas <= tol_feas``.
    ``gm``: ``||grad l(X) + 2 X Y||_F <= tol_stat`` and ``feas <= tol_feas``.
    ``custom``: ``dx + dz_gap <= tol_dx``, ``feas <= tol_feas`` and the
    stationarity residual ``<= tol_stat``.
    """

    mode: str
    tol_dx: float = 1e-3
    tol_feas: float = 1e-5
    tol_stat: float = 1e-4

    MODES = ("qp", "spca", "gm", "custom")

    def __post_init__(self):
        if self.mode not in self.MODES:
            raise ParameterError(f"unknown stop mode {self.mode!r}")
        if not (self.tol_dx > 0 and self.tol_feas > 0 and self.tol_stat > 0):
            raise ParameterError("stop tolerances must be positive")

    @classmethod
    def qp(cls):
        return cls("qp", tol_dx=1e-3, tol_feas=1e-5)

    @classmethod
    def spca(cls):
        return cls("spca", tol_dx=1e-4, tol_feas=1e-4)

    @classmethod
    def gm(cls):
        return cls("gm", tol_feas=1e-6, tol_stat=1e-4)

    @classmethod
    def for_problem(cls, name: str) -> "StopRule":
        return {"qp": cls.qp, "spca": cls.spca, "gm": cls.gm}[name]()

    @property
    def needs_stat(self) -> bool:
        return self.mode in ("gm", "custom")

    def satisfied(self, dx, dz_gap, feas, stat=None) -> bool:
        if feas > self.tol_feas:
            return False
        if self.mode == "qp":
            return dx + dz_gap <= self.tol_dx
        if self.mode == "spca":
            return dx <= self.tol_dx
        if self.mode == "gm":
            return stat <= self.tol_stat
        return dx + dz_gap <= self.tol_dx and stat <= self.tol_stat

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LsalmState:
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    k: int = 0
    last_dx: float = 0.0
    last_dz_gap: float = 0.0
    last_dy: float = 0.0
    dual_projected: bool = False

    @classmethod
    def initial(cls, X0: np.ndarray) -> "LsalmState":
        X0 = np.array(X0, dtype=float)
        n = X0.shape[1]
        return cls(X=X0, Y=np.zeros((n, n)), Z=X0.copy())


def feasibility(X: np.ndarray) -> float:
    return frobenius_norm(gram_residual(X))


def aug_lagrangian_value(problem: Problem, params: LsalmParams, X, Y) -> float:
    G = gram_residual(X)
    return (problem.objective(X) + float(np.sum(Y * G))
            + 0.5 * params.rho * float(np.sum(G * G)))


def kkt_residual(problem: Problem, X: np.ndarray, Y: np.ndarray) -> float:
    """Distance from ``-2 X Y`` to the subdifferential of ``f`` at ``X``."""
    grad = problem.grad_smooth(X)
    if not problem.l1 or problem.mu == 0.0:
        return frobenius_norm(grad + 2.0 * X @ Y)
    T = -2.0 * X @ Y - grad
    mu = problem.mu
    d = np.where(X != 0.0, np.abs(T - mu * np.sign(X)), np.maximum(np.abs(T) - mu, 0.0))
    return frobenius_norm(d)


def stationarity_bound(X: np.ndarray, Y: np.ndarray, kkt_eps: float) -> float:
    """Upper bound ``(1 + 2 ||X|| ||Y||) kkt_eps`` on the Riemannian stationarity."""
    ny = op_norm_dense(Y) if np.any(Y) else 0.0
    nx = op_norm_dense(X) if ny else 0.0
    return (1.0 + 2.0 * nx * ny) * kkt_eps


def linearized_point(problem: Problem, params: LsalmParams, X, Y, Z) -> np.ndarray:
    """The point ``V`` whose scaled prox is the next primal iterate."""
    G = gram_residual(X)
    drift = problem.grad_smooth(X) + 2.0 * X @ (Y + params.rho * G)
    return (X / params.lam + params.r * Z - drift) / params.prox_scale


def primal_step(problem: Problem, params: LsalmParams, state: LsalmState) -> np.ndarray:
    V = linearized_point(problem, params, state.X, state.Y, state.Z)
    if not np.all(np.isfinite(V)):
        raise NumericalBreakdown(f"non-finite primal point at iteration {state.k}")
    return problem.scaled_prox(V, params.prox_scale)


def z_step(params: LsalmParams, Z: np.ndarray, X_next: np.ndarray) -> np.ndarray:
    return Z + params.beta * (X_next - Z)


def _dual_update(params: LsalmParams, Y, X_next):
    trial = Y + params.alpha * (gram_residual(X_next) - params.eps * Y)
    trial = 0.5 * (trial + trial.T)
    ball = DualBall(params.R_Y)
    projected = not ball.contains(trial)
    return ball.project(trial), projected


def dual_step(params: LsalmParams, Y: np.ndarray, X_next: np.ndarray) -> np.ndarray:
    return _dual_update(params, Y, X_next)[0]


def step(problem: Problem, params: LsalmParams, state: LsalmState) -> LsalmState:
    X_next = primal_step(problem, params, state)
    Z_next = z_step(params, state.Z, X_next)
    Y_next, projected = _dual_update(params, state.Y, X_next)
    return LsalmState(
        X=X_next,
        Y=Y_next,
        Z=Z_next,
        k=state.k + 1,
        last_dx=frobenius_norm(X_next - state.X),
        last_dz_gap=frobenius_norm(X_next - state.Z),
        last_dy=frobenius_norm(Y_next - state.Y),
        dual_projected=projected,
    )


def init_feasible(m: int, n: int, seed: int) -> np.ndarray:
    return random_orthonormal(m, n, seed)


class InvariantMonitor:
    """Counts violations of the iterate invariants along a run.

    Checked per step: dual ball membership, exact symmetry of ``Y``, the
    convex-combination bound on ``||Z||_F`` and, when the dual projection
    was inactive, ``||G(X+)||_F <= ||Y+ - Y||_F / alpha + eps ||Y||_F``.
    The last check allows a rounding slack proportional to
    ``(||Y|| + ||Y+||) / alpha``.
    """

    NAMES = ("dual_ball", "dual_symmetry", "z_bound", "feas_dual_link")

    def __init__(self, params: LsalmParams, X0: np.ndarray, Z0: np.ndarray):
        self.params = params
        self.max_norm = max(frobenius_norm(X0), frobenius_norm(Z0))
        self.counts = dict.fromkeys(self.NAMES, 0)
        self.checked = 0

    def observe(self, prev: LsalmState, new: LsalmState) -> None:
        p = self.params
        self.checked += 1
        ny_new = frobenius_norm(new.Y)
        if ny_new > p.R_Y * (1.0 + 1e-12):
            self.counts["dual_ball"] += 1
        if not np.array_equal(new.Y, new.Y.T):
            self.counts["dual_symmetry"] += 1
        self.max_norm = max(self.max_norm, frobenius_norm(new.X))
        if frobenius_norm(new.Z) > self.max_norm + 1e-12:
            self.counts["z_bound"] += 1
        if not new.dual_projected:
            ny = frobenius_norm(prev.Y)
            lhs = feasibility(new.X)
            rhs = new.last_dy / p.alpha + p.eps * ny
            slack = 64 * np.finfo(float).eps * ((ny + ny_new) / p.alpha + lhs) + 1e-300
            if lhs > rhs + slack:
                self.counts["feas_dual_link"] += 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def divergence_threshold(problem: Problem, params: LsalmParams) -> float:
    # points of St(m, n) have Frobenius norm sqrt(n)
    return params.divergence_factor * math.sqrt(problem.n)


def run(problem: Problem, params: LsalmParams, stop: StopRule, X0: np.ndarray, *,
        log_every: int = 1, check_invariants: bool = False,
        max_iter: int | None = None) -> RunRecord:
    """Iterate from ``X0`` until ``stop`` fires, the budget runs out, or divergence.

    Raises
    ------
    InfeasibleStart
        If ``||X0^T X0 - I||_F > 1e-8``.
    """
    X0 = np.asarray(X0, dtype=float)
    if X0.shape != problem.shape:
        raise ShapeMismatch(f"X0 has shape {X0.shape}, problem expects {problem.shape}")
    feas0 = feasibility(X0)
    if not feas0 <= START_FEAS_TOL:
        raise InfeasibleStart(f"||X0^T X0 - I||_F = {feas0:.3e} exceeds {START_FEAS_TOL}")
    if params.prox_scale <= problem.nonsmooth_lipschitz:
        warnings.warn(
            f"r + 1/lambda = {params.prox_scale:.4g} does not exceed L_g = "
            f"{problem.nonsmooth_lipschitz:.4g}", stacklevel=2)
    budget = params.max_iter if max_iter is None else max_iter
    limit = divergence_threshold(problem, params)

    state = LsalmState.initial(X0)
    monitor = InvariantMonitor(params, state.X, state.Z) if check_invariants else None
    rows = []
    status = BUDGET
    t0 = time.perf_counter()
    feas = feas0
    stat = math.nan
    for _ in range(budget):
        try:
            new = step(problem, params, state)
        except NumericalBreakdown:
            status = DIVERGED
            break
        if monitor is not None:
            monitor.observe(state, new)
        state = new
        xnorm = frobenius_norm(state.X)
        if not math.isfinite(xnorm) or not np.all(np.isfinite(state.Y)) or xnorm > limit:
            status = DIVERGED
            break
        feas = feasibility(state.X)
        logging = state.k % log_every == 0
        stat = kkt_residual(problem, state.X, state.Y) if (stop.needs_stat or logging) else math.nan
        done = stop.satisfied(state.last_dx, state.last_dz_gap, feas, stat)
        if logging or done:
            rows.append((state.k, problem.objective(state.X), feas, stat, state.last_dx,
                         state.last_dz_gap, state.last_dy,
                         1e3 * (time.perf_counter() - t0)))
        if done:
            status = CONVERGED
            break
    wall_ms = 1e3 * (time.perf_counter() - t0)

    X, Y = state.X, state.Y
    finite = bool(np.all(np.isfinite(X)) and np.all(np.isfinite(Y)))
    final_obj = problem.objective(X) if finite else math.nan
    final_feas = feasibility(X) if finite else math.nan
    final_kkt = kkt_residual(problem, X, Y) if finite else math.nan
    bound = stationarity_bound(X, Y, max(final_kkt, final_feas)) if finite else math.nan
    record = RunRecord(
        algorithm="lsalm",
        status=status,
        total_iters=state.k,
        X=X,
        Y=Y,
        final_obj=final_obj,
        final_feas=final_feas,
        final_kkt=final_kkt,
        stationarity_bound=bound,
        wall_ms=wall_ms,
        params={**params.to_dict(), "stop": stop.to_dict()},
        rows=rows,
        invariant_violations=dict(monitor.counts) if monitor is not None else None,
        state=state,
    )
    return record

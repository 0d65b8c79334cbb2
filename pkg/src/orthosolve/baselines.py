"""Riemannian reference methods: backtracking RGD and the subgradient warm start.

Unlike LSALM these keep every iterate on St(m, n) by the polar retraction
``stiefel_project``.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .errors import BacktrackExhausted, InfeasibleStart, ParameterError
from .matcore import frobenius_norm, gram_residual, stiefel_project, sym, tangent_project
from .problems import Problem
from .record import BUDGET, CONVERGED, RunRecord

MAX_SHRINKS = 60
START_FEAS_TOL = 1e-8


@dataclass(frozen=True)
class RgdParams:
    eta: float = 0.1
    gamma: float = 0.5
    delta: float = 0.5
    max_iter: int = 10000
    tol_grad: float = 1e-4

    def __post_init__(self):
        if not self.eta > 0:
            raise ParameterError(f"eta must be positive, got {self.eta}")
        for name in ("gamma", "delta"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ParameterError(f"{name} must lie in (0, 1), got {value}")
        if not (isinstance(self.max_iter, int) and self.max_iter >= 1):
            raise ParameterError(f"max_iter must be an integer >= 1, got {self.max_iter}")
        if not self.tol_grad > 0:
            raise ParameterError(f"tol_grad must be positive, got {self.tol_grad}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RgdParams":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown RGD parameters: {sorted(unknown)}")
        return cls(**d)


def riemannian_grad(problem: Problem, X: np.ndarray) -> np.ndarray:
    return tangent_project(X, problem.grad_smooth(X))


def _check_start(X0):
    feas = frobenius_norm(gram_residual(X0))
    if not feas <= START_FEAS_TOL:
        raise InfeasibleStart(f"||X0^T X0 - I||_F = {feas:.3e} exceeds {START_FEAS_TOL}")


def armijo_step(problem: Problem, X: np.ndarray, grad: np.ndarray, f0: float,
                params: RgdParams):
    """Backtrack from ``eta`` until ``l(R(X - t grad)) <= l(X) - delta t ||grad||^2``.

    Returns ``(X_next, f_next, t)``.

    Raises
    ------
    BacktrackExhausted
        After ``MAX_SHRINKS`` reductions without sufficient decrease.
    """
    gg = float(np.sum(grad * grad))
    t = params.eta
    for _ in range(MAX_SHRINKS + 1):
        X_next = stiefel_project(X - t * grad)
        f_next = problem.eval_smooth(X_next)
        if f_next <= f0 - params.delta * t * gg:
            return X_next, f_next, t
        t *= params.gamma
    raise BacktrackExhausted(f"no sufficient decrease after {MAX_SHRINKS} shrinks "
                             f"(||grad||_F = {math.sqrt(gg):.3e})")


def rgd(problem: Problem, params: RgdParams, X0: np.ndarray, *,
        log_every: int = 1) -> RunRecord:
    """Riemannian gradient descent with Armijo backtracking for smooth problems.

    The multiplier estimate reported in the record is ``Y = -sym(X^T grad l(X)) / 2``,
    which makes ``grad l(X) + 2 X Y`` the Riemannian gradient at feasible ``X``.
    """
    if problem.l1 and problem.mu != 0.0:
        raise ParameterError("rgd handles smooth problems only (g must be zero)")
    X = np.array(X0, dtype=float)
    _check_start(X)
    t0 = time.perf_counter()
    f = problem.eval_smooth(X)
    rows = []
    status = BUDGET
    k = 0
    last_dx = 0.0
    while True:
        grad = riemannian_grad(problem, X)
        gnorm = frobenius_norm(grad)
        done = gnorm <= params.tol_grad
        if k % log_every == 0 or done:
            rows.append((k, f, frobenius_norm(gram_residual(X)), gnorm, last_dx, 0.0, 0.0,
                         1e3 * (time.perf_counter() - t0)))
        if done:
            status = CONVERGED
            break
        if k >= params.max_iter:
            break
        X_next, f, _ = armijo_step(problem, X, grad, f, params)
        last_dx = frobenius_norm(X_next - X)
        X = X_next
        k += 1
    wall_ms = 1e3 * (time.perf_counter() - t0)
    Y = -0.5 * sym(X.T @ problem.grad_smooth(X))
    kkt = frobenius_norm(problem.grad_smooth(X) + 2.0 * X @ Y)
    return RunRecord(
        algorithm="rgd",
        status=status,
        total_iters=k,
        X=X,
        Y=Y,
        final_obj=problem.objective(X),
        final_feas=frobenius_norm(gram_residual(X)),
        final_kkt=kkt,
        stationarity_bound=frobenius_norm(riemannian_grad(problem, X)),
        wall_ms=wall_ms,
        params=params.to_dict(),
        rows=rows,
    )


def rgd_warmstart(problem: Problem, iters: int, X0: np.ndarray, step: float = 0.1) -> np.ndarray:
    """``iters`` fixed-step Riemannian gradient steps with polar retraction."""
    X = np.array(X0, dtype=float)
    for _ in range(iters):
        X = stiefel_project(X - step * riemannian_grad(problem, X))
    return X


def rsm_stepsize(k: int) -> float:
    """Diminishing step ``1 / k^(3/4)`` for ``k >= 1``."""
    return float(k) ** -0.75


def l1_subgradient(problem: Problem, X: np.ndarray) -> np.ndarray:
    """``grad l(X) + mu sign(X)``, taking 0 from ``[-mu, mu]`` at zero entries."""
    s = problem.grad_smooth(X)
    if problem.l1 and problem.mu:
        s = s + problem.mu * np.sign(X)
    return s


def rsm_warmstart(problem: Problem, iters: int, X0: np.ndarray) -> np.ndarray:
    """Riemannian subgradient method with step ``1/k^(3/4)``; returns the last iterate."""
    X = np.array(X0, dtype=float)
    for k in range(1, iters + 1):
        X = stiefel_project(X - rsm_stepsize(k) * tangent_project(X, l1_subgradient(problem, X)))
    return X

"""Closed-form constants of the LSALM convergence analysis and a parameter checker.

Notation: ``L = L_ell + L_g``, ``R = R_X_op`` and ``gap = r - mu_rho``.

=========  ==========================================================
mu_rho     ``L + 2 R_Y + 2 rho``
L_rho      ``L_ell + 2 R_Y + 6 rho R^2 + 2 rho``
sigma1     ``r / gap``
sigma2     ``2 R / gap``
zeta       ``[2/gap + 1/(1/lam + L_rho)] (1/lam + L_rho)
           (sqrt(2 L_rho / (1/lam + L_rho)) + 1)``
omega      ``(1 + (2 sigma2 R + eps) alpha) / (sqrt(gap) sqrt(eps) alpha)``
=========  ==========================================================

``sigma1``, ``sigma2``, ``zeta`` and ``omega`` are only defined for
``r > mu_rho``; otherwise they are ``None``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError
from .lsalm import LsalmParams

BETA_DIVISOR = 28.0
OMEGA_DIVISOR = 16.0
OMEGA_DIVISOR_ALT = 448.0


@dataclass(frozen=True)
class TheoryConstants:
    L: float
    L_ell: float
    L_g: float
    mu_rho: float
    L_rho: float
    sigma1: float | None
    sigma2: float | None
    zeta: float | None
    omega: float | None
    r_min_c1: float
    r_min_c2: float
    R_Y_recommended: float
    beta_max_terms: tuple | None
    alpha_max_terms: tuple | None

    @property
    def defined(self) -> bool:
        return self.sigma1 is not None

    def undefined_fields(self) -> list:
        return [name for name in ("sigma1", "sigma2", "zeta", "omega",
                                  "beta_max_terms", "alpha_max_terms")
                if getattr(self, name) is None]


def _lipschitz(problem) -> tuple:
    return float(problem.smooth_lipschitz), float(problem.nonsmooth_lipschitz)


def mu_rho(L: float, R_Y: float, rho: float) -> float:
    return L + 2.0 * R_Y + 2.0 * rho


def L_rho(L_ell: float, R_Y: float, rho: float, R: float) -> float:
    return L_ell + 2.0 * R_Y + 6.0 * rho * R * R + 2.0 * rho


def zeta(gap: float, lam: float, Lr: float) -> float:
    inv = 1.0 / (1.0 / lam + Lr)
    return (2.0 / gap + inv) / inv * (math.sqrt(2.0 * Lr * inv) + 1.0)


def omega(gap: float, sigma2: float, R: float, eps: float, alpha: float) -> float:
    return (1.0 / math.sqrt(gap)) * (1.0 + (2.0 * sigma2 * R + eps) * alpha) / (
        math.sqrt(eps) * alpha)


def r_recipe(L: float, R: float, rho: float, delta: float, xi: float) -> tuple:
    """The two lower bounds ``(c1, c2)`` on ``r``."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if not xi > 0.0:
        raise DomainError(f"xi must be positive, got {xi}")
    s = math.sqrt(1.0 - delta)
    a = L + 2.0 * rho * R
    c1 = (4.0 / 3.0) * (L + 4.0 * R + (2.0 * a * s + 4.0 * xi) / (1.0 - delta)
                        + 6.0 * rho * R * R + 2.0 * rho)
    c2 = (4.0 * L + (8.0 * a * s + 48.0 * xi) / (1.0 - delta)
          + 24.0 * rho * R * R + 8.0 * rho)
    return c1, c2


def dual_radius_recipe(L: float, R: float, rho: float, r: float, delta: float,
                       xi: float) -> float:
    return (L + 2.0 * rho * R + math.sqrt(r * xi)) / math.sqrt(1.0 - delta)


def theory_constants(problem, params: LsalmParams, delta: float = 0.5,
                     xi: float = 1.0) -> TheoryConstants:
    """Evaluate every analysis constant for ``problem`` and ``params``.

    ``delta`` and ``xi`` only enter the ``r``/``R_Y`` recipe fields.
    """
    L_ell, L_g = _lipschitz(problem)
    L = L_ell + L_g
    R = params.R_X_op
    mr = mu_rho(L, params.R_Y, params.rho)
    Lr = L_rho(L_ell, params.R_Y, params.rho, R)
    c1, c2 = r_recipe(L, R, params.rho, delta, xi)
    r_min = max(1.0 / params.lam, c1, c2)
    RY_rec = dual_radius_recipe(L, R, params.rho, r_min, delta, xi)
    gap = params.r - mr
    s1 = s2 = z = w = beta_terms = alpha_terms = None
    if gap > 0:
        s1 = params.r / gap
        s2 = 2.0 * R / gap
        z = zeta(gap, params.lam, Lr)
        w = omega(gap, s2, R, params.eps, params.alpha)
        beta_terms = (
            1.0,
            gap * gap / (2.0 * params.alpha * params.r * R * R),
            1.0 / (OMEGA_DIVISOR * params.r * w * w * params.alpha),
        )
        alpha_terms = (1.0 / (20.0 * R), 1.0 / (8.0 * R * z * z))
    return TheoryConstants(
        L=L, L_ell=L_ell, L_g=L_g, mu_rho=mr, L_rho=Lr, sigma1=s1, sigma2=s2,
        zeta=z, omega=w, r_min_c1=c1, r_min_c2=c2, R_Y_recommended=RY_rec,
        beta_max_terms=beta_terms, alpha_max_terms=alpha_terms,
    )


def empirical_beta_term(params: LsalmParams, mu_rho_value: float) -> float | None:
    """``eps alpha (1 + 4 R^2 alpha / (r - mu_rho))^-2``; ``None`` if ``r <= mu_rho``."""
    gap = params.r - mu_rho_value
    if gap <= 0:
        return None
    R = params.R_X_op
    return params.eps * params.alpha / (1.0 + 4.0 * R * R * params.alpha / gap) ** 2


@dataclass(frozen=True)
class ConditionRow:
    name: str
    lhs: float
    relation: str
    rhs: float | None
    passed: bool
    kind: str  # "theory", "practical" or "info"

    def format(self) -> str:
        rhs = "undefined" if self.rhs is None else f"{self.rhs:.6g}"
        flag = {True: "PASS", False: "FAIL"}[self.passed] if self.kind != "info" else "INFO"
        return f"{flag:4}  [{self.kind:9}] {self.name:28} {self.lhs:.6g} {self.relation} {rhs}"


@dataclass
class ConditionReport:
    rows: list = field(default_factory=list)
    constants: TheoryConstants | None = None

    def _verdict(self, kind):
        return all(row.passed for row in self.rows if row.kind == kind)

    @property
    def theory_ok(self) -> bool:
        return self._verdict("theory")

    @property
    def practical_ok(self) -> bool:
        return self._verdict("practical")

    def format(self) -> str:
        lines = [row.format() for row in self.rows]
        lines.append(f"theory verdict:    {'PASS' if self.theory_ok else 'FAIL'}")
        lines.append(f"practical verdict: {'PASS' if self.practical_ok else 'FAIL'}")
        return "\n".join(lines)


def _row(name, lhs, relation, rhs, kind="theory") -> ConditionRow:
    if rhs is None:
        passed = False
    elif relation == "<=":
        passed = lhs <= rhs
    elif relation == ">=":
        passed = lhs >= rhs
    elif relation == ">":
        passed = lhs > rhs
    else:
        raise ValueError(f"unknown relation {relation!r}")
    return ConditionRow(name, float(lhs), relation, None if rhs is None else float(rhs),
                        bool(passed), kind)


def validate_params(problem, params: LsalmParams) -> ConditionReport:
    """Check the sufficient-descent conditions and the practical input domain.

    Theory rows are the sufficient conditions of the descent analysis.  The
    practical rows are what the iteration itself needs to be well defined and
    to damp the dual: the algorithm's input domain and ``alpha eps <= 1``.
    Informational rows (alternative ``beta`` constant, empirical ``beta``
    term, ``r + 1/lam`` versus ``L_g``) do not enter either verdict.
    """
    tc = theory_constants(problem, params)
    R = params.R_X_op
    p = params
    rows = [
        _row("r > mu_rho", p.r, ">", tc.mu_rho),
        _row("r >= L_rho + L_g + 4R", p.r, ">=", tc.L_rho + tc.L_g + 4.0 * R),
        _row("r >= 3(L_rho + L_g)", p.r, ">=", 3.0 * (tc.L_rho + tc.L_g)),
        _row("lambda <= 1/(2R)", p.lam, "<=", 1.0 / (2.0 * R)),
        _row("alpha <= 1/(20R)", p.alpha, "<=", 1.0 / (20.0 * R)),
        _row("alpha <= 1/(8R zeta^2)", p.alpha, "<=",
             None if tc.alpha_max_terms is None else tc.alpha_max_terms[1]),
        _row("alpha <= 1/eps", p.alpha, "<=", 1.0 / p.eps),
        _row("beta <= min(...)/28", p.beta, "<=",
             None if tc.beta_max_terms is None else min(tc.beta_max_terms) / BETA_DIVISOR),
    ]
    rows += [
        _row("rho >= 0", p.rho, ">=", 0.0, "practical"),
        _row("lambda > 0", p.lam, ">", 0.0, "practical"),
        _row("alpha > 0", p.alpha, ">", 0.0, "practical"),
        _row("beta > 0", p.beta, ">", 0.0, "practical"),
        _row("1 - beta > 0", 1.0 - p.beta, ">", 0.0, "practical"),
        _row("eps > 0", p.eps, ">", 0.0, "practical"),
        _row("alpha * eps <= 1", p.alpha * p.eps, "<=", 1.0, "practical"),
    ]
    if tc.omega is not None:
        alt = 1.0 / (OMEGA_DIVISOR_ALT * p.r * tc.omega ** 2 * p.alpha)
        rows.append(_row("beta <= 1/(448 r omega^2 alpha)", p.beta, "<=", alt, "info"))
    emp = empirical_beta_term(p, tc.mu_rho)
    rows.append(_row("beta vs empirical term", p.beta, "<=", emp, "info"))
    rows.append(_row("r + 1/lambda > L_g", p.prox_scale, ">", tc.L_g, "info"))
    return ConditionReport(rows=rows, constants=tc)


def recommend_r_RY(problem, params: LsalmParams, delta: float, xi: float) -> tuple:
    """Smallest recommended ``r`` and the matching dual radius.

    Returns ``(r_min, R_Y)`` with ``r_min = max(1/lam, c1, c2)``.

    Raises
    ------
    DomainError
        If ``delta`` is outside ``(0, 1)`` or ``xi <= 0``.
    """
    L_ell, L_g = _lipschitz(problem)
    L = L_ell + L_g
    R = params.R_X_op
    c1, c2 = r_recipe(L, R, params.rho, delta, xi)
    r_min = max(1.0 / params.lam, c1, c2)
    return r_min, dual_radius_recipe(L, R, params.rho, r_min, delta, xi)

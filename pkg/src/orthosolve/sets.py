"""Primal domain sets and the dual ball, with Euclidean projections."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .matcore import frobenius_norm

DEFAULT_OP_RADIUS = 10.0


def _scale_into_ball(X: np.ndarray, radius: float) -> np.ndarray:
    nrm = frobenius_norm(X)
    if nrm <= radius:
        return np.array(X, dtype=float)
    out = X * (radius / nrm)
    # rounding may leave the norm an ulp above the radius; shrink until inside
    # so that membership and idempotence hold exactly
    while frobenius_norm(out) > radius:
        out = out * (1.0 - 2.0 * np.finfo(float).eps)
    return out


@dataclass(frozen=True)
class Box:
    """Entrywise box ``|X_ij| <= c``.

    ``declared_op_radius`` only feeds parameter formulas; it is not enforced.
    """

    c: float
    declared_op_radius: float = DEFAULT_OP_RADIUS

    def __post_init__(self):
        if not self.c > 0 or not self.declared_op_radius > 0:
            raise ParameterError(f"Box needs c > 0 and op radius > 0, got {self}")

    def project(self, X: np.ndarray) -> np.ndarray:
        return np.clip(X, -self.c, self.c)

    def contains(self, X: np.ndarray) -> bool:
        return bool(np.all(np.abs(X) <= self.c))

    def covers_stiefel_neighbourhood(self, m: int, n: int) -> bool:
        # ||X^T X - I||_F <= 1 bounds every column norm by sqrt(2)
        return self.c >= math.sqrt(2.0)

    def to_dict(self) -> dict:
        return {"kind": "box", "c": self.c, "declared_op_radius": self.declared_op_radius}


@dataclass(frozen=True)
class FrobeniusBall:
    radius: float
    declared_op_radius: float = DEFAULT_OP_RADIUS

    def __post_init__(self):
        if not self.radius > 0 or not self.declared_op_radius > 0:
            raise ParameterError(f"FrobeniusBall needs positive radii, got {self}")

    @classmethod
    def for_columns(cls, n: int, declared_op_radius: float = DEFAULT_OP_RADIUS):
        return cls(2.0 * math.sqrt(n + 1), declared_op_radius)

    def project(self, X: np.ndarray) -> np.ndarray:
        return _scale_into_ball(X, self.radius)

    def contains(self, X: np.ndarray) -> bool:
        return frobenius_norm(X) <= self.radius

    def covers_stiefel_neighbourhood(self, m: int, n: int) -> bool:
        return self.radius >= 2.0 * math.sqrt(n + 1)

    def to_dict(self) -> dict:
        return {
            "kind": "frobenius_ball",
            "radius": self.radius,
            "declared_op_radius": self.declared_op_radius,
        }


PrimalSet = Box | FrobeniusBall


def primal_set_from_dict(d: dict) -> PrimalSet:
    kind = d.get("kind")
    op = float(d.get("declared_op_radius", DEFAULT_OP_RADIUS))
    if kind == "box":
        return Box(float(d["c"]), op)
    if kind == "frobenius_ball":
        return FrobeniusBall(float(d["radius"]), op)
    raise ParameterError(f"unknown primal set kind {kind!r}")


def project_primal(S: PrimalSet, X: np.ndarray) -> np.ndarray:
    return S.project(X)


@dataclass(frozen=True)
class DualBall:
    """Symmetric matrices with ``||Y||_F <= R_Y``."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ParameterError(f"dual radius must be positive, got {self.radius}")

    def contains(self, Y: np.ndarray) -> bool:
        return frobenius_norm(Y) <= self.radius

    def project(self, Y: np.ndarray) -> np.ndarray:
        # scaling a symmetric matrix keeps it exactly symmetric
        return _scale_into_ball(Y, self.radius)


def project_dual(D: DualBall, Y: np.ndarray) -> np.ndarray:
    return D.project(Y)

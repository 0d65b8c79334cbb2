"""Dense matrix kernels and Stiefel-manifold primitives.

Matrices are plain ``numpy.ndarray`` objects of dtype float64.  Every
function here is pure: inputs are never modified.

Random numbers come from a pinned SplitMix64 generator so that a seed
produces the same matrices on every platform and in every reimplementation:

* state advances by ``0x9E3779B97F4A7C15`` per draw;
* output mix ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
  z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31``;
* uniforms are ``(z >> 11) * 2**-53`` in ``[0, 1)``;
* normals come from Box-Muller on consecutive uniform pairs ``(u1, u2)``
  with ``r = sqrt(-2 log(1 - u1))``, emitting ``r cos(2 pi u2)`` then
  ``r sin(2 pi u2)``; matrices are filled in row-major order.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import NonConvergence, RankDeficient, ShapeMismatch

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class SplitMix64:
    """Counter-based SplitMix64 stream."""

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK64

    def next_uint64(self, count: int) -> np.ndarray:
        k = np.arange(1, count + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self._state) + k * np.uint64(_GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            z = z ^ (z >> np.uint64(31))
        self._state = (self._state + count * _GOLDEN) & _MASK64
        return z

    def uniform(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        z = self.next_uint64(count)
        return ((z >> np.uint64(11)).astype(np.float64) * 2.0**-53).reshape(shape)

    def normal(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        pairs = (count + 1) // 2
        u = self.uniform((pairs, 2))
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        angle = 2.0 * np.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = radius * np.cos(angle)
        z[:, 1] = radius * np.sin(angle)
        return z.ravel()[:count].reshape(shape)


def frobenius_norm(A) -> float:
    return float(np.sqrt(np.sum(np.square(A))))


def sym(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeMismatch(f"sym needs a square matrix, got shape {A.shape}")
    return 0.5 * (A + A.T)


def gram_residual(X: np.ndarray) -> np.ndarray:
    """Return ``X^T X - I`` symmetrized so that it is exactly symmetric."""
    X = np.asarray(X, dtype=float)
    G = X.T @ X
    G = 0.5 * (G + G.T)
    G[np.diag_indices_from(G)] -= 1.0
    return G


def tangent_project(X: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Project ``V`` onto the tangent space of St(m, n) at ``X``.

    The formula ``V - X sym(X^T V)`` is the orthogonal projection only when
    ``X`` has orthonormal columns; for nearby ``X`` it is an approximation.
    """
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    if X.shape != V.shape:
        raise ShapeMismatch(f"shapes differ: {X.shape} vs {V.shape}")
    return V - X @ sym(X.T @ V)


def stiefel_project(A: np.ndarray) -> np.ndarray:
    """Polar factor ``U V^T`` of the thin SVD, the nearest point on St(m, n).

    Raises
    ------
    RankDeficient
        If the smallest singular value is below ``1e-12`` times the largest.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < A.shape[1]:
        raise ShapeMismatch(f"need rows >= cols, got shape {A.shape}")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s[0] == 0.0 or s[-1] < 1e-12 * s[0]:
        raise RankDeficient(f"singular values range [{s[-1]:.3e}, {s[0]:.3e}]")
    return U @ Vt


def op_norm(A: np.ndarray, tol: float = 1e-10, max_iter: int = 5000) -> float:
    """Largest singular value by power iteration on the smaller Gram matrix.

    The start vector is a fixed pseudo-random vector (SplitMix64 seed 0, shifted
    to be positive) so the result is deterministic and the start is not
    orthogonal to the dominant singular vector except on a null set.
    Iteration stops once the Rayleigh quotient changes by at most ``tol``
    relative; when the leading singular values are clustered the estimate
    can sit below the true norm by up to the cluster width.

    Raises
    ------
    NonConvergence
        If the Rayleigh quotient has not stabilized to relative ``tol`` within
        ``max_iter`` iterations.  ``frobenius_norm`` is a valid fallback bound.
    """
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    m, n = A.shape
    B = A.T @ A if n <= m else A @ A.T
    k = B.shape[0]
    v = 0.5 + SplitMix64(0).uniform(k)
    v /= np.linalg.norm(v)
    rq_prev = None
    for _ in range(max_iter):
        w = B @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        rq = float(v @ (B @ v))
        if rq_prev is not None and abs(rq - rq_prev) <= tol * abs(rq):
            return math.sqrt(max(rq, 0.0))
        rq_prev = rq
    raise NonConvergence(f"power iteration did not stabilize in {max_iter} steps")


def op_norm_dense(A: np.ndarray) -> float:
    """Operator norm from a dense eigen-decomposition of the smaller Gram matrix.

    Used off the iteration loop, where an exact value matters more than
    avoiding a factorization (power iteration can stop early on clustered
    leading singular values).
    """
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    gram = A.T @ A if A.shape[1] <= A.shape[0] else A @ A.T
    return math.sqrt(max(float(np.linalg.eigvalsh(gram)[-1]), 0.0))


def jacobi_eigh(S: np.ndarray, tol: float = 1e-15, max_sweeps: int = 60):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues in descending
    order and eigenvectors as columns.  Slow (pure rotation loop) but
    dependency-free; used as an independent oracle.
    """
    A = sym(S).copy()
    n = A.shape[0]
    V = np.eye(n)
    scale = max(frobenius_norm(A), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = frobenius_norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q]
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :]
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    evals = np.diag(A).copy()
    order = np.argsort(-evals, kind="stable")
    return evals[order], V[:, order]


def random_gaussian(rows: int, cols: int, seed: int) -> np.ndarray:
    return SplitMix64(seed).normal((rows, cols))


def random_uniform(rows: int, cols: int, seed: int) -> np.ndarray:
    return SplitMix64(seed).uniform((rows, cols))


def random_orthonormal(rows: int, cols: int, seed: int) -> np.ndarray:
    """Polar projection of a seeded Gaussian draw; retries seed+1 up to 3 times."""
    if not rows >= cols >= 1:
        raise ShapeMismatch(f"need rows >= cols >= 1, got {rows}x{cols}")
    last = None
    for attempt in range(4):
        try:
            return stiefel_project(random_gaussian(rows, cols, seed + attempt))
        except RankDeficient as exc:
            last = exc
    raise last


def write_matrix(path, A: np.ndarray) -> None:
    """Write ``A`` as ``rows cols`` then one line per row, 17 significant digits."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    lines = [f"{A.shape[0]} {A.shape[1]}"]
    lines.extend(" ".join(f"{v:.17g}" for v in row) for row in A)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_matrix(path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8").split("\n")
    try:
        rows, cols = (int(t) for t in text[0].split())
    except ValueError:
        raise ValueError(f"{path}: bad header line {text[0]!r}") from None
    body = [line for line in text[1:] if line.strip()]
    if len(body) != rows:
        raise ValueError(f"{path}: expected {rows} rows, found {len(body)}")
    A = np.array([[float(t) for t in line.split()] for line in body], dtype=float)
    if A.shape != (rows, cols):
        raise ValueError(f"{path}: expected shape {(rows, cols)}, got {A.shape}")
    return A.reshape(rows, cols)


def write_points(path, points: np.ndarray) -> None:
    pts = np.asarray(points, dtype=float)
    Path(path).write_text(
        "".join(f"{x:.17g} {y:.17g}\n" for x, y in pts), encoding="utf-8", newline="\n"
    )


def read_points(path) -> np.ndarray:
    rows = [line.split() for line in Path(path).read_text(encoding="utf-8").splitlines()]
    pts = np.array([[float(a), float(b)] for a, b in (r for r in rows if r)], dtype=float)
    return pts.reshape(-1, 2)

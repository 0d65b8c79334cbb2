"""Benchmark objectives ``f = l + g`` with gradients and scaled proximal maps.

Three problem families are provided:

``QuadraticProblem``
    ``1/2 tr(X^T A X) + tr(G^T X) + mu ||X||_1``
``SparsePCAProblem``
    ``-tr(X^T (A^T A) X) + mu ||X||_1``
``GraphMatchingProblem``
    ``-vec(X)^T K vec(X) + mu ||max(0, -X)||_F^2`` with ``g = 0``; ``K``
    compares edge lengths of two landmark graphs

Each problem owns its primal domain (a ``Box`` or ``FrobeniusBall``) and
the Lipschitz constants used by the parameter calculator.
"""

from __future__ import annotations

import json
import math
import warnings
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .errors import DegenerateInput, ParameterError, ShapeMismatch
from .matcore import (
    SplitMix64,
    frobenius_norm,
    op_norm,
    read_matrix,
    read_points,
    stiefel_project,
    write_matrix,
    write_points,
)
from .sets import Box, FrobeniusBall, PrimalSet, primal_set_from_dict

EDGE_SCALE = 2500.0
DEFAULT_BOX_C = 10.0


def soft_threshold_clip(V: np.ndarray, threshold: float, c: float = math.inf) -> np.ndarray:
    """Entrywise ``sign(v) * min(max(|v| - threshold, 0), c)``."""
    return np.sign(V) * np.minimum(np.maximum(np.abs(V) - threshold, 0.0), c)


def penalty_value(X: np.ndarray) -> float:
    """``1/2 ||X^T X - I||_F^2``."""
    G = X.T @ X - np.eye(X.shape[1])
    return 0.5 * float(np.sum(G * G))


def penalty_grad(X: np.ndarray) -> np.ndarray:
    return 2.0 * X @ (X.T @ X - np.eye(X.shape[1]))


def penalty_curvature(X: np.ndarray, H: np.ndarray) -> float:
    """Second directional derivative of ``penalty_value`` at ``X`` along ``H``."""
    XtH = X.T @ H
    S = XtH + XtH.T
    G = X.T @ X - np.eye(X.shape[1])
    return float(np.sum(S * S) + 2.0 * np.trace(H @ G @ H.T))


class Problem:
    """Composite objective on m x n matrices.

    Subclasses implement ``eval_smooth``, ``grad_smooth`` and the data
    payload; ``g`` is either ``mu ||X||_1`` (``l1 = True``) or zero.
    """

    name = "problem"
    l1 = False

    def __init__(self, m, n, mu, smooth_lipschitz, primal_set: PrimalSet, seed=None):
        if not m >= n >= 1:
            raise ShapeMismatch(f"need m >= n >= 1, got m={m}, n={n}")
        if mu < 0:
            raise ParameterError(f"mu must be nonnegative, got {mu}")
        self.m = int(m)
        self.n = int(n)
        self.mu = float(mu)
        self.smooth_lipschitz = float(smooth_lipschitz)
        self.nonsmooth_lipschitz = self.mu * math.sqrt(self.m * self.n) if self.l1 else 0.0
        self.primal_set = primal_set
        self.seed = seed
        if not primal_set.covers_stiefel_neighbourhood(self.m, self.n):
            warnings.warn(
                f"{primal_set} does not contain every X with ||X^T X - I||_F <= 1",
                stacklevel=3,
            )

    @property
    def shape(self):
        return (self.m, self.n)

    @property
    def lipschitz(self) -> float:
        return self.smooth_lipschitz + self.nonsmooth_lipschitz

    def _check(self, X):
        if X.shape != self.shape:
            raise ShapeMismatch(f"{self.name} expects shape {self.shape}, got {X.shape}")

    def eval_nonsmooth(self, X: np.ndarray) -> float:
        self._check(X)
        if not self.l1:
            return 0.0
        return self.mu * float(np.sum(np.abs(X)))

    def objective(self, X: np.ndarray) -> float:
        return self.eval_smooth(X) + self.eval_nonsmooth(X)

    def scaled_prox(self, V: np.ndarray, scale: float) -> np.ndarray:
        """Minimizer of ``g(Z)/scale + 1/2 ||Z - V||_F^2`` over the primal set.

        For ``g = mu ||.||_1`` and a Frobenius ball this is the ball projection
        of the soft-thresholded point (the ball is invariant under the
        shrinkage direction, so the two maps compose).
        """
        if not scale > 0:
            raise ParameterError(f"scale must be positive, got {scale}")
        if not self.l1 or self.mu == 0.0:
            return self.primal_set.project(V)
        if isinstance(self.primal_set, Box):
            return soft_threshold_clip(V, self.mu / scale, self.primal_set.c)
        return self.primal_set.project(soft_threshold_clip(V, self.mu / scale))

    # serialization -----------------------------------------------------

    def _meta(self) -> dict:
        return {
            "name": self.name,
            "m": self.m,
            "n": self.n,
            "mu": self.mu,
            "seed": self.seed,
            "primal_set": self.primal_set.to_dict(),
            "smooth_lipschitz": self.smooth_lipschitz,
            "nonsmooth_lipschitz": self.nonsmooth_lipschitz,
        }

    def _matrices(self) -> dict:
        raise NotImplementedError

    def save(self, directory) -> Path:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        meta = self._meta()
        (out / "meta.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        for fname, data in self._matrices().items():
            if fname.startswith("points"):
                write_points(out / fname, data)
            else:
                write_matrix(out / fname, data)
        return out


class QuadraticProblem(Problem):
    name = "qp"
    l1 = True

    def __init__(self, A, G, mu, primal_set=None, seed=None, smooth_lipschitz=None):
        A = np.asarray(A, dtype=float)
        G = np.asarray(G, dtype=float)
        m, n = G.shape
        if A.shape != (m, m):
            raise ShapeMismatch(f"A must be {m}x{m}, got {A.shape}")
        self.A = 0.5 * (A + A.T)
        self.G = G
        if primal_set is None:
            primal_set = Box(DEFAULT_BOX_C) if mu > 0 else FrobeniusBall.for_columns(n)
        if smooth_lipschitz is None:
            smooth_lipschitz = op_norm(self.A)
        super().__init__(m, n, mu, smooth_lipschitz, primal_set, seed)

    def eval_smooth(self, X):
        self._check(X)
        return 0.5 * float(np.sum(X * (self.A @ X))) + float(np.sum(self.G * X))

    def grad_smooth(self, X):
        self._check(X)
        return self.A @ X + self.G

    def _matrices(self):
        return {"A.txt": self.A, "G.txt": self.G}


class SparsePCAProblem(Problem):
    name = "spca"
    l1 = True

    def __init__(self, AtA, n, mu, primal_set=None, seed=None, smooth_lipschitz=None):
        AtA = np.asarray(AtA, dtype=float)
        m = AtA.shape[0]
        if AtA.shape != (m, m):
            raise ShapeMismatch(f"AtA must be square, got {AtA.shape}")
        self.AtA = 0.5 * (AtA + AtA.T)
        if primal_set is None:
            primal_set = Box(DEFAULT_BOX_C) if mu > 0 else FrobeniusBall.for_columns(n)
        if smooth_lipschitz is None:
            smooth_lipschitz = 2.0 * op_norm(self.AtA)
        super().__init__(m, n, mu, smooth_lipschitz, primal_set, seed)

    def eval_smooth(self, X):
        self._check(X)
        return -float(np.sum(X * (self.AtA @ X)))

    def grad_smooth(self, X):
        self._check(X)
        return -2.0 * (self.AtA @ X)

    def _matrices(self):
        return {"AtA.txt": self.AtA}


class GraphMatchingProblem(Problem):
    """Penalized relaxation of quadratic graph matching.

    ``K`` is the (m n) x (m n) pairwise affinity indexed by row-major
    ``vec``: entry ``(i*n + a, j*n + b)`` scores mapping edge ``(i, j)`` of
    the first graph onto edge ``(a, b)`` of the second.
    """

    name = "gm"
    l1 = False

    def __init__(self, K, m, n, mu, primal_set=None, points1=None, points2=None,
                 seed=None, smooth_lipschitz=None, edges=None):
        K = np.asarray(K, dtype=float)
        if K.shape != (m * n, m * n):
            raise ShapeMismatch(f"K must be {m * n}x{m * n}, got {K.shape}")
        if not mu > 0:
            raise ParameterError(f"graph-matching penalty weight must be positive, got {mu}")
        self.K = 0.5 * (K + K.T)
        self.points1 = None if points1 is None else np.asarray(points1, dtype=float)
        self.points2 = None if points2 is None else np.asarray(points2, dtype=float)
        self.edges = edges
        if primal_set is None:
            primal_set = FrobeniusBall.for_columns(n)
        if smooth_lipschitz is None:
            smooth_lipschitz = 2.0 * op_norm(self.K) + 2.0 * mu
        super().__init__(m, n, mu, smooth_lipschitz, primal_set, seed)

    def eval_smooth(self, X):
        self._check(X)
        x = X.ravel()
        neg = np.minimum(X, 0.0)
        return -float(x @ (self.K @ x)) + self.mu * float(np.sum(neg * neg))

    def grad_smooth(self, X):
        self._check(X)
        quad = (self.K @ X.ravel()).reshape(self.shape)
        return -2.0 * quad + 2.0 * self.mu * np.minimum(X, 0.0)

    def _meta(self):
        return {**super()._meta(), "edges": self.edges}

    def _matrices(self):
        # K is rebuilt from the landmarks on load when they are available
        if self.points1 is not None and self.edges is not None:
            return {"points1.txt": self.points1, "points2.txt": self.points2}
        return {"K.txt": self.K}


# generators --------------------------------------------------------------


def orthonormal_basis(M: np.ndarray) -> np.ndarray:
    """Gram-Schmidt with a second re-orthogonalization pass, column by column."""
    M = np.asarray(M, dtype=float)
    Q = np.zeros_like(M)
    for j in range(M.shape[1]):
        v = M[:, j].copy()
        for _ in range(2):
            v -= Q[:, :j] @ (Q[:, :j].T @ v)
        nrm = np.linalg.norm(v)
        if nrm < 1e-12 * max(np.linalg.norm(M[:, j]), 1.0):
            raise DegenerateInput(f"column {j} is numerically dependent")
        Q[:, j] = v / nrm
    return Q


def qp_spectrum(m: int) -> np.ndarray:
    return 1.01 ** (1.0 - np.arange(1, m + 1))


def qp_column_weights(n: int) -> np.ndarray:
    return 1.01 ** (np.arange(1, n + 1) - 1.0)


def gen_qp(m: int, n: int, mu: float, seed: int, primal_set=None) -> QuadraticProblem:
    """Random QP: ``A = P diag(1.01^(1-i)) P^T``, ``G = Q diag(1.01^(i-1))``."""
    if not m >= n >= 1:
        raise ShapeMismatch(f"need m >= n >= 1, got m={m}, n={n}")
    rng = SplitMix64(seed)
    P = orthonormal_basis(rng.uniform((m, m)))
    A = (P * qp_spectrum(m)) @ P.T
    A = 0.5 * (A + A.T)
    Qt = rng.uniform((m, n))
    Q = Qt / np.linalg.norm(Qt, axis=0)
    G = Q * qp_column_weights(n)
    return QuadraticProblem(A, G, mu, primal_set=primal_set, seed=seed)


def _block_bounds(total: int, blocks: int = 5):
    width = total // blocks
    if width == 0:
        raise ShapeMismatch(f"need at least {blocks} entries to split, got {total}")
    starts = [k * width for k in range(blocks)]
    ends = starts[1:] + [total]
    return list(zip(starts, ends))


def spca_templates(m: int) -> np.ndarray:
    """Five unit-norm, disjoint indicator loadings of length ``m`` (rows)."""
    T = np.zeros((5, m))
    for k, (lo, hi) in enumerate(_block_bounds(m)):
        T[k, lo:hi] = 1.0 / math.sqrt(hi - lo)
    return T


def spca_data(p: int, m: int, seed: int, noise_std: float = 0.5, amplitude: float = 1.0,
              normalize: bool = True) -> np.ndarray:
    """Data matrix ``A`` (p x m) built from the five templates plus Gaussian noise.

    Rows of block ``k`` (``p/5`` of them) equal template ``k`` rescaled so its
    nonzero entries are ``amplitude``; then every entry gets ``N(0, noise_std^2)``
    noise.  With ``normalize`` the columns are scaled to unit Euclidean norm,
    so ``diag(A^T A) = 1``.
    """
    T = spca_templates(m)
    A = np.zeros((p, m))
    for k, (lo, hi) in enumerate(_block_bounds(p)):
        A[lo:hi] = amplitude * T[k] / np.max(T[k])
    if noise_std:
        A += noise_std * SplitMix64(seed).normal((p, m))
    if normalize:
        norms = np.linalg.norm(A, axis=0)
        if np.any(norms == 0.0):
            raise DegenerateInput("a data column is identically zero")
        A = A / norms
    return A


def gen_spca(p: int, m: int, n: int, mu: float, seed: int, noise_std: float = 0.5,
             amplitude: float = 1.0, normalize: bool = True,
             primal_set=None) -> SparsePCAProblem:
    if not m >= n >= 1:
        raise ShapeMismatch(f"need m >= n >= 1, got m={m}, n={n}")
    A = spca_data(p, m, seed, noise_std, amplitude, normalize)
    return SparsePCAProblem(A.T @ A, n, mu, primal_set=primal_set, seed=seed)


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def build_affinity(q1, q2) -> np.ndarray:
    """Edge affinity ``exp(-(q1_c - q2_d)^2 / 2500)`` between two feature lists."""
    q1 = np.asarray(q1, dtype=float).ravel()
    q2 = np.asarray(q2, dtype=float).ravel()
    return np.exp(-np.square(q1[:, None] - q2[None, :]) / EDGE_SCALE)


def graph_edges(points: np.ndarray, kind: str = "delaunay") -> np.ndarray:
    """Boolean adjacency of the landmark graph (symmetric, empty diagonal).

    ``delaunay`` links the sides of the Delaunay triangles; ``complete``
    links every pair.  Fewer than four landmarks always use ``complete``.
    """
    pts = np.asarray(points, dtype=float)
    k = len(pts)
    if kind == "complete" or k < 4:
        return ~np.eye(k, dtype=bool)
    if kind != "delaunay":
        raise ParameterError(f"unknown edge kind {kind!r}")
    try:
        simplices = Delaunay(pts).simplices
    except QhullError as exc:
        raise DegenerateInput(f"cannot triangulate landmarks: {exc}") from None
    adj = np.zeros((k, k), dtype=bool)
    for a, b in ((0, 1), (1, 2), (0, 2)):
        adj[simplices[:, a], simplices[:, b]] = True
    return adj | adj.T


def pairwise_affinity(points1, points2, edges: str = "delaunay") -> np.ndarray:
    """Assemble the (m n) x (m n) affinity between the edges of two landmark graphs.

    Entry ``(i*n + a, j*n + b)`` is ``build_affinity`` of the lengths of edge
    ``(i, j)`` in the first graph and edge ``(a, b)`` in the second, and zero
    unless both are edges.
    """
    d1 = pairwise_distances(points1)
    d2 = pairwise_distances(points2)
    for d, label in ((d1, "points1"), (d2, "points2")):
        off = d + np.diag(np.full(d.shape[0], np.inf))
        if np.any(off == 0.0):
            raise DegenerateInput(f"two landmarks of {label} coincide")
    m, n = d1.shape[0], d2.shape[0]
    mask1 = graph_edges(points1, edges)
    mask2 = graph_edges(points2, edges)
    E = build_affinity(d1, d2).reshape(m, m, n, n)  # (i, j, a, b)
    E *= mask1[:, :, None, None] & mask2[None, None, :, :]
    return E.transpose(0, 2, 1, 3).reshape(m * n, m * n)


def gen_graph_matching(points1, points2, mu: float, primal_set=None, seed=None,
                       edges: str = "delaunay") -> GraphMatchingProblem:
    points1 = np.asarray(points1, dtype=float)
    points2 = np.asarray(points2, dtype=float)
    K = pairwise_affinity(points1, points2, edges)
    return GraphMatchingProblem(K, len(points1), len(points2), mu, primal_set=primal_set,
                                points1=points1, points2=points2, seed=seed, edges=edges)


def spectral_start(problem: GraphMatchingProblem) -> np.ndarray:
    """Polar factor of the leading eigenvector of ``K`` reshaped to m x n.

    ``K`` is entrywise nonnegative, so the sign is fixed by a nonnegative sum.
    """
    _, vecs = np.linalg.eigh(problem.K)
    v = vecs[:, -1]
    if v.sum() < 0:
        v = -v
    return stiefel_project(v.reshape(problem.shape))


def synthetic_points(n: int, seed: int, extent: float = 500.0) -> np.ndarray:
    """Uniform landmarks in ``[0, extent]^2``."""
    return extent * SplitMix64(seed).uniform((n, 2))


def _existing(path: Path) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"missing data file: {path}")
    return path


def load_problem(directory) -> Problem:
    """Inverse of ``Problem.save``."""
    d = Path(directory)
    meta_path = d / "meta.json"
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FileNotFoundError(f"missing problem metadata: {meta_path}") from None

    def mat(name):
        return read_matrix(_existing(d / name))

    pset = primal_set_from_dict(meta["primal_set"])
    kw = dict(primal_set=pset, seed=meta.get("seed"),
              smooth_lipschitz=meta["smooth_lipschitz"])
    name = meta["name"]
    if name == "qp":
        return QuadraticProblem(mat("A.txt"), mat("G.txt"), meta["mu"], **kw)
    if name == "spca":
        return SparsePCAProblem(mat("AtA.txt"), meta["n"], meta["mu"], **kw)
    if name == "gm":
        edges = meta.get("edges")
        if edges is None:
            return GraphMatchingProblem(mat("K.txt"), meta["m"], meta["n"], meta["mu"], **kw)
        p1, p2 = (read_points(_existing(d / f)) for f in ("points1.txt", "points2.txt"))
        return GraphMatchingProblem(pairwise_affinity(p1, p2, edges), meta["m"], meta["n"],
                                    meta["mu"], points1=p1, points2=p2, edges=edges, **kw)
    raise ValueError(f"{meta_path}: unknown problem name {name!r}")


def sampled_lipschitz_ratio(problem: Problem, pairs: int = 200, seed: int = 0) -> float:
    """Largest ``||grad(X) - grad(X')|| / ||X - X'||`` over seeded pairs in the domain."""
    rng = SplitMix64(seed)
    worst = 0.0
    for _ in range(pairs):
        X = problem.primal_set.project(rng.normal(problem.shape))
        Xp = problem.primal_set.project(rng.normal(problem.shape))
        den = frobenius_norm(X - Xp)
        if den > 0:
            num = frobenius_norm(problem.grad_smooth(X) - problem.grad_smooth(Xp))
            worst = max(worst, num / den)
    return worst

"""Per-neighborhood weight matrices ``W_i`` for LEM, DFM, LLE, LTSA and HLLE.

Each algorithm's cost is ``sum_i ||W_i Y_i||_F^2`` where ``Y_i`` stacks the
rows ``[i, neighbors[i]]`` of a candidate embedding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import nnls

from .datasets import PointCloud
from .neighbors import NeighborhoodIndex

ALGORITHMS = ("lem", "dfm", "lle", "ltsa", "hlle")
DEGREE_FAMILY = ("lem", "dfm")

LLE_RIDGE = 1e-3
LLE_COND_LIMIT = 1e12
GS_TOL = 1e-10


class WeightError(ValueError):
    """Weights cannot be built for the given neighborhoods or parameters."""


def canonical_signs(u: np.ndarray) -> np.ndarray:
    """Flip columns so that each column's largest-magnitude entry is positive."""
    u = np.array(u, dtype=float, copy=True)
    if u.size == 0:
        return u
    pivot = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[pivot, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def _as_points(cloud) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.points
    pts = np.asarray(cloud, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


def normalize_algorithm(name: str) -> str:
    key = str(name).lower()
    if key not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")
    return key


@dataclass(frozen=True)
class LocalWeightSet:
    """Weight matrices for every neighborhood of an index.

    Attributes
    ----------
    algorithm : str
        One of ``lem, dfm, lle, ltsa, hlle``.
    index : NeighborhoodIndex
        Neighborhoods the matrices refer to.
    W : tuple of ndarray
        ``W[i]`` has ``len(neighbors[i]) + 1`` columns.
    degrees : ndarray or None
        ``d_ii = sum_j w_ij`` for LEM and DFM.
    pair_weights : tuple of ndarray or None
        Scalar weights ``w_ij`` (LEM, DFM, LLE).
    params : dict
        Construction parameters.
    """

    algorithm: str
    index: NeighborhoodIndex
    W: tuple
    degrees: np.ndarray | None = None
    pair_weights: tuple | None = None
    params: dict = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return self.index.n_points

    @property
    def family(self) -> str:
        return "degree" if self.algorithm in DEGREE_FAMILY else "covariance"

    def local_costs(self, Y) -> np.ndarray:
        """``||W_i Y_i||_F^2`` for every neighborhood."""
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if Y.shape[0] != self.n_points:
            raise ValueError("Y must have one row per point")
        out = np.empty(self.n_points)
        groups: dict[tuple, list[int]] = {}
        for i, w in enumerate(self.W):
            groups.setdefault(w.shape, []).append(i)
        for _, idx in groups.items():
            idx = np.asarray(idx)
            Ws = np.stack([self.W[i] for i in idx])
            hood = np.stack([self.index.neighborhood(i) for i in idx])
            prod = np.einsum("nrk,nkd->nrd", Ws, Y[hood])
            out[idx] = np.einsum("nrd,nrd->n", prod, prod)
        return out

    def cost(self, Y) -> float:
        """Direct per-neighborhood evaluation of the quadratic cost."""
        return float(self.local_costs(Y).sum())

    def frobenius_sq(self) -> np.ndarray:
        return np.array([float(np.sum(w * w)) for w in self.W])

    def has_negative_weights(self) -> bool:
        if self.pair_weights is None:
            return False
        return any(np.any(w < 0) for w in self.pair_weights)

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "params": self.params,
                "W": [w.tolist() for w in self.W],
                "degrees": None if self.degrees is None else self.degrees.tolist()}


def _kernel_fn(kernel, eps) -> Callable[[np.ndarray], np.ndarray]:
    if callable(kernel):
        return kernel
    if kernel == "window":
        return lambda d2: np.ones_like(d2)
    if kernel == "gaussian":
        if eps is None or not eps > 0:
            raise WeightError(f"gaussian kernel needs eps > 0, got {eps}")
        return lambda d2: np.exp(-d2 / eps)
    raise WeightError(f"unknown kernel {kernel!r}")


def _kernel_name(kernel) -> str:
    return kernel if isinstance(kernel, str) else getattr(kernel, "__name__", "custom")


def _neighbor_sq_dists(points, index):
    return [np.sum((points[nb] - points[i]) ** 2, axis=1) for i, nb in enumerate(index.neighbors)]


def _pairwise_matrix(w: np.ndarray) -> np.ndarray:
    s = np.sqrt(w)
    return np.column_stack([s, -np.diag(s)])


def _pair_weight_set(algorithm, index, weights, params):
    weights = [np.asarray(w, dtype=float) for w in weights]
    for i, w in enumerate(weights):
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise WeightError(f"kernel produced invalid weights at point {i}")
    degrees = np.array([w.sum() for w in weights])
    bad = np.flatnonzero(degrees <= 0)
    if bad.size:
        raise WeightError(f"non-positive degree at point {bad[0]}")
    W = tuple(_pairwise_matrix(w) for w in weights)
    return LocalWeightSet(algorithm, index, W, degrees, tuple(weights), params)


def lem_weights(cloud, index: NeighborhoodIndex, kernel="window",
                eps: float | None = None) -> LocalWeightSet:
    """Laplacian-eigenmap weights: window (``w=1``), gaussian or a callable
    of the squared distance."""
    points = _as_points(cloud)
    fn = _kernel_fn(kernel, eps)
    w = [fn(d2) for d2 in _neighbor_sq_dists(points, index)]
    return _pair_weight_set("lem", index, w, {"kernel": _kernel_name(kernel), "eps": eps})


def dfm_weights(cloud, index: NeighborhoodIndex, kernel="gaussian", eps: float | None = 4.0,
                alpha: float = 1.0) -> LocalWeightSet:
    """Diffusion-map weights ``k(x_i, x_j) / (q(x_i)^alpha q(x_j)^alpha)``.

    ``q(x) = sum_j k(x, x_j)`` runs over the neighbors of ``x``.
    """
    points = _as_points(cloud)
    fn = _kernel_fn(kernel, eps)
    k = [np.asarray(fn(d2), dtype=float) for d2 in _neighbor_sq_dists(points, index)]
    q = np.array([kk.sum() for kk in k])
    if np.any(q <= 0):
        raise WeightError(f"kernel density q is zero at point {int(np.flatnonzero(q <= 0)[0])}")
    w = [kk / (q[i] ** alpha * q[nb] ** alpha) for i, (kk, nb) in enumerate(zip(k, index.neighbors))]
    params = {"kernel": _kernel_name(kernel), "eps": eps, "alpha": alpha}
    return _pair_weight_set("dfm", index, w, params)


def _lle_min_norm(G: np.ndarray) -> np.ndarray:
    """Minimum-norm minimizer of ||G w||^2 subject to sum(w) = 1."""
    k = G.shape[1]
    w0 = np.full(k, 1.0 / k)
    if k == 1:
        return w0
    # orthonormal basis of the complement of the ones vector
    basis = np.linalg.qr(np.column_stack([np.ones(k), np.eye(k)[:, : k - 1]]))[0][:, 1:]
    v = np.linalg.lstsq(G @ basis, -G @ w0, rcond=None)[0]
    return w0 + basis @ v


def _lle_positive(G: np.ndarray, ridge: float) -> np.ndarray:
    """Non-negative weights summing to one (penalized NNLS)."""
    k = G.shape[1]
    scale = max(float(np.sum(G * G)), 1e-300)
    lam = 1e3 * math.sqrt(scale)
    rows = [G, lam * np.ones((1, k))]
    if ridge > 0:
        rows.append(math.sqrt(ridge) * np.eye(k))
    A = np.vstack(rows)
    b = np.zeros(A.shape[0])
    b[G.shape[0]] = lam
    w = nnls(A, b)[0]
    if w.sum() <= 0:
        w = np.full(k, 1.0 / k)
    return w / w.sum()


def lle_weights(cloud, index: NeighborhoodIndex, reg="auto", ridge: float = LLE_RIDGE,
                positive: bool = False) -> LocalWeightSet:
    """Locally-linear reconstruction weights.

    Parameters
    ----------
    reg : {"auto", "none", "always"}
        ``auto`` adds ``ridge * trace(C) / K`` to the local Gram matrix ``C``
        when ``K > D`` or ``cond(C) > 1e12``; ``none`` returns the minimum-norm
        exact constrained minimizer; ``always`` adds the ridge unconditionally.
    positive : bool
        Restrict to non-negative weights.
    """
    if reg not in ("auto", "none", "always"):
        raise WeightError(f"unknown regularization policy {reg!r}")
    points = _as_points(cloud)
    D = points.shape[1]
    W, pw = [], []
    n_reg = 0
    for i, nb in enumerate(index.neighbors):
        G = (points[nb] - points[i]).T  # D x K
        k = G.shape[1]
        C = G.T @ G
        tr = float(np.trace(C))
        if reg == "always":
            use_ridge = True
        elif reg == "none":
            use_ridge = False
        else:
            use_ridge = k > D or np.linalg.cond(C) > LLE_COND_LIMIT
        amount = ridge * (tr if tr > 0 else 1.0) / k if use_ridge else 0.0
        n_reg += bool(use_ridge)
        if positive:
            w = _lle_positive(G, amount)
        elif use_ridge:
            w = np.linalg.solve(C + amount * np.eye(k), np.ones(k))
            w /= w.sum()
        else:
            w = _lle_min_norm(G)
        pw.append(w)
        W.append(np.concatenate([[1.0], -w])[None, :])
    params = {"reg": reg, "ridge": ridge, "positive": positive, "n_regularized": n_reg}
    return LocalWeightSet("lle", index, tuple(W), None, tuple(pw), params)


def _tangent_basis(centered: np.ndarray, d: int) -> np.ndarray:
    """First ``d`` left singular vectors of a centered block, sign-canonical.

    Rank-deficient blocks are completed with directions orthogonal to the
    ones vector so the result is always orthonormal and centered.
    """
    n = centered.shape[0]
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    tol = max(centered.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    if rank >= d:
        return canonical_signs(u[:, :d])
    base = np.column_stack([np.ones(n) / math.sqrt(n), u[:, :rank]])
    q, _ = np.linalg.qr(np.column_stack([base, np.eye(n)]))
    return canonical_signs(np.column_stack([u[:, :rank], q[:, rank + 1: d + 1]]))


def ltsa_weights(cloud, index: NeighborhoodIndex, d: int) -> LocalWeightSet:
    """``W_i = (I - P_i P_i') H`` with ``H`` centering over the K+1 rows."""
    points = _as_points(cloud)
    W = []
    for i in range(index.n_points):
        hood = index.neighborhood(i)
        n = hood.size
        if n - 1 < d:
            raise WeightError(f"LTSA needs K >= d; point {i} has K={n - 1} < d={d}")
        block = points[hood]
        P = _tangent_basis(block - block.mean(axis=0), d)
        H = np.eye(n) - np.full((n, n), 1.0 / n)
        W.append((np.eye(n) - P @ P.T) @ H)
    return LocalWeightSet("ltsa", index, tuple(W), None, None, {"d": d})


def hlle_min_k(d: int) -> int:
    """Smallest K for which the Hessian estimator is defined."""
    return 1 + d + d * (d + 1) // 2


def _gram_schmidt(M: np.ndarray, tol: float = GS_TOL) -> np.ndarray:
    Q = np.empty_like(M)
    for j in range(M.shape[1]):
        v = M[:, j].copy()
        norm0 = np.linalg.norm(v)
        for _ in range(2):  # re-orthogonalize once for stability
            v -= Q[:, :j] @ (Q[:, :j].T @ v)
        norm = np.linalg.norm(v)
        if norm0 == 0 or norm < tol * norm0:
            raise WeightError(f"Gram-Schmidt rank deficiency at column {j}")
        Q[:, j] = v / norm
    return Q


def hlle_weights(cloud, index: NeighborhoodIndex, d: int) -> LocalWeightSet:
    """Hessian estimator ``W_i = (0, H^i)`` on the K neighbors of each point."""
    points = _as_points(cloud)
    n_quad = d * (d + 1) // 2
    kmin = hlle_min_k(d)
    W = []
    for i, nb in enumerate(index.neighbors):
        k = nb.size
        if k < kmin:
            raise WeightError(f"HLLE with d={d} needs K >= {kmin}; point {i} has K={k}")
        block = points[nb]
        U = _tangent_basis(block - block.mean(axis=0), d)
        quad = [U[:, a] * U[:, b] for a in range(d) for b in range(a, d)]
        M = np.column_stack([np.ones(k), U, *quad])
        try:
            Q = _gram_schmidt(M)
        except WeightError as exc:
            raise WeightError(f"point {i}: {exc}") from None
        H = Q[:, -n_quad:].T
        W.append(np.column_stack([np.zeros(n_quad), H]))
    return LocalWeightSet("hlle", index, tuple(W), None, None, {"d": d})


def build_weights(cloud, index: NeighborhoodIndex, algorithm: str, d: int = 2,
                  **options) -> LocalWeightSet:
    """Dispatch to the weight constructor for ``algorithm``."""
    algorithm = normalize_algorithm(algorithm)
    if algorithm == "lem":
        return lem_weights(cloud, index, **options)
    if algorithm == "dfm":
        return dfm_weights(cloud, index, **options)
    if algorithm == "lle":
        return lle_weights(cloud, index, **options)
    if algorithm == "ltsa":
        return ltsa_weights(cloud, index, d)
    return hlle_weights(cloud, index, d)


def frobenius_constants(algorithm: str, k: int, d: int = 2) -> tuple[float, float]:
    """``(C_a, c_a)``: bounds on ``||W_i||_F^2`` and on ``||W_i X_i||_F^2 / r_i^2``.

    The LLE ``C_a`` assumes non-negative weights; the LEM/DFM constants assume
    ``w_ij <= 1``.
    """
    algorithm = normalize_algorithm(algorithm)
    if algorithm in DEGREE_FAMILY:
        return 2.0 * k, float(k)
    if algorithm == "lle":
        return 2.0, 1.0 / k
    if algorithm == "ltsa":
        return float(k), float(k * k)
    q = d * (d + 1) / 2
    return q, q * (k + 1)

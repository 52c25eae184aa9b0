"""Global quadratic form and the constrained minimization of the cost.

Both constraint families reduce to a symmetric eigenproblem on the subspace
orthogonal to a known trivial direction ``u0``:

* covariance family (LLE, LTSA, HLLE): ``Cov(Y) = I, Y'1 = 0``, with ``A = M``,
  ``u0 = 1/sqrt(N)``, ``Y = sqrt(N) V``;
* degree family (LEM, DFM): ``Y'DY = I, Y'D1 = 0``, with ``A = D^-1/2 M D^-1/2``,
  ``u0 ~ D^1/2 1``, ``Y = D^-1/2 V``.

The trivial direction is deflated explicitly, so a degenerate null space
(flat inputs for LTSA/HLLE/LLE) never leaks the constant vector into ``Y``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import ArpackError, eigsh

from .datasets import PointCloud
from .neighbors import NeighborhoodIndex, build_knn, build_rball, require_connected
from .weights import (DEGREE_FAMILY, LocalWeightSet, build_weights, canonical_signs,
                      normalize_algorithm)

DENSE_LIMIT = 4000
FEASIBILITY_TOL = 1e-8
DEGENERACY_TOL = 1e-10


class SolverError(RuntimeError):
    """The eigensolver failed or returned an unusable basis."""


def assemble_quadratic(weights: LocalWeightSet, n: int | None = None) -> sparse.csr_matrix:
    """Sparse symmetric PSD ``M`` with ``trace(Y'MY) = sum_i ||W_i Y_i||_F^2``."""
    n = weights.n_points if n is None else n
    rows, cols, vals = [], [], []
    for i, w in enumerate(weights.W):
        hood = weights.index.neighborhood(i)
        block = w.T @ w
        rows.append(np.repeat(hood, hood.size))
        cols.append(np.tile(hood, hood.size))
        vals.append(block.ravel())
    M = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n)).tocsr()
    M.sum_duplicates()
    return ((M + M.T) * 0.5).tocsr()


def pair_weight_matrix(weights: LocalWeightSet) -> sparse.csr_matrix:
    """``W_hat[r, s] = w_{r,j}`` when ``s`` is the j-th neighbor of ``r``."""
    if weights.pair_weights is None:
        raise ValueError(f"{weights.algorithm} has no pairwise weights")
    rows, cols = weights.index.edges()
    vals = np.concatenate(weights.pair_weights)
    n = weights.n_points
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


@dataclass(frozen=True)
class EmbeddingResult:
    """Minimizer of the cost under one of the two normalization families.

    Attributes
    ----------
    Y : ndarray, shape (N, d)
        Normalized output matrix (sign-canonical columns).
    cost : float
        ``trace(Y'MY)``.
    eigenvalues : ndarray, shape (d+1,)
        Trivial eigenvalue followed by the ``d`` used ones, ascending.
    next_eigenvalue : float
        First eigenvalue past the cut, used for the degeneracy flag.
    constraint_family : str
        ``"covariance"`` or ``"degree"``.
    degenerate : bool
        True when the cut falls inside a (numerically) repeated eigenvalue.
    """

    Y: np.ndarray
    cost: float
    eigenvalues: np.ndarray
    next_eigenvalue: float
    constraint_family: str
    degenerate: bool
    lambda_max: float
    algorithm: str | None = None
    degrees: np.ndarray | None = None
    output: np.ndarray | None = None
    dfm_embedding: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return self.Y.shape[0]

    def constraint_residuals(self) -> dict:
        Y = self.Y
        n, d = Y.shape
        if self.constraint_family == "degree":
            Dy = self.degrees[:, None] * Y
            return {"gram": float(np.linalg.norm(Y.T @ Dy - np.eye(d))),
                    "mean": float(np.linalg.norm(Dy.sum(axis=0)))}
        return {"gram": float(np.linalg.norm(Y.T @ Y / n - np.eye(d))),
                "mean": float(np.linalg.norm(Y.sum(axis=0)))}

    def to_dict(self) -> dict:
        out = {
            "schema_version": 1,
            "algorithm": self.algorithm,
            "constraint_family": self.constraint_family,
            "n_points": self.n_points,
            "dim": int(self.Y.shape[1]),
            "cost": self.cost,
            "eigenvalues": self.eigenvalues.tolist(),
            "next_eigenvalue": self.next_eigenvalue,
            "lambda_max": self.lambda_max,
            "degenerate": self.degenerate,
            "constraint_residuals": self.constraint_residuals(),
            "params": self.params,
            "Y": self.Y.tolist(),
        }
        if self.dfm_embedding is not None:
            out["dfm_embedding"] = self.dfm_embedding.tolist()
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _start_vector(n: int) -> np.ndarray:
    # fixed ARPACK start vector keeps repeated runs bit-identical
    return np.random.default_rng(0).uniform(0.5, 1.5, n)


def _largest_eigenvalue(A) -> float:
    if sparse.issparse(A):
        try:
            return float(eigsh(A, k=1, which="LA", return_eigenvectors=False, tol=1e-10,
                               v0=_start_vector(A.shape[0]))[0])
        except (ArpackError, ValueError):
            A = A.toarray()
    n = A.shape[0]
    return float(scipy.linalg.eigh(A, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0])


def _dense_deflated(A, u0, count, lam_max):
    dense = A.toarray() if sparse.issparse(A) else np.array(A, dtype=float)
    n = dense.shape[0]
    Au = dense @ u0
    # P A P + s u0 u0' with P = I - u0 u0'
    dense -= np.outer(Au, u0) + np.outer(u0, Au)
    dense += (u0 @ Au + lam_max + 1.0) * np.outer(u0, u0)
    dense = 0.5 * (dense + dense.T)
    vals, vecs = scipy.linalg.eigh(dense, subset_by_index=[0, min(count, n - 1) - 1])
    return vals, vecs


def _sparse_deflated(A, u0, count, lam_max):
    n = A.shape[0]
    k = min(count + 2, n - 2)
    shift = -1e-6 * max(lam_max, 1.0)
    try:
        _, vecs = eigsh(A.tocsc(), k=k, sigma=shift, which="LM", tol=1e-12,
                        v0=_start_vector(n))
    except (ArpackError, RuntimeError) as exc:
        raise SolverError(f"sparse eigensolver failed: {exc}") from exc
    vecs = vecs - np.outer(u0, u0 @ vecs)
    q, s, _ = np.linalg.svd(vecs, full_matrices=False)
    q = q[:, : int(np.sum(s > 1e-8 * s[0]))]
    small = q.T @ (A @ q)
    vals, rot = np.linalg.eigh(0.5 * (small + small.T))
    return vals[:count], (q @ rot)[:, :count]


def _solve(A, u0, d, method):
    n = A.shape[0]
    if d < 1 or d > n - 2:
        raise ValueError(f"output dimension d={d} must satisfy 1 <= d <= N-2")
    data = A.data if sparse.issparse(A) else np.asarray(A)
    if not np.all(np.isfinite(data)):
        raise SolverError("quadratic form has non-finite entries")
    u0 = u0 / np.linalg.norm(u0)
    lam_max = _largest_eigenvalue(A)
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "sparse"
    try:
        if method == "dense":
            vals, vecs = _dense_deflated(A, u0, d + 1, lam_max)
        elif method == "sparse":
            vals, vecs = _sparse_deflated(A, u0, d + 1, lam_max)
        else:
            raise ValueError(f"unknown solver method {method!r}")
    except np.linalg.LinAlgError as exc:
        raise SolverError(str(exc)) from exc
    if not np.all(np.isfinite(vals)) or vecs.shape[1] < d:
        raise SolverError("eigensolver returned an incomplete basis")
    trivial = float(u0 @ (A @ u0))
    nxt = float(vals[d]) if vals.size > d else math.inf
    degenerate = bool(nxt - vals[d - 1] < DEGENERACY_TOL * max(lam_max, 1e-300))
    vecs = vecs[:, :d] - np.outer(u0, u0 @ vecs[:, :d])
    return np.concatenate([[trivial], vals[:d]]), nxt, degenerate, lam_max, vecs


def solve_degree_constrained(M, degrees, d: int, method: str = "auto") -> EmbeddingResult:
    """Minimize ``trace(Y'MY)`` subject to ``Y'DY = I`` and ``Y'D1 = 0``."""
    degrees = np.asarray(degrees, dtype=float)
    if np.any(degrees <= 0):
        raise ValueError("degrees must be strictly positive")
    M = sparse.csr_matrix(M) if not sparse.issparse(M) else M.tocsr()
    s = 1.0 / np.sqrt(degrees)
    Dm = sparse.diags(s)
    A = (Dm @ M @ Dm).tocsr()
    vals, nxt, degenerate, lam_max, vecs = _solve(A, np.sqrt(degrees), d, method)
    Y = canonical_signs(s[:, None] * vecs)
    cost = float(np.einsum("ij,ij->", Y, M @ Y))
    return EmbeddingResult(Y, cost, vals, nxt, "degree", degenerate, lam_max, degrees=degrees)


def solve_cov_constrained(M, d: int, method: str = "auto") -> EmbeddingResult:
    """Minimize ``trace(Y'MY)`` subject to ``Cov(Y) = I`` and ``Y'1 = 0``.

    Eigenvalues are those of ``M`` itself; ``cost = N * sum(eigenvalues)``.
    """
    M = sparse.csr_matrix(M) if not sparse.issparse(M) else M.tocsr()
    n = M.shape[0]
    vals, nxt, degenerate, lam_max, vecs = _solve(M, np.ones(n), d, method)
    Y = canonical_signs(math.sqrt(n) * vecs)
    cost = float(np.einsum("ij,ij->", Y, M @ Y))
    return EmbeddingResult(Y, cost, vals, nxt, "covariance", degenerate, lam_max)


def markov_eigenvalues(Y: np.ndarray, weights: LocalWeightSet) -> np.ndarray:
    """Rayleigh quotients ``y_p' W_hat y_p / y_p' D y_p`` of the diffusion operator.

    For a symmetric weight graph these are exactly the eigenvalues of
    ``D^-1 W_hat`` paired with the columns of ``Y``.
    """
    What = pair_weight_matrix(weights)
    sym = 0.5 * (What + What.T)
    num = np.einsum("ij,ij->j", Y, sym @ Y)
    den = np.einsum("ij,ij->j", Y, weights.degrees[:, None] * Y)
    return num / den


def dfm_output_transform(Y: np.ndarray, eigenvalues) -> np.ndarray:
    """Diffusion-map coordinates: column ``p`` becomes ``lambda_p y_p / ||y_p||``."""
    Y = np.asarray(Y, dtype=float)
    lam = np.asarray(eigenvalues, dtype=float)
    norms = np.linalg.norm(Y, axis=0)
    if np.any(norms == 0):
        raise ValueError("zero-norm column in the output matrix")
    return Y / norms * lam


def build_index(cloud, k: int | None = None, r: float | None = None) -> NeighborhoodIndex:
    if (k is None) == (r is None):
        raise ValueError("give exactly one of k (K-nearest) or r (r-ball)")
    return build_knn(cloud, k) if k is not None else build_rball(cloud, r)


def embed(cloud, algorithm: str, k: int | None = None, r: float | None = None, d: int = 2,
          method: str = "auto", index: NeighborhoodIndex | None = None,
          **weight_options) -> EmbeddingResult:
    """Neighborhoods, weights, assembly and the matching constrained solve.

    ``result.output`` is the algorithm's native embedding: ``Y`` for LEM and
    LLE, ``Y / sqrt(N)`` for LTSA and HLLE, and the diffusion coordinates for
    DFM.
    """
    algorithm = normalize_algorithm(algorithm)
    points = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    index = build_index(points, k, r) if index is None else index
    require_connected(index)
    weights = build_weights(points, index, algorithm, d=d, **weight_options)
    M = assemble_quadratic(weights)
    if algorithm in DEGREE_FAMILY:
        res = solve_degree_constrained(M, weights.degrees, d, method)
    else:
        res = solve_cov_constrained(M, d, method)
    dfm = None
    if algorithm == "lem" or algorithm == "lle":
        output = res.Y
    elif algorithm == "dfm":
        dfm = dfm_output_transform(res.Y, markov_eigenvalues(res.Y, weights))
        output = dfm
    else:
        output = res.Y / math.sqrt(res.n_points)
    params = {"k": k, "r": r, "d": d, **weights.params}
    return EmbeddingResult(res.Y, res.cost, res.eigenvalues, res.next_eigenvalue,
                           res.constraint_family, res.degenerate, res.lambda_max, algorithm,
                           res.degrees, output, dfm, params)

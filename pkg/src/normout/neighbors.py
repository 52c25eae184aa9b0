"""K-nearest-neighbor and r-ball neighborhoods.

Neighbor search is exact brute force over squared Euclidean distances taken
from coordinate differences, so lattice ties stay exact; ties are broken by
the lower point index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .datasets import PointCloud

_CHUNK = 256


class NeighborhoodError(ValueError):
    """Invalid neighborhood parameters or an isolated point."""


class DisconnectedGraphError(RuntimeError):
    """The symmetrized neighborhood graph has more than one component."""


def _as_points(cloud) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.points
    pts = np.asarray(cloud, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


def _sq_dist_rows(points: np.ndarray, rows: slice) -> np.ndarray:
    diff = points[rows, None, :] - points[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def neighborhood_radii(points: np.ndarray, neighbors) -> np.ndarray:
    """Largest pairwise distance inside each neighborhood ``[i, neighbors[i]]``."""
    points = _as_points(points)
    radii = np.empty(len(neighbors))
    by_size: dict[int, list[int]] = {}
    for i, nb in enumerate(neighbors):
        by_size.setdefault(len(nb), []).append(i)
    for size, idx in by_size.items():
        idx = np.asarray(idx)
        full = np.column_stack([idx, np.stack([neighbors[i] for i in idx])]) if size else idx[:, None]
        block = points[full]  # (n, size+1, D)
        diff = block[:, :, None, :] - block[:, None, :, :]
        radii[idx] = np.sqrt((diff * diff).sum(axis=-1).max(axis=(1, 2)))
    return radii


@dataclass(frozen=True)
class NeighborhoodIndex:
    """Directed neighbor lists with per-neighborhood radii.

    ``neighbors[i]`` is ordered by distance to point ``i`` (then by index) and
    never contains ``i``.  ``radii[i]`` is the largest distance between any
    two members of ``{i} | neighbors[i]``.
    """

    neighbors: tuple
    radii: np.ndarray
    mode: str
    param: float | None = None

    def __post_init__(self):
        n = len(self.neighbors)
        nbs = []
        for i, nb in enumerate(self.neighbors):
            nb = np.asarray(nb, dtype=np.intp)
            if nb.size == 0:
                raise NeighborhoodError(f"point {i} has no neighbors")
            if np.any(nb == i) or np.any(nb < 0) or np.any(nb >= n):
                raise NeighborhoodError(f"invalid neighbor list for point {i}")
            nb.setflags(write=False)
            nbs.append(nb)
        radii = np.array(self.radii, dtype=float)
        radii.setflags(write=False)
        object.__setattr__(self, "neighbors", tuple(nbs))
        object.__setattr__(self, "radii", radii)

    @classmethod
    def from_lists(cls, points, neighbors, mode: str = "explicit", param=None):
        """Build an index from caller-supplied neighbor lists."""
        points = _as_points(points)
        nbs = [np.asarray(nb, dtype=np.intp) for nb in neighbors]
        if len(nbs) != points.shape[0]:
            raise NeighborhoodError("one neighbor list per point is required")
        return cls(tuple(nbs), neighborhood_radii(points, nbs), mode, param)

    @property
    def n_points(self) -> int:
        return len(self.neighbors)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.neighbors])

    @property
    def k(self) -> int | None:
        """Common neighborhood size, or None if sizes vary."""
        s = self.sizes
        return int(s[0]) if np.all(s == s[0]) else None

    def neighborhood(self, i: int) -> np.ndarray:
        """Indices ``[i, x_{i,1}, ..., x_{i,K}]``."""
        return np.concatenate([[i], self.neighbors[i]])

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        rows = np.repeat(np.arange(self.n_points), self.sizes)
        cols = np.concatenate(self.neighbors)
        return rows, cols

    @property
    def membership_counts(self) -> np.ndarray:
        """Number of neighborhoods each point belongs to (its own included)."""
        return np.bincount(np.concatenate([np.arange(self.n_points), *self.neighbors]),
                           minlength=self.n_points)

    @property
    def membership_max(self) -> int:
        return int(self.membership_counts.max())

    def adjacency(self) -> sparse.csr_matrix:
        rows, cols = self.edges()
        return sparse.csr_matrix((np.ones(rows.size), (rows, cols)),
                                 shape=(self.n_points, self.n_points))

    def to_dict(self) -> dict:
        return {"mode": self.mode, "param": self.param,
                "neighbors": [nb.tolist() for nb in self.neighbors],
                "radii": self.radii.tolist(), "membership_max": self.membership_max}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def build_knn(cloud, k: int) -> NeighborhoodIndex:
    """K nearest neighbors of every point (self excluded)."""
    points = _as_points(cloud)
    n = points.shape[0]
    if int(k) != k or not 1 <= k <= n - 1:
        raise NeighborhoodError(f"K must satisfy 1 <= K <= N-1 = {n - 1}, got {k}")
    k = int(k)
    nbrs = np.empty((n, k), dtype=np.intp)
    for start in range(0, n, _CHUNK):
        rows = slice(start, min(start + _CHUNK, n))
        d2 = _sq_dist_rows(points, rows)
        d2[np.arange(d2.shape[0]), np.arange(rows.start, rows.stop)] = np.inf
        # candidates within the K-th distance, then a stable sort: ties go to lower index
        kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
        for r, (row, cut) in enumerate(zip(d2, kth)):
            cand = np.flatnonzero(row <= cut)
            nbrs[rows.start + r] = cand[np.argsort(row[cand], kind="stable")[:k]]
    return NeighborhoodIndex(tuple(nbrs), neighborhood_radii(points, nbrs), "knn", k)


def build_rball(cloud, r: float) -> NeighborhoodIndex:
    """All points within distance ``r`` of each point (self excluded)."""
    if not r > 0:
        raise NeighborhoodError(f"r must be positive, got {r}")
    points = _as_points(cloud)
    n = points.shape[0]
    r2 = float(r) ** 2
    lists = []
    for start in range(0, n, _CHUNK):
        rows = slice(start, min(start + _CHUNK, n))
        d2 = _sq_dist_rows(points, rows)
        for off, row in enumerate(d2):
            i = start + off
            row[i] = np.inf
            idx = np.flatnonzero(row <= r2)
            if idx.size == 0:
                raise NeighborhoodError(f"point {i} has no neighbors within r={r}")
            lists.append(idx[np.argsort(row[idx], kind="stable")])
    return NeighborhoodIndex(tuple(lists), neighborhood_radii(points, lists), "rball", float(r))


def n_components(index: NeighborhoodIndex) -> int:
    count, _ = connected_components(index.adjacency(), directed=True, connection="weak")
    return int(count)


def is_connected(index: NeighborhoodIndex) -> bool:
    """True iff the symmetrized neighbor graph is connected."""
    return n_components(index) == 1


def require_connected(index: NeighborhoodIndex) -> None:
    count = n_components(index)
    if count != 1:
        raise DisconnectedGraphError(
            f"neighborhood graph is disconnected ({count} components); increase K or r")

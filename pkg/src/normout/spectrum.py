"""Neumann spectrum of the strip ``[0, L] x [0, 1]`` versus discrete LEM.

The continuous eigenfunctions are ``cos(i pi x1 / L) cos(j pi x2)`` with
eigenvalues ``(i pi / L)^2 + (j pi)^2``.  The first two nontrivial ones depend
on ``x1`` alone exactly when ``(2 pi / L)^2 < pi^2``, i.e. ``L > 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embedding import assemble_quadratic, solve_degree_constrained
from .neighbors import NeighborhoodIndex
from .weights import lem_weights


@dataclass(frozen=True)
class StripMode:
    i: int
    j: int
    eigenvalue: float

    @property
    def x1_only(self) -> bool:
        return self.j == 0


def analytic_modes(L: float, count: int) -> list[StripMode]:
    """The ``count`` smallest nontrivial Neumann modes, ascending (ties by ``j``)."""
    if L <= 0:
        raise ValueError("L must be positive")
    imax = int(math.ceil(L * math.sqrt(count + 1))) + count + 1
    jmax = count + 1
    modes = [StripMode(i, j, (i * math.pi / L) ** 2 + (j * math.pi) ** 2)
             for i in range(imax + 1) for j in range(jmax + 1) if (i, j) != (0, 0)]
    modes.sort(key=lambda m: (m.eigenvalue, m.j))
    return modes[:count]


def strip_lattice(L: float, nx: int, ny: int):
    """Vertex-centered ``nx x ny`` lattice on the strip with 4-neighbor lists."""
    xs = np.linspace(0.0, L, nx)
    ys = np.linspace(0.0, 1.0, ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel()])
    lists = []
    for a in range(nx):
        for b in range(ny):
            nb = [(a + da) * ny + (b + db) for da, db in ((-1, 0), (1, 0), (0, -1), (0, 1))
                  if 0 <= a + da < nx and 0 <= b + db < ny]
            lists.append(nb)
    return points, NeighborhoodIndex.from_lists(points, lists, mode="lattice4")


def _inverse_square(d2):
    return 1.0 / d2


@dataclass(frozen=True)
class SpectrumReport:
    L: float
    modes: list
    discrete_eigenvalues: np.ndarray
    similarities: np.ndarray
    degenerate: bool

    @property
    def first_two_x1_only(self) -> bool:
        return all(m.x1_only for m in self.modes[:2])


def strip_spectrum_compare(L: float, nx: int = 61, ny: int = 21,
                           count: int = 2) -> SpectrumReport:
    """Match discrete LEM eigenvectors to the analytic strip modes.

    Edge weights are ``1/h^2`` for the lattice spacing ``h`` along the edge,
    so the graph Laplacian approximates the continuous one.  Similarity is
    ``|cos|`` between eigenvector ``p`` and analytic mode ``p`` sampled at
    the nodes.
    """
    points, index = strip_lattice(L, nx, ny)
    weights = lem_weights(points, index, kernel=_inverse_square)
    res = solve_degree_constrained(assemble_quadratic(weights), weights.degrees, count)
    modes = analytic_modes(L, count)
    sims = []
    for p, mode in enumerate(modes):
        phi = np.cos(mode.i * math.pi * points[:, 0] / L) * np.cos(mode.j * math.pi * points[:, 1])
        v = res.Y[:, p]
        sims.append(abs(float(v @ phi)) / (np.linalg.norm(v) * np.linalg.norm(phi)))
    return SpectrumReport(float(L), modes, res.eigenvalues[1:], np.array(sims), res.degenerate)

"""Closed forms for the integer lattice ``[-m..m] x [-q..q]``.

Everything here is exact rational arithmetic.  On the lattice the collapse
embedding is written with slope ``2/rho`` (so ``rho`` here is twice the scale
used for general samples), and for an inner point ``p`` with LEM window
weights

    phi(Y_p) = F (1/sigma^2 + 1/tau^2),    phi(Z_p) = F (1/sigma^2 + 4/rho^2),

where ``F`` is the sum of squared first-axis offsets over the neighborhood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate

from .datasets import gen_grid
from .neighbors import build_knn, build_rball

F_TABLE = {4: 2, 8: 6, 12: 14}


def sigma2(m: int) -> Fraction:
    """Variance of the first lattice coordinate, ``m(m+1)/3``."""
    return Fraction(m * (m + 1), 3)


def tau2(q: int) -> Fraction:
    return Fraction(q * (q + 1), 3)


def rho2(m: int) -> Fraction:
    """Lattice ``rho^2 = 4m(m+1)/3 - 4m^2(m+1)^2/(2m+1)^2``."""
    return Fraction(4 * m * (m + 1), 3) - Fraction(4 * m * m * (m + 1) ** 2, (2 * m + 1) ** 2)


def ball_offsets(r: float) -> list[tuple[int, int]]:
    """Nonzero lattice offsets of norm at most ``r``."""
    R = int(math.floor(r))
    return [(a, b) for a in range(-R, R + 1) for b in range(-R, R + 1)
            if (a, b) != (0, 0) and a * a + b * b <= r * r + 1e-12]


def F_of_k(k: int) -> int:
    """Sum of squared first-axis offsets of the ``k`` nearest lattice neighbors."""
    if k not in F_TABLE:
        raise ValueError(f"closed-form F is tabulated for K in {sorted(F_TABLE)}, got {k}")
    return F_TABLE[k]


def F_of_r(r: float) -> int:
    return sum(a * a for a, _ in ball_offsets(r))


def continuous_FK(r: float, kernel=None) -> float:
    """Integral estimate of ``F`` for an ``r``-ball.

    ``pi r^4 / 4`` for unit weights; with ``kernel`` (a function of squared
    distance) the estimate is ``pi * int_0^r k(t^2) t^3 dt``.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if kernel is None:
        return math.pi * r ** 4 / 4.0
    val, _ = integrate.quad(lambda t: kernel(t * t) * t ** 3, 0.0, r, epsabs=1e-13, epsrel=1e-12)
    return math.pi * val


@dataclass(frozen=True)
class Theorem1Result:
    m: int
    q: int
    F: int
    sigma2: Fraction
    tau2: Fraction
    rho2: Fraction
    phi_y: Fraction
    phi_z: Fraction
    brute_phi_y: Fraction | None = None
    brute_phi_z: Fraction | None = None
    inner_point: tuple[int, int] | None = None

    @property
    def verdict(self) -> bool:
        """True when the faithful embedding is locally more expensive."""
        return self.phi_y > self.phi_z

    @property
    def brute_force_agrees(self) -> bool | None:
        if self.brute_phi_y is None:
            return None
        return self.brute_phi_y == self.phi_y and self.brute_phi_z == self.phi_z


def _lattice_moments(m: int, q: int) -> tuple[Fraction, Fraction, Fraction]:
    """sigma^2, tau^2 and lattice rho^2 by direct summation over the grid."""
    xs = range(-m, m + 1)
    ys = range(-q, q + 1)
    s2 = Fraction(sum(i * i for i in xs), 2 * m + 1)
    t2 = Fraction(sum(j * j for j in ys), 2 * q + 1)
    mean_abs = Fraction(sum(abs(i) for i in xs), 2 * m + 1)
    return s2, t2, 4 * (s2 - mean_abs ** 2)


def _brute_inner(m, q, k, r):
    reach = 3 if r is None else int(math.ceil(r))
    i0, j0 = max(reach, m // 2), 0
    if i0 + reach > m or q < reach:
        return None
    cloud = gen_grid(m, q)
    index = build_knn(cloud, k) if r is None else build_rball(cloud, r)
    pts = cloud.points.astype(int)
    p = int(np.flatnonzero((pts[:, 0] == i0) & (pts[:, 1] == j0))[0])
    s2, t2, g2 = _lattice_moments(m, q)
    phi_y = phi_z = Fraction(0)
    for nb in index.neighbors[p]:
        a, b = int(pts[nb, 0]), int(pts[nb, 1])
        da, db = a - i0, b - j0
        phi_y += Fraction(da * da) / s2 + Fraction(db * db) / t2
        dv = 2 * (abs(a) - abs(i0))
        phi_z += Fraction(da * da) / s2 + Fraction(dv * dv) / g2
    return phi_y, phi_z, (i0, j0)


def grid_theorem1_check(m: int, q: int, k: int | None = 8, r: float | None = None,
                        brute_force: bool = True) -> Theorem1Result:
    """Compare ``phi(Y_p)`` and ``phi(Z_p)`` at an inner lattice point.

    Closed forms use the tabulated ``F(K)`` (K-nearest) or the enumerated
    ball sum (``1 <= r <= 3``).  With ``brute_force`` the two values are also
    summed over the actual neighborhood of an inner point of the generated
    grid, in exact arithmetic.
    """
    if m < q or q < 1:
        raise ValueError("need m >= q >= 1")
    if r is not None:
        if not 1.0 <= r <= 3.0:
            raise ValueError("r must lie in [1, 3]")
        k = None
        F = F_of_r(r)
    else:
        F = F_of_k(k)
    s2, t2, g2 = sigma2(m), tau2(q), rho2(m)
    phi_y = F * (1 / s2 + 1 / t2)
    phi_z = F * (1 / s2 + 4 / g2)
    extra = {}
    if brute_force:
        got = _brute_inner(m, q, k, r)
        if got is not None:
            extra = dict(brute_phi_y=got[0], brute_phi_z=got[1], inner_point=got[2])
    return Theorem1Result(m, q, F, s2, t2, g2, phi_y, phi_z, **extra)

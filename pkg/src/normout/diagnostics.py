"""Faithful and collapsed reference embeddings, and the failure criteria.

Given a latent sample ``X`` and a local weight set, this module builds

* ``Y = X Sigma^-1/2``, the affine image of the latent sample that meets the
  covariance constraints (and ``Y_hat``, its counterpart for the degree
  constraints);
* ``Z``, a competitor that keeps the first latent coordinate and replaces the
  second by a V-shaped function of the first;

and evaluates the sufficient conditions under which ``Phi(Y) > Phi(Z)``,
i.e. under which the faithful embedding cannot be the minimizer.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .neighbors import NeighborhoodIndex, neighborhood_radii
from .weights import DEGREE_FAMILY, LocalWeightSet, frobenius_constants

REPORT_SCHEMA_VERSION = 1


class DiagnosticsError(ValueError):
    """Latent sample unsuitable for the requested construction."""


# ---------------------------------------------------------------- latent axes

def principal_axes(latent) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean, rotation (columns = axes, sign-canonical) and descending variances."""
    X = np.asarray(latent, dtype=float)
    if X.ndim != 2:
        raise DiagnosticsError("latent must be an N x d matrix")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / X.shape[0]
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    pivot = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.where(vecs[pivot, np.arange(vecs.shape[1])] < 0, -1.0, 1.0)
    return mean, vecs, np.clip(vals, 0.0, None)


def canonicalize_latent(latent) -> tuple[np.ndarray, np.ndarray]:
    """Center and rotate to principal axes.

    Returns
    -------
    X_c : ndarray, shape (N, d)
        Centered sample whose population covariance is diagonal and
        non-increasing.
    Sigma : ndarray, shape (d, d)
        ``diag(sigma^2, tau^2, ...)``.
    """
    mean, rot, var = principal_axes(latent)
    if var[-1] <= 1e-14 * max(var[0], 1e-300):
        raise DiagnosticsError("degenerate latent covariance (a principal variance is zero)")
    Xc = (np.asarray(latent, dtype=float) - mean) @ rot
    Xc -= Xc.mean(axis=0)
    return Xc, np.diag(var)


def build_y(X_c, Sigma) -> np.ndarray:
    """``Y = X_c Sigma^-1/2``: unit covariance, zero mean."""
    return np.asarray(X_c, dtype=float) / np.sqrt(np.diag(Sigma))


# ------------------------------------------------------------------- V-map

def kappa_raw(x1, weights=None) -> float:
    """Slope ratio that zeroes the (weighted) covariance of ``x`` and its V-map.

    ``sum_{x<0} w x^2 / sum_{x>=0} w x^2``.
    """
    x1 = np.asarray(x1, dtype=float)
    w = np.ones_like(x1) if weights is None else np.asarray(weights, dtype=float)
    neg = x1 < 0
    num = float(np.sum(w[neg] * x1[neg] ** 2))
    den = float(np.sum(w[~neg] * x1[~neg] ** 2))
    if num == 0.0 or den == 0.0:
        raise DiagnosticsError("first latent coordinate lies on one side of zero")
    return num / den


@dataclass(frozen=True)
class VMap:
    """Parameters of the V-shaped second column.

    ``u = -x`` for ``x < 0`` and ``kappa x`` for ``x >= 0``; the column is
    ``(u - mean) / rho``.  ``flipped`` records that ``x`` was negated to make
    ``kappa >= 1``.
    """

    kappa: float
    rho: float
    zbar: float
    flipped: bool

    @property
    def rho_grid(self) -> float:
        """Scale in the lattice convention, where the slope is ``2/rho``."""
        return 2.0 * self.rho

    def apply(self, x1) -> np.ndarray:
        x = -np.asarray(x1, dtype=float) if self.flipped else np.asarray(x1, dtype=float)
        u = np.where(x < 0, -x, self.kappa * x)
        return u / self.rho - self.zbar


def fit_vmap(x1, weights=None) -> VMap:
    """Fit ``kappa``, ``rho`` and the offset so the V-column is normalized.

    Without ``weights`` the column gets mean 0 and population variance 1; with
    degree weights ``d`` it gets ``sum d z = 0`` and ``sum d z^2 = 1``.
    """
    x = np.asarray(x1, dtype=float)
    k = kappa_raw(x, weights)
    flipped = k < 1.0
    if flipped:
        x = -x
        k = 1.0 / k
    u = np.where(x < 0, -x, k * x)
    if weights is None:
        mu = float(u.mean())
        rho = float(np.sqrt(np.mean((u - mu) ** 2)))
    else:
        w = np.asarray(weights, dtype=float)
        mu = float(np.sum(w * u) / np.sum(w))
        rho = float(np.sqrt(np.sum(w * (u - mu) ** 2)))
    if rho <= 0:
        raise DiagnosticsError("V-map has zero spread")
    return VMap(k, rho, mu / rho, bool(flipped))


@dataclass(frozen=True)
class CollapseEmbedding:
    """``Z`` together with the constants that define it."""

    Z: np.ndarray
    vmap: VMap
    sigma: float

    @property
    def kappa(self) -> float:
        return self.vmap.kappa

    @property
    def rho(self) -> float:
        return self.vmap.rho


def build_z(X_c) -> CollapseEmbedding:
    """Collapse embedding ``(x1 / sigma, V(x1))`` of a canonical 2-D latent."""
    X = np.asarray(X_c, dtype=float)
    x1 = X[:, 0]
    sigma = float(np.sqrt(np.mean(x1 ** 2)))
    vm = fit_vmap(x1)
    sign = -1.0 if vm.flipped else 1.0
    Z = np.column_stack([sign * x1 / sigma, vm.apply(x1)])
    return CollapseEmbedding(Z, vm, sigma)


@dataclass(frozen=True)
class HatEmbedding:
    """Degree-normalized faithful embedding ``Y_hat`` and its coordinates."""

    Y: np.ndarray
    X_hat: np.ndarray
    sigma_hat: float
    tau_hat: float
    Gamma: np.ndarray


def build_y_hat(latent, degrees) -> HatEmbedding:
    """Affine image of the latent with ``Y'DY = I`` and ``Y'D1 = 0``."""
    X = np.asarray(latent, dtype=float)
    d = np.asarray(degrees, dtype=float)
    Xt = X - (d @ X) / d.sum()
    S = Xt.T @ (d[:, None] * Xt)
    vals, vecs = np.linalg.eigh(0.5 * (S + S.T))
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    pivot = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.where(vecs[pivot, np.arange(vecs.shape[1])] < 0, -1.0, 1.0)
    if vals[-1] <= 1e-14 * max(vals[0], 1e-300):
        raise DiagnosticsError("degenerate degree-weighted covariance")
    Xh = Xt @ vecs
    sd = np.sqrt(vals)
    return HatEmbedding(Xh / sd, Xh, float(sd[0]), float(sd[1]), vecs)


def build_z_hat(hat: HatEmbedding, degrees) -> CollapseEmbedding:
    """Degree-normalized collapse embedding built on ``hat.X_hat``."""
    d = np.asarray(degrees, dtype=float)
    x1 = hat.X_hat[:, 0]
    vm = fit_vmap(x1, d)
    sign = -1.0 if vm.flipped else 1.0
    Z = np.column_stack([sign * x1 / hat.sigma_hat, vm.apply(x1)])
    return CollapseEmbedding(Z, vm, hat.sigma_hat)


# ----------------------------------------------------------- local quantities

@dataclass(frozen=True)
class ColumnErrors:
    per_point: np.ndarray   # (N, d): e_i^(j) = ||W_i X_i^(j)||^2
    mean: np.ndarray        # (d,)


def column_errors(weights: LocalWeightSet, X_c) -> ColumnErrors:
    """Per-neighborhood squared residual of each latent column."""
    X = np.asarray(X_c, dtype=float)
    e = np.column_stack([weights.local_costs(X[:, j]) for j in range(X.shape[1])])
    return ColumnErrors(e, e.mean(axis=0))


def n0_and_rmax(index: NeighborhoodIndex, X_c) -> tuple[np.ndarray, float]:
    """Neighborhoods straddling zero in the first latent coordinate.

    A neighborhood is in ``N0`` when its first coordinate takes strictly
    negative and strictly positive values.  ``r_max`` is the largest latent
    radius among them (0 when ``N0`` is empty).
    """
    X = np.asarray(X_c, dtype=float)
    x1 = X[:, 0]
    members = [index.neighborhood(i) for i in range(index.n_points)]
    straddle = np.array([x1[h].min() < 0 < x1[h].max() for h in members])
    n0 = np.flatnonzero(straddle)
    if n0.size == 0:
        return n0, 0.0
    r = _latent_radii(X, n0, [index.neighbors[i] for i in n0])
    return n0, float(r.max())


def local_bound_ratios(weights: LocalWeightSet, latent, d: int = 2) -> np.ndarray:
    """``||W_i X_i||_F^2 / (c_a r_i^2)`` per neighborhood; values ``>= 1`` break the bound.

    ``r_i`` is the latent neighborhood radius and ``c_a`` uses each
    neighborhood's own size.  The LEM/DFM constant presumes ``w_ij <= 1``;
    the LLE one presumes reconstruction in latent coordinates, which ambient
    noise can defeat.
    """
    X = np.asarray(latent, dtype=float)
    index = weights.index
    cost = weights.local_costs(X)
    r = neighborhood_radii(X, index.neighbors)
    c_a = np.array([frobenius_constants(weights.algorithm, int(k), d)[1] for k in index.sizes])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = cost / (c_a * r * r)
    ratio[(r == 0) & (cost == 0)] = 0.0
    return ratio


def _latent_radii(X, centers, neighbor_lists) -> np.ndarray:
    out = np.empty(len(centers))
    for t, (i, nb) in enumerate(zip(centers, neighbor_lists)):
        P = X[np.concatenate([[i], nb])]
        diff = P[:, None, :] - P[None, :, :]
        out[t] = math.sqrt(float(np.einsum("ijk,ijk->ij", diff, diff).max()))
    return out


# --------------------------------------------------------------- conditions

@dataclass(frozen=True)
class Theorem2Result:
    """Both sides of the general and the degree-family (tight) conditions."""

    lhs: float
    rhs: float
    tight_lhs: float
    holds: bool
    tight_holds: bool
    tight_applicable: bool

    @property
    def predicts_failure(self) -> bool:
        return self.holds or (self.tight_applicable and self.tight_holds)


def theorem2_check(kappa, rho, tau, e_bar_1, e_bar_2, n0_size, n, c_a, r_max,
                   degree_family: bool = False) -> Theorem2Result:
    """Sufficient condition for ``Phi(Y) > Phi(Z)``.

    General form ``(kappa/rho)^2 (e1 + |N0|/N c_a r_max^2) < e2 / tau^2``;
    for the degree family the ``N0`` correction can be dropped.
    """
    scale = kappa ** 2 / rho ** 2
    lhs = scale * (e_bar_1 + n0_size / n * c_a * r_max ** 2)
    tight = scale * e_bar_1
    rhs = e_bar_2 / tau ** 2
    return Theorem2Result(float(lhs), float(rhs), float(tight), bool(lhs < rhs),
                          bool(tight < rhs), bool(degree_family))


@dataclass(frozen=True)
class Corollary3Result:
    c: float
    lhs: float
    simple_lhs: float
    holds: bool
    simple_holds: bool
    simple_applicable: bool
    assumptions: dict

    @property
    def assumptions_met(self) -> bool:
        return all(self.assumptions.values())

    @property
    def predicts_failure(self) -> bool:
        return self.simple_holds if self.simple_applicable else self.holds


def corollary3_check(sigma, tau, kappa, rho, e_bar_1, e_bar_2, n0_size, n, c_a, r_max,
                     degree_family: bool = False) -> Corollary3Result:
    """Aspect-ratio form of the condition, with its assumptions reported separately."""
    c = sigma / tau
    if e_bar_2 > 0:
        corr = n0_size / n * c_a * r_max ** 2 / (math.sqrt(2.0) * e_bar_2)
    else:
        corr = 0.0 if n0_size == 0 or r_max == 0 else math.inf
    lhs = 4.0 * (1.0 + corr)
    assumptions = {
        "e1_lt_sqrt2_e2": bool(e_bar_1 < math.sqrt(2.0) * e_bar_2),
        "kappa_lt_2_pow_quarter": bool(kappa < 2.0 ** 0.25),
        "rho2_gt_sigma2_over_8": bool(rho ** 2 > sigma ** 2 / 8.0),
    }
    return Corollary3Result(float(c), float(lhs), 4.0, bool(lhs < c), bool(4.0 < c),
                            bool(degree_family), assumptions)


@dataclass(frozen=True)
class Lemma1Result:
    passed: bool
    skipped: bool
    trials: int
    violations: int
    worst_margin: float
    bound_constant: float
    membership_max: int
    counterexample: np.ndarray | None = None


def lemma1_perturbation_check(Y, weights: LocalWeightSet, eps: float, trials: int = 1000,
                              seed=None, M=None) -> Lemma1Result:
    """Sample unit-Frobenius perturbations and test the lower bound on the cost.

    Checks ``Phi(Y + eps E) > (1 - 4 eps) Phi(Y) - 4 eps C_a S`` where ``S`` is
    the largest neighborhood membership count.  Skipped (with a warning) for
    LLE weights with a negative entry.
    """
    from .embedding import assemble_quadratic

    if eps <= 0:
        raise ValueError("eps must be positive")
    S = weights.index.membership_max
    k = int(weights.index.sizes.max())
    d = int(weights.params.get("d", 2))
    C_a = frobenius_constants(weights.algorithm, k, d)[0]
    if weights.algorithm == "lle" and weights.has_negative_weights():
        warnings.warn("LLE weights contain negative entries; perturbation bound not applicable",
                      RuntimeWarning, stacklevel=2)
        return Lemma1Result(True, True, 0, 0, math.nan, C_a, S)
    Y = np.asarray(Y, dtype=float)
    Y = Y[:, None] if Y.ndim == 1 else Y
    M = assemble_quadratic(weights) if M is None else M
    MY = M @ Y
    phi = float(np.sum(Y * MY))
    bound = (1.0 - 4.0 * eps) * phi - 4.0 * eps * C_a * S
    rng = np.random.default_rng(seed)
    worst, bad, example = math.inf, 0, None
    for _ in range(trials):
        E = rng.standard_normal(Y.shape)
        E /= np.linalg.norm(E)
        val = phi + 2.0 * eps * float(np.sum(E * MY)) + eps ** 2 * float(np.sum(E * (M @ E)))
        margin = val - bound
        if margin < worst:
            worst = margin
        if not margin > 0:
            bad += 1
            example = E if example is None else example
    return Lemma1Result(bad == 0, False, trials, bad, float(worst), C_a, S, example)


@dataclass(frozen=True)
class HigherDimZ:
    """Collapse embedding in ``d >= 3`` dimensions.

    ``Z = [Y1, V(x1), (Y_j - s_j V)/sqrt(1 - s_j^2) ...]`` with
    ``s_j = V'Y_j / N``.  ``cov_residual`` is ``||Cov(Z) - I||_F``, which is
    nonzero only when two or more ``s_j`` are nonzero.
    """

    Z: np.ndarray
    s: np.ndarray
    sigma_max: float
    cov_residual: float
    phi_Y: float | None = None
    phi_Z: float | None = None
    bound_lhs: float | None = None
    bound_rhs: float | None = None

    @property
    def predicts_collapse(self) -> bool | None:
        if self.bound_lhs is None:
            return None
        return self.bound_lhs < self.bound_rhs


def higher_dim_z(X_c, weights: LocalWeightSet | None = None) -> HigherDimZ:
    """Build the ``d``-column collapse embedding and, given weights, the cost bound.

    The bound uses the triangle inequality column by column:
    ``Phi(Z2) + sum_j [(sqrt Phi(Y_j) + |s_j| sqrt Phi(Z2))^2 / (1 - s_j^2) - Phi(Y_j)]
    < Phi(Y2)`` implies ``Phi(Z) < Phi(Y)``.
    """
    X = np.asarray(X_c, dtype=float)
    n, d = X.shape
    if d < 3:
        raise DiagnosticsError("higher_dim_z needs a latent of dimension >= 3")
    Y = X / np.sqrt(np.mean(X ** 2, axis=0))
    v = fit_vmap(X[:, 0]).apply(X[:, 0])
    s = Y[:, 2:].T @ v / n
    if np.any(np.abs(s) >= 1.0 - 1e-12):
        raise DiagnosticsError("a latent column is (numerically) collinear with the V-map")
    rest = (Y[:, 2:] - np.outer(v, s)) / np.sqrt(1.0 - s ** 2)
    Z = np.column_stack([Y[:, 0], v, rest])
    cov = Z.T @ Z / n - np.outer(Z.mean(axis=0), Z.mean(axis=0))
    resid = float(np.linalg.norm(cov - np.eye(d)))
    out = dict(Z=Z, s=s, sigma_max=float(np.max(np.abs(s))), cov_residual=resid)
    if weights is not None:
        phiY = np.array([weights.cost(Y[:, j]) for j in range(d)])
        phiV = weights.cost(v)
        extra = (np.sqrt(phiY[2:]) + np.abs(s) * math.sqrt(phiV)) ** 2 / (1.0 - s ** 2) - phiY[2:]
        out.update(phi_Y=float(phiY.sum()), phi_Z=weights.cost(Z),
                   bound_lhs=float(phiV + extra.sum()), bound_rhs=float(phiY[1]))
    return HigherDimZ(**out)


def var_abs_ratio(sample) -> float:
    """``Var(|X|) / Var(X)`` for a sample centered at zero by assumption."""
    x = np.asarray(sample, dtype=float)
    return float(np.var(np.abs(x)) / np.var(x))


def var_abs_check(sample, tolerance: float = 0.0) -> bool:
    """Empirical check of ``Var(|X|) >= Var(X)/4`` for symmetric unimodal samples."""
    x = np.asarray(sample, dtype=float)
    return bool(np.var(np.abs(x)) >= np.var(x) / 4.0 - tolerance)


def collapse_score(Y_out, X_c) -> float:
    """Share of output variance explained by a V-shaped function of ``x1``.

    Each output column is regressed on ``[1, x1, |x1 - median(x1)|]``; the
    column R^2 values are combined weighted by column variance.  1 means the
    output depends on the first latent coordinate alone.
    """
    Y = np.asarray(Y_out, dtype=float)
    Y = Y[:, None] if Y.ndim == 1 else Y
    x1 = np.asarray(X_c, dtype=float)
    x1 = x1[:, 0] if x1.ndim == 2 else x1
    if Y.shape[0] != x1.shape[0]:
        raise ValueError("embedding and latent must have the same number of rows")
    B = np.column_stack([np.ones_like(x1), x1, np.abs(x1 - np.median(x1))])
    coef, *_ = np.linalg.lstsq(B, Y, rcond=None)
    resid = Y - B @ coef
    ss_tot = np.sum((Y - Y.mean(axis=0)) ** 2)
    if ss_tot == 0:
        return 1.0
    return float(np.clip(1.0 - np.sum(resid ** 2) / ss_tot, 0.0, 1.0))


# ------------------------------------------------------------------ report

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "DiagnosticsReport",
    "type": "object",
    "required": ["schema_version", "algorithm", "mode", "n_points", "k", "sigma", "tau",
                 "aspect_ratio", "rho", "rho_grid", "kappa", "reoriented", "e_bar_1",
                 "e_bar_2", "n0_size", "r_max", "c_a", "C_a", "phi_Y", "phi_Z", "theorem2",
                 "corollary3", "verdicts", "collapse_score", "verdict_line"],
    "properties": {
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "algorithm": {"enum": ["lem", "dfm", "lle", "ltsa", "hlle"]},
        "mode": {"enum": ["standard", "hat"]},
        "n_points": {"type": "integer", "minimum": 1},
        "k": {"type": ["integer", "null"]},
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "tau": {"type": "number", "exclusiveMinimum": 0},
        "aspect_ratio": {"type": "number"},
        "rho": {"type": "number", "exclusiveMinimum": 0},
        "rho_grid": {"type": "number", "exclusiveMinimum": 0},
        "kappa": {"type": "number", "minimum": 1},
        "reoriented": {"type": "boolean"},
        "e_bar_1": {"type": "number", "minimum": 0},
        "e_bar_2": {"type": "number", "minimum": 0},
        "n0_size": {"type": "integer", "minimum": 0},
        "r_max": {"type": "number", "minimum": 0},
        "c_a": {"type": "number"},
        "C_a": {"type": "number"},
        "phi_Y": {"type": "number"},
        "phi_Z": {"type": "number"},
        "theorem2": {
            "type": "object",
            "required": ["lhs", "rhs", "tight_lhs", "holds", "tight_holds", "tight_applicable"],
        },
        "corollary3": {
            "type": "object",
            "required": ["c", "lhs", "simple_lhs", "holds", "simple_holds",
                         "simple_applicable", "assumptions"],
        },
        "verdicts": {
            "type": "object",
            "required": ["theorem2", "corollary3", "phi_Y_gt_phi_Z"],
            "additionalProperties": {"type": "boolean"},
        },
        "collapse_score": {"type": ["number", "null"]},
        "verdict_line": {"type": "string"},
    },
}


@dataclass(frozen=True)
class DiagnosticsReport:
    """Every quantity entering the failure conditions, both sides included."""

    algorithm: str
    mode: str
    n_points: int
    k: int | None
    sigma: float
    tau: float
    rho: float
    rho_grid: float
    kappa: float
    reoriented: bool
    e_bar_1: float
    e_bar_2: float
    n0_size: int
    r_max: float
    c_a: float
    C_a: float
    phi_Y: float
    phi_Z: float
    theorem2: Theorem2Result
    corollary3: Corollary3Result
    collapse_score: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def aspect_ratio(self) -> float:
        return self.sigma / self.tau

    @property
    def verdicts(self) -> dict:
        return {"theorem2": self.theorem2.holds,
                "theorem2_tight": self.theorem2.tight_applicable and self.theorem2.tight_holds,
                "corollary3": self.corollary3.predicts_failure,
                "corollary3_assumptions_met": self.corollary3.assumptions_met,
                "phi_Y_gt_phi_Z": self.phi_Y > self.phi_Z}

    def verdict_line(self) -> str:
        cor = self.corollary3
        if cor.predicts_failure:
            form = "4 < c" if cor.simple_applicable else "4(1 + correction) < c"
            line = f"predicted failure (Corollary: {form}; c = {cor.c:.4g})"
            if not cor.assumptions_met:
                failed = [k for k, v in cor.assumptions.items() if not v]
                line += "; corollary assumptions not met: " + ", ".join(failed)
            return line
        t2 = self.theorem2
        if t2.predicts_failure:
            lhs = t2.lhs if t2.holds else t2.tight_lhs
            return f"predicted failure (Theorem: {lhs:.4g} < {t2.rhs:.4g}; c = {cor.c:.4g})"
        return f"no failure predicted (c = {cor.c:.4g})"

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "algorithm": self.algorithm, "mode": self.mode, "n_points": self.n_points,
            "k": self.k, "sigma": self.sigma, "tau": self.tau,
            "aspect_ratio": self.aspect_ratio, "rho": self.rho, "rho_grid": self.rho_grid,
            "kappa": self.kappa, "reoriented": self.reoriented, "e_bar_1": self.e_bar_1,
            "e_bar_2": self.e_bar_2, "n0_size": self.n0_size, "r_max": self.r_max,
            "c_a": self.c_a, "C_a": self.C_a, "phi_Y": self.phi_Y, "phi_Z": self.phi_Z,
            "theorem2": asdict(self.theorem2), "corollary3": asdict(self.corollary3),
            "verdicts": self.verdicts, "collapse_score": self.collapse_score,
            "verdict_line": self.verdict_line(), "extra": self.extra,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def diagnose(latent, weights: LocalWeightSet, embedding=None, hat: bool = False,
             d: int | None = None) -> DiagnosticsReport:
    """Full pipeline for a 2-D latent sample and a weight set built on its inputs.

    With ``hat=True`` (degree family only) the degree-normalized ``Y_hat`` and
    ``Z_hat`` replace ``Y`` and ``Z``.
    """
    latent = np.asarray(latent, dtype=float)
    if latent.ndim != 2 or latent.shape[1] != 2:
        raise DiagnosticsError("diagnose needs a two-dimensional latent sample")
    n = latent.shape[0]
    alg = weights.algorithm
    index = weights.index
    k = index.k
    d = int(weights.params.get("d", 2)) if d is None else d
    C_a, c_a = frobenius_constants(alg, int(index.sizes.max()), d)
    if hat:
        if weights.degrees is None:
            raise DiagnosticsError("hat mode needs degree weights (LEM or DFM)")
        yh = build_y_hat(latent, weights.degrees)
        X, Y = yh.X_hat, yh.Y
        zc = build_z_hat(yh, weights.degrees)
        sigma, tau = yh.sigma_hat, yh.tau_hat
    else:
        X, Sigma = canonicalize_latent(latent)
        Y = build_y(X, Sigma)
        zc = build_z(X)
        sigma, tau = (float(v) for v in np.sqrt(np.diag(Sigma)))
    errs = column_errors(weights, X)
    n0, r_max = n0_and_rmax(index, X)
    vm = zc.vmap
    family = alg in DEGREE_FAMILY
    t2 = theorem2_check(vm.kappa, vm.rho, tau, errs.mean[0], errs.mean[1], n0.size, n, c_a,
                        r_max, family)
    c3 = corollary3_check(sigma, tau, vm.kappa, vm.rho, errs.mean[0], errs.mean[1], n0.size,
                          n, c_a, r_max, family)
    score = None
    if embedding is not None:
        out = getattr(embedding, "Y", embedding)
        score = collapse_score(out, X)
    return DiagnosticsReport(alg, "hat" if hat else "standard", n, k, float(sigma), float(tau),
                             vm.rho, vm.rho_grid, vm.kappa, vm.flipped, float(errs.mean[0]),
                             float(errs.mean[1]), int(n0.size), float(r_max), float(c_a),
                             float(C_a), weights.cost(Y), weights.cost(zc.Z), t2, c3, score)


SWEEP_COLUMNS = ("dataset", "algorithm", "k", "n_points", "aspect_ratio", "kappa", "rho",
                 "e_bar_1", "e_bar_2", "n0_size", "r_max", "phi_Y", "phi_Z",
                 "theorem2_lhs", "theorem2_rhs", "theorem2", "corollary3_lhs", "corollary3",
                 "collapse_score")


def sweep_row(dataset: str, report: DiagnosticsReport) -> dict:
    return {"dataset": dataset, "algorithm": report.algorithm, "k": report.k,
            "n_points": report.n_points, "aspect_ratio": report.aspect_ratio,
            "kappa": report.kappa, "rho": report.rho, "e_bar_1": report.e_bar_1,
            "e_bar_2": report.e_bar_2, "n0_size": report.n0_size, "r_max": report.r_max,
            "phi_Y": report.phi_Y, "phi_Z": report.phi_Z,
            "theorem2_lhs": report.theorem2.lhs, "theorem2_rhs": report.theorem2.rhs,
            "theorem2": report.theorem2.holds, "corollary3_lhs": report.corollary3.lhs,
            "corollary3": report.corollary3.predicts_failure,
            "collapse_score": report.collapse_score}


def write_sweep_csv(rows, path) -> Path:
    """One row per (dataset, algorithm, K); ``rows`` holds dicts from :func:`sweep_row`."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else (format(v, ".17g") if isinstance(v, float)
                                                       else v)) for k, v in row.items()})
    return path

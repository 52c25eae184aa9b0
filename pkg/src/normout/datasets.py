"""Synthetic manifold samples and CSV interchange.

Every generator is a pure function of its parameters and ``seed``; the same
call always returns the same cloud.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

# Swissroll spiral parameter range and height. The inner turn starts at 2.5*pi
# (not the customary 1.5*pi) so chords of 1000-point neighborhoods stay within
# 1% of their arc length.
SWISSROLL_T_RANGE = (2.5 * math.pi, 4.5 * math.pi)
SWISSROLL_HEIGHT = 21.0
# Polar angle (measured from the north pole) of the removed fishbowl cap.
FISHBOWL_CAP_ANGLE = math.radians(30.0)


class CSVFormatError(ValueError):
    """Raised when a point-cloud CSV file cannot be parsed."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PointCloud:
    """N input points (rows) with an optional latent parameterization.

    Attributes
    ----------
    points : ndarray, shape (N, D)
        Input coordinates.
    latent : ndarray, shape (N, d) or None
        Original low-dimensional sample the points were generated from.
    meta : dict
        Generator name, seed and parameters.
    """

    points: np.ndarray
    latent: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"points must be a non-empty N x D matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain non-finite entries")
        object.__setattr__(self, "points", _frozen(pts))
        if self.latent is not None:
            lat = np.asarray(self.latent, dtype=float)
            if lat.ndim == 1:
                lat = lat[:, None]
            if lat.shape[0] != pts.shape[0]:
                raise ValueError("latent must have one row per point")
            if lat.shape[1] > pts.shape[1]:
                raise ValueError("latent dimension exceeds ambient dimension")
            if not np.all(np.isfinite(lat)):
                raise ValueError("latent contains non-finite entries")
            object.__setattr__(self, "latent", _frozen(lat))
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def scaled(self, factor: float) -> "PointCloud":
        """Copy with the ambient coordinates multiplied by ``factor``."""
        return PointCloud(self.points * factor, self.latent, {**self.meta, "scale": factor})


def _check_n(n: int) -> None:
    if int(n) != n or n < 4:
        raise ValueError(f"n must be an integer >= 4, got {n}")


def gen_grid(m: int, q: int) -> PointCloud:
    """Integer lattice [-m..m] x [-q..q], first coordinate varying slowest."""
    if int(m) != m or int(q) != q or q < 1:
        raise ValueError("m and q must be positive integers")
    if m < q:
        raise ValueError(f"grid requires m >= q (got m={m}, q={q})")
    i, j = np.meshgrid(np.arange(-m, m + 1), np.arange(-q, q + 1), indexing="ij")
    pts = np.column_stack([i.ravel(), j.ravel()]).astype(float)
    return PointCloud(pts, pts, {"name": "grid", "m": int(m), "q": int(q)})


def gen_uniform_strip(length: float, width: float, n: int, seed=None) -> PointCloud:
    """``n`` i.i.d. uniform points on [0, length] x [0, width]."""
    if length <= 0 or width <= 0:
        raise ValueError("strip sides must be positive")
    _check_n(n)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(size=(n, 2)) * np.array([length, width])
    meta = {"name": "strip", "length": length, "width": width, "n": n, "seed": seed}
    return PointCloud(pts, pts, meta)


def gen_noisy_strip(length: float, width: float, n: int, noise_variance: float,
                    seed=None) -> PointCloud:
    """Uniform strip lifted to R^3 with Gaussian noise on the third axis."""
    if noise_variance < 0:
        raise ValueError("noise_variance must be non-negative")
    if length <= 0 or width <= 0:
        raise ValueError("strip sides must be positive")
    _check_n(n)
    rng = np.random.default_rng(seed)
    # same draw order as gen_uniform_strip, so the planar part matches it
    planar = rng.uniform(size=(n, 2)) * np.array([length, width])
    eps = rng.normal(0.0, math.sqrt(noise_variance), size=n)
    base = PointCloud(planar, planar, {"name": "strip", "length": length, "width": width,
                                       "n": n, "seed": seed})
    pts = np.column_stack([base.points, eps])
    meta = {**base.meta, "name": "noisy_strip", "noise_variance": noise_variance}
    return PointCloud(pts, base.latent, meta)


def _spiral_arclength(t):
    """Arc length of (t cos t, t sin t) measured from t = 0."""
    return 0.5 * (t * np.sqrt(1.0 + t * t) + np.arcsinh(t))


def _spiral_parameter(s):
    """Invert :func:`_spiral_arclength` by Newton iteration."""
    s = np.asarray(s, dtype=float)
    t = np.sqrt(2.0 * s)
    for _ in range(100):
        step = (_spiral_arclength(t) - s) / np.sqrt(1.0 + t * t)
        t = t - step
        if np.max(np.abs(step), initial=0.0) < 1e-14 * max(1.0, float(np.max(t, initial=1.0))):
            break
    return t


def gen_swissroll(n: int, stretch_factor: float = 1.0, seed=None,
                  t_range: tuple[float, float] = SWISSROLL_T_RANGE,
                  height: float = SWISSROLL_HEIGHT) -> PointCloud:
    """Swissroll rolled isometrically from an (arc length x height) rectangle.

    The latent rectangle is sampled uniformly, its first side is multiplied by
    ``stretch_factor`` and the result is wound onto the unit-speed spiral
    ``(t cos t, h, t sin t)``.  ``latent`` holds the stretched rectangle
    coordinates, so ambient geodesics equal latent Euclidean distances.
    """
    _check_n(n)
    if stretch_factor <= 0:
        raise ValueError("stretch_factor must be positive")
    rng = np.random.default_rng(seed)
    s0, s1 = _spiral_arclength(np.asarray(t_range, dtype=float))
    u = rng.uniform(size=(n, 2))
    s = stretch_factor * (s0 + (s1 - s0) * u[:, 0])
    h = height * u[:, 1]
    t = _spiral_parameter(s)
    pts = np.column_stack([t * np.cos(t), h, t * np.sin(t)])
    meta = {"name": "swissroll", "n": n, "stretch_factor": stretch_factor, "seed": seed,
            "t_range": list(t_range), "height": height}
    return PointCloud(pts, np.column_stack([s, h]), meta)


def gen_fishbowl(n: int, stretch_factor: float = 1.0, seed=None,
                 cap_angle: float = FISHBOWL_CAP_ANGLE) -> PointCloud:
    """Uniform sample of the unit sphere minus a polar cap around the north pole.

    The first ambient coordinate is multiplied by ``stretch_factor``.  The
    latent coordinates are the azimuthal-equidistant disc about the south
    pole, ``(pi - polar) * (cos azimuth, sin azimuth)``.
    """
    _check_n(n)
    if stretch_factor <= 0:
        raise ValueError("stretch_factor must be positive")
    rng = np.random.default_rng(seed)
    # uniform area: cos(polar) uniform on [-1, cos(cap_angle)]
    cos_polar = rng.uniform(-1.0, math.cos(cap_angle), size=n)
    azimuth = rng.uniform(0.0, 2.0 * math.pi, size=n)
    polar = np.arccos(cos_polar)
    sin_polar = np.sin(polar)
    pts = np.column_stack([stretch_factor * sin_polar * np.cos(azimuth),
                           sin_polar * np.sin(azimuth), cos_polar])
    radius = math.pi - polar
    latent = np.column_stack([radius * np.cos(azimuth), radius * np.sin(azimuth)])
    meta = {"name": "fishbowl", "n": n, "stretch_factor": stretch_factor, "seed": seed,
            "cap_angle_deg": math.degrees(cap_angle)}
    return PointCloud(pts, latent, meta)


def _meta_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def save_csv(cloud: PointCloud | np.ndarray, path, meta: dict | None = None) -> Path:
    """Write points one per row with 17 significant digits.

    ``meta`` (or ``cloud.meta``) is written as ``# key=value`` comment lines.
    """
    path = Path(path)
    if isinstance(cloud, PointCloud):
        values, meta = cloud.points, cloud.meta if meta is None else meta
    else:
        values = np.atleast_2d(np.asarray(cloud, dtype=float))
    with path.open("w", newline="") as fh:
        for key, val in (meta or {}).items():
            fh.write(f"# {key}={json.dumps(val)}\n")
        for row in values:
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")
    return path


def load_csv(path) -> PointCloud:
    """Read a point cloud written by :func:`save_csv` (or any numeric CSV)."""
    path = Path(path)
    rows: list[list[float]] = []
    meta: dict[str, Any] = {}
    width = None
    with path.open(newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                body = stripped[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    meta[key.strip()] = _meta_value(val.strip())
                continue
            fields = next(csv.reader([stripped]))
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise CSVFormatError(
                    f"{path}: line {lineno} has {len(fields)} fields, expected {width}")
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise CSVFormatError(f"{path}: line {lineno}: non-numeric field ({exc})") from None
    if not rows:
        raise CSVFormatError(f"{path}: no data rows")
    return PointCloud(np.array(rows), None, meta)

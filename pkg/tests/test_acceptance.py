"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are collected and repeated under "acceptance criteria" in the
pytest terminal summary.
"""

import functools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import affine_residual, feasible_candidate
from normout.datasets import (PointCloud, gen_fishbowl, gen_grid, gen_noisy_strip,
                              gen_swissroll, gen_uniform_strip)
from normout.diagnostics import (build_y, canonicalize_latent, collapse_score, diagnose,
                                 lemma1_perturbation_check, local_bound_ratios,
                                 var_abs_ratio)
from normout.embedding import embed
from normout.grid import _lattice_moments, grid_theorem1_check, rho2, sigma2, tau2
from normout.neighbors import NeighborhoodIndex, build_knn
from normout.spectrum import strip_spectrum_compare
from normout.weights import ALGORITHMS, DEGREE_FAMILY, WeightError, build_weights, lle_weights


# --------------------------------------------------------------- shared suite

@functools.lru_cache(maxsize=1)
def suite():
    """Randomized (name, cloud, K) combinations; five algorithms run on each."""
    rng = np.random.default_rng(2024)
    out = []
    for trial in range(16):
        kind = ("grid", "strip", "noisy-strip", "swissroll", "fishbowl")[trial % 5]
        seed = int(rng.integers(1_000_000))
        if kind == "grid":
            q = int(rng.integers(3, 10))
            m = int(rng.integers(q, 5 * q))
            cloud, name = gen_grid(m, q), f"grid({m},{q})"
        elif kind == "strip":
            L = float(rng.uniform(1, 8))
            cloud, name = gen_uniform_strip(L, 1, int(rng.integers(400, 900)), seed), f"strip{L:.2f}"
        elif kind == "noisy-strip":
            L = float(rng.uniform(2, 8))
            cloud = gen_noisy_strip(1, L, int(rng.integers(400, 900)), 1e-4, seed)
            name = f"noisy-strip{L:.2f}"
        elif kind == "swissroll":
            s = float(rng.choice([1.0, 3.0]))
            cloud, name = gen_swissroll(int(rng.integers(600, 1000)), s, seed), f"swissroll{s:g}"
        else:
            s = float(rng.choice([1.0, 4.0]))
            cloud, name = gen_fishbowl(int(rng.integers(800, 1200)), s, seed), f"fishbowl{s:g}"
        out.append((name, cloud, int(rng.choice([6, 8, 10]))))
    return tuple(out)


# ------------------------------------------------------------------ criteria

def test_criterion_01_grid_closed_forms(criterion):
    t = time.perf_counter()
    bad = []
    moments = {}
    for m in range(1, 101):
        s2, t2, g2 = _lattice_moments(m, m)  # direct summation over -m..m
        moments[m] = s2
        if s2 != Fraction(m * (m + 1), 3) or s2 != sigma2(m) or g2 != rho2(m):
            bad.append(("moments", m))
    for m in range(1, 101):
        for q in range(1, m + 1):
            if moments[q] != tau2(q) or not rho2(m) > sigma2(m):
                bad.append((m, q))
    dt = time.perf_counter() - t
    ok = not bad and dt < 1.0
    criterion(1, "grid closed forms, 1 <= q <= m <= 100", ok,
              f"{len(bad)} mismatches, {dt:.3f} s (limit 1 s)")
    assert ok


def test_criterion_02_f_constants(criterion):
    t = time.perf_counter()
    expected = {4: 2, 8: 6, 12: 14}
    results = {k: grid_theorem1_check(40, 20, k=k) for k in expected}
    dt = time.perf_counter() - t
    ok = all(r.F == expected[k] and r.brute_force_agrees for k, r in results.items()) and dt < 1.0
    detail = ", ".join(f"K={k}: F={r.F}, exact={r.brute_force_agrees}" for k, r in results.items())
    criterion(2, "F(K) and inner-point costs on grid(40,20)", ok, f"{detail}; {dt:.3f} s (limit 1 s)")
    assert ok


def test_criterion_03_phase_boundary(criterion):
    t = time.perf_counter()
    wrong = []
    for m in range(1, 101):
        for q in range(1, m + 1):
            if m > 2 * q or m == q:
                v = grid_theorem1_check(m, q, k=8, brute_force=False).verdict
                if v != (m > 2 * q):
                    wrong.append((m, q))
    dt = time.perf_counter() - t
    ok = not wrong and dt < 5.0
    criterion(3, "phase boundary, K=8, m,q <= 100", ok,
              f"{len(wrong)} wrong verdicts, {dt:.2f} s (limit 5 s)")
    assert ok


def test_criterion_04_empirical_collapse(criterion):
    lines, ok = [], True
    for m, q in ((20, 10), (20, 9)):
        g = gen_grid(m, q)
        Xc, _ = canonicalize_latent(g.latent)
        for alg, opts in (("lem", {"kernel": "window"}), ("dfm", {"kernel": "gaussian", "eps": 4.0})):
            t = time.perf_counter()
            res = embed(g, alg, k=8, method="dense", **opts)
            dt = time.perf_counter() - t
            score = collapse_score(res.Y, Xc)
            aspect = (2 * m + 1) / (2 * q + 1)
            good = (score > 0.9) if aspect > 2 else (score < 0.5)
            good = good and not res.degenerate and dt < 60.0
            ok &= good
            lines.append(f"{2 * m + 1}x{2 * q + 1} {alg} score={score:.3f} "
                         f"degenerate={res.degenerate} {dt:.1f}s")
    criterion(4, "grid collapse for aspect > 2 only", ok, "; ".join(lines))
    assert ok


def test_criterion_05_flat_exactness(criterion):
    rng = np.random.default_rng(5)
    cloud = PointCloud(rng.uniform(0.0, 1.0, size=(500, 2)) * [3.0, 1.0])
    Xc, S = canonicalize_latent(cloud.points)
    Y = build_y(Xc, S)
    index = build_knn(cloud, 8)
    t = time.perf_counter()
    lines, ok = [], True
    for alg, opts in (("ltsa", {}), ("hlle", {}), ("lle", {"reg": "none"})):
        phi = build_weights(cloud, index, alg, **opts).cost(Y)
        res = embed(cloud, alg, index=index, k=8, **opts)
        resid = affine_residual(res.Y, cloud.points)
        good = phi < 1e-8 * cloud.n_points and resid < 1e-6
        ok &= good
        lines.append(f"{alg} phi(Y)={phi:.1e} affine_resid={resid:.1e}")
    dt = time.perf_counter() - t
    ok &= dt < 30.0
    criterion(5, "flat input, N=500, K=8", ok, "; ".join(lines) + f"; {dt:.1f} s")
    assert ok


def test_criterion_06_theorem2_implication(criterion):
    t = time.perf_counter()
    counted = undefined = true_verdicts = 0
    violations = []
    for name, cloud, k in suite():
        index = build_knn(cloud, k)
        for alg in ALGORITHMS:
            try:
                weights = build_weights(cloud, index, alg)
            except WeightError:
                undefined += 1
                continue
            rep = diagnose(cloud.latent, weights)
            counted += 1
            if rep.theorem2.predicts_failure:
                true_verdicts += 1
                if not rep.phi_Y > rep.phi_Z:
                    violations.append((name, alg, k))
    dt = time.perf_counter() - t
    ok = counted >= 50 and not violations and dt < 600.0
    criterion(6, "true verdicts imply phi(Y) > phi(Z)", ok,
              f"{counted} combinations ({undefined} with undefined weights skipped), "
              f"{true_verdicts} true verdicts, {len(violations)} violations, {dt:.1f} s")
    assert ok


def _curved_patches(rng, count, k):
    """``count`` noise-free curved neighborhoods of K+1 points at unit spacing in R^3."""
    uv = rng.uniform(-1, 1, (count, k + 1, 2)) * rng.uniform(0.5, 1.5, (count, 1, 1))
    c = rng.uniform(0, 1, (count, 1, 3))
    h = c[..., 0] * uv[..., 0] ** 2 + c[..., 1] * uv[..., 1] ** 2 + c[..., 2] * uv[..., 0] * uv[..., 1]
    P = np.concatenate([uv, h[..., None]], axis=-1)
    rot, _ = np.linalg.qr(rng.standard_normal((count, 3, 3)))
    P = np.einsum("nkj,nij->nki", P, rot)
    lists = []
    for b in range(count):
        block = range(b * (k + 1), (b + 1) * (k + 1))
        lists.extend([j for j in block if j != i] for i in block)
    points = P.reshape(-1, 3)
    return points, uv.reshape(-1, 2), NeighborhoodIndex.from_lists(points, lists)


def test_criterion_07_lemma3_bound(criterion):
    rng = np.random.default_rng(7)
    t = time.perf_counter()
    batches = [(k, n, *_curved_patches(rng, n, k)) for k, n in ((6, 3334), (8, 3333), (12, 3333))]
    lines, ok = [], True
    for alg in ALGORITHMS:
        violations = total = 0
        worst = 0.0
        for k, n, points, latent, index in batches:
            centers = np.arange(n) * (k + 1)
            ratio = local_bound_ratios(build_weights(points, index, alg), latent)[centers]
            violations += int(np.sum(ratio >= 1.0))
            worst = max(worst, float(ratio.max()))
            total += n
        ok &= violations == 0 and total >= 10_000
        lines.append(f"{alg} {violations}/{total} (max ratio to c_a {worst:.3f})")
    dt = time.perf_counter() - t
    ok &= dt < 60.0
    criterion(7, "||W_i X_i||^2 < c_a r_i^2 on curved neighborhoods", ok,
              "; ".join(lines) + f"; {dt:.1f} s")
    assert ok


def test_criterion_08_lemma1_bound(criterion):
    g = gen_grid(10, 5)
    index = build_knn(g, 4)
    Xc, S = canonicalize_latent(g.latent)
    Y = build_y(Xc, S)
    t = time.perf_counter()
    lines, ok = [], True
    for alg in ALGORITHMS:
        try:
            if alg == "lle":
                weights = lle_weights(g, index, positive=True)
            else:
                weights = build_weights(g, index, alg)
        except WeightError as exc:
            ok = False
            lines.append(f"{alg} not computable ({exc})")
            continue
        violations = 0
        for eps in (0.001, 0.01, 0.1):
            res = lemma1_perturbation_check(Y, weights, eps, trials=1000, seed=int(eps * 1e4))
            violations += res.violations + (1 if res.skipped else 0)
        ok &= violations == 0
        lines.append(f"{alg} {violations} violations")
    dt = time.perf_counter() - t
    ok &= dt < 60.0
    criterion(8, "perturbation bound on grid(10,5), K=4", ok, "; ".join(lines) + f"; {dt:.1f} s")
    assert ok


def test_criterion_09_strip_spectrum(criterion):
    t = time.perf_counter()
    lines, ok = [], True
    for L in (1.5, 2.5, 3.0, 5.0):
        rep = strip_spectrum_compare(L, nx=61, ny=21)
        good = rep.first_two_x1_only == (L > 2) and bool(np.all(rep.similarities > 0.95))
        ok &= good
        lines.append(f"L={L:g} x1-only={rep.first_two_x1_only} "
                     f"min cos={rep.similarities.min():.4f}")
    dt = time.perf_counter() - t
    ok &= dt < 60.0
    criterion(9, "strip spectrum, 61x21 lattice", ok, "; ".join(lines) + f"; {dt:.1f} s")
    assert ok


def test_criterion_10_var_abs(criterion):
    rng = np.random.default_rng(10)
    t = time.perf_counter()
    u = var_abs_ratio(rng.uniform(-1.0, 1.0, 100_000))
    z = var_abs_ratio(rng.standard_normal(100_000))
    dt = time.perf_counter() - t
    ok = 0.24 <= u <= 0.26 and 0.35 <= z <= 0.38 and dt < 5.0
    criterion(10, "Var|X| / Var X, n=1e5", ok,
              f"uniform {u:.4f} in [0.24, 0.26]; gaussian {z:.4f} in [0.35, 0.38] "
              f"(1 - 2/pi = {1 - 2 / math.pi:.4f}); {dt:.2f} s")
    assert ok


@pytest.mark.slow
def test_criterion_11_solver_minimality(criterion):
    rng = np.random.default_rng(11)
    t = time.perf_counter()
    runs = undefined = violations = 0
    worst = math.inf
    for name, cloud, k in suite():
        index = build_knn(cloud, k)
        for alg in ALGORITHMS:
            try:
                weights = build_weights(cloud, index, alg)
            except WeightError:
                undefined += 1
                continue
            res = embed(cloud, alg, index=index, k=k)
            phi = weights.cost(res.Y)
            degrees = res.degrees if alg in DEGREE_FAMILY else None
            for _ in range(1000):
                cand = weights.cost(feasible_candidate(rng, cloud.n_points, 2, degrees))
                worst = min(worst, cand - phi)
                violations += int(phi > cand + 1e-8)
            runs += 1
    dt = time.perf_counter() - t
    ok = violations == 0 and dt < 300.0
    criterion(11, "solver output beats 1000 feasible candidates", ok,
              f"{runs} embeddings ({undefined} with undefined weights skipped), "
              f"{violations} violations, min margin {worst:.3g}, {dt:.1f} s")
    assert ok

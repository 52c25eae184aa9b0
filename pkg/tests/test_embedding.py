import json
import math

import numpy as np
import pytest
from scipy import sparse

from conftest import affine_residual, feasible_candidate
from normout.datasets import gen_grid, gen_noisy_strip, gen_swissroll, gen_uniform_strip, load_csv
from normout.diagnostics import build_y, canonicalize_latent
from normout.embedding import (EmbeddingResult, SolverError, assemble_quadratic, embed,
                               dfm_output_transform, markov_eigenvalues, pair_weight_matrix,
                               solve_cov_constrained, solve_degree_constrained)
from normout.neighbors import DisconnectedGraphError, build_knn, build_rball
from normout.weights import ALGORITHMS, build_weights, lem_weights


@pytest.fixture(scope="module")
def strip():
    c = gen_uniform_strip(3, 1, 250, seed=21)
    return c, build_knn(c, 8)


@pytest.mark.parametrize("alg", ALGORITHMS)
def test_quadratic_form_matches_direct_sum(strip, alg, rng):
    c, idx = strip
    w = build_weights(c, idx, alg)
    M = assemble_quadratic(w)
    assert abs(M - M.T).max() < 1e-14
    Y = rng.normal(size=(c.n_points, 3))
    assert np.trace(Y.T @ (M @ Y)) == pytest.approx(w.cost(Y), rel=1e-10)
    assert w.cost(np.ones((c.n_points, 2)) * [2.0, -3.0]) < 1e-20
    assert np.linalg.eigvalsh(M.toarray()).min() > -1e-10
    rows, cols = M.nonzero()
    pairs = set()
    for i in range(c.n_points):
        h = idx.neighborhood(i)
        pairs.update((a, b) for a in h for b in h)
    assert set(zip(rows.tolist(), cols.tolist())) <= pairs


def test_lem_quadratic_is_twice_laplacian_for_symmetric_graph():
    g = gen_grid(6, 4)
    idx = build_rball(g, 1.5)
    w = lem_weights(g, idx)
    M = assemble_quadratic(w).toarray()
    What = pair_weight_matrix(w).toarray()
    np.testing.assert_array_equal(What, What.T)
    np.testing.assert_allclose(M, 2 * (np.diag(w.degrees) - What), atol=1e-12)


def test_path_graph_spectrum():
    n = 10
    x = np.arange(n, dtype=float)[:, None]
    w = lem_weights(x, build_rball(x, 1.0))
    res = solve_degree_constrained(assemble_quadratic(w), w.degrees, 1)
    # generalized eigenpair of (2L, D) on a path: 2(1 - cos(pi/(n-1))), cos(pi j/(n-1))
    assert res.eigenvalues[0] == pytest.approx(0.0, abs=1e-12)
    assert res.eigenvalues[1] == pytest.approx(2 * (1 - math.cos(math.pi / (n - 1))), rel=1e-10)
    v = np.cos(math.pi * np.arange(n) / (n - 1))
    y = res.Y[:, 0]
    cosine = abs(y @ v) / (np.linalg.norm(y) * np.linalg.norm(v))
    assert cosine == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(y / np.linalg.norm(y), np.sign(y @ v) * v / np.linalg.norm(v),
                               atol=1e-6)


def test_degree_solver_minimality_and_constraints(strip, rng):
    c, idx = strip
    w = build_weights(c, idx, "dfm")
    M = assemble_quadratic(w)
    res = solve_degree_constrained(M, w.degrees, 2)
    r = EmbeddingResult(res.Y, res.cost, res.eigenvalues, res.next_eigenvalue, "degree",
                        res.degenerate, res.lambda_max, "dfm", w.degrees)
    resid = r.constraint_residuals()
    assert resid["gram"] < 1e-8 and resid["mean"] < 1e-8
    assert res.cost == pytest.approx(w.cost(res.Y), rel=1e-8)
    assert res.eigenvalues[0] == pytest.approx(0.0, abs=1e-10)
    for _ in range(100):
        Z = feasible_candidate(rng, c.n_points, 2, w.degrees)
        assert res.cost <= w.cost(Z) + 1e-8


def test_cov_solver_flat_ltsa():
    c = gen_uniform_strip(1, 6, 400, seed=3)
    res = embed(c, "ltsa", k=8)
    assert res.cost < 1e-8 * c.n_points
    resid = res.constraint_residuals()
    assert resid["gram"] < 1e-8 and resid["mean"] < 1e-8
    np.testing.assert_allclose(res.output, res.Y / math.sqrt(c.n_points))


def test_cov_solver_beats_true_latent_on_swissroll():
    c = gen_swissroll(600, 1.0, seed=2)
    idx = build_knn(c, 8)
    for alg in ("lle", "ltsa", "hlle"):
        w = build_weights(c, idx, alg)
        res = solve_cov_constrained(assemble_quadratic(w), 2)
        Xc, S = canonicalize_latent(c.latent)
        assert res.cost <= w.cost(build_y(Xc, S)) + 1e-8


def test_ltsa_strip_output_is_affine_image_of_latent():
    c = gen_uniform_strip(1, 6, 600, seed=8)
    res = embed(c, "ltsa", k=8)
    assert affine_residual(res.Y, c.latent) < 1e-4


def test_dfm_transform():
    Y = np.random.default_rng(0).normal(size=(50, 2))
    lam = np.array([0.9, 0.5])
    T = dfm_output_transform(Y, lam)
    np.testing.assert_allclose(np.linalg.norm(T, axis=0), lam)
    assert np.linalg.matrix_rank(np.column_stack([T, Y])) == 2
    with pytest.raises(ValueError):
        dfm_output_transform(np.zeros((5, 2)), lam)


def test_dfm_embed_reports_diffusion_coordinates():
    g = gen_grid(8, 3)
    res = embed(g, "dfm", k=8)
    w = build_weights(g, build_knn(g, 8), "dfm")
    mu = markov_eigenvalues(res.Y, w)
    assert np.all(mu < 1) and np.all(mu > 0)
    np.testing.assert_allclose(np.linalg.norm(res.dfm_embedding, axis=0), mu)
    rball = build_rball(g, 1.5)
    ws = build_weights(g, rball, "dfm")
    rs = embed(g, "dfm", index=rball)
    # symmetric weights: Markov eigenvalue = 1 - lambda/2
    np.testing.assert_allclose(markov_eigenvalues(rs.Y, ws), 1 - rs.eigenvalues[1:] / 2,
                               rtol=1e-10)


def test_scaling_preserves_flat_zero_cost():
    c = gen_uniform_strip(1, 2, 300, seed=4)
    for s in (1e-3, 1.0, 1e3):
        for alg in ("ltsa", "hlle"):
            res = embed(c.scaled(s), alg, k=8)
            assert res.cost < 1e-8 * c.n_points


def test_permutation_equivariance(rng):
    c = gen_noisy_strip(2, 1, 300, 1e-3, seed=5)
    perm = rng.permutation(c.n_points)
    for alg in ALGORITHMS:
        a = embed(c.points, alg, k=10)
        b = embed(c.points[perm], alg, k=10)
        gap = min(a.eigenvalues[2] - a.eigenvalues[1], a.next_eigenvalue - a.eigenvalues[2])
        if gap > 1e-6 * a.lambda_max:
            np.testing.assert_allclose(b.Y, a.Y[perm], atol=1e-7)
        else:
            assert _subspace_cosines(a.Y[perm], b.Y, a.degrees if a.degrees is None
                                     else a.degrees[perm]).min() > 1 - 1e-8


def _subspace_cosines(A, B, degrees=None):
    wgt = np.ones(A.shape[0]) / A.shape[0] if degrees is None else degrees
    return np.linalg.svd(A.T @ (wgt[:, None] * B), compute_uv=False)


def test_sparse_path_matches_dense():
    c = gen_uniform_strip(3, 1, 400, seed=6)
    for alg in ("lem", "ltsa"):
        a = embed(c, alg, k=8, method="dense")
        b = embed(c, alg, k=8, method="sparse")
        np.testing.assert_allclose(b.eigenvalues, a.eigenvalues, rtol=1e-6, atol=1e-10)
        np.testing.assert_allclose(_subspace_cosines(a.Y, b.Y, a.degrees), 1.0, atol=1e-6)


def test_degeneracy_flag_on_square_grid():
    g = gen_grid(6, 6)
    res = embed(g, "lem", index=build_rball(g, 1.0), d=1)
    assert res.degenerate
    h = gen_grid(8, 4)
    assert not embed(h, "lem", index=build_rball(h, 1.0), d=1).degenerate


def test_disconnected_graph_raises():
    x = np.vstack([np.arange(5.0), np.arange(5.0) + 50])[..., None].reshape(-1, 1)
    with pytest.raises(DisconnectedGraphError):
        embed(x, "lem", k=2)


def test_bad_dimension():
    with pytest.raises(ValueError):
        solve_cov_constrained(sparse.eye(5), 4)


def test_solver_error_on_nan():
    M = sparse.csr_matrix(np.full((6, 6), np.nan))
    with pytest.raises(SolverError):
        solve_cov_constrained(M, 2)


def test_serialization(tmp_path):
    g = gen_grid(5, 2)
    res = embed(g, "dfm", k=8)
    d = json.loads(res.to_json())
    assert d["constraint_family"] == "degree" and len(d["Y"]) == g.n_points
    assert d["constraint_residuals"]["gram"] < 1e-8
    assert "dfm_embedding" in d
    from normout.datasets import save_csv
    back = load_csv(save_csv(res.Y, tmp_path / "y.csv")).points
    np.testing.assert_array_equal(back, res.Y)

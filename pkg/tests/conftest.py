import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def curved_patch(rng, k, dim=3, scale=1.0, curvature=0.3, noise=0.0):
    """K+1 points on a random quadratic surface patch in R^dim (row 0 is the center)."""
    uv = rng.uniform(-1, 1, size=(k + 1, 2)) * scale
    uv[0] = 0.0
    h = curvature * (uv[:, 0] ** 2 - 0.5 * uv[:, 1] ** 2 + uv[:, 0] * uv[:, 1])
    pts = np.zeros((k + 1, dim))
    pts[:, :2] = uv
    pts[:, 2] = h
    if noise:
        pts += noise * rng.standard_normal(pts.shape)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return pts @ q.T + rng.normal(size=dim)


def feasible_candidate(rng, n, d, degrees=None):
    """Random N x d matrix meeting the covariance or the degree constraints."""
    G = rng.standard_normal((n, d))
    if degrees is None:
        G -= G.mean(axis=0)
        q, _ = np.linalg.qr(G)
        return np.sqrt(n) * q
    dg = np.asarray(degrees, dtype=float)
    G -= (dg @ G) / dg.sum()
    S = G.T @ (dg[:, None] * G)
    vals, vecs = np.linalg.eigh(S)
    return G @ vecs @ np.diag(vals ** -0.5) @ vecs.T


def affine_residual(Y, X):
    """Relative residual of the best affine fit Y ~ [1, X] A."""
    B = np.column_stack([np.ones(X.shape[0]), X])
    coef, *_ = np.linalg.lstsq(B, Y, rcond=None)
    return float(np.linalg.norm(Y - B @ coef) / np.linalg.norm(Y - Y.mean(axis=0)))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line; the lines are repeated in the terminal summary."""

    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)

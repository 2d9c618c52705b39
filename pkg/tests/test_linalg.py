import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from foursplit.errors import DimensionError
from foursplit.linalg import ProductPoint, matvec, matvec_adjoint, operator_norm, power_iteration


def jacobi_top_singular_value(M, sweeps=100):
    """Cyclic Jacobi eigenvalue iteration on M^T M."""
    S = M.T @ M
    n = S.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(np.sum(S**2) - np.sum(np.diag(S) ** 2))
        if off < 1e-15 * np.linalg.norm(S):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if S[p, q] == 0.0:
                    continue
                tau = (S[q, q] - S[p, p]) / (2 * S[p, q])
                t = np.sign(tau) / (abs(tau) + np.sqrt(1 + tau**2)) if tau != 0 else 1.0
                c = 1 / np.sqrt(1 + t**2)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                S = J.T @ S @ J
    return float(np.sqrt(np.max(np.diag(S))))


def test_matvec_examples():
    np.testing.assert_array_equal(matvec(np.eye(3), np.array([1.0, 2, 3])), [1, 2, 3])
    np.testing.assert_array_equal(matvec(np.zeros((2, 3)), np.array([4.0, -1, 7])), [0, 0])
    M = np.array([[1.0, 2], [3, 4]])
    np.testing.assert_array_equal(matvec(M, np.ones(2)), [3, 7])
    with pytest.raises(DimensionError):
        matvec(M, np.ones(3))


def test_matvec_adjoint_examples(rng):
    np.testing.assert_array_equal(matvec_adjoint(np.eye(3), np.array([1.0, 2, 3])), [1, 2, 3])
    M = np.array([[1.0, 2], [3, 4]])
    np.testing.assert_array_equal(matvec_adjoint(M, np.array([1.0, 0])), [1, 2])
    with pytest.raises(DimensionError):
        matvec_adjoint(M, np.ones(3))
    for _ in range(20):
        M = rng.standard_normal((4, 3))
        x, y = rng.standard_normal(3), rng.standard_normal(4)
        scale = np.linalg.norm(M, 2) * np.linalg.norm(x) * np.linalg.norm(y)
        assert abs(matvec(M, x) @ y - x @ matvec_adjoint(M, y)) <= 1e-12 * scale


def test_operator_norm_examples():
    assert operator_norm(np.eye(5)) == pytest.approx(1.0, abs=1e-12)
    assert operator_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0, abs=1e-9)


def test_operator_norm_matches_jacobi_oracle():
    M = np.random.default_rng(5).standard_normal((5, 5))
    assert operator_norm(M) == pytest.approx(jacobi_top_singular_value(M), abs=1e-8)


def test_zero_matrix_returns_zero_without_iterating():
    res = power_iteration(np.zeros((3, 4)))
    assert res == (0.0, 0, True)


def test_start_vector_in_kernel():
    M = np.array([[1.0, -1.0]])
    assert operator_norm(M) == pytest.approx(np.sqrt(2.0), rel=1e-9)


def test_nonconvergence_inflates_estimate():
    M = np.diag([1.0, 0.999, 0.5])
    res = power_iteration(M, tol=1e-14, max_iter=3)
    assert not res.converged
    x = np.ones(3) / np.sqrt(3)
    for _ in range(2):
        y = M.T @ M @ x
        x = y / np.linalg.norm(y)
    lam = x @ (M.T @ M @ x)
    assert res.norm == pytest.approx(1.01 * np.sqrt(lam), rel=1e-12)


def test_bad_arguments():
    with pytest.raises(ValueError):
        operator_norm(np.eye(2), tol=0.0)
    with pytest.raises(ValueError):
        operator_norm(np.eye(2), max_iter=0)


matrices = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
                  elements=st.floats(-10, 10, allow_nan=False, width=64))


@settings(max_examples=60, deadline=None)
@given(matrices, st.integers(0, 2**32 - 1))
def test_norm_bounds_every_ratio(M, seed):
    est = operator_norm(M)
    x = np.random.default_rng(seed).standard_normal(M.shape[1])
    assert np.linalg.norm(M @ x) / np.linalg.norm(x) <= est + 1e-10 * max(est, 1.0) + 1e-12


def test_transpose_invariance(rng):
    for shape in [(4, 7), (9, 3), (6, 6)]:
        M = rng.standard_normal(shape)
        assert operator_norm(M) == pytest.approx(operator_norm(M.T), abs=1e-8)


def test_product_point_roundtrip():
    z = ProductPoint(np.arange(3.0), np.array([5.0]), np.array([6.0, 7, 8]))
    flat = z.flat
    back = ProductPoint.from_flat(flat, z.dims)
    np.testing.assert_array_equal(back.x, z.x)
    np.testing.assert_array_equal(back.v, z.v)
    assert z.norm() == pytest.approx(np.linalg.norm(flat))
    with pytest.raises(DimensionError):
        ProductPoint.from_flat(flat, (3, 2, 3))

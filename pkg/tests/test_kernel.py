"""Kernel decomposition against dense linear-algebra oracles."""

import numpy as np
import pytest

from netinf.errors import ParameterError
from netinf.kernel import (
    TcKernelParam,
    expected_inverse_kernel,
    tc_inverse_decomposition,
    tc_kernel_entry,
    tc_kernel_matrix,
    tc_log_determinant,
    tridiagonal_from_w,
    u_sandwich_diag,
)


def test_kernel_entry_values():
    assert tc_kernel_entry(2, 3, 0.5) == pytest.approx(0.125)
    assert tc_kernel_entry(3, 2, 0.5) == pytest.approx(0.125)
    assert tc_kernel_entry(1, 1, 0.9) == pytest.approx(0.9)


def test_kernel_entry_validation():
    with pytest.raises(ParameterError):
        tc_kernel_entry(1, 1, 1.0)
    with pytest.raises(ParameterError):
        tc_kernel_entry(1, 1, 0.0)
    with pytest.raises(ParameterError):
        tc_kernel_entry(0, 1, 0.5)
    with pytest.raises(ParameterError):
        TcKernelParam(beta=-0.1)


def test_decomposition_t1():
    dec = tc_inverse_decomposition(1, 0.5)
    np.testing.assert_allclose(dec.w_diag, [2.0])
    np.testing.assert_allclose(dec.u_matrix, [[1.0]])
    np.testing.assert_allclose(dec.dense_inverse(), [[2.0]])


def test_decomposition_t2_matches_dense_inverse():
    # oracle: dense inversion of [[0.5, 0.25], [0.25, 0.25]]
    k = tc_kernel_matrix(2, 0.5)
    np.testing.assert_allclose(k, [[0.5, 0.25], [0.25, 0.25]])
    expected = np.linalg.inv(k)
    np.testing.assert_allclose(expected, [[4.0, -4.0], [-4.0, 8.0]], rtol=1e-12)
    dec = tc_inverse_decomposition(2, 0.5)
    got = dec.u_matrix.T @ np.diag(dec.w_diag) @ dec.u_matrix
    np.testing.assert_allclose(got, expected, rtol=1e-12)
    np.testing.assert_allclose(dec.dense_inverse(), expected, rtol=1e-12)


def test_decomposition_t20_reconstruction():
    k = tc_kernel_matrix(20, 0.3)
    kinv = tc_inverse_decomposition(20, 0.3).dense_inverse()
    err = np.max(np.abs(kinv @ k - np.eye(20)))
    assert err < 1e-8


def test_log_determinant_explicit():
    assert tc_log_determinant(2, 0.5) == pytest.approx(np.log(0.0625))
    assert tc_log_determinant(1, 0.5) == pytest.approx(np.log(0.5))


def test_log_determinant_vs_cholesky():
    k = tc_kernel_matrix(10, 0.7)
    chol = np.linalg.cholesky(k)
    oracle = 2.0 * np.sum(np.log(np.diag(chol)))
    assert abs(tc_log_determinant(10, 0.7) - oracle) < 1e-8


def test_expected_inverse_single_and_repeated_sample():
    single = expected_inverse_kernel(2, [0.5])
    np.testing.assert_allclose(single, [[4.0, -4.0], [-4.0, 8.0]], rtol=1e-12)
    repeated = expected_inverse_kernel(2, [0.5, 0.5])
    np.testing.assert_allclose(repeated, single, rtol=1e-12)


def test_expected_inverse_matches_mean_of_dense_inverses():
    betas = [0.3, 0.6, 0.9]
    oracle = np.mean([np.linalg.inv(tc_kernel_matrix(3, b)) for b in betas],
                     axis=0)
    got = expected_inverse_kernel(3, betas)
    np.testing.assert_allclose(got, oracle, atol=1e-10)


def test_expected_inverse_accepts_params_and_rejects_empty():
    params = [TcKernelParam(0.4), TcKernelParam(0.7)]
    got = expected_inverse_kernel(4, params)
    oracle = expected_inverse_kernel(4, [0.4, 0.7])
    np.testing.assert_allclose(got, oracle, rtol=1e-14)
    with pytest.raises(ParameterError):
        expected_inverse_kernel(3, [])


def test_expected_inverse_permutation_invariant():
    rng = np.random.default_rng(0)
    betas = rng.uniform(0.1, 0.9, size=9)
    a = expected_inverse_kernel(6, betas)
    b = expected_inverse_kernel(6, betas[::-1])
    np.testing.assert_allclose(a, b, rtol=1e-13)


def test_kernel_matrix_positive_definite_sweep():
    rng = np.random.default_rng(1)
    for trunc in range(1, 31, 4):
        for beta in rng.uniform(0.02, 0.98, size=4):
            np.linalg.cholesky(tc_kernel_matrix(trunc, float(beta)))


def test_reconstruction_property_sweep():
    rng = np.random.default_rng(2)
    for _ in range(60):
        trunc = int(rng.integers(1, 51))
        beta = float(rng.uniform(0.05, 0.95))
        k = tc_kernel_matrix(trunc, beta)
        kinv = tc_inverse_decomposition(trunc, beta).dense_inverse()
        rel = np.max(np.abs(kinv @ k - np.eye(trunc))) / np.max(np.abs(kinv))
        assert rel < 1e-6


def test_u_sandwich_diag_matches_dense():
    rng = np.random.default_rng(3)
    for trunc in (1, 2, 5, 11):
        a = rng.standard_normal((trunc, trunc))
        s = a @ a.T
        u = tc_inverse_decomposition(trunc, 0.5).u_matrix
        np.testing.assert_allclose(u_sandwich_diag(s), np.diag(u @ s @ u.T),
                                   rtol=1e-12)
        # trace identity used throughout the updates
        w = np.abs(rng.standard_normal(trunc)) + 0.1
        lhs = float(np.dot(w, u_sandwich_diag(s)))
        rhs = float(np.trace(tridiagonal_from_w(w) @ s))
        assert lhs == pytest.approx(rhs, rel=1e-12)

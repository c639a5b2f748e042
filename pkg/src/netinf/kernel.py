"""Exponentially decaying covariance kernel over impulse-response lags.

The kernel k(t, s) = beta^max(t, s) on lags t, s >= 1 encodes stable
(geometrically decaying) impulse responses.  Its inverse admits an analytic
factorization K^-1 = U' W U with U upper bidiagonal (unit diagonal, -1
superdiagonal) and W diagonal, which drops the cost of an inverse from
O(T^3) to O(T) and the determinant to O(1).  Everything downstream (the
variational updates, the sampler target, the empirical-Bayes baseline)
goes through the helpers here rather than forming dense inverses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

# Decay rates are clamped away from {0, 1} before entering the
# factorization: W entries scale like beta^-T and overflow at the endpoints.
BETA_MIN = 1e-4
BETA_MAX = 1.0 - 1e-4


def _validate_beta(beta: float) -> float:
    b = float(beta)
    if not np.isfinite(b) or not 0.0 < b < 1.0:
        raise ParameterError(f"decay rate must lie strictly in (0, 1), got {beta!r}")
    return b


def clamp_beta(beta: float) -> float:
    """Clamp a decay rate into the numerically safe interval."""
    return min(max(float(beta), BETA_MIN), BETA_MAX)


@dataclass(frozen=True)
class TcKernelParam:
    """Decay rate of the kernel, valid strictly inside (0, 1)."""

    beta: float

    def __post_init__(self):
        _validate_beta(self.beta)


def _as_beta(beta) -> float:
    if isinstance(beta, TcKernelParam):
        return beta.beta
    return _validate_beta(beta)


@dataclass(frozen=True)
class TcDecomposition:
    """Factorization K^-1 = U' diag(w_diag) U.

    U is never stored densely: it is upper bidiagonal with unit diagonal and
    -1 superdiagonal, so products against it are O(T).  ``u_matrix`` builds
    the dense matrix for inspection and tests only.
    """

    w_diag: np.ndarray

    @property
    def size(self) -> int:
        return self.w_diag.shape[0]

    @property
    def u_matrix(self) -> np.ndarray:
        t = self.size
        u = np.eye(t)
        u[np.arange(t - 1), np.arange(1, t)] = -1.0
        return u

    def dense_inverse(self) -> np.ndarray:
        """Materialize K^-1 = U' W U (tridiagonal) as a dense matrix."""
        return tridiagonal_from_w(self.w_diag)


def tc_kernel_entry(t: int, s: int, beta) -> float:
    """Kernel value beta^max(t, s) at integer lags t, s >= 1."""
    b = _as_beta(beta)
    if t < 1 or s < 1:
        raise ParameterError(f"lags must be >= 1, got t={t}, s={s}")
    return b ** max(int(t), int(s))


def tc_kernel_matrix(trunc: int, beta) -> np.ndarray:
    """Dense T x T kernel matrix over lags 1..T (tests and oracles only)."""
    b = _as_beta(beta)
    lags = np.arange(1, trunc + 1)
    return b ** np.maximum.outer(lags, lags)


def tc_w_diag(trunc: int, beta) -> np.ndarray:
    """Diagonal of W in K^-1 = U' W U.

    Entries are (1-b)^-1 * b^-j for j = 1..T-1 and b^-T for the last one;
    for T = 1 this reduces to the single entry 1/b.
    """
    b = clamp_beta(_as_beta(beta))
    if trunc < 1:
        raise ParameterError(f"matrix dimension must be >= 1, got {trunc}")
    j = np.arange(1, trunc + 1, dtype=float)
    w = np.exp(-j * np.log(b) - np.log1p(-b))
    w[-1] = b ** (-trunc)
    return w


def tc_inverse_decomposition(trunc: int, beta) -> TcDecomposition:
    """Analytic factorization of the inverse kernel matrix."""
    return TcDecomposition(w_diag=tc_w_diag(trunc, beta))


def tc_log_determinant(trunc: int, beta) -> float:
    """log |K| = (T(T+1)/2) log b + (T-1) log(1-b), never formed densely."""
    b = clamp_beta(_as_beta(beta))
    if trunc < 1:
        raise ParameterError(f"matrix dimension must be >= 1, got {trunc}")
    t = int(trunc)
    return 0.5 * t * (t + 1) * np.log(b) + (t - 1) * np.log1p(-b)


def tridiagonal_from_w(w_diag: np.ndarray) -> np.ndarray:
    """Dense symmetric tridiagonal U' diag(w) U for a weight vector w."""
    w = np.asarray(w_diag, dtype=float)
    t = w.shape[0]
    out = np.zeros((t, t))
    diag = w.copy()
    diag[1:] += w[:-1]
    out[np.arange(t), np.arange(t)] = diag
    if t > 1:
        out[np.arange(t - 1), np.arange(1, t)] = -w[:-1]
        out[np.arange(1, t), np.arange(t - 1)] = -w[:-1]
    return out


def expected_inverse_kernel(trunc: int, beta_samples) -> np.ndarray:
    """Mean of per-sample inverse kernels, assembled through the shared U.

    Averaging the W vectors first makes the whole computation O(NT): the
    result equals (1/N) U' [sum_k W^k] U, i.e. the arithmetic mean of the
    per-sample dense inverses.
    """
    betas = [(_as_beta(b) if not isinstance(b, (int, float, np.floating)) else float(b))
             for b in beta_samples]
    if len(betas) == 0:
        raise ParameterError("need at least one decay-rate sample")
    return tridiagonal_from_w(mean_w_diag(trunc, betas))


def mean_w_diag(trunc: int, betas) -> np.ndarray:
    """Average the W vectors of a list of decay-rate samples."""
    arr = np.asarray(betas, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ParameterError("need at least one decay-rate sample")
    b = np.clip(arr, BETA_MIN, BETA_MAX)[:, None]
    j = np.arange(1, trunc + 1, dtype=float)[None, :]
    w = np.exp(-j * np.log(b) - np.log1p(-b))
    w[:, -1] = b[:, 0] ** (-trunc)
    return w.mean(axis=0)


def u_sandwich_diag(block: np.ndarray) -> np.ndarray:
    """diag(U S U') for a symmetric T x T block S.

    These are the only statistics of S the sampler target and the scale
    updates need: trace(K^-1 S) = sum_j W_jj * diag(U S U')_j.
    """
    s = np.asarray(block, dtype=float)
    t = s.shape[0]
    d = np.empty(t)
    if t == 0:
        return d
    dd = np.diagonal(s)
    if t > 1:
        upper = np.diagonal(s, offset=1)
        d[: t - 1] = dd[: t - 1] - 2.0 * upper + dd[1:]
    d[t - 1] = dd[t - 1]
    return d

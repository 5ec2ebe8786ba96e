"""Legendre polynomial-exponential time basis.

The basis functions are ``Psi_n(t) = exp(t) * Q_n(t)`` on ``(0, T)`` where
``Q_n(t) = sqrt((2n+1)/T) * P_n(2t/T - 1)`` are the orthonormal Legendre
polynomials of ``L2(0, T)``.  The family is orthonormal for the weighted
inner product ``<u, v> = int_0^T exp(-2t) u(t) v(t) dt``.

All products ``exp(-2t) Psi_m Psi_n`` and ``exp(-2t) Psi_n'' Psi_m`` reduce
to polynomials of degree ``m + n``, so a Gauss-Legendre rule with at least
``2N + 2`` nodes integrates every basis inner product exactly.  Measured
data only exist at the observation times, so data projections use a
composite rule on those samples instead: the trapezoid rule by default, or
Gregory's end-corrected trapezoid rule for higher accuracy.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import ConfigurationError, DomainError, ShapeError

__all__ = [
    "TimeGrid",
    "BasisSet",
    "legendre_triplet",
    "psi_triplet",
    "gauss_legendre",
    "weighted_gram",
    "stiffness",
    "project_samples",
    "synthesize",
    "projection_residual",
    "trapezoid_weights",
    "gregory_weights",
    "sample_weights",
]

_ROUND = 1e-12


def _check_unit_interval(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + _ROUND) or not np.all(np.isfinite(x)):
        raise DomainError("Legendre abscissa must lie in [-1, 1]")
    return np.clip(x, -1.0, 1.0)


def _check_time(t, T):
    t = np.asarray(t, dtype=float)
    tol = _ROUND * max(1.0, T)
    if np.any(t < -tol) or np.any(t > T + tol) or not np.all(np.isfinite(t)):
        raise DomainError(f"time must lie in [0, {T}]")
    return np.clip(t, 0.0, T)


def legendre_triplet(n, x):
    """Return ``(P_n(x), P_n'(x), P_n''(x))``.

    Uses the upward three-term recurrence together with its differentiated
    form ``P_{k+1}' = P_{k-1}' + (2k+1) P_k``.  ``x`` may be an array.
    """
    if n < 0:
        raise DomainError("Legendre order must be non-negative")
    x = _check_unit_interval(x)
    p_prev, d_prev, dd_prev = np.ones_like(x), np.zeros_like(x), np.zeros_like(x)
    if n == 0:
        return p_prev, d_prev, dd_prev
    p, d, dd = x.copy(), np.ones_like(x), np.zeros_like(x)
    for k in range(1, n):
        p_next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        d_next = d_prev + (2 * k + 1) * p
        dd_next = dd_prev + (2 * k + 1) * d
        p_prev, d_prev, dd_prev = p, d, dd
        p, d, dd = p_next, d_next, dd_next
    return p, d, dd


def psi_triplet(n, t, T):
    """Return ``(Psi_n(t), Psi_n'(t), Psi_n''(t))`` for ``t`` in ``[0, T]``."""
    if T <= 0:
        raise DomainError("final time T must be positive")
    t = _check_time(t, T)
    scale = np.sqrt((2 * n + 1) / T)
    p, dp, ddp = legendre_triplet(n, 2.0 * t / T - 1.0)
    q = scale * p
    dq = scale * dp * (2.0 / T)
    ddq = scale * ddp * (2.0 / T) ** 2
    et = np.exp(t)
    return et * q, et * (q + dq), et * (q + 2.0 * dq + ddq)


def gauss_legendre(num_nodes):
    """Gauss-Legendre nodes and weights on ``[-1, 1]``."""
    if int(num_nodes) < 1:
        raise DomainError("a Gauss-Legendre rule needs at least one node")
    return np.polynomial.legendre.leggauss(int(num_nodes))


def trapezoid_weights(num_samples, T):
    """Composite trapezoid weights for ``num_samples`` uniform times on [0, T]."""
    if num_samples < 2:
        raise DomainError("need at least two samples for the trapezoid rule")
    w = np.full(num_samples, T / (num_samples - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


# Gregory end-correction coefficients 1/12, 1/24, 19/720, ...
_GREGORY = (1 / 12, 1 / 24, 19 / 720, 3 / 160, 863 / 60480, 275 / 24192)


def gregory_weights(num_samples, T, order=6):
    """Trapezoid weights with ``order`` Gregory end corrections.

    Interior weights stay equal to the spacing; only the first and last
    ``order + 1`` weights change.  Exact for polynomials of degree
    ``order + 1`` (``order`` even) and far more accurate than the plain
    trapezoid rule near the ends of the window, where the integrands
    ``exp(-2t) Psi_m(t) u(t)`` have large slopes for high ``m``.
    """
    if order > len(_GREGORY):
        raise ConfigurationError(f"Gregory order at most {len(_GREGORY)}")
    if num_samples < 2 * (order + 1):
        raise DomainError(f"need at least {2 * (order + 1)} samples for order {order}")
    w = trapezoid_weights(num_samples, T)
    h = T / (num_samples - 1)
    for j in range(1, order + 1):
        for i in range(j + 1):
            c = h * _GREGORY[j - 1] * comb(j, i) * (-1) ** i
            w[num_samples - 1 - i] -= c
            w[i] -= c
    return w


def sample_weights(num_samples, T, rule="trapezoid"):
    if rule == "trapezoid":
        return trapezoid_weights(num_samples, T)
    if rule == "gregory":
        return gregory_weights(num_samples, T)
    raise ConfigurationError(f"unknown time quadrature rule {rule!r}")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform observation times ``t_k = k * T / (num_samples - 1)``."""

    T: float = 2.5
    num_samples: int = 73

    def __post_init__(self):
        if not self.T > 0:
            raise ConfigurationError("T must be positive")
        if int(self.num_samples) < 2:
            raise ConfigurationError("num_samples must be at least 2")

    @property
    def dt_obs(self):
        return self.T / (self.num_samples - 1)

    @property
    def times(self):
        # index-based so that the last time is exactly T
        return np.arange(self.num_samples) * self.T / (self.num_samples - 1)


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Truncated basis ``Psi_0 .. Psi_N`` on ``(0, T)`` with a cached table.

    ``quad_nodes``/``quad_weights`` are a Gauss-Legendre rule mapped to
    ``[0, T]``.  ``psi``, ``dpsi`` and ``ddpsi`` hold the basis and its first
    two derivatives at those nodes, shape ``(N + 1, num_nodes)``.
    """

    N: int
    T: float
    num_nodes: int | None = None
    quad_nodes: np.ndarray = field(init=False, repr=False)
    quad_weights: np.ndarray = field(init=False, repr=False)
    psi: np.ndarray = field(init=False, repr=False)
    dpsi: np.ndarray = field(init=False, repr=False)
    ddpsi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.N < 0:
            raise ConfigurationError("truncation order N must be >= 0")
        if not self.T > 0:
            raise ConfigurationError("T must be positive")
        num_nodes = 2 * self.N + 2 if self.num_nodes is None else int(self.num_nodes)
        object.__setattr__(self, "num_nodes", num_nodes)
        x, w = gauss_legendre(num_nodes)
        t = 0.5 * self.T * (x + 1.0)
        table = [psi_triplet(n, t, self.T) for n in range(self.N + 1)]
        object.__setattr__(self, "quad_nodes", t)
        object.__setattr__(self, "quad_weights", 0.5 * self.T * w)
        for name, k in (("psi", 0), ("dpsi", 1), ("ddpsi", 2)):
            arr = np.array([row[k] for row in table])
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def exact(self):
        """True when the rule integrates all basis products exactly."""
        return self.num_nodes >= 2 * self.N + 2

    def inner(self, f, g):
        """Weighted inner products of tabulated rows, ``f @ diag(w e^{-2t}) @ g.T``."""
        w = self.quad_weights * np.exp(-2.0 * self.quad_nodes)
        return (f * w) @ g.T

    def values_at(self, t):
        """``Psi_n(t)`` for ``n = 0..N``; shape ``(N + 1,) + shape(t)``."""
        return np.array([psi_triplet(n, t, self.T)[0] for n in range(self.N + 1)])

    def projection_matrix(self, time_grid, rule="trapezoid"):
        """Matrix ``W`` with ``W[m, k] = w_k exp(-2 t_k) Psi_m(t_k)``.

        Multiplying samples along their time axis by ``W`` approximates the
        weighted Fourier coefficients with the sample rule ``rule``.
        """
        if abs(time_grid.T - self.T) > _ROUND * self.T:
            raise ShapeError("time grid and basis disagree on T")
        t = time_grid.times
        w = sample_weights(time_grid.num_samples, time_grid.T, rule) * np.exp(-2.0 * t)
        return self.values_at(t) * w


def weighted_gram(basis):
    """Weighted Gram matrix ``<Psi_m, Psi_n>``; the identity for an exact rule."""
    if not basis.exact:
        raise ConfigurationError(
            f"quadrature has {basis.num_nodes} nodes, need >= {2 * basis.N + 2}"
        )
    return basis.inner(basis.psi, basis.psi)


def stiffness(basis):
    """Coupling matrix ``s[m, n] = <Psi_n'', Psi_m>`` (generally non-symmetric)."""
    if not basis.exact:
        raise ConfigurationError(
            f"quadrature has {basis.num_nodes} nodes, need >= {2 * basis.N + 2}"
        )
    return basis.inner(basis.psi, basis.ddpsi)


def project_samples(samples, basis, time_grid=None, rule="trapezoid"):
    """Weighted Fourier coefficients of sampled data.

    ``samples`` has the time axis first, shape ``(num_samples, ...)``.  The
    result has shape ``(N + 1, ...)``.  The integral is approximated on the
    observation times with ``rule`` (``"trapezoid"`` or ``"gregory"``).
    """
    samples = np.asarray(samples, dtype=float)
    if time_grid is None:
        time_grid = TimeGrid(basis.T, samples.shape[0])
    if samples.shape[0] != time_grid.num_samples:
        raise ShapeError(
            f"got {samples.shape[0]} samples, time grid has {time_grid.num_samples}"
        )
    W = basis.projection_matrix(time_grid, rule)
    flat = samples.reshape(samples.shape[0], -1)
    return (W @ flat).reshape((basis.N + 1,) + samples.shape[1:])


def synthesize(coeffs, t, basis):
    """Evaluate ``sum_n coeffs[n] * Psi_n(t)``; ``coeffs`` has modes first."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[0] != basis.N + 1:
        raise ShapeError(f"expected {basis.N + 1} coefficients, got {coeffs.shape[0]}")
    psi = basis.values_at(t)
    return np.tensordot(psi, coeffs, axes=(0, 0))


def projection_residual(u, u_tt, basis, num_nodes=96):
    """Per-mode residual ``sum_n s[m, n] u_n - <u_tt, Psi_m>`` for ``m = 0..N``.

    ``u`` and ``u_tt`` are callables of time.  Both the coefficients ``u_n``
    and the right-hand inner products are computed with a high-order
    Gauss-Legendre rule, so what remains is the truncation error of the
    second derivative of the expansion.
    """
    x, w = gauss_legendre(num_nodes)
    t = 0.5 * basis.T * (x + 1.0)
    w = 0.5 * basis.T * w * np.exp(-2.0 * t)
    psi = basis.values_at(t)
    u_n = psi @ (w * u(t))
    rhs = psi @ (w * u_tt(t))
    return stiffness(basis) @ u_n - rhs

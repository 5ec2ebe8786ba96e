"""Quasi-reversibility solver for the time-reduced system.

The unknown is a mode stack ``V = (v_0, .., v_N)``, an array of shape
``(N + 1, 3, nx, ny, nz)``.  The discrete functional is

    J(V) = |A V - d|^2 + epsilon_reg * sum_m h3_inner(v_m, v_m)

where ``A V - d`` stacks, for every mode ``m``,

    sqrt(h^3)  * (curl_curl v_m + eps * sum_n s[m, n] v_n)      (interior)
    sqrt(area) * (v_m|boundary - f_m)                             (Dirichlet)
    sqrt(area) * (trace2(v_m) - g_m)                              (second trace)

Its minimizer solves ``N V = b`` with ``N = A^T A + epsilon_reg L^T L`` and
``b = A^T d``; we solve that by (optionally Jacobi preconditioned) conjugate
gradients without ever forming ``N``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSet, stiffness
from .errors import ConfigurationError, ShapeError
from .fields import (
    TRACE_VARIANTS,
    boundary_mask,
    MediumFields,
    VectorGrid,
    curl_curl,
    curl_curl_T,
    dirichlet_trace,
    dirichlet_trace_T,
    face_weights,
    h3_apply,
    h3_diagonal,
    h3_inner,
    second_trace,
)

__all__ = [
    "QRConfig",
    "QRProblem",
    "SolveReport",
    "ModeStack",
    "residual_bundle",
    "functional",
    "normal_apply",
    "rhs_assemble",
    "cg_solve",
    "reconstruct_initial",
    "invert",
]

PRECONDITIONERS = ("identity", "jacobi")


@dataclass(frozen=True)
class QRConfig:
    N: int = 15
    epsilon_reg: float = 1e-6
    cg_tol: float = 1e-8
    cg_max_iter: int = 5000
    preconditioner: str = "identity"
    trace_variant: str = "normal-derivative"
    time_rule: str = "trapezoid"

    def __post_init__(self):
        if int(self.N) < 0:
            raise ConfigurationError("N must be >= 0")
        if not self.epsilon_reg > 0:
            raise ConfigurationError("epsilon_reg must be positive")
        if not 0 < self.cg_tol < 1:
            raise ConfigurationError("cg_tol must lie in (0, 1)")
        if int(self.cg_max_iter) < 1:
            raise ConfigurationError("cg_max_iter must be positive")
        if self.preconditioner not in PRECONDITIONERS:
            raise ConfigurationError(
                f"preconditioner must be one of {PRECONDITIONERS}, got {self.preconditioner!r}")
        if self.trace_variant not in TRACE_VARIANTS:
            raise ConfigurationError(f"unknown trace variant {self.trace_variant!r}")


class ModeStack(np.ndarray):
    """Marker view for ``(N + 1, 3, nx, ny, nz)`` arrays; plain arrays work too."""

    @classmethod
    def zeros(cls, grid, N):
        return np.zeros((N + 1, 3) + grid.n).view(cls)

    @classmethod
    def check(cls, V, grid, N):
        V = np.asarray(V, dtype=float)
        if V.shape != (N + 1, 3) + grid.n:
            raise ShapeError(f"mode stack shape {V.shape}, expected {(N + 1, 3) + grid.n}")
        if not np.all(np.isfinite(V)):
            raise ShapeError("mode stack contains non-finite values")
        return V


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    functional: float = float("nan")
    wall_time: float = 0.0
    converged: bool = False
    preconditioner: str = "identity"

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "residual_history": [float(r) for r in self.residual_history],
            "functional": float(self.functional),
            "wall_time": float(self.wall_time),
            "converged": bool(self.converged),
            "preconditioner": self.preconditioner,
        }


class QRProblem:
    """The linear algebra of one inversion: grid, medium, basis and weights."""

    def __init__(self, grid, medium=None, basis=None, config=None):
        self.config = config or QRConfig()
        self.grid = grid
        self.basis = basis or BasisSet(self.config.N, 2.5)
        if self.basis.N != self.config.N:
            raise ConfigurationError(f"basis has N = {self.basis.N}, config says {self.config.N}")
        self.medium = medium or MediumFields.vacuum(grid)
        if np.shape(self.medium.mu) != grid.n:
            raise ShapeError("medium must be sampled on the inversion grid")
        self.s = stiffness(self.basis)
        self.trace2, self.trace2_T = second_trace(self.config.trace_variant)
        # the reduced equations hold in the open box: no interior residual on
        # boundary nodes, where the Dirichlet and second-trace blocks apply
        self.wv = np.sqrt(grid.cell_volume) * ~boundary_mask(grid)
        self.wf = np.sqrt(face_weights(grid)).reshape(-1, 1)
        self._diag = None

    @property
    def shape(self):
        return (self.config.N + 1, 3) + self.grid.n

    # -- the linear part A and its transpose --------------------------------

    def apply_A(self, V):
        g, med = self.grid, self.medium
        interior = curl_curl(V, g, med) + med.eps * np.tensordot(self.s, V, axes=(1, 0))
        return (
            self.wv * interior,
            self.wf * dirichlet_trace(V, g),
            self.wf * self.trace2(V, g),
        )

    def apply_AT(self, blocks):
        g, med = self.grid, self.medium
        R, D, Nb = blocks
        R = self.wv * R
        out = curl_curl_T(R, g, med)
        out += np.tensordot(self.s.T, med.eps * R, axes=(1, 0))
        out += dirichlet_trace_T(self.wf * D, g)
        out += self.trace2_T(self.wf * Nb, g)
        return out

    def data_blocks(self, modes):
        self._check_modes(modes)
        return (
            np.zeros(self.shape),
            self.wf * modes.f,
            self.wf * modes.g,
        )

    def _check_modes(self, modes):
        if modes.grid.n != self.grid.n:
            raise ShapeError("mode data and problem grids differ")
        if modes.N != self.config.N:
            raise ShapeError(f"mode data has N = {modes.N}, config says {self.config.N}")
        if modes.trace_variant != self.config.trace_variant:
            raise ConfigurationError(
                f"data carry the {modes.trace_variant!r} trace, solver expects {self.config.trace_variant!r}")

    # -- functional and normal equations -----------------------------------

    def residual(self, V, modes):
        V = ModeStack.check(V, self.grid, self.config.N)
        AV = self.apply_A(V)
        d = self.data_blocks(modes)
        return tuple(a - b for a, b in zip(AV, d))

    def regularizer(self, V):
        return sum(h3_inner(v, v, self.grid) for v in V)

    def functional(self, V, modes):
        r = self.residual(V, modes)
        misfit = sum(float(np.sum(b * b)) for b in r)
        return misfit + self.config.epsilon_reg * self.regularizer(V)

    def misfit(self, V, modes):
        return sum(float(np.sum(b * b)) for b in self.residual(V, modes))

    def normal_apply(self, V):
        V = np.asarray(V, dtype=float)
        return self.apply_AT(self.apply_A(V)) + self.config.epsilon_reg * h3_apply(V, self.grid)

    def rhs(self, modes):
        return self.apply_AT(self.data_blocks(modes))

    def gradient(self, V, modes):
        return 2.0 * (self.normal_apply(V) - self.rhs(modes))

    def diagonal(self):
        """Exact diagonal of ``N`` for the Jacobi preconditioner.

        The spatial blocks (curl-curl and the traces) are assembled sparsely
        once; the mode coupling contributes in closed form.
        """
        if self._diag is not None:
            return self._diag
        from . import assembly

        g, med = self.grid, self.medium
        CC = assembly.curl_curl_matrix(g, med.mu)
        w2 = self.wv * self.wv
        CCw = CC.multiply(np.tile(w2.ravel(), 3)[:, None]).tocsr()
        cc_sq = np.asarray(CCw.multiply(CC).sum(axis=0)).ravel().reshape((3,) + g.n)
        cc_d = CC.diagonal().reshape((3,) + g.n)
        wf = np.repeat(np.sqrt(face_weights(g).ravel()), 3)
        tr = 0.0
        for B in (assembly.dirichlet_matrix(g), assembly.trace_matrix(g, self.config.trace_variant)):
            Bw = B.multiply(wf[:, None]).tocsr()
            tr = tr + np.asarray(Bw.multiply(Bw).sum(axis=0)).ravel().reshape((3,) + g.n)
        s = self.s
        eps = med.eps
        col = np.sum(s * s, axis=0)
        diag = np.empty(self.shape)
        for m in range(self.config.N + 1):
            diag[m] = (cc_sq + 2.0 * s[m, m] * eps * cc_d * w2 + eps * eps * col[m] * w2) + tr
        diag += self.config.epsilon_reg * h3_diagonal(g)
        self._diag = diag
        return diag


# ---------------------------------------------------------------------------
# functional API


def _problem(medium, basis, config, grid):
    return QRProblem(grid, medium, basis, config)


def residual_bundle(V, modes, medium=None, basis=None, config=None):
    """Weighted residual blocks ``(interior, dirichlet, second)`` for all modes."""
    return _problem(medium, basis, config, modes.grid).residual(V, modes)


def functional(V, modes, medium=None, basis=None, config=None):
    return _problem(medium, basis, config, modes.grid).functional(V, modes)


def normal_apply(V, grid, medium=None, basis=None, config=None):
    return _problem(medium, basis, config, grid).normal_apply(V)


def rhs_assemble(modes, medium=None, basis=None, config=None):
    return _problem(medium, basis, config, modes.grid).rhs(modes)


def cg_solve(apply, b, tol=1e-8, max_iter=5000, diag=None, x0=None, callback=None):
    """Conjugate gradients for an SPD operator given as a callable.

    ``diag`` enables Jacobi preconditioning.  Stops when the residual norm
    drops below ``tol * |b|``.  On exhaustion the iterate with the smallest
    residual is returned and the report is left unconverged.
    """
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=float)
    report = SolveReport(preconditioner="identity" if diag is None else "jacobi")
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - apply(x) if x0 is not None else b.copy()
    bnorm = float(np.linalg.norm(b))
    rnorm = float(np.linalg.norm(r))
    report.residual_history.append(rnorm / bnorm if bnorm else 0.0)
    if bnorm == 0.0:
        report.converged = True
        report.wall_time = time.perf_counter() - t0
        return np.zeros_like(b), report
    inv_d = None if diag is None else 1.0 / diag
    z = r if inv_d is None else inv_d * r
    p = z.copy()
    rz = float(np.vdot(r, z))
    best, best_norm = x.copy(), rnorm
    for k in range(1, max_iter + 1):
        q = apply(p)
        alpha = rz / float(np.vdot(p, q))
        x += alpha * p
        r -= alpha * q
        rnorm = float(np.linalg.norm(r))
        report.residual_history.append(rnorm / bnorm)
        report.iterations = k
        if callback is not None:
            callback(k, x)
        if rnorm < best_norm:
            best, best_norm = x.copy(), rnorm
        if rnorm <= tol * bnorm:
            report.converged = True
            break
        z = r if inv_d is None else inv_d * r
        rz_new = float(np.vdot(r, z))
        p *= rz_new / rz
        p += z
        rz = rz_new
    if not report.converged and best_norm < rnorm:
        x = best
    report.wall_time = time.perf_counter() - t0
    return x, report


def reconstruct_initial(V, basis, grid=None):
    """``E_comp = sum_n v_n Psi_n(0)``."""
    V = np.asarray(V, dtype=float)
    if V.shape[0] != basis.N + 1:
        raise ShapeError(f"expected {basis.N + 1} modes, got {V.shape[0]}")
    n = np.arange(basis.N + 1)
    psi0 = np.sqrt((2 * n + 1) / basis.T) * (-1.0) ** n
    values = np.tensordot(psi0, V, axes=(0, 0))
    if grid is None:
        return values
    return VectorGrid(grid, values)


def invert(modes, medium=None, basis=None, config=None, callback=None):
    """Solve the quasi-reversibility problem and return ``(E_comp, V, report)``."""
    config = config or QRConfig(N=modes.N, trace_variant=modes.trace_variant)
    problem = QRProblem(modes.grid, medium, basis or BasisSet(config.N, 2.5), config)
    b = problem.rhs(modes)
    diag = problem.diagonal() if config.preconditioner == "jacobi" else None
    V, report = cg_solve(problem.normal_apply, b, config.cg_tol, config.cg_max_iter, diag,
                         callback=callback)
    report.functional = problem.functional(V, modes)
    return reconstruct_initial(V, problem.basis, modes.grid), V, report

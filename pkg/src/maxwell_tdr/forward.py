"""Explicit leapfrog solver for ``eps E_tt = -curl(mu^-1 curl E)``.

Data are generated on a padded box ``G`` that shares the node spacing of the
measurement box ``Omega`` so that every node of ``Omega`` is a node of ``G``
and boundary traces need no interpolation.  The field is held at its initial
values (zero for the phantoms) on the outer boundary of ``G``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .basis import TimeGrid
from .data import BoundaryRecord
from .errors import ConfigurationError, InstabilityError, ShapeError
from .fields import (
    Grid3,
    curl,
    curl_curl,
    dirichlet_trace,
    second_trace,
)
from .phantoms import reference_medium

__all__ = [
    "ForwardConfig",
    "WaveState",
    "cfl_max_dt",
    "bootstrap",
    "step",
    "simulate",
    "discrete_energy",
    "DomainReachWarning",
]


class DomainReachWarning(UserWarning):
    """Waves may reach the outer boundary of the padded box within ``T``."""


def cfl_max_dt(h, medium):
    """Conservative leapfrog bound ``min(h) / (c_max sqrt(3))``."""
    h = min(np.atleast_1d(np.asarray(h, dtype=float)))
    c_max = float(np.max(1.0 / np.sqrt(np.asarray(medium.mu) * np.asarray(medium.eps))))
    return h / (c_max * math.sqrt(3.0))


@dataclass(frozen=True)
class ForwardConfig:
    omega: Grid3 = field(default_factory=Grid3)
    padded_extent: float = 2.5
    time_grid: TimeGrid = field(default_factory=TimeGrid)
    substeps: int = 1

    def __post_init__(self):
        if int(self.substeps) < 1:
            raise ConfigurationError("substeps must be a positive integer")
        if any(self.padded_extent <= max(abs(a), abs(b)) for a, b in zip(self.omega.lo, self.omega.hi)):
            raise ConfigurationError("padded extent must enclose Omega")

    @property
    def dt_sim(self):
        return self.time_grid.T / ((self.time_grid.num_samples - 1) * self.substeps)

    @property
    def pad(self):
        """Extra nodes on each side of Omega along each axis."""
        out = []
        for ax in range(3):
            h = self.omega.h[ax]
            need = (self.padded_extent - self.omega.hi[ax]) / h
            out.append(int(math.ceil(need - 1e-9)))
        return tuple(out)

    @property
    def padded(self):
        p, h, o = self.pad, self.omega.h, self.omega
        lo = tuple(o.lo[a] - p[a] * h[a] for a in range(3))
        hi = tuple(o.hi[a] + p[a] * h[a] for a in range(3))
        return Grid3(lo, hi, tuple(o.n[a] + 2 * p[a] for a in range(3)))

    @property
    def omega_index(self):
        p, n = self.pad, self.omega.n
        return tuple(slice(p[a], p[a] + n[a]) for a in range(3))

    def restrict(self, values):
        """Restrict padded-grid values ``(..., nx, ny, nz)`` to Omega's nodes."""
        return values[(Ellipsis,) + self.omega_index]

    def embed(self, values):
        """Zero-extend Omega values ``(..., nx, ny, nz)`` to the padded grid."""
        values = np.asarray(values, dtype=float)
        out = np.zeros(values.shape[:-3] + self.padded.n)
        out[(Ellipsis,) + self.omega_index] = values
        return out

    def medium(self):
        return reference_medium(self.padded)


@dataclass
class WaveState:
    E_prev: np.ndarray
    E_curr: np.ndarray
    k: int = 1


def _inv_eps(medium):
    return 1.0 / np.asarray(medium.eps, dtype=float)


def _hold_boundary(new, ref):
    new[..., 0, :, :] = ref[..., 0, :, :]
    new[..., -1, :, :] = ref[..., -1, :, :]
    new[..., :, 0, :] = ref[..., :, 0, :]
    new[..., :, -1, :] = ref[..., :, -1, :]
    new[..., :, :, 0] = ref[..., :, :, 0]
    new[..., :, :, -1] = ref[..., :, :, -1]
    return new


def bootstrap(E0, grid, medium, dt):
    """First step with zero initial velocity (second-order Taylor start)."""
    if dt > cfl_max_dt(grid.h, medium) * (1 + 1e-12):
        raise ConfigurationError(
            f"dt = {dt:.6g} exceeds the stability bound {cfl_max_dt(grid.h, medium):.6g}"
        )
    E0 = np.asarray(E0, dtype=float)
    E1 = E0 - 0.5 * dt * dt * _inv_eps(medium) * curl_curl(E0, grid, medium)
    return WaveState(E0, _hold_boundary(E1, E0), 1)


def step(state, grid, medium, dt):
    """Advance one leapfrog step; boundary values of ``G`` are held fixed."""
    E, Ep = state.E_curr, state.E_prev
    En = 2.0 * E - Ep - dt * dt * _inv_eps(medium) * curl_curl(E, grid, medium)
    _hold_boundary(En, E)
    if not np.all(np.isfinite(En)):
        raise InstabilityError(state.k + 1)
    return WaveState(E, En, state.k + 1)


def discrete_energy(E_a, E_b, grid, medium, dt):
    """Leapfrog energy between two consecutive levels ``E_a`` then ``E_b``.

    ``sum h^3 [eps |(E_b - E_a)/dt|^2 + mu^-1 curl(E_a) . curl(E_b)]``; constant
    in time for the undamped scheme while the field stays away from the
    outer boundary.
    """
    v = (E_b - E_a) / dt
    kin = np.sum(np.asarray(medium.eps) * np.sum(v * v, axis=-4))
    pot = np.sum(np.sum(curl(E_a, grid) * curl(E_b, grid), axis=-4) / np.asarray(medium.mu))
    return grid.cell_volume * float(kin + pot)


def simulate(E0, config=None, medium=None, trace_variant="normal-derivative",
             callback=None):
    """Run the forward problem and record boundary traces on ``Omega``.

    ``E0`` lives on Omega (shape ``(3,) + omega.n``) or on the padded grid.
    ``medium`` defaults to the reference permeability on the padded grid.
    ``callback(k, t, E)`` is called at every observation time if given.
    """
    config = config or ForwardConfig()
    G = config.padded
    medium = medium or config.medium()
    if np.shape(medium.mu) != G.n:
        raise ShapeError("medium must be sampled on the padded grid")
    E0 = np.asarray(E0, dtype=float)
    if E0.shape == (3,) + config.omega.n:
        E0 = config.embed(E0)
    elif E0.shape != (3,) + G.n:
        raise ShapeError(f"initial field shape {E0.shape} fits neither grid")

    c_max = float(np.max(1.0 / np.sqrt(medium.mu * medium.eps)))
    margin = min(config.pad[a] * config.omega.h[a] for a in range(3))
    if c_max * config.time_grid.T > margin:
        warnings.warn(
            f"c_max*T = {c_max * config.time_grid.T:.3f} exceeds the padding {margin:.3f}; "
            "waves can reach the outer boundary before T",
            DomainReachWarning,
            stacklevel=2,
        )

    trace2 = second_trace(trace_variant)[0]
    omega = config.omega
    tg = config.time_grid
    dt = config.dt_sim
    F = np.empty((tg.num_samples,) + dirichlet_trace(omega.zeros(), omega).shape)
    Gn = np.empty_like(F)

    def record(k, E):
        Eo = config.restrict(E)
        F[k] = dirichlet_trace(Eo, omega)
        Gn[k] = trace2(Eo, omega)
        if callback is not None:
            callback(k, tg.times[k], E)

    record(0, E0)
    state = None
    for obs in range(1, tg.num_samples):
        for _ in range(config.substeps):
            state = bootstrap(E0, G, medium, dt) if state is None else step(state, G, medium, dt)
        record(obs, state.E_curr)
    return BoundaryRecord(omega, tg, F, Gn, trace_variant)

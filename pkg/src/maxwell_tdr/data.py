"""Boundary records: container, seeded noise, time projection and file I/O.

A record holds the Dirichlet samples ``F`` and the second trace ``G`` (the
normal derivative by default) at every observation time.  Both arrays have
shape ``(num_samples, num_entries, 3)``: time-major, then faces and their
nodes as laid out by :mod:`maxwell_tdr.fields`, then components.

On disk (``MXTDR1``)::

    b"MXTDR1\\n"
    one line of UTF-8 JSON (sorted keys) terminated by b"\\n"
    F then G as little-endian float64 in the order above
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import TimeGrid
from .errors import (
    BadMagicError,
    HeaderError,
    PayloadSizeError,
    RecordPathError,
    ShapeError,
    TruncatedPayloadError,
)
from .fields import Grid3, num_boundary_entries

__all__ = [
    "BoundaryRecord",
    "ModeData",
    "NoiseSpec",
    "Xoshiro256",
    "add_noise",
    "project_record",
    "save_record",
    "load_record",
    "MAGIC",
]

MAGIC = b"MXTDR1\n"
ORDERING = "F,G;time,face,node,component"
_MASK = (1 << 64) - 1


@dataclass
class BoundaryRecord:
    grid: Grid3
    time_grid: TimeGrid
    F: np.ndarray
    G: np.ndarray
    trace_variant: str = "normal-derivative"

    def __post_init__(self):
        self.F = np.asarray(self.F, dtype=np.float64)
        self.G = np.asarray(self.G, dtype=np.float64)
        shape = (self.time_grid.num_samples, num_boundary_entries(self.grid), 3)
        if self.F.shape != shape or self.G.shape != shape:
            raise ShapeError(f"record arrays must have shape {shape}, got {self.F.shape}, {self.G.shape}")

    @property
    def num_entries(self):
        return self.F.shape[1]

    def scaled(self, alpha):
        return BoundaryRecord(self.grid, self.time_grid, alpha * self.F, alpha * self.G, self.trace_variant)


@dataclass
class ModeData:
    """Projected boundary data ``f_m``, ``g_m`` for ``m = 0..N``.

    Shapes are ``(N + 1, num_entries, 3)``.
    """

    grid: Grid3
    f: np.ndarray
    g: np.ndarray
    trace_variant: str = "normal-derivative"

    @property
    def N(self):
        return self.f.shape[0] - 1

    @classmethod
    def zeros(cls, grid, N, trace_variant="normal-derivative"):
        shape = (N + 1, num_boundary_entries(grid), 3)
        return cls(grid, np.zeros(shape), np.zeros(shape), trace_variant)


# ---------------------------------------------------------------------------
# noise


def _splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


class Xoshiro256:
    """xoshiro256** seeded by four splitmix64 outputs of a 64-bit seed."""

    def __init__(self, seed):
        sm = int(seed) & _MASK
        s = []
        for _ in range(4):
            sm, out = _splitmix64(sm)
            s.append(out)
        self.s = s

    def next_u64(self):
        s0, s1, s2, s3 = self.s
        result = (((((s1 * 5) & _MASK) << 7) | (((s1 * 5) & _MASK) >> 57)) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self.s = [s0, s1, s2, s3]
        return result

    def uniform53(self, size):
        """``size`` doubles in ``[0, 1)`` from the top 53 bits of each output."""
        s0, s1, s2, s3 = self.s
        out = [0] * size
        for i in range(size):
            x = (s1 * 5) & _MASK
            out[i] = ((((x << 7) | (x >> 57)) * 9) & _MASK) >> 11
            t = (s1 << 17) & _MASK
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self.s = [s0, s1, s2, s3]
        return np.array(out, dtype=np.float64) * 2.0 ** -53


@dataclass(frozen=True)
class NoiseSpec:
    delta: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if not self.delta >= 0:
            raise ValueError("noise level delta must be non-negative")


def add_noise(record, spec):
    """Multiplicative noise ``s * (1 + delta * r)`` with ``r`` uniform on [-1, 1].

    One draw per scalar sample, consumed for all of ``F`` and then all of
    ``G``, each in its stored (time, face, node, component) order.
    """
    if spec.delta == 0:
        return BoundaryRecord(record.grid, record.time_grid, record.F.copy(), record.G.copy(),
                              record.trace_variant)
    rng = Xoshiro256(spec.seed)
    r = 2.0 * rng.uniform53(record.F.size + record.G.size) - 1.0
    rF = r[:record.F.size].reshape(record.F.shape)
    rG = r[record.F.size:].reshape(record.G.shape)
    return BoundaryRecord(
        record.grid,
        record.time_grid,
        record.F * (1.0 + spec.delta * rF),
        record.G * (1.0 + spec.delta * rG),
        record.trace_variant,
    )


# ---------------------------------------------------------------------------
# projection


def project_record(record, basis, rule="trapezoid"):
    """Project both traces onto ``Psi_0..Psi_N`` node by node."""
    if abs(record.time_grid.T - basis.T) > 1e-12 * basis.T:
        raise ShapeError("record and basis disagree on T")
    W = basis.projection_matrix(record.time_grid, rule)
    f = np.tensordot(W, record.F, axes=(1, 0))
    g = np.tensordot(W, record.G, axes=(1, 0))
    return ModeData(record.grid, f, g, record.trace_variant)


# ---------------------------------------------------------------------------
# files


def _header(record):
    g = record.grid
    return {
        "format": "MXTDR1",
        "lo": list(g.lo),
        "hi": list(g.hi),
        "n": list(g.n),
        "T": record.time_grid.T,
        "num_samples": record.time_grid.num_samples,
        "num_entries": record.num_entries,
        "ordering": ORDERING,
        "endianness": "LE",
        "trace_variant": record.trace_variant,
    }


def record_bytes(record):
    head = json.dumps(_header(record), sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = record.F.astype("<f8").tobytes() + record.G.astype("<f8").tobytes()
    return MAGIC + head + b"\n" + payload


def save_record(record, path):
    path = Path(path)
    path.write_bytes(record_bytes(record))
    return path


def parse_record(raw):
    if not raw.startswith(MAGIC):
        raise BadMagicError(f"not an MXTDR1 record (starts with {raw[:len(MAGIC)]!r})")
    end = raw.find(b"\n", len(MAGIC))
    if end < 0:
        raise HeaderError("header line is not terminated")
    try:
        head = json.loads(raw[len(MAGIC):end].decode("utf-8"))
        grid = Grid3(tuple(head["lo"]), tuple(head["hi"]), tuple(head["n"]))
        tg = TimeGrid(float(head["T"]), int(head["num_samples"]))
        entries = int(head["num_entries"])
        variant = head.get("trace_variant", "normal-derivative")
        if head.get("endianness") != "LE" or head.get("ordering") != ORDERING:
            raise HeaderError("unsupported endianness or ordering tag")
    except HeaderError:
        raise
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise HeaderError(f"malformed header: {exc}") from None
    if entries != num_boundary_entries(grid):
        raise HeaderError("num_entries does not match the grid")
    payload = raw[end + 1:]
    if len(payload) % 8:
        raise TruncatedPayloadError(f"payload length {len(payload)} is not a multiple of 8 bytes")
    block = tg.num_samples * entries * 3
    found = len(payload) // 8
    if found != 2 * block:
        raise PayloadSizeError(2 * block, found)
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    shape = (tg.num_samples, entries, 3)
    return BoundaryRecord(grid, tg, values[:block].reshape(shape), values[block:].reshape(shape), variant)


def load_record(path):
    path = Path(path)
    if not path.is_file():
        raise RecordPathError(path)
    return parse_record(path.read_bytes())

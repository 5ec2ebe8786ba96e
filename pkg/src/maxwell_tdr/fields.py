"""Collocated Cartesian grids and the discrete spatial operators.

Vector fields are plain arrays of shape ``(..., 3, nx, ny, nz)``: any
number of leading batch axes (modes, probes), then the component axis, then
the node axes in ``x, y, z`` order.  Boundary traces are arrays of shape
``(..., num_entries, 3)`` where the entries run over the six faces in the
order ``x-, x+, y-, y+, z-, z+`` and, inside a face, over its nodes in C
order of the two in-plane axes.  Edge and corner nodes appear once per face
that contains them.

Derivatives are finite differences of second order: centred windows at
interior nodes, shifted one-sided windows near the faces.  Every operator
has an exact discrete transpose, and :class:`GridOperator` turns it into the
adjoint for the uniform weights used throughout: ``h1*h2*h3`` per volume
node and the in-plane cell area per face entry.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from .errors import ConfigurationError, MediumError, ShapeError

AXES = (-3, -2, -1)
FACE_NAMES = ("x-", "x+", "y-", "y+", "z-", "z+")
MAX_ORDER = 3


@dataclass(frozen=True)
class Grid3:
    """Uniform node grid ``lo + i * h`` on a box, ``n`` points per axis."""

    lo: tuple = (-1.0, -1.0, -1.0)
    hi: tuple = (1.0, 1.0, 1.0)
    n: tuple = (20, 20, 20)

    def __post_init__(self):
        lo = tuple(float(v) for v in np.broadcast_to(self.lo, 3))
        hi = tuple(float(v) for v in np.broadcast_to(self.hi, 3))
        n = tuple(int(v) for v in np.broadcast_to(self.n, 3))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", n)
        if min(n) < MAX_ORDER + 1:
            raise ConfigurationError(f"need at least {MAX_ORDER + 1} nodes per axis, got {n}")
        if any(b <= a for a, b in zip(lo, hi)):
            raise ConfigurationError("grid extents must satisfy lo < hi")

    @classmethod
    def cube(cls, n=20, lo=-1.0, hi=1.0):
        return cls((lo,) * 3, (hi,) * 3, (n,) * 3)

    @property
    def h(self):
        return tuple((b - a) / (m - 1) for a, b, m in zip(self.lo, self.hi, self.n))

    @property
    def shape(self):
        return self.n

    @property
    def cell_volume(self):
        hx, hy, hz = self.h
        return hx * hy * hz

    @property
    def size(self):
        return self.n[0] * self.n[1] * self.n[2]

    def coords(self, axis):
        return self.lo[axis] + np.arange(self.n[axis]) * self.h[axis]

    def mesh(self):
        """Coordinate arrays ``X, Y, Z`` of shape ``n``."""
        return np.meshgrid(self.coords(0), self.coords(1), self.coords(2), indexing="ij")

    def zeros(self, *batch):
        return np.zeros(tuple(batch) + (3,) + self.n)


@dataclass(frozen=True)
class Face:
    name: str
    axis: int
    side: int  # 0 at lo, 1 at hi
    normal: np.ndarray
    shape: tuple  # in-plane node counts
    area: float  # in-plane cell area, the face quadrature weight
    start: int  # offset of this face in the flat trace


@lru_cache(maxsize=64)
def boundary_faces(grid):
    faces = []
    start = 0
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        shape = (grid.n[others[0]], grid.n[others[1]])
        area = grid.h[others[0]] * grid.h[others[1]]
        for side in (0, 1):
            normal = np.zeros(3)
            normal[axis] = 1.0 if side else -1.0
            normal.setflags(write=False)
            faces.append(Face(FACE_NAMES[2 * axis + side], axis, side, normal, shape, area, start))
            start += shape[0] * shape[1]
    return tuple(faces)


def num_boundary_entries(grid):
    f = boundary_faces(grid)[-1]
    return f.start + f.shape[0] * f.shape[1]


@lru_cache(maxsize=64)
def face_weights(grid):
    """Quadrature weight of every trace entry, shape ``(num_entries, 1)``."""
    w = np.empty(num_boundary_entries(grid))
    for f in boundary_faces(grid):
        w[f.start:f.start + f.shape[0] * f.shape[1]] = f.area
    w.setflags(write=False)
    return w[:, None]


def face_block(trace, grid, face):
    """View of one face of a trace as ``(..., 3, nb, nc)``."""
    f = face if isinstance(face, Face) else boundary_faces(grid)[FACE_NAMES.index(face)]
    size = f.shape[0] * f.shape[1]
    block = trace[..., f.start:f.start + size, :]
    return np.moveaxis(block, -1, -2).reshape(trace.shape[:-2] + (3,) + f.shape)


def boundary_mask(grid):
    m = np.zeros(grid.n, dtype=bool)
    m[[0, -1], :, :] = True
    m[:, [0, -1], :] = True
    m[:, :, [0, -1]] = True
    return m


# ---------------------------------------------------------------------------
# one-dimensional stencils


def fd_weights(offsets, order):
    """Finite-difference weights (unit spacing) for the ``order``-th derivative.

    Solves the moment conditions ``sum_j w_j o_j^p / p! = [p == order]`` for
    ``p < len(offsets)``, so the stencil is exact for polynomials of degree
    below ``len(offsets)``.
    """
    offsets = np.asarray(offsets, dtype=float)
    m = len(offsets)
    if order >= m:
        raise ConfigurationError("stencil too narrow for the derivative order")
    p = np.arange(m)
    fact = np.cumprod(np.r_[1.0, np.arange(1, m)])
    A = offsets[None, :] ** p[:, None] / fact[:, None]
    rhs = (p == order).astype(float)
    return np.linalg.solve(A, rhs)


@lru_cache(maxsize=256)
def derivative_matrix(n, h, order):
    """Dense ``n x n`` matrix of the second-order ``order``-th derivative.

    Interior rows use the centred window (3 points for orders 1-2, 5 points
    for order 3).  Rows whose centred window would leave the grid use a
    window of ``order + 2`` points shifted inward.
    """
    D = np.zeros((n, n))
    if order == 0:
        np.fill_diagonal(D, 1.0)
        D.setflags(write=False)
        return D
    centred = order + 1 if order % 2 == 0 else order + 2
    half = centred // 2
    width = min(order + 2, n)
    for i in range(n):
        if i - half >= 0 and i + half <= n - 1:
            idx = np.arange(i - half, i + half + 1)
        else:
            first = min(max(i - width // 2, 0), n - width)
            idx = np.arange(first, first + width)
        D[i, idx] = fd_weights(idx - i, order)
    D /= h ** order
    D[np.abs(D) < 1e-14 * np.abs(D).max()] = 0.0
    D.setflags(write=False)
    return D


class Banded:
    """A small square matrix applied along one axis of an array by diagonals."""

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=float)
        self.matrix = matrix
        n = matrix.shape[0]
        self.n = n
        self.diags = []
        for k in range(-(n - 1), n):
            c = np.diagonal(matrix, k)
            if np.any(c != 0.0):
                lo = max(0, -k)
                self.diags.append((k, lo, lo + len(c), c.copy()))

    def apply(self, arr, axis):
        if arr.shape[axis] != self.n:
            raise ShapeError(f"axis {axis} has length {arr.shape[axis]}, operator {self.n}")
        axis = axis % arr.ndim
        out = np.zeros(arr.shape, dtype=np.result_type(arr, float))
        bshape = [1] * arr.ndim
        pre = (slice(None),) * axis
        for k, lo, hi, c in self.diags:
            bshape[axis] = hi - lo
            out[pre + (slice(lo, hi),)] += c.reshape(bshape) * arr[pre + (slice(lo + k, hi + k),)]
        return out


@lru_cache(maxsize=256)
def _banded(n, h, order, transposed=False):
    D = derivative_matrix(n, h, order)
    return Banded(D.T if transposed else D)


@lru_cache(maxsize=256)
def _banded_gram(n, h, order):
    D = derivative_matrix(n, h, order)
    return Banded(D.T @ D)


def partial(v, grid, axis, order=1):
    """``order``-th derivative along ``axis`` (0, 1, 2) of a scalar or vector array."""
    if order == 0:
        return np.array(v, dtype=float, copy=True)
    return _banded(grid.n[axis], grid.h[axis], order).apply(v, AXES[axis])


def partial_T(w, grid, axis, order=1):
    if order == 0:
        return np.array(w, dtype=float, copy=True)
    return _banded(grid.n[axis], grid.h[axis], order, True).apply(w, AXES[axis])


def _check_vector(v, grid):
    v = np.asarray(v, dtype=float)
    if v.shape[-4:] != (3,) + grid.n:
        raise ShapeError(f"expected trailing shape {(3,) + grid.n}, got {v.shape}")
    return v


# ---------------------------------------------------------------------------
# curl and curl-curl


def _curl(v, grid, d):
    vx, vy, vz = v[..., 0, :, :, :], v[..., 1, :, :, :], v[..., 2, :, :, :]
    out = np.empty(v.shape)
    out[..., 0, :, :, :] = d(vz, grid, 1) - d(vy, grid, 2)
    out[..., 1, :, :, :] = d(vx, grid, 2) - d(vz, grid, 0)
    out[..., 2, :, :, :] = d(vy, grid, 0) - d(vx, grid, 1)
    return out


def curl(v, grid):
    """Discrete curl; exact for components that are quadratics per axis."""
    return _curl(_check_vector(v, grid), grid, partial)


def curl_T(w, grid):
    """Matrix transpose of :func:`curl` (plain sums, no weights)."""
    # the block pattern of curl is skew, so its transpose flips the sign
    return -_curl(_check_vector(w, grid), grid, partial_T)


def _inv_mu(medium, grid):
    if medium is None:
        return 1.0
    mu = medium.mu if hasattr(medium, "mu") else np.asarray(medium, dtype=float)
    if np.ndim(mu) and np.shape(mu) != grid.n:
        raise ShapeError(f"medium shape {np.shape(mu)} does not match grid {grid.n}")
    if np.any(~(np.asarray(mu) > 0)):
        raise MediumError("permeability must be positive everywhere")
    return 1.0 / np.asarray(mu, dtype=float)


def curl_curl(v, grid, medium=None):
    """``curl(mu^-1 curl v)`` with pointwise scaling between the two curls."""
    return curl(_inv_mu(medium, grid) * curl(v, grid), grid)


def curl_curl_T(w, grid, medium=None):
    return curl_T(_inv_mu(medium, grid) * curl_T(w, grid), grid)


# ---------------------------------------------------------------------------
# boundary traces


def dirichlet_trace(v, grid):
    v = _check_vector(v, grid)
    blocks = []
    for f in boundary_faces(grid):
        idx = 0 if f.side == 0 else grid.n[f.axis] - 1
        b = np.take(v, idx, axis=AXES[f.axis] % v.ndim)
        blocks.append(b.reshape(b.shape[:-2] + (-1,)))
    return np.moveaxis(np.concatenate(blocks, axis=-1), -2, -1)


def dirichlet_trace_T(w, grid):
    """Scatter-add trace entries back to their nodes (matrix transpose)."""
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape[:-2] + (3,) + grid.n)
    for f in boundary_faces(grid):
        blk = face_block(w, grid, f)
        idx = 0 if f.side == 0 else grid.n[f.axis] - 1
        sl = [slice(None)] * 3
        sl[f.axis] = idx
        out[(Ellipsis,) + tuple(sl)] += blk
    return out


def _normal_row(grid, f):
    D = derivative_matrix(grid.n[f.axis], grid.h[f.axis], 1)
    row = D[0] if f.side == 0 else D[-1]
    return row * f.normal[f.axis]


def neumann_trace(v, grid):
    """Outward normal derivative ``d_nu v`` from the one-sided 3-point stencil."""
    v = _check_vector(v, grid)
    blocks = []
    for f in boundary_faces(grid):
        ax = AXES[f.axis] % v.ndim
        b = np.tensordot(_normal_row(grid, f), v, axes=(0, ax))
        blocks.append(b.reshape(b.shape[:-2] + (-1,)))
    return np.moveaxis(np.concatenate(blocks, axis=-1), -2, -1)


def neumann_trace_T(w, grid):
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape[:-2] + (3,) + grid.n)
    for f in boundary_faces(grid):
        blk = face_block(w, grid, f)
        row = _normal_row(grid, f)
        ax = AXES[f.axis] % out.ndim
        shape = [1] * out.ndim
        shape[ax] = len(row)
        out += row.reshape(shape) * np.expand_dims(blk, ax)
    return out


def _cross_normal(trace, grid, sign):
    """Per-face ``a x nu`` (sign=+1) or ``nu x a`` (sign=-1)."""
    out = np.empty_like(trace)
    for f in boundary_faces(grid):
        size = f.shape[0] * f.shape[1]
        sl = slice(f.start, f.start + size)
        out[..., sl, :] = sign * np.cross(trace[..., sl, :], f.normal)
    return out


def tangential_curl_trace(v, grid):
    """``(curl v) x nu`` on every face, using the one-sided curl at the boundary."""
    return _cross_normal(dirichlet_trace(curl(v, grid), grid), grid, 1.0)


def tangential_curl_trace_T(w, grid):
    return curl_T(dirichlet_trace_T(_cross_normal(np.asarray(w, dtype=float), grid, -1.0), grid), grid)


TRACE_VARIANTS = {
    "normal-derivative": (neumann_trace, neumann_trace_T),
    "tangential-curl": (tangential_curl_trace, tangential_curl_trace_T),
}


def second_trace(variant):
    try:
        return TRACE_VARIANTS[variant]
    except KeyError:
        raise ConfigurationError(
            f"unknown trace variant {variant!r}; choose from {sorted(TRACE_VARIANTS)}"
        ) from None


# ---------------------------------------------------------------------------
# H^3 quadratic form

MULTI_INDICES = tuple(
    a for a in product(range(MAX_ORDER + 1), repeat=3) if sum(a) <= MAX_ORDER
)


def derivative(v, grid, alpha):
    """Mixed derivative ``D^alpha`` as a product of one-dimensional stencils."""
    out = np.asarray(v, dtype=float)
    for axis, k in enumerate(alpha):
        if k:
            out = partial(out, grid, axis, k)
    return out


def derivative_T(w, grid, alpha):
    out = np.asarray(w, dtype=float)
    for axis, k in enumerate(alpha):
        if k:
            out = partial_T(out, grid, axis, k)
    return out


def h3_apply(v, grid):
    """``h^3 * sum_|alpha|<=3 (D^alpha)^T D^alpha v``, the H^3 Gram operator.

    Factored along the axes: with ``M_k = D_k^T D_k`` per axis the sum
    becomes ``sum_a M_a^x sum_b M_b^y sum_{c <= 3-a-b} M_c^z``.
    """
    v = np.asarray(v, dtype=float)
    grams = [[_banded_gram(grid.n[ax], grid.h[ax], k) for k in range(MAX_ORDER + 1)] for ax in range(3)]
    z = [v] + [grams[2][k].apply(v, -1) for k in range(1, MAX_ORDER + 1)]
    zsum = _prefix(z)
    y = []
    for s in range(MAX_ORDER + 1):
        acc = zsum[s].copy()
        for b in range(1, s + 1):
            acc += grams[1][b].apply(zsum[s - b], -2)
        y.append(acc)
    out = y[MAX_ORDER].copy()
    for a in range(1, MAX_ORDER + 1):
        out += grams[0][a].apply(y[MAX_ORDER - a], -3)
    return grid.cell_volume * out


def _prefix(terms):
    acc, out = None, []
    for t in terms:
        acc = t.copy() if acc is None else acc + t
        out.append(acc)
    return out


def h3_inner(u, v, grid):
    """Discrete ``H^3(Omega)^3`` inner product summed over all |alpha| <= 3."""
    u = _check_vector(u, grid)
    v = _check_vector(v, grid)
    total = 0.0
    for alpha in MULTI_INDICES:
        total += np.sum(derivative(u, grid, alpha) * derivative(v, grid, alpha))
    return grid.cell_volume * total


def h3_diagonal(grid):
    """Diagonal of :func:`h3_apply` per node (same for each component)."""
    d = [[np.diag(derivative_matrix(grid.n[ax], grid.h[ax], k).T
                  @ derivative_matrix(grid.n[ax], grid.h[ax], k)) for k in range(MAX_ORDER + 1)]
         for ax in range(3)]
    out = np.zeros(grid.n)
    for a, b, c in MULTI_INDICES:
        out += d[0][a][:, None, None] * d[1][b][None, :, None] * d[2][c][None, None, :]
    return grid.cell_volume * out


# ---------------------------------------------------------------------------
# weighted inner products and adjoints


def volume_inner(u, w, grid):
    return grid.cell_volume * float(np.sum(np.asarray(u) * np.asarray(w)))


def face_inner(a, b, grid):
    return float(np.sum(face_weights(grid) * np.asarray(a) * np.asarray(b)))


class GridOperator:
    """A linear grid operator together with its weighted adjoint.

    ``forward`` and ``transpose`` are matrix-transpose pairs (plain sums).
    ``in_space`` and ``out_space`` are ``"volume"`` or ``"face"`` and select
    the weights of the inner products in which :meth:`adjoint` is exact.
    """

    def __init__(self, name, forward, transpose, in_space="volume", out_space="volume"):
        self.name = name
        self.forward = forward
        self.transpose = transpose
        self.in_space = in_space
        self.out_space = out_space

    def _weight(self, space, grid):
        return grid.cell_volume if space == "volume" else face_weights(grid)

    def __call__(self, u, grid):
        return self.forward(u, grid)

    def adjoint(self, w, grid):
        w_out = self._weight(self.out_space, grid)
        w_in = self._weight(self.in_space, grid)
        return self.transpose(w_out * np.asarray(w, dtype=float), grid) / w_in

    def inner(self, a, b, grid):
        """Inner product of the output space."""
        return volume_inner(a, b, grid) if self.out_space == "volume" else face_inner(a, b, grid)

    @property
    def T(self):
        fwd, tr = self.forward, self.transpose
        w = self._weight
        ins, outs = self.in_space, self.out_space

        def adj(v, grid):
            return tr(w(outs, grid) * np.asarray(v, dtype=float), grid) / w(ins, grid)

        def adj_t(u, grid):
            return w(outs, grid) * fwd(np.asarray(u, dtype=float) / w(ins, grid), grid)

        return GridOperator(self.name + ".T", adj, adj_t, outs, ins)


def _registry():
    reg = {
        "curl": GridOperator("curl", curl, curl_T),
        "curl_curl": GridOperator("curl_curl", curl_curl, curl_curl_T),
        "dirichlet_trace": GridOperator("dirichlet_trace", dirichlet_trace, dirichlet_trace_T, "volume", "face"),
        "neumann_trace": GridOperator("neumann_trace", neumann_trace, neumann_trace_T, "volume", "face"),
        "tangential_curl_trace": GridOperator(
            "tangential_curl_trace", tangential_curl_trace, tangential_curl_trace_T, "volume", "face"),
    }
    for alpha in MULTI_INDICES:
        name = "D%d%d%d" % alpha
        reg[name] = GridOperator(
            name,
            lambda v, g, a=alpha: derivative(v, g, a),
            lambda w, g, a=alpha: derivative_T(w, g, a),
        )
    return reg


OPERATORS = _registry()


def get_operator(op):
    if isinstance(op, GridOperator):
        return op
    if isinstance(op, tuple):
        op = "D%d%d%d" % op
    try:
        return OPERATORS[op]
    except KeyError:
        raise ConfigurationError(f"no registered operator named {op!r}") from None


def transpose_apply(op, w, grid):
    """Apply the weighted adjoint of a registered operator to ``w``."""
    return get_operator(op).adjoint(w, grid)


# ---------------------------------------------------------------------------
# containers


@dataclass
class MediumFields:
    """Scalar permeability and permittivity sampled on a grid."""

    mu: np.ndarray
    eps: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.eps = np.asarray(self.eps, dtype=float)
        if self.mu.shape != self.eps.shape:
            raise ShapeError("mu and eps must share a shape")
        if np.any(~(self.mu > 0)) or np.any(~(self.eps > 0)):
            raise MediumError("mu and eps must be positive everywhere")

    @classmethod
    def vacuum(cls, grid):
        return cls(np.ones(grid.n), np.ones(grid.n))

    def restrict(self, index):
        return MediumFields(self.mu[index], self.eps[index])


@dataclass
class VectorGrid:
    """A three-component field on a grid, ``values.shape == (3,) + grid.n``."""

    grid: Grid3
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (3,) + self.grid.n:
            raise ShapeError(f"values shape {self.values.shape} does not match grid {self.grid.n}")

    def __getitem__(self, comp):
        return self.values[comp]

"""Explicit sparse assembly of the grid operators.

The solver never uses these matrices for its iterations; they exist to
compute exact diagonals for the Jacobi preconditioner and to serve as an
independent dense oracle on tiny grids.  Everything is built from Kronecker
products of the one-dimensional stencil matrices, which is a different code
path from the slice-based application in :mod:`maxwell_tdr.fields`.

Flattening conventions: a vector field ``(3, nx, ny, nz)`` is raveled in C
order; a trace ``(num_entries, 3)`` likewise (component fastest).
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .fields import (
    MULTI_INDICES,
    boundary_faces,
    boundary_mask,
    derivative_matrix,
    face_weights,
    num_boundary_entries,
)


def _eye(n):
    return sp.identity(n, format="csr")


def partial_matrix(grid, axis, order=1):
    mats = [_eye(m) for m in grid.n]
    mats[axis] = sp.csr_matrix(derivative_matrix(grid.n[axis], grid.h[axis], order))
    return sp.kron(sp.kron(mats[0], mats[1]), mats[2], format="csr")


def derivative_alpha_matrix(grid, alpha):
    out = _eye(grid.size)
    for axis, k in enumerate(alpha):
        if k:
            out = partial_matrix(grid, axis, k) @ out
    return sp.csr_matrix(out)


def curl_matrix(grid):
    Dx, Dy, Dz = (partial_matrix(grid, a) for a in range(3))
    return sp.bmat([[None, -Dz, Dy], [Dz, None, -Dx], [-Dy, Dx, None]], format="csr")


def curl_curl_matrix(grid, mu=None):
    C = curl_matrix(grid)
    inv = np.ones(grid.size) if mu is None else 1.0 / np.asarray(mu, dtype=float).ravel()
    return sp.csr_matrix(C @ sp.diags(np.tile(inv, 3)) @ C)


def _component_block(scalar_rows):
    """Lift a scalar (entries x nodes) map to (entries*3) x (3*nodes)."""
    # rows ordered (entry, comp); columns (comp, node)
    rows = []
    for c in range(3):
        pick = sp.csr_matrix((np.ones(1), ([c], [0])), shape=(3, 1))
        rows.append(sp.kron(scalar_rows, pick))
    return sp.hstack(rows, format="csr")


def dirichlet_matrix(grid):
    E = num_boundary_entries(grid)
    rows, cols = [], []
    for f in boundary_faces(grid):
        idx = 0 if f.side == 0 else grid.n[f.axis] - 1
        grids = [np.arange(m) for m in grid.n]
        grids[f.axis] = np.array([idx])
        I, J, K = np.meshgrid(*grids, indexing="ij")
        nodes = np.ravel_multi_index((I.ravel(), J.ravel(), K.ravel()), grid.n)
        rows.append(f.start + np.arange(nodes.size))
        cols.append(nodes)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    S = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(E, grid.size))
    return _component_block(S)


def neumann_matrix(grid):
    E = num_boundary_entries(grid)
    rows, cols, vals = [], [], []
    for f in boundary_faces(grid):
        D = derivative_matrix(grid.n[f.axis], grid.h[f.axis], 1)
        row = (D[0] if f.side == 0 else D[-1]) * f.normal[f.axis]
        others = [a for a in range(3) if a != f.axis]
        B, C = np.meshgrid(np.arange(grid.n[others[0]]), np.arange(grid.n[others[1]]), indexing="ij")
        entry = f.start + np.arange(B.size)
        for j in np.nonzero(row)[0]:
            idx = [None, None, None]
            idx[f.axis] = np.full(B.size, j)
            idx[others[0]] = B.ravel()
            idx[others[1]] = C.ravel()
            rows.append(entry)
            cols.append(np.ravel_multi_index(tuple(idx), grid.n))
            vals.append(np.full(B.size, row[j]))
    S = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(E, grid.size))
    return _component_block(S)


def tangential_curl_matrix(grid):
    E = num_boundary_entries(grid)
    normals = np.zeros((E, 3))
    for f in boundary_faces(grid):
        normals[f.start:f.start + f.shape[0] * f.shape[1]] = f.normal
    # a x nu as a 3x3 block per entry
    blocks = []
    for e in range(E):
        nx, ny, nz = normals[e]
        blocks.append(np.array([[0.0, nz, -ny], [-nz, 0.0, nx], [ny, -nx, 0.0]]))
    X = sp.block_diag(blocks, format="csr")
    return sp.csr_matrix(X @ dirichlet_matrix(grid) @ curl_matrix(grid))


def trace_matrix(grid, variant):
    if variant == "normal-derivative":
        return neumann_matrix(grid)
    if variant == "tangential-curl":
        return tangential_curl_matrix(grid)
    raise ValueError(variant)


def h3_matrix(grid):
    """``h^3 sum_alpha (D^alpha)^T D^alpha`` for one scalar component."""
    acc = sp.csr_matrix((grid.size, grid.size))
    for alpha in MULTI_INDICES:
        D = derivative_alpha_matrix(grid, alpha)
        acc = acc + D.T @ D
    return grid.cell_volume * acc


def system_matrix(grid, eps, s, variant="normal-derivative", mu=None):
    """Weighted linear part ``A`` of the residual bundle for all modes.

    Unknowns are ordered (mode, component, node); rows are the interior
    block of every mode, then the Dirichlet block of every mode, then the
    second-trace block of every mode.
    """
    M = s.shape[0]
    CC = curl_curl_matrix(grid, mu)
    eps_diag = sp.diags(np.tile(np.asarray(eps, dtype=float).ravel() * np.ones(grid.size), 3))
    interior = sp.kron(_eye(M), CC) + sp.kron(sp.csr_matrix(s), eps_diag)
    wv = sp.diags(np.tile(np.sqrt(grid.cell_volume) * ~boundary_mask(grid).ravel(), 3 * M))
    wf = sp.diags(np.repeat(np.sqrt(face_weights(grid).ravel()), 3))
    Dm = sp.kron(_eye(M), wf @ dirichlet_matrix(grid))
    Nm = sp.kron(_eye(M), wf @ trace_matrix(grid, variant))
    return sp.vstack([wv @ interior, Dm, Nm], format="csr")


def normal_matrix(grid, eps, s, epsilon_reg, variant="normal-derivative", mu=None):
    A = system_matrix(grid, eps, s, variant, mu)
    L = sp.kron(_eye(3 * s.shape[0]), h3_matrix(grid))
    return sp.csr_matrix(A.T @ A + epsilon_reg * L)

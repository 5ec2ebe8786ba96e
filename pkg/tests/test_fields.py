import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxwell_tdr import assembly
from maxwell_tdr.errors import ConfigurationError, MediumError, ShapeError
from maxwell_tdr.fields import (
    FACE_NAMES,
    MULTI_INDICES,
    OPERATORS,
    Grid3,
    MediumFields,
    VectorGrid,
    boundary_faces,
    curl,
    curl_curl,
    derivative,
    derivative_matrix,
    dirichlet_trace,
    face_block,
    face_weights,
    fd_weights,
    get_operator,
    h3_apply,
    h3_diagonal,
    h3_inner,
    neumann_trace,
    num_boundary_entries,
    tangential_curl_trace,
    transpose_apply,
)
from maxwell_tdr.phantoms import reference_medium

G5 = Grid3.cube(5)
G7 = Grid3.cube(7)


def field(grid, fx=0.0, fy=0.0, fz=0.0):
    X, Y, Z = grid.mesh()
    comps = [f(X, Y, Z) if callable(f) else np.full(grid.n, float(f)) for f in (fx, fy, fz)]
    return np.stack(comps)


# -- grid ---------------------------------------------------------------------


def test_grid_spacing_and_nodes():
    g = Grid3.cube(20)
    assert g.h == pytest.approx((2 / 19,) * 3)
    assert g.coords(0)[0] == -1.0 and g.coords(0)[-1] == pytest.approx(1.0)
    assert g.coords(1)[7] == -1.0 + 7 * (2 / 19)


def test_grid_rejects_bad_sizes():
    with pytest.raises(ConfigurationError):
        Grid3.cube(3)
    with pytest.raises(ConfigurationError):
        Grid3((0, 0, 0), (1, -1, 1), (5, 5, 5))


def test_trace_layout_counts():
    g = Grid3.cube(20)
    assert num_boundary_entries(g) == 6 * 400
    # distinct boundary nodes; edges and corners repeat across faces
    assert g.size - 18 ** 3 == 6 * 20 ** 2 - 12 * 20 + 8 == 2168
    assert [f.name for f in boundary_faces(g)] == list(FACE_NAMES)
    assert np.all(face_weights(g) == pytest.approx((2 / 19) ** 2))


def test_vector_grid_shape_check():
    with pytest.raises(ShapeError):
        VectorGrid(G5, np.zeros((3, 4, 5, 5)))


def test_medium_must_be_positive():
    with pytest.raises(MediumError):
        MediumFields(np.zeros(G5.n), np.ones(G5.n))
    with pytest.raises(MediumError):
        curl_curl(np.zeros((3,) + G5.n), G5, -np.ones(G5.n))


# -- stencils -----------------------------------------------------------------


def test_fd_weights_classic():
    assert fd_weights([-1, 0, 1], 1) == pytest.approx([-0.5, 0.0, 0.5])
    assert fd_weights([-1, 0, 1], 2) == pytest.approx([1.0, -2.0, 1.0])
    assert fd_weights([0, 1, 2], 1) == pytest.approx([-1.5, 2.0, -0.5])


@pytest.mark.parametrize("order", [1, 2, 3])
def test_derivative_matrix_polynomial_exactness(order):
    n, h = 9, 0.25
    x = np.arange(n) * h
    D = derivative_matrix(n, h, order)
    # every window has at least order + 2 points, so degree order + 1 is exact
    for deg in range(order + 2):
        want = np.zeros(n) if deg < order else np.prod(np.arange(deg - order + 1, deg + 1)) * x ** (deg - order)
        np.testing.assert_allclose(D @ x ** deg, want, atol=1e-9 * max(1, np.abs(want).max()))


# -- curl ---------------------------------------------------------------------


def test_curl_examples():
    assert np.abs(curl(field(G5, 1.0, -2.0, 3.0), G5)).max() < 1e-12
    c = curl(field(G5, 0, 0, lambda x, y, z: x), G5)
    np.testing.assert_allclose(c[1], -1.0, atol=1e-12)
    assert np.abs(c[0]).max() < 1e-12 and np.abs(c[2]).max() < 1e-12
    v = field(G5, lambda x, y, z: y * z, lambda x, y, z: z * x, lambda x, y, z: x * y)
    assert np.abs(curl(v, G5)).max() < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_curl_exact_for_per_axis_quadratics(seed):
    rng = np.random.default_rng(seed)
    g = Grid3((-1, -0.5, 0), (1, 1, 0.7), (6, 7, 5))
    X, Y, Z = g.mesh()
    exps = [(a, b, c) for a in range(3) for b in range(3) for c in range(3)]
    coef = rng.standard_normal((3, len(exps)))

    def poly(k, dx=0, dy=0, dz=0):
        out = np.zeros(g.n)
        for co, (a, b, c) in zip(coef[k], exps):
            term = co
            for p, d, V in ((a, dx, X), (b, dy, Y), (c, dz, Z)):
                if d > p:
                    term = 0.0
                    break
                term = term * (p if d else 1) * V ** (p - d)
            out = out + term
        return out

    v = np.stack([poly(0), poly(1), poly(2)])
    want = np.stack([
        poly(2, dy=1) - poly(1, dz=1),
        poly(0, dz=1) - poly(2, dx=1),
        poly(1, dx=1) - poly(0, dy=1),
    ])
    np.testing.assert_allclose(curl(v, g), want, atol=1e-9 * (1 + np.abs(want).max()))


def test_curl_curl_examples():
    assert np.abs(curl_curl(field(G5, 2.0, 1.0, 0.5), G5)).max() < 1e-12
    out = curl_curl(field(G5, lambda x, y, z: y * y), G5)
    np.testing.assert_allclose(out[0], -2.0, atol=1e-10)
    assert np.abs(out[1:]).max() < 1e-10


def test_curl_curl_matches_assembly_with_reference_mu():
    med = reference_medium(G5)
    v = np.random.default_rng(0).standard_normal((3,) + G5.n)
    M = assembly.curl_curl_matrix(G5, med.mu).toarray()
    got = curl_curl(v, G5, med).ravel()
    assert np.abs(got - M @ v.ravel()).max() <= 1e-12 * max(1.0, np.abs(got).max())


def test_curl_curl_batched():
    v = np.random.default_rng(1).standard_normal((4, 3) + G5.n)
    out = curl_curl(v, G5)
    for k in range(4):
        np.testing.assert_allclose(out[k], curl_curl(v[k], G5), rtol=0, atol=1e-12)


def test_curl_locality():
    g = Grid3.cube(9)
    for p in [(4, 4, 4), (0, 3, 8), (1, 1, 7)]:
        v = np.zeros((3,) + g.n)
        v[(1,) + p] = 1.0
        changed = np.argwhere(np.any(curl(v, g) != 0, axis=0))
        assert np.all(np.abs(changed - np.array(p)) <= 2)


# -- traces ---------------------------------------------------------------------


def test_dirichlet_trace_examples():
    assert np.all(dirichlet_trace(np.zeros((3,) + G5.n), G5) == 0)
    tr = dirichlet_trace(field(G5, lambda x, y, z: x), G5)
    xp = face_block(tr, G5, "x+")
    np.testing.assert_allclose(xp[0], 1.0)


def test_dirichlet_trace_random_nodes():
    g = Grid3((-1, -2, 0), (1, 0, 3), (6, 5, 7))
    v = np.random.default_rng(2).standard_normal((3,) + g.n)
    tr = dirichlet_trace(v, g)
    rng = np.random.default_rng(5)
    faces = boundary_faces(g)
    for _ in range(20):
        f = faces[rng.integers(6)]
        i, j = rng.integers(f.shape[0]), rng.integers(f.shape[1])
        node = [0, 0, 0]
        others = [a for a in range(3) if a != f.axis]
        node[f.axis] = 0 if f.side == 0 else g.n[f.axis] - 1
        node[others[0]], node[others[1]] = i, j
        entry = f.start + i * f.shape[1] + j
        np.testing.assert_array_equal(tr[entry], v[(slice(None),) + tuple(node)])


def test_neumann_trace_examples():
    assert np.abs(neumann_trace(field(G5, 1.0, 2.0, 3.0), G5)).max() < 1e-12
    tr = neumann_trace(field(G5, lambda x, y, z: x), G5)
    np.testing.assert_allclose(face_block(tr, G5, "x+")[0], 1.0, atol=1e-12)
    np.testing.assert_allclose(face_block(tr, G5, "x-")[0], -1.0, atol=1e-12)
    tr = neumann_trace(field(G5, lambda x, y, z: x * x), G5)
    np.testing.assert_allclose(face_block(tr, G5, "x+")[0], 2.0, atol=1e-12)
    np.testing.assert_allclose(face_block(tr, G5, "x-")[0], 2.0, atol=1e-12)


def test_tangential_curl_trace_is_tangential():
    v = np.random.default_rng(3).standard_normal((3,) + G5.n)
    tr = tangential_curl_trace(v, G5)
    for f in boundary_faces(G5):
        blk = face_block(tr, G5, f)
        assert np.abs(blk[f.axis]).max() < 1e-12


# -- H^3 --------------------------------------------------------------------------


def test_multi_indices():
    assert len(MULTI_INDICES) == 20
    assert (0, 0, 0) in MULTI_INDICES and (1, 1, 1) in MULTI_INDICES and (0, 0, 3) in MULTI_INDICES


def test_h3_inner_examples():
    c = 1.7
    u = field(G5, c)
    vol = G5.size * G5.cell_volume
    assert h3_inner(u, u, G5) == pytest.approx(c * c * vol, rel=1e-12)
    X, _, _ = G5.mesh()
    u = field(G5, lambda x, y, z: x)
    want = G5.cell_volume * (np.sum(X * X) + G5.size)
    assert h3_inner(u, u, G5) == pytest.approx(want, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_h3_inner_symmetric_and_dominates_l2(seed):
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, 3) + G5.n)
    a, b = h3_inner(u, v, G5), h3_inner(v, u, G5)
    assert abs(a - b) <= 1e-14 * max(1.0, abs(a)) * 100
    assert h3_inner(u, u, G5) >= G5.cell_volume * np.sum(u * u)


def test_h3_apply_matches_inner_and_assembly():
    rng = np.random.default_rng(4)
    u, v = rng.standard_normal((2, 3) + G5.n)
    assert np.sum(h3_apply(u, G5) * v) == pytest.approx(h3_inner(u, v, G5), rel=1e-11)
    L = assembly.h3_matrix(G5).toarray()
    np.testing.assert_allclose(h3_apply(u, G5)[1].ravel(), L @ u[1].ravel(), rtol=1e-11, atol=1e-9)
    np.testing.assert_allclose(h3_diagonal(G5).ravel(), np.diag(L), rtol=1e-12)


def test_derivative_alpha_matches_assembly():
    g = Grid3((-1, 0, 0), (1, 1, 2), (6, 5, 7))
    s = np.random.default_rng(6).standard_normal(g.n)
    for alpha in MULTI_INDICES:
        D = assembly.derivative_alpha_matrix(g, alpha)
        np.testing.assert_allclose(derivative(s, g, alpha).ravel(), D @ s.ravel(), rtol=1e-10, atol=1e-8)


# -- adjoints ----------------------------------------------------------------------


def _spaces(op, grid, rng, batch=()):
    u = rng.standard_normal(batch + (3,) + grid.n)
    if op.out_space == "face":
        w = rng.standard_normal(batch + (num_boundary_entries(grid), 3))
    else:
        w = rng.standard_normal(batch + (3,) + grid.n)
    return u, w


def _in_inner(op, a, b, grid):
    if op.in_space == "volume":
        return grid.cell_volume * float(np.sum(a * b))
    return float(np.sum(face_weights(grid) * a * b))


@pytest.mark.parametrize("name", sorted(OPERATORS))
def test_adjoint_identity(name):
    op = get_operator(name)
    rng = np.random.default_rng(sorted(OPERATORS).index(name))
    for _ in range(20):
        u, w = _spaces(op, G7, rng)
        Au = op(u, G7)
        lhs = op.inner(Au, w, G7)
        rhs = _in_inner(op, u, transpose_apply(op, w, G7), G7)
        scale = np.sqrt(op.inner(Au, Au, G7) * op.inner(w, w, G7)) + 1.0
        assert abs(lhs - rhs) <= 1e-10 * scale


@pytest.mark.parametrize("name", ["curl", "neumann_trace", "tangential_curl_trace", "D120"])
def test_adjoint_on_non_cubic_batched_grid(name):
    g = Grid3((-1, 0, 2), (0.5, 2, 3), (5, 8, 6))
    op = get_operator(name)
    rng = np.random.default_rng(9)
    u, w = _spaces(op, g, rng, batch=(2,))
    lhs = op.inner(op(u, g), w, g)
    rhs = _in_inner(op, u, op.adjoint(w, g), g)
    assert abs(lhs - rhs) <= 1e-10 * (abs(lhs) + 1)


def test_curl_transpose_on_constant():
    rng = np.random.default_rng(10)
    u = rng.standard_normal((3,) + G7.n)
    w = field(G7, 1.0, -1.0, 2.0)
    op = get_operator("curl")
    lhs = op.inner(curl(u, G7), w, G7)
    rhs = _in_inner(op, u, transpose_apply("curl", w, G7), G7)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("name", ["curl", "dirichlet_trace", "neumann_trace", "D003"])
def test_transpose_of_transpose(name):
    op = get_operator(name)
    rng = np.random.default_rng(11)
    u, _ = _spaces(op, G7, rng)
    np.testing.assert_allclose(op.T.T(u, G7), op(u, G7), rtol=1e-12, atol=1e-12)
    # and the adjoint of the adjoint acts like the operator itself
    np.testing.assert_allclose(op.T.adjoint(u, G7), op(u, G7), rtol=1e-12, atol=1e-10)


def test_unregistered_operator():
    with pytest.raises(ConfigurationError):
        get_operator("laplacian")
    with pytest.raises(ConfigurationError):
        transpose_apply((4, 0, 0), np.zeros((3,) + G5.n), G5)


def test_trace_assembly_agrees():
    g = Grid3((-1, 0, 0), (1, 1, 2), (5, 6, 7))
    v = np.random.default_rng(12).standard_normal((3,) + g.n)
    for fn, M in ((dirichlet_trace, assembly.dirichlet_matrix(g)),
                  (neumann_trace, assembly.neumann_matrix(g)),
                  (tangential_curl_trace, assembly.tangential_curl_matrix(g))):
        np.testing.assert_allclose(fn(v, g).ravel(), M @ v.ravel(), rtol=1e-11, atol=1e-10)

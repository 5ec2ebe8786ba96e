import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxwell_tdr.assembly import normal_matrix, system_matrix
from maxwell_tdr.basis import BasisSet
from maxwell_tdr.data import ModeData
from maxwell_tdr.errors import ConfigurationError, ShapeError
from maxwell_tdr.fields import Grid3, VectorGrid, h3_inner
from maxwell_tdr.inverse import (
    ModeStack,
    QRConfig,
    QRProblem,
    SolveReport,
    cg_solve,
    functional,
    invert,
    normal_apply,
    reconstruct_initial,
    residual_bundle,
    rhs_assemble,
)
from maxwell_tdr.phantoms import reference_medium

T = 2.5


def make_problem(n, N, variant="normal-derivative", eps_reg=1e-6, medium=True):
    g = Grid3.cube(n)
    med = reference_medium(g) if medium else None
    cfg = QRConfig(N=N, epsilon_reg=eps_reg, trace_variant=variant)
    return QRProblem(g, med, BasisSet(N, T), cfg)


def random_modes(P, seed):
    rng = np.random.default_rng(seed)
    md = ModeData.zeros(P.grid, P.config.N, P.config.trace_variant)
    md.f[...] = rng.standard_normal(md.f.shape)
    md.g[...] = rng.standard_normal(md.g.shape)
    return md


def dense_system(P):
    A = system_matrix(P.grid, P.medium.eps, P.s, P.config.trace_variant, P.medium.mu).toarray()
    Nmat = normal_matrix(P.grid, P.medium.eps, P.s, P.config.epsilon_reg,
                         P.config.trace_variant, P.medium.mu).toarray()
    return A, Nmat


def flat_data(P, md):
    return np.concatenate([b.ravel() for b in P.data_blocks(md)])


# -- config / containers ----------------------------------------------------------


def test_config_defaults_and_errors():
    c = QRConfig()
    assert (c.N, c.epsilon_reg, c.preconditioner) == (15, 1e-6, "identity")
    with pytest.raises(ConfigurationError):
        QRConfig(epsilon_reg=-1.0)
    with pytest.raises(ConfigurationError):
        QRConfig(preconditioner="ilu")
    with pytest.raises(ConfigurationError):
        QRConfig(trace_variant="sideways")


def test_mode_stack_shape_check():
    g = Grid3.cube(4)
    assert ModeStack.zeros(g, 2).shape == (3, 3, 4, 4, 4)
    with pytest.raises(ShapeError):
        ModeStack.check(np.zeros((2, 3, 4, 4, 4)), g, 2)


def test_problem_rejects_mismatched_data():
    P = make_problem(4, 1)
    with pytest.raises(ShapeError):
        P.functional(np.zeros(P.shape), ModeData.zeros(P.grid, 2))
    with pytest.raises(ConfigurationError):
        P.functional(np.zeros(P.shape), ModeData.zeros(P.grid, 1, "tangential-curl"))


# -- functional --------------------------------------------------------------------------


def test_zero_data_zero_field():
    P = make_problem(5, 2)
    md = ModeData.zeros(P.grid, 2)
    V = np.zeros(P.shape)
    assert P.functional(V, md) == 0.0
    assert not P.rhs(md).any()
    assert all(not b.any() for b in residual_bundle(V, md, P.medium, P.basis, P.config))


def test_functional_direct_expansion():
    P = make_problem(5, 2)
    md = random_modes(P, 0)
    V = np.random.default_rng(1).standard_normal(P.shape)
    A, _ = dense_system(P)
    r = A @ V.ravel() - flat_data(P, md)
    reg = sum(h3_inner(v, v, P.grid) for v in V)
    want = r @ r + P.config.epsilon_reg * reg
    assert P.functional(V, md) == pytest.approx(want, rel=1e-12)
    assert functional(V, md, P.medium, P.basis, P.config) == pytest.approx(want, rel=1e-12)


def test_functional_is_quadratic():
    P = make_problem(5, 2)
    md = random_modes(P, 2)
    rng = np.random.default_rng(3)
    V, W = rng.standard_normal((2,) + P.shape)
    J0 = P.functional(V, md)
    g = P.gradient(V, md)
    for t in (0.5, -1.3):
        quad = t * t * (P.functional(W, ModeData.zeros(P.grid, 2)))
        assert P.functional(V + t * W, md) == pytest.approx(J0 + t * np.vdot(g, W) + quad, rel=1e-10)


# -- normal operator -----------------------------------------------------------------------


@pytest.mark.parametrize("variant", ["normal-derivative", "tangential-curl"])
def test_normal_apply_matches_dense(variant):
    P = make_problem(4, 1, variant)
    _, Nmat = dense_system(P)
    V = np.random.default_rng(4).standard_normal(P.shape)
    got = P.normal_apply(V).ravel()
    want = Nmat @ V.ravel()
    assert np.abs(got - want).max() <= 1e-11 * np.abs(want).max()
    got2 = normal_apply(V, P.grid, P.medium, P.basis, P.config).ravel()
    np.testing.assert_array_equal(got, got2)


def test_rhs_matches_dense():
    P = make_problem(4, 1)
    A, _ = dense_system(P)
    md = random_modes(P, 5)
    want = A.T @ flat_data(P, md)
    got = rhs_assemble(md, P.medium, P.basis, P.config).ravel()
    assert np.abs(got - want).max() <= 1e-11 * np.abs(want).max()


def test_normal_operator_symmetric_positive():
    P = make_problem(5, 2)
    rng = np.random.default_rng(6)
    for _ in range(5):
        u, v = rng.standard_normal((2,) + P.shape)
        a, b = np.vdot(P.normal_apply(u), v), np.vdot(u, P.normal_apply(v))
        assert abs(a - b) <= 1e-10 * max(abs(a), 1.0)
        # coercive: at least epsilon_reg times the h3 norm
        assert np.vdot(P.normal_apply(u), u) >= P.config.epsilon_reg * P.regularizer(u) * (1 - 1e-12)


def test_diagonal_is_exact():
    for variant in ("normal-derivative", "tangential-curl"):
        P = make_problem(5, 2, variant)
        _, Nmat = dense_system(P)
        np.testing.assert_allclose(P.diagonal().ravel(), np.diag(Nmat), rtol=1e-12, atol=1e-14)


def test_dense_solution_and_stationarity():
    P = make_problem(4, 1)
    _, Nmat = dense_system(P)
    md = random_modes(P, 7)
    b = P.rhs(md).ravel()
    x_dense = np.linalg.solve(Nmat, b)
    grad = P.gradient(x_dense.reshape(P.shape), md)
    assert np.abs(grad).max() <= 1e-8 * np.abs(b).max()
    for pre in ("identity", "jacobi"):
        diag = P.diagonal() if pre == "jacobi" else None
        x, rep = cg_solve(P.normal_apply, b.reshape(P.shape), tol=1e-13, max_iter=20000, diag=diag)
        assert rep.converged
        assert np.linalg.norm(x.ravel() - x_dense) <= 1e-8 * np.linalg.norm(x_dense)


def test_gradient_finite_differences():
    P = make_problem(5, 3)
    md = random_modes(P, 8)
    rng = np.random.default_rng(9)
    V = rng.standard_normal(P.shape)
    g = P.gradient(V, md)
    for _ in range(10):
        W = rng.standard_normal(P.shape)
        h = 1e-4
        fd = (P.functional(V + h * W, md) - P.functional(V - h * W, md)) / (2 * h)
        assert abs(fd - np.vdot(g, W)) <= 1e-6 * abs(np.vdot(g, W))


# -- CG ------------------------------------------------------------------------------------------------


def test_cg_identity_one_iteration():
    b = np.random.default_rng(0).standard_normal(40)
    x, rep = cg_solve(lambda v: v, b, tol=1e-12)
    assert rep.iterations == 1 and rep.converged
    np.testing.assert_allclose(x, b, atol=1e-14)


def test_cg_zero_rhs():
    x, rep = cg_solve(lambda v: 2 * v, np.zeros(7))
    assert rep.converged and rep.iterations == 0 and not x.any()


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_cg_random_spd(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((50, 50))
    A = M @ M.T + 0.5 * np.eye(50)
    b = rng.standard_normal(50)
    x, rep = cg_solve(lambda v: A @ v, b, tol=1e-12, max_iter=2000)
    assert rep.converged
    np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=1e-7, atol=1e-8)
    xj, _ = cg_solve(lambda v: A @ v, b, tol=1e-12, max_iter=2000, diag=np.diag(A))
    np.testing.assert_allclose(xj, x, rtol=1e-7, atol=1e-8)


def test_cg_energy_error_decreases():
    P = make_problem(5, 2)
    _, Nmat = dense_system(P)
    md = random_modes(P, 10)
    b = P.rhs(md)
    x_star = np.linalg.solve(Nmat, b.ravel())
    errs = []

    def track(k, x):
        e = x.ravel() - x_star
        errs.append(e @ (Nmat @ e))

    cg_solve(P.normal_apply, b, tol=1e-12, max_iter=200, callback=track)
    assert len(errs) > 10
    assert all(b_ < a_ for a_, b_ in zip(errs, errs[1:]))


def test_cg_exhaustion_returns_best():
    P = make_problem(5, 2)
    b = P.rhs(random_modes(P, 11))
    x, rep = cg_solve(P.normal_apply, b, tol=1e-14, max_iter=5)
    assert not rep.converged and rep.iterations == 5
    r = np.linalg.norm(b - P.normal_apply(x)) / np.linalg.norm(b)
    assert r == pytest.approx(min(rep.residual_history), rel=1e-6)


def test_report_roundtrip():
    rep = SolveReport(3, [1.0, 0.5, 0.1, 0.01], 2.5, 0.1, True, "jacobi")
    d = rep.to_dict()
    assert d["iterations"] == 3 and d["converged"] and d["preconditioner"] == "jacobi"


# -- reconstruction -----------------------------------------------------------------------------------------


def test_reconstruct_examples():
    g = Grid3.cube(4)
    basis = BasisSet(15, T)
    W = np.random.default_rng(0).standard_normal((3,) + g.n)
    V = np.zeros((16, 3) + g.n)
    V[0] = W
    np.testing.assert_allclose(reconstruct_initial(V, basis), 0.6324555320336759 * W, rtol=1e-14)
    V = np.zeros((16, 3) + g.n)
    V[1] = W
    np.testing.assert_allclose(reconstruct_initial(V, basis), -math.sqrt(3 / T) * W, rtol=1e-14)
    assert isinstance(reconstruct_initial(V, basis, g), VectorGrid)
    with pytest.raises(ShapeError):
        reconstruct_initial(V[:3], basis)


def test_regularization_monotone():
    # larger epsilon_reg never increases the h3 norm of the minimizer
    g = Grid3.cube(4)
    norms = []
    for eps_reg in (1e-6, 1e-4, 1e-2, 1.0):
        P = QRProblem(g, reference_medium(g), BasisSet(1, T), QRConfig(N=1, epsilon_reg=eps_reg))
        _, Nmat = dense_system(P)
        x = np.linalg.solve(Nmat, P.rhs(random_modes(P, 12)).ravel())
        norms.append(P.regularizer(x.reshape(P.shape)))
    assert all(b <= a * (1 + 1e-9) for a, b in zip(norms, norms[1:]))


def test_invert_minimizes():
    # the returned stack beats the generating stack and zero
    P = make_problem(5, 2, eps_reg=1e-10)
    rng = np.random.default_rng(13)
    V_true = rng.standard_normal(P.shape)
    AV = P.apply_A(V_true)
    md = ModeData.zeros(P.grid, 2)
    md.f[...] = AV[1] / P.wf
    md.g[...] = AV[2] / P.wf
    cfg = QRConfig(N=2, epsilon_reg=1e-10, cg_tol=1e-12, cg_max_iter=20000, preconditioner="jacobi")
    E, V, rep = invert(md, P.medium, P.basis, cfg)
    assert rep.converged
    assert rep.functional <= P.functional(V_true, md)
    assert rep.functional <= P.functional(np.zeros(P.shape), md)
    assert np.abs(P.gradient(V, md)).max() <= 1e-8 * np.abs(P.rhs(md)).max()
    np.testing.assert_allclose(E.values, reconstruct_initial(V, P.basis))

import numpy as np
import pytest

from oracles import torsion_exact
from pxlap.errors import HypothesisError
from pxlap.exponents import ExponentField
from pxlap.mesh import GridFunction, build_interval_mesh, build_rectangle_mesh
from pxlap.operator import (
    OperatorContext,
    assemble_jacobian,
    assemble_residual,
    comparison_check,
    dirichlet_solve,
    dual_norm,
    linear_poisson_solve,
    mean_value_constant,
    picone,
)
from conftest import random_dirichlet_field


def test_residual_zero_state(ctx2_64, mesh64):
    r = assemble_residual(ctx2_64, GridFunction.zeros(mesh64), rhs=0.0)
    assert np.max(np.abs(r)) == 0.0


def test_residual_at_discrete_solution(ctx2_64, mesh64):
    # p = 2: the linear solve is the oracle; its residual must vanish
    u = linear_poisson_solve(mesh64, 1.0)
    r = assemble_residual(ctx2_64, u, rhs=1.0)
    assert np.max(np.abs(r)) < 1e-12


def test_residual_load_of_constant(ctx2_64, mesh64):
    # u = 0, rhs = 1: each interior entry is minus the hat integral -h
    r = assemble_residual(ctx2_64, GridFunction.zeros(mesh64), rhs=1.0)
    h = 1.0 / 64
    assert np.allclose(r, -h, atol=1e-15)


def test_dirichlet_solve_zero_rhs(ctx2_64):
    rep = dirichlet_solve(ctx2_64, 0.0)
    assert rep.converged
    assert np.max(np.abs(rep.u.values)) == 0.0


def test_dirichlet_solve_p2_closed_form(ctx2_64, mesh64):
    rep = dirichlet_solve(ctx2_64, 1.0)
    exact = mesh64.nodes[:, 0] * (1.0 - mesh64.nodes[:, 0]) / 2.0
    assert rep.converged
    # P1 on the linear problem is nodally exact up to round-off here
    assert np.max(np.abs(rep.u.values - exact)) < 1e-12


def test_dirichlet_solve_p3_oracle():
    mesh = build_interval_mesh(0.0, 1.0, 512)
    ctx = OperatorContext(mesh, ExponentField(mesh, 3.0))
    rep = dirichlet_solve(ctx, 1.0)
    assert rep.converged
    exact = torsion_exact(3.0, mesh.nodes[:, 0])
    assert np.max(np.abs(rep.u.values - exact)) < 1e-4


def test_dirichlet_solve_sublinear_exponent():
    mesh = build_interval_mesh(0.0, 1.0, 128)
    ctx = OperatorContext(mesh, ExponentField(mesh, 1.5))
    rep = dirichlet_solve(ctx, 1.0)
    assert rep.converged
    exact = torsion_exact(1.5, mesh.nodes[:, 0])
    assert np.max(np.abs(rep.u.values - exact)) < 1e-3


def test_nonconvergence_is_reported_not_raised(mesh64, p2_64):
    ctx = OperatorContext(mesh64, p2_64, newton_max_iter=0)
    rep = dirichlet_solve(ctx, 1.0, initial=GridFunction.zeros(mesh64))
    assert not rep.converged
    assert rep.residual > 0


def test_comparison_equal_rhs(ctx2_64):
    rep = comparison_check(ctx2_64, 1.0, 1.0)
    assert rep.passed
    assert abs(rep.max_violation) < 1e-10


def test_comparison_p2_closed_forms(ctx2_64, mesh64):
    rep = comparison_check(ctx2_64, 1.0, 2.0)
    assert rep.passed
    x = mesh64.nodes[:, 0]
    gap = rep.report_high.u.values - rep.report_low.u.values
    assert np.max(np.abs(gap - x * (1 - x) / 2.0)) < 1e-12


def test_comparison_variable_exponent(ctxvar_64):
    rep = comparison_check(ctxvar_64, 1.0, lambda pts: 1.0 + pts[:, 0])
    assert rep.passed


def test_comparison_rejects_unordered(ctx2_64):
    with pytest.raises(ValueError):
        comparison_check(ctx2_64, 2.0, 1.0)


def test_mean_value_constant_recovers_constant(ctxvar_64, mesh64):
    phi = GridFunction(
        mesh64, mesh64.nodes[:, 0] * (1 - mesh64.nodes[:, 0]), dirichlet_zero=True
    )
    khat = mean_value_constant(ctxvar_64, 1.4, 1.0, 2.0, h=1.0, phi=phi)
    assert khat == pytest.approx(1.4, abs=1e-12)


def test_mean_value_unit_power_multiplier(ctxvar_64, mesh64, eig2_64):
    # multiplier C^(p(x)-1) with C = 1 is identically one
    phi = eig2_64.phi
    k_qp = np.ones((mesh64.n_elements, mesh64.n_qp))
    khat = mean_value_constant(ctxvar_64, k_qp, 0.5, 1.5, h=1.0, phi=phi)
    assert khat == pytest.approx(1.0, abs=1e-12)


def test_mean_value_random_multipliers(ctxvar_64, mesh64, eig2_64, rng):
    phi = eig2_64.phi
    for _ in range(20):
        nodal = 1.0 + 0.98 * rng.random(mesh64.n_nodes) + 0.01
        k = GridFunction(mesh64, np.clip(nodal, 1.0 + 1e-6, 2.0 - 1e-6))
        khat = mean_value_constant(ctxvar_64, k.at_qp(), 1.0, 2.0, h=1.0, phi=phi)
        assert 1.0 < khat < 2.0


def test_mean_value_rejects_nonpositive_source(ctx2_64, mesh64):
    phi = GridFunction(
        mesh64, mesh64.nodes[:, 0] * (1 - mesh64.nodes[:, 0]), dirichlet_zero=True
    )
    with pytest.raises(HypothesisError):
        mean_value_constant(ctx2_64, 1.5, 1.0, 2.0, h=-1.0, phi=phi)


def test_picone_equal_arguments(mesh64, pvar_64, rng):
    # algebraic cancellation 1 + (p-1) - p = 0, up to round-off in the
    # |grad w|^p terms themselves
    w = GridFunction(mesh64, 0.5 + rng.random(mesh64.n_nodes))
    L1, L2 = picone(w, w, pvar_64)
    scale = np.maximum(w.grad_magnitude_qp() ** pvar_64.at_qp(), 1.0)
    assert np.max(np.abs(L1) / scale) < 1e-12
    assert np.max(np.abs(L2) / scale) < 1e-12


def test_picone_zero_numerator(mesh64, pvar_64, rng):
    w2 = GridFunction(mesh64, 0.5 + rng.random(mesh64.n_nodes))
    L1, _ = picone(GridFunction.zeros(mesh64), w2, pvar_64)
    assert np.max(np.abs(L1)) < 1e-15


def test_picone_identity_and_sign(mesh64, pvar_64, rng):
    for _ in range(100):
        w1 = GridFunction(mesh64, np.abs(rng.standard_normal(mesh64.n_nodes)))
        w2 = GridFunction(mesh64, 0.3 + np.abs(rng.standard_normal(mesh64.n_nodes)))
        L1, L2 = picone(w1, w2, pvar_64)
        scale = np.maximum(np.abs(L1), 1.0)
        assert np.max(np.abs(L1 - L2) / scale) <= 1e-8
        assert np.min(L1) >= -1e-10


def test_picone_rejects_vanishing_denominator(mesh64, pvar_64):
    w1 = GridFunction(mesh64, np.ones(mesh64.n_nodes))
    w2 = GridFunction(mesh64, np.zeros(mesh64.n_nodes))
    with pytest.raises(HypothesisError):
        picone(w1, w2, pvar_64)


def test_picone_grad_p_mode_differs(mesh64, pvar_64, rng):
    w1 = GridFunction(mesh64, 0.5 + rng.random(mesh64.n_nodes))
    w2 = GridFunction(mesh64, 0.5 + rng.random(mesh64.n_nodes))
    _, L2_frozen = picone(w1, w2, pvar_64)
    _, L2_full = picone(w1, w2, pvar_64, include_grad_p=True)
    assert np.max(np.abs(L2_frozen - L2_full)) > 0  # sensitivity mode differs


def _dense_fd_jacobian(ctx, values, rhs_qp, eps, step=1e-6):
    interior = ctx.mesh.interior_nodes
    from pxlap.operator import _residual_full

    n = len(interior)
    J = np.zeros((n, n))
    for col, node in enumerate(interior):
        up = values.copy()
        up[node] += step
        dn = values.copy()
        dn[node] -= step
        ru = _residual_full(ctx, up, rhs_qp, eps)[interior]
        rd = _residual_full(ctx, dn, rhs_qp, eps)[interior]
        J[:, col] = (ru - rd) / (2.0 * step)
    return J


def test_jacobian_consistency(rng):
    mesh = build_interval_mesh(0.0, 1.0, 24)
    ctx = OperatorContext(mesh, ExponentField(mesh, "2 + x"), eps_reg=1e-6)
    rhs_qp = np.zeros((mesh.n_elements, mesh.n_qp))
    for _ in range(5):
        vals = np.zeros(mesh.n_nodes)
        vals[mesh.interior_nodes] = rng.standard_normal(len(mesh.interior_nodes))
        J = assemble_jacobian(ctx, vals, eps=1e-6).toarray()
        J_fd = _dense_fd_jacobian(ctx, vals, rhs_qp, eps=1e-6)
        denom = max(np.max(np.abs(J)), 1.0)
        assert np.max(np.abs(J - J_fd)) / denom < 1e-5


def test_monotone_operator_pairing(ctxvar_64, mesh64, rng):
    for _ in range(30):
        u = random_dirichlet_field(mesh64, rng)
        v = random_dirichlet_field(mesh64, rng)
        ru = assemble_residual(ctxvar_64, u, rhs=0.0, eps_reg=0.0)
        rv = assemble_residual(ctxvar_64, v, rhs=0.0, eps_reg=0.0)
        diff = (u.values - v.values)[mesh64.interior_nodes]
        assert np.dot(ru - rv, diff) >= -1e-12


def test_discrete_maximum_principle(ctx2_64, ctxvar_64, mesh64):
    for ctx in (ctx2_64, ctxvar_64):
        rep = dirichlet_solve(ctx, lambda pts: 1.0 + np.sin(3 * pts[:, 0]) ** 2)
        assert rep.converged
        assert np.all(rep.u.values[mesh64.interior_nodes] > 0)


def test_maximum_principle_2d():
    mesh = build_rectangle_mesh(0, 0, 1, 1, 8, 8)
    ctx = OperatorContext(mesh, ExponentField(mesh, 2.0))
    rep = dirichlet_solve(ctx, 1.0)
    assert np.all(rep.u.values[mesh.interior_nodes] > 0)


def test_dual_norm_scaling(mesh64):
    r = np.ones(len(mesh64.interior_nodes))
    assert dual_norm(mesh64, r) == pytest.approx(
        np.sqrt(1.0 / 64) * np.linalg.norm(r)
    )

import numpy as np
import pytest

from oracles import bratu_profile, bratu_solutions_by_shooting
from pxlap.errors import ConfigError
from pxlap.eigen import first_eigenpair
from pxlap.existence import (
    Nonlinearity,
    OrderedBox,
    benchmark_family,
    build_ordered_box,
    check_hypotheses,
    solve_in_box,
    verify_ordered_box,
)
from pxlap.exponents import ExponentField
from pxlap.mesh import GridFunction, build_interval_mesh
from pxlap.operator import OperatorContext
from pxlap.multiplicity import (
    HomotopyConfig,
    annulus_search,
    boundedness_probe,
    continuation,
    homotopy_rhs,
    nonexistence_probe,
    pair_distance,
    solve_coupled,
    solve_homotopy_system,
    sobolev_norm_or_zero,
)


@pytest.fixture(scope="module")
def system(ctx2_64, eig2_64):
    f = benchmark_family(ctx2_64, ctx2_64, eig2_64, eig2_64)
    cfg = HomotopyConfig.for_problem(ctx2_64, ctx2_64, eig2_64, eig2_64)
    return f, cfg


def test_config_gate_rejects_large_J(ctx2_64, eig2_64):
    with pytest.raises(ConfigError):
        HomotopyConfig.for_problem(ctx2_64, ctx2_64, eig2_64, eig2_64, J_fraction=0.5) \
            .validate_spectral_gate(ctx2_64, ctx2_64,
                                    type("E", (), {"lambda1": 0.1})(), eig2_64)
    cfg = HomotopyConfig(J1=100.0, J2=1.0)
    with pytest.raises(ConfigError):
        cfg.validate_spectral_gate(ctx2_64, ctx2_64, eig2_64, eig2_64)


def test_config_t_grid_validation():
    with pytest.raises(ConfigError):
        HomotopyConfig(t_grid=(0.0, 1.5))
    with pytest.raises(ConfigError):
        HomotopyConfig(t_grid=(0.1, 0.5, 1.0))
    with pytest.raises(ConfigError):
        HomotopyConfig(family="delta", delta=None)


def test_families_coincide_at_t1(system, ctx2_64, eig2_64):
    f, cfg = system
    cfg_d = HomotopyConfig.for_problem(
        ctx2_64, ctx2_64, eig2_64, eig2_64, family="delta", delta=1e-3
    )
    u = eig2_64.phi
    pts = ctx2_64.mesh.quad_points.reshape(-1, 1)
    s = u.at_qp().ravel()
    g1t, _ = homotopy_rhs(cfg, 1.0, u, u, f, ctx2_64, ctx2_64, eig2_64, eig2_64)
    g1d, _ = homotopy_rhs(cfg_d, 1.0, u, u, f, ctx2_64, ctx2_64, eig2_64, eig2_64)
    assert np.max(np.abs(g1t(pts, s, s) - g1d(pts, s, s))) <= 1e-14


def test_rhs_at_t0(system, ctx2_64, eig2_64):
    f, cfg = system
    zero = GridFunction.zeros(ctx2_64.mesh)
    pts = ctx2_64.mesh.quad_points.reshape(-1, 1)
    s0 = np.zeros(len(pts))
    g1, g2 = homotopy_rhs(cfg, 0.0, zero, zero, f, ctx2_64, ctx2_64, eig2_64, eig2_64)
    assert np.max(np.abs(g1(pts, s0, s0))) == 0.0
    cfg_d = HomotopyConfig.for_problem(
        ctx2_64, ctx2_64, eig2_64, eig2_64, family="delta", delta=1e-3
    )
    g1d, _ = homotopy_rhs(cfg_d, 0.0, zero, zero, f, ctx2_64, ctx2_64, eig2_64, eig2_64)
    vals = g1d(pts, s0, s0)
    interior = (pts[:, 0] > 1e-3) & (pts[:, 0] < 1 - 1e-3)
    assert np.all(vals[interior] > 0)


def test_delta_family_dominates_tilde(system, ctx2_64, eig2_64, rng):
    f, cfg = system
    cfg_d = HomotopyConfig.for_problem(
        ctx2_64, ctx2_64, eig2_64, eig2_64, family="delta", delta=1e-3
    )
    u = eig2_64.phi
    pts = ctx2_64.mesh.quad_points.reshape(-1, 1)
    s = np.abs(rng.standard_normal(len(pts)))
    for t in (0.0, 0.3, 0.9):
        g_t, _ = homotopy_rhs(cfg, t, u, u, f, ctx2_64, ctx2_64, eig2_64, eig2_64)
        g_d, _ = homotopy_rhs(cfg_d, t, u, u, f, ctx2_64, ctx2_64, eig2_64, eig2_64)
        diff = g_d(pts, s, s) - g_t(pts, s, s)
        expected = (1.0 - t) * cfg_d.delta * eig2_64.lambda1 * (
            eig2_64.phi.eval(pts) ** (ctx2_64.p.evaluate(pts) - 1.0)
        )
        assert np.allclose(diff, expected, atol=1e-14)
        interior = (pts[:, 0] > 1e-3) & (pts[:, 0] < 1 - 1e-3)
        assert np.all(diff[interior] > 0)


def test_tilde_t0_trivial(system, ctx2_64, eig2_64):
    f, cfg = system
    for scale in (0.0, 0.5, 3.0):
        seed = eig2_64.phi.with_values(scale * eig2_64.phi.values)
        rep = solve_homotopy_system(cfg, 0.0, f, ctx2_64, ctx2_64, eig2_64, eig2_64, seed, seed)
        assert rep.converged
        norm = sobolev_norm_or_zero(rep.u1, ctx2_64) + sobolev_norm_or_zero(rep.u2, ctx2_64)
        assert norm <= 1e-8


def test_continuation_trace(system, ctx2_64, eig2_64):
    f, cfg = system
    trace = continuation(cfg, f, ctx2_64, ctx2_64, eig2_64, eig2_64)
    assert [s.t for s in trace.steps] == list(cfg.t_grid)
    assert all(
        r <= 1e-8 for step in trace.steps for r in step.residuals
    )
    # trivial branch present everywhere
    for step in trace.steps:
        assert min(step.pair_norms) <= 1e-8
    bnd = boundedness_probe(trace)
    assert bnd.passed and bnd.suggested_radius > bnd.max_pair_norm


def test_continuation_recovers_box_solution(system, ctx2_64, eig2_64):
    f, cfg = system
    hyp = check_hypotheses(f, ctx2_64, ctx2_64, eig2_64, eig2_64)
    box = build_ordered_box(f, ctx2_64, ctx2_64, eig2_64, eig2_64, hyp=hyp)
    sol = solve_in_box(box, f, ctx2_64, ctx2_64)
    trace = continuation(cfg, f, ctx2_64, ctx2_64, eig2_64, eig2_64)
    dists = [
        pair_distance(pair, (sol.u1, sol.u2), ctx2_64, ctx2_64)
        for pair in trace.at_t(1.0).solutions
    ]
    assert min(dists) <= 1e-7


def test_boundedness_probe_thresholds(system, ctx2_64, eig2_64):
    f, cfg = system
    trace = continuation(cfg, f, ctx2_64, ctx2_64, eig2_64, eig2_64)
    m = trace.max_pair_norm()
    assert boundedness_probe(trace, R=2 * (m + 1)).passed
    bad = boundedness_probe(trace, R=0.5 * m)
    assert not bad.passed
    assert bad.witness_t is not None


def test_nonexistence_probe_gates(ctx2_64, eig2_64):
    with pytest.raises(ConfigError):
        nonexistence_probe(ctx2_64, eig2_64, J=0.5 * eig2_64.lambda1, delta=0.0)
    rep = nonexistence_probe(ctx2_64, eig2_64, J=2.0 * eig2_64.lambda1, delta=1e-3)
    assert not rep.applicable
    assert "does not apply" in rep.reason


def test_nonexistence_probe_detects_reference_solution(ctx2_64, eig2_64):
    """The delta-shifted reference problem has the exact solution
    (delta*lambda1/(lambda1-J)) * phi1 at constant exponent 2, so the probe
    must converge and report the falsification rather than pass."""
    J = 0.5 * eig2_64.lambda1
    delta = 1e-3
    rep = nonexistence_probe(ctx2_64, eig2_64, J=J, delta=delta, attempts=10)
    assert rep.applicable
    assert rep.converged_count > 0
    assert not rep.passed
    assert rep.falsifications
    c = delta * eig2_64.lambda1 / (eig2_64.lambda1 - J)
    predicted_norm = c * np.sqrt(eig2_64.lambda1)
    norms = [a.norm for a in rep.attempts if a.converged]
    assert min(abs(n - predicted_norm) for n in norms) < 1e-6


def test_solve_coupled_residual_quality(system, ctx2_64, eig2_64):
    f, cfg = system
    seed = eig2_64.phi.with_values(2.0 * eig2_64.phi.values)
    rep = solve_coupled(ctx2_64, ctx2_64, f.f1, f.f2, seed, seed)
    assert rep.converged
    assert rep.residual <= 1e-9


# --- engineered two-solution benchmark (decoupled exponential growth) -----


@pytest.fixture(scope="module")
def bratu_system():
    mesh = build_interval_mesh(0.0, 1.0, 96)
    ctx = OperatorContext(mesh, ExponentField(mesh, 2.0))
    eig = first_eigenpair(ctx)
    lam = 1.0

    def f_own(x, s_own, s_other):
        # cap keeps huge line-search trial states finite; inactive on the
        # solution range (max u ~ 4)
        return lam * np.exp(np.minimum(np.asarray(s_own, dtype=float), 50.0))

    f = Nonlinearity(
        f1=lambda x, s1, s2: f_own(x, s1, s2),
        f2=lambda x, s1, s2: f_own(x, s2, s1),
        eta1=1.0,
        eta2=1.0,
        nonneg=True,
        name="exponential",
    )
    return mesh, ctx, eig, f, lam


def test_bratu_oracle_enumeration(bratu_system):
    mesh, ctx, eig, f, lam = bratu_system
    sols = bratu_solutions_by_shooting(lam)
    assert len(sols) == 2
    small, large = sols
    assert small[1] == pytest.approx(0.14, abs=0.02)
    assert large[1] > 2.0


def test_annulus_search_two_solutions(bratu_system):
    mesh, ctx, eig, f, lam = bratu_system
    sols = bratu_solutions_by_shooting(lam)
    u_small_mid, u_large_mid = sols[0][1], sols[1][1]

    # box around the small solution: zero subsolution (f >= 0), slightly
    # inflated small profile as supersolution
    small_prof = bratu_profile(lam, sols[0][0], mesh.nodes[:, 0])
    sup = GridFunction(mesh, 1.05 * small_prof)
    box = OrderedBox(GridFunction.zeros(mesh), GridFunction.zeros(mesh), sup, sup)
    rep = verify_ordered_box(box, f, ctx, ctx)
    assert rep.passed
    pos = solve_in_box(box, f, ctx, ctx)
    assert pos.converged
    assert pos.u1.values[mesh.n_nodes // 2] == pytest.approx(u_small_mid, abs=1e-3)

    cfg = HomotopyConfig.for_problem(ctx, ctx, eig, eig, R=50.0)
    report = annulus_search(cfg, f, ctx, ctx, box, (pos.u1, pos.u2), eig, eig)
    assert report.second_solution_found
    assert len(report.solutions) >= 2
    mids = sorted(s.u1.values[mesh.n_nodes // 2] for s in report.solutions)
    assert mids[0] == pytest.approx(u_small_mid, abs=1e-3)
    assert mids[-1] == pytest.approx(u_large_mid, abs=2e-2)
    inside = [s for s in report.solutions if s.inside_box]
    outside = [s for s in report.solutions if not s.inside_box]
    assert inside and outside
    assert all(s.pair_norm > report.R_hat or s.inside_box for s in report.solutions)
    # nodal separation between the distinct pairs
    assert all(s.distance_to_known > 1e-3 for s in outside)


def test_annulus_seed_permutation_invariance(bratu_system):
    mesh, ctx, eig, f, lam = bratu_system
    small_prof = bratu_profile(lam, bratu_solutions_by_shooting(lam)[0][0], mesh.nodes[:, 0])
    sup = GridFunction(mesh, 1.05 * small_prof)
    box = OrderedBox(GridFunction.zeros(mesh), GridFunction.zeros(mesh), sup, sup)
    pos = solve_in_box(box, f, ctx, ctx)
    cfg = HomotopyConfig.for_problem(ctx, ctx, eig, eig, R=50.0)
    base = annulus_search(cfg, f, ctx, ctx, box, (pos.u1, pos.u2), eig, eig)
    n_seeds = 12 + 8 + 2
    perm = list(reversed(range(n_seeds)))
    swapped = annulus_search(
        cfg, f, ctx, ctx, box, (pos.u1, pos.u2), eig, eig, seed_order=perm
    )
    assert len(base.solutions) == len(swapped.solutions)
    for a, b in zip(base.solutions, swapped.solutions):
        assert pair_distance((a.u1, a.u2), (b.u1, b.u2), ctx, ctx) < 1e-6


def test_annulus_zero_nonlinearity(ctx2_64, eig2_64):
    mesh = ctx2_64.mesh
    f0 = Nonlinearity(
        f1=lambda x, s1, s2: np.zeros(len(np.atleast_2d(x))),
        f2=lambda x, s1, s2: np.zeros(len(np.atleast_2d(x))),
        eta1=1.0,
        eta2=1.0,
    )
    bump = GridFunction(
        mesh, mesh.nodes[:, 0] * (1 - mesh.nodes[:, 0]) + 0.05
    )
    box = OrderedBox(GridFunction.zeros(mesh), GridFunction.zeros(mesh), bump, bump)
    zero = GridFunction.zeros(mesh)
    cfg = HomotopyConfig.for_problem(ctx2_64, ctx2_64, eig2_64, eig2_64, R=10.0)
    report = annulus_search(cfg, f0, ctx2_64, ctx2_64, box, (zero, zero), eig2_64, eig2_64)
    assert not report.second_solution_found
    assert all(s.inside_box for s in report.solutions)
    assert all(s.pair_norm <= 1e-8 for s in report.solutions)

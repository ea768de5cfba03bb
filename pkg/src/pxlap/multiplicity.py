"""Computable ingredients of the degree argument: homotopy families,
continuation, boundedness/nonexistence/triviality probes, annulus multi-start.

Integer degree values are never computed.  Their witnesses are: a
boundedness probe over the recorded continuation trace, a multi-start
nonexistence probe for the delta-shifted reference problem, a triviality
probe for the plain reference problem, and a multi-start search in the
annulus between the ordered box and the outer radius.  A converged solution
in the nonexistence probe is reported as a falsification event rather than
an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .eigen import EigenPair
from .errors import ConfigError, NumericalError
from .existence import Nonlinearity, OrderedBox
from .mesh import GridFunction
from .modular import sobolev_norm
from .operator import (
    OperatorContext,
    assemble_jacobian,
    dual_norm,
)
from .operator import _residual_full  # shared assembly core

DEDUP_DISTANCE = 1e-4


@dataclass
class HomotopyConfig:
    """Family selection and constants for the two homotopies.

    family "delta" carries the strictly positive eigenfunction shift; family
    "tilde" drops it.  J1/J2 must satisfy the spectral gate
    0 < J_i < lambda_1,i * min(1, p_i_min - 1); radii may be left None for
    auto-sizing.
    """

    family: str = "tilde"
    J1: float = 0.0
    J2: float = 0.0
    delta: float | None = None
    t_grid: tuple = tuple(np.round(np.linspace(0.0, 1.0, 11), 12))
    R: float | None = None
    R_tilde: float | None = None
    R_hat: float | None = None
    rng_seed: int = 42

    def __post_init__(self):
        errors = []
        if self.family not in ("delta", "tilde"):
            errors.append(f"unknown homotopy family {self.family!r}")
        tg = tuple(float(t) for t in self.t_grid)
        if sorted(tg) != list(tg):
            errors.append("t-grid must be sorted")
        if not tg or tg[0] != 0.0 or tg[-1] != 1.0:
            errors.append("t-grid must include the endpoints 0 and 1")
        if any(t < 0 or t > 1 for t in tg):
            errors.append("t-grid values must lie in [0, 1]")
        if self.family == "delta" and (self.delta is None or self.delta <= 0):
            errors.append("the delta family needs delta > 0")
        if self.R is not None and self.R_hat is not None and not self.R_hat < self.R:
            errors.append("radii must satisfy R_hat < R")
        if errors:
            raise ConfigError(errors)
        self.t_grid = tg

    def validate_spectral_gate(self, ctx1, ctx2, eig1, eig2):
        errors = []
        for i, (ctx, eig, J) in enumerate(
            [(ctx1, eig1, self.J1), (ctx2, eig2, self.J2)], start=1
        ):
            bound = eig.lambda1 * min(1.0, ctx.p.p_min - 1.0)
            if not 0.0 < J < bound:
                errors.append(
                    f"J{i} = {J} violates 0 < J < lambda1 * min(1, p_min - 1) "
                    f"= {bound}"
                )
        if errors:
            raise ConfigError(errors)

    @classmethod
    def for_problem(
        cls, ctx1, ctx2, eig1, eig2, J_fraction: float = 0.5, **kwargs
    ) -> "HomotopyConfig":
        J1 = J_fraction * eig1.lambda1 * min(1.0, ctx1.p.p_min - 1.0)
        J2 = J_fraction * eig2.lambda1 * min(1.0, ctx2.p.p_min - 1.0)
        cfg = cls(J1=J1, J2=J2, **kwargs)
        cfg.validate_spectral_gate(ctx1, ctx2, eig1, eig2)
        return cfg


def homotopy_rhs(
    cfg: HomotopyConfig,
    t: float,
    u1: GridFunction,
    u2: GridFunction,
    f: Nonlinearity,
    ctx1: OperatorContext,
    ctx2: OperatorContext,
    eig1: EigenPair,
    eig2: EigenPair,
    family: str | None = None,
):
    """Per-point callables (g1, g2) of the homotopy at parameter t.

    The norm denominators max{1, ||u_i||} are frozen from the passed
    iterates (the component Sobolev norm in both families); the returned
    callables then depend on fresh state values only, which is exactly what
    the outer-Picard / inner-Newton split needs.
    """
    family = family or cfg.family
    dens = (
        max(1.0, sobolev_norm(u1, ctx1.p)),
        max(1.0, sobolev_norm(u2, ctx2.p)),
    )

    def make(i, ctx, eig, J):
        fi = f.component(i)
        phi = eig.phi
        lam = eig.lambda1
        p = ctx.p
        den = dens[i - 1]

        def g(points, s1, s2):
            points = np.atleast_2d(points)
            p_vals = p.evaluate(points)
            s_own = np.asarray((s1, s2)[i - 1], dtype=float)
            core = J * np.clip(s_own, 0.0, None) ** (p_vals - 1.0) / den ** (p_vals - 1.0)
            if family == "delta":
                core = core + cfg.delta * lam * phi.eval(points) ** (p_vals - 1.0)
            return t * np.asarray(fi(points, s1, s2)) + (1.0 - t) * core

        return g

    return make(1, ctx1, eig1, cfg.J1), make(2, ctx2, eig2, cfg.J2)


# ---------------------------------------------------------------------------
# coupled damped Newton with frozen-norm Picard sweeps


@dataclass
class CoupledReport:
    u1: GridFunction
    u2: GridFunction
    residual: float
    iterations: int
    picard_sweeps: int
    converged: bool


def _state_qp(mesh, values):
    return np.einsum("qa,ea->eq", mesh.basis, values[mesh.elements]).ravel()


def _coupled_newton_once(
    ctx1, ctx2, g1, g2, v1, v2, eps, tol, max_iter, max_halvings, fd_step=1e-6
):
    mesh = ctx1.mesh
    pts = mesh.quad_points.reshape(-1, mesh.dimension)
    shape = (mesh.n_elements, mesh.n_qp)
    interior = mesh.interior_nodes
    n_int = len(interior)

    def residuals(a1, a2):
        s1, s2 = _state_qp(mesh, a1), _state_qp(mesh, a2)
        rhs1 = np.asarray(g1(pts, s1, s2)).reshape(shape)
        rhs2 = np.asarray(g2(pts, s1, s2)).reshape(shape)
        r1 = _residual_full(ctx1, a1, rhs1, eps)[interior]
        r2 = _residual_full(ctx2, a2, rhs2, eps)[interior]
        return r1, r2

    def combined_norm(r1, r2):
        return float(np.hypot(dual_norm(mesh, r1), dual_norm(mesh, r2)))

    def slopes(a1, a2):
        s1, s2 = _state_qp(mesh, a1), _state_qp(mesh, a2)
        out = {}
        for (name, g) in (("1", g1), ("2", g2)):
            for (arg, sa, sb_fixed) in (("1", s1, s2), ("2", s2, s1)):
                h = fd_step * (1.0 + np.abs(sa))
                if arg == "1":
                    up = np.asarray(g(pts, sa + h, sb_fixed))
                    dn = np.asarray(g(pts, sa - h, sb_fixed))
                else:
                    up = np.asarray(g(pts, sb_fixed, sa + h))
                    dn = np.asarray(g(pts, sb_fixed, sa - h))
                out[name + arg] = ((up - dn) / (2.0 * h)).reshape(shape)
        return out

    def mass_block(ctx, coeff_qp):
        w = ctx.mesh.quad_weights * coeff_qp
        M = np.einsum("eq,qa,qb->eab", w, ctx.mesh.basis, ctx.mesh.basis)
        conn = ctx.mesh.elements
        nloc = conn.shape[1]
        rows = np.repeat(conn, nloc, axis=1).ravel()
        cols = np.tile(conn, (1, nloc)).ravel()
        mat = sp.coo_matrix(
            (M.ravel(), (rows, cols)), shape=(ctx.mesh.n_nodes, ctx.mesh.n_nodes)
        ).tocsr()
        return mat[interior][:, interior]

    r1, r2 = residuals(v1, v2)
    rn = combined_norm(r1, r2)
    converged = rn <= tol
    it = 0
    while not converged and it < max_iter:
        it += 1
        sl = slopes(v1, v2)
        J11 = assemble_jacobian(ctx1, v1, eps=max(eps, 1e-12), rhs_slope_qp=sl["11"])
        J22 = assemble_jacobian(ctx2, v2, eps=max(eps, 1e-12), rhs_slope_qp=sl["22"])
        J12 = -mass_block(ctx1, sl["12"])
        J21 = -mass_block(ctx2, sl["21"])
        J = sp.bmat([[J11, J12], [J21, J22]], format="csc")
        try:
            delta = spla.spsolve(J, -np.concatenate([r1, r2]))
        except RuntimeError as exc:
            raise NumericalError(f"coupled Newton linear solve failed: {exc}") from exc
        if not np.all(np.isfinite(delta)):
            raise NumericalError("coupled Newton step is not finite")
        d1, d2 = delta[:n_int], delta[n_int:]

        step, accepted = 1.0, False
        for _ in range(max_halvings + 1):
            t1, t2 = v1.copy(), v2.copy()
            t1[interior] += step * d1
            t2[interior] += step * d2
            tr1, tr2 = residuals(t1, t2)
            trn = combined_norm(tr1, tr2)
            if trn <= (1.0 - 1e-4 * step) * rn:
                v1, v2, r1, r2, rn = t1, t2, tr1, tr2, trn
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        if rn <= tol:
            converged = True
    return v1, v2, rn, it, converged


def solve_coupled(
    ctx1: OperatorContext,
    ctx2: OperatorContext,
    g1,
    g2,
    seed1: GridFunction,
    seed2: GridFunction,
    tol: float | None = None,
) -> CoupledReport:
    """Damped Newton on the coupled pair system with state-dependent rhs."""
    mesh = ctx1.mesh
    tol = tol if tol is not None else max(ctx1.newton_tol, ctx2.newton_tol)
    v1 = seed1.values.copy()
    v2 = seed2.values.copy()
    v1[mesh.boundary_nodes] = 0.0
    v2[mesh.boundary_nodes] = 0.0

    ladder = [e for e in (1e-2, 1e-4, 1e-6) if e > max(ctx1.eps_reg, ctx2.eps_reg)]
    total = 0
    for eps in ladder:
        v1, v2, _, it, _ = _coupled_newton_once(
            ctx1, ctx2, g1, g2, v1, v2, eps, max(tol, 1e-9),
            max_iter=ctx1.newton_max_iter, max_halvings=ctx1.max_halvings,
        )
        total += it
    v1, v2, rn, it, converged = _coupled_newton_once(
        ctx1, ctx2, g1, g2, v1, v2, max(ctx1.eps_reg, ctx2.eps_reg), tol,
        max_iter=ctx1.newton_max_iter, max_halvings=ctx1.max_halvings,
    )
    total += it

    # unregularized recheck
    pts = mesh.quad_points.reshape(-1, mesh.dimension)
    shape = (mesh.n_elements, mesh.n_qp)
    s1, s2 = _state_qp(mesh, v1), _state_qp(mesh, v2)
    r1 = _residual_full(ctx1, v1, np.asarray(g1(pts, s1, s2)).reshape(shape), 0.0)
    r2 = _residual_full(ctx2, v2, np.asarray(g2(pts, s1, s2)).reshape(shape), 0.0)
    interior = mesh.interior_nodes
    rn0 = float(np.hypot(dual_norm(mesh, r1[interior]), dual_norm(mesh, r2[interior])))
    return CoupledReport(
        u1=GridFunction(mesh, v1, dirichlet_zero=True),
        u2=GridFunction(mesh, v2, dirichlet_zero=True),
        residual=rn0,
        iterations=total,
        picard_sweeps=0,
        converged=bool(converged and rn0 <= tol),
    )


def solve_homotopy_system(
    cfg: HomotopyConfig,
    t: float,
    f: Nonlinearity,
    ctx1: OperatorContext,
    ctx2: OperatorContext,
    eig1: EigenPair,
    eig2: EigenPair,
    seed1: GridFunction,
    seed2: GridFunction,
    family: str | None = None,
    picard_max: int = 20,
    picard_rtol: float = 1e-8,
) -> CoupledReport:
    """Outer Picard on the norm denominators, inner coupled Newton."""
    u1, u2 = seed1, seed2
    sweeps = 0
    rep = None
    prev = (sobolev_norm_or_zero(u1, ctx1), sobolev_norm_or_zero(u2, ctx2))
    for sweeps in range(1, picard_max + 1):
        g1, g2 = homotopy_rhs(cfg, t, u1, u2, f, ctx1, ctx2, eig1, eig2, family)
        rep = solve_coupled(ctx1, ctx2, g1, g2, u1, u2)
        u1, u2 = rep.u1, rep.u2
        cur = (sobolev_norm(u1, ctx1.p), sobolev_norm(u2, ctx2.p))
        change = max(
            abs(cur[0] - prev[0]) / max(1.0, cur[0]),
            abs(cur[1] - prev[1]) / max(1.0, cur[1]),
        )
        prev = cur
        if change <= picard_rtol:
            break
    rep.picard_sweeps = sweeps
    return rep


def sobolev_norm_or_zero(u: GridFunction, ctx: OperatorContext) -> float:
    if not np.any(u.values != 0.0):
        return 0.0
    return sobolev_norm(u, ctx.p)


# ---------------------------------------------------------------------------
# trace and probes


@dataclass
class TraceStep:
    t: float
    solutions: list  # of (GridFunction, GridFunction)
    pair_norms: list
    residuals: list
    tags: list
    converged: list


@dataclass
class HomotopyTrace:
    family: str
    rng_seed: int
    steps: list = field(default_factory=list)

    def max_pair_norm(self) -> float:
        norms = [n for s in self.steps for n in s.pair_norms]
        return max(norms) if norms else 0.0

    def at_t(self, t: float) -> TraceStep:
        for s in self.steps:
            if abs(s.t - t) < 1e-12:
                return s
        raise KeyError(f"no trace step at t = {t}")

    def summary(self) -> dict:
        return {
            "family": self.family,
            "rng_seed": self.rng_seed,
            "max_pair_norm": self.max_pair_norm(),
            "steps": [
                {
                    "t": s.t,
                    "solutions": len(s.solutions),
                    "pair_norms": list(map(float, s.pair_norms)),
                    "residuals": list(map(float, s.residuals)),
                    "tags": list(s.tags),
                }
                for s in self.steps
            ],
        }


def pair_distance(a, b, ctx1, ctx2) -> float:
    d1 = GridFunction(ctx1.mesh, a[0].values - b[0].values, dirichlet_zero=True)
    d2 = GridFunction(ctx2.mesh, a[1].values - b[1].values, dirichlet_zero=True)
    return sobolev_norm_or_zero(d1, ctx1) + sobolev_norm_or_zero(d2, ctx2)


def _dedup(pairs, norms, residuals, tags, ctx1, ctx2):
    """Cluster converged pairs; canonical order is ascending pair norm.

    Seed-order independence: representatives are chosen by the cluster's
    smallest norm, and ties resolve by nodal lexicographic order.
    """
    order = sorted(
        range(len(pairs)),
        key=lambda k: (norms[k], tuple(pairs[k][0].values), tuple(pairs[k][1].values)),
    )
    reps, rep_norms, rep_res, rep_tags = [], [], [], []
    for k in order:
        dup = False
        for r in reps:
            if pair_distance(pairs[k], r, ctx1, ctx2) < DEDUP_DISTANCE:
                dup = True
                break
        if not dup:
            reps.append(pairs[k])
            rep_norms.append(norms[k])
            rep_res.append(residuals[k])
            rep_tags.append(tags[k])
    return reps, rep_norms, rep_res, rep_tags


def continuation(
    cfg: HomotopyConfig,
    f: Nonlinearity,
    ctx1: OperatorContext,
    ctx2: OperatorContext,
    eig1: EigenPair,
    eig2: EigenPair,
    family: str | None = None,
    extra_seed_scales: tuple = (0.5, 2.0),
    tol: float = 1e-8,
) -> HomotopyTrace:
    """March the t-grid recording every converged, deduplicated solution.

    Each step is seeded from the previous step's solutions plus the zero
    pair and scaled eigenfunction pairs (the trivial branch persists along
    the whole tilde family whenever f vanishes at zero, so fresh seeds are
    what pick up nontrivial branches).  Per-step non-convergence is recorded
    in the trace, never fatal.
    """
    family = family or cfg.family
    cfg.validate_spectral_gate(ctx1, ctx2, eig1, eig2)
    mesh = ctx1.mesh
    trace = HomotopyTrace(family=family, rng_seed=cfg.rng_seed)

    def eig_seed(scale):
        return (
            eig1.phi.with_values(scale * eig1.phi.values),
            eig2.phi.with_values(scale * eig2.phi.values),
        )

    previous = []
    for t in cfg.t_grid:
        seeds = [(GridFunction.zeros(mesh), GridFunction.zeros(mesh), "zero")]
        seeds += [(s1, s2, "continued") for (s1, s2) in previous]
        seeds += [(*eig_seed(c), f"eig x{c}") for c in extra_seed_scales]

        pairs, norms, residuals, tags, flags = [], [], [], [], []
        for s1, s2, tag in seeds:
            try:
                rep = solve_homotopy_system(
                    cfg, t, f, ctx1, ctx2, eig1, eig2, s1, s2, family
                )
            except NumericalError:
                flags.append(False)
                continue
            flags.append(rep.converged)
            if rep.converged and rep.residual <= tol:
                pairs.append((rep.u1, rep.u2))
                norms.append(
                    sobolev_norm_or_zero(rep.u1, ctx1)
                    + sobolev_norm_or_zero(rep.u2, ctx2)
                )
                residuals.append(rep.residual)
                tags.append(tag)
        pairs, norms, residuals, tags = _dedup(
            pairs, norms, residuals, tags, ctx1, ctx2
        )
        trace.steps.append(
            TraceStep(
                t=float(t),
                solutions=pairs,
                pair_norms=norms,
                residuals=residuals,
                tags=tags,
                converged=flags,
            )
        )
        previous = pairs
    return trace


@dataclass
class BoundednessReport:
    max_pair_norm: float
    radius: float | None
    passed: bool
    suggested_radius: float
    witness_t: float | None

    def summary(self) -> dict:
        return {
            "max_pair_norm": self.max_pair_norm,
            "radius": self.radius,
            "passed": self.passed,
            "suggested_radius": self.suggested_radius,
            "witness_t": self.witness_t,
        }


def boundedness_probe(trace: HomotopyTrace, R: float | None = None) -> BoundednessReport:
    """Check every recorded solution stays inside the ball of radius R."""
    if not trace.steps:
        raise ValueError("boundedness probe needs a nonempty trace")
    max_norm = trace.max_pair_norm()
    witness = None
    if R is not None and max_norm >= R:
        for s in trace.steps:
            if any(n >= R for n in s.pair_norms):
                witness = s.t
                break
    return BoundednessReport(
        max_pair_norm=max_norm,
        radius=R,
        passed=bool(R is None or max_norm < R),
        suggested_radius=2.0 * (max_norm + 1.0),
        witness_t=witness,
    )


@dataclass
class AttemptRecord:
    tag: str
    converged: bool
    residual: float
    norm: float


@dataclass
class NonexistenceReport:
    """Multi-start outcome for the delta-shifted scalar reference problem."""

    applicable: bool
    reason: str
    attempts: list = field(default_factory=list)
    min_residual: float = np.inf
    converged_count: int = 0
    falsifications: list = field(default_factory=list)
    tolerance: float = 1e-8
    rng_seed: int = 42
    J: float = 0.0
    delta: float = 0.0

    @property
    def passed(self) -> bool:
        return (
            self.applicable
            and self.converged_count == 0
            and self.min_residual >= 10.0 * self.tolerance
        )

    def summary(self) -> dict:
        norms = [a.norm for a in self.attempts if np.isfinite(a.norm)]
        return {
            "applicable": self.applicable,
            "reason": self.reason,
            "attempts": len(self.attempts),
            "min_residual": float(self.min_residual),
            "max_iterate_norm": float(max(norms)) if norms else 0.0,
            "converged_count": self.converged_count,
            "passed": self.passed,
            "tolerance": self.tolerance,
            "rng_seed": self.rng_seed,
            "J": self.J,
            "delta": self.delta,
        }


def _scalar_reference_rhs(ctx, eig, J, delta, den):
    phi = eig.phi
    lam = eig.lambda1
    p = ctx.p

    def g(points, s):
        points = np.atleast_2d(points)
        p_vals = p.evaluate(points)
        s = np.asarray(s, dtype=float)
        out = J * np.clip(s, 0.0, None) ** (p_vals - 1.0) / den ** (p_vals - 1.0)
        return out + delta * lam * phi.eval(points) ** (p_vals - 1.0)

    return g


def _solve_scalar_reference(ctx, eig, J, delta, seed, picard_max=20, picard_rtol=1e-8):
    from .operator import semilinear_solve

    u = seed
    rep = None
    prev = sobolev_norm_or_zero(u, ctx)
    for _ in range(picard_max):
        den = max(1.0, prev)
        g = _scalar_reference_rhs(ctx, eig, J, delta, den)
        rep = semilinear_solve(ctx, g, initial=u)
        u = rep.u
        cur = sobolev_norm_or_zero(u, ctx)
        if abs(cur - prev) <= picard_rtol * max(1.0, cur):
            prev = cur
            break
        prev = cur
    return rep


def nonexistence_probe(
    ctx: OperatorContext,
    eig: EigenPair,
    J: float,
    delta: float,
    attempts: int = 50,
    tolerance: float = 1e-8,
    rng_seed: int = 42,
) -> NonexistenceReport:
    """Multi-start damped Newton on the delta-shifted scalar problem.

    Seeds cover scaled eigenfunctions of both signs, random Dirichlet-zero
    fields and zero.  The probe passes when no attempt reaches the residual
    tolerance; any converged solution is recorded as a falsification event
    for investigation, not raised.
    """
    if delta <= 0:
        raise ConfigError(["the nonexistence probe requires delta > 0"])
    bound = eig.lambda1 * (ctx.p.p_min - 1.0)
    if not 0.0 < J < bound:
        return NonexistenceReport(
            applicable=False,
            reason=(
                f"J = {J} violates the spectral gate 0 < J < "
                f"lambda1 * (p_min - 1) = {bound}; the probe does not apply"
            ),
            tolerance=tolerance,
            rng_seed=rng_seed,
            J=J,
            delta=delta,
        )

    mesh = ctx.mesh
    rng = np.random.default_rng(rng_seed)
    seeds = [(GridFunction.zeros(mesh), "zero")]
    n_eig = max(1, (attempts - 1) // 2)
    scales = np.logspace(-3, 1, n_eig)
    for k, c in enumerate(scales):
        sign = 1.0 if k % 2 == 0 else -1.0
        seeds.append(
            (eig.phi.with_values(sign * c * eig.phi.values), f"eig x{sign * c:.3g}")
        )
    while len(seeds) < attempts:
        vals = np.zeros(mesh.n_nodes)
        vals[mesh.interior_nodes] = rng.standard_normal(len(mesh.interior_nodes))
        scale = 10.0 ** rng.uniform(-2, 1)
        gf = GridFunction(mesh, vals, dirichlet_zero=True)
        nrm = sobolev_norm_or_zero(gf, ctx)
        seeds.append(
            (gf.with_values(scale * vals / max(nrm, 1e-30)), f"random x{scale:.3g}")
        )

    report = NonexistenceReport(
        applicable=True,
        reason="spectral gate satisfied",
        tolerance=tolerance,
        rng_seed=rng_seed,
        J=J,
        delta=delta,
    )
    for seed, tag in seeds[:attempts]:
        rep = _solve_scalar_reference(ctx, eig, J, delta, seed)
        res = rep.residual if rep is not None else np.inf
        conv = bool(rep is not None and rep.converged and res <= tolerance)
        record = AttemptRecord(
            tag=tag,
            converged=conv,
            residual=float(res),
            norm=sobolev_norm_or_zero(rep.u, ctx) if rep is not None else np.nan,
        )
        report.attempts.append(record)
        report.min_residual = min(report.min_residual, record.residual)
        if conv:
            report.converged_count += 1
            report.falsifications.append(record)
    return report


@dataclass
class AnnulusSolution:
    u1: GridFunction
    u2: GridFunction
    pair_norm: float
    residual: float
    inside_box: bool
    distance_to_known: float


@dataclass
class AnnulusReport:
    solutions: list
    R_hat: float
    R: float
    second_solution_found: bool
    rng_seed: int

    def summary(self) -> dict:
        return {
            "R_hat": self.R_hat,
            "R": self.R,
            "second_solution_found": self.second_solution_found,
            "rng_seed": self.rng_seed,
            "solutions": [
                {
                    "pair_norm": s.pair_norm,
                    "residual": s.residual,
                    "inside_box": s.inside_box,
                    "distance_to_known": s.distance_to_known,
                }
                for s in self.solutions
            ],
        }


def annulus_search(
    cfg: HomotopyConfig,
    f: Nonlinearity,
    ctx1: OperatorContext,
    ctx2: OperatorContext,
    box: OrderedBox,
    u_plus: tuple[GridFunction, GridFunction],
    eig1: EigenPair,
    eig2: EigenPair,
    n_eig_seeds: int = 12,
    n_random_seeds: int = 8,
    tolerance: float = 1e-8,
    seed_order: list | None = None,
) -> AnnulusReport:
    """Multi-start damped Newton on the original (t = 1) system from seeds
    with pair norm inside the annulus (R_hat, R).

    R_hat defaults to 1.5x the pair norm of the supersolution pair; R to
    2 * (R_hat + 1) when the config leaves it unset.  Converged solutions
    are deduplicated, classified inside/outside the box, and the second
    solution flag fires when some solution sits beyond R_hat at nodal
    distance > 1e-3 from the known pair.  An empty outside-box list is a
    reported outcome: the seeds are not guaranteed to land in every basin.
    """
    mesh = ctx1.mesh
    # the supersolution pair has nonzero trace; size R_hat by its gradient
    # Luxemburg seminorm
    from .modular import luxemburg_norm_of_qp

    sup_pair_norm = (
        luxemburg_norm_of_qp(box.u_sup1.grad_magnitude_qp(), ctx1.p_qp(), mesh).norm
        + luxemburg_norm_of_qp(box.u_sup2.grad_magnitude_qp(), ctx2.p_qp(), mesh).norm
    )
    R_hat = cfg.R_hat if cfg.R_hat is not None else 1.5 * sup_pair_norm
    R = cfg.R if cfg.R is not None else 2.0 * (R_hat + 1.0)
    if not R_hat < R:
        raise ConfigError([f"radii must satisfy R_hat < R, got {R_hat} >= {R}"])

    eig_pair_norm = sobolev_norm(eig1.phi, ctx1.p) + sobolev_norm(eig2.phi, ctx2.p)
    rng = np.random.default_rng(cfg.rng_seed)
    seeds = []
    for target in np.geomspace(R_hat * 1.05, R * 0.95, n_eig_seeds):
        c = target / eig_pair_norm
        seeds.append(
            (
                eig1.phi.with_values(c * eig1.phi.values),
                eig2.phi.with_values(c * eig2.phi.values),
                f"eig@{target:.3g}",
            )
        )
    for _ in range(n_random_seeds):
        target = float(rng.uniform(R_hat * 1.05, R * 0.95))
        comps = []
        for ctx in (ctx1, ctx2):
            vals = np.zeros(mesh.n_nodes)
            vals[mesh.interior_nodes] = np.abs(rng.standard_normal(len(mesh.interior_nodes)))
            gf = GridFunction(mesh, vals, dirichlet_zero=True)
            comps.append((gf, sobolev_norm(gf, ctx.p)))
        total = comps[0][1] + comps[1][1]
        seeds.append(
            (
                comps[0][0].with_values(comps[0][0].values * target / total),
                comps[1][0].with_values(comps[1][0].values * target / total),
                f"random@{target:.3g}",
            )
        )
    # inside-box seeds: these converge back to the known solution and must
    # deduplicate with it
    seeds.append((u_plus[0], u_plus[1], "known"))
    seeds.append(
        (
            u_plus[0].with_values(0.5 * u_plus[0].values),
            u_plus[1].with_values(0.5 * u_plus[1].values),
            "half-known",
        )
    )

    if seed_order is not None:
        seeds = [seeds[k] for k in seed_order]

    pairs, norms, residuals, tags = [], [], [], []
    for s1, s2, tag in seeds:
        try:
            rep = solve_coupled(ctx1, ctx2, f.f1, f.f2, s1, s2, tol=tolerance * 1e-2)
        except NumericalError:
            continue
        if rep.converged and rep.residual <= tolerance:
            pairs.append((rep.u1, rep.u2))
            norms.append(
                sobolev_norm_or_zero(rep.u1, ctx1) + sobolev_norm_or_zero(rep.u2, ctx2)
            )
            residuals.append(rep.residual)
            tags.append(tag)
    pairs, norms, residuals, tags = _dedup(pairs, norms, residuals, tags, ctx1, ctx2)

    solutions = []
    found_second = False
    for (u1, u2), nrm, res in zip(pairs, norms, residuals):
        inside = box.contains(u1, u2)
        nodal_dist = max(
            float(np.max(np.abs(u1.values - u_plus[0].values))),
            float(np.max(np.abs(u2.values - u_plus[1].values))),
        )
        if nrm > R_hat and nodal_dist > 1e-3:
            found_second = True
        solutions.append(
            AnnulusSolution(
                u1=u1,
                u2=u2,
                pair_norm=nrm,
                residual=res,
                inside_box=inside,
                distance_to_known=nodal_dist,
            )
        )
    return AnnulusReport(
        solutions=solutions,
        R_hat=float(R_hat),
        R=float(R),
        second_solution_found=found_second,
        rng_seed=cfg.rng_seed,
    )

"""First eigenpair of -Delta_p(x) by inverse-power-type iteration.

Starting from a positive field, each sweep solves
    -Delta_p(x) u_{k+1} = R(u_k) |u_k|^(p(x)-2) u_k,
renormalizes to modular 1, and stops when the Rayleigh quotient
R(u) = int |grad u|^p / int |u|^p settles.  For constant exponents this is
plain inverse power iteration and the limit solves the eigenvalue equation
exactly; for genuinely variable exponents the minimizer of the quotient need
not solve the equation with the same constant, so the pair records both the
quotient and the equation residual and flags a disagreement instead of
hiding it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, HypothesisError, NumericalError
from .exponents import ExponentField, check_Hp
from .mesh import GridFunction, Mesh, dilate_domain, integrate, restrict, snap_margin
from .modular import luxemburg_norm, modular
from .operator import (
    OperatorContext,
    assemble_residual,
    dirichlet_solve,
    dual_norm,
    linear_poisson_solve,
)

EIGEN_RESIDUAL_TOL = 1e-7


def rayleigh_quotient(ctx: OperatorContext, u: GridFunction) -> float:
    """int |grad u|^p(x) / int |u|^p(x) with the unregularized gradient."""
    p_qp = ctx.p_qp()
    num = integrate(u.grad_magnitude_qp() ** p_qp, ctx.mesh)
    den = integrate(np.abs(u.at_qp()) ** p_qp, ctx.mesh)
    if den == 0.0:
        raise ValueError("Rayleigh quotient of the zero field")
    return num / den


@dataclass
class EigenPair:
    """(lambda1, phi1) with normalization and consistency diagnostics.

    lambda1 equals the converged Rayleigh quotient; ``residual`` is the dual
    norm of the eigenvalue equation tested against interior hat functions;
    ``consistent`` records whether that residual is below the tolerance that
    constant exponents achieve.
    """

    lambda1: float
    phi: GridFunction
    rayleigh: float
    residual: float
    modular_residual: float
    iterations: int
    converged: bool
    consistent: bool

    def summary(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "rayleigh": self.rayleigh,
            "residual": self.residual,
            "modular_residual": self.modular_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "consistent": self.consistent,
        }


def _normalize_modular(u: GridFunction, p: ExponentField) -> GridFunction:
    # modular(u / c) = 1 exactly at c = Luxemburg norm of u
    c = luxemburg_norm(u, p).norm
    if c == 0.0:
        raise NumericalError("cannot normalize the zero field")
    return u.with_values(u.values / c)


def first_eigenpair(
    ctx: OperatorContext,
    initial: GridFunction | None = None,
    rtol: float = 1e-9,
    max_outer: int = 500,
    hp_check=None,
    allow_unchecked_exponent: bool = False,
) -> EigenPair:
    """Minimize the Rayleigh quotient over Dirichlet-zero fields.

    The direction-monotonicity hypothesis guards the spectral property; it is
    checked up front (coordinate directions) unless a previous report or an
    explicit override is supplied.
    """
    if hp_check is None and not allow_unchecked_exponent:
        hp_check = check_Hp(ctx.p, ctx.mesh)
    if hp_check is not None and not hp_check.passed:
        raise HypothesisError(
            "exponent failed the direction-monotonicity check; pass "
            "allow_unchecked_exponent=True to proceed anyway"
        )

    mesh = ctx.mesh
    if initial is None:
        # smoothed positive dome: one plain-Laplacian solve of unit load
        initial = linear_poisson_solve(mesh, 1.0)
    vals = np.abs(initial.values)
    vals[mesh.boundary_nodes] = 0.0
    u = GridFunction(mesh, vals, dirichlet_zero=True)
    if not np.any(u.values > 0):
        raise ValueError("initial field must be nonzero")
    u = _normalize_modular(u, ctx.p)

    p_qp = ctx.p_qp()
    R = rayleigh_quotient(ctx, u)
    history = [R]
    converged = False
    stagnant = 0
    it = 0
    for it in range(1, max_outer + 1):
        u_qp = u.at_qp()
        rhs_qp = R * np.abs(u_qp) ** (p_qp - 2.0) * u_qp
        rep = dirichlet_solve(ctx, rhs_qp, initial=u)
        if not rep.converged:
            raise NumericalError(
                f"inner Dirichlet solve failed at outer sweep {it} "
                f"(residual {rep.residual:.3e})"
            )
        v = rep.u
        if np.any(v.values[mesh.interior_nodes] <= 0):
            # positivity restart: the ground state is signless
            v = v.with_values(np.abs(v.values))
        u = _normalize_modular(v, ctx.p)
        R_new = rayleigh_quotient(ctx, u)
        history.append(R_new)
        if abs(R_new - R) <= rtol * abs(R_new):
            R = R_new
            converged = True
            break
        if R_new > R * (1.0 + 1e-12):
            stagnant += 1
            if stagnant >= 25:
                raise NumericalError(
                    "Rayleigh quotient stopped decreasing before convergence "
                    f"(R = {R_new}); iteration is stagnating"
                )
        else:
            stagnant = 0
        R = R_new
    if not converged:
        raise NumericalError(
            f"eigen iteration did not settle within {max_outer} sweeps"
        )

    def equation_residual(field, value):
        f_qp = field.at_qp()
        rhs = value * np.abs(f_qp) ** (p_qp - 2.0) * f_qp
        return dual_norm(mesh, assemble_residual(ctx, field, rhs, eps_reg=0.0))

    # polish: the quotient settles before the equation residual does; keep
    # sweeping while the residual still improves (variable exponents plateau
    # at a nonzero value, which the consistency flag reports)
    res = equation_residual(u, R)
    while res > 0.5 * EIGEN_RESIDUAL_TOL and it < max_outer:
        u_qp = u.at_qp()
        rhs_qp = R * np.abs(u_qp) ** (p_qp - 2.0) * u_qp
        rep = dirichlet_solve(ctx, rhs_qp, initial=u)
        if not rep.converged:
            break
        v = rep.u
        if np.any(v.values[mesh.interior_nodes] <= 0):
            v = v.with_values(np.abs(v.values))
        u_new = _normalize_modular(v, ctx.p)
        R_new = rayleigh_quotient(ctx, u_new)
        res_new = equation_residual(u_new, R_new)
        it += 1
        if res_new >= 0.9 * res:
            if res_new < res:
                u, R, res = u_new, R_new, res_new
            break
        u, R, res = u_new, R_new, res_new

    mod_res = abs(modular(u, ctx.p) - 1.0)

    pair = EigenPair(
        lambda1=R,
        phi=u,
        rayleigh=R,
        residual=res,
        modular_residual=mod_res,
        iterations=it,
        converged=converged,
        consistent=bool(res <= EIGEN_RESIDUAL_TOL),
    )
    _validate_pair(pair)
    return pair


def _validate_pair(pair: EigenPair):
    mesh = pair.phi.mesh
    if pair.lambda1 <= 0:
        raise NumericalError(f"first eigenvalue must be positive, got {pair.lambda1}")
    if np.any(pair.phi.values[mesh.interior_nodes] <= 0):
        raise NumericalError("eigenfunction is not interior-positive")
    if pair.modular_residual > 1e-10:
        raise NumericalError(
            f"eigenfunction normalization residual {pair.modular_residual:.3e}"
        )


@dataclass
class EnlargedEigenResult:
    """Eigenpair on the dilated domain plus its restriction data."""

    pair: EigenPair
    mesh_tilde: Mesh
    phi_restricted: GridFunction
    tau: float
    margin: float
    sup_phi_tilde: float


def enlarged_eigenpair(
    ctx: OperatorContext,
    margin: float | None = None,
    snap_to_grid: bool = True,
    **eigen_kwargs,
) -> EnlargedEigenResult:
    """First eigenpair on the box-dilated domain, restricted back to the base mesh.

    ``margin`` defaults to a quarter of the domain diameter.  With
    ``snap_to_grid`` the margin is rounded up to whole cells so the inner
    grid nests in the outer one and restriction is exact nodal pickup.
    Returns tau = half the minimum of the restricted eigenfunction over all
    base-mesh nodes; tau > 0 certifies the strict interior bound.
    """
    mesh = ctx.mesh
    if margin is None:
        margin = 0.25 * mesh.diameter
    if margin <= 0:
        raise DomainError(f"margin must be positive, got {margin}")
    if snap_to_grid:
        margin = snap_margin(mesh, margin)
    mesh_tilde = dilate_domain(mesh, margin)
    p_tilde = ctx.p.on_mesh(mesh_tilde)
    ctx_tilde = OperatorContext(
        mesh_tilde,
        p_tilde,
        eps_reg=ctx.eps_reg,
        newton_max_iter=ctx.newton_max_iter,
        newton_tol=ctx.newton_tol,
        max_halvings=ctx.max_halvings,
    )
    pair = first_eigenpair(ctx_tilde, **eigen_kwargs)
    phi_r = restrict(pair.phi, mesh)
    tau = 0.5 * float(np.min(phi_r.values))
    if tau <= 0:
        raise DomainError(
            "restricted eigenfunction is not strictly positive on the base "
            "domain; the dilation margin is too small for this mesh"
        )
    return EnlargedEigenResult(
        pair=pair,
        mesh_tilde=mesh_tilde,
        phi_restricted=phi_r,
        tau=tau,
        margin=margin,
        sup_phi_tilde=pair.phi.max_abs(),
    )

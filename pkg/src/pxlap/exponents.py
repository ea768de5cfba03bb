"""Variable exponents p(x): evaluation, bounds, conjugates, monotonicity checks.

An :class:`ExponentField` wraps either a coordinate expression/callable or a
nodal table and caches the bounds (p_min, p_max) obtained by sampling every
quadrature point and node of its mesh.  Construction enforces 1 < p_min.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisError
from .expressions import coordinate_expression
from .mesh import GridFunction, Mesh


class ExponentField:
    """A continuous exponent p(x) with cached bounds on a mesh.

    Parameters
    ----------
    mesh : Mesh
        Mesh whose quadrature points and nodes define the cached bounds.
    rule : float | str | callable | GridFunction
        Constant value, expression in ``x``/``y``, callable of a point array,
        or nodal table (interpolated piecewise-linearly).
    """

    def __init__(self, mesh: Mesh, rule):
        self.mesh = mesh
        self._table = None
        if isinstance(rule, GridFunction):
            if rule.mesh is not mesh:
                self._table = GridFunction(mesh, rule.eval(mesh.nodes))
            else:
                self._table = rule
            self._evaluate = self._table.eval
            self.description = "nodal table"
        elif isinstance(rule, str):
            self._evaluate = coordinate_expression(rule, mesh.dimension)
            self.description = rule
        elif callable(rule):
            self._evaluate = lambda pts: np.broadcast_to(
                np.asarray(rule(np.atleast_2d(pts)), dtype=float),
                (len(np.atleast_2d(pts)),),
            )
            self.description = getattr(rule, "expression", "callable")
        else:
            value = float(rule)
            self._evaluate = lambda pts: np.full(len(np.atleast_2d(pts)), value)
            self.description = repr(value)
        self._rule = rule

        qp = self.at_qp(mesh)
        nodal = self.evaluate(mesh.nodes)
        self.p_min = float(min(qp.min(), nodal.min()))
        self.p_max = float(max(qp.max(), nodal.max()))
        if not self.p_min > 1.0:
            raise HypothesisError(
                f"exponent must satisfy p_min > 1, sampled minimum {self.p_min}"
            )
        # p_max < dimension is a Sobolev-embedding hypothesis; it cannot hold
        # in 1D desk experiments, so it is recorded rather than enforced.
        self.embedding_warning = None
        if self.p_max >= mesh.dimension:
            self.embedding_warning = (
                f"p_max = {self.p_max:.6g} >= spatial dimension "
                f"{mesh.dimension}; Sobolev-embedding-based statements are "
                "formal only"
            )

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self._evaluate(points), dtype=float)

    def at_qp(self, mesh: Mesh | None = None) -> np.ndarray:
        """Exponent values at quadrature points, shape (n_elements, n_qp)."""
        mesh = mesh or self.mesh
        flat = self.evaluate(mesh.quad_points.reshape(-1, mesh.dimension))
        return flat.reshape(mesh.n_elements, mesh.n_qp)

    def on_mesh(self, mesh: Mesh) -> "ExponentField":
        """Re-bind the same rule to another mesh (e.g. the enlarged domain).

        Nodal tables only transfer to meshes contained in the current domain.
        """
        if self._table is not None:
            return ExponentField(mesh, GridFunction(mesh, self._table.eval(mesh.nodes)))
        return ExponentField(mesh, self._rule)

    def conjugate(self) -> "ExponentField":
        """Pointwise Holder conjugate p/(p - 1)."""
        inner = self._evaluate

        def conj(points):
            p = np.asarray(inner(points), dtype=float)
            return p / (p - 1.0)

        out = ExponentField(self.mesh, conj)
        out.description = f"conjugate({self.description})"
        return out

    def __repr__(self):
        return (
            f"ExponentField({self.description}, bounds=({self.p_min:.6g}, "
            f"{self.p_max:.6g}))"
        )


def bounds(p: ExponentField, mesh: Mesh) -> tuple[float, float]:
    """(min, max) of p over all quadrature points and nodes of ``mesh``."""
    qp = p.at_qp(mesh)
    nodal = p.evaluate(mesh.nodes)
    lo = float(min(qp.min(), nodal.min()))
    hi = float(max(qp.max(), nodal.max()))
    if not lo > 1.0:
        raise HypothesisError(f"exponent bound violation: sampled minimum {lo} <= 1")
    return lo, hi


@dataclass
class LineCheck:
    direction: tuple
    n_lines: int
    passed: bool
    witness: dict | None = None


@dataclass
class HpReport:
    """Result of the direction-monotonicity check.

    ``passed`` is true when some direction has every sampled line restriction
    monotone.  A failing report is a legitimate outcome, not an error.
    """

    checks: list = field(default_factory=list)
    passed: bool = False

    def summary(self) -> dict:
        return {
            "passed": self.passed,
            "directions": [
                {
                    "direction": list(c.direction),
                    "lines": c.n_lines,
                    "passed": c.passed,
                }
                for c in self.checks
            ],
        }


def _line_monotone(p, mesh, x0, direction, samples, tol):
    """Sample p along the in-box segment through x0; None if degenerate."""
    lo, hi = mesh.bbox
    tmin, tmax = -np.inf, np.inf
    for d in range(mesh.dimension):
        if abs(direction[d]) < 1e-15:
            continue
        t1 = (lo[d] - x0[d]) / direction[d]
        t2 = (hi[d] - x0[d]) / direction[d]
        tmin = max(tmin, min(t1, t2))
        tmax = min(tmax, max(t1, t2))
    if not tmax > tmin:
        return None
    ts = np.linspace(tmin, tmax, samples)
    pts = x0[None, :] + ts[:, None] * direction[None, :]
    pts = np.clip(pts, lo[None, :], hi[None, :])
    vals = p.evaluate(pts)
    diffs = np.diff(vals)
    monotone = bool(np.all(diffs >= -tol) or np.all(diffs <= tol))
    witness = None
    if not monotone:
        k = int(np.argmax(np.abs(np.diff(np.sign(diffs)))))
        witness = {
            "base_point": x0.tolist(),
            "t": ts[k : k + 3].tolist(),
            "p": vals[k : k + 3].tolist(),
        }
    return monotone, witness


def _base_points(mesh) -> np.ndarray:
    step = max(1, mesh.n_nodes // 33)
    return mesh.nodes[::step]


def check_Hp(
    p: ExponentField,
    mesh: Mesh,
    directions=None,
    samples_per_line: int = 64,
    tol: float = 1e-12,
) -> HpReport:
    """Sample p along lines through the domain and test monotonicity.

    For each direction l, lines x0 + t*l through a grid of base points are
    sampled inside the bounding box; a direction passes when every sampled
    restriction is monotone (non-increasing or non-decreasing within ``tol``).
    """
    dim = mesh.dimension
    if directions is None:
        directions = [tuple(np.eye(dim)[d]) for d in range(dim)]
    if len(directions) == 0:
        raise ValueError("need at least one direction")

    report = HpReport()
    for direction in directions:
        l = np.asarray(direction, dtype=float)
        norm = np.linalg.norm(l)
        if norm == 0:
            raise ValueError("direction vectors must be nonzero")
        l = l / norm
        ok = True
        witness = None
        n_lines = 0
        for x0 in _base_points(mesh):
            result = _line_monotone(p, mesh, x0, l, samples_per_line, tol)
            if result is None:
                continue
            n_lines += 1
            monotone, w = result
            if not monotone and ok:
                ok, witness = False, w
        report.checks.append(LineCheck(tuple(direction), n_lines, ok, witness))
    report.passed = any(c.passed for c in report.checks)
    return report


def check_Hp_rays(
    p: ExponentField,
    mesh: Mesh,
    exterior_point,
    samples_per_line: int = 64,
    tol: float = 1e-12,
) -> HpReport:
    """Ray variant: monotonicity along every sampled ray from an exterior
    point through the domain.  All rays must be monotone for a pass."""
    x_ext = np.asarray(exterior_point, dtype=float)
    if mesh.contains(x_ext[None, :]):
        raise ValueError("ray base point must lie outside the closed domain")
    report = HpReport()
    ok = True
    witness = None
    n_lines = 0
    for target in _base_points(mesh):
        w = target - x_ext
        norm = np.linalg.norm(w)
        if norm == 0:
            continue
        result = _line_monotone(p, mesh, x_ext, w / norm, samples_per_line, tol)
        if result is None:
            continue
        n_lines += 1
        monotone, wit = result
        if not monotone and ok:
            ok, witness = False, wit
    report.checks.append(
        LineCheck(tuple(x_ext.tolist()), n_lines, ok, witness)
    )
    report.passed = ok
    return report

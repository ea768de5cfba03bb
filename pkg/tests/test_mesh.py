import numpy as np
import pytest

from pxlap.errors import DomainError, MeshMismatchError
from pxlap.mesh import (
    GridFunction,
    build_interval_mesh,
    build_rectangle_mesh,
    dilate_domain,
    integrate,
    load_grid_function_csv,
    restrict,
)


def test_interval_mesh_basic():
    m = build_interval_mesh(0.0, 1.0, 4)
    assert m.n_nodes == 5
    assert np.allclose(m.nodes[:, 0], [0.0, 0.25, 0.5, 0.75, 1.0])
    assert list(m.boundary_nodes) == [0, 4]


def test_interval_mesh_fine():
    m = build_interval_mesh(0.0, 1.0, 256)
    assert m.n_nodes == 257
    assert np.allclose(m.element_measures, 1.0 / 256)


def test_interval_mesh_degenerate():
    with pytest.raises(DomainError):
        build_interval_mesh(1.0, 0.0, 4)
    with pytest.raises(DomainError):
        build_interval_mesh(0.0, 1.0, 3)


def test_rectangle_mesh_counts():
    m = build_rectangle_mesh(0, 0, 1, 1, 2, 2)
    assert m.n_nodes == 9
    assert m.n_elements == 8
    assert len(m.boundary_nodes) == 8
    m16 = build_rectangle_mesh(0, 0, 1, 1, 16, 16)
    assert m16.n_nodes == 289


def test_rectangle_mesh_degenerate():
    with pytest.raises(DomainError):
        build_rectangle_mesh(0, 0, 0, 1, 2, 2)


def test_dilate_interval():
    m = build_interval_mesh(0.0, 1.0, 10)
    big = dilate_domain(m, 0.1)
    assert big.nodes[0, 0] == pytest.approx(-0.1)
    assert big.nodes[-1, 0] == pytest.approx(1.1)
    # density preserved
    assert big.element_measures.mean() == pytest.approx(0.1, rel=1e-12)


def test_dilate_rectangle():
    m = build_rectangle_mesh(0, 0, 1, 1, 4, 4)
    big = dilate_domain(m, 0.25)
    lo, hi = big.bbox
    assert np.allclose(lo, [-0.25, -0.25])
    assert np.allclose(hi, [1.25, 1.25])


def test_dilate_zero_margin_rejected():
    m = build_interval_mesh(0.0, 1.0, 10)
    with pytest.raises(DomainError):
        dilate_domain(m, 0.0)


def test_integrate_polynomials():
    m = build_interval_mesh(0.0, 1.0, 8)
    ones = np.ones((m.n_elements, m.n_qp))
    assert integrate(ones, m) == pytest.approx(1.0, abs=1e-15)
    x = m.quad_points[:, :, 0]
    assert integrate(x, m) == pytest.approx(0.5, abs=1e-14)
    # frozen from the antiderivative x^3/3
    assert integrate(x**2, m) == pytest.approx(1.0 / 3.0, abs=1e-14)
    assert integrate(x**5, m) == pytest.approx(1.0 / 6.0, abs=1e-14)


def test_integrate_2d_polynomials():
    m = build_rectangle_mesh(0, 0, 1, 1, 4, 4)
    x = m.quad_points[:, :, 0]
    y = m.quad_points[:, :, 1]
    assert integrate(x * y, m) == pytest.approx(0.25, abs=1e-14)
    assert integrate(x**2 * y**3, m) == pytest.approx(1.0 / 12.0, abs=1e-14)


def test_integrate_linearity(rng):
    m = build_interval_mesh(0.0, 1.0, 16)
    f = rng.standard_normal((m.n_elements, m.n_qp))
    g = rng.standard_normal((m.n_elements, m.n_qp))
    a, b = 2.7, -1.3
    lhs = integrate(a * f + b * g, m)
    rhs = a * integrate(f, m) + b * integrate(g, m)
    assert lhs == pytest.approx(rhs, rel=1e-13)


def test_integrate_convergence_order():
    # degree-5 Gauss rule: error O(h^6) on smooth integrands
    errs = []
    for n in (8, 16):
        m = build_interval_mesh(0.0, 1.0, n)
        x = m.quad_points[:, :, 0]
        val = integrate(np.sin(3.0 * x) * np.exp(x), m)
        exact = (np.exp(1) * (np.sin(3) - 3 * np.cos(3)) + 3) / 10.0
        errs.append(abs(val - exact))
    assert errs[1] < errs[0] / 40.0


def test_gridfunction_dirichlet_flag():
    m = build_interval_mesh(0.0, 1.0, 4)
    with pytest.raises(MeshMismatchError):
        GridFunction(m, np.ones(m.n_nodes), dirichlet_zero=True)
    GridFunction.zeros(m)  # valid


def test_gridfunction_eval_reproduces_linears():
    m = build_interval_mesh(0.0, 1.0, 8)
    u = GridFunction.from_callable(m, lambda pts: 3.0 * pts[:, 0] - 1.0)
    pts = np.linspace(0.05, 0.95, 17)[:, None]
    assert np.allclose(u.eval(pts), 3.0 * pts[:, 0] - 1.0, atol=1e-14)


def test_gridfunction_eval_2d_linears():
    m = build_rectangle_mesh(0, 0, 1, 1, 4, 4)
    u = GridFunction.from_callable(m, lambda pts: pts[:, 0] + 2.0 * pts[:, 1])
    rng = np.random.default_rng(3)
    pts = rng.random((40, 2))
    assert np.allclose(u.eval(pts), pts[:, 0] + 2.0 * pts[:, 1], atol=1e-13)


def test_restrict_constants_and_linears():
    fine = build_interval_mesh(-0.25, 1.25, 24)
    coarse = build_interval_mesh(0.0, 1.0, 16)
    const = GridFunction.from_callable(fine, lambda pts: np.ones(len(pts)))
    assert np.allclose(restrict(const, coarse).values, 1.0, atol=0.0)
    lin = GridFunction.from_callable(fine, lambda pts: pts[:, 0])
    assert np.allclose(restrict(lin, coarse).values, coarse.nodes[:, 0], atol=1e-14)


def test_restrict_containment_violation():
    small = build_interval_mesh(0.0, 1.0, 8)
    big = build_interval_mesh(-1.0, 2.0, 8)
    u = GridFunction.zeros(small)
    with pytest.raises(DomainError):
        restrict(u, big)


def test_csv_roundtrip(tmp_path):
    m = build_interval_mesh(0.0, 1.0, 8)
    u = GridFunction.from_callable(m, lambda pts: np.pi * pts[:, 0] ** 2)
    path = tmp_path / "u.csv"
    u.save_csv(path)
    v = load_grid_function_csv(path, m)
    assert np.array_equal(u.values, v.values)  # 17 significant digits roundtrip


def test_csv_roundtrip_2d(tmp_path):
    m = build_rectangle_mesh(0, 0, 1, 1, 3, 3)
    u = GridFunction.from_callable(m, lambda pts: np.e * pts[:, 0] - pts[:, 1] ** 3)
    path = tmp_path / "u2.csv"
    u.save_csv(path)
    assert path.read_text().splitlines()[0] == "x,y,value"
    v = load_grid_function_csv(path, m)
    assert np.array_equal(u.values, v.values)


def test_mesh_arrays_are_readonly():
    m = build_interval_mesh(0.0, 1.0, 4)
    with pytest.raises(ValueError):
        m.nodes[0, 0] = 7.0

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mappedpoisson.fields import ScalarField, make_grid
from mappedpoisson.transform import (Identity, JacobianField, OrientationError, Polar, SinhStretch, Tabulated,
                                     export_physical, jacobian_exact, jacobian_numeric, map_point,
                                     material_tensor, physical_field, potential_passthrough,
                                     tensor_from_map, transform_source)


def _single(x, y):
    return make_grid(3, 3, [x - 1e-3, x + 1e-3, y - 1e-3, y + 1e-3])


def test_map_point_examples():
    xp, yp = map_point(Polar(), np.array(2.0), np.array(math.pi / 2))
    assert xp == pytest.approx(0.0, abs=1e-15) and yp == pytest.approx(2.0)
    assert map_point(Identity(), 0.3, 0.7) == (0.3, 0.7)
    assert map_point(SinhStretch(5, 0.6), 0.0, 0.0) == (0.0, 0.0)


def test_jacobian_exact_examples():
    j = jacobian_exact(Polar(), _single(2.0, math.pi / 2))
    assert j.j_xx[1, 1] == pytest.approx(0.0, abs=1e-15)
    assert j.j_xy[1, 1] == pytest.approx(-2.0)
    assert j.j_yx[1, 1] == pytest.approx(1.0)
    assert j.j_yy[1, 1] == pytest.approx(0.0, abs=1e-15)
    assert j.det[1, 1] == pytest.approx(2.0)
    j = jacobian_exact(Identity(), make_grid(5, 5, [0, 1, 0, 1]))
    assert np.all(j.det == 1.0)
    j = jacobian_exact(SinhStretch(5, 0.6), make_grid(3, 3, [-1, 1, -1, 1]))
    assert (j.j_xx[1, 1], j.j_yy[1, 1], j.j_xy[1, 1], j.det[1, 1]) == pytest.approx((3, 3, 0, 9))


def test_jacobian_exact_rejects_tabulated():
    g = make_grid(5, 5, [0, 1, 0, 1])
    X, Y = g.mesh()
    with pytest.raises(TypeError):
        jacobian_exact(Tabulated(g, X, Y), g)


def test_jacobian_numeric_linear_maps_exact():
    g = make_grid(9, 7, [0, 1, -1, 2])
    X, Y = g.mesh()
    j = jacobian_numeric(X, Y, g)
    assert np.allclose(j.j_xx, 1, atol=1e-13) and np.allclose(j.j_xy, 0, atol=1e-13)
    j = jacobian_numeric(ScalarField(g, 2 * X), ScalarField(g, 3 * Y))
    assert np.allclose(j.det, 6.0, rtol=0, atol=1e-12)
    assert np.allclose(j.j_xx, 2.0, atol=1e-12) and np.allclose(j.j_yy, 3.0, atol=1e-12)


def test_jacobian_numeric_second_order_on_polar():
    errs = []
    for n in (17, 33, 65, 129):
        g = make_grid(n, n, [2, 5, 0, math.pi])
        xp, yp = Polar().physical_nodes(g)
        jn, je = jacobian_numeric(xp, yp, g), jacobian_exact(Polar(), g)
        errs.append(max(np.abs(a - b).max() for a, b in
                        ((jn.j_xx, je.j_xx), (jn.j_xy, je.j_xy), (jn.j_yx, je.j_yx), (jn.j_yy, je.j_yy))))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 3.5) & (ratios < 4.5)), ratios


def test_orientation_error_names_node():
    g = make_grid(5, 5, [0, 1, 0, 1])
    X, Y = g.mesh()
    with pytest.raises(OrientationError, match=r"node \("):
        jacobian_numeric(-X, Y, g)


def test_material_tensor_examples():
    t = tensor_from_map(Polar(), _single(2.0, math.pi / 2))
    assert (t.e_xx[1, 1], t.e_yy[1, 1], t.e_xy[1, 1], t.e_yx[1, 1]) == pytest.approx((2, 0.5, 0, 0), abs=1e-12)
    t = tensor_from_map(Identity(), make_grid(4, 4, [0, 1, 0, 1]))
    assert np.all(t.e_xx == 1) and np.all(t.e_yy == 1) and np.all(t.e_xy == 0)
    t = tensor_from_map(SinhStretch(5, 0.6), make_grid(3, 3, [-1, 1, -1, 1]))
    assert (t.e_xx[1, 1], t.e_yy[1, 1], t.e_xy[1, 1]) == pytest.approx((1, 1, 0))


def test_polar_tensor_all_nodes():
    g = make_grid(65, 65, [2, 5, 0, math.pi])
    t = tensor_from_map(Polar(), g)
    X, _ = g.mesh()
    assert np.abs(t.e_xx - X).max() <= 1e-12
    assert np.abs(t.e_yy - 1 / X).max() <= 1e-12
    assert np.abs(t.e_xy).max() <= 1e-12 and np.abs(t.e_yx).max() <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_tensor_is_spd_with_unit_determinant(j):
    a, b, c, d = j
    if a * d - b * c < 1e-2:
        return
    one = np.ones((1, 1))
    t = material_tensor(JacobianField(a * one, b * one, c * one, d * one))
    t.validate()
    # det(eps) = det(J)^2 / det(J)^2 = 1 for this construction
    det_e = t.e_xx * t.e_yy - t.e_xy * t.e_yx
    assert det_e[0, 0] == pytest.approx(1.0, rel=1e-9)


def test_transform_source_examples():
    g = make_grid(5, 5, [1, 2, 0, 1])
    assert np.all(transform_source(np.zeros(g.shape), np.full(g.shape, 3.0)) == 0)
    t = tensor_from_map(Polar(), g)
    X, _ = g.mesh()
    assert np.allclose(transform_source(np.ones(g.shape), t.det_j), X, atol=1e-14)
    t = tensor_from_map(SinhStretch(5, 0.6), make_grid(3, 3, [-1, 1, -1, 1]))
    assert transform_source(np.full((3, 3), -100.0), t.det_j)[1, 1] == pytest.approx(-900.0)
    with pytest.raises(ValueError):
        transform_source(np.zeros((3, 3)), np.zeros((4, 4)))


def test_physical_field_examples():
    jac = jacobian_exact(Polar(), _single(2.0, math.pi / 2))
    ex, ey = physical_field(np.ones((3, 3)), np.zeros((3, 3)), jac)
    assert (ex[1, 1], ey[1, 1]) == pytest.approx((0.0, 1.0), abs=1e-12)
    ex, ey = physical_field(np.zeros((3, 3)), np.zeros((3, 3)), jac)
    assert np.all(ex == 0) and np.all(ey == 0)
    g = make_grid(4, 4, [0, 1, 0, 1])
    e = np.random.default_rng(0).normal(size=(2, 4, 4))
    ex, ey = physical_field(e[0], e[1], jacobian_exact(Identity(), g))
    assert np.array_equal(ex, e[0]) and np.array_equal(ey, e[1])


def test_physical_field_is_chain_rule():
    # gradient of f(x', y') = x'^2 + 3 y' pulled back through the polar map
    g = make_grid(9, 9, [2, 3, 0.2, 1.0])
    X, Y = g.mesh()
    xp, yp = Polar().physical_nodes(g)
    # d/dx, d/dy of f(x cos y, x sin y) evaluated analytically
    fx = 2 * xp * np.cos(Y) + 3 * np.sin(Y)
    fy = 2 * xp * (-X * np.sin(Y)) + 3 * X * np.cos(Y)
    gx, gy = physical_field(fx, fy, jacobian_exact(Polar(), g))
    assert np.allclose(gx, 2 * xp, atol=1e-12) and np.allclose(gy, 3.0, atol=1e-12)


def test_potential_and_export():
    g = make_grid(5, 5, [2, 5, 0, math.pi])
    phi = ScalarField(g, np.random.default_rng(3).normal(size=g.shape))
    same = potential_passthrough(phi)
    assert np.array_equal(same.values, phi.values) and same.values is not phi.values
    text = export_physical(phi, Polar())
    rows = np.array([[float(v) for v in ln.split(",")] for ln in text.splitlines()[2:]])
    xp, yp = Polar().physical_nodes(g)
    assert np.array_equal(rows[:, 0], xp.ravel()) and np.array_equal(rows[:, 1], yp.ravel())
    assert np.array_equal(rows[:, 2], phi.values.ravel())


def test_tabulated_round_trip_and_sampling():
    g = make_grid(9, 9, [2, 5, 0, math.pi])
    xp, yp = Polar().physical_nodes(g)
    tab = Tabulated(g, xp, yp)
    back = Tabulated.from_csv(tab.to_csv())
    assert back.grid == g and np.array_equal(back.xprime, xp) and np.array_equal(back.yprime, yp)
    cx, cy = tab.sample(g.coarsen())
    assert np.array_equal(cx, xp[::2, ::2])
    with pytest.raises(ValueError):
        tab.sample(make_grid(4, 4, [2, 5, 0, math.pi]))
    assert tab.point(g.x[2], g.y[3]) == (xp[2, 3], yp[2, 3])

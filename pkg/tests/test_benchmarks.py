import math

import numpy as np
import pytest

from mappedpoisson.benchmarks import (SolverOptions, circle_laplace_case, circle_poisson_case, make_case,
                                      run_convergence_study, run_timing_comparison, semi_annulus_case,
                                      solve_case)
from mappedpoisson.discrete import ProblemInstance
from mappedpoisson.fields import BoundarySpec, Dirichlet, error_norms, make_grid
from mappedpoisson.multigrid import build_hierarchy, mg_solve
from mappedpoisson.transform import MaterialTensor


def test_semi_annulus_exact():
    c = semi_annulus_case()
    ex = c.exact
    assert ex(np.array(2.0), np.array(0.0)) == pytest.approx(1.0)
    assert ex(np.array(0.0), np.array(5.0)) == pytest.approx(0.0, abs=1e-15)
    assert ex(np.array(math.sqrt(10)), np.array(0.0)) == pytest.approx(0.5)
    assert c.grid.nx == 201 and c.params == {"a": 2.0, "R": 5.0, "phi0": 1.0, "n": 201}


def test_semi_annulus_tensor():
    c = semi_annulus_case(n=33)
    t = c.instance().tensor
    X, _ = c.grid.mesh()
    assert np.allclose(t.e_xx, X, atol=1e-12) and np.allclose(t.e_yy, 1 / X, atol=1e-12)
    assert np.abs(t.e_xy).max() <= 1e-12


def test_circle_poisson_exact():
    c = circle_poisson_case(n=33)
    assert c.exact(np.array(0.0), np.array(0.0)) == 0.0
    assert c.exact(np.array(1.0), np.array(1.0)) == 0.5
    assert c.exact(np.array(2.0), np.array(0.0)) == 1.0


def test_circle_laplace_exact():
    c = circle_laplace_case(n=33)
    assert c.exact(np.array(0.0), np.array(0.0)) == 0.0
    th = math.pi / 16
    assert c.exact(np.array(0.5 * math.cos(th)), np.array(0.5 * math.sin(th))) == pytest.approx(0.00390625)
    assert c.exact(np.array(math.cos(th)), np.array(math.sin(th))) == pytest.approx(1.0)


def test_unknown_case():
    with pytest.raises(ValueError):
        make_case("nope")
    with pytest.raises(ValueError):
        semi_annulus_case(a=5, R=2)


def test_wrong_source_sign_is_order_one():
    c = circle_poisson_case(n=33)
    inst = c.instance()
    good = solve_case(c).phi
    flipped = ProblemInstance(inst.grid, inst.tensor, -inst.rho, inst.bc, inst.neumann)
    bad = mg_solve(build_hierarchy(flipped, c.cmap)).phi
    exact = c.exact_field()
    assert error_norms(good, exact).l_inf < 1e-2
    assert error_norms(bad, exact).l_inf > 0.3


def test_manufactured_quadratic_exact():
    # eps = I and a quadratic solution: the discrete solution is exact
    g = make_grid(33, 33, [0, 1, 0, 2])
    X, Y = g.mesh()
    exact = X ** 2 - 0.5 * Y ** 2 + X * Y
    edges = {}
    for e in ("west", "east", "south", "north"):
        ii, jj = g.edge_nodes(e)
        edges[e] = Dirichlet(exact[ii, jj])
    inst = ProblemInstance(g, MaterialTensor.identity(g.shape), np.full(g.shape, 1.0), BoundarySpec(edges))
    phi = mg_solve(build_hierarchy(inst, None), tol=1e-13).phi
    assert np.abs(phi - exact).max() < 1e-10


def test_convergence_study_shape():
    out = run_convergence_study("semi_annulus", [17, 33, 65])
    assert [r["N"] for r in out["rows"]] == [17, 33, 65]
    assert set(out["slopes"]) == {"l1", "l2", "linf"}
    assert 1.8 <= out["slopes"]["l2"] <= 2.2
    with pytest.raises(ValueError):
        run_convergence_study("semi_annulus", [17, 33])


def test_timing_small_grid_both_converge():
    rows = run_timing_comparison("circle_laplace", [33], repeats=1)
    assert rows[0]["N"] == 33 and rows[0]["cycles"] > 0 and rows[0]["iters"] > 0
    assert rows[0]["t_mg"] > 0 and rows[0]["t_sor"] > 0


def test_sor_path_semi_annulus_second_order():
    errs = []
    for n in (33, 65):
        c = semi_annulus_case(n=n)
        errs.append(error_norms(solve_case(c, "sor", SolverOptions()).phi, c.exact_field()).l_inf)
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_copy_neumann_mode_still_solves():
    c = semi_annulus_case(n=33)
    phi = solve_case(c, "sor", SolverOptions(neumann="copy")).phi
    assert error_norms(phi, c.exact_field()).l_inf < 1e-2

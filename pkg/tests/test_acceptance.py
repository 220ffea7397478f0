"""Acceptance suite: one test per criterion, tolerances as stated.

Each test attaches a ``detail`` string with the measured numbers; the
conftest prints a PASS/FAIL line per criterion at the end of the run.
"""

import math
import statistics
import time

import numpy as np
import pytest

from mappedpoisson.benchmarks import (SolverOptions, circle_map, make_case, run_convergence_study, solve_case,
                                      timed_solve)
from mappedpoisson.cases import (ArbitraryObstacle, CircleObstacle, FlowConfig, StretchedBeamConfig,
                                 build_arbitrary_obstacle, compare_beam, run_potential_flow)
from mappedpoisson.discrete import ProblemInstance, apply_operator
from mappedpoisson.fields import BoundarySpec, convergence_slope, make_grid
from mappedpoisson.multigrid import prolong, reduction_factors, restrict
from mappedpoisson.transform import (MaterialTensor, Polar, jacobian_exact, jacobian_numeric,
                                     tensor_from_map)

SCAN = [33, 65, 129, 257]
BAND = (1.8, 2.2)
CASES = ("semi_annulus", "circle_poisson", "circle_laplace")


def _in_band(v):
    return BAND[0] <= v <= BAND[1]


def _fmt_slopes(s):
    return "slopes l1=%.3f l2=%.3f linf=%.3f" % (s["l1"], s["l2"], s["linf"])


@pytest.fixture(scope="module")
def studies():
    out = {}
    for name in CASES:
        t0 = time.perf_counter()
        out[name] = run_convergence_study(name, SCAN, "mg", SolverOptions(), **({"a": 2.0, "R": 5.0, "phi0": 1.0}
                                                                                  if name == "semi_annulus" else {}))
        out[name]["elapsed"] = time.perf_counter() - t0
    return out


def test_c1_semi_annulus_second_order(studies, record_property):
    s = studies["semi_annulus"]
    record_property("detail", f"{_fmt_slopes(s['slopes'])}, {s['elapsed']:.1f}s")
    assert all(_in_band(v) for v in s["slopes"].values())
    assert s["elapsed"] < 30.0


def test_c2_circle_poisson_second_order(studies, record_property):
    s = studies["circle_poisson"]
    linf = {r["N"]: r["linf"] for r in s["rows"]}
    ratio = linf[129] / linf[257]
    record_property("detail", f"{_fmt_slopes(s['slopes'])}, Linf(129)/Linf(257)={ratio:.3f}")
    assert all(_in_band(v) for v in s["slopes"].values())
    assert 3.2 <= ratio <= 4.8


def test_c3_circle_laplace_second_order(studies, record_property):
    s = studies["circle_laplace"]
    record_property("detail", _fmt_slopes(s["slopes"]))
    assert all(_in_band(v) for v in s["slopes"].values())


def test_c4_mg_sor_cross_validation(record_property):
    opts = SolverOptions(tol=1e-10, omega=1.875)
    diffs = {}
    for name in CASES:
        case = make_case(name, n=129)
        mg = solve_case(case, "mg", opts)
        sor = solve_case(case, "sor", opts)
        diffs[name] = float(np.abs(mg.phi - sor.phi).max())
    record_property("detail", ", ".join(f"{k}={v:.2e}" for k, v in diffs.items()))
    assert all(v <= 1e-8 for v in diffs.values())


def _median_solve_time(case, solver, opts, repeats=3):
    runs = [timed_solve(case, solver, opts) for _ in range(repeats)]
    return statistics.median(r[0] for r in runs), all(r[2] for r in runs)


def test_c5_multigrid_efficiency(studies, record_property):
    opts = SolverOptions()
    notes, ok = [], True
    # (a) solve-only wall time, setup excluded for both solvers. MG must reach
    # the tolerance; a SOR run that stalls above it only bounds its time from below
    for name, n, factor in (("semi_annulus", 201, 1.0), ("circle_poisson", 257, 0.5),
                            ("circle_laplace", 257, 0.5)):
        case = make_case(name, n=n)
        t_mg, mg_ok = _median_solve_time(case, "mg", opts)
        t_sor, sor_ok = _median_solve_time(case, "sor", opts, repeats=1 if n > 201 else 3)
        passed = mg_ok and (t_mg < t_sor if factor == 1.0 else t_mg <= factor * t_sor)
        ok &= passed
        notes.append(f"{name}@{n} sor/mg={'>' if not sor_ok else ''}{t_sor / t_mg:.1f}x")
    # (b) cycle growth per doubling
    worst = 0.0
    for name in CASES:
        cyc = [r["iterations"] for r in studies[name]["rows"]]
        worst = max(worst, max(b / a - 1 for a, b in zip(cyc, cyc[1:])))
    ok &= worst <= 0.5
    notes.append(f"max cycle growth {100 * worst:.0f}%")
    # (c) mean per-cycle residual reduction at the finest scan resolution
    rmax = 0.0
    for name in CASES:
        res = solve_case(make_case(name, n=257), "mg", opts)
        rmax = max(rmax, float(np.mean(reduction_factors(res.residual_history))))
    ok &= rmax <= 0.5
    notes.append(f"max mean reduction {rmax:.3f}")
    record_property("detail", ", ".join(notes))
    assert ok


def test_c6_operator_and_transfer(record_property):
    rng = np.random.default_rng(20240601)
    worst_op = 0.0
    for _ in range(20):
        nx, ny = rng.integers(5, 40, size=2)
        g = make_grid(int(nx), int(ny), [0.0, rng.uniform(0.5, 2), 0.0, rng.uniform(0.5, 2)])
        inst = ProblemInstance(g, MaterialTensor.identity(g.shape), np.zeros(g.shape),
                               BoundarySpec.all_dirichlet(0.0))
        phi = rng.normal(size=g.shape)
        ref = np.zeros_like(phi)
        ref[1:-1, 1:-1] = -((phi[2:, 1:-1] - 2 * phi[1:-1, 1:-1] + phi[:-2, 1:-1]) / g.dx ** 2
                            + (phi[1:-1, 2:] - 2 * phi[1:-1, 1:-1] + phi[1:-1, :-2]) / g.dy ** 2)
        got = apply_operator(phi, inst)
        worst_op = max(worst_op, float(np.abs(got - ref)[1:-1, 1:-1].max() / max(1.0, np.abs(ref).max())))
    worst_adj = 0.0
    for _ in range(20):
        k = int(rng.integers(2, 7))
        nc = 2 ** k + 1
        f = rng.normal(size=(2 * nc - 1, 2 * nc - 1))
        c = rng.normal(size=(nc, nc))
        f[[0, -1], :] = f[:, [0, -1]] = 0
        c[[0, -1], :] = c[:, [0, -1]] = 0
        lhs, rhs = np.sum(restrict(f) * c), 0.25 * np.sum(f * prolong(c))
        worst_adj = max(worst_adj, abs(lhs - rhs) / max(1.0, abs(lhs)))
    record_property("detail", f"operator rel err {worst_op:.1e}, adjoint rel err {worst_adj:.1e}")
    assert worst_op <= 1e-12 and worst_adj <= 1e-12


def test_c7_transformation(record_property):
    g = make_grid(201, 201, [2, 5, 0, math.pi])
    t = tensor_from_map(Polar(), g)
    X, _ = g.mesh()
    terr = max(np.abs(t.e_xx - X).max(), np.abs(t.e_yy - 1 / X).max(), np.abs(t.e_xy).max(),
               np.abs(t.e_yx).max())
    pairs = []
    for n in (17, 33, 65, 129, 257):
        gg = make_grid(n, n, [2, 5, 0, math.pi])
        jn = jacobian_numeric(*Polar().physical_nodes(gg), gg)
        je = jacobian_exact(Polar(), gg)
        err = max(np.abs(a - b).max() for a, b in
                  ((jn.j_xx, je.j_xx), (jn.j_xy, je.j_xy), (jn.j_yx, je.j_yx), (jn.j_yy, je.j_yy)))
        pairs.append((gg.dx, err))
    slope = convergence_slope(pairs)
    record_property("detail", f"tensor err {terr:.1e}, jacobian slope {slope:.3f}")
    assert terr <= 1e-12 and _in_band(slope)


def test_c8_grid_generation(record_property):
    m = circle_map(2.0, 257)
    r = np.hypot(m.xprime, m.yprime)
    edge = np.zeros(r.shape, bool)
    edge[[0, -1], :] = edge[:, [0, -1]] = True
    rim_err = float(np.abs(r[edge] - 2.0).max())
    rmax_in = float(r[~edge].max())
    det_c = float(jacobian_numeric(m.xprime, m.yprime, m.grid, check=False).det.min())
    a = build_arbitrary_obstacle(FlowConfig(obstacle=ArbitraryObstacle(a=10.0, n=3)))
    det_a = float(jacobian_numeric(a.xprime, a.yprime, a.grid, check=False).det.min())
    record_property("detail", f"rim err {rim_err:.1e}, max interior r {rmax_in:.6f}, "
                              f"min det circle {det_c:.2e}, min det arbitrary {det_a:.3f}")
    assert rim_err <= 1e-12 and rmax_in < 2.0 and det_c > 0 and det_a > 0


def test_c9_stretched_beam(record_property):
    cfg = StretchedBeamConfig(s=5.0, alpha=0.6, N=129, rho0=100.0, sigma_x=0.5, sigma_y=0.5)
    comp = compare_beam(cfg, (129, 257, 513))
    st = comp["stretched"]
    d = [r["linf"] for r in comp["references"]]
    # repeat the two timed solves and compare medians
    t_str = statistics.median([st["wall_time_s"]] + [compare_beam(cfg, ())["stretched"]["wall_time_s"]
                                                      for _ in range(2)])
    t_ref = statistics.median([r["wall_time_s"] for r in
                               [comp["references"][-1]] + [compare_beam(cfg, (513,))["references"][0]
                                                           for _ in range(2)]])
    record_property("detail", f"offdiag {st['max_offdiag_eps']:.1e}, linf vs ref "
                              + "/".join(f"{v:.4f}" for v in d)
                              + f", t_stretched {t_str:.2f}s < t_513 {t_ref:.2f}s, n_equiv {st['n_equiv']}")
    assert st["max_offdiag_eps"] == 0.0
    assert d[0] > d[1] > d[2]
    assert t_str < t_ref


def test_c10_potential_flow(record_property):
    cfg = FlowConfig(obstacle=CircleObstacle(), phi0=-1.0, phi1=1.0)
    res = run_potential_flow(cfg)
    psi = res.psi
    g = cfg.grid
    obstacle_zero = bool(np.all(psi[res.mask] == 0.0))
    antisym = float(np.abs(psi[:, ::-1] + psi).max())
    prof = cfg.phi0 + (cfg.phi1 - cfg.phi0) / cfg.Ly * (g.y - g.y_min)
    linear = bool(np.array_equal(psi[0], prof) and np.array_equal(psi[-1], prof))
    record_property("detail", f"obstacle psi==0: {obstacle_zero}, antisymmetry {antisym:.1e}, "
                              f"inlet/outlet linear: {linear}")
    assert obstacle_zero and antisym <= 1e-8 and linear

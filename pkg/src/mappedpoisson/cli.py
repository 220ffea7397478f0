"""Command-line entry point.

Every command computes all of its outputs in memory first and only then
writes them, so a failed run never leaves a partial output directory.

Exit codes: 0 success, 2 invalid configuration or usage, 3 solver did not
converge, 4 I/O error, 5 run finished but a checked band was missed
(convergence slopes outside [1.8, 2.2]).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from .benchmarks import make_case, prepare, run_convergence_study, run_prepared, run_timing_comparison
from .cases import (ArbitraryObstacle, CircleObstacle, FlowConfig, StretchedBeamConfig, compare_beam,
                    run_potential_flow, run_stretched_beam)
from .config import COMMANDS, ConfigError, RunConfig, manifest, parse_config
from .discrete import ConvergenceError
from .fields import ScalarField, error_norms, make_grid
from .gridgen import SinusoidalDeform, SquareToCircle, boundary_trace, generate_map, quality_report

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO, EXIT_BAND = 0, 2, 3, 4, 5
SLOPE_BAND = (1.8, 2.2)


def _csv(header: str, rows) -> str:
    lines = [header]
    lines += [",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n"


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _residual_csv(history) -> str:
    return _csv("iteration,residual_l2", ((k, float(r)) for k, r in enumerate(history)))


# ---------------------------------------------------------------------------
# commands; each returns (files, summary, exit status)


def _cmd_solve(cfg: RunConfig, with_norms: bool):
    p = dict(cfg.params)
    case = make_case(cfg.target, **p)
    prepared = prepare(case, cfg.solver, cfg.options)
    res = run_prepared(prepared, cfg.solver, cfg.options)
    field = ScalarField(case.grid, res.phi)
    xp, yp = case.physical_nodes()
    files = {
        "field_computational.csv": field.to_csv(),
        "field_physical.csv": field.to_csv(xp, yp),
        "residual.csv": _residual_csv(res.residual_history),
    }
    summary = {"case": cfg.target, "solver": cfg.solver, **res.summary()}
    if cfg.solver == "mg":
        summary["hierarchy"] = prepared.summary()
    if with_norms:
        n = error_norms(res.phi, case.exact_field())
        files["norms.csv"] = _csv("N,dx,l1,l2,linf", [(case.grid.nx, case.grid.dx, n.l1, n.l2, n.l_inf)])
        summary["norms"] = {"l1": n.l1, "l2": n.l2, "linf": n.l_inf}
    return files, summary, EXIT_OK


def _cmd_converge(cfg: RunConfig):
    p = dict(cfg.params)
    study = run_convergence_study(cfg.target, p.pop("resolutions"), cfg.solver, cfg.options, **p)
    rows = study["rows"]
    slopes = study["slopes"]
    lo, hi = SLOPE_BAND
    in_band = {k: lo <= v <= hi for k, v in slopes.items()}
    files = {
        "convergence.csv": _csv("N,dx,l1,l2,linf", ((r["N"], r["dx"], r["l1"], r["l2"], r["linf"]) for r in rows)),
        "slopes.csv": _csv("norm,slope,in_band", ((k, slopes[k], in_band[k]) for k in ("l1", "l2", "linf"))),
    }
    summary = {"case": cfg.target, "solver": cfg.solver, "slopes": slopes, "in_band": in_band,
               "band": list(SLOPE_BAND), "iterations": {r["N"]: r["iterations"] for r in rows}}
    return files, summary, EXIT_OK if all(in_band.values()) else EXIT_BAND


def _cmd_timing(cfg: RunConfig):
    p = dict(cfg.params)
    res, reps = p.pop("resolutions"), p.pop("repeats")
    table = run_timing_comparison(cfg.target, res, reps, cfg.options, **p)
    rows = [(r["N"], 1e3 * r["t_mg"], 1e3 * r["t_sor"], r["cycles"], r["iters"]) for r in table]
    files = {"timing.csv": _csv("N,t_mg_ms,t_sor_ms,cycles,iters", rows)}
    summary = {"case": cfg.target, "repeats": reps,
               "rows": [{**r, "speedup": r["t_sor"] / r["t_mg"]} for r in table]}
    return files, summary, EXIT_OK


def _cmd_gengrid(cfg: RunConfig):
    p = cfg.params
    if cfg.target == "square_to_circle":
        b = p["b"]
        grid = make_grid(p["n"], p["n"], [-b, b, -b, b])
        spec = SquareToCircle(b)
    else:
        h = p["L"] / 2
        grid = make_grid(p["n"], p["n"], [-h, h, -h, h])
        spec = SinusoidalDeform(p["a"], p["n_osc"], -p["half"], p["half"], -p["half"], p["half"])
    cmap = generate_map(boundary_trace(spec, grid), grid, tol=p["tol"])
    quality = quality_report(cmap)
    files = {"map.csv": cmap.to_csv(), "quality.json": _json(quality)}
    return files, {"spec": cfg.target, "quality": quality}, EXIT_OK


def _cmd_beam(cfg: RunConfig):
    p = dict(cfg.params)
    n_refs = p.pop("n_refs")
    bc = StretchedBeamConfig(tol=cfg.options.tol, **p)
    beam = run_stretched_beam(bc)
    comp = compare_beam(bc, n_refs, beam)
    field = ScalarField(bc.grid, beam.phi)
    files = {
        "field_computational.csv": field.to_csv(),
        "field_physical.csv": field.to_csv(beam.xprime, beam.yprime),
        "comparison.csv": _csv("n_ref,linf", ((r["n_ref"], r["linf"]) for r in comp["references"])),
    }
    return files, {"n_equiv": beam.n_equiv, **comp}, EXIT_OK


def _cmd_flow(cfg: RunConfig):
    p = dict(cfg.params)
    if cfg.target == "circle":
        ob = CircleObstacle(p.pop("b"))
    else:
        ob = ArbitraryObstacle(p.pop("a"), p.pop("n_osc"), p.pop("half"))
    fc = FlowConfig(obstacle=ob, tol=cfg.options.tol, **p)
    res = run_potential_flow(fc)
    grid = fc.grid
    field = ScalarField(grid, res.psi)
    xp, yp = res.cmap.xprime, res.cmap.yprime
    X, Y = grid.mesh()
    header = "# " + ",".join(str(v) for v in (grid.nx, grid.ny, *grid.extents))
    vel = _csv(header + "\nx,y,xprime,yprime,u,v",
               zip(*(a.ravel().tolist() for a in (X, Y, xp, yp, res.u, res.v))))
    files = {
        "psi_computational.csv": field.to_csv(),
        "psi_physical.csv": field.to_csv(xp, yp),
        "velocity.csv": vel,
        "map.csv": res.cmap.to_csv(),
    }
    return files, res.stats, EXIT_OK


def execute(cfg: RunConfig):
    """Run ``cfg`` and return ``(files, summary, status)`` without touching the disk."""
    c = cfg.command
    if c in ("solve", "benchmark"):
        return _cmd_solve(cfg, with_norms=c == "benchmark")
    return {"converge": _cmd_converge, "timing": _cmd_timing, "gengrid": _cmd_gengrid,
            "beam": _cmd_beam, "flow": _cmd_flow}[c](cfg)


def write_outputs(out_dir: str, files: dict) -> None:
    """Write into a scratch directory beside ``out_dir`` then move the files in place."""
    out_dir = os.path.abspath(out_dir)
    parent = os.path.dirname(out_dir)
    os.makedirs(parent, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=parent, prefix=".partial-") as tmp:
        for name, text in files.items():
            with open(os.path.join(tmp, name), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        os.makedirs(out_dir, exist_ok=True)
        for name in files:
            os.replace(os.path.join(tmp, name), os.path.join(out_dir, name))


def _fail(kind: str, message: str, code: int, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mappedpoisson",
                                 description="Transformed Poisson solver: benchmarks, grid generation and case runs.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("target", nargs="?", default=None,
                    help="benchmark case, gengrid spec or flow obstacle")
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--out", help="output directory (default ./out/<command>)")
    ap.add_argument("--solver", choices=("mg", "sor"))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    text = ""
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            return _fail("io", f"cannot read config: {exc}", EXIT_IO)
    try:
        cfg = parse_config(text, args.command, args.target, args.solver, args.out)
    except ConfigError as exc:
        print(json.dumps(exc.to_json()), file=sys.stderr)
        return EXIT_CONFIG
    out_dir = cfg.out or os.path.join("out", cfg.command)
    try:
        files, summary, status = execute(cfg)
    except ConvergenceError as exc:
        return _fail("convergence", str(exc), EXIT_SOLVER,
                     iterations=exc.result.iterations if exc.result else None)
    except ValueError as exc:
        # parameter combinations only detectable while building (alignment, folded grids)
        return _fail("config", str(exc), EXIT_CONFIG)
    files["summary.json"] = _json({"command": cfg.command, "status": status, **summary})
    files["manifest.json"] = manifest(cfg, {"outputs": sorted(files) + ["manifest.json"]})
    try:
        write_outputs(out_dir, files)
    except OSError as exc:
        return _fail("io", f"cannot write outputs: {exc}", EXIT_IO)
    print(json.dumps({"status": status, "out": out_dir, "files": sorted(files)}))
    return status


if __name__ == "__main__":
    sys.exit(main())

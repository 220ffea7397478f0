"""Run configuration: a small sectioned ``key = value`` format.

Example::

    [solver]
    tol = 1e-10
    omega = 1.875

    [case]
    a = 2
    R = 5

Lines starting with ``#`` or ``;`` are comments. ``stdlib configparser`` is
not used because errors must point at the offending line.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .benchmarks import SolverOptions

COMMANDS = ("solve", "benchmark", "converge", "timing", "gengrid", "beam", "flow")
TARGETS = {
    "solve": ("semi_annulus", "circle_poisson", "circle_laplace"),
    "benchmark": ("semi_annulus", "circle_poisson", "circle_laplace"),
    "converge": ("semi_annulus", "circle_poisson", "circle_laplace"),
    "timing": ("semi_annulus", "circle_poisson", "circle_laplace"),
    "gengrid": ("square_to_circle", "sinusoidal"),
    "beam": (None,),
    "flow": ("circle", "arbitrary"),
}


class ConfigError(ValueError):
    """Invalid configuration; carries the key and line number when known."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.key, self.line = key, line

    def to_json(self) -> dict:
        return {"error": "config", "message": str(self), "key": self.key, "line": self.line}


def _ints(text: str) -> list:
    return [int(t) for t in text.replace(",", " ").split()]


def _opt_int(text: str):
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


SOLVER_KEYS = {
    "tol": float, "omega": float, "levels": _opt_int, "nu1": int, "nu2": int,
    "coarse_sweeps": int, "omega_smooth": float, "max_cycles": int, "max_iters": int,
    "neumann": str,
}
RUN_KEYS = {"solver": str, "out": str, "target": str}

_SEMI = {"a": (float, 2.0), "R": (float, 5.0), "phi0": (float, 1.0), "n": (int, 201)}
_CPOIS = {"b": (float, 2.0), "n": (int, 257)}
_CLAP = {"b": (float, 1.0), "n_mode": (int, 8), "n": (int, 257)}
_BENCH = {"semi_annulus": _SEMI, "circle_poisson": _CPOIS, "circle_laplace": _CLAP}
_SCAN = {"resolutions": (_ints, [33, 65, 129, 257])}
_TIMING = {"resolutions": (_ints, [65, 129, 257]), "repeats": (int, 3)}
_GENGRID = {
    "square_to_circle": {"b": (float, 2.0), "n": (int, 257), "tol": (float, 1e-10)},
    "sinusoidal": {"a": (float, 10.0), "n_osc": (int, 3), "L": (float, 10.0),
                   "half": (float, 2.5), "n": (int, 257), "tol": (float, 1e-10)},
}
_BEAM = {"s": (float, 5.0), "alpha": (float, 0.6), "L": (float, 6.0), "N": (int, 129),
         "rho0": (float, 100.0), "sigma_x": (float, 0.5), "sigma_y": (float, 0.5),
         "x0": (float, 0.0), "y0": (float, 0.0), "n_refs": (_ints, [129, 257, 513])}
_FLOW_COMMON = {"Lx": (float, 10.0), "Ly": (float, 10.0), "N": (int, 257),
                "phi0": (float, -1.0), "phi1": (float, 1.0)}
_FLOW = {
    "circle": {**_FLOW_COMMON, "b": (float, 2.5)},
    "arbitrary": {**_FLOW_COMMON, "a": (float, 10.0), "n_osc": (int, 3), "half": (float, 2.5)},
}


def case_schema(command: str, target: str | None) -> dict:
    """Accepted ``[case]`` keys with their converters and defaults."""
    if command in ("solve", "benchmark"):
        return dict(_BENCH[target])
    if command == "converge":
        return {k: v for k, v in _BENCH[target].items() if k != "n"} | _SCAN
    if command == "timing":
        return {k: v for k, v in _BENCH[target].items() if k != "n"} | _TIMING
    if command == "gengrid":
        return dict(_GENGRID[target])
    if command == "beam":
        return dict(_BEAM)
    if command == "flow":
        return dict(_FLOW[target])
    raise ConfigError(f"unknown command {command!r}; choose from {COMMANDS}")


@dataclass
class RunConfig:
    command: str
    target: str | None = None
    solver: str = "mg"
    out: str | None = None
    options: SolverOptions = field(default_factory=SolverOptions)
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"command": self.command, "target": self.target, "solver": self.solver,
                "out": self.out, "solver_options": asdict(self.options), "params": dict(self.params)}

    def to_text(self) -> str:
        """Render back into the config format; parsing it reproduces this config."""
        def fmt(v):
            if isinstance(v, (list, tuple)):
                return " ".join(str(x) for x in v)
            return "auto" if v is None else repr(float(v)) if isinstance(v, float) else str(v)

        lines = ["[run]", f"solver = {self.solver}"]
        if self.target is not None:
            lines.append(f"target = {self.target}")
        lines += ["", "[solver]"]
        lines += [f"{k} = {fmt(v)}" for k, v in asdict(self.options).items()]
        lines += ["", "[case]"]
        lines += [f"{k} = {fmt(v)}" for k, v in self.params.items()]
        return "\n".join(lines) + "\n"


def _tokenize(text: str):
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("malformed section header", line=lineno)
            section = line[1:-1].strip().lower()
            if section not in ("run", "solver", "case"):
                raise ConfigError(f"unknown section [{section}]", line=lineno)
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", line=lineno)
        if section is None:
            raise ConfigError("key outside any section", key=key, line=lineno)
        yield section, key, value, lineno


def parse_config(text: str, command: str, target: str | None = None,
                 solver: str | None = None, out: str | None = None) -> RunConfig:
    """Validate ``text`` for ``command``; CLI-level ``target``/``solver``/``out`` override the file."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; choose from {COMMANDS}")
    entries = list(_tokenize(text))
    seen = {}
    for section, key, value, lineno in entries:
        if (section, key) in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[section, key]})", key, lineno)
        seen[section, key] = lineno

    run = {k: (v, ln) for s, k, v, ln in entries if s == "run"}
    for k, (_, ln) in run.items():
        if k not in RUN_KEYS:
            raise ConfigError("unknown key in [run]", k, ln)
    target = target or run.get("target", (None,))[0]
    allowed = TARGETS[command]
    if target is None:
        target = allowed[0]
    if target not in allowed:
        ln = run["target"][1] if "target" in run else None
        raise ConfigError(f"unknown target {target!r} for {command}; choose from {allowed}", "target", ln)

    cfg = RunConfig(command, target)
    cfg.solver = solver or run.get("solver", ("mg",))[0]
    if cfg.solver not in ("mg", "sor"):
        ln = run["solver"][1] if "solver" in run and not solver else None
        raise ConfigError(f"solver must be 'mg' or 'sor', got {cfg.solver!r}", "solver", ln)
    cfg.out = out or run.get("out", (None,))[0]

    opts = {}
    for s, k, v, ln in entries:
        if s != "solver":
            continue
        if k not in SOLVER_KEYS:
            raise ConfigError("unknown key in [solver]", k, ln)
        try:
            opts[k] = SOLVER_KEYS[k](v)
        except ValueError:
            raise ConfigError(f"cannot convert {v!r} with {SOLVER_KEYS[k].__name__}", k, ln) from None
    cfg.options = SolverOptions(**opts)
    o, line_of = cfg.options, {k: ln for (s, k), ln in seen.items() if s == "solver"}
    checks = [
        ("tol", o.tol > 0, "tol must be positive"),
        ("omega", 1.0 <= o.omega < 2.0, f"omega must lie in [1, 2), got {o.omega}"),
        ("omega_smooth", 0.0 < o.omega_smooth < 2.0, "omega_smooth must lie in (0, 2)"),
        ("levels", o.levels is None or o.levels >= 1, "levels must be >= 1"),
        ("nu1", o.nu1 >= 0, "nu1 must be >= 0"),
        ("nu2", o.nu2 >= 0, "nu2 must be >= 0"),
        ("coarse_sweeps", o.coarse_sweeps >= 1, "coarse_sweeps must be >= 1"),
        ("max_cycles", o.max_cycles >= 1, "max_cycles must be >= 1"),
        ("max_iters", o.max_iters >= 1, "max_iters must be >= 1"),
        ("neumann", o.neumann in ("ghost", "copy"), "neumann must be 'ghost' or 'copy'"),
    ]
    for key, ok, msg in checks:
        if not ok:
            raise ConfigError(msg, key, line_of.get(key))
    if o.nu1 + o.nu2 == 0:
        raise ConfigError("at least one of nu1, nu2 must be positive", "nu1", line_of.get("nu1"))

    schema = case_schema(command, target)
    params = {k: d for k, (_, d) in schema.items()}
    for s, k, v, ln in entries:
        if s != "case":
            continue
        if k not in schema:
            raise ConfigError(f"unknown key for {command} {target or ''}".rstrip(), k, ln)
        conv = schema[k][0]
        try:
            params[k] = conv(v)
        except ValueError:
            raise ConfigError(f"cannot convert {v!r} with {conv.__name__.lstrip('_')}", k, ln) from None
    _check_params(command, params, {k: ln for (s, k), ln in seen.items() if s == "case"})
    cfg.params = params
    return cfg


def _check_params(command, p, line_of):
    def need(key, ok, msg):
        if key in p and not ok:
            raise ConfigError(msg, key, line_of.get(key))

    for key in ("n", "N"):
        need(key, p.get(key, 3) >= 3, f"{key} must be >= 3")
    for key in ("b", "s", "alpha", "L", "Lx", "Ly", "sigma_x", "sigma_y", "half"):
        need(key, p.get(key, 1.0) > 0, f"{key} must be positive")
    need("R", p.get("R", 1.0) > p.get("a", 0.0) > 0, "need 0 < a < R")
    need("n_mode", p.get("n_mode", 1) >= 1, "n_mode must be >= 1")
    need("repeats", p.get("repeats", 1) >= 1, "repeats must be >= 1")
    need("resolutions", len(p.get("resolutions", [0, 0, 0])) >= (3 if command == "converge" else 1),
         "too few resolutions")
    need("resolutions", all(n >= 3 for n in p.get("resolutions", [])), "resolutions must be >= 3")
    need("phi1", p.get("phi1", 1.0) > p.get("phi0", 0.0), "need phi1 > phi0")
    need("n_refs", len(p.get("n_refs", [0])) >= 1 and all(n >= 3 for n in p.get("n_refs", [])),
         "n_refs must be a non-empty list of sizes >= 3")


def manifest(cfg: RunConfig, extra: dict | None = None) -> str:
    from . import __version__
    data = {"package": "mappedpoisson", "version": __version__, "config": cfg.to_dict(),
            "config_text": cfg.to_text()}
    if extra:
        data.update(extra)
    return json.dumps(data, indent=2, sort_keys=True) + "\n"

"""Command line: solve, sweep, invert, degree, validate."""

from __future__ import annotations

import argparse
import dataclasses
import enum
import json
import math
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import __version__
from .cone_map import ConeSlopes, decay_constant
from .degree import Box, degree_s1r3, degree_s2r2, invert_F, s1r3_winding
from .errors import InvalidParameters, NoneFound, SolitonForgeError
from .geometry import curvature_arrays, residual_arrays
from .integrator import IntegrationParams, PointFailure, SolitonSolution, integrate, sweep
from .profile_ode import InitialConditions, Topology

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 2, 3, 4
COMMANDS = ("solve", "sweep", "invert", "degree", "validate")
TRAJECTORY_COLUMNS = ("r", "a", "da", "b", "db", "f", "df", "R", "trace_residual", "bianchi_residual")
SUMMARY_COLUMNS = ("topology", "orbit_size", "f0", "status", "termination", "r_max", "r0", "K",
                   "a_slope", "b_slope", "err_estimate", "decay_constant",
                   "max_trace_residual", "max_bianchi_residual", "error")
CONFIG_KEYS = ("command", "topology", "a0", "b0", "f0", "f0_grid", "orbit_grid", "rtol", "atol",
               "rmax", "target_a", "target_b", "box", "out", "format", "einstein")


class BadConfig(InvalidParameters):
    pass


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    count: int
    log: bool = False

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        parts = text.split(":")
        if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] not in ("log", "lin")):
            raise BadConfig(f"grid spec must be min:max:count(:log), got {text!r}")
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise BadConfig(f"grid spec must be min:max:count(:log), got {text!r}")
        spec = cls(lo, hi, n, len(parts) == 4 and parts[3] == "log")
        if n < 1 or (n > 1 and not lo < hi) or (n == 1 and lo > hi):
            raise BadConfig(f"grid spec needs min < max and count >= 1: {text!r}")
        if spec.log and lo * hi <= 0:
            raise BadConfig("log grids need endpoints of one sign")
        return spec

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.lo])
        if self.log:
            return np.sign(self.lo) * np.geomspace(abs(self.lo), abs(self.hi), self.count)
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class RunConfig:
    command: str
    topology: Topology = Topology.S1xR3
    orbit_size: Optional[float] = None
    f0: Optional[float] = None
    orbit_grid: Optional[GridSpec] = None
    f0_grid: Optional[GridSpec] = None
    rtol: float = 1e-10
    atol: float = 1e-12
    rmax: Optional[float] = None
    target_a: Optional[float] = None
    target_b: Optional[float] = None
    box: Optional[Box] = None
    out: Optional[str] = None
    format: str = "csv"
    einstein: bool = False

    def params(self) -> IntegrationParams:
        p = IntegrationParams(rel_tol=self.rtol, abs_tol=self.atol, r_max=self.rmax,
                              einstein=self.einstein)
        p.validate()
        return p


# --------------------------------------------------------------------------
# formatting


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def to_json_text(obj, indent: int = 0) -> str:
    """Deterministic JSON: fixed key order as given, floats at 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "NaN"
        if math.isinf(v):
            return "Infinity" if v > 0 else "-Infinity"
        return "%.17g" % v
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json_text(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if not len(obj):
            return "[]"
        if all(isinstance(v, (int, float, np.floating, np.integer)) or v is None for v in obj):
            return "[" + ", ".join(to_json_text(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + to_json_text(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def plain(obj):
    """Dataclasses, enums and numpy values to JSON-ready builtins."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Exception):
        return f"{type(obj).__name__}: {obj}"
    return obj


def header_line(kind: str) -> str:
    return f"# soliton-forge v{__version__} {kind}"


def summary_record(sol, ic: InitialConditions) -> dict:
    rec = dict.fromkeys(SUMMARY_COLUMNS)
    rec.update(topology=ic.topology.cli_tag, orbit_size=ic.orbit_size, f0=ic.f0)
    if isinstance(sol, PointFailure):
        rec.update(status="failed", error=f"{type(sol.error).__name__}: {sol.error}")
        return rec
    d = sol.diagnostics
    rec.update(status="ok", termination=d.termination, r_max=sol.r_max, r0=sol.r0, K=sol.K,
               max_trace_residual=d.max_trace_residual, max_bianchi_residual=d.max_bianchi_residual)
    if sol.slopes is not None:
        rec.update(a_slope=sol.slopes.a_slope, b_slope=sol.slopes.b_slope,
                   err_estimate=sol.slopes.err_estimate)
    if not ic.is_einstein:
        try:
            rec["decay_constant"] = decay_constant(sol)
        except SolitonForgeError as exc:
            rec["error"] = f"{type(exc).__name__}: {exc}"
    return rec


def trajectory_rows(sol: SolitonSolution) -> list:
    fr = curvature_arrays(sol.y)
    res = residual_arrays(sol.r, sol.y, sol.ic)
    cols = [sol.r] + [sol.y[:, k] for k in range(6)] + [fr["scalar"], res["trace"], res["bianchi"]]
    return [list(row) for row in zip(*cols)]


def write_csv(path_or_stream, kind: str, columns, rows, meta: dict | None = None):
    lines = [header_line(kind)]
    for k, v in (meta or {}).items():
        lines.append(f"# {k}={fmt(v)}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    _emit(path_or_stream, "\n".join(lines) + "\n")


def _emit(path_or_stream, text: str):
    if path_or_stream is None or path_or_stream == "-":
        sys.stdout.write(text)
    elif hasattr(path_or_stream, "write"):
        path_or_stream.write(text)
    else:
        with open(path_or_stream, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def write_json(path, doc: dict):
    doc = {"version": f"soliton-forge v{__version__}", **doc}
    _emit(path, to_json_text(plain(doc)) + "\n")


# --------------------------------------------------------------------------
# commands


def _ic(cfg: RunConfig) -> InitialConditions:
    orbit = cfg.orbit_size
    if orbit is None or cfg.f0 is None:
        raise BadConfig("solve needs an orbit size (--a0 or --b0) and --f0")
    return InitialConditions(cfg.topology, orbit, cfg.f0)


def cmd_solve(cfg: RunConfig) -> int:
    ic = _ic(cfg)
    ic.validate()
    params = cfg.params()
    if cfg.einstein and params.r_max is None:
        params = dataclasses.replace(params, r_max=5.0)
    sol = integrate(ic, params)
    summary = summary_record(sol, ic)
    if cfg.format == "json":
        write_json(cfg.out, {"summary": summary,
                             "trajectory": {"columns": list(TRAJECTORY_COLUMNS),
                                            "rows": trajectory_rows(sol)}})
    else:
        write_csv(cfg.out, "trajectory", TRAJECTORY_COLUMNS, trajectory_rows(sol), summary)
    if cfg.out not in (None, "-"):
        sys.stdout.write(to_json_text(plain(summary)) + "\n")
    return EXIT_OK


def _grid_ics(cfg: RunConfig) -> list:
    orbits = cfg.orbit_grid.values() if cfg.orbit_grid else (
        [cfg.orbit_size] if cfg.orbit_size is not None else None)
    f0s = cfg.f0_grid.values() if cfg.f0_grid else ([cfg.f0] if cfg.f0 is not None else None)
    if orbits is None or f0s is None:
        raise BadConfig("sweep needs orbit sizes (--orbit-grid or --a0/--b0) and f0 values")
    ics = [InitialConditions(cfg.topology, float(o), float(f)) for o in orbits for f in f0s]
    for ic in ics:
        ic.validate()
    return ics


def cmd_sweep(cfg: RunConfig) -> int:
    ics = _grid_ics(cfg)
    results = sweep(ics, cfg.params())
    records = [summary_record(s, ic) for s, ic in zip(results, ics)]
    if cfg.format == "json":
        write_json(cfg.out, {"records": records})
    else:
        write_csv(cfg.out, "sweep", SUMMARY_COLUMNS, [[r[c] for c in SUMMARY_COLUMNS] for r in records])
    return EXIT_OK if all(r["status"] == "ok" for r in records) else EXIT_NUMERICAL


def _default_box(top: Topology) -> Box:
    return Box(0.5, 2.0, 0.1, 10.0) if top is Topology.S1xR3 else Box(0.2, 5.0, 0.1, 10.0)


def _report_doc(rep) -> dict:
    doc = plain(rep)
    doc["preimages"] = [dict(topology=p.ic.topology.cli_tag, orbit_size=p.ic.orbit_size,
                             f0=p.ic.f0, sign=p.sign, residual=p.residual, det=p.det)
                        for p in rep.preimages]
    return doc


def _write_report(cfg: RunConfig, doc: dict):
    if cfg.format == "json":
        write_json(cfg.out, {"report": doc})
        return
    rows = [[p["topology"], p["orbit_size"], p["f0"], p["sign"], p["residual"], p["det"]]
            for p in doc.get("preimages", [])]
    meta = {k: v for k, v in doc.items() if k not in ("preimages", "details")}
    meta = {k: (json.dumps(plain(v)) if isinstance(v, (dict, list)) else v) for k, v in meta.items()}
    write_csv(cfg.out, "preimages", ("topology", "orbit_size", "f0", "sign", "residual", "det"),
              rows, meta)


def cmd_invert(cfg: RunConfig) -> int:
    if cfg.target_a is None or cfg.target_b is None:
        raise BadConfig("invert needs --target-a and --target-b")
    box = cfg.box or _default_box(cfg.topology)
    target = ConeSlopes(cfg.target_a, cfg.target_b)
    try:
        pre = invert_F(target, cfg.topology, box, cfg.params())
        none_found = False
    except NoneFound:
        pre, none_found = [], True
    doc = dict(topology=cfg.topology.cli_tag, target=[cfg.target_a, cfg.target_b],
               search_box=list(box.as_tuple()), none_found=none_found,
               signed_count=sum(p.sign for p in pre), preimages=[])
    doc["preimages"] = [dict(topology=p.ic.topology.cli_tag, orbit_size=p.ic.orbit_size, f0=p.ic.f0,
                             sign=p.sign, residual=p.residual, det=p.det) for p in pre]
    _write_report(cfg, doc)
    return EXIT_OK


def cmd_degree(cfg: RunConfig) -> int:
    params = cfg.params()
    if cfg.topology is Topology.S1xR3:
        target = cfg.target_b if cfg.target_b is not None else 1.0
        rng = (1e-3, 1e2)
        if cfg.f0_grid is not None:
            a, b = sorted((abs(cfg.f0_grid.lo), abs(cfg.f0_grid.hi)))
            rng = (a, b)
        n = cfg.f0_grid.count if cfg.f0_grid is not None and cfg.f0_grid.count > 2 else 26
        rep = degree_s1r3(target, rng, params, n_grid=n)
        box = cfg.box or _default_box(cfg.topology)
        wind = s1r3_winding(box, params=params)
        rep.winding = wind.winding
        rep.search_box = box
        rep.details["winding_target"] = wind.target.as_array().tolist()
    else:
        rep = degree_s2r2(cfg.box or _default_box(cfg.topology), params)
    doc = _report_doc(rep)
    if cfg.topology is Topology.S2xR2:
        doc["details"]["level_set"] = [plain(p) for p in rep.details["level_set"]]
    _write_report(cfg, doc)
    ok = (abs(rep.signed_count) == 1 == abs(rep.winding) and rep.signed_count == rep.winding
          if cfg.topology is Topology.S1xR3 else rep.winding == 0 and not rep.preimages)
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_validate(cfg: RunConfig) -> int:
    from .validation import run_all

    rows = run_all(lambda line: print(line, file=sys.stderr))
    if cfg.format == "json":
        write_json(cfg.out, {"checks": [plain(r) for r in rows]})
    else:
        write_csv(cfg.out, "validate", ("name", "passed", "detail"),
                  [[r.name, r.passed, '"' + r.detail.replace('"', "'") + '"'] for r in rows])
    return EXIT_OK if all(r.passed for r in rows) else EXIT_VALIDATION


HANDLERS = dict(solve=cmd_solve, sweep=cmd_sweep, invert=cmd_invert, degree=cmd_degree,
                validate=cmd_validate)


# --------------------------------------------------------------------------
# parsing


def read_config_file(path: str) -> dict:
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise BadConfig(f"cannot read config file {path}: {exc}")
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BadConfig(f"{path}:{n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.replace("-", "_")
        if k not in CONFIG_KEYS:
            raise BadConfig(f"{path}:{n}: unknown key {k!r}")
        out[k] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="soliton-forge",
                                description="Expanding Ricci solitons on S1xR3 and S2xR2.")
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--topology", choices=("s1r3", "s2r2"))
    p.add_argument("--a0", type=float)
    p.add_argument("--b0", type=float)
    p.add_argument("--f0", type=float)
    p.add_argument("--f0-grid", dest="f0_grid")
    p.add_argument("--orbit-grid", dest="orbit_grid")
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--rmax", type=float)
    p.add_argument("--target-a", dest="target_a", type=float)
    p.add_argument("--target-b", dest="target_b", type=float)
    p.add_argument("--box")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--einstein", action="store_const", const=True, default=None)
    p.add_argument("--config")
    p.add_argument("--version", action="version", version=f"soliton-forge v{__version__}")
    return p


def _as_float(key, v):
    try:
        return float(v)
    except (TypeError, ValueError):
        raise BadConfig(f"{key} must be a number, got {v!r}")


def _as_bool(key, v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off", ""):
        return False
    raise BadConfig(f"{key} must be a boolean, got {v!r}")


def config_from_args(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    merged = read_config_file(args.config) if args.config else {}
    for k in CONFIG_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            merged[k] = v
    command = merged.get("command")
    if command not in COMMANDS:
        raise BadConfig(f"command must be one of {COMMANDS}, got {command!r}")
    top = Topology.parse(merged.get("topology", "s1r3"))
    a0 = merged.get("a0")
    b0 = merged.get("b0")
    if top is Topology.S1xR3 and b0 is not None or top is Topology.S2xR2 and a0 is not None:
        raise BadConfig("use --a0 with s1r3 and --b0 with s2r2")
    orbit = a0 if top is Topology.S1xR3 else b0
    fmt_ = merged.get("format", "csv")
    if fmt_ not in ("csv", "json"):
        raise BadConfig(f"format must be csv or json, got {fmt_!r}")
    box = None
    if merged.get("box"):
        parts = str(merged["box"]).split(":")
        if len(parts) != 4:
            raise BadConfig("box must be a:b:c:d (orbit_lo:orbit_hi:minus_f0_lo:minus_f0_hi)")
        box = Box(*(_as_float("box", x) for x in parts))
    cfg = RunConfig(
        command=command, topology=top,
        orbit_size=None if orbit is None else _as_float("orbit size", orbit),
        f0=None if merged.get("f0") is None else _as_float("f0", merged["f0"]),
        orbit_grid=GridSpec.parse(merged["orbit_grid"]) if merged.get("orbit_grid") else None,
        f0_grid=GridSpec.parse(merged["f0_grid"]) if merged.get("f0_grid") else None,
        rtol=_as_float("rtol", merged.get("rtol", 1e-10)),
        atol=_as_float("atol", merged.get("atol", 1e-12)),
        rmax=None if merged.get("rmax") is None else _as_float("rmax", merged["rmax"]),
        target_a=None if merged.get("target_a") is None else _as_float("target_a", merged["target_a"]),
        target_b=None if merged.get("target_b") is None else _as_float("target_b", merged["target_b"]),
        box=box, out=merged.get("out"), format=fmt_,
        einstein=_as_bool("einstein", merged.get("einstein", False)),
    )
    cfg.params()
    return cfg


def run(config: RunConfig) -> int:
    """Execute one command; returns the process exit status."""
    try:
        return HANDLERS[config.command](config)
    except InvalidParameters as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolitonForgeError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except InvalidParameters as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

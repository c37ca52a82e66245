"""Command-line driver.

Usage::

    cooperbound {bound|simulate|verify|scan} --config PATH [--seed N] [--out DIR]

Every invocation appends one JSON record to ``DIR/runs.jsonl``; ``bound``
and ``scan`` also write ``DIR/scan.csv``.  Exit status is 0 on success, 1 if
a check fails or an estimate is not finite, 2 on usage or config errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import scan_csv, theorem_bounds
from .checks import default_suite
from .config import COMMANDS, ConfigError, RunConfig, parse_config
from .ensemble import Ensemble, EnsembleSpec, SamplerSettings
from .fock import FermionModel, cooper_operator
from .gauge import GaugeCouplings
from .lattice import LatticeSpec

__all__ = ["run", "main", "record_payload"]

VOLATILE = ("timestamp", "wall_time")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def record_payload(record: dict) -> str:
    """Canonical JSON of a record without its time-dependent fields."""
    return json.dumps({k: v for k, v in record.items() if k not in VOLATILE}, sort_keys=True)


# -- builders ----------------------------------------------------------------------

def _lattice(cfg: RunConfig) -> LatticeSpec:
    lc = cfg["lattice"]
    if lc["shape"]:
        return LatticeSpec.box(lc["shape"])
    return LatticeSpec.symmetric(lc["L"], lc["dim"])


def _ensemble_spec(cfg: RunConfig) -> EnsembleSpec:
    m, c, s, q = cfg["model"], cfg["couplings"], cfg["sampler"], cfg["quadrature"]
    return EnsembleSpec(
        _lattice(cfg),
        FermionModel(t=m["t"], U=m["U"], V=m["V"], mu=m["mu"]),
        GaugeCouplings(kappa=c["kappa"], alpha=c["alpha"], beta=c["beta"], flux_frozen=c["flux_frozen"]),
        SamplerSettings(delta=s["delta"], sweeps=s["sweeps"], thermalization=s["thermalization"],
                        chains=s["chains"], tune=s["tune"], target_acceptance=s["target_acceptance"],
                        bins=s["bins"]),
        quad_nodes=q["nodes"], quad_tol=q["tol"])


def _observable_sites(cfg: RunConfig, lat: LatticeSpec):
    o = cfg["observable"]
    u = o["u"] or tuple(int(c) for c in lat.sites[-1])
    v = o["v"] or u
    return u, v


def _bound_rows(cfg: RunConfig, axis: str | None, values) -> list[tuple[dict, object]]:
    b = cfg["bound"]
    u0 = list(b["u"])
    v0 = list(b["v"]) if b["v"] else list(u0)
    offset = [y - x for x, y in zip(u0, v0)]
    rows = []
    for val in values if axis else [None]:
        params = dict(beta=b["beta"], alpha=b["alpha"], eps=b["eps"])
        u, v = u0, v0
        if axis == "u":
            u = [int(val)] + [0] * (b["D"] - 1)
            v = [x + d for x, d in zip(u, offset)]
        elif axis is not None:
            params[axis] = float(val)
        rep = theorem_bounds(u, v, params["beta"], params["alpha"], b["D"], theorem=b["theorem"],
                             eps=params["eps"], K=b["K"])
        row = {"|u|": float(np.linalg.norm(u)), "g_u": rep.g_u, "g_uv": rep.g_uv, "f": rep.f,
               "exponent": rep.exponent, "bound": rep.bound}
        if axis not in (None, "u"):
            row[axis] = float(val)
        rows.append((row, rep))
    return rows


def _write_csv(path: Path, rows: list[dict], axis: str | None):
    text = scan_csv(rows)
    if axis not in (None, "u"):
        header, *body = text.splitlines()
        text = "\n".join([f"{axis},{header}"] + [f"{r[axis]!r},{line}" for r, line in zip(rows, body)]) + "\n"
    path.write_text(text)


# -- subcommands -----------------------------------------------------------------------

def _cmd_bound(cfg, out):
    pairs = _bound_rows(cfg, None, None)
    _write_csv(out / "scan.csv", [r for r, _ in pairs], None)
    reports = [rep.to_dict() for _, rep in pairs]
    ok = all(math.isfinite(r["exponent"]) for r in reports)
    return reports, ok


def _cmd_scan(cfg, out):
    axis = cfg["scan"]["axis"]
    pairs = _bound_rows(cfg, axis, cfg["scan"]["values"])
    _write_csv(out / "scan.csv", [r for r, _ in pairs], axis)
    return [rep.to_dict() for _, rep in pairs], all(math.isfinite(r["exponent"]) for r, _ in pairs)


def _cmd_simulate(cfg, out):
    spec = _ensemble_spec(cfg)
    lat = spec.lattice
    u, v = _observable_sites(cfg, lat)
    ens = Ensemble(spec)
    op = cooper_operator(lat, u, v)
    est = ens.run_mc({"cooper": op}, seed=cfg.seed)["cooper"]
    result = est.to_dict()
    result["u"], result["v"] = list(u), list(v)
    ok = math.isfinite(est.mean) and math.isfinite(est.stderr)
    if cfg["quadrature"]["compare_exact"]:
        exact = ens.exact_expectation(op)
        result["exact"] = exact.real
        z = abs(est.mean - exact.real) / est.stderr if est.stderr > 0 else math.inf
        result["z_score"] = z
        ok = ok and z <= 3
    return [result], ok


def _cmd_verify(cfg, out):
    vc = cfg["verify"]
    reports = default_suite(cfg.seed, vc["n_random"], vc["trace_trials"], cfg["quadrature"]["nodes"])
    return [r.to_dict() for r in reports], all(r.passed for r in reports)


HANDLERS = {"bound": _cmd_bound, "scan": _cmd_scan, "simulate": _cmd_simulate, "verify": _cmd_verify}


def _append(out: Path, record: dict):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "runs.jsonl", "a", encoding="utf-8") as fh:
        fh.write(json.dumps(_jsonable(record), sort_keys=True) + "\n")


def run(command: str, config: RunConfig, out: str | Path = ".") -> tuple[dict, int]:
    """Execute one subcommand, append its record, return ``(record, exit_code)``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    config.sections["run"]["command"] = command
    start = time.perf_counter()
    record = {"timestamp": datetime.now(timezone.utc).isoformat(), "tool": "cooperbound",
              "version": __version__, "command": command, "seed": config.seed,
              "config": config.to_dict()}
    try:
        results, ok = HANDLERS[command](config, out)
        record["results"] = results
        record["status"] = "ok" if ok else "failed"
        code = 0 if ok else 1
    except Exception as exc:  # the record must still be written
        record["results"] = []
        record["status"] = "error"
        record["error"] = f"{type(exc).__name__}: {exc}"
        code = 1
    record["wall_time"] = time.perf_counter() - start
    record = _jsonable(record)
    _append(out, record)
    return record, code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="cooperbound", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="path to the run configuration")
    ap.add_argument("--seed", type=int, default=None, help="overrides [run] seed")
    ap.add_argument("--out", default=".", help="directory for runs.jsonl and scan.csv")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    overrides = {"run": {"seed": args.seed}} if args.seed is not None else None
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text, overrides)
    except (OSError, ConfigError) as exc:
        print(f"cooperbound: {exc}", file=sys.stderr)
        _append(Path(args.out), {"tool": "cooperbound", "version": __version__, "command": args.command,
                                 "status": "config_error", "error": str(exc), "results": []})
        return 2
    record, code = run(args.command, cfg, args.out)
    summary = {"status": record["status"], "results": len(record["results"])}
    print(json.dumps(summary))
    if record.get("error"):
        print(f"cooperbound: {record['error']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

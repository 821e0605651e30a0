"""Command-line front end.

Subcommands ``optimize``, ``allocate``, ``study``, ``evaluate`` and
``paths-export`` read a JSON config, run, and write JSON/CSV outputs that
embed the fully resolved config and seed. Exit codes: 0 success,
1 runtime failure, 2 config error.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from ._errors import DriftOptError, InvalidArgument
from ._parallel import set_num_threads
from .allocator import ErrorModel, allocate_closed_form, allocate_numeric
from .costs import make_cost, saa_objective
from .optimizer import KbarMode, MirrorDescentConfig, mirror_descent
from .oracles import (RateProblem, equiconvergence_study, rate_decomposition_study,
                      unbiasedness_study)
from .paths import PathBatchSpec, Scheme, generate_paths, make_grid, write_paths_csv
from .subspace import BasisKind, BasisSpec, DriftFunction, FeasibleSetSpec, evaluate_drift

__all__ = ["main", "ConfigError", "load_config", "DEFAULTS"]


class ConfigError(Exception):
    """Invalid config; ``line`` is 1-based when it could be located."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


DEFAULTS = {
    "problem": {
        "horizon": 1.0,
        "sigma": 1.0,
        "initial_x": 0.0,
        "cost": {"name": "linear", "params": {}},
        "basis": "integrated_legendre",
        "feasible": {"kind": "l2_ball", "radius": 1.0, "lower": None, "upper": None},
    },
    "solver": {
        "N": 1024,
        "h": 1 / 32,
        "n": 2,
        "k": 64,
        "eta0": 0.5,
        "seed": 0,
        "scheme": "euler",
        "kbar_mode": "cost_bounds",
        "memory_cap": None,
    },
    "study": {
        "name": "unbiasedness",
        "num_batches": 30,
        "batch_N": 1000,
        "direction": 1,
        "eps": 1e-5,
        "N_values": [16, 32, 64, 128, 256, 512, 1024],
        "probes": 20,
        "replicates": 16,
        "reference_N": None,
        "sweep": "N",
        "values": None,
        "reference_h": 2.0**-12,
        "profile_depth": 0.0,
    },
    "evaluate": {"coefficients": None},
    "allocate": {"budget": 1e6, "method": "auto", "bounds": None},
    "error_model": {"c1": 1.0, "c2": 1.0, "c3": 1.0, "c4": 1.0, "alpha": 1.0, "beta": None},
    "output": {"directory": "driftopt_out", "formats": None},
}

# keys whose value is a nested free-form mapping or list
_LEAF_DICTS = {"problem.cost.params", "allocate.bounds"}


def _locate(text: str, key: str):
    """Best-effort line number of a dotted key in JSON text."""
    if not text:
        return None
    pos = 0
    for part in key.split("."):
        j = text.find(f'"{part}"', pos)
        if j < 0:
            return None
        pos = j + 1
    return text.count("\n", 0, pos) + 1


def _merge(defaults, given, text, prefix=""):
    if not isinstance(given, dict):
        raise ConfigError("expected an object", prefix or None, _locate(text, prefix))
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in defaults:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(defaults))})", path,
                              _locate(text, path))
        if isinstance(defaults[key], dict) and path not in _LEAF_DICTS:
            out[key] = _merge(defaults[key], val, text, path)
        else:
            out[key] = val
    return out


def load_config(path=None, text: str | None = None) -> tuple[dict, str]:
    """Parse and merge a JSON config over :data:`DEFAULTS`.

    Returns the resolved config and the raw text (for diagnostics).
    """
    if text is None:
        if path is None:
            return copy.deepcopy(DEFAULTS), ""
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from None
    return _merge(DEFAULTS, raw, text), text


def _num(cfg, key, text, kind=float, positive=False, allow_none=False):
    node = cfg
    for part in key.split("."):
        node = node[part]
    if node is None and allow_none:
        return None
    ok = isinstance(node, (int, float)) and not isinstance(node, bool)
    if ok and kind is int:
        ok = float(node).is_integer()
    if ok:
        node = kind(node)
        ok = math.isfinite(node) and (not positive or node > 0)
    if not ok:
        want = ("positive " if positive else "") + ("integer" if kind is int else "number")
        raise ConfigError(f"expected a {want}, got {node!r}", key, _locate(text, key))
    return node


class _Built:
    """Library objects assembled from a resolved config."""

    def __init__(self, cfg: dict, text: str):
        p, s = cfg["problem"], cfg["solver"]
        self.cfg, self.text = cfg, text
        self.horizon = _num(cfg, "problem.horizon", text, positive=True)
        self.sigma = _num(cfg, "problem.sigma", text, positive=True)
        self.initial_x = _num(cfg, "problem.initial_x", text)
        self.N = _num(cfg, "solver.N", text, int, positive=True)
        self.h = _num(cfg, "solver.h", text, positive=True)
        self.n = _num(cfg, "solver.n", text, int, positive=True)
        self.k = _num(cfg, "solver.k", text, int, positive=True)
        self.seed = _num(cfg, "solver.seed", text, int)
        self.memory_cap = _num(cfg, "solver.memory_cap", text, int, positive=True, allow_none=True)
        self._guard("problem.cost", lambda: make_cost(p["cost"]["name"], **dict(p["cost"]["params"] or {})),
                    "cost")
        self._guard("solver.h", lambda: make_grid(self.horizon, self.h), "grid")
        self._guard("problem.basis", lambda: BasisSpec(BasisKind(p["basis"]), self.n, self.horizon),
                    "basis")
        self._guard("solver.scheme", lambda: Scheme(s["scheme"]), "scheme")
        self._guard("solver.seed", lambda: PathBatchSpec(self.N, self.scheme, self.sigma,
                                                         self.initial_x, self.seed), "batch_spec")
        self._guard("solver.eta0", lambda: MirrorDescentConfig(
            self.k, _num(cfg, "solver.eta0", text), kbar_mode=KbarMode(s["kbar_mode"])), "md_config")
        f = p["feasible"]
        if f["kind"] == "box":
            self._guard("problem.feasible", lambda: FeasibleSetSpec.box(f["lower"], f["upper"]), "feas")
        else:
            self._guard("problem.feasible", lambda: FeasibleSetSpec(
                f["kind"], radius=_num(cfg, "problem.feasible.radius", text, positive=True)), "feas")
        self._guard("problem.feasible", lambda: self.feas.check_dimension(self.n), "_")

    def _guard(self, key, fn, attr):
        try:
            setattr(self, attr, fn())
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError, DriftOptError) as exc:
            raise ConfigError(str(exc), key, _locate(self.text, key)) from None

    def paths(self, threads):
        return generate_paths(self.batch_spec, self.grid, memory_cap=self.memory_cap, threads=threads)

    def error_model(self) -> ErrorModel:
        em = dict(self.cfg["error_model"])
        if em["beta"] is None:
            em["beta"] = self.batch_spec.weak_order
        try:
            return ErrorModel(**em)
        except InvalidArgument as exc:
            raise ConfigError(str(exc), "error_model", _locate(self.text, "error_model")) from None


# ---------------------------------------------------------------- output helpers

def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _write_text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _provenance(cfg: dict) -> dict:
    return {"config": cfg, "seed": cfg["solver"]["seed"]}


def _csv_text(header, rows, cfg) -> str:
    buf = io.StringIO()
    buf.write("# driftopt " + json.dumps(_provenance(cfg), sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _table(header, rows, cfg, fmt) -> str:
    if fmt == "json":
        return _dump_json({**_provenance(cfg), "columns": header, "rows": rows})
    return _csv_text(header, [[repr(v) if isinstance(v, float) else v for v in r] for r in rows], cfg)


def _fmt(cfg, args) -> str:
    return args.format or (cfg["output"]["formats"] or ["csv"])[0]


# ---------------------------------------------------------------- commands

def cmd_optimize(cfg, text, args, out: Path) -> int:
    b = _Built(cfg, text)
    batch = b.paths(args.threads)
    trace = mirror_descent(batch, b.cost, b.basis, b.feas, b.md_config, threads=args.threads)
    avg = trace.averaged_solution
    obj, se = saa_objective(batch, avg, b.cost, threads=args.threads)
    zero_obj, zero_se = saa_objective(batch, None, b.cost, threads=args.threads)
    drift = evaluate_drift(avg, b.grid)
    model = b.error_model()
    bound = float(model.bound(b.k, b.N, b.n, b.h))
    fmt = _fmt(cfg, args)

    header = ["iteration", "objective", "grad_norm", "step"] + [f"a{j + 1}" for j in range(b.n)]
    rows = [[r.iteration, r.objective, r.grad_norm, r.step_size] + [float(c) for c in r.coefficients]
            for r in trace.records]
    _write_text(out / f"trace.{fmt}", _table(header, rows, cfg, fmt))
    _write_text(out / "solution.json", _dump_json({
        **_provenance(cfg),
        "coefficients": [float(c) for c in avg.coefficients],
        "objective": obj, "objective_se": se,
        "drift": {"times": b.grid.times.tolist(), "values": drift.values.tolist()},
    }))
    _write_text(out / "summary.json", _dump_json({
        **_provenance(cfg), **trace.summary(),
        "objective": obj, "objective_se": se,
        "zero_drift_objective": zero_obj, "zero_drift_se": zero_se,
        "predicted_bound": bound, "error_model": model.__dict__,
    }))
    print(f"objective {obj:.6g} +- {se:.2g} (zero drift {zero_obj:.6g}); "
          f"coefficients {np.array2string(avg.coefficients, precision=5)}")
    print(f"wrote {out}")
    return 0


def cmd_allocate(cfg, text, args, out: Path) -> int:
    b = cfg["allocate"]
    budget = args.budget if args.budget is not None else _num(cfg, "allocate.budget", text, positive=True)
    em = dict(cfg["error_model"])
    if em["beta"] is None:
        em["beta"] = 1.0
    try:
        model = ErrorModel(**em)
    except InvalidArgument as exc:
        raise ConfigError(str(exc), "error_model", _locate(text, "error_model")) from None
    method = b["method"]
    if method not in ("auto", "closed_form", "numeric"):
        raise ConfigError("method must be auto, closed_form or numeric", "allocate.method",
                          _locate(text, "allocate.method"))
    exact = model.alpha == 1.0 and model.beta == 1.0
    try:
        numeric = allocate_numeric(model, budget, b["bounds"])
    except InvalidArgument as exc:
        raise ConfigError(str(exc), "allocate.bounds", _locate(text, "allocate.bounds")) from None
    closed = allocate_closed_form(model, budget) if exact else None
    if method == "closed_form" and not exact:
        raise ConfigError("closed form needs alpha = beta = 1", "allocate.method",
                          _locate(text, "allocate.method"))
    chosen = closed if (method == "closed_form" or (method == "auto" and exact)) else numeric
    rows = [[a.method.value, a.k, a.N, a.n, a.h, a.predicted_bound]
            for a in (closed, numeric) if a is not None]
    header = ["method", "k", "N", "n", "h", "bound"]
    print(f"{'method':<12}{'k':>10}{'N':>10}{'n':>8}{'h':>14}{'bound':>14}")
    for r in rows:
        print(f"{r[0]:<12}{r[1]:>10}{r[2]:>10}{r[3]:>8}{r[4]:>14.6g}{r[5]:>14.6g}")
    if closed is not None:
        rel = max(abs(x - y) / y for x, y in zip(numeric.continuous, closed.continuous))
        print(f"closed form vs numeric: max relative difference {rel:.2e} (pre-rounding)")
    for w in numeric.warnings:
        print(f"warning: {w}")
    fmt = _fmt(cfg, args)
    _write_text(out / f"allocation_table.{fmt}", _table(header, rows, cfg, fmt))
    _write_text(out / "allocation.json", _dump_json({
        **_provenance(cfg), "budget": budget, "error_model": model.__dict__,
        "allocation": chosen.as_dict(),
        "alternatives": [a.as_dict() for a in (closed, numeric) if a is not None],
    }))
    return 0


def cmd_study(cfg, text, args, out: Path) -> int:
    b = _Built(cfg, text)
    st = cfg["study"]
    name = st["name"]
    if name == "unbiasedness":
        nb = _num(cfg, "study.num_batches", text, int, positive=True)
        bn = _num(cfg, "study.batch_N", text, int, positive=True)
        d = st["direction"]
        if isinstance(d, int) and not isinstance(d, bool) and 1 <= d <= b.n:
            coef = np.zeros(b.n)
            coef[d - 1] = 1.0
        elif isinstance(d, list) and len(d) == b.n:
            coef = np.asarray(d, dtype=float)
        else:
            raise ConfigError("direction must be a basis index 1..n or n coefficients",
                              "study.direction", _locate(text, "study.direction"))
        try:
            report = unbiasedness_study(nb, bn, None, DriftFunction(b.basis, coef), b.cost, b.grid,
                                        b.sigma, b.initial_x, b.seed,
                                        eps=_num(cfg, "study.eps", text, positive=True),
                                        scheme=b.scheme, threads=args.threads)
        except InvalidArgument as exc:
            raise ConfigError(str(exc), "study", _locate(text, "study")) from None
    elif name == "equiconvergence":
        Ns = st["N_values"]
        if not (isinstance(Ns, list) and len(Ns) >= 4 and all(isinstance(v, int) and v > 1 for v in Ns)):
            raise ConfigError("N_values must list at least 4 integers > 1", "study.N_values",
                              _locate(text, "study.N_values"))
        report = equiconvergence_study(
            Ns, _num(cfg, "study.probes", text, int, positive=True), b.cost, b.grid, b.basis, b.feas,
            _num(cfg, "study.reference_N", text, int, positive=True, allow_none=True),
            _num(cfg, "study.replicates", text, int, positive=True), b.sigma, b.initial_x, b.seed,
            scheme=b.scheme, threads=args.threads)
    elif name == "rate":
        f = cfg["problem"]["feasible"]
        prob = RateProblem(
            horizon=b.horizon, sigma=b.sigma, initial_x=b.initial_x, cost_name=b.cost.name,
            cost_params=tuple(sorted(b.cost.params.items())), basis_kind=b.basis.kind,
            radius=float(f["radius"] or 1.0),
            box_lower=tuple(f["lower"] or ()) if f["kind"] == "box" else (),
            box_upper=tuple(f["upper"] or ()) if f["kind"] == "box" else (),
            profile_depth=_num(cfg, "study.profile_depth", text),
            k=b.k, N=b.N, n=b.n, h=b.h, scheme=b.scheme, seed=b.seed,
            replicates=_num(cfg, "study.replicates", text, int, positive=True),
            reference_N=_num(cfg, "study.reference_N", text, int, positive=True, allow_none=True) or 64 * b.N,
            reference_h=_num(cfg, "study.reference_h", text, positive=True),
            eta0=b.md_config.eta0, kbar_mode=b.md_config.kbar_mode)
        if st["sweep"] not in ("k", "N", "h", "n"):
            raise ConfigError("sweep must be one of k, N, h, n", "study.sweep", _locate(text, "study.sweep"))
        try:
            report = rate_decomposition_study(prob, st["sweep"], st["values"], threads=args.threads)
        except InvalidArgument as exc:
            raise ConfigError(str(exc), "study", _locate(text, "study")) from None
    else:
        raise ConfigError("study name must be unbiasedness, equiconvergence or rate", "study.name",
                          _locate(text, "study.name"))
    fmt = _fmt(cfg, args)
    _write_text(out / f"{report.study_name}.json", _dump_json({**_provenance(cfg), "report": report.to_dict()}))
    rows = [[float(x), float(y), float(s)] for x, y, s in zip(report.x, report.y, report.y_se)]
    _write_text(out / f"{report.study_name}_points.{fmt}",
                _table([report.variable, "value", "std_error"], rows, cfg, fmt))
    print(report.summary_line())
    if "z" in report.details:
        print(f"z-score {report.details['z']:.3f}")
    return 0


def cmd_evaluate(cfg, text, args, out: Path) -> int:
    b = _Built(cfg, text)
    coef = args.coefficients if args.coefficients is not None else cfg["evaluate"]["coefficients"]
    if coef is None:
        coef = [0.0] * b.n
    if not (isinstance(coef, list) and len(coef) == b.n):
        raise ConfigError(f"expected {b.n} coefficients, got {coef!r}", "evaluate.coefficients",
                          _locate(text, "evaluate.coefficients"))
    try:
        F = DriftFunction(b.basis, coef)
    except InvalidArgument as exc:
        raise ConfigError(str(exc), "evaluate.coefficients", _locate(text, "evaluate.coefficients")) from None
    batch = b.paths(args.threads)
    mean, se = saa_objective(batch, F, b.cost, threads=args.threads)
    lo, hi = mean - 1.96 * se, mean + 1.96 * se
    _write_text(out / "evaluation.json", _dump_json({
        **_provenance(cfg), "coefficients": [float(c) for c in F.coefficients],
        "objective": mean, "std_error": se, "ci95": [lo, hi], "num_paths": len(batch)}))
    print(f"objective {mean:.8g}  SE {se:.3g}  95% CI [{lo:.8g}, {hi:.8g}]  N={len(batch)}")
    return 0


def cmd_paths_export(cfg, text, args, out: Path) -> int:
    b = _Built(cfg, text)
    batch = b.paths(args.threads)
    fmt = _fmt(cfg, args)
    if fmt == "csv":
        buf = io.StringIO()
        write_paths_csv(batch, buf)
        _write_text(out / "paths.csv", buf.getvalue())
    else:
        _write_text(out / "paths.json", _dump_json({
            **_provenance(cfg), "times": b.grid.times.tolist(), "values": batch.values.tolist()}))
    _write_text(out / "paths_meta.json", _dump_json(_provenance(cfg)))
    print(f"wrote {len(batch)} paths x {b.grid.num_points} points to {out}")
    return 0


COMMANDS = {
    "optimize": cmd_optimize,
    "allocate": cmd_allocate,
    "study": cmd_study,
    "evaluate": cmd_evaluate,
    "paths-export": cmd_paths_export,
}


def _coef_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad coefficient list {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driftopt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory (DRIFTOPT_OUT overrides)")
        p.add_argument("--seed", type=int, help="override solver.seed")
        p.add_argument("--threads", type=int, help="worker threads (default: all cores)")
        p.add_argument("--format", choices=["json", "csv"], help="format of tabular outputs")
        if name == "allocate":
            p.add_argument("--budget", type=float, help="override allocate.budget")
        if name == "evaluate":
            p.add_argument("--coefficients", type=_coef_list, help="comma-separated coefficients")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg, text = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer", "--seed")
            cfg["solver"]["seed"] = args.seed
        if args.threads is not None and args.threads < 1:
            raise ConfigError("threads must be >= 1", "--threads")
        out = Path(os.environ.get("DRIFTOPT_OUT") or args.out or cfg["output"]["directory"])
        out.mkdir(parents=True, exist_ok=True)
        if args.threads is not None:
            set_num_threads(args.threads)
        return COMMANDS[args.command](cfg, text, args, out)
    except ConfigError as exc:
        where = f"{args.config}: " if args.config else ""
        print(f"config error: {where}{exc}", file=sys.stderr)
        return 2
    except (DriftOptError, ArithmeticError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

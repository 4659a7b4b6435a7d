"""Command-line driver: JSON config in, JSON report out.

Exit codes: 0 all rows pass, 1 some identity failed, 2 bad configuration,
3 runtime or numerical error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from contextlib import nullcontext
from concurrent.futures import ProcessPoolExecutor
from importlib import resources

import jsonschema
import numpy as np

from . import __version__, chart, curvinv as ci, exprlang
from .dfalg import DegreeError, DoubleForm, debug_corrupt_star
from .models import ModelManifold, build_model, flat_torus, sphere
from .report import FAIL, IDENTITIES, SCHEMA_VERSION, make_row, summarize
from .suites import DEFAULT_FIELDS, SUITE_CHOICES, aggregate, build_tasks, run_task, sample_points

JOBS_ENV = "DOUBLEFORMS_JOBS"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

DEFAULTS = {"n": [4, 5, 6], "trials": 5, "seed": 0, "fd_order": 4, "resolution": 16, "sample_points": 5}


class ConfigError(Exception):
    pass


def load_schema() -> dict:
    return json.loads(resources.files("doubleforms").joinpath("config.schema.json").read_text())


def validate_config(config: dict) -> None:
    try:
        jsonschema.validate(config, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None


def _int_list(text: str) -> list[int]:
    """'4', '4,6', '4-6' or '4-6,8' -> sorted unique ints."""
    out = set()
    try:
        for part in text.split(","):
            if "-" in part:
                lo, hi = part.split("-")
                out.update(range(int(lo), int(hi) + 1))
            else:
                out.add(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers like 4, 4,6 or 4-6; got {text!r}") from None
    return sorted(out)


def _step(text: str):
    values = [float(v) for v in text.split(",")]
    return values[0] if len(values) == 1 else values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", dest="output", help="write the report here instead of stdout")
    common.add_argument("--n", type=_int_list, help="dimensions, e.g. 4-6")
    common.add_argument("--k", type=_int_list, help="restrict degrees k")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--tol", type=float, help="tolerance for every identity")
    common.add_argument("--fd-order", type=int, choices=(2, 4))
    common.add_argument("--fd-step", type=_step, help="finite-difference step (one value or one per axis)")
    common.add_argument("--resolution", type=int, help="quadrature points per axis")
    common.add_argument("--jobs", type=int, help=f"worker processes (default: ${JOBS_ENV} or all cores)")
    common.add_argument("--as-stated", action="store_true", default=None,
                        help="also report the alternative Ricci-change row (expected to fail)")
    common.add_argument("--timing", action="store_true", help="add wall time to the summary")
    common.add_argument("--debug-corrupt-star", action="store_true", help=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="doubleforms", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("invariants", parents=[common], help="curvature invariants of a model or metric")
    verify = sub.add_parser("verify", parents=[common], help="run identity suites")
    verify.add_argument("--suite", choices=SUITE_CHOICES)
    sub.add_parser("conformal", parents=[common], help="conformal operators and transformation laws")
    sub.add_parser("list-identities", parents=[common], help="every identity with its formula and tolerance")
    return parser


_FLAG_KEYS = ("output", "n", "k", "trials", "seed", "tol", "fd_order", "fd_step", "resolution", "jobs",
              "as_stated", "suite")


def merge_config(args) -> dict:
    """Config file values, overridden by command-line flags, then schema-validated."""
    config = {}
    if args.config:
        try:
            with open(args.config) as fh:
                config = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(config, dict):
            raise ConfigError("config must be a JSON object")
    for key in _FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    validate_config(config)
    if config.get("command", args.command) != args.command:
        raise ConfigError(f"config is for {config['command']!r}, not {args.command!r}")
    config["command"] = args.command
    for key in ("n", "k"):
        if isinstance(config.get(key), int):
            config[key] = [config[key]]
    return config


def _tolerances(config) -> dict:
    tol = dict(config.get("tolerances") or {})
    unknown = sorted(set(tol) - set(IDENTITIES))
    if unknown:
        raise ConfigError(f"unknown identities in tolerances: {unknown}")
    if "tol" in config:
        tol = {identity: config["tol"] for identity in IDENTITIES} | tol
    return tol


def _fd(config) -> dict:
    fd = {"fd_order": config.get("fd_order", DEFAULTS["fd_order"])}
    if "fd_step" in config:
        fd["fd_step"] = config["fd_step"]
    return fd


def _resolve_manifold(config):
    """(ModelManifold or None, ChartMetric) for the configured manifold."""
    desc = config.get("manifold")
    try:
        if desc is None:
            return None, None
        if "metric" in desc:
            metric = chart.ChartMetric.from_expressions(desc["metric"], desc["lows"], desc["highs"],
                                                        desc["periodic"], **_fd(config))
            return None, metric
        model = build_model(desc)
        return model, model.chart(**_fd(config))
    except (exprlang.ExprError, chart.ChartError, ValueError, KeyError, OverflowError, DegreeError) as exc:
        raise ConfigError(f"bad manifold: {exc}") from None


def _check_fields(config):
    for name, text in (config.get("fields") or {}).items():
        try:
            exprlang.parse(text)
        except exprlang.ExprSyntaxError as exc:
            raise ConfigError(f"field {name}: {exc}") from None


def _jobs(config) -> int:
    if "jobs" in config:
        return config["jobs"]
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise ConfigError(f"{JOBS_ENV} must be a positive integer") from None
        if jobs < 1:
            raise ConfigError(f"{JOBS_ENV} must be a positive integer")
        return jobs
    return os.cpu_count() or 1


def _plain(value):
    """Make numpy scalars and arrays JSON-friendly; non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else repr(value)
    return value


# --- commands ------------------------------------------------------------------


def cmd_list_identities(config):
    rows = [{"identity": k, "anchor": a, "tolerance": t} for k, (a, t) in IDENTITIES.items()]
    return {"identities": rows}, []


def cmd_verify(config):
    suite = config.get("suite", "all")
    ns = config.get("n", DEFAULTS["n"])
    options = {"tolerances": _tolerances(config), "fd_order": config.get("fd_order", DEFAULTS["fd_order"]),
               "fd_step": config.get("fd_step"), "resolution": config.get("resolution", DEFAULTS["resolution"]),
               "fields": config.get("fields"), "k": config.get("k"), "as_stated": config.get("as_stated", False),
               "debug_corrupt_star": config.get("debug_corrupt_star", False)}
    _check_fields(config)
    if config.get("manifold"):
        _, metric = _resolve_manifold(config)
        options["manifold"] = config["manifold"]
        options["manifold_n"] = metric.n
    tasks = build_tasks(suite, ns, config.get("trials", DEFAULTS["trials"]), config.get("seed", DEFAULTS["seed"]),
                        options)
    jobs = min(_jobs(config), max(1, len(tasks)))
    if jobs == 1:
        results = [run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_task, tasks))
    return {"suite": suite, "tasks": len(tasks)}, aggregate(results)


def _frame_invariants(ctx: ci.CurvatureContext) -> dict:
    n = ctx.n
    out = {"n": n, "scal": ctx.scal,
           "h": {f"h{2 * k}": ci.gauss_bonnet(ctx, k) for k in range(1, n // 2 + 1)},
           "ric_eigenvalue_range": _range(np.linalg.eigvalsh(ctx.ric.matrix()))}
    if n >= 3:
        out["sigma"] = {f"sigma{k}": ci.sigma_k(ctx.A, k) for k in range(0, n + 1)}
        out["T2_eigenvalue_range"] = _range(np.linalg.eigvalsh(ci.lovelock(ctx, 1).matrix()))
    if n >= 4:
        q = ci.quadratic_invariants(ctx)
        out["weyl_norm2"] = q.weyl_norm2
        out["deficiencies"] = {"einstein": q.einstein_def, "conformally_flat": q.confflat_def,
                               "space_form": q.spaceform_def}
        out["flags"] = {"h4_positive": bool(q.h4 > 0), "sigma2_negative": bool(q.sigma2 < 0)}
    return out


def _definiteness(eigs, tol=1e-9):
    if np.all(np.abs(eigs) <= tol):
        return "zero"
    if eigs.min() > tol:
        return "positive"
    if eigs.max() < -tol:
        return "negative"
    return "indefinite"


def _range(values):
    return [float(np.min(values)), float(np.max(values))]


def _oracle_rows(model: ModelManifold, ctx, inv, tol):
    rows = []
    base = {"model": model.name, **model.params}
    for key, expected in sorted(model.oracles.items()):
        if key.startswith("h") and key in inv["h"]:
            got = inv["h"][key]
        elif key.startswith("sigma") and key in inv.get("sigma", {}):
            got = inv["sigma"][key]
        elif key == "scal":
            got = inv["scal"]
        elif key == "ric_eigenvalues":
            got = _range(np.linalg.eigvalsh(ctx.ric.matrix()))
            expected = _range(expected)
        elif key == "T2_eigenvalues" and ctx.n >= 3:
            got = _range(np.linalg.eigvalsh(ci.lovelock(ctx, 1).matrix()))
            expected = _range(expected)
        else:
            continue
        if isinstance(got, list):
            res = max(abs(a - b) / max(1.0, abs(a), abs(b)) for a, b in zip(got, expected))
            rows.append(make_row("model.oracle", dict(base, quantity=key, value=got, expected=expected),
                                 residual=res, tolerances=tol))
        else:
            rows.append(make_row("model.oracle", dict(base, quantity=key), got, expected, tolerances=tol))
    return rows


def _points(config, metric):
    if "points" in config:
        pts = np.asarray(config["points"], dtype=float)
        if pts.shape[-1] != metric.n:
            raise ConfigError(f"points must have {metric.n} coordinates")
        return pts
    return sample_points(metric, config.get("sample_points", DEFAULTS["sample_points"]), config.get("seed", 0))


def cmd_invariants(config):
    tol = _tolerances(config)
    ns = config.get("n", [4])
    model, metric = _resolve_manifold(config)
    if model is None and metric is None:
        model = sphere(ns[0])
        metric = model.chart(**_fd(config))
    results, rows = {}, []
    if model is not None:
        ctx = model.context()
        inv = _frame_invariants(ctx)
        if ctx.n >= 4:
            signs = ci.curvature_signs(ctx)
            inv["signs"] = {"min_sectional": signs.min_sectional, "min_ricci": signs.min_ricci_eig,
                            "min_T2": signs.min_einstein_eig, "h4": signs.h4, "sigma2": signs.sigma2}
        results["model"] = {"name": model.name, "params": model.params, "invariants": inv}
        rows += _oracle_rows(model, ctx, inv, tol)
    want_chart = model is None or "points" in config or "sample_points" in config
    if want_chart:
        pts = _points(config, metric)
        frames = chart.curvature_at(metric, pts)
        per_point = []
        for i, x in enumerate(pts):
            R = DoubleForm(metric.n, 2, 2, frames.R.entries[i])
            ctx_i = ci.CurvatureContext(R, check=False)
            entry = {"point": x, "bianchi_residual": float(np.asarray(frames.bianchi)[i])}
            entry.update(_frame_invariants(ctx_i))
            per_point.append(entry)
            if model is not None:
                ref = model.context().R.entries
                err = float(np.max(np.abs(R.entries - ref)) / max(1.0, float(np.max(np.abs(ref)))))
                rows.append(make_row("model.chart", {"model": model.name, "point": x}, residual=err, tolerances=tol))
        results["chart"] = per_point
    return results, rows


def cmd_conformal(config):
    tol = _tolerances(config)
    ns = config.get("n", [4])
    _check_fields(config)
    model, metric = _resolve_manifold(config)
    if metric is None:
        metric = flat_torus(ns[0]).chart(**_fd(config))
    n = metric.n
    if n < 4:
        raise ConfigError("conformal identities need n >= 4")
    given = config.get("fields") or {}
    fields = dict(DEFAULT_FIELDS, **given)
    pts = _points(config, metric)
    results, rows = {"n": n, "fields": {}, "points": []}, []
    use_f = n == 4 or "f" in given
    use_v = n > 4
    fr = chart.curvature_at(metric, pts)
    T2 = ci.lovelock(ci.CurvatureContext(fr.R, check=False), 1, check=False)
    t2_eigs = np.linalg.eigvalsh(T2.matrix())
    if use_f:
        results["fields"]["f"] = fields["f"]
        check = chart.conformal_h4_check(metric, fields["f"], pts)
        coc = chart.cocycle_check(metric, fields["f"], fields["phi"], pts)
        results["fields"]["phi"] = fields["phi"]
    if use_v:
        results["fields"].update(v=fields["v"], a=fields["a"])
        ops = chart.conformal_power_ops(metric, fields["v"], pts)
        bideg = chart.bidegree_covariance_check(metric, fields["a"], fields["v"], pts)
    for i, x in enumerate(pts):
        base = {"n": n, "point": x}
        entry = {"point": x, "T2_eigenvalue_range": _range(t2_eigs[i]), "T2_definite": _definiteness(t2_eigs[i])}
        if use_f:
            entry["L_f"] = check.operator[i]
            rows.append(make_row("conf.h4_law", dict(base, f=fields["f"]), check.lhs[i], check.rhs[i], tolerances=tol))
            rows.append(make_row("conf.weyl", dict(base, f=fields["f"]), residual=check.weyl_residual[i],
                                 tolerances=tol))
            rows.append(make_row("conf.riemann", dict(base, f=fields["f"]), residual=check.riemann_residual[i],
                                 tolerances=tol))
            rows.append(make_row("conf.volume", dict(base, f=fields["f"]), residual=check.volume_residual[i],
                                 tolerances=tol))
            rows.append(make_row("conf.cocycle", dict(base, f=fields["f"], phi=fields["phi"]), residual=coc[i],
                                 tolerances=tol))
        if use_v:
            entry.update(L_v=ops.L[i], K_v=ops.K[i])
            rows.append(make_row("conf.k_law", dict(base, v=fields["v"]), ops.lhs[i], ops.rhs[i], tolerances=tol))
            rows.append(make_row("conf.bidegree", dict(base, a=fields["a"], phi=fields["v"]), residual=bideg[i],
                                 tolerances=tol))
        results["points"].append(entry)
    if metric.fully_periodic:
        rows += chart.integral_identity_suite(metric, fields["f"] if n == 4 else fields["v"],
                                              config.get("resolution", DEFAULTS["resolution"]), tolerances=tol,
                                              as_stated=config.get("as_stated", False))
    return results, rows


COMMANDS = {"invariants": cmd_invariants, "verify": cmd_verify, "conformal": cmd_conformal,
            "list-identities": cmd_list_identities}


def build_report(config, results, rows, wall=None) -> dict:
    echo = {k: v for k, v in config.items() if k not in ("jobs", "output")}
    summary = summarize(rows)
    if wall is not None:
        summary["wall_time_s"] = wall
    return _plain({"schema_version": SCHEMA_VERSION, "tool": {"name": "doubleforms", "version": __version__},
                   "command": config["command"], "config": echo, "results": results,
                   "rows": [row.to_dict() for row in rows], "summary": summary})


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        config = merge_config(args)
        if args.debug_corrupt_star:
            config["debug_corrupt_star"] = True
        with debug_corrupt_star() if args.debug_corrupt_star else nullcontext():
            results, rows = COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"doubleforms: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, chart.ChartError, DegreeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"doubleforms: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    report = build_report(config, results, rows, time.perf_counter() - start if args.timing else None)
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if config.get("output"):
        try:
            with open(config["output"], "w") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"doubleforms: cannot write report: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
    else:
        sys.stdout.write(text)
    return EXIT_FAIL if any(row.status == FAIL for row in rows) else EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

"""``curvature-lab`` command line entry point.

Every subcommand writes one schema-versioned JSON report embedding a run
manifest.  Exit codes: 0 when every verdict passes, 1 when a violation or a
hypothesis/conclusion disagreement is found, 2 on input errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._util import derive_rng
from .convexity import PreconditionError
from .four_point import DEFAULT_MAX_QUADRUPLES, DEFAULT_PASS_TOL, scan_finite, scan_sampled
from .infinitesimal import ScaleSchedule, estimate_liminf
from .metric_core import InputError, load_finite_space, spot_check_oracle, validate_metric
from .pretangent import (DEFAULT_WINDOW, CertificateError, PointSequence, analyze_pretangent,
                         build_pretangent, curated_pool, load_pool, parse_restriction,
                         restriction_check)
from .spaces import make_oracle, parse_space_spec
from .workflows import busemann_checks, midpoint_checks, theorem_workflow

SCHEMA_VERSION = "1.0"
FUNCTIONAL_FLAGS = {"quad": "quadrilateral", "lp": "lebedeva_petrunin", "ptolemy": "ptolemy"}
# execution-only flags; they never change report content
_UNRECORDED = {"threads", "out", "csv", "csv_dir", "handler"}


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _input_files(args) -> dict:
    files = {}
    for name in ("pool", "file", "report"):
        path = getattr(args, name, None)
        if path:
            files[name] = path
    space = getattr(args, "space", None)
    if space and space.startswith("cloud:"):
        files["cloud"] = space.split(":", 1)[1]
    digests = {}
    for name, path in files.items():
        try:
            digests[name] = _digest(path)
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc}") from exc
    return digests


def _manifest(args, started: float) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in _UNRECORDED}
    return {
        "command": args.command,
        "flags": flags,
        "seed": getattr(args, "seed", None),
        "tool_version": __version__,
        "input_digests": _input_files(args),
        "duration_seconds": round(time.perf_counter() - started, 6),
    }


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def dump_report(report: dict, out) -> str:
    text = json.dumps(_to_jsonable(report), indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    return text


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _csv_path(args, default_suffix=".csv"):
    if getattr(args, "csv", None):
        return args.csv
    if getattr(args, "out", None):
        return str(Path(args.out).with_suffix(default_suffix))
    return None


def _pool(args, oracle):
    source = args.pool if args.pool else curated_pool(oracle)
    return load_pool(source, oracle, args.window)


# -- subcommands ---------------------------------------------------------------

def cmd_validate(args) -> tuple[dict, bool]:
    if args.file:
        space = load_finite_space(args.file)
        rep = validate_metric(space, args.tol)
        return {"kind": "finite", "n": space.n} | rep.to_dict(), rep.passed
    oracle = make_oracle(args.space)
    rep = spot_check_oracle(oracle, derive_rng(args.seed, "validate"), args.triples, args.scale,
                            rel_tol=args.tol)
    return {"kind": "oracle", "space": oracle.name, "triples": args.triples} | rep.to_dict(), rep.passed


def cmd_scan(args) -> tuple[dict, bool]:
    functional = FUNCTIONAL_FLAGS[args.functional]
    if args.file:
        report = scan_finite(load_finite_space(args.file), functional, args.tol, args.threads)
    else:
        oracle = make_oracle(args.space)
        report = scan_sampled(oracle, args.scale, args.samples, functional,
                              derive_rng(args.seed, "scan"), args.tol, args.max_quadruples,
                              args.threads)
    return report.to_dict(), report.passed


def cmd_liminf(args) -> tuple[dict, bool]:
    oracle = make_oracle(args.space)
    schedule = ScaleSchedule.parse(args.scales, args.samples)
    est = estimate_liminf(args.functional, oracle, schedule, args.seed, args.eps,
                          args.max_quadruples, n_jobs=args.threads)
    path = _csv_path(args)
    if path:
        _write_csv(path, ["scale", "min_defect"], est.csv_rows())
    return est.to_dict() | {"space": oracle.name}, est.passed


def cmd_pretangent(args) -> tuple[dict, bool]:
    oracle = make_oracle(args.space)
    r, pool = _pool(args, oracle)
    try:
        family, approx = build_pretangent(pool, r, oracle, args.tau_stab, args.tau_unstab,
                                          args.tau_zero, n_jobs=args.threads)
    except CertificateError as exc:
        return {"certificate_failure": {"message": str(exc), "witness": exc.witness}}, False
    scans = analyze_pretangent(approx, args.tol, args.threads)
    result = {
        "space": oracle.name,
        "window": args.window,
        "pool_order": [s.label for s in family.sequences],
        "accepted": [family.sequences[i].label for i in family.accepted],
        "rejected": {family.sequences[j].label: v for j, v in family.rejected.items()},
        "approximation": approx.to_dict(),
        "scans": {k: v.to_dict() for k, v in scans.items()},
    }
    ok = all(v.passed for v in scans.values())
    if args.restrict:
        check = restriction_check(family, r, oracle.dist, parse_restriction(args.restrict, len(r)))
        result["restriction"] = {"indices": args.restrict} | check
        ok = ok and check["passed"]
    return result, ok


def cmd_convexity(args) -> tuple[dict, bool]:
    oracle = make_oracle(args.space)
    r, pool = _pool(args, oracle)
    seqs = [PointSequence.constant(oracle.base_point, len(r), "p")] + pool
    mid = midpoint_checks(oracle, seqs, args.budget, args.seed, use_hook=not args.no_hook)
    midpoints = mid.pop("_midpoints")
    if args.mode == "midpoint":
        result = {"mode": "midpoint", "space": oracle.name} | mid
        worst = max(mid["pairs"], key=lambda row: _num(row["tail_max"]), default=None)
        profile = worst["profile"] if worst else []
    else:
        bus = busemann_checks(oracle, seqs, midpoints)
        result = {"mode": "busemann", "space": oracle.name, "midpoint": mid} | bus
        worst = max(bus["triples"], key=lambda row: row["tail_max"], default=None)
        profile = worst["profile"] if worst else []
    path = _csv_path(args)
    if path:
        _write_csv(path, ["index", "defect"],
                   [(n + 1, v) for n, v in enumerate(profile)])
    return result, result["passed"]


def _num(v):
    return float("inf") if v == "unbounded" else v


def cmd_theorem(args) -> tuple[dict, bool]:
    oracle = make_oracle(args.space)
    r, pool = _pool(args, oracle)
    schedule = ScaleSchedule.parse(args.scales, args.samples)
    result = theorem_workflow(oracle, args.theorem, pool, r, schedule, args.seed, args.budget,
                              args.tol, args.eps, use_hook=not args.no_hook, n_jobs=args.threads)
    result["space"] = oracle.name
    return result, result["consistent"]


# -- rendering -----------------------------------------------------------------

def render_text(report: dict) -> str:
    """Stable human-readable rendering of a report produced by this tool."""
    if not isinstance(report, dict) or "schema_version" not in report or "command" not in report:
        raise InputError("not a curvature-lab report (missing schema_version/command)")
    cmd = report["command"]
    res = report.get("result")
    if not isinstance(res, dict):
        raise InputError("report has no result object")
    lines = [f"curvature-lab {cmd} (schema {report['schema_version']})"]
    if cmd == "scan":
        lines.append(_render_scan(res))
    elif cmd == "liminf":
        lines.append(f"functional {res['functional']}: tail_inf = {res['tail_inf']!r} "
                     f"(eps {res['eps']!r}) -> {res['verdict']}")
        for t, v in zip(res["scales"], res["per_scale_min"]):
            lines.append(f"  scale {t!r}: min {v!r}")
    elif cmd == "validate":
        lines.append("metric axioms: " + ("pass" if res["passed"] else
                                          f"fail ({len(res['violations'])} violations)"))
    elif cmd == "pretangent":
        if "certificate_failure" in res:
            lines.append("certificate failure: " + res["certificate_failure"]["message"])
        else:
            q = res["approximation"]["quotient"]
            lines.append(f"quotient: {len(q['labels'])} points, accepted "
                         f"{len(res['accepted'])} of {len(res['pool_order'])} sequences")
            for name in sorted(res["scans"]):
                lines.append(_render_scan(res["scans"][name]))
            if "restriction" in res:
                lines.append(f"restriction {res['restriction']['indices']}: max limit change "
                             f"{res['restriction']['max_limit_change']!r}")
    elif cmd == "convexity":
        lines.append(f"{res['mode']}: {res['verdict']}")
    elif cmd == "theorem":
        lines.append(f"{res['theorem']}: {res['claim']}")
        for name, hyp in sorted(res["hypotheses"].items()):
            state = "passed" if hyp["passed"] else "FAILED"
            lines.append(f"  hypothesis {name}: {state}")
        conc = res["conclusion"]
        state = "passed" if conc["passed"] else "FAILED"
        lines.append(f"  conclusion {conc['property']}: {state}")
        if "report" in conc and conc["report"].get("min_defect") is not None:
            lines.append(f"    min_defect {conc['report']['min_defect']!r}")
        lines.append(f"  agreement: {res['agreement']}")
    else:
        raise InputError(f"unknown report command {cmd!r}")
    if cmd == "theorem":
        lines.append("overall: " + ("consistent" if report.get("passed") else "inconsistent"))
    else:
        lines.append("overall: " + ("pass" if report.get("passed") else "violation found"))
    return "\n".join(lines) + "\n"


def _render_scan(res: dict) -> str:
    if res.get("verdict") == "vacuous pass":
        return f"{res['functional']}: vacuous pass (fewer than four points)"
    return (f"{res['functional']}: min_defect {res['min_defect']!r} over "
            f"{res['quadruples_examined']} quadruples ({res['mode']}) -> {res['verdict']}")


def cmd_render(args) -> int:
    try:
        report = json.loads(Path(args.report).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read report {args.report}: {exc}") from exc
    text = render_text(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.csv_dir:
        extract_csv(report, Path(args.csv_dir))
    return 0


def extract_csv(report: dict, directory: Path) -> list:
    directory.mkdir(parents=True, exist_ok=True)
    res = report["result"]
    written = []
    liminfs = []
    if report["command"] == "liminf":
        liminfs.append(("liminf", res))
    if report["command"] == "theorem":
        liminfs += [(k, v) for k, v in res["hypotheses"].items() if k.startswith("liminf_")]
    for name, est in liminfs:
        path = directory / f"{name}.csv"
        _write_csv(path, ["scale", "min_defect"], zip(est["scales"], est["per_scale_min"]))
        written.append(path)
    if report["command"] == "convexity":
        rows = res.get("triples") or res.get("pairs") or []
        for k, row in enumerate(rows):
            path = directory / f"profile_{k:03d}.csv"
            _write_csv(path, ["index", "defect"],
                       [(n + 1, v) for n, v in enumerate(row["profile"])])
            written.append(path)
    return written


# -- argument parsing -----------------------------------------------------------

def _space_arg(text: str) -> str:
    try:
        parse_space_spec(text)
    except InputError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curvature-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        if seed:
            p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", help="write the JSON report here instead of stdout")

    p = sub.add_parser("validate", help="check metric axioms")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--space", type=_space_arg)
    src.add_argument("--file", help="finite space JSON {labels, dist}")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--triples", type=int, default=10_000)
    common(p)
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("scan", help="four-point defect scan")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--space", type=_space_arg)
    src.add_argument("--file", help="finite space JSON; scanned exhaustively")
    p.add_argument("--functional", choices=sorted(FUNCTIONAL_FLAGS), required=True)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=60)
    p.add_argument("--tol", type=float, default=DEFAULT_PASS_TOL)
    p.add_argument("--max-quadruples", type=int, default=DEFAULT_MAX_QUADRUPLES)
    common(p)
    p.set_defaults(handler=cmd_scan)

    p = sub.add_parser("liminf", help="liminf estimate of A1/A2/A3 at the base point")
    p.add_argument("--space", type=_space_arg, required=True)
    p.add_argument("--functional", choices=["a1", "a2", "a3"], required=True)
    p.add_argument("--scales", default="geometric:0.5,0.5,10")
    p.add_argument("--samples", type=int, default=60)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--max-quadruples", type=int, default=DEFAULT_MAX_QUADRUPLES)
    p.add_argument("--csv", help="CSV of (scale,min_defect); defaults next to --out")
    common(p)
    p.set_defaults(handler=cmd_liminf)

    def pool_args(p):
        p.add_argument("--space", type=_space_arg, required=True)
        p.add_argument("--pool", help="pool JSON; a curated pool is used when omitted")
        p.add_argument("--window", type=int, default=DEFAULT_WINDOW)

    p = sub.add_parser("pretangent", help="build and analyze a pretangent approximation")
    pool_args(p)
    p.add_argument("--restrict", help="even | odd | comma-separated window positions")
    p.add_argument("--tau-stab", type=float, default=1e-6)
    p.add_argument("--tau-unstab", type=float, default=1e-3)
    p.add_argument("--tau-zero", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=DEFAULT_PASS_TOL)
    common(p, seed=False)
    p.set_defaults(handler=cmd_pretangent, seed=None)

    p = sub.add_parser("convexity", help="midpoint / Busemann convexity at the base point")
    pool_args(p)
    p.add_argument("--mode", choices=["midpoint", "busemann"], required=True)
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--no-hook", action="store_true", help="ignore analytic midpoints")
    p.add_argument("--csv", help="CSV of (index,defect) for the worst profile")
    common(p)
    p.set_defaults(handler=cmd_convexity)

    p = sub.add_parser("theorem", help="hypothesis/conclusion workflow")
    pool_args(p)
    p.add_argument("--theorem", choices=["T3", "T5", "T8", "T10"], required=True)
    p.add_argument("--scales", default="geometric:0.5,0.5,10")
    p.add_argument("--samples", type=int, default=60)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--no-hook", action="store_true")
    p.add_argument("--tol", type=float, default=DEFAULT_PASS_TOL)
    common(p)
    p.set_defaults(handler=cmd_theorem)

    p = sub.add_parser("render", help="render a report as text and CSV")
    p.add_argument("report")
    p.add_argument("--csv-dir")
    p.add_argument("--out")
    p.set_defaults(handler=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "validate" and args.tol is None:
        args.tol = 1e-9 if args.file else 1e-12
    started = time.perf_counter()
    try:
        if args.command == "render":
            return cmd_render(args)
        result, passed = args.handler(args)
        report = {
            "schema_version": SCHEMA_VERSION,
            "command": args.command,
            "passed": bool(passed),
            "result": result,
            "manifest": _manifest(args, started),
        }
        dump_report(report, args.out)
        return 0 if passed else 1
    except (InputError, PreconditionError) as exc:
        sys.stderr.write(f"curvature-lab: input error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands:

* ``run``       - execute one solver run, write trace/iterates/summary files
* ``certify``   - quasi-Fejér certificates + radius report for a saved run
* ``rate``      - O(1/k) objective-error envelope report for a saved run
* ``suite``     - execute a run matrix and aggregate the acceptance checks
* ``problems``  - list the problem catalog

Exit codes: 0 success, 1 usage error, 2 solver error, 3 certification failure.
``FEJSOLVE_OUT_DIR`` sets the default output directory (default: cwd).
"""

import argparse
import json
import os
import sys

import numpy as np

from . import monitor, traceio, verify
from .driver import ConditionError
from .problems import get_problem, list_problems
from .runs import RunSpec, execute
from .subsolver import SubsolverError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVER = 2
EXIT_CERT = 3


def _np_default(obj):
    # numpy scalars/arrays inside report dicts
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_np_default)


def _out_dir() -> str:
    return os.environ.get("FEJSOLVE_OUT_DIR", ".")


def _out_prefix(args, default_stem: str) -> str:
    if args.out:
        return args.out
    return os.path.join(_out_dir(), default_stem)


def _build_run_parser(sub):
    p = sub.add_parser("run", help="run a solver and write trace files")
    p.add_argument("--problem", required=True, help="catalog problem name")
    p.add_argument("--algorithm", default="alg1", choices=("alg1", "alg2", "gradient"))
    p.add_argument("--config", help="JSON file with run-spec keys (flags override)")
    p.add_argument("--seed", type=int)
    p.add_argument("--x0", help="comma-separated start point (overrides --seed draw)")
    p.add_argument("--alpha", type=float, help="gradient embedding stepsize")
    p.add_argument("--gamma", type=float, help="gradient embedding decrease fraction")
    p.add_argument("--r", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--sigma-max", dest="sigma_max", type=float)
    p.add_argument("--sigma-rule", dest="sigma_rule", choices=("constant", "adaptive"))
    p.add_argument("--sigma-bar", dest="sigma_bar", type=float)
    p.add_argument("--sigma-init", dest="sigma_init", type=float)
    p.add_argument("--gamma-inc", dest="gamma_inc", type=float)
    p.add_argument("--gamma-dec", dest="gamma_dec", type=float)
    p.add_argument("--acceptance", choices=("ratio_m", "ratio_q"))
    p.add_argument("--grad-tol", dest="grad_tol", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--subsolver", choices=("secular", "descent"))
    p.add_argument("--policy", choices=("constant", "inflated", "shrink"))
    p.add_argument("--a", help="eigenvalue floor (number or 'auto')")
    p.add_argument("--psi0", type=float)
    p.add_argument("--q0-scale", dest="q0_scale", type=float)
    p.add_argument("--out", help="output file prefix")
    return p


_RUN_SPEC_KEYS = set(RunSpec.__dataclass_fields__)


def _spec_from_args(args) -> RunSpec:
    d = {}
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - _RUN_SPEC_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d.update(file_cfg)
    for key in _RUN_SPEC_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            d[key] = val
    if args.x0 is not None:
        d["x0"] = [float(v) for v in args.x0.split(",")]
    if "a" in d and d["a"] != "auto":
        d["a"] = float(d["a"])
    return RunSpec.from_dict(d)


def cmd_run(args) -> int:
    try:
        spec = _spec_from_args(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        trace = execute(spec)
    except (ConditionError, ValueError, KeyError) as exc:
        # invalid or inconsistent run specification
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SubsolverError, FloatingPointError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    prefix = _out_prefix(args, f"{spec.problem}-{spec.algorithm}-s{spec.seed}")
    try:
        summary = traceio.save_run(trace, prefix, extra={"spec": spec.to_dict()})
    except OSError as exc:
        print(f"error: cannot write run files: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps({k: summary[k] for k in
                      ("status", "iters", "f_final", "gnorm_final")}, indent=2))
    print(f"wrote {prefix}.trace.csv, {prefix}.iters.csv, {prefix}.run.json")
    return EXIT_OK


def cmd_certify(args) -> int:
    try:
        trace = traceio.load_run(args.run_json)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    problem = get_problem(trace.problem_name)
    try:
        if args.y is not None:
            y = np.array([float(v) for v in args.y.split(",")])
        else:
            y = monitor.reference_point(trace, problem)
        certs = monitor.build_certificates(trace, y=y, problem=problem)
        radius = monitor.check_radius(trace, y=y, problem=problem)
        summ = monitor.summability_report(trace)
    except ValueError as exc:
        print(f"certification refused: {exc}", file=sys.stderr)
        return EXIT_CERT
    prefix = args.out or args.run_json.replace(".run.json", "")
    traceio.write_certificates_csv(certs, f"{prefix}.cert.csv")
    min_slack = min((c.slack for c in certs), default=0.0)
    tol = args.tol if args.tol is not None else \
        1e-8 * (1.0 + float(np.sum((trace.x0 - y) ** 2)))
    if problem.minimizer is None:
        tol = max(tol, 1e-6)  # derived reference point: looser certificate bar
    consts = monitor.measured_constants(trace)
    report = {
        "min_slack": min_slack,
        "tol_cert": tol,
        "certified": bool(min_slack >= -tol and radius["ok"]),
        "R_hat": radius["R_hat"],
        "nu_hat": consts["nu_hat"],
        "b_hat": consts["b_hat"],
        "T_hat": summ["T_hat"],
        "sums": {"eps": summ["sum_eps"], "theta": summ["sum_theta"],
                 "s2": summ["sum_s2"], "s_rm1": summ["sum_s_rm1"],
                 "mgrad": summ["sum_mgrad"]},
        "radius": radius,
    }
    _dump_json(report, f"{prefix}.cert.json")
    print(json.dumps({k: report[k] for k in
                      ("min_slack", "tol_cert", "certified", "R_hat")},
                     indent=2, default=_np_default))
    print(f"wrote {prefix}.cert.csv, {prefix}.cert.json")
    return EXIT_OK if report["certified"] else EXIT_CERT


def cmd_rate(args) -> int:
    try:
        trace = traceio.load_run(args.run_json)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = monitor.rate_check(trace, tol=args.tol)
    except ValueError as exc:
        print(f"rate check refused: {exc}", file=sys.stderr)
        return EXIT_CERT
    prefix = args.out or args.run_json.replace(".run.json", "")
    _dump_json(report, f"{prefix}.rate.json")
    print(json.dumps(report, indent=2, default=_np_default))
    return EXIT_OK if report["ok"] else EXIT_CERT


def cmd_suite(args) -> int:
    if args.default:
        matrix = verify.load_default_matrix()
    else:
        if not args.matrix:
            print("error: give a matrix file or --default", file=sys.stderr)
            return EXIT_USAGE
        try:
            with open(args.matrix) as fh:
                matrix = json.load(fh)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    if not matrix.get("runs"):
        out = args.out or os.path.join(_out_dir(), "suite_report.json")
        _dump_json({"runs": {}, "criteria": {}, "all_passed": True}, out)
        print(f"empty matrix; wrote {out}")
        return EXIT_OK
    suite = verify.run_suite(matrix)
    results = verify.evaluate_all(suite)
    aggregate = {
        "runs": {
            name: ({"error": entry["error"]} if "error" in entry else
                   {"status": entry["trace"].status, "iters": len(entry["trace"]),
                    "gnorm_final": entry["trace"].gnorm_final})
            for name, entry in suite.items()
        },
        "criteria": {res.cid: {"label": res.label, "passed": res.passed}
                     for res in results},
        "all_passed": all(res.passed for res in results),
    }
    out = args.out or os.path.join(_out_dir(), "suite_report.json")
    _dump_json(aggregate, out)
    for res in results:
        print(res.line())
    print(f"wrote {out}")
    run_errors = [n for n, e in suite.items() if "error" in e]
    if run_errors:
        print(f"runs with errors: {run_errors}", file=sys.stderr)
    if not aggregate["all_passed"]:
        return EXIT_CERT
    if run_errors:
        return EXIT_SOLVER
    return EXIT_OK


def cmd_problems(args) -> int:
    if args.action != "list":
        print("error: supported action: list", file=sys.stderr)
        return EXIT_USAGE
    for name in list_problems():
        p = get_problem(name)
        L = "-" if p.lipschitz_L is None else f"{p.lipschitz_L:.6g}"
        has_min = "yes" if p.minimizer is not None else "no"
        print(f"{name:20s} dim={p.dim:<3d} {p.convexity_class:12s} "
              f"L={L:<10s} minimizer={has_min:3s} {p.description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fejsolve", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    _build_run_parser(sub)

    p = sub.add_parser("certify", help="certificate + radius report for a saved run")
    p.add_argument("run_json", help="path to the <prefix>.run.json summary")
    p.add_argument("--y", help="comma-separated reference point (default: catalog "
                               "minimizer, else a derived reference run)")
    p.add_argument("--tol", type=float, help="certificate slack tolerance")
    p.add_argument("--out", help="output file prefix")

    p = sub.add_parser("rate", help="objective-error envelope report for a saved run")
    p.add_argument("run_json")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out")

    p = sub.add_parser("suite", help="run a matrix of runs and aggregate checks")
    p.add_argument("matrix", nargs="?", help="JSON matrix file")
    p.add_argument("--default", action="store_true", help="use the shipped matrix")
    p.add_argument("--out", help="aggregate report path")

    p = sub.add_parser("problems", help="problem catalog")
    p.add_argument("action", choices=("list",))
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    handlers = {
        "run": cmd_run,
        "certify": cmd_certify,
        "rate": cmd_rate,
        "suite": cmd_suite,
        "problems": cmd_problems,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())

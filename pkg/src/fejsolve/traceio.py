"""Trace, certificate and summary persistence.

A run is saved as three sibling files sharing a prefix:

* ``<prefix>.trace.csv``  - one row per iteration, header
  ``k,fx,gnorm,sigma,snorm,mgradnorm,mdec,rho,accepted`` (rho empty on rows
  where it was not computed; accepted is 0/1).
* ``<prefix>.iters.csv``  - the iterate and step vectors (x_0..x_K, s_k);
  the final row carries x_K with empty step columns.
* ``<prefix>.run.json``   - status summary plus the full run specification,
  enough to rebuild the policy and re-certify the trace.

Scalars are printed with 17 significant digits, which round-trips float64
exactly.
"""

import csv
import json
from dataclasses import asdict
from typing import Optional

import numpy as np

from .driver import IterationRecord, SolverConfig, SolveTrace
from .metric import MetricPolicy, MetricStream
from .problems import get_problem

TRACE_HEADER = ["k", "fx", "gnorm", "sigma", "snorm", "mgradnorm", "mdec", "rho", "accepted"]


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for r in trace:
            w.writerow([
                r.k, _fmt(r.f_x), _fmt(r.grad_norm), _fmt(r.sigma), _fmt(r.s_norm),
                _fmt(r.model_grad_norm), _fmt(r.model_decrease),
                "" if r.rho is None else _fmt(r.rho), int(r.accepted),
            ])


def read_trace_csv(path) -> list:
    """Scalar rows of a trace CSV as dicts (vector fields live in iters.csv)."""
    rows = []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames != TRACE_HEADER:
            raise ValueError(f"unexpected trace header {rd.fieldnames} in {path}")
        for row in rd:
            rows.append({
                "k": int(row["k"]),
                "fx": float(row["fx"]),
                "gnorm": float(row["gnorm"]),
                "sigma": float(row["sigma"]),
                "snorm": float(row["snorm"]),
                "mgradnorm": float(row["mgradnorm"]),
                "mdec": float(row["mdec"]),
                "rho": None if row["rho"] == "" else float(row["rho"]),
                "accepted": bool(int(row["accepted"])),
            })
    return rows


def write_iterates_csv(trace, path):
    n = trace.x_final.shape[0]
    header = ["k"] + [f"x{i}" for i in range(n)] + [f"s{i}" for i in range(n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in trace:
            w.writerow([r.k] + [_fmt(v) for v in r.x] + [_fmt(v) for v in r.s])
        w.writerow([len(trace)] + [_fmt(v) for v in trace.x_final] + [""] * n)


def read_iterates_csv(path):
    """Returns (xs, ss): iterates (K+1, n) and steps (K, n)."""
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        n = sum(1 for h in header if h.startswith("x"))
        xs, ss = [], []
        for row in rd:
            xs.append([float(v) for v in row[1:1 + n]])
            stail = row[1 + n:1 + 2 * n]
            if all(v == "" for v in stail):
                continue
            ss.append([float(v) for v in stail])
    return np.array(xs), np.array(ss) if ss else np.zeros((0, n))


def config_to_dict(cfg: SolverConfig) -> dict:
    return asdict(cfg)


def config_from_dict(d: dict) -> SolverConfig:
    return SolverConfig(**d)


def policy_to_dict(pol: MetricPolicy) -> dict:
    d = {"kind": pol.kind, "a": pol.a, "psi0": pol.psi0, "dim": pol.dim}
    Q0 = pol.Q0
    scale = Q0[0, 0]
    if np.array_equal(Q0, scale * np.eye(pol.dim)):
        d["q0_scale"] = float(scale) / pol.a  # Q0 = q0_scale * a * I
    else:
        d["q0_matrix"] = Q0.tolist()
    return d


def policy_from_dict(d: dict) -> MetricPolicy:
    if "q0_matrix" in d:
        Q0 = np.array(d["q0_matrix"], dtype=float)
    else:
        Q0 = d.get("q0_scale", 1.0) * d["a"] * np.eye(d["dim"])
    return MetricPolicy(kind=d["kind"], Q0=Q0, a=d["a"], psi0=d.get("psi0", 0.0))


def save_run(trace: SolveTrace, prefix: str, extra: Optional[dict] = None) -> dict:
    """Write the three run files; returns the summary dict."""
    trace_path = f"{prefix}.trace.csv"
    iters_path = f"{prefix}.iters.csv"
    json_path = f"{prefix}.run.json"
    write_trace_csv(trace, trace_path)
    write_iterates_csv(trace, iters_path)
    summary = {
        "status": trace.status,
        "iters": len(trace),
        "f_final": trace.f_final,
        "gnorm_final": trace.gnorm_final,
        "problem": trace.problem_name,
        "grad_tol_used": trace.grad_tol_used,
        "config": config_to_dict(trace.config),
        "policy": policy_to_dict(trace.policy),
        "x0": [float(v) for v in trace.x0],
        "files": {"trace": trace_path, "iterates": iters_path},
    }
    if extra:
        summary.update(extra)
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def load_run(json_path: str) -> SolveTrace:
    """Rebuild a full SolveTrace from a saved run (problem looked up by name)."""
    with open(json_path) as fh:
        summary = json.load(fh)
    cfg = config_from_dict(summary["config"])
    pol = policy_from_dict(summary["policy"])
    problem = get_problem(summary["problem"])
    rows = read_trace_csv(summary["files"]["trace"])
    xs, ss = read_iterates_csv(summary["files"]["iterates"])
    if len(xs) != len(rows) + 1:
        raise ValueError("iterates file does not match the trace length")
    records = []
    # rebuild the per-iteration matrix norms from the policy's metric stream;
    # the eigenvalue updates are deterministic, so these match the original run
    stream = MetricStream(pol)
    q_norms = [float(np.abs(stream.advance()[1]).max()) for _ in rows]
    for row, x, s in zip(rows, xs, ss if len(ss) else [None] * len(rows)):
        records.append(IterationRecord(
            k=row["k"], x=np.array(x), f_x=row["fx"], grad_norm=row["gnorm"],
            sigma=row["sigma"], s=np.array(s), s_norm=row["snorm"],
            model_grad_norm=row["mgradnorm"], model_decrease=row["mdec"],
            rho=row["rho"], accepted=row["accepted"],
        ))
    return SolveTrace(
        records=records, x_final=np.array(xs[-1]),
        f_final=float(summary["f_final"]), gnorm_final=float(summary["gnorm_final"]),
        status=summary["status"], problem_name=summary["problem"],
        config=cfg, policy=pol, x0=np.array(summary["x0"], dtype=float),
        grad_tol_used=float(summary["grad_tol_used"]),
        q_norms=np.array(q_norms),
    )


def write_certificates_csv(certs, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "psi", "theta", "eps", "lhs", "rhs", "slack"])
        for c in certs:
            w.writerow([c.k, _fmt(c.psi_k), _fmt(c.theta_k), _fmt(c.eps_k),
                        _fmt(c.lhs), _fmt(c.rhs), _fmt(c.slack)])

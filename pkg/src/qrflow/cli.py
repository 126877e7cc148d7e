"""Command-line harness for single benchmark runs and suites.

A single run prints one table row; a suite manifest (one run per line,
same flags, # comments allowed) prints a combined table with the cpu
column normalized to the fastest successful run and can write the rows to
a machine-readable CSV.  Exit codes: 0 all runs reached tf, 2 integration
failure, 3 bad configuration.
"""

import argparse
import math
import shlex
import sys

import numpy as np

from .errors import ConfigError, IntegrationFailure, QRFlowError
from .integrate import IntegrationConfig, PAIRS, integrate
from . import problems as problems_mod

PROBLEM_LABELS = ("example1", "example2", "example3", "example4",
                  "example5", "example6", "zero")


def build_parser():
    p = argparse.ArgumentParser(
        prog="qrflow",
        description="Benchmark runner for orthonormal QR-flow integrators.",
        add_help=True,
    )
    p.add_argument("--problem", choices=PROBLEM_LABELS)
    p.add_argument("--method", choices=("u", "v", "w", "theta", "projected"),
                   default="theta")
    p.add_argument("--pair", choices=tuple(PAIRS), default="dp5")
    p.add_argument("--mode", choices=("fixed", "adaptive"), default=None)
    p.add_argument("--h", type=float, default=None,
                   help="fixed step size (fixed mode)")
    p.add_argument("--tol", type=float, default=None,
                   help="error tolerance (adaptive mode)")
    p.add_argument("--t0", type=float, default=None)
    p.add_argument("--tf", type=float, default=None)
    p.add_argument("--n", type=int, default=None,
                   help="matrix size (example6 only)")
    p.add_argument("--p", type=int, default=None,
                   help="tracked column count (example6 only)")
    p.add_argument("--seed", type=int, default=None,
                   help="seeded random start (example5 only)")
    p.add_argument("--csv", default=None,
                   help="trajectory CSV path (per-run) or summary CSV (suite)")
    p.add_argument("--suite", default=None,
                   help="manifest file: one run per line, same flags")
    return p


def make_problem(args):
    label = args.problem
    if label is None:
        raise ConfigError("--problem is required")
    if label != "example6" and (args.n is not None or args.p is not None):
        raise ConfigError("--n/--p apply to example6 only")
    if label != "example5" and args.seed is not None:
        raise ConfigError("--seed applies to example5 only")
    if label == "example6":
        kwargs = {}
        if args.n is not None:
            kwargs["n"] = args.n
        if args.p is not None:
            kwargs["p"] = args.p
        return problems_mod.example6(**kwargs)
    if label == "example5":
        return problems_mod.example5(
            random_q0=args.seed is not None, seed=args.seed
        )
    if label == "zero":
        return problems_mod.zero_problem()
    return getattr(problems_mod, label)()


def make_config(args):
    mode = args.mode
    if mode is None:
        if (args.h is None) == (args.tol is None):
            raise ConfigError("set exactly one of --h / --tol")
        mode = "fixed" if args.h is not None else "adaptive"
    if mode == "fixed" and (args.h is None or args.tol is not None):
        raise ConfigError("fixed mode takes --h and no --tol")
    if mode == "adaptive" and (args.tol is None or args.h is not None):
        raise ConfigError("adaptive mode takes --tol and no --h")
    return IntegrationConfig(
        method=args.method, pair=args.pair, mode=mode,
        h=args.h, tol=args.tol, t0=args.t0, tf=args.tf,
    )


class TrajectoryWriter:
    """Streams one CSV row per accepted step: t, h, per-column scaled error
    estimates, the transformed diagonal, and for example5 the log10 defect
    against the reference ordering."""

    def __init__(self, path, problem, cfg):
        self.fh = open(path, "w", newline="\n")
        self.problem = problem
        self.ncols = 1 if cfg.method == "projected" else problem.p
        cols = ["t", "h"]
        cols += [f"err{i + 1}" for i in range(self.ncols)]
        cols += [f"diag{i + 1}" for i in range(problem.p)]
        self.with_defect = (
            problem.label == "example5" and problem.diag_reference is not None
        )
        if self.with_defect:
            cols.append("log10_defect")
        self.fh.write(",".join(cols) + "\n")

    def __call__(self, rec):
        row = [f"{rec.t:.17g}", f"{rec.h:.17g}"]
        if rec.errs is not None:
            row += [f"{e:.17g}" for e in rec.errs]
        else:
            row += [""] * self.ncols
        if rec.mesh_diag is not None:
            row += [f"{d:.17g}" for d in rec.mesh_diag]
            if self.with_defect:
                defect = float(np.max(np.abs(
                    self.problem.diag_reference(rec.t) - rec.mesh_diag
                )))
                row.append(f"{math.log10(defect):.17g}" if defect > 0.0
                           else "-inf")
        self.fh.write(",".join(row) + "\n")

    def close(self):
        self.fh.close()


def _fmt_err(err):
    return "-" if err is None else f"{err:.1E}"


def run_experiment(args, csv_path=None):
    """Run one configured experiment; returns a result-row dict."""
    problem = make_problem(args)
    cfg = make_config(args)
    row = {
        "run": f"{problem.label}-{cfg.method}-{cfg.pair}-{cfg.mode}",
        "param": f"h={cfg.h:g}" if cfg.mode == "fixed" else f"tol={cfg.tol:g}",
        "err": None, "reimb": None, "rejs": None, "first": None,
        "nsteps": None, "wall": None, "status": "ok", "detail": "",
    }
    writer = TrajectoryWriter(csv_path, problem, cfg) if csv_path else None
    try:
        res = integrate(problem, cfg, step_hook=writer)
    except IntegrationFailure as exc:
        row["status"] = "failed"
        row["detail"] = (f"{type(exc).__name__} at t={exc.t!r} "
                         f"column={None if exc.column is None else exc.column + 1}: {exc}")
        return row
    except QRFlowError as exc:
        row["status"] = "failed"
        row["detail"] = f"{type(exc).__name__}: {exc}"
        return row
    finally:
        if writer is not None:
            writer.close()
    st = res.stats
    row.update(
        err=st.err, reimb=st.reimb, rejs=st.rejs,
        first=int(st.rejs_per_column[0]), nsteps=st.nsteps, wall=st.wall,
    )
    return row


HEADER = ("run", "param", "err", "reimb", "rejs/first", "cpu", "nsteps",
          "wall_s")


def format_rows(rows):
    """Render result rows as an aligned text table; cpu is wall time
    normalized to the fastest successful run of the batch."""
    walls = [r["wall"] for r in rows if r["status"] == "ok" and r["wall"]]
    base = min(walls) if walls else None
    table = [HEADER]
    for r in rows:
        if r["status"] == "ok":
            cpu = "-" if not base else f"{r['wall'] / base:.1f}"
            rejs = "-" if r["rejs"] is None else f"{r['rejs']}/{r['first']}"
            table.append((
                r["run"], r["param"], _fmt_err(r["err"]), str(r["reimb"]),
                rejs, cpu, str(r["nsteps"]), f"{r['wall']:.3f}",
            ))
        else:
            table.append((r["run"], r["param"], "-", "-", "-", "-", "-", "-"))
    widths = [max(len(row[i]) for row in table) for i in range(len(HEADER))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in table]
    return "\n".join(lines)


def run_suite(path, csv_path=None):
    """Run every experiment listed in a manifest; failures become dashed
    rows and the suite keeps going.  Returns (rows, exit_code)."""
    parser = build_parser()
    rows = []
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    for ln in lines:
        if not ln or ln.startswith("#"):
            continue
        sub = parser.parse_args(shlex.split(ln))
        if sub.suite is not None:
            raise ConfigError("manifests cannot nest --suite")
        rows.append(run_experiment(sub, csv_path=sub.csv))
    code = 0 if all(r["status"] == "ok" for r in rows) else 2
    if csv_path:
        walls = [r["wall"] for r in rows if r["status"] == "ok" and r["wall"]]
        base = min(walls) if walls else None
        with open(csv_path, "w", newline="\n") as fh:
            fh.write("run,param,status,err,reimb,rejs,rejs_first,nsteps,"
                     "cpu,wall_s,detail\n")
            for r in rows:
                cpu = ""
                if r["status"] == "ok" and base:
                    cpu = f"{r['wall'] / base:.17g}"
                fh.write(",".join([
                    r["run"], r["param"], r["status"],
                    "" if r["err"] is None else f"{r['err']:.17g}",
                    "" if r["reimb"] is None else str(r["reimb"]),
                    "" if r["rejs"] is None else str(r["rejs"]),
                    "" if r["first"] is None else str(r["first"]),
                    "" if r["nsteps"] is None else str(r["nsteps"]),
                    cpu,
                    "" if r["wall"] is None else f"{r['wall']:.17g}",
                    '"' + r["detail"].replace('"', "'") + '"',
                ]) + "\n")
    return rows, code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 3
    try:
        if args.suite:
            rows, code = run_suite(args.suite, csv_path=args.csv)
            print(format_rows(rows))
            for r in rows:
                if r["status"] != "ok":
                    print(f"FAILED {r['run']}: {r['detail']}",
                          file=sys.stderr)
            return code
        row = run_experiment(args, csv_path=args.csv)
        print(format_rows([row]))
        if row["status"] != "ok":
            print(f"FAILED {row['run']}: {row['detail']}", file=sys.stderr)
            return 2
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``reflou simulate|verify|sample|report``.

Exit codes: 0 success, 1 a verifier failed, 2 invalid configuration or
usage, 3 runtime or scheme failure.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import rng
from . import verify as V
from .domain import Ball, GraphRegion
from .engine import simulate, simulate_ensemble, simulate_paths
from .errors import ContractViolation, SchemeFailure
from .gaussian_space import TestFunction, sample_gamma
from .quadrature import QuadratureRule

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n\n{self.format_usage()}")


def build_parser():
    p = _Parser(prog="reflou", description="Reflected Ornstein-Uhlenbeck simulation and verification")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, out_default="out"):
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", default=None, help=f"output directory (default: config output.dir or {out_default})")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--dt", type=float, default=None, help="override sim.dt")
        sp.add_argument("--paths", type=int, default=None, help="override sim.paths")

    common(sub.add_parser("simulate", help="simulate an ensemble; write path CSVs and a summary"))
    v = sub.add_parser("verify", help="run verifiers and write SummaryReports")
    v.add_argument("name", help=f"one of {', '.join(cfgmod.VERIFIERS)}, 'all' or 'none'")
    common(v)
    s = sub.add_parser("sample", help="write gamma and gamma|_O samples as CSV")
    common(s)
    s.add_argument("--n", type=int, default=None, help="number of samples (default: sim.paths)")
    r = sub.add_parser("report", help="merge report files into one table")
    r.add_argument("inputs", nargs="+", help="reports.jsonl files")
    r.add_argument("--out", default=None, help="directory for the merged report")
    r.add_argument("--force", action="store_true", help="merge reports with different config hashes")
    return p


def _load(args):
    overrides = {"seed": args.seed, "dt": args.dt, "paths": args.paths}
    run = cfgmod.load(args.config, overrides)
    out = Path(args.out or run.output["dir"])
    return run, out


def _write_text(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# simulate


def summarize(run, ens):
    lt = ens.local_time
    se = float(lt.std(ddof=1) / np.sqrt(lt.size)) if lt.size > 1 else None
    T = run.sim.horizon
    return {
        "config_hash": run.hash,
        "n_paths": int(ens.n_paths),
        "estimators": {
            "mean_local_time": float(lt.mean()),
            "mean_local_time_stderr": se,
            "local_time_rate": float(lt.mean() / T) if T > 0 else None,
            "mean_hits": float(ens.hit_count.mean()),
            "off_hit_local_time": float(ens.off_hit_local_time.sum()),
            "max_G": float(ens.max_G.max()),
            "mean_final_state": ens.final_states.mean(axis=0).tolist(),
            "mean_time_average": ens.time_average.mean(axis=0).tolist(),
        },
    }


def _ensemble(run, **sim_changes):
    sim = run.sim.replace(**sim_changes) if sim_changes else run.sim
    z = None if run.start == "stationary" else run.start
    return simulate_ensemble(run.space, run.domain, sim, z=z)


def cmd_simulate(args):
    run, out = _load(args)
    ens = _ensemble(run)
    summary = summarize(run, ens)
    n_save = min(int(run.raw["sim"]["save_paths"]), run.sim.paths)
    for p in range(n_save):
        rec = simulate(run.space, run.domain, run.sim, ens.starts[p], path_index=p)
        path = out / "paths" / f"path_{p:05d}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            rec.to_csv(fh)
    _write_text(out / "summary.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    _write_metadata(out, run, "simulate")
    print(f"simulated {ens.n_paths} paths; E[L_T] = {summary['estimators']['mean_local_time']:.6g}; wrote {out}")
    return EXIT_OK


def _write_metadata(out, run, command):
    meta = {
        "command": command,
        "config_hash": run.hash,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "workers": os.environ.get("GR_THREADS", "1"),
    }
    _write_text(out / "metadata.json", json.dumps(meta, sort_keys=True, indent=2) + "\n")


# verify


def _rule(run):
    q = run.quadrature
    return QuadratureRule.for_domain(run.space, run.domain, q["nodes_per_axis"], q["line_nodes"])


def ibp_battery(space):
    out = []
    for k in range(1, space.dim + 1):
        out.append(TestFunction.coordinate(k))
    out.append(TestFunction.gaussian_bump(1.5))
    out.append(TestFunction.cosine(0.7 * np.ones(space.dim)))
    return out


def energy_battery(space):
    h1 = TestFunction.hat(space, 1)
    one = TestFunction.constant(1.0)
    bump = TestFunction.gaussian_bump(1.5)
    return [(h1, one), (h1, h1 * h1), (TestFunction.cosine(0.7 * np.ones(space.dim)), bump)]


def _analytic(name, residual, h, tol=V.ANALYTIC_TOL, nodes=0):
    return V.SummaryReport(name, float(residual), 0.0, tol, nodes, h)


def _is_halfspace(domain):
    return isinstance(domain, GraphRegion) and getattr(domain.profile, "kind", "") == "constant"


def run_verifiers(run, names):
    space, domain, h = run.space, run.domain, run.hash
    rule = _rule(run)
    reports = []
    ensembles = {}

    def stationary_ensemble():
        if "main" not in ensembles:
            ensembles["main"] = simulate_ensemble(space, domain, run.sim)
        return ensembles["main"]

    def qv_paths(clock):
        if clock not in ensembles:
            sim = run.sim.replace(clock=clock, horizon=float(run.verify["qv_horizon"]), paths=int(run.verify["qv_paths"]))
            ensembles[clock] = (sim, simulate_paths(space, domain, sim))
        return ensembles[clock]

    n_nodes = rule.nodes_per_axis
    for name in names:
        if name == "ibp":
            for phi in ibp_battery(space):
                for k in range(1, space.dim + 1):
                    r = V.ibp_residual(space, domain, phi, k, rule)
                    reports.append(_analytic(f"ibp[{phi.name},k={k}]", r, h, nodes=n_nodes))
        elif name == "gauss_green":
            for k in range(1, space.dim + 1):
                reports.append(_analytic(f"gauss_green[k={k}]", V.gauss_green_residual(space, domain, k, rule), h, nodes=n_nodes))
        elif name == "energy":
            for phi, psi in energy_battery(space):
                r = V.energy_identity_residual(space, domain, phi, psi, rule)
                reports.append(_analytic(f"energy[{phi.name},{psi.name}]", r, h, nodes=n_nodes))
        elif name == "stationarity":
            ens = stationary_ensemble()
            reports += V.stationarity_test(ens, space, domain, run.verify["oracle_size"], run.seed, h)
            if _is_halfspace(domain):
                reports.append(V.halfspace_cdf_test(ens, space, domain, h))
        elif name == "revuz":
            reports.append(V.revuz_test(stationary_ensemble(), space, domain, rule=rule, config_hash=h))
        elif name == "support":
            ens = stationary_ensemble()
            reports.append(V.local_time_support_test(ens, h))
            if run.sim.scheme != "penalization":
                reports.append(V.closure_test(ens, run.sim.newton_tol, h))
        elif name == "qv":
            for clock in ("dirichlet", "probabilist"):
                sim, paths = qv_paths(clock)
                for k in range(1, space.dim + 1):
                    rep = V.qv_test(paths, space, domain, sim, k, config_hash=h)
                    rep.name = f"{rep.name}[{clock}]"
                    reports.append(rep)
                    for l in range(k + 1, space.dim + 1):
                        rep = V.qv_test(paths, space, domain, sim, k, l, config_hash=h)
                        rep.name = f"{rep.name}[{clock}]"
                        reports.append(rep)
        elif name == "telescoping":
            sim, paths = qv_paths(run.sim.clock)
            reports.append(V.telescoping_test(paths, space, domain, sim, h))
            if isinstance(domain, Ball) and len(set(space.lambdas)) == 1 and sim.scheme == "projection":
                reports.append(V.ball_normal_test(paths, space, domain, sim, h))
        elif name == "consistency":
            base = run.sim.replace(scheme="projection", epsilon=None)
            proj = simulate_ensemble(space, domain, base)
            pen = simulate_ensemble(space, domain, base.replace(scheme="penalization", epsilon=base.dt))
            reports.append(V.scheme_consistency_test(proj, pen, h))
            ladder = [simulate_ensemble(space, domain, base.replace(dt=base.dt * f)) for f in (4, 2, 1)]
            reports.append(V.dt_consistency_test(ladder, h))
    return reports


def emit_report(reports, out_dir, stem="reports"):
    """Write JSON lines and an aligned table; returns the exit code (0 all pass, 1 otherwise)."""
    if not reports:
        raise ContractViolation("no reports to emit")
    ordered = sorted(reports, key=lambda r: (r.name, r.config_hash))
    table = format_table(ordered)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{stem}.jsonl").write_text("".join(r.to_json() + "\n" for r in ordered))
    (out_dir / f"{stem}.txt").write_text(table)
    print(table, end="")
    return EXIT_OK if all(r.passed for r in ordered) else EXIT_FAIL


def format_table(reports):
    rows = [("test", "estimate", "reference", "tolerance", "n", "config", "result")]
    for r in reports:
        rows.append(
            (r.name, f"{r.estimate:.6g}", f"{r.reference:.6g}", f"{r.tolerance:.3g}", str(r.samples), r.config_hash, "PASS" if r.passed else "FAIL")
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows]
    overall = "PASS" if all(r.passed for r in reports) else "FAIL"
    return "\n".join(lines) + f"\noverall: {overall}\n"


def cmd_verify(args):
    name = args.name
    if name == "none":
        raise UsageError("empty verifier selection")
    if name not in cfgmod.VERIFIERS + ("all",):
        raise UsageError(f"unknown verifier {name!r}")
    run, out = _load(args)
    if name == "all":
        sel = run.verify["select"]
        names = list(cfgmod.VERIFIERS) if "all" in sel else sel
    else:
        names = [name]
    reports = run_verifiers(run, names)
    code = emit_report(reports, out)
    _write_metadata(out, run, f"verify {name}")
    return code


# sample


def cmd_sample(args):
    run, out = _load(args)
    n = args.n or run.sim.paths
    if n < 1:
        raise cfgmod.ConfigError("n", "must be positive")
    g = sample_gamma(run.space, rng.stream(run.seed, rng.AUX), n)
    go, rate = V.oracle_sample(run.space, run.domain, run.seed, n)
    header = ",".join(f"x_{k}" for k in range(1, run.space.dim + 1))
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "gamma.csv", g, delimiter=",", header=header, comments="", fmt="%.17g")
    np.savetxt(out / "gamma_O.csv", go, delimiter=",", header=header, comments="", fmt="%.17g")
    print(f"wrote {n} gamma and {n} gamma|_O samples (acceptance rate {rate:.4f}) to {out}")
    return EXIT_OK


# report


def load_reports(path):
    reports = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                d.pop("passed", None)
                reports.append(V.SummaryReport(**d))
    return reports


def cmd_report(args):
    reports = []
    for p in args.inputs:
        reports += load_reports(p)
    hashes = sorted({r.config_hash for r in reports})
    if len(hashes) > 1 and not args.force:
        raise UsageError(f"reports come from different configs {hashes}; use --force to merge anyway")
    if args.out:
        return emit_report(reports, args.out, "merged")
    table = format_table(sorted(reports, key=lambda r: (r.name, r.config_hash)))
    print(table, end="")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "sample": cmd_sample, "report": cmd_report}


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage())
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractViolation as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        if getattr(args, "config", None) and exc.filename == args.config:
            print(f"invalid configuration: cannot read {exc.filename}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (SchemeFailure, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

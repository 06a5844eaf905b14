"""Command line entry point: ``sms <subcommand> <config.json> [--out DIR] [--seed N]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import checks, plots
from .config import ExperimentConfig, parse_config
from .critical.experiment import ExperimentReport, LambdaResult, lambda_window, multiplicity_experiment, run_lambda
from .critical.split import split_subspaces
from .errors import SmsError
from .nonlinearity import check_hypotheses
from .problem import Problem, build_problem, resolve_target
from .report import Report

log = logging.getLogger("sms")

SUBCOMMANDS = ("spectrum", "verify-f", "geometry", "nabla-check", "solve", "scan", "verify-all")


# --------------------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


class Writer:
    """Single writer for every artifact of a run."""

    def __init__(self, out: Path):
        self.out = out
        self.files: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def path(self, rel: str) -> Path:
        p = self.out / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def csv(self, rel: str, header, rows) -> Path:
        p = self.path(rel)
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.files.append(rel)
        return p

    def json(self, rel: str, data) -> Path:
        p = self.path(rel)
        p.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")
        self.files.append(rel)
        return p


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serialisable: {type(v).__name__}")


def _finite(v):
    return None if v is None or not np.isfinite(v) else float(v)


def write_field(writer: Writer, rel: str, problem: Problem, w) -> None:
    coords = problem.mesh.coords
    names = ["x", "y", "z"][: problem.mesh.dimension]
    writer.csv(rel, [*names, "value"], (list(c) + [v] for c, v in zip(coords, w)))


def write_checks(writer: Writer, reports: list[Report], rel: str = "checks.csv") -> None:
    rows = [(r.title, *row) for r in reports for row in r.rows()]
    writer.csv(rel, ["suite", "check", "value", "threshold", "passed", "detail"], rows)


def write_spectrum(writer: Writer, problem: Problem, ed) -> None:
    group_of = {}
    for k, h in ed.groups:
        for i in range(k, k + h + 1):
            group_of[i] = (k, h)
    writer.csv(
        "eigen.csv",
        ["k", "lambda", "residual", "group_k", "group_h"],
        ((i + 1, ed.eigenvalues[i], ed.residuals[i], *group_of.get(i + 1, (i + 1, 0))) for i in range(ed.count)),
    )
    for i in range(ed.count):
        write_field(writer, f"eigenvectors/e_{i + 1}.csv", problem, ed.vectors[:, i])


def write_solutions(writer: Writer, problem: Problem, row: LambdaResult) -> None:
    if row.summary is None:
        return
    for s in row.summary.solutions:
        write_field(writer, f"solutions/sol_{s.solution_id}.csv", problem, s.w)


SOLUTION_HEADER = ["lambda", "solution_id", "energy", "residual", "l2_norm", "min", "max_abs", "shell_max", "nontrivial", "nonnegative", "decays", "level", "seeds"]


def _solution_rows(rows):
    for r in rows:
        if r.summary is None:
            continue
        for s in r.summary.solutions:
            yield (r.lam, s.solution_id, s.energy, s.grad_norm, s.l2_norm, s.min_value, s.max_abs, s.shell_max, s.nontrivial, s.nonnegative, s.decays, s.level, " ".join(map(str, s.members)))


def _row_summary(row: LambdaResult, cfg: ExperimentConfig) -> dict:
    g = row.geometry
    return {
        "lambda": row.lam,
        "offset": row.offset,
        "status": row.status,
        "applicable": row.applicable,
        "geometry": None if g is None else {"rho": g.rho, "R": g.R, "inf_sphere": g.inf_sphere, "sup_ball": g.sup_ball, "sup_sphere": g.sup_sphere, "margin": g.margin, "candidates": g.candidates},
        "sup_Ekh": row.sup_Ekh,
        "eta": row.eta,
        "nabla": None if row.nabla is None else {"value": row.nabla.value, "feasible_starts": row.nabla.feasible_starts, "energy": row.nabla.energy, "distance": row.nabla.distance},
        "n_distinct": row.n_distinct,
        "residuals": [] if row.summary is None else [s.grad_norm for s in row.summary.solutions],
        "newton_status": [r.status for r in row.records],
        "certificates": row.certificates(cfg.solver.newton_tol, cfg.solver.dist_tol),
        "error": row.error,
        "seconds": round(row.seconds, 3),
    }


# --------------------------------------------------------------------------- subcommands


def _context(cfg):
    problem = build_problem(cfg)
    ed = problem.spectrum()
    group = resolve_target(cfg, ed)
    split = split_subspaces(ed, problem.fp, group)
    return problem, ed, group, split


def cmd_spectrum(cfg, writer, info):
    problem = build_problem(cfg)
    ed = problem.spectrum()
    write_spectrum(writer, problem, ed)
    plots.plot_eigenfunctions(problem.mesh, ed, writer.path("plots/eigen.svg"))
    info["residuals"] = {"eigen": ed.residuals}
    info["groups"] = ed.groups
    return 0


def cmd_verify_f(cfg, writer, info):
    from .problem import build_nonlinearity

    rep = checks.hypothesis_suite(build_nonlinearity(cfg))
    write_checks(writer, [rep])
    print(rep.render())
    info["passed"] = rep.passed
    return 0 if rep.passed else 1


def _rows_for_window(cfg, fn):
    problem, ed, group, split = _context(cfg)
    rows = [fn(problem, split, lam, o) for o, lam in lambda_window(cfg, split)]
    return problem, ed, group, split, rows


def cmd_geometry(cfg, writer, info):
    import warnings

    from .critical.geometry import verify_geometry
    from .functional import EnergyModel

    def one(problem, split, lam, o):
        model = EnergyModel(problem.fp, problem.alpha, problem.nl, lam)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return lam, verify_geometry(model, split, budget=cfg.solver.geometry_budget, seed=cfg.rng_seed)

    problem, ed, group, split, rows = _rows_for_window(cfg, one)
    writer.csv(
        "geometry.csv",
        ["lambda", "rho", "R", "inf_sphere", "sup_ball", "sup_sphere", "margin", "status"],
        ((lam, g.rho, g.R, g.inf_sphere, g.sup_ball, g.sup_sphere, g.margin, g.status) for lam, g in rows),
    )
    info["group"] = group
    return 0


def cmd_nabla(cfg, writer, info):
    import warnings

    from .critical.geometry import sup_over_Ekh, verify_geometry
    from .critical.nabla import estimate_nabla_condition
    from .functional import EnergyModel

    sv = cfg.solver

    def one(problem, split, lam, o):
        model = EnergyModel(problem.fp, problem.alpha, problem.nl, lam)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            g = verify_geometry(model, split, budget=sv.geometry_budget, seed=cfg.rng_seed)
        sup, _ = sup_over_Ekh(model, split, seed=cfg.rng_seed)
        a, b = sorted((0.5 * g.inf_sphere, sup))
        est = estimate_nabla_condition(model, split, a, b, sv.nabla_gamma * g.rho, sv.nabla_budget, seed=cfg.rng_seed)
        return lam, a, b, est

    problem, ed, group, split, rows = _rows_for_window(cfg, one)
    writer.csv(
        "nabla.csv",
        ["lambda", "eta_low", "eta_high", "nabla_inf", "feasible_starts", "energy", "distance"],
        ((lam, a, b, e.value, e.feasible_starts, e.energy, e.distance) for lam, a, b, e in rows),
    )
    return 0


def _write_report(writer, cfg, rep: ExperimentReport):
    tol, dist = cfg.solver.newton_tol, cfg.solver.dist_tol
    writer.csv(
        "report.csv",
        ["lambda", "margin", "nabla_inf", "n_distinct", "certs"],
        ((r.lam, _finite(r.margin), _finite(r.nabla_inf), r.n_distinct, r.certs_string(tol, dist)) for r in rep.rows),
    )
    writer.csv("solutions.csv", SOLUTION_HEADER, _solution_rows(rep.rows))


def cmd_solve(cfg, writer, info):
    problem, ed, group, split = _context(cfg)
    window = lambda_window(cfg, split)
    o, lam = min(window, key=lambda item: abs(item[0]))
    row = run_lambda(problem, split, lam, o)
    rep = ExperimentReport(cfg, problem, ed, group, split, [row])
    _write_report(writer, cfg, rep)
    write_solutions(writer, problem, row)
    plots.emit_plot(rep, writer.path("plots/solutions.svg"))
    info["rows"] = [_row_summary(row, cfg)]
    return 0


def cmd_scan(cfg, writer, info):
    rep = multiplicity_experiment(cfg)
    _write_report(writer, cfg, rep)
    write_spectrum(writer, rep.problem, rep.spectrum)
    write_solutions(writer, rep.problem, rep.nearest())
    plots.plot_eigenfunctions(rep.problem.mesh, rep.spectrum, writer.path("plots/eigen.svg"))
    plots.emit_plot(rep, writer.path("plots/scan.svg"))
    info["group"] = rep.group
    info["degenerate"] = rep.degenerate
    info["note"] = rep.note
    info["largest_gap_with_three"] = rep.largest_gap_with_three
    info["rows"] = [_row_summary(r, cfg) for r in rep.rows]
    for r in rep.rows:
        print(f"lambda={r.lam:.10g} margin={r.margin:.4g} nabla={r.nabla_inf:.4g} n={r.n_distinct} {r.certs_string(cfg.solver.newton_tol, cfg.solver.dist_tol)}")
    return 0


def cmd_verify_all(cfg, writer, info):
    problem = build_problem(cfg)
    ed = problem.spectrum()
    write_spectrum(writer, problem, ed)
    reports = checks.run_all(problem, ed)
    write_checks(writer, reports)
    for r in reports:
        print(r.render())
    ok = all(r.passed for r in reports)
    info["passed"] = ok
    info["failed"] = [f"{r.title}/{c.name}" for r in reports for c in r.checks if not c.passed]
    return 0 if ok else 1


COMMANDS = {
    "spectrum": cmd_spectrum,
    "verify-f": cmd_verify_f,
    "geometry": cmd_geometry,
    "nabla-check": cmd_nabla,
    "solve": cmd_solve,
    "scan": cmd_scan,
    "verify-all": cmd_verify_all,
}


# --------------------------------------------------------------------------- driver


def _error_payload(stage, exc):
    data = {"error": type(exc).__name__, "message": str(exc), "stage": stage}
    diag = getattr(exc, "diagnostics", None)
    if diag:
        data["diagnostics"] = diag
    residual = getattr(exc, "residual", None)
    if residual is not None:
        data["residual"] = residual
    return data


def run(subcommand: str, cfg: ExperimentConfig) -> int:
    out = Path(cfg.output_dir)
    writer = Writer(out)
    info: dict = {}
    t0 = time.perf_counter()
    try:
        code = COMMANDS[subcommand](cfg, writer, info)
    except SmsError as exc:
        payload = _error_payload(subcommand, exc)
        writer.json("error.json", payload)
        print(json.dumps(payload, default=_json_default), file=sys.stderr)
        code = 2
    except Exception as exc:  # unexpected: still leave a machine-readable trace
        payload = _error_payload(subcommand, exc)
        payload["traceback"] = traceback.format_exc()
        writer.json("error.json", payload)
        print(json.dumps(payload, default=_json_default), file=sys.stderr)
        code = 3
    provenance = {
        "command": subcommand,
        "config": cfg.to_dict(),
        "seed": cfg.rng_seed,
        "tolerances": {
            "cg": cfg.solver.cg_tol,
            "eigen": cfg.spectrum.tol,
            "cluster": cfg.spectrum.cluster_tol,
            "newton": cfg.solver.newton_tol,
            "dist": cfg.solver.dist_tol,
        },
        "exit_code": code,
        "results": info,
        "files": sorted(set(writer.files)),
        "seconds": round(time.perf_counter() - t0, 3),
    }
    writer.json("run.json", provenance)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sms", description="Spectra and multiple solutions of semilinear problems with confining potentials.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("config", help="experiment configuration (JSON)")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--seed", type=int, help="RNG seed (overrides rng_seed)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
        cfg = cfg.with_overrides(output_dir=args.out, rng_seed=args.seed)
    except SmsError as exc:
        print(json.dumps(_error_payload("config", exc)), file=sys.stderr)
        return 2
    return run(args.subcommand, cfg)


if __name__ == "__main__":
    sys.exit(main())

"""End-to-end two-step solve: relax-and-bound, then fix-and-refine.

Step 1 solves the chosen mixed-integer conic relaxation to tolerance;
its best bound is the dual (lower) bound. Step 2 freezes the binaries
of the incumbent and recovers a feasible point of the original problem,
whose exact objective is the primal (upper) bound. The report mirrors
the metric table of the experiments: dual bound, primal bound,
relaxation time, total time and relative gap in percent.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

from .bnb import solve_misocp
from .builder import build_minlp, build_relaxation
from .refine import extract_assignment, fix_and_refine

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_LOCALLY_INFEASIBLE = 3
EXIT_TIME_LIMIT = 4
EXIT_USAGE = 64

INF_MARKER = "inf"
NO_GAP_MARKER = "-"


@dataclass
class PipelineConfig:
    mip_gap: float = 1e-4
    time_limit: float = 3600.0
    seed: int = 0
    paper_tols: bool = False
    node_limit: int = 200000
    refine_iters: int = 50

    @property
    def socp_gap_tol(self):
        # the experiments' barrier tolerance when requested, else tight
        return 5e-6 if self.paper_tols else 1e-8

    @property
    def socp_feas_tol(self):
        return 5e-6 if self.paper_tols else 1e-8


@dataclass
class SolveReport:
    objective: str
    relaxation: str
    stress: float
    dual_bound: float | None = None      # None encodes the "inf" marker
    primal_bound: float | None = None
    relaxation_time: float = 0.0
    total_time: float = 0.0
    gap_percent: float | None = None     # None encodes "-"
    relaxation_status: str = ""
    refinement_status: str = ""
    node_count: int = 0
    mip_gap: float = math.nan
    exit_code: int = EXIT_OK
    notes: list = field(default_factory=list)

    def row(self):
        fmt = lambda v: INF_MARKER if v is None else f"{v:.2f}"
        gap = NO_GAP_MARKER if self.gap_percent is None else f"{self.gap_percent:.2f}"
        return [fmt(self.dual_bound), fmt(self.primal_bound),
                f"{self.relaxation_time:.2f}", f"{self.total_time:.2f}", gap]


def compute_gap_percent(lb, ub, tol=1e-9):
    """100 * (1 - LB/UB) with clamping for tiny numerical overshoot."""
    if ub is None or lb is None:
        return None, []
    if abs(ub) < 1e-12:
        if abs(lb) < 1e-9:
            return 0.0, []
        return None, ["zero primal bound with nonzero dual bound"]
    gap = 100.0 * (1.0 - lb / ub)
    if gap < 0.0:
        if gap > -100.0 * tol * max(1.0, abs(lb) / abs(ub)) - 1e-6:
            return 0.0, ["negative gap clamped to zero"]
        return 0.0, [f"dual bound exceeds primal bound by {-gap:.3g}%; clamped"]
    return gap, []


def run_algorithm1(network, loads, objective, relaxation,
                   config: PipelineConfig | None = None,
                   log=None) -> SolveReport:
    """Lower bound from the relaxation, upper bound from refinement."""
    config = config or PipelineConfig()
    t0 = time.monotonic()
    report = SolveReport(objective=objective, relaxation=relaxation,
                         stress=float("nan"))

    data = build_minlp(network, loads, objective)
    prog = build_relaxation(data, relaxation)
    std = prog.freeze()
    n_base = data.prog.num_vars

    def refine_heuristic(x_frac):
        # feasible points of the original problem complete to feasible
        # relaxation points with the same objective, so they are valid
        # incumbents for the branch-and-bound
        import numpy as np

        asg = extract_assignment(data, prog, x_frac)
        ref = fix_and_refine(data, asg, warm_values=x_frac[:n_base],
                             max_iters=15,
                             solver_opts=dict(gap_tol=config.socp_gap_tol,
                                              feas_tol=config.socp_feas_tol))
        if ref.status != "feasible":
            return None
        padded = np.zeros(std.n)
        padded[:n_base] = ref.values
        for (key, t), zvar in getattr(prog, "direction_vars", {}).items():
            padded[zvar] = 1.0 if ref.values[data.flow[(key, t)]] >= 0.0 else 0.0
        return ref.objective, padded

    mip = solve_misocp(std, mip_gap=config.mip_gap,
                       time_limit=config.time_limit,
                       node_limit=config.node_limit,
                       gap_tol=config.socp_gap_tol,
                       feas_tol=config.socp_feas_tol, log=log,
                       primal_heuristic=refine_heuristic)
    report.relaxation_time = mip.wall_time
    report.relaxation_status = mip.status
    report.node_count = mip.node_count
    report.mip_gap = mip.rel_gap

    if mip.status == "infeasible":
        report.exit_code = EXIT_INFEASIBLE
        report.total_time = time.monotonic() - t0
        return report
    if mip.incumbent is None:
        report.dual_bound = mip.best_bound if math.isfinite(mip.best_bound) else None
        report.exit_code = EXIT_TIME_LIMIT if mip.status == "time-limit" else \
            EXIT_INFEASIBLE
        report.total_time = time.monotonic() - t0
        return report

    report.dual_bound = mip.best_bound
    asg = extract_assignment(data, prog, mip.incumbent)
    refined = fix_and_refine(data, asg,
                             warm_values=mip.incumbent,
                             max_iters=config.refine_iters,
                             solver_opts=dict(gap_tol=config.socp_gap_tol,
                                              feas_tol=config.socp_feas_tol))
    report.refinement_status = refined.status
    if refined.status == "feasible":
        report.primal_bound = refined.objective
        gap, notes = compute_gap_percent(report.dual_bound, report.primal_bound)
        report.gap_percent = gap
        report.notes += notes
    else:
        report.exit_code = EXIT_LOCALLY_INFEASIBLE
    if mip.status == "time-limit":
        report.exit_code = EXIT_TIME_LIMIT
        report.notes.append("relaxation hit the time limit; bound not proven")
    report.total_time = time.monotonic() - t0
    return report


CSV_COLUMNS = ["dual_bound", "primal_bound", "relaxation_time", "total_time",
               "gap_percent"]


def write_report(report: SolveReport, fmt="json") -> bytes:
    """Serialize the metric table row as JSON or CSV."""
    if fmt == "json":
        doc = {
            "objective": report.objective,
            "relaxation": report.relaxation,
            "stress": report.stress,
            "dual_bound": INF_MARKER if report.dual_bound is None
            else report.dual_bound,
            "primal_bound": INF_MARKER if report.primal_bound is None
            else report.primal_bound,
            "relaxation_time": report.relaxation_time,
            "total_time": report.total_time,
            "gap_percent": NO_GAP_MARKER if report.gap_percent is None
            else round(report.gap_percent, 2),
            "relaxation_status": report.relaxation_status,
            "refinement_status": report.refinement_status,
            "node_count": report.node_count,
            "exit_code": report.exit_code,
            "notes": report.notes,
        }
        return (json.dumps(doc, indent=2) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(CSV_COLUMNS)
        writer.writerow(report.row())
        return buf.getvalue().encode()
    raise ValueError(f"unknown report format {fmt!r}")

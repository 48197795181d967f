"""Command-line interface.

Subcommands: solve (the full two-step pipeline), hull (dump one pipe's
vertices/facets), compressor (dump the 11 disjunct records), oracle
(brute-force global check at toy scale) and validate. Exit codes for
solve: 0 solved, 2 infeasible relaxation, 3 locally infeasible
refinement, 4 time limit, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import ingestion
from .builder import build_minlp
from .compressor import disjunct_params
from .network import NetworkValidationError, validate_network
from .oracle import brute_force_global
from .pipeline import (EXIT_USAGE, PipelineConfig, run_algorithm1,
                       write_report)
from .weymouth import build_pipe_hull


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EXIT_USAGE)


def _load_network(path, stress=1.0, sinks_only=False):
    with open(path, "rb") as fh:
        net = ingestion.parse_network_json(fh.read())
    net = validate_network(net)
    if stress != 1.0 or sinks_only:
        ingestion.apply_stress(net, stress, sinks_only=sinks_only)
    return net


def _load_profile(path, horizon):
    if path is None:
        return ingestion.constant_profile(horizon)
    with open(path, "rb") as fh:
        return ingestion.load_demand_profile(fh.read(), horizon)


def _add_instance_args(sub, with_solve_flags=True):
    sub.add_argument("--network", required=True, help="network JSON file")
    if with_solve_flags:
        sub.add_argument("--profile", help="demand-profile CSV (default constant)")
        sub.add_argument("--objective", choices=("g1", "g2", "g3"), default="g3")
        sub.add_argument("--stress", type=float, default=1.0)
        sub.add_argument("--stress-sinks-only", action="store_true")
        sub.add_argument("--seed", type=int, default=0)


def main(argv=None):
    parser = _Parser(prog="gasconic")
    subs = parser.add_subparsers(dest="command", required=True)

    solve = subs.add_parser("solve", help="run the two-step global framework")
    _add_instance_args(solve)
    solve.add_argument("--relaxation", choices=("r1", "r2", "r3"), default="r1")
    solve.add_argument("--time-limit", type=float, default=3600.0)
    solve.add_argument("--mip-gap", type=float, default=1e-4)
    solve.add_argument("--paper-tols", action="store_true",
                       help="use the experiments' looser barrier tolerance")
    solve.add_argument("--out", help="write the report here (default stdout)")
    solve.add_argument("--format", choices=("json", "csv"), default="json")
    solve.add_argument("--log-nodes", action="store_true",
                       help="print per-node search lines")

    hull = subs.add_parser("hull", help="dump a pipe's hull vertices and facets")
    _add_instance_args(hull, with_solve_flags=False)
    hull.add_argument("--pipe", type=int, default=0, help="pipe index")
    hull.add_argument("--out")

    comp = subs.add_parser("compressor", help="dump a compressor's disjunct records")
    _add_instance_args(comp, with_solve_flags=False)
    comp.add_argument("--index", type=int, default=0)
    comp.add_argument("--out")

    oracle = subs.add_parser("oracle", help="brute-force global solve (toy scale)")
    _add_instance_args(oracle)
    oracle.add_argument("--starts", type=int, default=10)

    val = subs.add_parser("validate", help="validate an instance file")
    val.add_argument("--network", required=True)

    args = parser.parse_args(argv)

    if args.command == "validate":
        try:
            _load_network(args.network)
        except NetworkValidationError as exc:
            for eid, msg in exc.violations:
                print(f"{eid}: {msg}")
            return 1
        except (ingestion.SchemaError, OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print("ok")
        return 0

    try:
        if args.command in ("solve", "oracle"):
            net = _load_network(args.network, args.stress, args.stress_sinks_only)
            profile = _load_profile(getattr(args, "profile", None), net.horizon)
        else:
            net = _load_network(args.network)
    except (NetworkValidationError, ingestion.SchemaError, OSError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.command == "hull":
        if not (0 <= args.pipe < len(net.pipes)):
            print("error: pipe index out of range", file=sys.stderr)
            return EXIT_USAGE
        pipe = net.pipes[args.pipe]
        if pipe.kind == "short":
            print("error: short pipes have no hull", file=sys.stderr)
            return EXIT_USAGE
        h = build_pipe_hull(net.pipe_boxes[pipe.key], pipe.w)
        doc = {
            "pipe": {"from": pipe.from_node, "to": pipe.to_node, "w": pipe.w},
            "one_sided": h.one_sided,
            "vertices_pos": None if h.vertices_pos is None
            else h.vertices_pos.tolist(),
            "vertices_neg": None if h.vertices_neg is None
            else h.vertices_neg.tolist(),
            "facets_pos": h.facets_pos,
            "facets_neg": h.facets_neg,
        }
        _emit(json.dumps(doc, indent=2), args.out)
        return 0

    if args.command == "compressor":
        if not (0 <= args.index < len(net.compressors)):
            print("error: compressor index out of range", file=sys.stderr)
            return EXIT_USAGE
        c = net.compressors[args.index]
        ni, nj = net.node_by_id(c.from_node), net.node_by_id(c.to_node)
        recs = disjunct_params(c, ni.pi_min, ni.pi_max, nj.pi_min, nj.pi_max)
        _emit(json.dumps([r.as_dict() for r in recs], indent=2), args.out)
        return 0

    loads = ingestion.expand_loads(net, profile)

    if args.command == "oracle":
        data = build_minlp(net, loads, args.objective)
        try:
            result = brute_force_global(data, starts=args.starts, seed=args.seed)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        doc = {"objective": result.objective,
               "assignments_tried": result.assignments_tried,
               "feasible_assignments": result.feasible_assignments}
        print(json.dumps(doc, indent=2))
        return 0

    config = PipelineConfig(mip_gap=args.mip_gap, time_limit=args.time_limit,
                            seed=args.seed, paper_tols=args.paper_tols)
    log = print if args.log_nodes else None
    report = run_algorithm1(net, loads, args.objective, args.relaxation,
                            config, log=log)
    report.stress = args.stress
    _emit(write_report(report, args.format).decode(), args.out)
    return report.exit_code


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


if __name__ == "__main__":
    sys.exit(main())

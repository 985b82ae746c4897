"""Command-line entry point tying the pipeline together.

    dagsim gen-topology       generate a connected random topology file
    dagsim simulate           run one simulation
    dagsim analyze-collisions duplicate-transaction report for a data file
    dagsim analyze-profits    per-miner profit report for a data file
    dagsim sweep              run an experiment grid and aggregate results
"""

import argparse
import random
import sys

from .analysis import analyze_collisions, analyze_profits, write_report_csv
from .engine import run_simulation
from .model import parse_config, parse_topology, validate_config, write_topology
from .sweep import parse_sweep_spec, run_sweep
from .topology import PowerPlan, build_topology, parse_distribution, parse_malicious_spec


def _cmd_gen_topology(args):
    degree_dist = parse_distribution(args.degree_dist)
    delay_dist = parse_distribution(args.delay_dist)
    plan = parse_malicious_spec(args.malicious) if args.malicious else PowerPlan()
    rng = random.Random(args.seed)
    topo = build_topology(args.nodes, degree_dist, delay_dist, plan, rng)
    write_topology(topo, args.out)
    degrees = topo.degrees()
    print(
        f"wrote {args.out}: {topo.node_count} nodes, {len(topo.links)} links, "
        f"degree min/mean/max = {min(degrees)}/"
        f"{sum(degrees) / len(degrees):.2f}/{max(degrees)}"
    )
    return 0


def _cmd_simulate(args):
    config = parse_config(args.config)
    topology = parse_topology(args.topology)
    problems = validate_config(config, topology)
    if problems:
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        return 2
    result = run_simulation(
        config,
        topology,
        args.out_prefix,
        seed=args.seed,
        mirror_progress=not args.quiet,
        audit=args.audit,
    )
    return 0 if result.status == "completed" else 1


def _cmd_analyze_collisions(args):
    report = analyze_collisions(args.data)
    print(report.to_text())
    if args.csv_out:
        write_report_csv(args.csv_out, report)
        print(f"wrote {args.csv_out}")
    return 0


def _cmd_analyze_profits(args):
    report = analyze_profits(args.data, args.threshold, args.block_reward)
    print(report.to_text())
    if args.csv_out:
        write_report_csv(args.csv_out, report)
        print(f"wrote {args.csv_out}")
    return 0


def _cmd_sweep(args):
    spec = parse_sweep_spec(args.spec, out_dir=args.out_dir, workers=args.workers)
    run_sweep(spec)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dagsim",
        description="DAG proof-of-work network simulator and analysis tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-topology", help="generate a connected random topology")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--degree-dist", required=True, metavar="FILE",
                   help="discrete distribution file: 'value weight' per line")
    p.add_argument("--delay-dist", required=True, metavar="FILE",
                   help="link delay distribution file (milliseconds)")
    p.add_argument("--malicious", default="",
                   help="explicit miners as 'id:power,id:power,...'; the rest "
                        "split the remaining power evenly and stay honest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_topology)

    p = sub.add_parser("simulate", help="run one simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--topology", required=True)
    p.add_argument("--out-prefix", required=True,
                   help="writes <prefix>.data.csv, <prefix>.meta, <prefix>.progress")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config's rng_seed")
    p.add_argument("--quiet", action="store_true",
                   help="do not mirror progress to stdout")
    p.add_argument("--audit", action="store_true",
                   help="verify mempool invariants after every operation (slow)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze-collisions", help="duplicate-transaction report")
    p.add_argument("data", help="path to a <prefix>.data.csv file")
    p.add_argument("--csv-out", default=None)
    p.set_defaults(func=_cmd_analyze_collisions)

    p = sub.add_parser("analyze-profits", help="per-miner profit report")
    p.add_argument("data", help="path to a <prefix>.data.csv file")
    p.add_argument("--threshold", type=float, required=True,
                   help="minimum mining power for an individual report row; "
                        "miners below it are merged")
    p.add_argument("--block-reward", type=float, default=0.0)
    p.add_argument("--csv-out", default=None)
    p.set_defaults(func=_cmd_analyze_profits)

    p = sub.add_parser("sweep", help="run an experiment grid")
    p.add_argument("spec", help="sweep description file")
    p.add_argument("--out-dir", default=None, help="override the spec's out_dir")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

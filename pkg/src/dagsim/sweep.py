"""Experiment sweep driver: run a grid of simulations and aggregate reports.

A sweep is described by a flat key=value text file ('#' comments allowed):

    config = base.cfg            # base simulation config
    topology = net.topo          # base topology (roles reassigned per run)
    out_dir = sweep_out          # where run outputs and CSVs land
    seeds = 10                   # count (0..9) or explicit list "3,7,11"
    placements = 1               # how many miner placements to try
    axis.variant = probe,begin,equal_key
    axis.malicious_power = 0.1,0.2,0.3    # single malicious miner, power axis
    axis.malicious_count = 1,2,3,4        # designated miners, count axis
    designated_power = 0.1       # power per designated miner (count axis)
    designated_count = 4         # defaults to max of the count axis
    power_threshold = 0.05       # profit analysis threshold
    block_reward = 0
    workers = 2

Axis values are crossed with each other and with placements × seeds; each
cell is one independent simulation run.  Placements re-assign the designated
roles to different miners of comparable degree (closest to the median).  Two
files are produced: runs.csv with one row per run and summary.csv averaging
the metric columns over seeds and placements.  A failing run is recorded in
runs.csv and the sweep continues.
"""

import csv
import itertools
import os
import statistics
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, replace

from .analysis import analyze_collisions, analyze_profits
from .engine import run_simulation
from .model import (
    RandomAccessVariant,
    Strategy,
    Topology,
    parse_config,
    parse_topology,
)
from .topology import PowerPlan

RUN_COLUMNS = (
    "tag", "variant", "malicious_power", "malicious_count", "placement",
    "seed", "status", "blocks", "total_rows", "distinct_count", "unique_count",
    "weighted_duplicate_sum", "duplication_rate", "effective_throughput",
    "malicious_power_total", "malicious_blocks", "malicious_fee_income",
    "malicious_profit_share", "per_malicious_share", "error",
)

METRIC_COLUMNS = (
    "blocks", "total_rows", "distinct_count", "unique_count",
    "weighted_duplicate_sum", "duplication_rate", "effective_throughput",
    "malicious_power_total", "malicious_blocks", "malicious_fee_income",
    "malicious_profit_share", "per_malicious_share",
)


@dataclass(frozen=True)
class SweepSpec:
    config_path: str
    topology_path: str
    out_dir: str
    seeds: tuple
    placements: int
    variants: tuple  # of RandomAccessVariant, or () to keep the base config
    malicious_powers: tuple
    malicious_counts: tuple
    designated_power: float
    designated_count: int
    power_threshold: float
    block_reward: float
    workers: int


def parse_sweep_spec(path, out_dir=None, workers=None) -> SweepSpec:
    values = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    def split(key):
        return tuple(x.strip() for x in values[key].split(",") if x.strip())

    if "config" not in values or "topology" not in values:
        raise ValueError(f"{path}: sweep spec needs 'config' and 'topology' keys")
    seeds_text = values.get("seeds", "10")
    if "," in seeds_text:
        seeds = tuple(int(s) for s in split("seeds"))
    else:
        seeds = tuple(range(int(seeds_text)))
    powers = tuple(float(x) for x in split("axis.malicious_power")) \
        if "axis.malicious_power" in values else ()
    counts = tuple(int(x) for x in split("axis.malicious_count")) \
        if "axis.malicious_count" in values else ()
    if powers and counts:
        raise ValueError(
            f"{path}: axis.malicious_power and axis.malicious_count are exclusive"
        )
    variants = tuple(RandomAccessVariant(v) for v in split("axis.variant")) \
        if "axis.variant" in values else ()
    return SweepSpec(
        config_path=resolve(values["config"]),
        topology_path=resolve(values["topology"]),
        out_dir=out_dir or resolve(values.get("out_dir", "sweep_out")),
        seeds=seeds,
        placements=int(values.get("placements", "1")),
        variants=variants,
        malicious_powers=powers,
        malicious_counts=counts,
        designated_power=float(values.get("designated_power", "0.1")),
        designated_count=int(
            values.get("designated_count", str(max(counts) if counts else 1))
        ),
        power_threshold=float(values.get("power_threshold", "0.05")),
        block_reward=float(values.get("block_reward", "0")),
        workers=workers or int(values.get("workers", "2")),
    )


def comparable_degree_nodes(topology: Topology, needed):
    """Node ids usable as designated miners: degree closest to the median."""
    degrees = topology.degrees()
    med = statistics.median(degrees)
    order = sorted(range(len(degrees)), key=lambda i: (abs(degrees[i] - med), i))
    if needed > len(order):
        raise ValueError(f"placement needs {needed} nodes, topology has {len(order)}")
    return order[:needed]


@dataclass(frozen=True)
class RunTask:
    tag: str
    variant: str  # "" = keep base config's variant
    malicious_power: float | None
    malicious_count: int | None
    placement: int
    seed: int
    designated: tuple  # (miner_id, power, strategy-value) triples
    power_threshold: float
    block_reward: float
    config_path: str
    topology_path: str
    out_prefix: str


def build_tasks(spec: SweepSpec, topology: Topology):
    variant_axis = spec.variants or (None,)
    if spec.malicious_powers:
        role_axis = [("power", p) for p in spec.malicious_powers]
        nodes_per_placement = 1
    elif spec.malicious_counts:
        role_axis = [("count", c) for c in spec.malicious_counts]
        nodes_per_placement = spec.designated_count
    else:
        role_axis = [(None, None)]
        nodes_per_placement = 0
    candidates = comparable_degree_nodes(
        topology, nodes_per_placement * spec.placements
    ) if nodes_per_placement else []

    tasks = []
    for variant, (kind, value), placement, seed in itertools.product(
        variant_axis, role_axis, range(spec.placements), spec.seeds
    ):
        chosen = candidates[
            placement * nodes_per_placement:(placement + 1) * nodes_per_placement
        ]
        if kind == "power":
            designated = ((chosen[0], value, Strategy.MALICIOUS_MAX_FEE.value),)
        elif kind == "count":
            designated = tuple(
                (
                    node,
                    spec.designated_power,
                    Strategy.MALICIOUS_MAX_FEE.value
                    if i < value
                    else Strategy.HONEST_RANDOM.value,
                )
                for i, node in enumerate(chosen)
            )
        else:
            designated = ()
        parts = []
        if variant is not None:
            parts.append(f"var-{variant.value}")
        if kind == "power":
            parts.append(f"pow-{value}")
        if kind == "count":
            parts.append(f"cnt-{value}")
        parts.append(f"plc-{placement}")
        parts.append(f"seed-{seed}")
        tag = "_".join(parts)
        tasks.append(RunTask(
            tag=tag,
            variant=variant.value if variant is not None else "",
            malicious_power=value if kind == "power" else None,
            malicious_count=value if kind == "count" else None,
            placement=placement,
            seed=seed,
            designated=designated,
            power_threshold=spec.power_threshold,
            block_reward=spec.block_reward,
            config_path=spec.config_path,
            topology_path=spec.topology_path,
            out_prefix=os.path.join(spec.out_dir, "runs", tag),
        ))
    return tasks


def execute_task(task: RunTask):
    """Run one simulation and analyze it; never raises, returns a row dict."""
    row = {c: "" for c in RUN_COLUMNS}
    row.update(
        tag=task.tag,
        variant=task.variant,
        malicious_power="" if task.malicious_power is None else task.malicious_power,
        malicious_count="" if task.malicious_count is None else task.malicious_count,
        placement=task.placement,
        seed=task.seed,
    )
    try:
        config = parse_config(task.config_path)
        topology = parse_topology(task.topology_path)
        if task.designated:
            plan = PowerPlan(assigned=tuple(
                (mid, power, Strategy(strat)) for mid, power, strat in task.designated
            ))
            topology = Topology(
                nodes=plan.node_specs(topology.node_count), links=topology.links
            )
        if task.variant:
            config = replace(
                config, random_access_variant=RandomAccessVariant(task.variant)
            )
        config = replace(config, rng_seed=task.seed)
        os.makedirs(os.path.dirname(task.out_prefix), exist_ok=True)
        result = run_simulation(config, topology, task.out_prefix,
                                mirror_progress=False)
        row["status"] = result.status
        if result.status != "completed":
            row["error"] = result.error or ""
        if result.blocks_mined == 0:
            return row

        col = analyze_collisions(result.data_path)
        row.update(
            blocks=col.blocks,
            total_rows=col.total_rows,
            distinct_count=col.distinct_count,
            unique_count=col.unique_count,
            weighted_duplicate_sum=col.weighted_duplicate_sum,
            duplication_rate=col.duplication_rate,
            effective_throughput=(
                "" if col.effective_throughput is None else col.effective_throughput
            ),
        )
        # keep every malicious miner individually visible in the report
        threshold = task.power_threshold
        malicious_powers = [
            power for _, power, strat in task.designated
            if strat == Strategy.MALICIOUS_MAX_FEE.value
        ] or [
            nd.mining_power for nd in topology.nodes
            if nd.strategy is Strategy.MALICIOUS_MAX_FEE
        ]
        if malicious_powers:
            threshold = min(threshold, min(malicious_powers))
        prof = analyze_profits(result.data_path, threshold, task.block_reward)
        mal = [r for r in prof.rows if r.strategy == Strategy.MALICIOUS_MAX_FEE.value]
        row.update(
            malicious_power_total=sum(r.mining_power for r in mal),
            malicious_blocks=sum(r.blocks_mined for r in mal),
            malicious_fee_income=sum(r.fee_income for r in mal),
            malicious_profit_share=sum(r.profit_share for r in mal),
            per_malicious_share=(
                sum(r.profit_share for r in mal) / len(mal) if mal else ""
            ),
        )
    except Exception as exc:  # record and keep sweeping
        row["status"] = row["status"] or "failed"
        row["error"] = str(exc)
    return row


def _sort_key(row):
    return (
        str(row["variant"]),
        float(row["malicious_power"] or -1),
        int(row["malicious_count"] or -1),
        int(row["placement"]),
        int(row["seed"]),
    )


def aggregate(rows):
    """Average metric columns over seeds/placements per axis point."""
    groups = {}
    for row in rows:
        key = (row["variant"], row["malicious_power"], row["malicious_count"])
        groups.setdefault(key, []).append(row)
    summary = []
    for key in sorted(groups, key=lambda k: (str(k[0]), str(k[1]), str(k[2]))):
        group = groups[key]
        ok = [r for r in group if r["status"] == "completed"]
        out = {
            "variant": key[0],
            "malicious_power": key[1],
            "malicious_count": key[2],
            "n_runs": len(group),
            "n_failed": len(group) - len(ok),
        }
        for col in METRIC_COLUMNS:
            vals = [float(r[col]) for r in ok if r[col] != ""]
            out[f"mean_{col}"] = statistics.fmean(vals) if vals else ""
        summary.append(out)
    return summary


def run_sweep(spec: SweepSpec, progress=print):
    os.makedirs(spec.out_dir, exist_ok=True)
    topology = parse_topology(spec.topology_path)
    tasks = build_tasks(spec, topology)
    progress(f"sweep: {len(tasks)} runs, {spec.workers} workers")
    rows = []
    if spec.workers <= 1:
        for i, task in enumerate(tasks, 1):
            rows.append(execute_task(task))
            progress(f"run {i}/{len(tasks)} done: {task.tag}")
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = {pool.submit(execute_task, t): t for t in tasks}
            for i, fut in enumerate(as_completed(futures), 1):
                rows.append(fut.result())
                progress(f"run {i}/{len(tasks)} done: {futures[fut].tag}")
    rows.sort(key=_sort_key)

    runs_path = os.path.join(spec.out_dir, "runs.csv")
    with open(runs_path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=RUN_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    summary = aggregate(rows)
    summary_path = os.path.join(spec.out_dir, "summary.csv")
    if summary:
        with open(summary_path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(summary[0].keys()))
            w.writeheader()
            w.writerows(summary)
    progress(f"wrote {runs_path} and {summary_path}")
    return rows, summary

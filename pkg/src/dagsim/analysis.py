"""Post-processing of run outputs into collision and profit reports.

Both analyzers stream the data file (memory stays independent of block count
apart from the distinct-transaction map) and locate the companion metadata
file by the `<prefix>.data.csv` → `<prefix>.meta` naming convention.  A
truncated final block — the normal result of a crash — is tolerated: only
the complete block prefix is analyzed.

Definition used throughout: duplication_rate = sum over duplicated
transactions of (multiplicity - 1), divided by the total number of inclusion
rows.  It is the fraction of block capacity wasted on redundant copies, so
it lies in [0, 1).
"""

import csv
import os
from dataclasses import dataclass

from .output import DATA_HEADER, parse_metadata

HISTOGRAM_BUCKETS = (2, 3, 4, 5, "5+")


class AnalysisError(RuntimeError):
    pass


def meta_path_for(data_path):
    base = str(data_path)
    if not base.endswith(".data.csv"):
        raise AnalysisError(
            f"{data_path}: expected a <prefix>.data.csv file to locate metadata"
        )
    return base[: -len(".data.csv")] + ".meta"


def load_metadata(data_path):
    path = meta_path_for(data_path)
    if not os.path.exists(path):
        raise AnalysisError(f"metadata file {path} not found next to {data_path}")
    return parse_metadata(path)


def iter_complete_blocks(data_path, block_size):
    """Yield (block_id, height, miner_id, [(tx_id, fee), ...]) per complete block.

    Reading stops at the first malformed row (crash truncation point); a
    final block with fewer than block_size rows is dropped.
    """
    if not os.path.exists(data_path):
        raise AnalysisError(f"data file {data_path} not found")
    with open(data_path, newline="") as f:
        header = f.readline().strip()
        if header != DATA_HEADER:
            raise AnalysisError(
                f"{data_path}: unexpected header {header!r}, not a dagsim data file"
            )
        current = None  # (block_id, height, miner_id)
        rows = []
        for raw in csv.reader(f):
            try:
                tx_id, fee, block_id, height, miner_id = (int(x) for x in raw)
            except (ValueError, TypeError):
                break  # truncated tail
            key = (block_id, height, miner_id)
            if current is None:
                current = key
            elif key != current:
                if len(rows) == block_size:
                    yield (*current, rows)
                current = key
                rows = []
            rows.append((tx_id, fee))
        if current is not None and len(rows) == block_size:
            yield (*current, rows)


@dataclass(frozen=True)
class CollisionReport:
    total_rows: int
    distinct_count: int
    unique_count: int  # transactions included exactly once
    duplicates_histogram: dict  # multiplicity bucket -> distinct tx count
    weighted_duplicate_sum: int  # sum of (multiplicity - 1) over duplicated txs
    duplication_rate: float
    effective_throughput: float | None  # unique transactions per simulated second
    blocks: int

    def to_text(self):
        lines = [
            "collision report",
            "  duplication_rate = weighted duplicate inclusions / total inclusion rows",
            f"  blocks analyzed:          {self.blocks}",
            f"  inclusion rows:           {self.total_rows}",
            f"  distinct transactions:    {self.distinct_count}",
            f"  unique (included once):   {self.unique_count}",
        ]
        for bucket in HISTOGRAM_BUCKETS:
            label = f"included {bucket} times:"
            lines.append(f"  {label:<26}{self.duplicates_histogram[bucket]}")
        lines.append(f"  weighted duplicate sum:   {self.weighted_duplicate_sum}")
        lines.append(f"  duplication rate:         {self.duplication_rate:.6f}")
        if self.effective_throughput is None:
            lines.append("  effective throughput:     unavailable (no duration recorded)")
        else:
            lines.append(
                f"  effective throughput:     {self.effective_throughput:.6f} tx/s"
            )
        return "\n".join(lines)

    def csv_rows(self):
        head = [
            "blocks", "total_rows", "distinct_count", "unique_count",
            "dup2", "dup3", "dup4", "dup5", "dup5plus",
            "weighted_duplicate_sum", "duplication_rate", "effective_throughput",
        ]
        row = [
            self.blocks, self.total_rows, self.distinct_count, self.unique_count,
            *(self.duplicates_histogram[b] for b in HISTOGRAM_BUCKETS),
            self.weighted_duplicate_sum,
            repr(self.duplication_rate),
            "" if self.effective_throughput is None else repr(self.effective_throughput),
        ]
        return [head, [str(x) for x in row]]


def analyze_collisions(data_path) -> CollisionReport:
    meta = load_metadata(data_path)
    multiplicity = {}
    total_rows = 0
    blocks = 0
    for _bid, _height, _miner, rows in iter_complete_blocks(
        data_path, meta.config.block_size
    ):
        blocks += 1
        total_rows += len(rows)
        for tx_id, _fee in rows:
            multiplicity[tx_id] = multiplicity.get(tx_id, 0) + 1
    histogram = {b: 0 for b in HISTOGRAM_BUCKETS}
    unique = 0
    weighted = 0
    for mult in multiplicity.values():
        if mult == 1:
            unique += 1
        else:
            histogram[mult if mult <= 5 else "5+"] += 1
            weighted += mult - 1
    duration = meta.last_block_time
    return CollisionReport(
        total_rows=total_rows,
        distinct_count=len(multiplicity),
        unique_count=unique,
        duplicates_histogram=histogram,
        weighted_duplicate_sum=weighted,
        duplication_rate=(weighted / total_rows) if total_rows else 0.0,
        effective_throughput=(
            unique / duration if duration is not None and duration > 0 else None
        ),
        blocks=blocks,
    )


@dataclass(frozen=True)
class ProfitRow:
    label: str  # miner id as text, or "merged"
    mining_power: float  # fair-baseline share
    strategy: str  # honest | malicious | mixed
    blocks_mined: int
    fee_income: int
    block_reward_income: float
    total: float
    profit_share: float


@dataclass(frozen=True)
class ProfitReport:
    rows: tuple  # ProfitRow, individual miners first, merged row last
    power_threshold: float
    block_reward: float
    blocks: int

    def to_text(self):
        lines = [
            "profit report",
            f"  power threshold: {self.power_threshold}  "
            f"block reward: {self.block_reward}",
            f"  blocks analyzed: {self.blocks}",
            "  miner      power      strategy   blocks  fee_income  "
            "reward_income  total        profit_share",
        ]
        for r in self.rows:
            lines.append(
                f"  {r.label:<9}  {r.mining_power:<9.6f}  {r.strategy:<9}  "
                f"{r.blocks_mined:<6}  {r.fee_income:<10}  "
                f"{r.block_reward_income:<13.1f}  {r.total:<11.1f}  "
                f"{r.profit_share:.6f}"
            )
        return "\n".join(lines)

    def csv_rows(self):
        head = [
            "miner", "mining_power", "strategy", "blocks_mined", "fee_income",
            "block_reward_income", "total", "profit_share",
        ]
        out = [head]
        for r in self.rows:
            out.append([
                r.label, repr(r.mining_power), r.strategy, str(r.blocks_mined),
                str(r.fee_income), repr(r.block_reward_income), repr(r.total),
                repr(r.profit_share),
            ])
        return out


def analyze_profits(data_path, power_threshold, block_reward=0.0) -> ProfitReport:
    meta = load_metadata(data_path)
    blocks_mined = {}
    fee_income = {}
    blocks = 0
    for _bid, _height, miner_id, rows in iter_complete_blocks(
        data_path, meta.config.block_size
    ):
        blocks += 1
        blocks_mined[miner_id] = blocks_mined.get(miner_id, 0) + 1
        fee_income[miner_id] = fee_income.get(miner_id, 0) + sum(f for _, f in rows)

    individual = []
    merged_power = 0.0
    merged_blocks = 0
    merged_fees = 0
    merged_strategies = set()
    for miner_id, power, strategy in meta.miners:
        b = blocks_mined.get(miner_id, 0)
        f = fee_income.get(miner_id, 0)
        if power >= power_threshold:
            individual.append((miner_id, power, strategy, b, f))
        else:
            merged_power += power
            merged_blocks += b
            merged_fees += f
            merged_strategies.add(strategy)

    def build_row(label, power, strategy, b, f):
        reward_income = b * block_reward
        return ProfitRow(
            label=label,
            mining_power=power,
            strategy=strategy,
            blocks_mined=b,
            fee_income=f,
            block_reward_income=reward_income,
            total=f + reward_income,
            profit_share=0.0,  # filled below
        )

    rows = [
        build_row(str(mid), power, strategy.value, b, f)
        for mid, power, strategy, b, f in individual
    ]
    if merged_power > 0 or (len(individual) < len(meta.miners)):
        if len(merged_strategies) == 1:
            merged_strat = merged_strategies.pop().value
        else:
            merged_strat = "mixed"
        rows.append(
            build_row("merged", merged_power, merged_strat, merged_blocks, merged_fees)
        )
    grand_total = sum(r.total for r in rows)
    if grand_total > 0:
        rows = [
            ProfitRow(
                label=r.label,
                mining_power=r.mining_power,
                strategy=r.strategy,
                blocks_mined=r.blocks_mined,
                fee_income=r.fee_income,
                block_reward_income=r.block_reward_income,
                total=r.total,
                profit_share=r.total / grand_total,
            )
            for r in rows
        ]
    return ProfitReport(
        rows=tuple(rows),
        power_threshold=power_threshold,
        block_reward=block_reward,
        blocks=blocks,
    )


def write_report_csv(path, report):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerows(report.csv_rows())

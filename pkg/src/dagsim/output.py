"""Run output files: streamed data rows, human-readable progress, metadata.

Three files per run, named `<prefix>.data.csv`, `<prefix>.progress` and
`<prefix>.meta`.  The data file is append-only CSV flushed after every block,
so a crash loses at most the block being written.  Progress lines are
timestamped and mirrored to stdout.  Metadata is key=value text written at
run start (plus a small trailer at the end) and carries everything the
post-processing analyzers need.
"""

import time
from dataclasses import dataclass

from .model import CONFIG_FIELDS, RandomAccessVariant, SimConfig, Strategy

VERSION = "0.1.0"

DATA_HEADER = "tx_id,tx_fee,block_id,height,miner_id"


def out_paths(prefix):
    return (f"{prefix}.data.csv", f"{prefix}.meta", f"{prefix}.progress")


class DataWriter:
    """Append-only CSV sink for per-transaction inclusion rows."""

    def __init__(self, path):
        self.path = path
        self._f = open(path, "w")
        self._f.write(DATA_HEADER + "\n")
        self._f.flush()

    def write_row(self, tx_id, tx_fee, block_id, height, miner_id):
        self._f.write(f"{tx_id},{tx_fee},{block_id},{height},{miner_id}\n")

    def write_block(self, block_id, height, miner_id, tx_ids, fees):
        w = self._f.write
        for t, f in zip(tx_ids, fees):
            w(f"{t},{f},{block_id},{height},{miner_id}\n")
        self._f.flush()  # one block is the crash-loss unit

    def flush(self):
        self._f.flush()

    def close(self):
        self._f.close()


class ProgressWriter:
    """Timestamped progress log, mirrored to standard output."""

    def __init__(self, path, mirror=True):
        self.path = path
        self.mirror = mirror
        self._f = open(path, "w")
        self._t0 = time.monotonic()

    def write(self, message):
        stamp = time.strftime("%Y-%m-%d %H:%M:%S")
        line = f"[{stamp}] {message}"
        self._f.write(line + "\n")
        self._f.flush()
        if self.mirror:
            print(line, flush=True)

    def write_duration(self):
        self.write(f"total duration {time.monotonic() - self._t0:.3f} s")

    def write_mempool_snapshot(self, miners, pools, full_dump=False):
        """One line per miner: count and fee range (optionally the full pool)."""
        self.write("mempool snapshot:")
        for spec, pool in zip(miners, pools):
            if pool.size == 0:
                self._f.write(f"  miner {spec.miner_id}: count=0\n")
                continue
            min_fee, _ = pool.min_key()
            top = pool.take_top_fee(1)[0]
            self._f.write(
                f"  miner {spec.miner_id}: count={pool.size} "
                f"min_fee={min_fee} max_fee={top.fee}\n"
            )
            if full_dump:
                for tx in pool.iter_sorted():
                    self._f.write(f"    tx {tx.tx_id} fee {tx.fee}\n")
        self._f.flush()

    def close(self):
        self._f.close()


@dataclass(frozen=True)
class RunMetadata:
    config: SimConfig
    node_count: int
    link_count: int
    miners: tuple  # (miner_id, mining_power, strategy) for every miner
    seed: int
    version: str = VERSION
    # trailer, present once the run has produced at least one block
    blocks_mined: int | None = None
    last_block_time: float | None = None
    status: str | None = None


def _config_lines(config):
    for key in CONFIG_FIELDS:
        val = getattr(config, key)
        if isinstance(val, tuple):
            yield f"{key}={val[0]!r},{val[1]!r}"
        elif isinstance(val, RandomAccessVariant):
            yield f"{key}={val.value}"
        elif isinstance(val, float):
            yield f"{key}={val!r}"
        else:
            yield f"{key}={val}"


def write_metadata(path, meta: RunMetadata):
    """Write key=value metadata.

    Miners matching the most common (power, strategy) pair are folded into a
    single `default_miners` line; every other miner gets its own `miner` line.
    """
    groups = {}
    for miner_id, power, strategy in meta.miners:
        groups.setdefault((power, strategy), []).append(miner_id)
    default = max(groups, key=lambda g: len(groups[g])) if groups else None
    with open(path, "w") as f:
        f.write("format=dagsim-meta-v1\n")
        f.write(f"version={meta.version}\n")
        f.write(f"seed={meta.seed}\n")
        for line in _config_lines(meta.config):
            f.write(line + "\n")
        f.write(f"nodes={meta.node_count}\n")
        f.write(f"links={meta.link_count}\n")
        if default is not None:
            power, strategy = default
            f.write(
                f"default_miners count={len(groups[default])} "
                f"power={power!r} strategy={strategy.value}\n"
            )
        for miner_id, power, strategy in meta.miners:
            if (power, strategy) == default:
                continue
            f.write(f"miner {miner_id} {power!r} {strategy.value}\n")


def append_metadata_trailer(path, blocks_mined, last_block_time, status):
    with open(path, "a") as f:
        f.write(f"blocks_mined={blocks_mined}\n")
        f.write(f"last_block_time={last_block_time!r}\n")
        f.write(f"status={status}\n")


def parse_metadata(path) -> RunMetadata:
    values = {}
    miner_lines = []
    default_line = None
    with open(path) as f:
        for raw in f:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("miner "):
                _, mid, power, strategy = line.split()
                miner_lines.append((int(mid), float(power), Strategy(strategy)))
            elif line.startswith("default_miners "):
                default_line = dict(
                    p.split("=") for p in line.split(None, 1)[1].split()
                )
            elif "=" in line:
                key, _, val = line.partition("=")
                values[key] = val

    def pair(key, cast):
        lo, _, hi = values[key].partition(",")
        return (cast(lo), cast(hi))

    config = SimConfig(
        block_interval_lambda=float(values["block_interval_lambda"]),
        total_blocks=int(values["total_blocks"]),
        block_size=int(values["block_size"]),
        mempool_capacity=int(values["mempool_capacity"]),
        initial_tx_count=int(values["initial_tx_count"]),
        txgen_count_range=pair("txgen_count_range", int),
        txgen_delay_range=pair("txgen_delay_range", float),
        fee_range=pair("fee_range", int),
        rng_seed=int(values["rng_seed"]),
        random_access_variant=RandomAccessVariant(values["random_access_variant"]),
    )
    node_count = int(values["nodes"])
    miners = {mid: (mid, power, strat) for mid, power, strat in miner_lines}
    if default_line is not None:
        power = float(default_line["power"])
        strategy = Strategy(default_line["strategy"])
        for mid in range(node_count):
            if mid not in miners:
                miners[mid] = (mid, power, strategy)
    return RunMetadata(
        config=config,
        node_count=node_count,
        link_count=int(values["links"]),
        miners=tuple(miners[m] for m in sorted(miners)),
        seed=int(values["seed"]),
        version=values.get("version", "unknown"),
        blocks_mined=int(values["blocks_mined"]) if "blocks_mined" in values else None,
        last_block_time=(
            float(values["last_block_time"]) if "last_block_time" in values else None
        ),
        status=values.get("status"),
    )

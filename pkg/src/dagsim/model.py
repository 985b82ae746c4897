"""Core domain types shared by every other module.

All types here are plain immutable dataclasses; once constructed they are
safe to share read-only across concurrently running simulations.  Fees and
transaction ids are integers (abstract units) so that profit sums are exact
and runs reproduce bit-for-bit.
"""

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

MAX_ID64 = 2**63 - 1  # ids/fees are stored in signed 64-bit arrays internally


class Strategy(Enum):
    """Transaction selection strategy of a miner."""

    HONEST_RANDOM = "honest"
    MALICIOUS_MAX_FEE = "malicious"


class RandomAccessVariant(Enum):
    """Random-access algorithm used by honest miners.

    PROBE     start at a random bucket, scan alternately above/below with
              wraparound until an occupied bucket is found.
    BEGIN     always start scanning upward from bucket zero; per-miner
              bucket layouts still differ (miner-specific salt).
    EQUAL_KEY same scan as BEGIN but every miner shares one fixed salt, so
              all miners see identical bucket layouts.
    """

    PROBE = "probe"
    BEGIN = "begin"
    EQUAL_KEY = "equal_key"


@dataclass(frozen=True)
class Transaction:
    tx_id: int
    fee: int


@dataclass(frozen=True)
class NodeSpec:
    miner_id: int
    mining_power: float  # fraction of total hash rate, in [0, 1]
    strategy: Strategy


@dataclass(frozen=True)
class Link:
    node_a: int
    node_b: int
    delay_ms: int

    def key(self):
        """Unordered pair identifying this link."""
        a, b = self.node_a, self.node_b
        return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Topology:
    nodes: tuple
    links: tuple

    @property
    def node_count(self):
        return len(self.nodes)

    def adjacency(self):
        """Per-node list of (neighbor, delay_ms) pairs."""
        adj = [[] for _ in self.nodes]
        for ln in self.links:
            adj[ln.node_a].append((ln.node_b, ln.delay_ms))
            adj[ln.node_b].append((ln.node_a, ln.delay_ms))
        return adj

    def degrees(self):
        return [len(a) for a in self.adjacency()]


@dataclass(frozen=True)
class Block:
    block_id: int
    height: int
    miner_id: int
    tx_ids: tuple
    fees: tuple
    mined_at: float


@dataclass(frozen=True)
class SimConfig:
    block_interval_lambda: float  # mean block inter-arrival, seconds
    total_blocks: int
    block_size: int
    mempool_capacity: int
    initial_tx_count: int
    txgen_count_range: tuple  # (n, m) transactions per generation event
    txgen_delay_range: tuple  # (p, q) seconds between generation events
    fee_range: tuple  # (fee_min, fee_max) inclusive
    rng_seed: int
    random_access_variant: RandomAccessVariant = RandomAccessVariant.PROBE

    def __post_init__(self):
        # normalize numeric kinds so serialization round-trips exactly
        object.__setattr__(self, "block_interval_lambda", float(self.block_interval_lambda))
        object.__setattr__(self, "txgen_count_range", tuple(int(x) for x in self.txgen_count_range))
        object.__setattr__(self, "txgen_delay_range", tuple(float(x) for x in self.txgen_delay_range))
        object.__setattr__(self, "fee_range", tuple(int(x) for x in self.fee_range))


CONFIG_FIELDS = (
    "block_interval_lambda",
    "total_blocks",
    "block_size",
    "mempool_capacity",
    "initial_tx_count",
    "txgen_count_range",
    "txgen_delay_range",
    "fee_range",
    "rng_seed",
    "random_access_variant",
)


def connected_component(node_count, links, start=0):
    """Set of node ids reachable from `start` over `links` (BFS)."""
    adj = [[] for _ in range(node_count)]
    for ln in links:
        adj[ln.node_a].append(ln.node_b)
        adj[ln.node_b].append(ln.node_a)
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return seen


def validate_config(config: SimConfig, topology: Topology):
    """Return a list of human-readable invariant violations (empty = valid).

    Pure: never raises for bad values, never mutates its arguments.
    """
    v = []
    c = config
    if c.total_blocks < 1:
        v.append("total_blocks must be >= 1")
    if c.block_size < 1:
        v.append("block_size must be >= 1")
    if c.block_size > c.mempool_capacity:
        v.append("block_size exceeds mempool_capacity")
    if c.block_interval_lambda <= 0:
        v.append("block_interval_lambda must be positive")
    if c.initial_tx_count < 0:
        v.append("initial_tx_count must be >= 0")
    n, m = c.txgen_count_range
    if n > m:
        v.append("txgen_count_range lower bound exceeds upper bound")
    if n < 0:
        v.append("txgen_count_range must be non-negative")
    p, q = c.txgen_delay_range
    if p > q:
        v.append("txgen_delay_range lower bound exceeds upper bound")
    if p < 0:
        v.append("txgen_delay_range must be non-negative")
    fee_min, fee_max = c.fee_range
    if fee_min > fee_max:
        v.append("fee_range lower bound exceeds upper bound")
    if fee_min < 0:
        v.append("fees must be non-negative")
    if fee_max > MAX_ID64:
        v.append("fee_range exceeds the 63-bit fee limit of this implementation")

    nodes = topology.nodes
    if not nodes:
        v.append("topology has no nodes")
        return v
    ids = [nd.miner_id for nd in nodes]
    if sorted(ids) != list(range(len(nodes))):
        v.append("miner ids must be a dense 0-based index with no gaps")
    total_power = math.fsum(nd.mining_power for nd in nodes)
    if abs(total_power - 1.0) > 1e-9:
        v.append(f"mining power sums to {total_power!r}, expected 1.0")
    for nd in nodes:
        if nd.mining_power < 0 or nd.mining_power > 1:
            v.append(f"miner {nd.miner_id} has mining power outside [0, 1]")
            break

    seen_pairs = set()
    n_nodes = len(nodes)
    for ln in topology.links:
        if ln.node_a == ln.node_b:
            v.append(f"link ({ln.node_a}, {ln.node_b}) is a self-loop")
        if not (0 <= ln.node_a < n_nodes and 0 <= ln.node_b < n_nodes):
            v.append(f"link ({ln.node_a}, {ln.node_b}) references an unknown node")
            continue
        if ln.delay_ms < 0:
            v.append(f"link ({ln.node_a}, {ln.node_b}) has negative delay")
        key = ln.key()
        if key in seen_pairs:
            v.append(f"duplicate link between {key[0]} and {key[1]}")
        seen_pairs.add(key)

    in_range = [
        ln for ln in topology.links
        if 0 <= ln.node_a < n_nodes and 0 <= ln.node_b < n_nodes
    ]
    if n_nodes > 1 and len(connected_component(n_nodes, in_range)) != n_nodes:
        v.append("graph not connected")
    return v


# ---------------------------------------------------------------------------
# Topology file format: one record per line.
#   header   "nodes <N> links <L>"
#   node     "node <miner_id> <mining_power> <strategy>"   strategy: honest|malicious
#   link     "link <a> <b> <delay_ms>"
# '#' starts a comment.


def write_topology(topology: Topology, path):
    with open(path, "w") as f:
        f.write(f"nodes {len(topology.nodes)} links {len(topology.links)}\n")
        for nd in topology.nodes:
            f.write(f"node {nd.miner_id} {nd.mining_power!r} {nd.strategy.value}\n")
        for ln in topology.links:
            f.write(f"link {ln.node_a} {ln.node_b} {ln.delay_ms}\n")


def parse_topology(path) -> Topology:
    nodes = []
    links = []
    declared = None
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "nodes":
                    declared = (int(parts[1]), int(parts[3]))
                elif parts[0] == "node":
                    nodes.append(
                        NodeSpec(int(parts[1]), float(parts[2]), Strategy(parts[3]))
                    )
                elif parts[0] == "link":
                    links.append(Link(int(parts[1]), int(parts[2]), int(parts[3])))
                else:
                    raise ValueError(f"unknown record type {parts[0]!r}")
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad topology line {line!r}") from exc
    if declared is not None and declared != (len(nodes), len(links)):
        raise ValueError(
            f"{path}: header declares {declared[0]} nodes / {declared[1]} links, "
            f"found {len(nodes)} / {len(links)}"
        )
    nodes.sort(key=lambda nd: nd.miner_id)
    return Topology(nodes=tuple(nodes), links=tuple(links))


# ---------------------------------------------------------------------------
# Config file format: flat key=value lines, keys matching SimConfig fields.
# Ranges are written as "lo,hi".


def write_config(config: SimConfig, path):
    with open(path, "w") as f:
        for key in CONFIG_FIELDS:
            val = getattr(config, key)
            if isinstance(val, tuple):
                f.write(f"{key}={val[0]!r},{val[1]!r}\n")
            elif isinstance(val, RandomAccessVariant):
                f.write(f"{key}={val.value}\n")
            elif isinstance(val, float):
                f.write(f"{key}={val!r}\n")
            else:
                f.write(f"{key}={val}\n")


def _num(text):
    return float(text) if ("." in text or "e" in text or "E" in text) else int(text)


def parse_config(path) -> SimConfig:
    values = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, text = line.partition("=")
            key = key.strip()
            text = text.strip()
            if key not in CONFIG_FIELDS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = text
    missing = [k for k in CONFIG_FIELDS if k not in values]
    if missing:
        raise ValueError(f"{path}: missing config keys: {', '.join(missing)}")

    def pair(key):
        lo, _, hi = values[key].partition(",")
        return (_num(lo.strip()), _num(hi.strip()))

    return SimConfig(
        block_interval_lambda=float(values["block_interval_lambda"]),
        total_blocks=int(values["total_blocks"]),
        block_size=int(values["block_size"]),
        mempool_capacity=int(values["mempool_capacity"]),
        initial_tx_count=int(values["initial_tx_count"]),
        txgen_count_range=tuple(int(x) for x in pair("txgen_count_range")),
        txgen_delay_range=pair("txgen_delay_range"),
        fee_range=tuple(int(x) for x in pair("fee_range")),
        rng_seed=int(values["rng_seed"]),
        random_access_variant=RandomAccessVariant(values["random_access_variant"]),
    )

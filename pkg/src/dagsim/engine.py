"""Discrete-event simulation loop.

Three event kinds drive a run: block mined, block delivery, and transaction
generation.  Events are processed in (time, seq) order where seq is assigned
at scheduling time, making ties deterministic.  A single `random.Random`
stream seeded from the config feeds every draw, consumed strictly in
event-processing order, so a (config, topology, seed) triple reproduces a
run byte-for-byte.  Draw order at startup: per-miner hashtable salts, then
initial transaction fees, then the first generation delay, then the first
block (interval, winner).  Block building draws two uniforms per random
selection; transaction generation draws the count, one fee per transaction,
then the next delay.

Block inter-arrival times are exponential with the configured mean, and the
winner of each block is drawn in proportion to mining power — equivalent,
by superposition of Poisson processes, to per-miner exponential clocks.
"""

import bisect
import heapq
import itertools
import random
from dataclasses import dataclass

import numpy as np

from .mempool import EQUAL_KEY_SALT, Mempool, NotEnoughTransactions
from .model import RandomAccessVariant, SimConfig, Strategy, Topology, validate_config
from .output import (
    DataWriter,
    ProgressWriter,
    RunMetadata,
    append_metadata_trailer,
    out_paths,
    write_metadata,
)

EV_BLOCK_MINED = 0
EV_BLOCK_DELIVERY = 1
EV_TX_GENERATION = 2


def draw_next_block(rng, mean_interval, cum_powers):
    """Draw (delta_t, winner): exponential waiting time and power-weighted miner."""
    delta_t = rng.expovariate(1.0 / mean_interval)
    u = rng.random()
    winner = bisect.bisect_right(cum_powers, u)
    if winner >= len(cum_powers):
        winner = len(cum_powers) - 1
    return delta_t, winner


@dataclass
class MinerState:
    mempool: Mempool
    tip_height: int
    seen: bytearray  # per block id, 1 once delivered/mined here


@dataclass(frozen=True)
class _BlockInfo:
    height: int
    miner_id: int
    mined_at: float
    tx_ids: np.ndarray
    fees: np.ndarray


@dataclass(frozen=True)
class RunResult:
    status: str  # "completed" or "aborted"
    blocks_mined: int
    last_block_time: float
    data_path: str
    meta_path: str
    progress_path: str
    error: str | None = None


class Simulation:
    """One simulation run writing the data/metadata/progress file set."""

    def __init__(self, config: SimConfig, topology: Topology, out_prefix,
                 seed=None, mirror_progress=True, audit=False, trace=None,
                 snapshot_full_dump=False):
        problems = validate_config(config, topology)
        if problems:
            raise ValueError("invalid configuration: " + "; ".join(problems))
        self.config = config
        self.topology = topology
        self.seed = config.rng_seed if seed is None else seed
        self.rng = random.Random(self.seed)
        self.out_prefix = str(out_prefix)
        self.data_path, self.meta_path, self.progress_path = out_paths(self.out_prefix)
        self._mirror = mirror_progress
        self._audit = audit
        self._trace = trace
        self._snapshot_full_dump = snapshot_full_dump

        n = topology.node_count
        self.adj = topology.adjacency()
        # delays are milliseconds in the topology, seconds on the event clock
        self.adj = [[(nbr, d / 1000.0) for nbr, d in lst] for lst in self.adj]
        powers = [nd.mining_power for nd in topology.nodes]
        self.cum_powers = list(itertools.accumulate(powers))
        self.strategies = [nd.strategy for nd in topology.nodes]

        variant = config.random_access_variant
        self.miners = []
        for i in range(n):
            salt = self.rng.getrandbits(64)
            if variant is RandomAccessVariant.EQUAL_KEY:
                salt = EQUAL_KEY_SALT
            self.miners.append(
                MinerState(
                    mempool=Mempool(config.mempool_capacity, salt, audit=audit),
                    tip_height=0,
                    seen=bytearray(config.total_blocks),
                )
            )

        self._blocks = []
        self._next_tx_id = 0
        self._events = []
        self._seq = itertools.count()
        self._now = 0.0

    # -- event plumbing --------------------------------------------------

    def _push(self, time, kind, *payload):
        heapq.heappush(self._events, (time, next(self._seq), kind) + payload)

    def _fresh_txs(self, count):
        fee_min, fee_max = self.config.fee_range
        rnd = self.rng.randint
        ids = np.arange(self._next_tx_id, self._next_tx_id + count, dtype=np.int64)
        self._next_tx_id += count
        fees = np.fromiter(
            (rnd(fee_min, fee_max) for _ in range(count)), dtype=np.int64, count=count
        )
        return ids, fees

    def _give_to_all_miners(self, ids, fees):
        for st in self.miners:
            st.mempool.insert_capped_many(ids, fees)

    # -- handlers ----------------------------------------------------------

    def _handle_tx_generation(self, t):
        n, m = self.config.txgen_count_range
        count = self.rng.randint(n, m)
        ids, fees = self._fresh_txs(count)
        self._give_to_all_miners(ids, fees)
        p, q = self.config.txgen_delay_range
        self._push(t + self.rng.uniform(p, q), EV_TX_GENERATION)

    def _handle_block_mined(self, t, winner, writer):
        config = self.config
        st = self.miners[winner]
        pool = st.mempool
        if pool.size < config.block_size:
            raise NotEnoughTransactions(
                f"miner {winner} holds {pool.size} transactions, "
                f"needs {config.block_size} to build a block"
            )
        if self.strategies[winner] is Strategy.MALICIOUS_MAX_FEE:
            ids, fees = pool.take_top_fee_arrays(config.block_size)
        else:
            ids, fees = pool.select_many(
                self.rng, config.random_access_variant, config.block_size
            )
        pool.remove_many(ids)

        block_id = len(self._blocks)
        height = st.tip_height + 1
        st.tip_height = height
        st.seen[block_id] = 1
        self._blocks.append(_BlockInfo(height, winner, t, ids, fees))
        # emitted before propagation so a crash never loses a mined block
        writer.write_block(block_id, height, winner, ids, fees)
        for nbr, delay in self.adj[winner]:
            self._push(t + delay, EV_BLOCK_DELIVERY, block_id, nbr, winner)
        return block_id

    def _handle_block_delivery(self, t, block_id, to, sender):
        st = self.miners[to]
        if st.seen[block_id]:
            return
        st.seen[block_id] = 1
        blk = self._blocks[block_id]
        st.mempool.remove_many(blk.tx_ids)
        if blk.height > st.tip_height:
            st.tip_height = blk.height
        for nbr, delay in self.adj[to]:
            if nbr != sender:
                self._push(t + delay, EV_BLOCK_DELIVERY, block_id, nbr, to)

    # -- run ----------------------------------------------------------------

    def run(self) -> RunResult:
        config = self.config
        writer = DataWriter(self.data_path)
        progress = ProgressWriter(self.progress_path, mirror=self._mirror)
        meta = RunMetadata(
            config=config,
            node_count=self.topology.node_count,
            link_count=len(self.topology.links),
            miners=tuple(
                (nd.miner_id, nd.mining_power, nd.strategy)
                for nd in self.topology.nodes
            ),
            seed=self.seed,
        )
        write_metadata(self.meta_path, meta)
        progress.write(
            f"simulation start: {self.topology.node_count} nodes, "
            f"{config.total_blocks} blocks, block size {config.block_size}, "
            f"mempool capacity {config.mempool_capacity}, seed {self.seed}"
        )

        # initial transaction generation: identical content in every mempool
        ids, fees = self._fresh_txs(config.initial_tx_count)
        self._give_to_all_miners(ids, fees)
        progress.write(f"initial generation: {config.initial_tx_count} transactions")

        p, q = self.config.txgen_delay_range
        self._push(self.rng.uniform(p, q), EV_TX_GENERATION)
        dt, winner = draw_next_block(
            self.rng, config.block_interval_lambda, self.cum_powers
        )
        self._push(dt, EV_BLOCK_MINED, winner)

        blocks_mined = 0
        last_block_time = 0.0
        report_every = max(1, config.total_blocks // 10)
        status, error = "completed", None
        try:
            while self._events:
                ev = heapq.heappop(self._events)
                t = ev[0]
                assert t >= self._now, "event clock went backwards"
                self._now = t
                if self._trace is not None:
                    self._trace(ev)
                kind = ev[2]
                if kind == EV_BLOCK_DELIVERY:
                    self._handle_block_delivery(t, ev[3], ev[4], ev[5])
                elif kind == EV_BLOCK_MINED:
                    self._handle_block_mined(t, ev[3], writer)
                    blocks_mined += 1
                    last_block_time = t
                    if blocks_mined % report_every == 0:
                        progress.write(
                            f"mined block {blocks_mined}/{config.total_blocks} "
                            f"at simulation time {t:.3f} s"
                        )
                    if blocks_mined >= config.total_blocks:
                        break
                    dt, winner = draw_next_block(
                        self.rng, config.block_interval_lambda, self.cum_powers
                    )
                    self._push(t + dt, EV_BLOCK_MINED, winner)
                else:
                    self._handle_tx_generation(t)
        except NotEnoughTransactions as exc:
            status, error = "aborted", str(exc)
            progress.write(f"ERROR: {error}")
            progress.write_mempool_snapshot(
                self.topology.nodes,
                [st.mempool for st in self.miners],
                full_dump=self._snapshot_full_dump,
            )
        finally:
            writer.close()

        if blocks_mined:
            append_metadata_trailer(self.meta_path, blocks_mined, last_block_time, status)
        if status == "completed":
            progress.write(
                f"simulation finished: {blocks_mined} blocks, "
                f"last at simulation time {last_block_time:.3f} s"
            )
        progress.write_duration()
        progress.close()
        return RunResult(
            status=status,
            blocks_mined=blocks_mined,
            last_block_time=last_block_time,
            data_path=self.data_path,
            meta_path=self.meta_path,
            progress_path=self.progress_path,
            error=error,
        )


def run_simulation(config, topology, out_prefix, **kwargs) -> RunResult:
    return Simulation(config, topology, out_prefix, **kwargs).run()

import os
import signal
import subprocess
import sys
import time

from dagsim.analysis import iter_complete_blocks
from dagsim.model import (
    Link,
    NodeSpec,
    SimConfig,
    Strategy,
    Topology,
    write_config,
    write_topology,
)
from dagsim.output import (
    DataWriter,
    ProgressWriter,
    RunMetadata,
    append_metadata_trailer,
    parse_metadata,
    write_metadata,
)
from tests.test_model import table2_config


def test_row_formatting(tmp_path):
    path = tmp_path / "x.data.csv"
    w = DataWriter(str(path))
    w.write_row(7, 42, 0, 1, 3)
    w.close()
    assert path.read_text().splitlines() == [
        "tx_id,tx_fee,block_id,height,miner_id",
        "7,42,0,1,3",
    ]


def test_thousand_blocks_line_count(tmp_path):
    path = tmp_path / "big.data.csv"
    w = DataWriter(str(path))
    ids = list(range(100))
    fees = [5] * 100
    for b in range(1000):
        w.write_block(b, b + 1, 0, ids, fees)
    w.close()
    with open(path) as f:
        assert sum(1 for _ in f) == 100_001


def test_metadata_round_trip(tmp_path):
    miners = tuple(
        (i, 0.1 if i < 4 else 0.6 / 96,
         Strategy.MALICIOUS_MAX_FEE if i < 2 else Strategy.HONEST_RANDOM)
        for i in range(100)
    )
    meta = RunMetadata(
        config=table2_config(),
        node_count=100,
        link_count=250,
        miners=miners,
        seed=987,
    )
    path = tmp_path / "run.meta"
    write_metadata(str(path), meta)
    assert parse_metadata(str(path)) == meta
    # trailer appended later still parses, now with run totals
    append_metadata_trailer(str(path), 1000, 19876.54321, "completed")
    parsed = parse_metadata(str(path))
    assert parsed.blocks_mined == 1000
    assert parsed.last_block_time == 19876.54321
    assert parsed.status == "completed"
    assert parsed.config == meta.config


def test_progress_duration_and_mirroring(tmp_path, capsys):
    path = tmp_path / "x.progress"
    p = ProgressWriter(str(path), mirror=True)
    p.write("hello")
    p.write_duration()
    p.close()
    text = path.read_text()
    assert "hello" in text
    assert "total duration" in text.splitlines()[-1]
    assert "hello" in capsys.readouterr().out

    quiet = ProgressWriter(str(tmp_path / "q.progress"), mirror=False)
    quiet.write("silent")
    quiet.close()
    assert "silent" not in capsys.readouterr().out


def test_killed_process_leaves_parseable_prefix(tmp_path):
    nodes = (
        NodeSpec(0, 0.5, Strategy.HONEST_RANDOM),
        NodeSpec(1, 0.5, Strategy.HONEST_RANDOM),
    )
    topo = Topology(nodes, (Link(0, 1, 5),))
    cfg = SimConfig(
        block_interval_lambda=0.02,  # a block every ~20 ms of sim time
        total_blocks=10_000_000,  # never finishes on its own
        block_size=2,
        mempool_capacity=1000,
        initial_tx_count=1000,
        txgen_count_range=(100, 100),
        txgen_delay_range=(0.5, 1.0),
        fee_range=(1, 50),
        rng_seed=3,
    )
    topo_path = tmp_path / "net.topo"
    cfg_path = tmp_path / "sim.cfg"
    write_topology(topo, topo_path)
    write_config(cfg, cfg_path)
    prefix = tmp_path / "killed"
    proc = subprocess.Popen(
        [sys.executable, "-m", "dagsim.cli", "simulate",
         "--config", str(cfg_path), "--topology", str(topo_path),
         "--out-prefix", str(prefix), "--quiet"],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
    )
    data_path = f"{prefix}.data.csv"
    deadline = time.time() + 60
    # wait until at least a few blocks hit the disk, then kill hard
    while time.time() < deadline:
        if os.path.exists(data_path) and os.path.getsize(data_path) > 2000:
            break
        time.sleep(0.05)
    proc.send_signal(signal.SIGKILL)
    proc.wait()
    blocks = list(iter_complete_blocks(data_path, cfg.block_size))
    assert blocks, "no complete block survived the kill"
    for i, (block_id, height, miner, rows) in enumerate(blocks):
        assert block_id == i
        assert len(rows) == 2

import random

import pytest

from dagsim.model import (
    Link,
    NodeSpec,
    RandomAccessVariant,
    SimConfig,
    Strategy,
    Topology,
    parse_config,
    parse_topology,
    validate_config,
    write_config,
    write_topology,
)


def table2_config(**overrides):
    base = dict(
        block_interval_lambda=20.0,
        total_blocks=1000,
        block_size=100,
        mempool_capacity=10_000,
        initial_tx_count=5000,
        txgen_count_range=(550, 650),
        txgen_delay_range=(60.0, 160.0),
        fee_range=(1, 1000),
        rng_seed=1,
        random_access_variant=RandomAccessVariant.PROBE,
    )
    base.update(overrides)
    return SimConfig(**base)


def triangle_topology():
    nodes = (
        NodeSpec(0, 0.5, Strategy.HONEST_RANDOM),
        NodeSpec(1, 0.25, Strategy.HONEST_RANDOM),
        NodeSpec(2, 0.25, Strategy.MALICIOUS_MAX_FEE),
    )
    links = (Link(0, 1, 100), Link(1, 2, 250), Link(0, 2, 400))
    return Topology(nodes, links)


def test_valid_config_has_no_violations():
    assert validate_config(table2_config(), triangle_topology()) == []


def test_block_size_exceeding_capacity_is_flagged():
    cfg = table2_config(block_size=101, mempool_capacity=100)
    violations = validate_config(cfg, triangle_topology())
    assert violations == ["block_size exceeds mempool_capacity"]


def test_disconnected_topology_is_flagged():
    nodes = tuple(NodeSpec(i, 0.25, Strategy.HONEST_RANDOM) for i in range(4))
    links = (Link(0, 1, 10), Link(2, 3, 10))  # two disjoint components
    violations = validate_config(table2_config(), Topology(nodes, links))
    assert violations == ["graph not connected"]


def test_power_sum_and_id_density_checks():
    nodes = (
        NodeSpec(0, 0.6, Strategy.HONEST_RANDOM),
        NodeSpec(2, 0.6, Strategy.HONEST_RANDOM),  # gap at id 1, sum 1.2
    )
    violations = validate_config(table2_config(), Topology(nodes, (Link(0, 2, 5),)))
    assert any("dense 0-based" in v for v in violations)
    assert any("mining power sums" in v for v in violations)


def test_self_loop_duplicate_link_negative_delay_flagged():
    nodes = tuple(NodeSpec(i, 0.5, Strategy.HONEST_RANDOM) for i in range(2))
    links = (Link(0, 0, 5), Link(0, 1, -3), Link(1, 0, 7))
    violations = validate_config(table2_config(), Topology(nodes, links))
    text = "\n".join(violations)
    assert "self-loop" in text
    assert "negative delay" in text
    assert "duplicate link" in text


def test_validate_config_is_pure():
    cfg = table2_config(block_size=101, mempool_capacity=100)
    topo = triangle_topology()
    first = validate_config(cfg, topo)
    for _ in range(5):
        assert validate_config(cfg, topo) == first


def test_topology_file_round_trip(tmp_path):
    rng = random.Random(0)
    nodes = tuple(
        NodeSpec(
            i,
            0.1 if i < 5 else 0.5 / 5,
            Strategy.MALICIOUS_MAX_FEE if i == 3 else Strategy.HONEST_RANDOM,
        )
        for i in range(10)
    )
    links = tuple(
        Link(a, b, rng.randint(0, 5000))
        for a in range(10)
        for b in range(a + 1, 10)
        if rng.random() < 0.4
    )
    topo = Topology(nodes, links)
    path = tmp_path / "net.topo"
    write_topology(topo, path)
    assert parse_topology(path) == topo


def test_topology_parser_rejects_garbage(tmp_path):
    path = tmp_path / "bad.topo"
    path.write_text("nodes 1 links 0\nnode 0 0.5 honest\nwat 1 2 3\n")
    with pytest.raises(ValueError):
        parse_topology(path)


def test_topology_header_mismatch_rejected(tmp_path):
    path = tmp_path / "bad.topo"
    path.write_text("nodes 2 links 1\nnode 0 1.0 honest\n")
    with pytest.raises(ValueError, match="header declares"):
        parse_topology(path)


def test_config_file_round_trip(tmp_path):
    cfg = table2_config(rng_seed=987654321, random_access_variant=RandomAccessVariant.EQUAL_KEY)
    path = tmp_path / "sim.cfg"
    write_config(cfg, path)
    assert parse_config(path) == cfg


def test_config_missing_key_rejected(tmp_path):
    path = tmp_path / "sim.cfg"
    path.write_text("total_blocks=10\n")
    with pytest.raises(ValueError, match="missing config keys"):
        parse_config(path)


def test_config_comments_and_spacing_tolerated(tmp_path):
    cfg = table2_config()
    path = tmp_path / "sim.cfg"
    write_config(cfg, path)
    text = "# a comment\n" + path.read_text().replace("=", " = ")
    path.write_text(text)
    assert parse_config(path) == cfg

import random
from collections import Counter

import pytest

from dagsim.model import Strategy, connected_component, validate_config
from dagsim.topology import (
    DiscreteDistribution,
    PowerPlan,
    build_topology,
    parse_distribution,
    parse_malicious_spec,
    sample_discrete,
)
from tests.test_model import table2_config


def test_single_entry_distribution_always_sampled():
    dist = DiscreteDistribution(((5, 1.0),))
    rng = random.Random(0)
    assert all(sample_discrete(dist, rng) == 5 for _ in range(100))


def test_even_split_frequencies():
    dist = DiscreteDistribution(((1, 1.0), (2, 1.0)))
    rng = random.Random(1)
    hits = sum(sample_discrete(dist, rng) == 1 for _ in range(100_000))
    assert 0.49 <= hits / 100_000 <= 0.51


def test_weighted_split_frequencies():
    dist = DiscreteDistribution(((8, 0.7), (16, 0.3)))
    rng = random.Random(2)
    hits = sum(sample_discrete(dist, rng) == 8 for _ in range(100_000))
    assert 0.69 <= hits / 100_000 <= 0.71


def test_distribution_validation():
    with pytest.raises(ValueError):
        DiscreteDistribution(())
    with pytest.raises(ValueError):
        DiscreteDistribution(((1, 1.0), (1, 2.0)))  # duplicate value
    with pytest.raises(ValueError):
        DiscreteDistribution(((1, 0.0),))  # zero total weight
    with pytest.raises(ValueError):
        DiscreteDistribution(((1, -1.0), (2, 2.0)))


def test_distribution_file_parsing(tmp_path):
    path = tmp_path / "d.txt"
    path.write_text("# comment\n5 1.5\n7 0.5  # trailing comment\n\n")
    dist = parse_distribution(path)
    assert dist.entries == ((5, 1.5), (7, 0.5))
    bad = tmp_path / "bad.txt"
    bad.write_text("5\n")
    with pytest.raises(ValueError):
        parse_distribution(bad)


def two_node_dists():
    return DiscreteDistribution(((1, 1.0),)), DiscreteDistribution(((100, 1.0),))


def test_two_nodes_forced_single_link():
    deg, delay = two_node_dists()
    topo = build_topology(2, deg, delay, PowerPlan(), random.Random(0))
    assert len(topo.links) == 1
    link = topo.links[0]
    assert {link.node_a, link.node_b} == {0, 1}
    assert link.delay_ms == 100


def test_degree_window_and_connectivity_over_seeds():
    # degree target 4 everywhere; the repair pass may shift a node by one
    deg = DiscreteDistribution(((4, 1.0),))
    delay = DiscreteDistribution(((50, 1.0),))
    for seed in range(10):
        topo = build_topology(50, deg, delay, PowerPlan(), random.Random(seed))
        degrees = topo.degrees()
        assert all(3 <= d <= 5 for d in degrees), Counter(degrees)
        reached = connected_component(50, topo.links)
        assert len(reached) == 50
        # simple graph: no self loops, no duplicate links
        keys = [ln.key() for ln in topo.links]
        assert len(set(keys)) == len(keys)
        assert all(ln.node_a != ln.node_b for ln in topo.links)


def test_generation_is_deterministic():
    deg = DiscreteDistribution(((3, 0.5), (6, 0.5)))
    delay = DiscreteDistribution(((10, 0.3), (1000, 0.7)))
    a = build_topology(64, deg, delay, PowerPlan(), random.Random(77))
    b = build_topology(64, deg, delay, PowerPlan(), random.Random(77))
    assert a == b


def test_mean_delay_tracks_distribution():
    deg = DiscreteDistribution(((6, 1.0),))
    delay = DiscreteDistribution(((100, 0.25), (500, 0.5), (3000, 0.25)))
    topo = build_topology(400, deg, delay, PowerPlan(), random.Random(5))
    assert len(topo.links) >= 1000
    mean = sum(ln.delay_ms for ln in topo.links) / len(topo.links)
    expected = delay.mean()
    assert abs(mean - expected) / expected < 0.05


def test_power_plan_assignment_and_residual_split():
    plan = PowerPlan(assigned=((3, 0.2, Strategy.MALICIOUS_MAX_FEE),
                               (7, 0.1, Strategy.HONEST_RANDOM)))
    specs = plan.node_specs(10)
    assert specs[3].mining_power == 0.2
    assert specs[3].strategy is Strategy.MALICIOUS_MAX_FEE
    assert specs[7].mining_power == 0.1
    rest = [s for s in specs if s.miner_id not in (3, 7)]
    assert all(abs(s.mining_power - 0.7 / 8) < 1e-12 for s in rest)
    assert abs(sum(s.mining_power for s in specs) - 1.0) < 1e-9


def test_power_plan_rejects_bad_assignments():
    with pytest.raises(ValueError):
        PowerPlan(assigned=((0, 0.6, Strategy.HONEST_RANDOM),
                            (1, 0.6, Strategy.HONEST_RANDOM))).node_specs(4)
    with pytest.raises(ValueError):
        PowerPlan(assigned=((9, 0.5, Strategy.HONEST_RANDOM),)).node_specs(4)
    with pytest.raises(ValueError):
        PowerPlan(assigned=((0, 0.5, Strategy.HONEST_RANDOM),
                            (0, 0.5, Strategy.HONEST_RANDOM),)).node_specs(4)


def test_malicious_cli_spec_parsing():
    plan = parse_malicious_spec("3:0.2, 8:0.05")
    assert plan.assigned == (
        (3, 0.2, Strategy.MALICIOUS_MAX_FEE),
        (8, 0.05, Strategy.MALICIOUS_MAX_FEE),
    )


def test_generated_topology_passes_validation():
    deg = DiscreteDistribution(((4, 0.6), (8, 0.4)))
    delay = DiscreteDistribution(((250, 1.0),))
    plan = PowerPlan(assigned=((0, 0.3, Strategy.MALICIOUS_MAX_FEE),))
    topo = build_topology(120, deg, delay, plan, random.Random(9))
    assert validate_config(table2_config(), topo) == []


def test_degenerate_degree_rejected():
    deg = DiscreteDistribution(((0, 1.0),))
    delay = DiscreteDistribution(((10, 1.0),))
    with pytest.raises(ValueError):
        build_topology(10, deg, delay, PowerPlan(), random.Random(0))
    with pytest.raises(ValueError):
        build_topology(4, DiscreteDistribution(((4, 1.0),)), delay,
                       PowerPlan(), random.Random(0))

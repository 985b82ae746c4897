"""Connected random topologies with configurable degree and delay distributions.

The generator follows the configuration-model recipe: sample a target degree
for every node, pair half-edges uniformly at random, then run a repair pass
that re-wires self-loops/duplicate pairs and finally adds the minimum number
of extra links needed to make the graph connected.  Realized degrees can
therefore deviate slightly from their targets; that is accepted and covered
by the tests.

Everything is a pure function of (inputs, rng), so callers can run many
generations concurrently with independent `random.Random` streams.
"""

import bisect
import itertools
from dataclasses import dataclass

from .model import Link, NodeSpec, Strategy, Topology, connected_component

_REWIRE_ROUNDS = 100


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite distribution over integer values with non-negative weights."""

    entries: tuple  # of (value, weight)

    def __post_init__(self):
        if not self.entries:
            raise ValueError("distribution needs at least one entry")
        values = [v for v, _ in self.entries]
        if len(set(values)) != len(values):
            raise ValueError("distribution values must be unique")
        if any(w < 0 for _, w in self.entries):
            raise ValueError("weights must be non-negative")
        if sum(w for _, w in self.entries) <= 0:
            raise ValueError("total weight must be positive")

    def mean(self):
        total = sum(w for _, w in self.entries)
        return sum(v * w for v, w in self.entries) / total


def sample_discrete(dist: DiscreteDistribution, rng):
    """Draw one value with probability weight/total. Consumes one rng draw."""
    cumulative = list(itertools.accumulate(w for _, w in dist.entries))
    u = rng.random() * cumulative[-1]
    idx = bisect.bisect_right(cumulative, u)
    if idx == len(cumulative):  # u == total weight, probability ~0
        idx -= 1
    return dist.entries[idx][0]


def parse_distribution(path) -> DiscreteDistribution:
    """Read a two-column `value weight` file ('#' comments allowed)."""
    entries = []
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'value weight'")
            entries.append((int(parts[0]), float(parts[1])))
    return DiscreteDistribution(entries=tuple(entries))


@dataclass(frozen=True)
class PowerPlan:
    """How mining power and strategies are assigned to generated nodes.

    `assigned` lists (miner_id, power, strategy) for explicitly configured
    miners; the residual power is split uniformly among all remaining nodes,
    which stay honest.  An empty plan means uniform power, all honest.
    """

    assigned: tuple = ()

    def node_specs(self, node_count):
        by_id = {}
        for miner_id, power, strategy in self.assigned:
            if not (0 <= miner_id < node_count):
                raise ValueError(f"assigned miner id {miner_id} out of range")
            if miner_id in by_id:
                raise ValueError(f"miner {miner_id} assigned twice")
            by_id[miner_id] = (power, strategy)
        assigned_power = sum(p for p, _ in by_id.values())
        if assigned_power > 1.0 + 1e-12:
            raise ValueError("assigned mining power exceeds 1.0")
        rest = node_count - len(by_id)
        if rest == 0 and abs(assigned_power - 1.0) > 1e-9:
            raise ValueError("all nodes assigned but powers do not sum to 1")
        share = (1.0 - assigned_power) / rest if rest else 0.0
        specs = []
        for i in range(node_count):
            if i in by_id:
                power, strategy = by_id[i]
                specs.append(NodeSpec(i, power, strategy))
            else:
                specs.append(NodeSpec(i, share, Strategy.HONEST_RANDOM))
        return tuple(specs)


def parse_malicious_spec(text) -> PowerPlan:
    """Parse the CLI form "id:power,id:power,..." into a PowerPlan."""
    assigned = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        ident, _, power = chunk.partition(":")
        assigned.append((int(ident), float(power), Strategy.MALICIOUS_MAX_FEE))
    return PowerPlan(assigned=tuple(assigned))


def build_topology(
    node_count,
    degree_dist: DiscreteDistribution,
    delay_dist: DiscreteDistribution,
    power_plan: PowerPlan,
    rng,
) -> Topology:
    """Generate a connected random topology.

    Degrees and per-link delays are sampled from the given distributions;
    the result is deterministic for a fixed rng state.
    """
    if node_count < 2:
        raise ValueError("need at least 2 nodes")
    for value, weight in degree_dist.entries:
        if weight > 0 and not (1 <= value < node_count):
            raise ValueError(
                f"degree {value} impossible for a simple graph on {node_count} nodes"
            )

    degrees = [sample_discrete(degree_dist, rng) for _ in range(node_count)]
    if sum(degrees) % 2:
        # parity fix: bump one node, keeping its degree realizable
        while True:
            i = rng.randrange(node_count)
            if degrees[i] + 1 < node_count:
                degrees[i] += 1
                break

    # Pair half-edges; re-shuffle rejected pairs for a bounded number of
    # rounds, then place stragglers by degree-preserving edge swaps.
    edges = set()
    stubs = []
    for node, d in enumerate(degrees):
        stubs.extend([node] * d)
    for _ in range(_REWIRE_ROUNDS):
        if len(stubs) < 2:
            break
        rng.shuffle(stubs)
        leftover = []
        for i in range(0, len(stubs) - 1, 2):
            a, b = stubs[i], stubs[i + 1]
            key = (a, b) if a < b else (b, a)
            if a == b or key in edges:
                leftover.extend((a, b))
            else:
                edges.add(key)
        if len(stubs) % 2:
            leftover.append(stubs[-1])
        if len(leftover) == len(stubs):
            break  # re-shuffling alone cannot place these
        stubs = leftover

    edge_list = list(edges)
    for i in range(0, len(stubs) - 1, 2):
        # stub pair (a, b) is a self-loop or an existing edge; splice it into
        # a random existing edge (u, v): replace with (a, u) and (b, v)
        a, b = stubs[i], stubs[i + 1]
        for _ in range(200):
            j = rng.randrange(len(edge_list))
            u, v = edge_list[j]
            if rng.random() < 0.5:
                u, v = v, u
            k1 = (a, u) if a < u else (u, a)
            k2 = (b, v) if b < v else (v, b)
            if a == u or b == v or k1 in edges or k2 in edges or k1 == k2:
                continue
            edges.remove((u, v) if u < v else (v, u))
            edges.add(k1)
            edges.add(k2)
            edge_list[j] = edge_list[-1]
            edge_list.pop()
            edge_list.extend((k1, k2))
            break
        # a pair that still cannot be placed is dropped (degree -1 each)

    # Connectivity repair: link a node of each extra component to the main one.
    def components():
        remaining = set(range(node_count))
        comps = []
        links_now = [Link(a, b, 0) for a, b in edges]
        while remaining:
            start = min(remaining)
            comp = connected_component(node_count, links_now, start) & remaining
            comps.append(sorted(comp))
            remaining -= comp
        return comps

    comps = components()
    if len(comps) > 1:
        comps.sort(key=len, reverse=True)
        base = comps[0]
        for comp in comps[1:]:
            # a and b sit in different components, so this edge cannot exist yet
            a = base[rng.randrange(len(base))]
            b = comp[rng.randrange(len(comp))]
            edges.add((a, b) if a < b else (b, a))
            base.extend(comp)

    links = tuple(
        Link(a, b, sample_discrete(delay_dist, rng)) for a, b in sorted(edges)
    )
    topo = Topology(nodes=power_plan.node_specs(node_count), links=links)
    if len(connected_component(node_count, links)) != node_count:
        raise RuntimeError(
            "could not connect the generated graph; degree distribution too degenerate"
        )
    return topo

import math

import numpy as np
import pytest

from benchmark import generate_sierpinski
from conftest import random_network
from flow_model import bipartite_flow_model, build_flow_model
from mapeq import (
    Hierarchy,
    ModuleFlowStats,
    Partition,
    codelength_terms,
    hierarchical_map_equation,
    index_codelength,
    map_equation,
    module_codelength,
    module_stats,
    one_module_codelength,
    plogp,
)
from network import Network


def _binary_entropy(q):
    return -q * math.log2(q) - (1 - q) * math.log2(1 - q)


def _stats(exit_rate, members, enter_rate=0.0):
    members = np.array(members, dtype=float)
    return ModuleFlowStats(exit_rate, enter_rate, float(members.sum()), members)


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition(np.array([0, 2]))
    part = Partition.from_labels(["b", "a", "b"])
    assert part.module_of.tolist() == [0, 1, 0]
    assert part.module_count == 2
    assert Partition.from_labels([5, 5, 1]).same_as(part.restrict(np.array([0, 2, 1])))


def test_hierarchy_rejects_mixed_module():
    with pytest.raises(ValueError):
        Hierarchy(((0,), (0, 1)))


def test_hierarchy_helpers():
    h = Hierarchy(((0, 0), (0, 1), (1,), (0, 1)))
    assert h.levels == 3
    assert h.module_count == 4
    assert h.top_partition().module_of.tolist() == [0, 0, 1, 0]
    assert h.leaf_partition().module_of.tolist() == [0, 1, 2, 1]
    assert Hierarchy(((3, 2), (3, 0), (1,))).normalized().paths == ((0, 0), (0, 1), (1,))


def test_one_module_stats(two_node_net):
    (stats,) = module_stats(build_flow_model(two_node_net, 1.0), Partition.one_module(2))
    assert stats.exit_rate == 0.0
    assert stats.enter_rate == 0.0
    assert stats.codebook_rate == 1.0


@pytest.mark.parametrize("t, rate, codebook", [(1.0, 0.5, 1.0), (2.0, 1.0, 1.5)])
def test_singleton_stats(two_node_net, t, rate, codebook):
    for stats in module_stats(build_flow_model(two_node_net, t), Partition.singletons(2)):
        assert stats.exit_rate == rate
        assert stats.enter_rate == rate
        assert stats.codebook_rate == codebook


def test_module_codelength():
    assert module_codelength(_stats(0.0, [1.0])) == 0.0
    assert module_codelength(_stats(0.5, [0.25, 0.25])) == pytest.approx(1.5, abs=1e-12)
    assert module_codelength(_stats(0.5, [0.5])) == pytest.approx(1.0, abs=1e-12)
    assert module_codelength(_stats(0.0, [0.0, 0.0])) == 0.0


def test_index_codelength():
    assert index_codelength([_stats(0.0, [1.0])]) == (0.0, 0.0)
    usage, bits = index_codelength([_stats(0.5, [0.5], 0.5), _stats(0.5, [0.5], 0.5)])
    assert usage == 1.0
    assert bits == pytest.approx(1.0, abs=1e-12)
    usage, bits = index_codelength([_stats(0.25, [0.5], 0.25), _stats(0.75, [0.5], 0.75)])
    assert usage == 1.0
    assert bits == pytest.approx(0.811278, abs=1e-6)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0, 4.0])
def test_two_node_one_module_is_one_bit(two_node_net, t):
    fm = build_flow_model(two_node_net, t)
    assert map_equation(fm, Partition.one_module(2)) == pytest.approx(1.0, abs=1e-12)


def test_two_node_singletons(two_node_net):
    assert map_equation(build_flow_model(two_node_net, 1.0), Partition.singletons(2)) == pytest.approx(3.0, abs=1e-9)
    expected = 0.5 + 2 * 0.75 * _binary_entropy(1 / 3)
    assert map_equation(build_flow_model(two_node_net, 0.5), Partition.singletons(2)) == pytest.approx(expected, abs=1e-9)
    assert expected == pytest.approx(1.8774, abs=1e-4)


def test_codelength_terms_add_up(two_node_net):
    terms = codelength_terms(build_flow_model(two_node_net, 1.0), Partition.singletons(2))
    assert terms.index == pytest.approx(1.0)
    assert terms.modules == pytest.approx(2.0)
    assert terms.total == terms.index + terms.modules


def _standard_map_equation(net, module_of):
    """Two-level map equation straight from link weights of an undirected network."""
    total = 2 * net.total_weight
    p = net.strength() / total
    exit_rate = np.zeros(module_of.max() + 1)
    for a, b, w in zip(net.sources, net.targets, net.weights):
        if module_of[a] != module_of[b]:
            exit_rate[module_of[a]] += w / total
            exit_rate[module_of[b]] += w / total
    module_flow = np.bincount(module_of, weights=p)
    return float(
        plogp(exit_rate.sum()) - 2 * plogp(exit_rate).sum() - plogp(p).sum() + plogp(exit_rate + module_flow).sum()
    )


def test_unit_markov_time_matches_standard_map_equation():
    rng = np.random.default_rng(7)
    for _ in range(100):
        net = random_network(rng, 50, 80)
        part = Partition.from_labels(rng.integers(0, 5, size=50).tolist())
        fm = build_flow_model(net, 1.0)
        assert map_equation(fm, part) == pytest.approx(_standard_map_equation(net, part.module_of), abs=1e-12)


def test_rates_scale_with_markov_time(rng):
    net = random_network(rng, 30, 50)
    part = Partition.from_labels(rng.integers(0, 4, size=30).tolist())
    base = module_stats(build_flow_model(net, 1.0), part)
    for t in (0.3, 2.0, 5.0):
        scaled = module_stats(build_flow_model(net, t), part)
        for before, after in zip(base, scaled):
            assert after.exit_rate == pytest.approx(t * before.exit_rate, rel=1e-12)
            assert after.enter_rate == pytest.approx(t * before.enter_rate, rel=1e-12)
            assert after.internal_visit_sum == before.internal_visit_sum
        assert index_codelength(scaled)[0] == pytest.approx(t * index_codelength(base)[0], rel=1e-12)


def test_undirected_exit_equals_enter(rng):
    net = random_network(rng, 30, 50)
    part = Partition.from_labels(rng.integers(0, 4, size=30).tolist())
    for stats in module_stats(build_flow_model(net, 1.7), part):
        assert stats.exit_rate == pytest.approx(stats.enter_rate, abs=1e-12)


def test_one_module_is_time_invariant(rng):
    net = random_network(rng, 25, 40)
    fm = build_flow_model(net, 1.0)
    expected = one_module_codelength(fm)
    assert expected == pytest.approx(float(-plogp(fm.visit_rate).sum()))
    for t in (0.1, 1.0, 3.0, 10.0):
        assert map_equation(build_flow_model(net, t), Partition.one_module(25)) == pytest.approx(expected, abs=1e-12)


def test_codelengths_are_nonnegative(rng):
    net = random_network(rng, 20, 30)
    for t in (0.1, 1.0, 10.0):
        fm = build_flow_model(net, t)
        for modules in (1, 3, 20):
            part = Partition.from_labels(rng.integers(0, modules, size=20).tolist())
            assert map_equation(fm, part) >= 0.0


def _from_stats(stats, visit_rate):
    exit_rate = np.array([s.exit_rate for s in stats])
    enter_rate = np.array([s.enter_rate for s in stats])
    internal = np.array([s.internal_visit_sum for s in stats])
    return float(
        plogp(enter_rate.sum()) - plogp(enter_rate).sum() - plogp(exit_rate).sum()
        + plogp(exit_rate + internal).sum() - plogp(visit_rate).sum()
    )


def test_feature_nodes_change_codelength_only_through_flows():
    mask = np.array([False] * 4 + [True] * 3)
    links = [(0, 4, 1.0), (1, 4, 1.0), (1, 5, 1.0), (2, 5, 1.0), (2, 6, 1.0), (3, 6, 1.0)]
    fm = bipartite_flow_model(Network.from_links(7, links, feature_mask=mask))
    before = Partition(np.array([0, 0, 1, 1, 0, 0, 1]))
    after = Partition(np.array([0, 0, 1, 1, 0, 1, 1]))
    stats_before, stats_after = module_stats(fm, before), module_stats(fm, after)
    assert [s.internal_visit_sum for s in stats_before] == [s.internal_visit_sum for s in stats_after]
    difference = map_equation(fm, after) - map_equation(fm, before)
    expected = _from_stats(stats_after, fm.visit_rate) - _from_stats(stats_before, fm.visit_rate)
    assert difference == pytest.approx(expected, abs=1e-12)
    assert difference != 0.0


def test_flat_hierarchy_equals_map_equation(rng):
    net = random_network(rng, 30, 50)
    fm = build_flow_model(net, 0.8)
    part = Partition.from_labels(rng.integers(0, 5, size=30).tolist())
    assert hierarchical_map_equation(fm, Hierarchy.from_partition(part)) == pytest.approx(map_equation(fm, part), abs=1e-15)


def test_single_submodule_equals_one_module(rng):
    net = random_network(rng, 12, 20)
    fm = build_flow_model(net, 2.0)
    one = map_equation(fm, Partition.one_module(12))
    assert hierarchical_map_equation(fm, Hierarchy(((0,),) * 12)) == pytest.approx(one, abs=1e-12)
    assert hierarchical_map_equation(fm, Hierarchy(((0, 0),) * 12)) == pytest.approx(one, abs=1e-12)


def _expanded_codebooks(fm, paths):
    """Sum every codebook of the hierarchy by explicit enumeration."""
    nodes = range(fm.node_count)
    prefixes = {path[:k] for path in paths for k in range(1, len(path) + 1)}

    def inside(v, prefix):
        return paths[v][:len(prefix)] == prefix

    def boundary(prefix):
        exit_rate = enter_rate = 0.0
        for a, b, f in zip(fm.link_sources, fm.link_targets, fm.link_flow):
            if inside(a, prefix) and not inside(b, prefix):
                exit_rate += f
            if inside(b, prefix) and not inside(a, prefix):
                enter_rate += f
        return exit_rate, enter_rate

    def codebook(events):
        events = [e for e in events if e > 0]
        rate = sum(events)
        return rate * -sum(e / rate * math.log2(e / rate) for e in events) if rate > 0 else 0.0

    rates = {prefix: boundary(prefix) for prefix in prefixes}
    total = codebook([rates[p][1] for p in prefixes if len(p) == 1])
    for prefix in prefixes:
        children = [p for p in prefixes if len(p) == len(prefix) + 1 and p[:-1] == prefix]
        if children:
            total += codebook([rates[prefix][0]] + [rates[c][1] for c in children])
        else:
            total += codebook([rates[prefix][0]] + [fm.visit_rate[v] for v in nodes if paths[v] == prefix])
    return total


@pytest.mark.parametrize("t", [0.5, 1.0, 3.0])
def test_three_level_sierpinski_matches_expansion(t):
    net, _ = generate_sierpinski(3)
    fm = build_flow_model(net, t)
    paths = tuple((v // 9, (v // 3) % 3) for v in range(27))
    expected = _expanded_codebooks(fm, paths)
    assert hierarchical_map_equation(fm, Hierarchy(paths)) == pytest.approx(expected, abs=1e-12)


def test_partition_size_must_match(two_node_net):
    with pytest.raises(ValueError):
        map_equation(build_flow_model(two_node_net, 1.0), Partition.one_module(3))

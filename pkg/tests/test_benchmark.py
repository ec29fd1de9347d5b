import numpy as np
import pandas as pd
import pytest

from benchmark import (
    BipartiteBenchmarkSpec,
    SchematicBipartiteSpec,
    benchmark_grid,
    candidate_codelengths,
    crossover,
    generate_bipartite_benchmark,
    generate_schematic_bipartite,
    generate_sierpinski,
    schematic_codelength_sweep,
    trial_spec,
)
from flow_model import bipartite_flow_model, build_flow_model
from mapeq import Partition, map_equation
from network import project_bipartite_full


def _cross_links(net, truth):
    community = truth.module_of
    return np.bincount(
        net.sources[community[net.sources] != community[net.targets]],
        minlength=net.node_count,
    )


def test_benchmark_degree_contract():
    spec = BipartiteBenchmarkSpec(32, 32, 16, 15, 2048, seed=5)
    net, truth = generate_bipartite_benchmark(spec)
    assert net.node_count == 1024 + 2048
    assert net.is_bipartite
    np.testing.assert_array_equal(net.strength()[:1024], 16.0)
    np.testing.assert_array_equal(_cross_links(net, truth)[:1024], 1)
    assert truth.module_count == 32


def test_benchmark_without_mixing_has_no_cross_links():
    net, truth = generate_bipartite_benchmark(BipartiteBenchmarkSpec(4, 8, 5, 5, 40, seed=1))
    assert _cross_links(net, truth).sum() == 0
    assert (net.strength()[:32] == 5).all()


def test_benchmark_seeds():
    first, _ = generate_bipartite_benchmark(BipartiteBenchmarkSpec(4, 8, 6, 4, 40, seed=1))
    again, _ = generate_bipartite_benchmark(BipartiteBenchmarkSpec(4, 8, 6, 4, 40, seed=1))
    other, _ = generate_bipartite_benchmark(BipartiteBenchmarkSpec(4, 8, 6, 4, 40, seed=2))
    assert first.same_links(again)
    assert not first.same_links(other)
    np.testing.assert_array_equal(first.strength()[:32], other.strength()[:32])


def test_features_split_evenly():
    spec = BipartiteBenchmarkSpec(3, 2, 2, 1, 11)
    assert spec.features_per_community() == [4, 4, 3]
    _, truth = generate_bipartite_benchmark(spec)
    assert np.bincount(truth.module_of[6:]).tolist() == [4, 4, 3]


def test_benchmark_spec_validation():
    with pytest.raises(ValueError):
        BipartiteBenchmarkSpec(2, 4, 5, 0, 10)
    with pytest.raises(ValueError):
        BipartiteBenchmarkSpec(2, 4, 5, 6, 10)
    with pytest.raises(ValueError):
        BipartiteBenchmarkSpec(4, 4, 2, 1, 3)


def test_benchmark_rejects_too_few_features():
    with pytest.raises(ValueError, match="k_in"):
        generate_bipartite_benchmark(BipartiteBenchmarkSpec(2, 4, 5, 5, 6))
    with pytest.raises(ValueError, match="k_out"):
        generate_bipartite_benchmark(BipartiteBenchmarkSpec(2, 4, 5, 1, 6))


def test_benchmark_grid_and_trial_seeds():
    grid = benchmark_grid(2, 4, 4, [3, 4], [8, 16, 32])
    assert [(s.k_in, s.feature_count) for s in grid] == [(3, 8), (3, 16), (3, 32), (4, 8), (4, 16), (4, 32)]
    seeds = {trial_spec(grid[0], 7, trial).seed for trial in range(5)}
    assert len(seeds) == 5
    assert trial_spec(grid[0], 7, 2) == trial_spec(grid[0], 7, 2)
    assert trial_spec(grid[0], 7, 0).seed != trial_spec(grid[1], 7, 0).seed


@pytest.mark.parametrize("levels, nodes, links", [(1, 3, 3), (2, 9, 12), (3, 27, 39)])
def test_sierpinski_counts(levels, nodes, links):
    net, candidates = generate_sierpinski(levels)
    assert net.node_count == nodes
    assert net.link_count == links
    assert len(candidates) == levels + 2
    assert (net.strength() >= 2).all()


def test_sierpinski_validation():
    with pytest.raises(ValueError):
        generate_sierpinski(0)
    with pytest.raises(ValueError):
        generate_sierpinski(2, base_weight=0.0)


def test_sierpinski_argmin_moves_to_coarser_candidates():
    net, candidates = generate_sierpinski(3)
    names = list(candidates)
    winners = []
    for t in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0):
        lengths = candidate_codelengths(build_flow_model(net, t), candidates)
        winners.append(int(np.argmin([lengths[name] for name in names])))
    assert winners[0] == 0
    assert winners == sorted(winners)
    assert len(set(winners)) >= 3


def test_schematic_without_out_weight_is_disconnected():
    spec = SchematicBipartiteSpec(communities=2, primaries_per_community=3, features_per_community=2)
    net, candidates = generate_schematic_bipartite(spec)
    assert net.link_count == 2 * 3 * 2
    assert set(candidates) == {"one-module", "communities"}
    community = candidates["communities"].module_of
    assert (community[net.sources] == community[net.targets]).all()


def test_schematic_uniform_weights_ignore_community_labels():
    spec = SchematicBipartiteSpec(w_in=1.0, w_out=1.0)
    net, candidates = generate_schematic_bipartite(spec)
    assert spec.relative_out_weight == 0.5
    fm = build_flow_model(net, 1.0)
    rng = np.random.default_rng(2)
    communities = candidates["communities"].module_of
    shuffled = np.concatenate([rng.permutation(communities[:16]), rng.permutation(communities[16:])])
    assert map_equation(fm, Partition(shuffled)) == pytest.approx(map_equation(fm, candidates["communities"]), abs=1e-12)


def test_zero_mixing_bipartite_matches_full_projection():
    net, candidates = generate_schematic_bipartite(SchematicBipartiteSpec())
    bipartite = map_equation(bipartite_flow_model(net), candidates["communities"])
    projected = build_flow_model(project_bipartite_full(net), 1.0)
    primaries = net.primary_nodes()
    full = map_equation(projected, candidates["communities"].restrict(primaries))
    assert bipartite == pytest.approx(full, abs=1e-12)


def test_schematic_crossovers():
    grid = np.round(np.arange(0.0, 0.5 + 1e-9, 0.005), 3)
    df = schematic_codelength_sweep(SchematicBipartiteSpec(), grid)
    assert list(df.columns) == ["relative_out_weight", "mode", "L_one_module", "L_communities"]
    assert len(df) == 3 * len(grid)
    assert 0.15 <= crossover(df, "unipartite") <= 0.25
    assert 0.05 <= crossover(df, "bipartite") <= 0.15
    assert 0.05 <= crossover(df, "full-projection") <= 0.15
    assert crossover(df, "bipartite") < crossover(df, "unipartite")


def test_sweep_rejects_bad_input():
    with pytest.raises(ValueError):
        schematic_codelength_sweep(SchematicBipartiteSpec(), [0.1], modes=["teleport"])
    with pytest.raises(ValueError):
        schematic_codelength_sweep(SchematicBipartiteSpec(), [1.0])


def test_crossover_requires_a_win():
    df = pd.DataFrame(
        {"relative_out_weight": [0.1], "mode": ["bipartite"], "L_one_module": [1.0], "L_communities": [2.0]}
    )
    with pytest.raises(ValueError):
        crossover(df, "bipartite")

"""Synthetic networks with known modules.

- Bipartite community benchmark: every primary links to k features, k_in of
  them inside its own community.
- Sierpinski network: triangles of triangles with nested candidate partitions.
- Schematic bipartite network: complete bipartite communities with in- and
  out-weights, used to find where the two-community solution stops winning.
"""

from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
import pandas as pd

import config
from flow_model import FlowModel, bipartite_flow_model, build_flow_model
from mapeq import Partition, map_equation
from network import Network, project_bipartite_full

SCHEMATIC_MODES = ("unipartite", "bipartite", "full-projection")


@dataclass(frozen=True)
class BipartiteBenchmarkSpec:
    communities: int
    primaries_per_community: int
    k: int
    k_in: int
    feature_count: int
    seed: int = field(default_factory=lambda: config.SEED)

    def __post_init__(self):
        if self.communities < 1 or self.primaries_per_community < 1:
            raise ValueError("communities and primaries_per_community must be >= 1")
        if not 1 <= self.k_in <= self.k:
            raise ValueError(f"need 1 <= k_in <= k, got k_in={self.k_in}, k={self.k}")
        if self.feature_count < self.communities:
            raise ValueError("every community needs at least one feature")

    @property
    def primary_count(self) -> int:
        return self.communities * self.primaries_per_community

    def features_per_community(self) -> list[int]:
        """Even split; the remainder goes to the lowest community ids."""
        base, extra = divmod(self.feature_count, self.communities)
        return [base + (1 if c < extra else 0) for c in range(self.communities)]


@dataclass(frozen=True)
class SchematicBipartiteSpec:
    communities: int = field(default_factory=lambda: config.SCHEMATIC_COMMUNITIES)
    primaries_per_community: int = field(default_factory=lambda: config.SCHEMATIC_PRIMARIES)
    features_per_community: int = field(default_factory=lambda: config.SCHEMATIC_FEATURES)
    w_in: float = 1.0
    w_out: float = 0.0

    def __post_init__(self):
        if not self.w_in > 0:
            raise ValueError("w_in must be positive")
        if self.w_out < 0:
            raise ValueError("w_out must be non-negative")

    @property
    def relative_out_weight(self) -> float:
        return self.w_out / (self.w_in + self.w_out)


def generate_bipartite_benchmark(spec: BipartiteBenchmarkSpec) -> tuple[Network, Partition]:
    """
    Bipartite benchmark network and its ground truth.

    Args:
        spec: Benchmark parameters; ``spec.seed`` drives every random choice

    Returns:
        (network, ground truth) where primaries come first in community
        order, followed by the features in community order, and the ground
        truth labels both by community.

    Each primary links to k_in distinct features of its own community and
    k - k_in distinct features of the other communities, all with weight 1.
    """
    rng = np.random.default_rng(spec.seed)
    feature_sizes = np.array(spec.features_per_community())
    feature_start = np.concatenate([[0], np.cumsum(feature_sizes)])
    k_out = spec.k - spec.k_in
    if spec.k_in > feature_sizes.min():
        raise ValueError(f"k_in={spec.k_in} exceeds the {feature_sizes.min()} features of the smallest community")
    if k_out > spec.feature_count - feature_sizes.max():
        raise ValueError(f"k_out={k_out} exceeds the features available outside the largest community")

    primary_count = spec.primary_count
    sources, targets = [], []
    for primary in range(primary_count):
        community = primary // spec.primaries_per_community
        start, size = feature_start[community], feature_sizes[community]
        inside = start + rng.choice(size, size=spec.k_in, replace=False)
        outside = rng.choice(spec.feature_count - size, size=k_out, replace=False)
        outside = np.where(outside >= start, outside + size, outside)
        sources.append(np.full(spec.k, primary))
        targets.append(primary_count + np.concatenate([inside, outside]))

    node_count = primary_count + spec.feature_count
    mask = np.zeros(node_count, dtype=bool)
    mask[primary_count:] = True
    net = Network.from_arrays(
        node_count,
        np.concatenate(sources),
        np.concatenate(targets),
        np.ones(primary_count * spec.k),
        directed=False,
        feature_mask=mask,
    )
    truth = np.concatenate([
        np.repeat(np.arange(spec.communities), spec.primaries_per_community),
        np.repeat(np.arange(spec.communities), feature_sizes),
    ])
    return net, Partition(truth)


def benchmark_grid(
    communities: int,
    primaries_per_community: int,
    k: int,
    k_in_values: Iterable[int],
    feature_counts: Iterable[int],
) -> list[BipartiteBenchmarkSpec]:
    """Specs for every (k_in, feature_count) combination, k_in varying slowest."""
    feature_counts = list(feature_counts)
    return [
        BipartiteBenchmarkSpec(communities, primaries_per_community, k, k_in, feature_count)
        for k_in in k_in_values
        for feature_count in feature_counts
    ]


def trial_spec(spec: BipartiteBenchmarkSpec, seed: int, trial: int) -> BipartiteBenchmarkSpec:
    """Copy of ``spec`` whose seed depends on the root seed, the grid point and the trial."""
    sequence = np.random.SeedSequence([seed, spec.k_in, spec.feature_count, trial])
    return replace(spec, seed=int(sequence.generate_state(1)[0]))


def _sierpinski_links(levels: int) -> tuple[list[tuple[int, int]], list[int]]:
    if levels == 1:
        return [(0, 1), (1, 2), (0, 2)], [0, 1, 2]
    links, corners = _sierpinski_links(levels - 1)
    size = 3 ** (levels - 1)
    all_links = [(a + copy * size, b + copy * size) for copy in range(3) for a, b in links]
    for i in range(3):
        for j in range(i + 1, 3):
            all_links.append((corners[j] + i * size, corners[i] + j * size))
    return all_links, [corners[i] + i * size for i in range(3)]


def generate_sierpinski(levels: int, base_weight: float = 1.0) -> tuple[Network, dict[str, Partition]]:
    """
    Sierpinski network with 3**levels nodes and its nested candidate partitions.

    Level 1 is a triangle; every further level joins three copies of the
    previous one with one link between each pair of copies. Candidates are
    ordered from finest to coarsest: singletons, level-1 (triangles) up to
    level-<levels>, then one-module.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if not base_weight > 0:
        raise ValueError("base_weight must be positive")
    links, _ = _sierpinski_links(levels)
    node_count = 3 ** levels
    net = Network.from_links(node_count, [(a, b, base_weight) for a, b in links])

    nodes = np.arange(node_count)
    candidates = {"singletons": Partition.singletons(node_count)}
    for level in range(1, levels + 1):
        candidates[f"level-{level}"] = Partition(nodes // 3 ** level)
    candidates["one-module"] = Partition.one_module(node_count)
    return net, candidates


def generate_schematic_bipartite(spec: SchematicBipartiteSpec) -> tuple[Network, dict[str, Partition]]:
    """
    Complete bipartite communities with weight w_in, every cross-community pair linked with w_out.

    Primaries come first in community order, then features. Candidates are
    one-module and communities.
    """
    c, p, f = spec.communities, spec.primaries_per_community, spec.features_per_community
    primary_community = np.repeat(np.arange(c), p)
    feature_community = np.repeat(np.arange(c), f)
    primaries, features = np.meshgrid(np.arange(c * p), np.arange(c * f), indexing="ij")
    primaries, features = primaries.ravel(), features.ravel()
    same = primary_community[primaries] == feature_community[features]
    weights = np.where(same, spec.w_in, spec.w_out)
    keep = weights > 0

    node_count = c * (p + f)
    mask = np.zeros(node_count, dtype=bool)
    mask[c * p:] = True
    net = Network.from_arrays(
        node_count, primaries[keep], c * p + features[keep], weights[keep],
        directed=False, feature_mask=mask,
    )
    candidates = {
        "one-module": Partition.one_module(node_count),
        "communities": Partition(np.concatenate([primary_community, feature_community])),
    }
    return net, candidates


def candidate_codelengths(fm: FlowModel, candidates: dict[str, Partition]) -> dict[str, float]:
    return {name: map_equation(fm, part) for name, part in candidates.items()}


def _schematic_models(net: Network, candidates: dict[str, Partition], mode: str):
    if mode == "unipartite":
        return build_flow_model(net, 1.0), candidates
    if mode == "bipartite":
        return bipartite_flow_model(net), candidates
    primaries = net.primary_nodes()
    projected = project_bipartite_full(net)
    return build_flow_model(projected, 1.0), {name: part.restrict(primaries) for name, part in candidates.items()}


def schematic_codelength_sweep(
    spec: SchematicBipartiteSpec,
    relative_out_weights: Iterable[float],
    modes: Iterable[str] = SCHEMATIC_MODES,
) -> pd.DataFrame:
    """
    One-module and two-community code lengths as the relative out weight grows.

    Args:
        spec: Community sizes; its weights are replaced by w_in = 1 - r, w_out = r
        relative_out_weights: Values r in [0, 0.5]
        modes: Any of "unipartite" (Markov time 1 on the bipartite network),
            "bipartite" (bipartite dynamics) and "full-projection"

    Returns:
        DataFrame with columns relative_out_weight, mode, L_one_module, L_communities
    """
    rows = []
    modes = list(modes)
    for mode in modes:
        if mode not in SCHEMATIC_MODES:
            raise ValueError(f"Unknown dynamics mode: {mode}")
    for r in relative_out_weights:
        if not 0 <= r < 1:
            raise ValueError(f"relative out weight must lie in [0, 1), got {r}")
        net, candidates = generate_schematic_bipartite(replace(spec, w_in=1.0 - r, w_out=r))
        for mode in modes:
            fm, parts = _schematic_models(net, candidates, mode)
            lengths = candidate_codelengths(fm, parts)
            rows.append({
                "relative_out_weight": float(r),
                "mode": mode,
                "L_one_module": lengths["one-module"],
                "L_communities": lengths["communities"],
            })
    return pd.DataFrame(rows, columns=["relative_out_weight", "mode", "L_one_module", "L_communities"])


def crossover(df: pd.DataFrame, mode: str) -> float:
    """Largest relative out weight at which the community partition is still strictly shorter."""
    rows = df[(df["mode"] == mode) & (df["L_communities"] < df["L_one_module"])]
    if rows.empty:
        raise ValueError(f"the community partition never wins in mode {mode}")
    return float(rows["relative_out_weight"].max())

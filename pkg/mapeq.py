"""Map equation code lengths for flat partitions and nested hierarchies.

All code lengths are in bits. Exit and enter rates come from the link flows
of a FlowModel, which already carry the Markov-time rescaling, so the same
formulas serve every Markov time.
"""

from dataclasses import dataclass
from typing import Hashable, Iterable, NamedTuple

import numpy as np
from scipy.stats import entropy

from flow_model import FlowModel


def plogp(x):
    """Elementwise x * log2(x) with 0 * log 0 = 0."""
    x = np.asarray(x, dtype=np.float64)
    safe = np.where(x > 0, x, 1.0)
    return np.where(x > 0, x * np.log2(safe), 0.0)


def _relabel(labels: Iterable[Hashable]) -> np.ndarray:
    """Contiguous ids in order of first appearance."""
    ids: dict = {}
    return np.array([ids.setdefault(label, len(ids)) for label in labels], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Partition:
    """Flat assignment of every node to one of ``module_count`` contiguous modules."""

    module_of: np.ndarray

    def __post_init__(self):
        module_of = np.asarray(self.module_of, dtype=np.int64)
        if module_of.ndim != 1:
            raise ValueError("module_of must be one-dimensional")
        if len(module_of):
            present = np.unique(module_of)
            if present[0] != 0 or present[-1] != len(present) - 1:
                raise ValueError("module ids must be contiguous from 0")
        module_of.setflags(write=False)
        object.__setattr__(self, "module_of", module_of)

    @classmethod
    def from_labels(cls, labels: Iterable[Hashable]) -> "Partition":
        return cls(_relabel(labels))

    @classmethod
    def singletons(cls, node_count: int) -> "Partition":
        return cls(np.arange(node_count))

    @classmethod
    def one_module(cls, node_count: int) -> "Partition":
        return cls(np.zeros(node_count, dtype=np.int64))

    @property
    def node_count(self) -> int:
        return len(self.module_of)

    @property
    def module_count(self) -> int:
        return int(self.module_of.max()) + 1 if len(self.module_of) else 0

    def modules(self) -> list[np.ndarray]:
        order = np.argsort(self.module_of, kind="stable")
        bounds = np.cumsum(np.bincount(self.module_of, minlength=self.module_count))[:-1]
        return np.split(order, bounds)

    def restrict(self, nodes: np.ndarray) -> "Partition":
        """Partition of the given nodes only, module ids renumbered."""
        return Partition.from_labels(self.module_of[nodes].tolist())

    def same_as(self, other: "Partition") -> bool:
        """Equal up to module relabeling."""
        return np.array_equal(_relabel(self.module_of.tolist()), _relabel(other.module_of.tolist()))


@dataclass(frozen=True, eq=False)
class Hierarchy:
    """
    Nested modules given as one module path per node.

    ``paths[v] = (2, 0)`` places node v in submodule 0 of top module 2. A
    module holds either nodes or submodules, never both.
    """

    paths: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        paths = tuple(tuple(int(step) for step in path) for path in self.paths)
        if any(not path for path in paths):
            raise ValueError("every node needs a module path of length >= 1")
        leaves = set(paths)
        internal = {path[:k] for path in paths for k in range(1, len(path))}
        mixed = leaves & internal
        if mixed:
            raise ValueError(f"module {sorted(mixed)[0]} holds both nodes and submodules")
        object.__setattr__(self, "paths", paths)

    @classmethod
    def from_partition(cls, part: Partition) -> "Hierarchy":
        return cls(tuple((int(m),) for m in part.module_of))

    @property
    def node_count(self) -> int:
        return len(self.paths)

    @property
    def depth(self) -> int:
        """Longest module path."""
        return max((len(path) for path in self.paths), default=0)

    @property
    def levels(self) -> int:
        """Codebook levels, counting the root index; a flat partition has 2."""
        return self.depth + 1

    @property
    def module_count(self) -> int:
        """Modules across all levels."""
        return len({path[:k] for path in self.paths for k in range(1, len(path) + 1)})

    def leaf_partition(self) -> Partition:
        return Partition.from_labels(self.paths)

    def top_partition(self) -> Partition:
        return Partition.from_labels(path[0] for path in self.paths)

    def normalized(self) -> "Hierarchy":
        """Children of every module renumbered 0, 1, ... in order of first appearance."""
        child_ids: dict = {}
        renamed = []
        for path in self.paths:
            new_path = []
            for k in range(len(path)):
                siblings = child_ids.setdefault(tuple(new_path), {})
                new_path.append(siblings.setdefault(path[k], len(siblings)))
            renamed.append(tuple(new_path))
        return Hierarchy(tuple(renamed))


@dataclass(frozen=True)
class ModuleFlowStats:
    """Flow statistics of one module; ``member_visit_rates`` are the visit rates of its nodes."""

    exit_rate: float
    enter_rate: float
    internal_visit_sum: float
    member_visit_rates: np.ndarray

    @property
    def codebook_rate(self) -> float:
        return self.exit_rate + self.internal_visit_sum


class CodelengthTerms(NamedTuple):
    index: float
    modules: float
    total: float


def _entropy_bits(events: np.ndarray) -> float:
    events = np.asarray(events, dtype=np.float64)
    if events.sum() <= 0:
        return 0.0
    return float(entropy(events, base=2))


def _check_size(fm: FlowModel, node_count: int):
    if node_count != fm.node_count:
        raise ValueError(f"partition covers {node_count} nodes, flow model has {fm.node_count}")


def _boundary_rates(fm: FlowModel, module_of: np.ndarray, count: int) -> tuple[np.ndarray, np.ndarray]:
    source_module = module_of[fm.link_sources]
    target_module = module_of[fm.link_targets]
    cross = source_module != target_module
    exit_rate = np.bincount(source_module[cross], weights=fm.link_flow[cross], minlength=count)
    enter_rate = np.bincount(target_module[cross], weights=fm.link_flow[cross], minlength=count)
    return exit_rate, enter_rate


def _leaf_groups(fm: FlowModel, module_of: np.ndarray, count: int) -> tuple[np.ndarray, list[np.ndarray]]:
    leaf_rate, leaf_node = fm.leaf_rates()
    leaf_module = module_of[leaf_node]
    internal = np.bincount(leaf_module, weights=leaf_rate, minlength=count)
    order = np.argsort(leaf_module, kind="stable")
    bounds = np.cumsum(np.bincount(leaf_module, minlength=count))[:-1]
    return internal, np.split(leaf_rate[order], bounds)


def module_stats(fm: FlowModel, part: Partition) -> list[ModuleFlowStats]:
    """
    Exit, enter and visit statistics per module.

    Exit and enter rates sum the (already t-scaled) flows of links that cross
    the module boundary. Feature nodes carry no visit rate, so they shape
    these rates without adding to the internal visit sum.
    """
    _check_size(fm, part.node_count)
    count = part.module_count
    exit_rate, enter_rate = _boundary_rates(fm, part.module_of, count)
    internal, members = _leaf_groups(fm, part.module_of, count)
    return [
        ModuleFlowStats(
            exit_rate=float(exit_rate[m]),
            enter_rate=float(enter_rate[m]),
            internal_visit_sum=float(internal[m]),
            member_visit_rates=members[m],
        )
        for m in range(count)
    ]


def module_codelength(stats: ModuleFlowStats) -> float:
    """Average bits per event of one module codebook: its exit event plus its node visits."""
    if stats.codebook_rate <= 0:
        return 0.0
    return _entropy_bits(np.concatenate([[stats.exit_rate], stats.member_visit_rates]))


def index_codelength(stats: list[ModuleFlowStats]) -> tuple[float, float]:
    """(usage rate, bits per event) of the index codebook over module enter events."""
    enter = np.array([module.enter_rate for module in stats], dtype=np.float64)
    usage = float(enter.sum())
    if usage <= 0:
        return 0.0, 0.0
    return usage, _entropy_bits(enter)


def _module_bits(stats: list[ModuleFlowStats]) -> float:
    return sum(module.codebook_rate * module_codelength(module) for module in stats)


def codelength_terms(fm: FlowModel, part: Partition) -> CodelengthTerms:
    """Index and module parts of the two-level map equation."""
    stats = module_stats(fm, part)
    usage, index_bits = index_codelength(stats)
    index = usage * index_bits
    modules = _module_bits(stats)
    return CodelengthTerms(index=index, modules=modules, total=index + modules)


def map_equation(fm: FlowModel, part: Partition) -> float:
    """Two-level code length L(M, t) at the Markov time of ``fm``."""
    return codelength_terms(fm, part).total


def _prefix_ids(h: Hierarchy) -> tuple[list[dict], np.ndarray]:
    """Per level, an id for every module prefix, plus a node x level table of those ids (-1 past a leaf)."""
    levels = h.depth
    prefixes = sorted({path[:k] for path in h.paths for k in range(1, len(path) + 1)})
    by_level: list[dict] = [dict() for _ in range(levels)]
    for prefix in prefixes:
        level = by_level[len(prefix) - 1]
        level[prefix] = len(level)
    table = np.full((h.node_count, levels), -1, dtype=np.int64)
    for node, path in enumerate(h.paths):
        for k in range(1, len(path) + 1):
            table[node, k - 1] = by_level[k - 1][path[:k]]
    return by_level, table


def hierarchical_map_equation(fm: FlowModel, h: Hierarchy) -> float:
    """
    Code length of a nested module hierarchy.

    The root index codebook encodes entries into top modules. Every other
    internal module has a codebook with its own exit event plus entries into
    its submodules; every leaf module has a codebook with its exit event plus
    its node visits. A depth-2 hierarchy gives the two-level map equation.
    """
    _check_size(fm, h.node_count)
    by_level, table = _prefix_ids(h)
    rates = {}
    for k, level in enumerate(by_level):
        count = len(level)
        module_of = table[:, k]
        source_module = module_of[fm.link_sources]
        target_module = module_of[fm.link_targets]
        cross = source_module != target_module
        leaving = cross & (source_module >= 0)
        entering = cross & (target_module >= 0)
        exit_rate = np.bincount(source_module[leaving], weights=fm.link_flow[leaving], minlength=count)
        enter_rate = np.bincount(target_module[entering], weights=fm.link_flow[entering], minlength=count)
        for prefix, module in level.items():
            rates[prefix] = (float(exit_rate[module]), float(enter_rate[module]))

    leaf_modules = sorted(set(h.paths))
    leaf_index = {prefix: i for i, prefix in enumerate(leaf_modules)}
    leaf_of_node = np.array([leaf_index[path] for path in h.paths], dtype=np.int64)
    internal, members = _leaf_groups(fm, leaf_of_node, len(leaf_modules))

    children: dict = {}
    for prefix in sorted(rates):
        children.setdefault(prefix[:-1], []).append(prefix)

    root = [
        ModuleFlowStats(rates[child][0], rates[child][1], 0.0, np.zeros(0))
        for child in children[()]
    ]
    usage, index_bits = index_codelength(root)
    total_index = usage * index_bits

    module_parts = []
    for prefix in sorted(rates):
        exit_rate, enter_rate = rates[prefix]
        if prefix in leaf_index:
            i = leaf_index[prefix]
            stats = ModuleFlowStats(exit_rate, enter_rate, float(internal[i]), members[i])
            module_parts.append(stats.codebook_rate * module_codelength(stats))
        else:
            events = np.array([exit_rate] + [rates[child][1] for child in children[prefix]])
            module_parts.append(float(events.sum()) * _entropy_bits(events))
    return total_index + sum(module_parts)


def one_module_codelength(fm: FlowModel) -> float:
    """-sum p log2 p over the original nodes; the one-module code length at every Markov time."""
    leaf_rate, _ = fm.leaf_rates()
    return float(-plogp(leaf_rate).sum())

"""
Map equation minimization: local moves, aggregation, fine-tuning and
recursive module splitting, restarted over several seeded trials.

Each trial alternates node moves with aggregation of the found modules into
coarse nodes until nothing moves. Tuning rounds then either re-liberate the
original nodes or move whole submodules between modules, and repeat while
the code length keeps dropping by at least min_improvement.
Multilevel mode then tries to split every module with the same search run on
its induced subflow, keeping a split only when the hierarchy gets shorter.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

import config
from flow_model import FlowModel
from mapeq import Hierarchy, Partition, hierarchical_map_equation, map_equation, one_module_codelength, plogp

MODES = ("two-level", "multilevel")
MAX_PASSES = 200
MOVE_EPSILON = 1e-14


def _plogp(x: float) -> float:
    return x * math.log2(x) if x > 0 else 0.0


@dataclass(frozen=True)
class SearchConfig:
    trials: int = field(default_factory=lambda: config.SEARCH_TRIALS)
    seed: int = field(default_factory=lambda: config.SEED)
    tune_iterations: int = field(default_factory=lambda: config.SEARCH_TUNE_ITERATIONS)
    min_improvement: float = field(default_factory=lambda: config.SEARCH_MIN_IMPROVEMENT)
    mode: str = "two-level"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.min_improvement > 0:
            raise ValueError("min_improvement must be positive")
        if self.tune_iterations < 0:
            raise ValueError("tune_iterations must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"Unknown search mode: {self.mode}")


@dataclass(frozen=True, eq=False)
class SearchResult:
    """Best partition over all trials; ``hierarchy`` is set in multilevel mode."""

    partition: Partition
    codelength: float
    one_module_codelength: float
    trial: int
    markov_time: float
    hierarchy: Optional[Hierarchy] = None

    @property
    def levels(self) -> int:
        return self.hierarchy.levels if self.hierarchy is not None else 2

    @property
    def module_count(self) -> int:
        if self.hierarchy is not None:
            return self.hierarchy.module_count
        return self.partition.module_count

    @property
    def leaf_partition(self) -> Partition:
        if self.hierarchy is not None:
            return self.hierarchy.leaf_partition()
        return self.partition


class _FlowGraph:
    """
    One search level: node flows, boundary totals and a symmetric neighbor list.

    ``node_out`` / ``node_in`` hold all flow leaving / entering each node
    except self-flow, including flow to nodes outside this graph, so that
    module exit and enter rates stay correct inside a sub-search.
    ``constant`` is the sum of p log p over the original nodes covered.
    """

    def __init__(self, node_flow, node_out, node_in, arc_sources, arc_targets, arc_flow, constant):
        n = len(node_flow)
        self.n = n
        self.node_flow = np.asarray(node_flow, dtype=np.float64)
        self.node_out = np.asarray(node_out, dtype=np.float64)
        self.node_in = np.asarray(node_in, dtype=np.float64)
        self.constant = float(constant)

        keys = arc_sources * max(n, 1) + arc_targets
        unique_keys, inverse = np.unique(keys, return_inverse=True)
        self.arc_sources = unique_keys // max(n, 1)
        self.arc_targets = unique_keys % max(n, 1)
        self.arc_flow = np.bincount(inverse, weights=arc_flow, minlength=len(unique_keys))

        # each arc appears in the row of both endpoints: as out-flow for its source, in-flow for its target
        rows = np.concatenate([self.arc_sources, self.arc_targets])
        cols = np.concatenate([self.arc_targets, self.arc_sources])
        zeros = np.zeros(len(self.arc_flow))
        out_flow = np.concatenate([self.arc_flow, zeros])
        in_flow = np.concatenate([zeros, self.arc_flow])
        pair_keys, pair_inverse = np.unique(rows * max(n, 1) + cols, return_inverse=True)
        self.indptr = np.concatenate([[0], np.cumsum(np.bincount(pair_keys // max(n, 1), minlength=n))]).tolist()
        self.neighbors = (pair_keys % max(n, 1)).tolist()
        self.out_flow = np.bincount(pair_inverse, weights=out_flow, minlength=len(pair_keys)).tolist()
        self.in_flow = np.bincount(pair_inverse, weights=in_flow, minlength=len(pair_keys)).tolist()

    @classmethod
    def from_flow_model(cls, fm: FlowModel, nodes: Optional[np.ndarray] = None) -> "_FlowGraph":
        sources, targets, flow = fm.link_sources, fm.link_targets, fm.link_flow
        moving = sources != targets
        sources, targets, flow = sources[moving], targets[moving], flow[moving]
        node_out = np.bincount(sources, weights=flow, minlength=fm.node_count)
        node_in = np.bincount(targets, weights=flow, minlength=fm.node_count)
        leaf_rate, leaf_node = fm.leaf_rates()
        node_plogp = np.bincount(leaf_node, weights=plogp(leaf_rate), minlength=fm.node_count)
        if nodes is None:
            nodes = np.arange(fm.node_count)
        position = np.full(fm.node_count, -1, dtype=np.int64)
        position[nodes] = np.arange(len(nodes))
        inside = (position[sources] >= 0) & (position[targets] >= 0)
        return cls(
            fm.visit_rate[nodes],
            node_out[nodes],
            node_in[nodes],
            position[sources[inside]],
            position[targets[inside]],
            flow[inside],
            node_plogp[nodes].sum(),
        )

    def module_rates(self, assignment: np.ndarray, count: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Exit, enter and visit totals per module of ``assignment``."""
        flow = np.bincount(assignment, weights=self.node_flow, minlength=count)
        source_module = assignment[self.arc_sources]
        internal = source_module == assignment[self.arc_targets]
        internal_flow = np.bincount(source_module[internal], weights=self.arc_flow[internal], minlength=count)
        exit_rate = np.maximum(np.bincount(assignment, weights=self.node_out, minlength=count) - internal_flow, 0.0)
        enter_rate = np.maximum(np.bincount(assignment, weights=self.node_in, minlength=count) - internal_flow, 0.0)
        return exit_rate, enter_rate, flow

    def codelength(self, assignment: np.ndarray, offset: float = 0.0) -> float:
        """
        Code length of ``assignment`` given the exit rate ``offset`` of the enclosing module.

        With offset 0 this is the two-level map equation; otherwise it is the
        cost of the enclosing module's codebook plus its submodule codebooks.
        """
        count = int(assignment.max()) + 1
        exit_rate, enter_rate, flow = self.module_rates(assignment, count)
        return float(
            _plogp(offset + enter_rate.sum()) - _plogp(offset)
            - plogp(enter_rate).sum() - plogp(exit_rate).sum()
            + plogp(exit_rate + flow).sum() - self.constant
        )

    def subgraph(self, nodes: np.ndarray) -> "_FlowGraph":
        """Induced graph on ``nodes``; boundary totals still count flow to the rest."""
        position = np.full(self.n, -1, dtype=np.int64)
        position[nodes] = np.arange(len(nodes))
        inside = (position[self.arc_sources] >= 0) & (position[self.arc_targets] >= 0)
        return _FlowGraph(
            self.node_flow[nodes],
            self.node_out[nodes],
            self.node_in[nodes],
            position[self.arc_sources[inside]],
            position[self.arc_targets[inside]],
            self.arc_flow[inside],
            0.0,
        )

    def aggregate(self, assignment: np.ndarray, count: int) -> "_FlowGraph":
        exit_rate, enter_rate, flow = self.module_rates(assignment, count)
        source_module = assignment[self.arc_sources]
        target_module = assignment[self.arc_targets]
        cross = source_module != target_module
        return _FlowGraph(
            flow, exit_rate, enter_rate,
            source_module[cross], target_module[cross], self.arc_flow[cross],
            self.constant,
        )


class _ModuleState:
    """Mutable module totals for one local-move phase."""

    def __init__(self, graph: _FlowGraph, assignment: np.ndarray, offset: float):
        self.graph = graph
        self.offset = offset
        count = graph.n
        exit_rate, enter_rate, flow = graph.module_rates(assignment, count)
        self.module = assignment.tolist()
        self.exit = exit_rate.tolist()
        self.enter = enter_rate.tolist()
        self.flow = flow.tolist()
        self.enter_sum = float(enter_rate.sum())
        self.size = np.bincount(assignment, minlength=count).tolist()
        self.empty = [m for m in range(count - 1, -1, -1) if self.size[m] == 0]

    def move_delta(self, a, b, exit_a, enter_a, flow_a, exit_b, enter_b, flow_b) -> float:
        new_enter_sum = self.enter_sum - self.enter[a] - self.enter[b] + enter_a + enter_b
        return (
            _plogp(self.offset + new_enter_sum) - _plogp(self.offset + self.enter_sum)
            - (_plogp(enter_a) + _plogp(enter_b) - _plogp(self.enter[a]) - _plogp(self.enter[b]))
            - (_plogp(exit_a) + _plogp(exit_b) - _plogp(self.exit[a]) - _plogp(self.exit[b]))
            + (_plogp(exit_a + flow_a) + _plogp(exit_b + flow_b)
               - _plogp(self.exit[a] + self.flow[a]) - _plogp(self.exit[b] + self.flow[b]))
        )

    def empty_module(self) -> Optional[int]:
        while self.empty and self.size[self.empty[-1]] > 0:
            self.empty.pop()
        return self.empty[-1] if self.empty else None

    def move_pass(self, order) -> tuple[int, float]:
        """
        Visit nodes in ``order``, moving each to its best neighboring module or,
        failing that, to an empty module of its own. Returns (moves, delta).
        """
        g = self.graph
        module = self.module
        moves = 0
        total_delta = 0.0
        for u in order:
            a = module[u]
            out_to: dict = {}
            in_from: dict = {}
            for j in range(g.indptr[u], g.indptr[u + 1]):
                m = module[g.neighbors[j]]
                out_to[m] = out_to.get(m, 0.0) + g.out_flow[j]
                in_from[m] = in_from.get(m, 0.0) + g.in_flow[j]

            node_out, node_in, node_flow = g.node_out[u], g.node_in[u], g.node_flow[u]
            out_a, in_a = out_to.get(a, 0.0), in_from.get(a, 0.0)
            exit_a = self.exit[a] - (node_out - out_a) + in_a
            enter_a = self.enter[a] - (node_in - in_a) + out_a
            flow_a = self.flow[a] - node_flow

            candidates = sorted(m for m in out_to if m != a)
            if self.size[a] > 1:
                empty = self.empty_module()
                if empty is not None:
                    candidates.append(empty)

            best, best_delta, best_rates = a, -MOVE_EPSILON, None
            for b in candidates:
                exit_b = self.exit[b] + (node_out - out_to.get(b, 0.0)) - in_from.get(b, 0.0)
                enter_b = self.enter[b] + (node_in - in_from.get(b, 0.0)) - out_to.get(b, 0.0)
                flow_b = self.flow[b] + node_flow
                delta = self.move_delta(a, b, exit_a, enter_a, flow_a, exit_b, enter_b, flow_b)
                if delta < best_delta:
                    best, best_delta, best_rates = b, delta, (exit_b, enter_b, flow_b)
            if best == a:
                continue

            exit_b, enter_b, flow_b = best_rates
            self.enter_sum += enter_a + enter_b - self.enter[a] - self.enter[best]
            self.exit[a], self.enter[a], self.flow[a] = max(exit_a, 0.0), max(enter_a, 0.0), max(flow_a, 0.0)
            self.exit[best], self.enter[best], self.flow[best] = exit_b, enter_b, flow_b
            self.size[a] -= 1
            self.size[best] += 1
            if self.size[a] == 0:
                self.empty.append(a)
            module[u] = best
            moves += 1
            total_delta += best_delta
        return moves, total_delta

    def assignment(self) -> np.ndarray:
        """Current modules renumbered 0, 1, ... in order of first appearance."""
        ids: dict = {}
        return np.array([ids.setdefault(m, len(ids)) for m in self.module], dtype=np.int64)


def _run_passes(graph: _FlowGraph, assignment: np.ndarray, offset: float, rng, min_improvement: float):
    """Local moves until a pass moves nothing or gains less than min_improvement."""
    state = _ModuleState(graph, assignment, offset)
    total_moves = 0
    for _ in range(MAX_PASSES):
        moves, delta = state.move_pass(rng.permutation(graph.n).tolist())
        total_moves += moves
        if moves == 0 or -delta < min_improvement:
            break
    return state.assignment(), total_moves


def _move_coarse(graph: _FlowGraph, assignment: np.ndarray, offset: float, rng, cfg: SearchConfig) -> np.ndarray:
    """Aggregate modules into coarse nodes and move those until nothing moves."""
    while True:
        count = int(assignment.max()) + 1
        coarse = graph.aggregate(assignment, count)
        coarse_assignment, moves = _run_passes(coarse, np.arange(count), offset, rng, cfg.min_improvement)
        if moves == 0:
            return assignment
        assignment = coarse_assignment[assignment]


def _submodules(graph: _FlowGraph, assignment: np.ndarray, rng, cfg: SearchConfig) -> tuple[np.ndarray, int]:
    """Split every module by local moves on its own nodes; submodule ids are global."""
    sub = np.empty(graph.n, dtype=np.int64)
    count = 0
    for module in range(int(assignment.max()) + 1):
        members = np.flatnonzero(assignment == module)
        if len(members) > 1:
            local, _ = _run_passes(graph.subgraph(members), np.arange(len(members)), 0.0, rng, cfg.min_improvement)
        else:
            local = np.zeros(len(members), dtype=np.int64)
        sub[members] = local + count
        count += int(local.max()) + 1
    return sub, count


def _coarse_tune(graph: _FlowGraph, assignment: np.ndarray, offset: float, rng, cfg: SearchConfig) -> np.ndarray:
    """Move whole submodules between the current modules."""
    sub, count = _submodules(graph, assignment, rng, cfg)
    module_of_sub = np.zeros(count, dtype=np.int64)
    module_of_sub[sub] = assignment
    moved, _ = _run_passes(graph.aggregate(sub, count), module_of_sub, offset, rng, cfg.min_improvement)
    return moved[sub]


def _two_level(graph: _FlowGraph, rng, cfg: SearchConfig, offset: float = 0.0) -> tuple[np.ndarray, float]:
    """
    Two-level search on one graph. Returns the node assignment and its code length.

    After the first round from singletons, rounds alternate between freeing
    the original nodes and moving submodules. A round that does not shorten
    the code is undone; two such rounds in a row end the search.
    """
    assignment = np.arange(graph.n)
    if graph.n == 1:
        return assignment, graph.codelength(assignment, offset)

    codelength = graph.codelength(assignment, offset)
    stalled = 0
    for round_index in range(cfg.tune_iterations + 1):
        if round_index % 2 == 1:
            candidate = _coarse_tune(graph, assignment, offset, rng, cfg)
        else:
            candidate, _ = _run_passes(graph, assignment, offset, rng, cfg.min_improvement)
        candidate = _move_coarse(graph, candidate, offset, rng, cfg)
        new_codelength = graph.codelength(candidate, offset)
        if codelength - new_codelength < cfg.min_improvement:
            stalled += 1
            if stalled == 2:
                break
            continue
        stalled = 0
        assignment, codelength = candidate, new_codelength
    return assignment, codelength


def _split(fm: FlowModel, nodes: np.ndarray, exit_rate: float, rng, cfg: SearchConfig) -> list[tuple[int, ...]]:
    """Relative module paths for ``nodes`` after recursively splitting their module."""
    if len(nodes) <= 1:
        return [()] * len(nodes)
    graph = _FlowGraph.from_flow_model(fm, nodes)
    unsplit = _plogp(exit_rate + graph.node_flow.sum()) - _plogp(exit_rate) - graph.constant
    assignment, codelength = _two_level(graph, rng, cfg, offset=exit_rate)
    count = int(assignment.max()) + 1
    if count <= 1 or codelength > unsplit - cfg.min_improvement:
        return [()] * len(nodes)

    sub_exit, _, _ = graph.module_rates(assignment, count)
    paths: list = [None] * len(nodes)
    for module in range(count):
        members = np.flatnonzero(assignment == module)
        if len(members) == 1:
            paths[members[0]] = (module,)
            continue
        for member, tail in zip(members, _split(fm, nodes[members], float(sub_exit[module]), rng, cfg)):
            paths[member] = (module,) + tail
    return paths


def _multilevel(fm: FlowModel, assignment: np.ndarray, rng, cfg: SearchConfig) -> Hierarchy:
    graph = _FlowGraph.from_flow_model(fm)
    count = int(assignment.max()) + 1
    exit_rate, _, _ = graph.module_rates(assignment, count)
    paths: list = [None] * fm.node_count
    for module in range(count):
        members = np.flatnonzero(assignment == module)
        for member, tail in zip(members, _split(fm, members, float(exit_rate[module]), rng, cfg)):
            paths[member] = (module,) + tail
    return Hierarchy(tuple(paths))


def local_move_pass(fm: FlowModel, part: Partition, rng) -> tuple[Partition, float]:
    """
    One pass of greedy node moves in random order.

    Every node moves to the neighboring module with the largest code length
    decrease, if any; ties go to the smallest module id. A node that gains
    nothing from its neighbors may leave for an empty module of its own. The
    returned delta is the sum of the incremental move gains.
    """
    graph = _FlowGraph.from_flow_model(fm)
    state = _ModuleState(graph, np.asarray(part.module_of), 0.0)
    _, delta = state.move_pass(rng.permutation(graph.n).tolist())
    return Partition(state.assignment()), delta


def aggregate(fm: FlowModel, part: Partition) -> tuple[FlowModel, np.ndarray]:
    """
    Collapse every module into one coarse node.

    Coarse visit rates are module visit sums and coarse link flows sum the
    flows between modules, intra-module flow kept as self-flow. The original
    node visit rates travel along so the map equation of a coarse partition
    equals that of its preimage.
    """
    if part.node_count != fm.node_count:
        raise ValueError(f"partition covers {part.node_count} nodes, flow model has {fm.node_count}")
    module_of = part.module_of
    count = part.module_count
    sources, targets = module_of[fm.link_sources], module_of[fm.link_targets]
    keys, inverse = np.unique(sources * count + targets, return_inverse=True)
    leaf_rate, leaf_node = fm.leaf_rates()
    coarse = FlowModel(
        node_count=count,
        visit_rate=np.bincount(module_of, weights=fm.visit_rate, minlength=count),
        link_sources=keys // count,
        link_targets=keys % count,
        link_flow=np.bincount(inverse, weights=fm.link_flow, minlength=len(keys)),
        markov_time=fm.markov_time,
        directed=fm.directed,
        leaf_visit_rate=leaf_rate,
        leaf_node=module_of[leaf_node],
    )
    return coarse, module_of.copy()


def optimize(fm: FlowModel, cfg: Optional[SearchConfig] = None, verbose: bool = False) -> SearchResult:
    """
    Best partition (or hierarchy) over ``cfg.trials`` seeded trials.

    Args:
        fm: Flow model at the Markov time to search at
        cfg: Search settings (defaults from config)
        verbose: Print one line per trial

    Trial i uses its own generator seeded with cfg.seed + i. The reported
    code length is a fresh evaluation of the returned structure; ties keep
    the lowest trial index.
    """
    cfg = cfg or SearchConfig()
    if fm.node_count == 0:
        raise ValueError("flow model is empty")
    one_module = one_module_codelength(fm)

    best = None
    for trial in range(cfg.trials):
        rng = np.random.default_rng(cfg.seed + trial)
        graph = _FlowGraph.from_flow_model(fm)
        assignment, _ = _two_level(graph, rng, cfg)
        partition = Partition(assignment)
        hierarchy = None
        if cfg.mode == "multilevel":
            hierarchy = _multilevel(fm, assignment, rng, cfg)
            codelength = hierarchical_map_equation(fm, hierarchy)
        else:
            codelength = map_equation(fm, partition)

        if verbose:
            modules = hierarchy.module_count if hierarchy is not None else partition.module_count
            print(f"  Trial {trial + 1}/{cfg.trials}: L = {codelength:.6f} bits, {modules} modules")
        if best is None or codelength < best.codelength:
            best = SearchResult(
                partition=partition,
                codelength=codelength,
                one_module_codelength=one_module,
                trial=trial,
                markov_time=fm.markov_time,
                hierarchy=hierarchy,
            )
    return best

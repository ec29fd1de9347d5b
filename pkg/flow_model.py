"""Ergodic visit rates, link flows and Markov-time rescaling.

Flow rescaling keeps every node visit rate and multiplies every link flow by
the Markov time t, so exit and enter rates of any module scale linearly
without rebuilding the network. The dense matrices at the bottom of this
module are desk-scale oracles used to check that claim.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy.stats import poisson

import config
from network import Network, TransitionView, transition_view


class ConvergenceError(RuntimeError):
    """Power iteration did not reach the requested tolerance."""

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"power iteration failed to converge in {iterations} iterations (L1 residual {residual:.3e})"
        )


class DenseCapError(ValueError):
    """A dense oracle was requested for a network above the node cap."""

    def __init__(self, node_count: int, cap: int):
        self.node_count = node_count
        self.cap = cap
        super().__init__(f"dense matrices are capped at {cap} nodes, network has {node_count}")


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.asarray(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class FlowModel:
    """
    Node visit rates and directed link flows at one Markov time.

    ``leaf_visit_rate`` / ``leaf_node`` are set on aggregated models: they
    keep the visit rates of the original nodes and the coarse node each one
    belongs to, so code lengths of coarse partitions equal those of their
    fine preimages.
    """

    node_count: int
    visit_rate: np.ndarray
    link_sources: np.ndarray
    link_targets: np.ndarray
    link_flow: np.ndarray
    markov_time: float = 1.0
    directed: bool = False
    feature_mask: Optional[np.ndarray] = None
    leaf_visit_rate: Optional[np.ndarray] = None
    leaf_node: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("visit_rate", "link_sources", "link_targets", "link_flow", "feature_mask",
                     "leaf_visit_rate", "leaf_node"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, _frozen(value))

    @property
    def link_count(self) -> int:
        return len(self.link_flow)

    def leaf_rates(self) -> tuple[np.ndarray, np.ndarray]:
        """Original-node visit rates and the node of this model each one maps to."""
        if self.leaf_visit_rate is None:
            return self.visit_rate, np.arange(self.node_count)
        return self.leaf_visit_rate, self.leaf_node


@dataclass(frozen=True, eq=False)
class DenseTransition:
    """Dense transition matrix evaluated at one Markov time (test oracle only)."""

    matrix: np.ndarray
    markov_time: float
    kind: str

    def to_csv(self, path: str):
        pd.DataFrame(self.matrix).to_csv(path, index=False, header=False)


def closed_form_visit_rates(tv: TransitionView) -> np.ndarray:
    """Strength-proportional visit rates, exact for undirected networks."""
    return tv.out_strength / tv.out_strength.sum()


def power_iteration(
    tv: TransitionView,
    teleport: float,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> np.ndarray:
    """
    Stationary distribution by power iteration with uniform teleportation.

    Args:
        tv: Transition rows
        teleport: Teleportation probability in [0, 1)
        tol: Iteration stops once the L1 change of one step drops below tol
            (default node_count * POWER_ITERATION_TOL)
        max_iter: Iteration budget (default from config)

    Dangling-node mass is redistributed uniformly every iteration.
    """
    if tol is None:
        tol = tv.node_count * config.POWER_ITERATION_TOL
    if max_iter is None:
        max_iter = config.POWER_ITERATION_MAX_ITER
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if not 0 <= teleport < 1:
        raise ValueError(f"teleport must lie in [0, 1), got {teleport}")
    if tol <= 0:
        raise ValueError("tol must be positive")

    n = tv.node_count
    transposed = tv.to_sparse().T.tocsr()
    dangling = tv.dangling
    x = np.full(n, 1.0 / n)
    residual = np.inf
    for iteration in range(1, max_iter + 1):
        dangling_mass = x[dangling].sum()
        x_next = (1.0 - teleport) * (transposed @ x + dangling_mass / n) + teleport / n
        x_next /= x_next.sum()
        residual = np.abs(x_next - x).sum()
        x = x_next
        if residual < tol:
            return x
    raise ConvergenceError(residual, max_iter)


def stationary_visit_rates(
    tv: TransitionView,
    teleport: Optional[float] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> np.ndarray:
    """
    Ergodic node visit rates.

    Undirected networks use the strength-proportional closed form (no
    teleportation is needed); directed networks use power iteration with
    teleportation (default from config).
    """
    if teleport is None:
        teleport = config.DIRECTED_TELEPORT if tv.directed else 0.0
    if not 0 <= teleport < 1:
        raise ValueError(f"teleport must lie in [0, 1), got {teleport}")
    if not tv.directed:
        return closed_form_visit_rates(tv)
    return power_iteration(tv, teleport, tol, max_iter)


def _unit_link_flows(tv: TransitionView, visit_rate: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    sources = tv.row_sources()
    return sources, tv.indices, visit_rate[sources] * tv.probabilities


def build_flow_model(
    net: Network,
    t: Optional[float] = None,
    teleport: Optional[float] = None,
    tv: Optional[TransitionView] = None,
) -> FlowModel:
    """
    Flow model at Markov time t by direct flow rescaling.

    Visit rates are those of Markov time 1; every link flow is multiplied by t.
    Teleportation steps of directed networks are not recorded as link flow.
    """
    t = config.MARKOV_TIME if t is None else t
    if not t > 0:
        raise ValueError(f"Markov time must be positive, got {t}")
    if tv is None:
        tv = transition_view(net)
    visit_rate = stationary_visit_rates(tv, teleport)
    sources, targets, unit_flow = _unit_link_flows(tv, visit_rate)
    return FlowModel(
        node_count=net.node_count,
        visit_rate=visit_rate,
        link_sources=sources,
        link_targets=targets,
        link_flow=unit_flow * t,
        markov_time=float(t),
        directed=net.directed,
        feature_mask=net.feature_mask,
    )


def bipartite_flow_model(net: Network) -> FlowModel:
    """
    Bipartite dynamics: a two-step walker released on primary nodes.

    Equivalent to Markov time 2 where only primary visits are encoded:
    primary visit rates double, feature visit rates become 0 and every
    link flow doubles.
    """
    if not net.is_bipartite:
        raise ValueError("bipartite dynamics require a bipartite network")
    if net.directed:
        raise ValueError("bipartite dynamics require an undirected network")
    tv = transition_view(net)
    visit_rate = closed_form_visit_rates(tv)
    sources, targets, unit_flow = _unit_link_flows(tv, visit_rate)
    return FlowModel(
        node_count=net.node_count,
        visit_rate=np.where(net.feature_mask, 0.0, 2.0 * visit_rate),
        link_sources=sources,
        link_targets=targets,
        link_flow=unit_flow * 2.0,
        markov_time=2.0,
        directed=False,
        feature_mask=net.feature_mask,
    )


def check_dense_cap(node_count: int, cap: Optional[int] = None):
    if cap is None:
        cap = config.DENSE_NODE_CAP
    if node_count > cap:
        raise DenseCapError(node_count, cap)


def dense_transition_matrix(tv: TransitionView, cap: Optional[int] = None) -> np.ndarray:
    """Dense T_D; dangling rows become uniform so every row is stochastic."""
    check_dense_cap(tv.node_count, cap)
    matrix = tv.to_sparse().toarray()
    matrix[tv.dangling] = 1.0 / tv.node_count
    return matrix


def dense_linearized(tv: TransitionView, t: float, cap: Optional[int] = None) -> DenseTransition:
    """
    Linearized transition matrix: (1-t)I + tT_D below Markov time 1, tT_D from 1 on.

    For t > 1 the entries are transition rates rather than probabilities.
    """
    if not t > 0:
        raise ValueError(f"Markov time must be positive, got {t}")
    base = dense_transition_matrix(tv, cap)
    if t < 1:
        matrix = (1.0 - t) * np.eye(tv.node_count) + t * base
    else:
        matrix = t * base
    return DenseTransition(matrix=matrix, markov_time=float(t), kind="linearized")


def dense_continuous(
    tv: TransitionView,
    t: float,
    tail_tol: Optional[float] = None,
    cap: Optional[int] = None,
) -> DenseTransition:
    """
    Continuous-time transition matrix e^{-t(I-T_D)} as a Poisson-weighted power series.

    The series stops once the remaining Poisson tail mass drops below tail_tol.
    """
    if tail_tol is None:
        tail_tol = config.CONTINUOUS_TAIL_TOL
    if not t > 0:
        raise ValueError(f"Markov time must be positive, got {t}")
    if tail_tol <= 0:
        raise ValueError("tail_tol must be positive")
    base = dense_transition_matrix(tv, cap)
    power = np.eye(tv.node_count)
    matrix = np.zeros_like(power)
    steps = 0
    while True:
        matrix += poisson.pmf(steps, t) * power
        if poisson.sf(steps, t) < tail_tol:
            break
        power = power @ base
        steps += 1
    return DenseTransition(matrix=matrix, markov_time=float(t), kind="continuous")


def flow_model_from_dense(
    dense: DenseTransition,
    visit_rate: np.ndarray,
    directed: bool = True,
) -> FlowModel:
    """
    Flow model of a reconstructed network whose transitions are ``dense``.

    Link flows are p_a * T_ab for a != b; the diagonal only holds the walker
    in place and never crosses a module boundary. The flows already describe
    Markov time ``dense.markov_time`` and are not rescaled again.
    """
    matrix = dense.matrix
    flows = visit_rate[:, None] * matrix
    np.fill_diagonal(flows, 0.0)
    sources, targets = np.nonzero(flows)
    return FlowModel(
        node_count=matrix.shape[0],
        visit_rate=np.asarray(visit_rate, dtype=np.float64),
        link_sources=sources,
        link_targets=targets,
        link_flow=flows[sources, targets],
        markov_time=dense.markov_time,
        directed=directed,
    )

"""
Entropy rate of the continuous-time walk and the compression gap L(t) - h(t).

The entropy rate is computed exactly from the dense continuous-time matrix
on small networks, or estimated on the original sparse network by running
Poisson-length walks from start nodes drawn by visit rate.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import pandas as pd
from scipy.special import entr

import config
from flow_model import DenseTransition, build_flow_model, check_dense_cap, dense_continuous
from network import Network, TransitionView, transition_view
from search import SearchConfig, optimize

ENTROPY_MODES = ("none", "exact", "sampled")


@dataclass(frozen=True)
class EntropySample:
    markov_time: float
    estimate: float
    start_samples: int
    walks_per_start: int
    standard_error: float


def exact_entropy_rate(tc: DenseTransition, visit_rates: np.ndarray) -> float:
    """-sum_ab p_a T_ab log2 T_ab over the dense continuous-time matrix."""
    if tc.kind != "continuous":
        raise ValueError("the entropy rate needs the continuous-time matrix, not the linearized one")
    rows = entr(tc.matrix).sum(axis=1) / math.log(2)
    return float(np.dot(visit_rates, rows))


def _cumulative_keys(tv: TransitionView) -> np.ndarray:
    """Per transition, row index + cumulative probability within the row; row ends are exactly row + 1."""
    cumulative = np.cumsum(tv.probabilities)
    lengths = np.diff(tv.indptr)
    before = np.concatenate([[0.0], cumulative])[tv.indptr[:-1]]
    within = cumulative - np.repeat(before, lengths)
    ends = tv.indptr[1:][lengths > 0] - 1
    within[ends] = 1.0
    return tv.row_sources() + within


def _walk(tv: TransitionView, keys: np.ndarray, positions: np.ndarray, lengths: np.ndarray, rng) -> np.ndarray:
    """Advance every walker ``lengths`` steps; walkers on dangling nodes jump uniformly."""
    positions = positions.copy()
    last = max(len(keys) - 1, 0)
    step = 0
    while True:
        active = np.flatnonzero(lengths > step)
        if not len(active):
            return positions
        nodes = positions[active]
        draws = rng.random(len(active))
        jumps = rng.integers(0, tv.node_count, size=len(active))
        if len(keys):
            slot = np.minimum(np.searchsorted(keys, nodes + draws, side="right"), last)
            following = tv.indices[slot]
        else:
            following = jumps
        positions[active] = np.where(tv.dangling[nodes], jumps, following)
        step += 1


def sampled_entropy_rate(
    tv: TransitionView,
    visit_rates: np.ndarray,
    t: float,
    starts: Optional[int] = None,
    walks: Optional[int] = None,
    rng=None,
) -> EntropySample:
    """
    Random-walk estimate of the continuous-time entropy rate.

    Args:
        tv: Transition rows of the original network
        visit_rates: Ergodic visit rates used to draw start nodes
        t: Markov time, the mean Poisson walk length
        starts: Start nodes drawn with replacement (default from config)
        walks: Walks per start node (default from config)
        rng: numpy Generator

    Each start contributes the plug-in entropy of its empirical end-node
    distribution; the estimate is their mean. Walks of length 0 end where
    they start.
    """
    if starts is None:
        starts = config.ENTROPY_STARTS
    if walks is None:
        walks = config.ENTROPY_WALKS
    if starts < 1 or walks < 1:
        raise ValueError("starts and walks must be >= 1")
    if not t > 0:
        raise ValueError(f"Markov time must be positive, got {t}")
    rng = rng if rng is not None else np.random.default_rng(config.SEED)

    p = np.asarray(visit_rates, dtype=np.float64)
    start_nodes = rng.choice(tv.node_count, size=starts, p=p / p.sum())
    lengths = rng.poisson(t, size=starts * walks)
    ends = _walk(tv, _cumulative_keys(tv), np.repeat(start_nodes, walks), lengths, rng)

    walk_start = np.repeat(np.arange(starts), walks)
    pairs, counts = np.unique(walk_start * tv.node_count + ends, return_counts=True)
    per_start = np.bincount(pairs // tv.node_count, weights=entr(counts / walks), minlength=starts) / math.log(2)

    standard_error = float(per_start.std(ddof=1) / math.sqrt(starts)) if starts > 1 else 0.0
    return EntropySample(
        markov_time=float(t),
        estimate=float(max(per_start.mean(), 0.0)),
        start_samples=starts,
        walks_per_start=walks,
        standard_error=standard_error,
    )


def compression_gap(L: float, h: float) -> float:
    """Absolute compression gap; negative values are kept."""
    return L - h


def markov_time_sweep(
    net: Network,
    t_grid: Iterable[float],
    entropy: str = "none",
    cfg: Optional[SearchConfig] = None,
    teleport: Optional[float] = None,
    starts: Optional[int] = None,
    walks: Optional[int] = None,
    seed: Optional[int] = None,
    verbose: bool = False,
) -> pd.DataFrame:
    """
    Optimal two-level code length, module count and optional entropy rate per Markov time.

    Args:
        net: Network to sweep
        t_grid: Markov times, evaluated in the given order
        entropy: "none", "exact" (dense oracle, node cap applies) or "sampled"
        cfg: Search settings; mode is forced to two-level
        teleport: Teleportation for directed networks
        starts: Start nodes per sampled estimate
        walks: Walks per start node
        seed: Root seed of the sampled estimates
        verbose: Print one progress line per Markov time

    Returns:
        DataFrame with columns t, L_two_level, [h, gap,] modules [, stderr]
    """
    t_grid = [float(t) for t in t_grid]
    if not t_grid:
        raise ValueError("Markov time grid is empty")
    if entropy not in ENTROPY_MODES:
        raise ValueError(f"Unknown entropy mode: {entropy}")
    if entropy == "exact":
        check_dense_cap(net.node_count)
    seed = config.SEED if seed is None else seed
    cfg = cfg or SearchConfig()
    if cfg.mode != "two-level":
        cfg = SearchConfig(cfg.trials, cfg.seed, cfg.tune_iterations, cfg.min_improvement, "two-level")

    tv = transition_view(net)
    rows = []
    for i, t in enumerate(t_grid):
        fm = build_flow_model(net, t, teleport, tv=tv)
        result = optimize(fm, cfg)
        row = {"t": t, "L_two_level": result.codelength}
        if entropy == "exact":
            row["h"] = exact_entropy_rate(dense_continuous(tv, t), fm.visit_rate)
        elif entropy == "sampled":
            sample = sampled_entropy_rate(tv, fm.visit_rate, t, starts, walks, np.random.default_rng([seed, i]))
            row["h"] = sample.estimate
            row["stderr"] = sample.standard_error
        if "h" in row:
            row["gap"] = compression_gap(row["L_two_level"], row["h"])
        row["modules"] = result.partition.module_count
        rows.append(row)
        if verbose:
            print(f"  {i + 1}/{len(t_grid)} - t={t:g}: L={result.codelength:.6f} bits, {row['modules']} modules")

    columns = ["t", "L_two_level"]
    if entropy != "none":
        columns += ["h", "gap"]
    columns.append("modules")
    if entropy == "sampled":
        columns.append("stderr")
    return pd.DataFrame(rows, columns=columns)


def local_minima(df: pd.DataFrame, column: str = "gap") -> list[float]:
    """Markov times at interior strict local minima of ``column``."""
    ordered = df.sort_values("t")
    values = ordered[column].to_numpy()
    times = ordered["t"].to_numpy()
    return [
        float(times[i])
        for i in range(1, len(values) - 1)
        if values[i] < values[i - 1] and values[i] < values[i + 1]
    ]

"""
Fast projection of a bipartite network onto its primary nodes.

Every feature keeps only its top-X primary neighbors by link weight (ties in
seeded random order). A primary's candidate set is the union of the kept
lists of its features; it links to the Y candidates with the highest
two-step walk probability, computed over all features the pair shares.
Nothing of size primaries x primaries is ever materialized.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

import config
from network import Network, biadjacency


@dataclass(frozen=True)
class FastProjectionParams:
    top_x: int = field(default_factory=lambda: config.FAST_PROJECTION_X)
    top_y: int = field(default_factory=lambda: config.FAST_PROJECTION_Y)
    seed: int = field(default_factory=lambda: config.SEED)

    def __post_init__(self):
        if self.top_x < 1 or self.top_y < 1:
            raise ValueError("top_x and top_y must be >= 1")


def _gather(matrix: sp.csr_matrix, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positions in ``matrix.indices`` of the given rows' entries, and the index into ``rows`` each came from."""
    starts = matrix.indptr[rows]
    lengths = matrix.indptr[rows + 1] - starts
    total = int(lengths.sum())
    offsets = np.repeat(starts - (np.cumsum(lengths) - lengths), lengths)
    return np.arange(total) + offsets, np.repeat(np.arange(len(rows)), lengths)


def _kept_primaries(feature_rows: sp.csr_matrix, top_x: int, rng) -> sp.csr_matrix:
    """Feature x primary pattern of the top-X primaries of every feature."""
    indptr, indices, data = feature_rows.indptr, feature_rows.indices, feature_rows.data
    kept_rows, kept_cols = [], []
    degrees = np.diff(indptr)
    small = degrees <= top_x
    entry_feature = np.repeat(np.arange(feature_rows.shape[0]), degrees)
    small_entries = small[entry_feature]
    kept_rows.append(entry_feature[small_entries])
    kept_cols.append(indices[small_entries])
    for feature in np.flatnonzero(~small):
        start, end = indptr[feature], indptr[feature + 1]
        shuffled = rng.permutation(end - start)
        order = shuffled[np.argsort(-data[start:end][shuffled], kind="stable")]
        kept_rows.append(np.full(top_x, feature))
        kept_cols.append(indices[start:end][order[:top_x]])
    rows, cols = np.concatenate(kept_rows), np.concatenate(kept_cols)
    kept = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=feature_rows.shape)
    kept.sort_indices()
    return kept


class _Projector:
    def __init__(self, net: Network, params: FastProjectionParams):
        self.matrix, self.primaries, self.features = biadjacency(net)
        self.primary_strength = np.asarray(self.matrix.sum(axis=1)).ravel()
        self.feature_strength = np.asarray(self.matrix.sum(axis=0)).ravel()
        self.kept = _kept_primaries(self.matrix.T.tocsr(), params.top_x, np.random.default_rng(params.seed))

    def candidates(self, primary: int) -> np.ndarray:
        features = self.matrix.indices[self.matrix.indptr[primary]:self.matrix.indptr[primary + 1]]
        positions, _ = _gather(self.kept, features)
        found = np.unique(self.kept.indices[positions])
        return found[found != primary]

    def two_step(self, primary: int, candidates: np.ndarray) -> np.ndarray:
        """P(primary -> candidate) in two steps, summed over shared features."""
        start, end = self.matrix.indptr[primary], self.matrix.indptr[primary + 1]
        features, weights = self.matrix.indices[start:end], self.matrix.data[start:end]
        positions, owner = _gather(self.matrix, candidates)
        their_features = self.matrix.indices[positions]
        slot = np.minimum(np.searchsorted(features, their_features), len(features) - 1)
        shared = features[slot] == their_features
        flow = (
            weights[slot[shared]] / self.primary_strength[primary]
            * self.matrix.data[positions[shared]] / self.feature_strength[their_features[shared]]
        )
        return np.bincount(owner[shared], weights=flow, minlength=len(candidates))


def fast_projection(net: Network, params: Optional[FastProjectionParams] = None, verbose: bool = False) -> Network:
    """
    Sparse directed projection onto primary nodes.

    Args:
        net: Undirected bipartite network
        params: top_x, top_y and the tie-shuffle seed (defaults from config)
        verbose: Print progress every 10,000 primaries

    Returns:
        Directed network over the primaries (ids in primary order, original
        labels kept) whose link a -> b carries the two-step probability.
        Top-Y ties go to the smaller node id.
    """
    params = params or FastProjectionParams()
    projector = _Projector(net, params)
    primary_count = len(projector.primaries)
    sources, targets, weights = [], [], []
    for a in range(primary_count):
        candidates = projector.candidates(a)
        if len(candidates):
            probability = projector.two_step(a, candidates)
            best = np.lexsort((candidates, -probability))[:params.top_y]
            best = best[probability[best] > 0]
            sources.append(np.full(len(best), a))
            targets.append(candidates[best])
            weights.append(probability[best])
        if verbose and (a + 1) % 10000 == 0:
            print(f"  Projected {a + 1}/{primary_count} primaries")

    names = None
    if net.node_names is not None:
        names = [net.node_names[node] for node in projector.primaries]
    empty = [np.zeros(0)]
    return Network.from_arrays(
        primary_count,
        np.concatenate(sources or empty).astype(np.int64),
        np.concatenate(targets or empty).astype(np.int64),
        np.concatenate(weights or empty),
        directed=True,
        node_labels=[net.node_labels[node] for node in projector.primaries],
        node_names=names,
    )


def candidate_stats(net: Network, params: Optional[FastProjectionParams] = None) -> np.ndarray:
    """Candidate-set size of every primary (in primary order); ``np.bincount`` of it is the histogram."""
    params = params or FastProjectionParams()
    projector = _Projector(net, params)
    return np.array([len(projector.candidates(a)) for a in range(len(projector.primaries))], dtype=np.int64)

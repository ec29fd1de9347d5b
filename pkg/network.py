"""Weighted sparse networks: parsing, serialization, transition rows and the full bipartite projection.

Supported input formats:
- edge-list: whitespace-separated ``src dst [weight]`` lines, ``#`` comments
- pajek: ``*Vertices N`` with quoted names, then ``*Edges`` / ``*Arcs``
- bipartite-edge-list: an edge list led by ``*Bipartite <first-feature-id>``
"""

import shlex
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import scipy.sparse as sp

FORMATS = ("edge-list", "pajek", "bipartite-edge-list")


class NetworkFormatError(ValueError):
    """Raised when a network file or link set violates its format."""

    def __init__(self, message: str, line_number: Optional[int] = None, line: Optional[str] = None):
        self.line_number = line_number
        self.line = line
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Network:
    """
    Immutable weighted network with contiguous 0-based node ids.

    Undirected networks store each link once. ``feature_mask`` is set iff the
    network is bipartite; True marks feature nodes, False primary nodes.
    """

    node_count: int
    sources: np.ndarray
    targets: np.ndarray
    weights: np.ndarray
    directed: bool = False
    node_labels: tuple[str, ...] = ()
    node_names: Optional[tuple[str, ...]] = None
    feature_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.node_labels:
            object.__setattr__(self, "node_labels", tuple(str(i) for i in range(self.node_count)))
        if len(self.node_labels) != self.node_count:
            raise ValueError("node_labels must have one entry per node")
        if self.node_names is not None and len(self.node_names) != self.node_count:
            raise ValueError("node_names must have one entry per node")

        sources = np.asarray(self.sources, dtype=np.int64)
        targets = np.asarray(self.targets, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if not (len(sources) == len(targets) == len(weights)):
            raise ValueError("sources, targets and weights must have equal length")
        if len(weights) and not np.all(weights > 0):
            raise NetworkFormatError("link weights must be strictly positive")
        if len(sources) and (
            sources.min() < 0 or targets.min() < 0
            or sources.max() >= self.node_count or targets.max() >= self.node_count
        ):
            raise ValueError(f"node ids must lie in [0, {self.node_count})")

        object.__setattr__(self, "sources", _frozen(sources))
        object.__setattr__(self, "targets", _frozen(targets))
        object.__setattr__(self, "weights", _frozen(weights))

        if self.feature_mask is not None:
            mask = np.asarray(self.feature_mask, dtype=bool)
            if len(mask) != self.node_count:
                raise ValueError("feature_mask must have one entry per node")
            if np.any(mask[sources] == mask[targets]):
                raise NetworkFormatError("bipartite links must connect a primary node to a feature node")
            object.__setattr__(self, "feature_mask", _frozen(mask))

    @classmethod
    def from_links(
        cls,
        node_count: int,
        links: Iterable[tuple[int, int, float]],
        directed: bool = False,
        node_labels: Optional[Iterable[str]] = None,
        node_names: Optional[Iterable[str]] = None,
        feature_mask: Optional[np.ndarray] = None,
    ) -> "Network":
        """
        Build a network from (source, target, weight) triples.

        Repeated links are merged by summing their weights; for undirected
        networks (a, b) and (b, a) are the same link.
        """
        triples = list(links)
        if triples:
            sources, targets, weights = (np.asarray(column) for column in zip(*triples))
        else:
            sources = targets = np.zeros(0, dtype=np.int64)
            weights = np.zeros(0, dtype=np.float64)
        return cls.from_arrays(
            node_count, sources, targets, weights, directed,
            node_labels=node_labels, node_names=node_names, feature_mask=feature_mask,
        )

    @classmethod
    def from_arrays(
        cls,
        node_count: int,
        sources: np.ndarray,
        targets: np.ndarray,
        weights: np.ndarray,
        directed: bool = False,
        node_labels: Optional[Iterable[str]] = None,
        node_names: Optional[Iterable[str]] = None,
        feature_mask: Optional[np.ndarray] = None,
    ) -> "Network":
        """Array version of ``from_links``; merges duplicates the same way."""
        sources = np.asarray(sources, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.float64)
        if len(weights) and not np.all(weights > 0):
            raise NetworkFormatError("link weights must be strictly positive")
        if len(sources) and (min(sources.min(), targets.min()) < 0 or max(sources.max(), targets.max()) >= node_count):
            raise ValueError(f"node ids must lie in [0, {node_count})")
        if not directed:
            sources, targets = np.minimum(sources, targets), np.maximum(sources, targets)
        keys = sources * max(node_count, 1) + targets
        unique_keys, inverse = np.unique(keys, return_inverse=True)
        merged = np.bincount(inverse, weights=weights, minlength=len(unique_keys))
        return cls(
            node_count=node_count,
            sources=unique_keys // max(node_count, 1),
            targets=unique_keys % max(node_count, 1),
            weights=merged,
            directed=directed,
            node_labels=tuple(node_labels) if node_labels is not None else (),
            node_names=tuple(node_names) if node_names is not None else None,
            feature_mask=feature_mask,
        )

    @property
    def link_count(self) -> int:
        return len(self.weights)

    @property
    def is_bipartite(self) -> bool:
        return self.feature_mask is not None

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def strength(self) -> np.ndarray:
        """Out-strength for directed networks; incident weight (self-links once) for undirected."""
        strength = np.bincount(self.sources, weights=self.weights, minlength=self.node_count)
        if not self.directed:
            cross = self.sources != self.targets
            strength += np.bincount(self.targets[cross], weights=self.weights[cross], minlength=self.node_count)
        return strength

    def primary_nodes(self) -> np.ndarray:
        if self.feature_mask is None:
            return np.arange(self.node_count)
        return np.flatnonzero(~self.feature_mask)

    def feature_nodes(self) -> np.ndarray:
        if self.feature_mask is None:
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(self.feature_mask)

    def name_of(self, node: int) -> str:
        if self.node_names is not None:
            return self.node_names[node]
        return self.node_labels[node]

    def same_links(self, other: "Network") -> bool:
        """True when both networks carry identical links, weights, roles and directedness."""
        roles_equal = (
            (self.feature_mask is None and other.feature_mask is None)
            or (
                self.feature_mask is not None and other.feature_mask is not None
                and np.array_equal(self.feature_mask, other.feature_mask)
            )
        )
        return (
            self.node_count == other.node_count
            and self.directed == other.directed
            and roles_equal
            and np.array_equal(self.sources, other.sources)
            and np.array_equal(self.targets, other.targets)
            and np.array_equal(self.weights, other.weights)
        )


@dataclass(frozen=True, eq=False)
class TransitionView:
    """Row-normalized out-neighbor lists in CSR layout; rows of dangling nodes are empty."""

    node_count: int
    directed: bool
    out_strength: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    probabilities: np.ndarray
    dangling: np.ndarray

    def row(self, node: int) -> tuple[np.ndarray, np.ndarray]:
        start, end = self.indptr[node], self.indptr[node + 1]
        return self.indices[start:end], self.probabilities[start:end]

    def row_sources(self) -> np.ndarray:
        """Source node of every stored transition, aligned with ``indices``."""
        return np.repeat(np.arange(self.node_count), np.diff(self.indptr))

    def to_sparse(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.probabilities, self.indices, self.indptr),
            shape=(self.node_count, self.node_count),
        )


def directed_arcs(net: Network) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Both directions of every undirected link (self-links once); directed links as stored."""
    if net.directed:
        return net.sources, net.targets, net.weights
    cross = net.sources != net.targets
    sources = np.concatenate([net.sources, net.targets[cross]])
    targets = np.concatenate([net.targets, net.sources[cross]])
    weights = np.concatenate([net.weights, net.weights[cross]])
    return sources, targets, weights


def transition_view(net: Network) -> TransitionView:
    """
    Materialize the rows of the discrete-time transition matrix.

    Dangling nodes (zero out-strength) keep an empty row and are flagged;
    the flow model decides how to treat them.
    """
    if net.node_count == 0:
        raise ValueError("network is empty")
    sources, targets, weights = directed_arcs(net)
    matrix = sp.csr_matrix((weights, (sources, targets)), shape=(net.node_count, net.node_count))
    matrix.sum_duplicates()
    matrix.sort_indices()
    out_strength = np.bincount(sources, weights=weights, minlength=net.node_count)
    dangling = out_strength == 0
    row_of = np.repeat(np.arange(net.node_count), np.diff(matrix.indptr))
    probabilities = matrix.data / out_strength[row_of]
    return TransitionView(
        node_count=net.node_count,
        directed=net.directed,
        out_strength=_frozen(out_strength),
        indptr=_frozen(matrix.indptr.astype(np.int64)),
        indices=_frozen(matrix.indices.astype(np.int64)),
        probabilities=_frozen(probabilities),
        dangling=_frozen(dangling),
    )


def _require_bipartite(net: Network):
    if not net.is_bipartite:
        raise ValueError("operation requires a bipartite network")
    if net.directed:
        raise ValueError("operation requires an undirected bipartite network")


def biadjacency(net: Network) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
    """Primary x feature weight matrix plus the primary and feature node ids it indexes."""
    _require_bipartite(net)
    primaries = net.primary_nodes()
    features = net.feature_nodes()
    position = np.empty(net.node_count, dtype=np.int64)
    position[primaries] = np.arange(len(primaries))
    position[features] = np.arange(len(features))
    source_is_feature = net.feature_mask[net.sources]
    rows = np.where(source_is_feature, position[net.targets], position[net.sources])
    cols = np.where(source_is_feature, position[net.sources], position[net.targets])
    matrix = sp.csr_matrix((net.weights, (rows, cols)), shape=(len(primaries), len(features)))
    matrix.sum_duplicates()
    matrix.sort_indices()
    return matrix, primaries, features


def project_bipartite_full(net: Network) -> Network:
    """
    Exact unipartite projection onto primary nodes.

    The weight between primaries a and b is the two-step random-walk flow
    ``sum_f w_af * w_fb / s_f``. Self-projections stay as self-links so the
    primary strengths, and with them the visit rates, are conserved.
    """
    matrix, primaries, _ = biadjacency(net)
    feature_strength = np.asarray(matrix.sum(axis=0)).ravel()
    scale = sp.diags(np.divide(1.0, feature_strength, out=np.zeros_like(feature_strength), where=feature_strength > 0))
    projected = sp.triu(matrix @ scale @ matrix.T).tocoo()
    keep = projected.data > 0
    names = None
    if net.node_names is not None:
        names = [net.node_names[node] for node in primaries]
    return Network.from_arrays(
        len(primaries),
        projected.row[keep],
        projected.col[keep],
        projected.data[keep],
        directed=False,
        node_labels=[net.node_labels[node] for node in primaries],
        node_names=names,
    )


def _label_order(labels: list[str]) -> list[str]:
    """Numeric labels sort numerically; anything else keeps first-appearance order."""
    try:
        return sorted(labels, key=int)
    except ValueError:
        return labels


def _parse_link(parts: list[str], line_number: int, line: str) -> tuple[str, str, float]:
    if len(parts) not in (2, 3):
        raise NetworkFormatError("expected 'src dst [weight]'", line_number, line)
    try:
        weight = float(parts[2]) if len(parts) == 3 else 1.0
    except ValueError:
        raise NetworkFormatError(f"weight '{parts[2]}' is not a number", line_number, line) from None
    if not weight > 0:
        raise NetworkFormatError(f"non-positive weight {weight}", line_number, line)
    return parts[0], parts[1], weight


def _read_edge_lines(lines: list[str], start: int = 0) -> list[tuple[int, str, str, float, str]]:
    links = []
    for index in range(start, len(lines)):
        line = lines[index]
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        src, dst, weight = _parse_link(stripped.split(), index + 1, line)
        links.append((index + 1, src, dst, weight, line))
    return links


def _read_directives(lines: list[str]) -> dict:
    """
    Collect ``#!`` comment directives written by ``write_network``.

    ``#! directed`` / ``#! undirected`` fix the link direction and
    ``#! nodes <label> ...`` lines (repeatable) fix node order, including
    nodes without links.
    """
    directives = {}
    for i, line in enumerate(lines):
        stripped = line.strip()
        if not stripped.startswith("#!"):
            continue
        try:
            parts = shlex.split(stripped[2:])
        except ValueError:
            raise NetworkFormatError("unbalanced quotes in directive", i + 1, line) from None
        if not parts:
            continue
        keyword = parts[0].lower()
        if keyword in ("directed", "undirected"):
            directives["directed"] = keyword == "directed"
        elif keyword == "nodes":
            directives.setdefault("nodes", []).extend(parts[1:])
        else:
            raise NetworkFormatError(f"unknown directive '{parts[0]}'", i + 1, line)
    return directives


def _declared_index(labels: list[str], links: list[tuple[int, str, str, float, str]]) -> dict[str, int]:
    index = {}
    for label in labels:
        if label in index:
            raise NetworkFormatError(f"node '{label}' declared twice")
        index[label] = len(index)
    for line_number, src, dst, _, line in links:
        for node in (src, dst):
            if node not in index:
                raise NetworkFormatError(f"link references undeclared node '{node}'", line_number, line)
    return index


def _node_directive_lines(labels: list[str], per_line: int = 1000) -> list[str]:
    return [f"#! nodes {shlex.join(labels[i:i + per_line])}" for i in range(0, len(labels), per_line)]


def _parse_edge_list(lines: list[str], directed: Optional[bool]) -> Network:
    directives = _read_directives(lines)
    if directed is None:
        directed = directives.get("directed", False)
    links = _read_edge_lines(lines)
    if "nodes" in directives:
        labels = directives["nodes"]
        index = _declared_index(labels, links)
        return Network.from_links(
            len(labels),
            [(index[src], index[dst], weight) for _, src, dst, weight, _ in links],
            directed=directed,
            node_labels=labels,
        )
    seen = {}
    for _, src, dst, _, _ in links:
        seen.setdefault(src, None)
        seen.setdefault(dst, None)
    labels = _label_order(list(seen))
    index = {label: i for i, label in enumerate(labels)}
    return Network.from_links(
        len(labels),
        [(index[src], index[dst], weight) for _, src, dst, weight, _ in links],
        directed=directed,
        node_labels=labels,
    )


def _parse_bipartite_edge_list(lines: list[str]) -> Network:
    header_index = None
    boundary = None
    for i, line in enumerate(lines):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        parts = stripped.split()
        if parts[0].lower() != "*bipartite" or len(parts) != 2:
            raise NetworkFormatError("expected leading '*Bipartite <first-feature-id>' directive", i + 1, line)
        try:
            boundary = int(parts[1])
        except ValueError:
            raise NetworkFormatError("feature boundary must be an integer id", i + 1, line) from None
        header_index = i
        break
    if header_index is None:
        raise NetworkFormatError("missing '*Bipartite' directive")

    links = []
    primaries, features = set(), set()
    for line_number, src, dst, weight, line in _read_edge_lines(lines, header_index + 1):
        try:
            ids = (int(src), int(dst))
        except ValueError:
            raise NetworkFormatError("bipartite node ids must be integers", line_number, line) from None
        roles = [node_id >= boundary for node_id in ids]
        if roles[0] == roles[1]:
            kind = "feature" if roles[0] else "primary"
            raise NetworkFormatError(f"same-role link between two {kind} nodes", line_number, line)
        for node_id, is_feature in zip(ids, roles):
            (features if is_feature else primaries).add(node_id)
        links.append((line_number, str(ids[0]), str(ids[1]), weight, line))

    directives = _read_directives(lines)
    if "nodes" in directives:
        try:
            labels = [str(int(label)) for label in directives["nodes"]]
        except ValueError:
            raise NetworkFormatError("bipartite node ids must be integers") from None
        index = _declared_index(labels, links)
        mask = np.array([int(label) >= boundary for label in labels], dtype=bool)
    else:
        labels = [str(node_id) for node_id in sorted(primaries)] + [str(node_id) for node_id in sorted(features)]
        index = {label: i for i, label in enumerate(labels)}
        mask = np.zeros(len(labels), dtype=bool)
        mask[len(primaries):] = True
    return Network.from_links(
        len(labels),
        [(index[src], index[dst], weight) for _, src, dst, weight, _ in links],
        directed=False,
        node_labels=labels,
        feature_mask=mask,
    )


def _parse_pajek(lines: list[str]) -> Network:
    section = None
    labels: list[str] = []
    names: list[str] = []
    index: dict[str, int] = {}
    arcs, edges = [], []
    declared = None

    for i, line in enumerate(lines):
        line_number = i + 1
        stripped = line.strip()
        if not stripped or stripped.startswith("%") or stripped.startswith("#"):
            continue
        if stripped.startswith("*"):
            parts = stripped.split()
            keyword = parts[0].lower()
            if keyword == "*vertices":
                try:
                    declared = int(parts[1])
                except (IndexError, ValueError):
                    raise NetworkFormatError("'*Vertices' needs a node count", line_number, line) from None
                section = "vertices"
            elif keyword in ("*edges", "*arcs"):
                section = keyword[1:]
            else:
                raise NetworkFormatError(f"unknown section '{parts[0]}'", line_number, line)
            continue

        if section == "vertices":
            try:
                parts = shlex.split(stripped)
            except ValueError:
                raise NetworkFormatError("unbalanced quotes in vertex name", line_number, line) from None
            label = parts[0]
            index[label] = len(labels)
            labels.append(label)
            names.append(parts[1] if len(parts) > 1 else label)
        elif section in ("edges", "arcs"):
            src, dst, weight = _parse_link(stripped.split()[:3], line_number, line)
            for node in (src, dst):
                if node not in index:
                    raise NetworkFormatError(f"link references undeclared vertex '{node}'", line_number, line)
            (arcs if section == "arcs" else edges).append((index[src], index[dst], weight))
        else:
            raise NetworkFormatError("data before any section header", line_number, line)

    if declared is not None and declared != len(labels):
        raise NetworkFormatError(f"'*Vertices {declared}' declared but {len(labels)} vertices listed")

    directed = bool(arcs)
    links = list(arcs)
    for src, dst, weight in edges:
        links.append((src, dst, weight))
        if directed and src != dst:
            links.append((dst, src, weight))
    return Network.from_links(len(labels), links, directed=directed, node_labels=labels, node_names=names)


def detect_format(path: str) -> str:
    """Guess the format from the first directive line."""
    with open(path, "r") as f:
        for line in f:
            stripped = line.split("#", 1)[0].strip().lower()
            if not stripped:
                continue
            if stripped.startswith("*bipartite"):
                return "bipartite-edge-list"
            if stripped.startswith("*vertices"):
                return "pajek"
            return "edge-list"
    return "edge-list"


def load_network(path: str, format: str = "auto", directed: Optional[bool] = None) -> Network:
    """
    Load a network file.

    Args:
        path: File to read
        format: One of FORMATS, or "auto" to detect from the first directive
        directed: Treat edge-list links as directed; None follows the file's
            ``#! directed`` directive and defaults to undirected (pajek
            decides by section)

    Input ids are remapped to contiguous 0-based ids; the original ids stay
    available as ``node_labels``. A ``#! nodes`` directive fixes the node
    order and keeps nodes that have no links.
    """
    if format == "auto":
        format = detect_format(path)
    if format not in FORMATS:
        raise ValueError(f"Unknown network format: {format}")
    lines = Path(path).read_text().splitlines()
    if format == "edge-list":
        return _parse_edge_list(lines, directed)
    if format == "pajek":
        return _parse_pajek(lines)
    return _parse_bipartite_edge_list(lines)


def _edge_list_labels(net: Network) -> list[str]:
    """Node labels when each is a distinct plain token, else 0-based ids."""
    labels = list(net.node_labels)
    plain = all(label and not any(char.isspace() or char in "#\"'\\" for char in label) for label in labels)
    if plain and len(set(labels)) == len(labels):
        return labels
    return [str(i) for i in range(net.node_count)]


def _bipartite_ids(net: Network) -> tuple[list[str], int]:
    """Original integer ids when they already respect the role boundary, else fresh ones."""
    primaries, features = net.primary_nodes(), net.feature_nodes()
    try:
        ids = [int(label) for label in net.node_labels]
        if len(set(ids)) == len(ids) and (
            not len(features) or not len(primaries) or max(ids[i] for i in primaries) < min(ids[i] for i in features)
        ):
            boundary = min((ids[i] for i in features), default=max((ids[i] for i in primaries), default=-1) + 1)
            return [str(i) for i in ids], boundary
    except ValueError:
        pass
    fresh = [""] * net.node_count
    for position, node in enumerate(np.concatenate([primaries, features])):
        fresh[node] = str(position)
    return fresh, len(primaries)


def write_network(net: Network, path: str, format: str = "edge-list"):
    """
    Serialize a network so that ``load_network`` reproduces it.

    Edge lists and bipartite edge lists carry ``#!`` directives with the node
    order (and direction), so node ids, isolated nodes, links, weights and
    roles all survive a reload.
    """
    lines = []
    if format == "edge-list":
        labels = _edge_list_labels(net)
        lines.append(f"#! {'directed' if net.directed else 'undirected'}")
        lines.extend(_node_directive_lines(labels))
        for src, dst, weight in zip(net.sources, net.targets, net.weights):
            lines.append(f"{labels[src]} {labels[dst]} {float(weight)!r}")
    elif format == "bipartite-edge-list":
        _require_bipartite(net)
        ids, boundary = _bipartite_ids(net)
        lines.append(f"*Bipartite {boundary}")
        lines.extend(_node_directive_lines(ids))
        for src, dst, weight in zip(net.sources, net.targets, net.weights):
            lines.append(f"{ids[src]} {ids[dst]} {float(weight)!r}")
    elif format == "pajek":
        lines.append(f"*Vertices {net.node_count}")
        for node in range(net.node_count):
            name = net.name_of(node).replace('"', "'")
            lines.append(f'{node + 1} "{name}"')
        lines.append("*Arcs" if net.directed else "*Edges")
        for src, dst, weight in zip(net.sources, net.targets, net.weights):
            lines.append(f"{src + 1} {dst + 1} {float(weight)!r}")
    else:
        raise ValueError(f"Unknown network format: {format}")
    Path(path).write_text("\n".join(lines) + "\n")

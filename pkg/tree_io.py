"""Tree files: one line per node with its module path, flow, name and id.

    # codelength 3.123456 bits
    # path flow name node_id
    1:2:1 0.0384 "alpha" 7

The path is 1-based; its last step is the node's rank inside its leaf
module. Lines are ordered by module path, then by descending flow.
"""

import shlex
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from mapeq import Hierarchy
from network import NetworkFormatError


@dataclass(frozen=True, eq=False)
class TreeFile:
    """Parsed tree file; ``hierarchy`` excludes the leaf rank and follows ``labels`` order."""

    labels: tuple[str, ...]
    names: tuple[str, ...]
    flows: np.ndarray
    hierarchy: Hierarchy
    header: dict

    def aligned_to(self, labels: tuple[str, ...]) -> Hierarchy:
        """Hierarchy re-ordered to follow ``labels``; the node sets must match."""
        if set(labels) != set(self.labels) or len(labels) != len(self.labels):
            raise ValueError("tree files cover different node sets")
        position = {label: i for i, label in enumerate(self.labels)}
        return Hierarchy(tuple(self.hierarchy.paths[position[label]] for label in labels))


def _tree_lines(hierarchy: Hierarchy, flows: np.ndarray) -> list[tuple[tuple[int, ...], int]]:
    """(1-based full path, node) pairs in file order."""
    normalized = hierarchy.normalized()
    order = sorted(range(normalized.node_count), key=lambda v: (normalized.paths[v], -flows[v], v))
    lines = []
    rank: dict = {}
    for node in order:
        path = normalized.paths[node]
        rank[path] = rank.get(path, 0) + 1
        lines.append((tuple(step + 1 for step in path) + (rank[path],), node))
    return lines


def write_tree(
    path: str,
    hierarchy: Hierarchy,
    flows: np.ndarray,
    labels: tuple[str, ...],
    names: Optional[tuple[str, ...]] = None,
    header: Optional[dict] = None,
):
    """
    Write a tree file.

    Args:
        path: Output file
        hierarchy: Module path per node
        flows: Visit rate per node
        labels: Original node id per node
        names: Display name per node (labels when omitted)
        header: Extra ``# key value`` lines written first
    """
    names = names or labels
    lines = [f"# {key} {value}" for key, value in (header or {}).items()]
    lines.append("# path flow name node_id")
    for full_path, node in _tree_lines(hierarchy, np.asarray(flows)):
        name = names[node].replace('"', "'")
        lines.append(f'{":".join(map(str, full_path))} {flows[node]:.6g} "{name}" {labels[node]}')
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


def read_tree(path: str) -> TreeFile:
    """Parse a tree file written by ``write_tree``; ``#`` lines fill ``header``."""
    labels, names, flows, paths = [], [], [], []
    header = {}
    for line_number, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            parts = stripped[1:].split(None, 1)
            if len(parts) == 2:
                header[parts[0]] = parts[1]
            continue
        try:
            fields = shlex.split(stripped)
            steps = tuple(int(step) for step in fields[0].split(":"))
            flow = float(fields[1])
        except (ValueError, IndexError):
            raise NetworkFormatError("expected 'path flow \"name\" node_id'", line_number, line) from None
        if len(fields) != 4 or len(steps) < 2 or min(steps) < 1:
            raise NetworkFormatError("expected 'path flow \"name\" node_id'", line_number, line)
        paths.append(tuple(step - 1 for step in steps[:-1]))
        flows.append(flow)
        names.append(fields[2])
        labels.append(fields[3])

    if len(set(labels)) != len(labels):
        raise NetworkFormatError("duplicate node id in tree file")
    return TreeFile(
        labels=tuple(labels),
        names=tuple(names),
        flows=np.array(flows),
        hierarchy=Hierarchy(tuple(paths)),
        header=header,
    )

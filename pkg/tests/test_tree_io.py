import numpy as np
import pytest

from mapeq import Hierarchy
from network import NetworkFormatError
from tree_io import read_tree, write_tree


def test_tree_round_trip(tmp_path):
    path = str(tmp_path / "out.tree")
    hierarchy = Hierarchy(((0, 1), (0, 0), (1,)))
    write_tree(
        path, hierarchy, np.array([0.2, 0.5, 0.3]), ("a", "b", "c"),
        names=("alpha", "beta gamma", "delta"), header={"codelength": "1.5 bits"},
    )
    tree = read_tree(path)
    assert tree.header["codelength"] == "1.5 bits"
    assert tree.labels == ("a", "b", "c")
    assert tree.names == ("alpha", "beta gamma", "delta")
    assert tree.flows.tolist() == [0.2, 0.5, 0.3]
    assert tree.aligned_to(("a", "b", "c")).leaf_partition().same_as(hierarchy.leaf_partition())
    assert tree.hierarchy.levels == 3


def test_tree_lines_ordered_by_path_then_flow(tmp_path):
    path = tmp_path / "out.tree"
    write_tree(str(path), Hierarchy(((0,), (0,), (0,))), np.array([0.1, 0.5, 0.4]), ("x", "y", "z"))
    lines = path.read_text().splitlines()
    assert lines[0] == "# path flow name node_id"
    assert lines[1:] == ['1:1 0.5 "y" y', '1:2 0.4 "z" z', '1:3 0.1 "x" x']


def test_aligned_to_reorders(tmp_path):
    path = str(tmp_path / "out.tree")
    write_tree(path, Hierarchy(((1,), (0,), (1,))), np.array([0.3, 0.3, 0.4]), ("a", "b", "c"))
    tree = read_tree(path)
    aligned = tree.aligned_to(("a", "b", "c"))
    assert aligned.top_partition().module_of.tolist() == [0, 1, 0]
    with pytest.raises(ValueError):
        tree.aligned_to(("a", "b", "d"))


@pytest.mark.parametrize("line", ["1:1 0.5", "x:1 0.5 \"a\" a", "0:1 0.5 \"a\" a", "1 0.5 \"a\" a"])
def test_malformed_tree_line(tmp_path, line):
    path = tmp_path / "bad.tree"
    path.write_text(f"# path flow name node_id\n{line}\n")
    with pytest.raises(NetworkFormatError) as info:
        read_tree(str(path))
    assert info.value.line_number == 2


def test_duplicate_node_in_tree(tmp_path):
    path = tmp_path / "dup.tree"
    path.write_text('1:1 0.5 "a" a\n1:2 0.5 "a" a\n')
    with pytest.raises(NetworkFormatError):
        read_tree(str(path))

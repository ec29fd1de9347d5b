import json

import numpy as np
import pandas as pd
import pytest

import config
from cli import EXIT_CAP, EXIT_INPUT, EXIT_OK, EXIT_USAGE, main
from conftest import clique_links
from mapeq import Hierarchy
from network import load_network
from tree_io import read_tree, write_tree


def _two_cliques_file(tmp_path):
    links = clique_links(list(range(5))) + clique_links(list(range(5, 10)))
    path = tmp_path / "cliques.txt"
    path.write_text("".join(f"{a} {b} {w}\n" for a, b, w in links))
    return str(path)


def _bipartite_file(tmp_path):
    path = tmp_path / "bip.txt"
    path.write_text("*Bipartite 10\n0 10\n1 10\n1 11\n2 11\n3 11\n3 12\n")
    return str(path)


def test_partition_two_cliques(tmp_path, capsys):
    out = tmp_path / "cliques.tree"
    assert main(["partition", _two_cliques_file(tmp_path), "--trials", "3", "-o", str(out)]) == EXIT_OK
    tree = read_tree(str(out))
    assert tree.header["modules"] == "2"
    assert tree.header["levels"] == "2"
    assert tree.hierarchy.top_partition().module_count == 2
    manifest = json.loads((tmp_path / "cliques.tree.manifest.json").read_text())
    assert manifest["subcommand"] == "partition"
    assert manifest["seed"] == config.SEED
    assert manifest["tool_version"] == config.TOOL_VERSION
    assert "Partition complete" in capsys.readouterr().out


def test_unit_markov_time_is_the_default(tmp_path):
    network = _two_cliques_file(tmp_path)
    default, explicit = tmp_path / "default.tree", tmp_path / "explicit.tree"
    assert main(["partition", network, "--trials", "2", "-o", str(default)]) == EXIT_OK
    assert main(["partition", network, "--trials", "2", "--markov-time", "1", "-o", str(explicit)]) == EXIT_OK
    assert default.read_bytes() == explicit.read_bytes()


def test_partition_multilevel(tmp_path):
    out = tmp_path / "multi.tree"
    assert main(["partition", _two_cliques_file(tmp_path), "--trials", "2", "--multilevel", "-o", str(out)]) == EXIT_OK
    assert int(read_tree(str(out)).header["levels"]) >= 2


def test_partition_bipartite(tmp_path):
    out = tmp_path / "bip.tree"
    assert main(["partition", _bipartite_file(tmp_path), "--bipartite", "--trials", "2", "-o", str(out)]) == EXIT_OK
    assert read_tree(str(out)).header["markov-time"] == "2"


def test_bipartite_flag_needs_bipartite_input(tmp_path):
    assert main(["partition", _two_cliques_file(tmp_path), "--bipartite", "-o", str(tmp_path / "x.tree")]) == EXIT_USAGE


def test_bipartite_flag_rejects_markov_time(tmp_path, capsys):
    args = ["partition", _bipartite_file(tmp_path), "--bipartite", "--markov-time", "3", "-o", str(tmp_path / "x.tree")]
    assert main(args) == EXIT_USAGE
    assert "--markov-time" in capsys.readouterr().err
    assert not (tmp_path / "x.tree").exists()


def test_unreadable_input(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1 1.0\n1 2 -1\n")
    assert main(["partition", str(bad), "-o", str(tmp_path / "x.tree")]) == EXIT_INPUT
    assert main(["partition", str(tmp_path / "missing.txt"), "-o", str(tmp_path / "x.tree")]) == EXIT_INPUT


def test_unknown_option_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["partition", _two_cliques_file(tmp_path), "--frobnicate"])
    assert info.value.code == EXIT_USAGE


def test_sweep_empty_grid(tmp_path):
    assert main(["sweep", _two_cliques_file(tmp_path), "--t-grid", ",", "-o", str(tmp_path / "s.csv")]) == EXIT_USAGE


def test_sweep_sampled(tmp_path):
    out = tmp_path / "sweep.csv"
    args = ["sweep", _two_cliques_file(tmp_path), "--t-grid", "0.5,1,2", "--entropy", "sampled",
            "--starts", "10", "--walks", "50", "--trials", "2", "-o", str(out)]
    assert main(args) == EXIT_OK
    df = pd.read_csv(out)
    assert list(df.columns) == ["t", "L_two_level", "h", "gap", "modules", "stderr"]
    assert df["t"].tolist() == [0.5, 1.0, 2.0]


def test_sweep_exact_over_cap(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(config, "DENSE_NODE_CAP", 5)
    args = ["sweep", _two_cliques_file(tmp_path), "--t-grid", "1", "--entropy", "exact", "-o", str(tmp_path / "s.csv")]
    assert main(args) == EXIT_CAP
    assert "--entropy sampled" in capsys.readouterr().err


def test_project_fast_and_full(tmp_path):
    network = _bipartite_file(tmp_path)
    fast, full = tmp_path / "fast.txt", tmp_path / "full.txt"
    assert main(["project", network, "--x", "10", "--y", "2", "-o", str(fast)]) == EXIT_OK
    assert main(["project", network, "--full", "-o", str(full)]) == EXIT_OK
    projected = load_network(str(fast), "edge-list", directed=True)
    assert projected.link_count > 0
    assert np.bincount(projected.sources).max() <= 2
    assert load_network(str(full)).link_count > 0
    assert (tmp_path / "fast.txt.manifest.json").exists()


def test_project_needs_bipartite_input(tmp_path):
    assert main(["project", _two_cliques_file(tmp_path), "-o", str(tmp_path / "p.txt")]) == EXIT_USAGE


def test_full_projection_over_cap(tmp_path, monkeypatch):
    monkeypatch.setattr(config, "DENSE_NODE_CAP", 2)
    assert main(["project", _bipartite_file(tmp_path), "--full", "-o", str(tmp_path / "p.txt")]) == EXIT_CAP


def test_benchmark_rerun_is_byte_identical(tmp_path):
    outputs = [tmp_path / "first.csv", tmp_path / "second.csv"]
    for out in outputs:
        args = ["benchmark", "--communities", "2", "--primaries", "4", "--k", "3", "--k-in", "3",
                "--features", "6", "--trials", "1", "--search-trials", "1", "--no-timings", "-o", str(out)]
        assert main(args) == EXIT_OK
    assert outputs[0].read_bytes() == outputs[1].read_bytes()
    assert len(pd.read_csv(outputs[0])) == 3


def test_nmi_between_trees(tmp_path, capsys):
    flows = np.full(4, 0.25)
    labels = ("a", "b", "c", "d")
    first, second = tmp_path / "a.tree", tmp_path / "b.tree"
    write_tree(str(first), Hierarchy(((0,), (0,), (1,), (1,))), flows, labels)
    write_tree(str(second), Hierarchy(((0,), (1,), (0,), (1,))), flows, labels)
    capsys.readouterr()

    assert main(["nmi", str(first), str(first)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "1.000000"
    assert main(["nmi", str(first), str(second)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "0.000000"
    assert main(["nmi", str(first), str(second), "--leaf"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "0.000000"

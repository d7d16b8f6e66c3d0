import json

import numpy as np
import pytest

from graphpencil.errors import ParseError, ValidationError
from graphpencil.graph import (SAMPLE_ROW_BLOCK, SampleConfig, SbmParams, UndirectedGraph,
                               load_edge_list, load_labels, load_params, sample_graph,
                               save_edge_list, save_labels, save_params)


def test_complete_graph_from_b_one():
    g = sample_graph(SbmParams([1.0], [[1.0]]), SampleConfig(4, seed=7))
    assert g.edge_count == 6
    assert np.array_equal(g.adjacency, ~np.eye(4, dtype=bool))


def test_empty_graph_from_b_zero():
    g = sample_graph(SbmParams([1.0], [[0.0]]), SampleConfig(5, seed=7))
    assert g.n == 5 and g.edge_count == 0


@pytest.mark.parametrize("seed", [0, 1, 2**63 + 5])
def test_er_edge_density_concentrates(seed):
    g = sample_graph(SbmParams.erdos_renyi(0.5), SampleConfig(2000, seed))
    assert abs(g.edge_density() - 0.5) < 0.05


def test_sampling_is_deterministic_and_seed_sensitive():
    p = SbmParams([0.3, 0.7], [[0.6, 0.1], [0.1, 0.4]])
    a = sample_graph(p, SampleConfig(600, 11))
    b = sample_graph(p, SampleConfig(600, 11))
    c = sample_graph(p, SampleConfig(600, 12))
    assert a == b and np.array_equal(a.blocks, b.blocks)
    assert a != c


def test_sampled_graph_invariants_and_block_rates():
    p = SbmParams([0.5, 0.5], [[0.9, 0.05], [0.05, 0.3]])
    g = sample_graph(p, SampleConfig(2 * SAMPLE_ROW_BLOCK + 37, 3))
    adj = g.adjacency
    assert not adj.diagonal().any()
    assert np.array_equal(adj, adj.T)
    for a in range(2):
        for b in range(2):
            rows, cols = g.blocks == a, g.blocks == b
            sub = adj[np.ix_(rows, cols)]
            pairs = rows.sum() * cols.sum() - (rows.sum() if a == b else 0)
            assert abs(sub.sum() / pairs - p.b[a, b]) < 0.03


def test_adjacency_is_read_only():
    g = UndirectedGraph.from_edges(3, [(0, 1)])
    with pytest.raises(ValueError):
        g.adjacency[0, 2] = True


@pytest.mark.parametrize("adj, msg", [
    ([[1, 0], [0, 0]], "self-loop"),
    ([[0, 1], [0, 0]], "symmetric"),
    ([[0, 1, 0]], "square"),
])
def test_graph_validation(adj, msg):
    with pytest.raises(ValidationError, match=msg):
        UndirectedGraph(adj)


@pytest.mark.parametrize("pi, b, msg", [
    ([0.5, 0.6], [[0.1, 0.1], [0.1, 0.1]], "sum to 1"),
    ([0.5, 0.5], [[0.1, 0.2], [0.3, 0.1]], "symmetric"),
    ([0.5, 0.5], [[1.1, 0.2], [0.2, 0.1]], r"\[0, 1\]"),
    ([1.5, -0.5], [[0.1, 0.2], [0.2, 0.1]], "non-negative"),
    ([0.5, 0.5], [[0.1]], "2x2"),
])
def test_params_validation(pi, b, msg):
    with pytest.raises(ValidationError, match=msg):
        SbmParams(pi, b)


def test_delete_and_permute():
    g = UndirectedGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    h = g.delete_node(1)
    assert h.n == 3 and h.edges() == [(1, 2)]
    perm = [3, 2, 1, 0]
    assert g.permute(perm).edges() == [(0, 1), (1, 2), (2, 3)]


def test_edge_list_path(tmp_path):
    f = tmp_path / "g.edges"
    f.write_text("0 1\n1 2")
    g = load_edge_list(f)
    assert g.n == 3 and g.edges() == [(0, 1), (1, 2)]


def test_edge_list_declared_isolated_nodes(tmp_path):
    f = tmp_path / "g.edges"
    f.write_text("# n=3\n")
    g = load_edge_list(f)
    assert g.n == 3 and g.edge_count == 0


def test_edge_list_round_trip(tmp_path):
    p = SbmParams([0.4, 0.6], [[0.3, 0.05], [0.05, 0.2]])
    g = sample_graph(p, SampleConfig(100, 5))
    save_edge_list(g, tmp_path / "g.edges")
    assert load_edge_list(tmp_path / "g.edges") == g
    save_labels(g.blocks, tmp_path / "g.labels")
    assert np.array_equal(load_labels(tmp_path / "g.labels"), g.blocks)


@pytest.mark.parametrize("text, line, msg", [
    ("0 1\n1\n", 2, "two node ids"),
    ("0 1\n# note\n1 x\n", 3, "integers"),
    ("0 1\n2 2\n", 2, "self-loop"),
    ("0 1\n1 0\n", 2, "duplicate"),
    ("0 -1\n", 1, "non-negative"),
])
def test_edge_list_errors_carry_line_numbers(tmp_path, text, line, msg):
    f = tmp_path / "bad.edges"
    f.write_text(text)
    with pytest.raises(ParseError, match=msg) as info:
        load_edge_list(f)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_header_smaller_than_ids_rejected(tmp_path):
    f = tmp_path / "bad.edges"
    f.write_text("# n=2\n0 5\n")
    with pytest.raises(ParseError, match="n=2"):
        load_edge_list(f)


def test_params_file_round_trip(tmp_path):
    p = SbmParams([0.25, 0.75], [[0.5, 0.1], [0.1, 0.9]])
    save_params(p, tmp_path / "p.json")
    doc = json.loads((tmp_path / "p.json").read_text())
    assert set(doc) == {"schema", "pi", "B"}
    q = load_params(tmp_path / "p.json")
    assert np.array_equal(q.pi, p.pi) and np.array_equal(q.b, p.b)


def test_params_file_errors(tmp_path):
    f = tmp_path / "p.json"
    f.write_text('{"pi": [1.0]}')
    with pytest.raises(ValidationError, match="'B'"):
        load_params(f)
    f.write_text('{"pi": [1.0], "B": [[0.1]], "schema": "other/9"}')
    with pytest.raises(ValidationError, match="schema"):
        load_params(f)
    f.write_text("{not json")
    with pytest.raises(ParseError):
        load_params(f)


def test_sample_config_validation():
    with pytest.raises(ValidationError):
        SampleConfig(0)
    with pytest.raises(ValidationError):
        SampleConfig(3, seed=-1)

import numpy as np
import pytest

from mrkernel.cfg import (
    VOCAB_KEYS,
    Cfg,
    GraphFormatError,
    LabelSimilarityTable,
    NodeLabel,
    SimilarityTableError,
    default_similarity_table,
    emit_graph_file,
    load_similarity_table,
    parse_graph_file,
)
from mrkernel.lowering import compile_source

MINIMAL = """
digraph tiny {
  a [label="start"];
  b [label="exit"];
  a -> b;
}
"""


def test_minimal_graph():
    g = parse_graph_file(MINIMAL)
    assert g.n_nodes == 2
    assert len(g.edges) == 1
    assert g.start_id == "a" and g.exit_id == "b"


def test_duplicate_start_rejected():
    text = MINIMAL.replace('b [label="exit"];', 'b [label="start"];')
    with pytest.raises(GraphFormatError, match="duplicate start"):
        parse_graph_file(text)


def test_missing_exit_rejected():
    text = 'digraph g { a [label="start"]; }'
    with pytest.raises(GraphFormatError, match="missing exit"):
        parse_graph_file(text)


def test_unknown_label_rejected():
    text = MINIMAL.replace("exit", "frobnicate")
    with pytest.raises(GraphFormatError, match="unknown node label"):
        parse_graph_file(text)


def test_call_label_needs_return_type():
    text = MINIMAL.replace('[label="exit"]', '[label="call"]')
    with pytest.raises(GraphFormatError, match="return type"):
        parse_graph_file(text)


def test_syntax_error_reports_position():
    with pytest.raises(GraphFormatError, match=r"^2:3"):
        parse_graph_file("digraph g {\n  ! }")


def test_unreachable_node_rejected():
    text = """
    digraph g {
      a [label="start"];
      b [label="exit"];
      c [label="add"];
      a -> b;
      c -> b;
    }
    """
    with pytest.raises(GraphFormatError, match="not reachable from start"):
        parse_graph_file(text)


def test_exit_must_be_reachable_from_every_node():
    text = """
    digraph g {
      a [label="start"];
      b [label="exit"];
      c [label="add"];
      a -> b;
      a -> c;
    }
    """
    with pytest.raises(GraphFormatError, match="exit not reachable"):
        parse_graph_file(text)


def test_duplicate_edge_rejected():
    text = MINIMAL.replace("a -> b;", "a -> b; a -> b;")
    with pytest.raises(GraphFormatError, match="duplicate edge"):
        parse_graph_file(text)


def test_edge_to_undeclared_node_rejected():
    text = MINIMAL.replace("a -> b;", "a -> b; a -> zz;")
    with pytest.raises(GraphFormatError, match="undeclared node"):
        parse_graph_file(text)


def test_extra_attributes_ignored():
    text = """
    digraph g {
      rankdir = LR;
      a [label="start", shape="box", color=red];
      b [label="exit"];
      a -> b;
    }
    """
    g = parse_graph_file(text)
    assert g.n_nodes == 2


def test_call_label_roundtrip():
    text = """
    digraph g {
      a [label="start"];
      c [label="call:matrix"];
      b [label="exit"];
      a -> c;
      c -> b;
    }
    """
    g = parse_graph_file(text)
    assert g.label_of("c") == NodeLabel("call", "matrix")
    assert 'c [label="call:matrix"];' in emit_graph_file(g)


def test_roundtrip_is_identity_on_lowered_graphs():
    src = """
    fn f(a: matrix): matrix {
      r = rows(a);
      c = cols(a);
      out = zeros(r, c);
      for i = 0 to r - 1 {
        for j = 0 to c - 1 {
          out[i][j] = a[i][j] * 2.0;
        }
      }
      return out;
    }
    """
    g = compile_source(src)["f"]
    assert parse_graph_file(emit_graph_file(g)) == g


def test_roundtrip_preserves_bundled_corpus(bundled_dataset):
    for name in bundled_dataset.names:
        g = bundled_dataset.cfgs[name]
        back = parse_graph_file(emit_graph_file(g))
        assert back.nodes == g.nodes
        assert back.edges == g.edges
        assert (back.start_id, back.exit_id) == (g.start_id, g.exit_id)


def test_fig1_style_graph_has_multiply_and_loop_backedge():
    # Scalar multiply, re-encoded in the text format via the frontend.
    src = """
    fn scalar_multiply(a: matrix, s: real): matrix {
      r = rows(a);
      c = cols(a);
      out = zeros(r, c);
      for i = 0 to r - 1 {
        for j = 0 to c - 1 {
          out[i][j] = a[i][j] * s;
        }
      }
      return out;
    }
    """
    text = emit_graph_file(compile_source(src)["scalar_multiply"])
    g = parse_graph_file(text)
    kinds = [lab.kind for _, lab in g.nodes]
    assert "mul" in kinds
    order = {nid: i for i, (nid, _) in enumerate(g.nodes)}
    back_edges = [(a, b) for a, b in g.edges if order[b] < order[a]]
    assert back_edges, "loop structure lost in the text round trip"


# ---------------------------------------------------------------------------
# Similarity tables
# ---------------------------------------------------------------------------

def test_default_scores():
    table = default_similarity_table()
    assert table.score("add", "add") == 1.0
    assert table.score("add", "sub") == 0.5
    assert table.score("add", "mul") == 0.0
    assert table.score("mul", "div") == 0.5
    assert table.score("lt", "gt") == 0.5
    assert table.score("le", "ge") == 0.5
    assert table.score("eq", "neq") == 0.5
    assert table.score("start", "exit") == 0.0


def test_call_labels_match_on_return_type_only():
    table = default_similarity_table()
    assert table.score("call:matrix", "call:matrix") == 1.0
    assert table.score("call:matrix", "call:real") == 0.0
    assert table.score("call:int", "mul") == 0.0


def test_table_is_symmetric_unit_diagonal_in_range():
    table = default_similarity_table()
    m = table.matrix
    assert np.array_equal(m, m.T)
    assert np.all(np.diag(m) == 1.0)
    assert np.all((m >= 0.0) & (m <= 1.0))


def test_default_min_eigenvalue_is_half():
    assert default_similarity_table().min_eigenvalue() == pytest.approx(0.5, abs=1e-12)


def test_load_empty_overrides_is_default():
    assert load_similarity_table("# nothing here\n\n") == default_similarity_table()


def test_load_override_keeps_table_psd():
    table = load_similarity_table("add mul 0.5\n")
    assert table.score("add", "mul") == 0.5
    assert table.score("mul", "add") == 0.5
    # Independent eigenvalue check of the overridden matrix.
    assert np.linalg.eigvalsh(table.matrix)[0] >= -1e-12


def test_load_rejects_indefinite_overrides():
    # Two strong similarities with a contradictory zero in between drive the
    # 3x3 submatrix indefinite: eigenvalues of [[1,.9,0],[.9,1,.9],[0,.9,1]]
    # include 1 - 0.9*sqrt(2) < 0.
    sub = np.array([[1.0, 0.9, 0.0], [0.9, 1.0, 0.9], [0.0, 0.9, 1.0]])
    assert np.linalg.eigvalsh(sub)[0] < 0.0
    text = "add sub 0.9\nsub mul 0.9\nadd mul 0.0\n"
    with pytest.raises(SimilarityTableError, match="eigenvalue"):
        load_similarity_table(text)


def test_load_rejects_conflicting_pairs():
    with pytest.raises(SimilarityTableError, match="non-symmetric"):
        load_similarity_table("add mul 0.5\nmul add 0.3\n")


def test_load_rejects_out_of_range_scores():
    with pytest.raises(SimilarityTableError, match="outside"):
        load_similarity_table("add mul 1.5\n")


def test_load_rejects_unknown_labels():
    with pytest.raises(SimilarityTableError, match="unknown label"):
        load_similarity_table("add frob 0.5\n")


def test_load_rejects_diagonal_overrides():
    with pytest.raises(SimilarityTableError, match="diagonal"):
        load_similarity_table("add add 0.5\n")


def test_digest_tracks_content():
    default = default_similarity_table()
    assert default.digest() == default_similarity_table().digest()
    assert default.digest() != load_similarity_table("add mul 0.5\n").digest()


def test_vocabulary_covers_calls():
    assert "call:void" in VOCAB_KEYS
    assert "call" not in VOCAB_KEYS
    assert len(VOCAB_KEYS) == 28


def test_direct_table_validation():
    bad = np.eye(len(VOCAB_KEYS))
    bad[0, 1] = 0.5  # asymmetric
    with pytest.raises(SimilarityTableError, match="symmetric"):
        LabelSimilarityTable(bad)


def test_cfg_build_rejects_duplicate_node_ids():
    nodes = [("a", NodeLabel("start")), ("a", NodeLabel("exit"))]
    with pytest.raises(GraphFormatError, match="duplicate node id"):
        Cfg.build("g", nodes, [])

from mrkernel.cfg import NODE_KINDS
from mrkernel.lowering import compile_source, lower_to_cfg
from mrkernel.minilang import parse_source

FIG1 = """
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


def kinds(cfg):
    return [label.kind for _, label in cfg.nodes]


def out_degrees(cfg):
    succ = cfg.successors()
    return {nid: len(targets) for nid, targets in succ.items()}


def test_add_assign_return_sequence():
    g = compile_source(
        "fn f(a: real, b: real): real { c = a + b; return c; }"
    )["f"]
    assert kinds(g) == ["start", "add", "assign", "return", "exit"]
    assert len(g.edges) == 4
    # Strictly linear: each node feeds the next.
    ids = [nid for nid, _ in g.nodes]
    assert list(g.edges) == [(ids[i], ids[i + 1]) for i in range(4)]


def test_three_address_decomposition_order():
    g = compile_source(
        "fn f(a: real, b: real, d: real): real { c = a + b * d; return c; }"
    )["f"]
    ks = kinds(g)
    assert ks.count("mul") == 1 and ks.count("add") == 1
    # The graph is a straight line here, so node order is path order.
    assert ks.index("mul") < ks.index("add")


def test_fig1_lowering_properties():
    g = compile_source(FIG1)["scalar_multiply"]
    ks = kinds(g)
    assert ks.count("mul") >= 1
    assert ks.count("index_load") >= 1
    assert ks.count("index_store") >= 1
    order = {nid: i for i, (nid, _) in enumerate(g.nodes)}
    back_edges = [(a, b) for a, b in g.edges if order[b] < order[a]]
    assert len(back_edges) == 2
    comparisons = [nid for nid, lab in g.nodes if lab.kind == "le"]
    degrees = out_degrees(g)
    assert all(degrees[nid] == 2 for nid in comparisons)


def test_branch_degrees():
    g = compile_source(FIG1)["scalar_multiply"]
    degrees = out_degrees(g)
    branch_kinds = {"eq", "neq", "lt", "le", "gt", "ge"}
    for nid, label in g.nodes:
        if label.kind == "exit":
            assert degrees[nid] == 0
        elif label.kind in branch_kinds:
            assert degrees[nid] == 2
        else:
            assert degrees[nid] == 1


def test_lowering_is_deterministic():
    a = compile_source(FIG1)["scalar_multiply"]
    b = compile_source(FIG1)["scalar_multiply"]
    assert a == b


def test_every_label_is_in_the_vocabulary(bundled_dataset):
    for name in bundled_dataset.names:
        for _, label in bundled_dataset.cfgs[name].nodes:
            assert label.kind in NODE_KINDS


def test_const_for_literal_assignment():
    g = compile_source("fn f(): int { x = 5; return x; }")["f"]
    assert kinds(g) == ["start", "const", "return", "exit"]


def test_assign_for_pure_copy():
    g = compile_source("fn f(a: int): int { x = a; return x; }")["f"]
    assert kinds(g) == ["start", "assign", "return", "exit"]


def test_store_consumes_value_without_extra_assign():
    g = compile_source(
        """
        fn f(a: matrix): matrix {
          a[0][0] = a[0][1] + 1.0;
          return a;
        }
        """
    )["f"]
    assert kinds(g) == ["start", "index_load", "add", "index_store", "return", "exit"]


def test_store_of_variable_is_single_node():
    g = compile_source(
        "fn f(a: matrix, v: real): matrix { a[0][0] = v; return a; }"
    )["f"]
    assert kinds(g) == ["start", "index_store", "return", "exit"]


def test_call_annotated_with_return_type():
    g = compile_source(
        """
        fn helper(a: matrix): real { return a[0][0]; }
        fn f(a: matrix): real { x = helper(a); return x; }
        """
    )["f"]
    labels = [label.key for _, label in g.nodes]
    assert "call:real" in labels


def test_builtin_calls_annotated():
    g = compile_source("fn f(a: matrix): int { r = rows(a); return r; }")["f"]
    assert [label.key for _, label in g.nodes] == [
        "start", "call:int", "assign", "return", "exit",
    ]


def test_if_else_join():
    g = compile_source(
        """
        fn f(a: int): int {
          if (a > 0) { x = 1; } else { x = 2; }
          return x;
        }
        """
    )["f"]
    ks = kinds(g)
    assert ks == ["start", "gt", "const", "const", "return", "exit"]
    degrees = out_degrees(g)
    gt_id = g.nodes[1][0]
    assert degrees[gt_id] == 2


def test_while_with_empty_body_self_loop():
    g = compile_source(
        "fn f(a: int): int { while (a > 99) { } return a; }"
    )["f"]
    gt_id = next(nid for nid, lab in g.nodes if lab.kind == "gt")
    assert (gt_id, gt_id) in g.edges


def test_void_function_gets_implicit_return():
    g = compile_source("fn f(a: int): void { x = a; }")["f"]
    assert kinds(g) == ["start", "assign", "return", "exit"]


def test_returns_in_both_branches_reach_exit():
    g = compile_source(
        "fn f(a: int): int { if (a > 0) { return 1; } else { return 2; } }"
    )["f"]
    assert kinds(g).count("return") == 2
    exits = [b for _, b in g.edges if b == g.exit_id]
    assert len(exits) == 2


def test_no_param_nodes_emitted():
    g = compile_source("fn f(a: int, b: int): int { return a; }")["f"]
    assert kinds(g) == ["start", "return", "exit"]


def test_node_instruction_bijection_by_count():
    # Every non-start/exit node is one three-address instruction.
    program = parse_source(
        "fn f(a: real, b: real): real { c = a + b * b; return c; }"
    )
    g = lower_to_cfg(program, "f")
    # mul, add, assign, return.
    assert g.n_nodes - 2 == 4

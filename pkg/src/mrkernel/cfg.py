"""Control-flow graph model, node-label vocabulary, and the graph file format.

Graphs are stored one per file in a strict subset of the dot syntax:

    digraph scalar_multiply {
      n0 [label="start"];
      n1 [label="call:matrix"];
      n0 -> n1;
      ...
    }

Node labels come from a closed vocabulary; call nodes carry the return
type of the callee (``call:matrix``).  Every loaded graph is validated:
unique start/exit, referenced endpoints, no duplicates, and full
reachability (all nodes reachable from start, exit reachable from all).
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

NODE_KINDS = (
    "start", "exit", "assign", "const",
    "add", "sub", "mul", "div", "mod", "neg",
    "eq", "neq", "lt", "le", "gt", "ge",
    "and", "or", "not",
    "index_load", "index_store",
    "param", "return", "call",
)

CALL_RETURN_TYPES = ("int", "real", "bool", "matrix", "void")

# Operator pairs with similar mathematical roles. Each pair forms its own
# disjoint 2x2 block in the similarity matrix, which keeps the full table
# positive semidefinite by construction.
SIMILAR_KIND_PAIRS = (
    ("add", "sub"),
    ("mul", "div"),
    ("lt", "gt"),
    ("le", "ge"),
    ("eq", "neq"),
)

SIMILAR_SCORE = 0.5

#: All label keys a similarity table is defined over: the non-call kinds
#: plus one key per call return type.
VOCAB_KEYS = tuple(k for k in NODE_KINDS if k != "call") + tuple(
    f"call:{rt}" for rt in CALL_RETURN_TYPES
)

_KEY_INDEX = {key: i for i, key in enumerate(VOCAB_KEYS)}

# Relative floor for the smallest eigenvalue of an acceptable table or Gram
# matrix: min_eig >= -PSD_RTOL * max_eig.
PSD_RTOL = 1e-8


class GraphFormatError(ValueError):
    """Malformed graph file: syntax error or CFG invariant violation."""


class SimilarityTableError(ValueError):
    """Malformed or indefinite label-similarity table."""


@dataclass(frozen=True)
class NodeLabel:
    """A node label: an operation kind, plus a return type for calls."""

    kind: str
    return_type: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in NODE_KINDS:
            raise GraphFormatError(f"unknown node label kind {self.kind!r}")
        if self.kind == "call":
            if self.return_type not in CALL_RETURN_TYPES:
                raise GraphFormatError(
                    f"call label needs a return type from {CALL_RETURN_TYPES}, "
                    f"got {self.return_type!r}"
                )
        elif self.return_type is not None:
            raise GraphFormatError(
                f"label kind {self.kind!r} must not carry a return type"
            )

    @property
    def key(self) -> str:
        """Encoding used in graph files and similarity tables."""
        if self.kind == "call":
            return f"call:{self.return_type}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "NodeLabel":
        if text.startswith("call:"):
            return cls("call", text[len("call:"):])
        if text == "call":
            raise GraphFormatError("call label missing return type (use call:<type>)")
        return cls(text)

    def __str__(self) -> str:
        return self.key


@dataclass(frozen=True)
class Cfg:
    """A validated control-flow graph with labeled nodes.

    ``nodes`` preserves declaration order; ``start_id`` / ``exit_id`` are
    the ids of the unique nodes labeled ``start`` / ``exit``.
    """

    name: str
    nodes: tuple[tuple[str, NodeLabel], ...]
    edges: tuple[tuple[str, str], ...]
    start_id: str
    exit_id: str

    @classmethod
    def build(
        cls,
        name: str,
        nodes: list[tuple[str, NodeLabel]],
        edges: list[tuple[str, str]],
    ) -> "Cfg":
        """Validate all CFG invariants and construct the graph."""
        ids = [nid for nid, _ in nodes]
        id_set = set(ids)
        if len(id_set) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise GraphFormatError(f"graph {name!r}: duplicate node id {dup!r}")

        starts = [nid for nid, lab in nodes if lab.kind == "start"]
        exits = [nid for nid, lab in nodes if lab.kind == "exit"]
        if len(starts) != 1:
            what = "duplicate start" if len(starts) > 1 else "missing start"
            raise GraphFormatError(f"graph {name!r}: {what} node")
        if len(exits) != 1:
            what = "duplicate exit" if len(exits) > 1 else "missing exit"
            raise GraphFormatError(f"graph {name!r}: {what} node")
        start_id, exit_id = starts[0], exits[0]

        seen_edges: set[tuple[str, str]] = set()
        for a, b in edges:
            if a not in id_set or b not in id_set:
                missing = a if a not in id_set else b
                raise GraphFormatError(
                    f"graph {name!r}: edge references unknown node {missing!r}"
                )
            if (a, b) in seen_edges:
                raise GraphFormatError(f"graph {name!r}: duplicate edge {a} -> {b}")
            seen_edges.add((a, b))

        fwd: dict[str, list[str]] = {nid: [] for nid in ids}
        rev: dict[str, list[str]] = {nid: [] for nid in ids}
        for a, b in edges:
            fwd[a].append(b)
            rev[b].append(a)

        unreachable = id_set - _closure(start_id, fwd)
        if unreachable:
            nid = sorted(unreachable)[0]
            raise GraphFormatError(
                f"graph {name!r}: node {nid!r} not reachable from start"
            )
        dead_end = id_set - _closure(exit_id, rev)
        if dead_end:
            nid = sorted(dead_end)[0]
            raise GraphFormatError(
                f"graph {name!r}: exit not reachable from node {nid!r}"
            )

        return cls(name, tuple(nodes), tuple(edges), start_id, exit_id)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def label_keys(self) -> list[str]:
        """Label keys in node order."""
        return [lab.key for _, lab in self.nodes]

    def edge_indices(self) -> list[tuple[int, int]]:
        """Edges as (from, to) indices into the node order."""
        pos = {nid: i for i, (nid, _) in enumerate(self.nodes)}
        return [(pos[a], pos[b]) for a, b in self.edges]

    def successors(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {nid: [] for nid, _ in self.nodes}
        for a, b in self.edges:
            out[a].append(b)
        return out

    def label_of(self, node_id: str) -> NodeLabel:
        for nid, lab in self.nodes:
            if nid == node_id:
                return lab
        raise KeyError(node_id)


def _closure(root: str, adj: dict[str, list[str]]) -> set[str]:
    seen = {root}
    stack = [root]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


# ---------------------------------------------------------------------------
# Graph file format (dot subset)
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment>//[^\n]*)
      | (?P<arrow>->)
      | (?P<sym>[{}\[\];,=])
      | (?P<string>"[^"\n]*")
      | (?P<word>[A-Za-z0-9_.]+)
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int, int]]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise GraphFormatError(
                f"{line}:{col}: unexpected character {text[pos]!r}"
            )
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment"):
            tokens.append((kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    tokens.append(("eof", "", line, col))
    return tokens


class _Tokens:
    def __init__(self, text: str) -> None:
        self._toks = _tokenize(text)
        self._i = 0

    def peek(self) -> tuple[str, str, int, int]:
        return self._toks[self._i]

    def next(self) -> tuple[str, str, int, int]:
        tok = self._toks[self._i]
        if tok[0] != "eof":
            self._i += 1
        return tok

    def expect(self, kind: str, value: str | None = None) -> tuple[str, str, int, int]:
        tok = self.next()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value if value is not None else kind
            raise GraphFormatError(
                f"{tok[2]}:{tok[3]}: expected {want!r}, got {tok[1]!r}"
            )
        return tok

    def accept(self, kind: str, value: str | None = None) -> bool:
        tok = self.peek()
        if tok[0] == kind and (value is None or tok[1] == value):
            self.next()
            return True
        return False


def parse_graph_file(text: str) -> Cfg:
    """Parse a graph file and validate every CFG invariant."""
    toks = _Tokens(text)
    kw = toks.expect("word")
    if kw[1] != "digraph":
        raise GraphFormatError(f"{kw[2]}:{kw[3]}: expected 'digraph', got {kw[1]!r}")
    name = toks.expect("word")[1]
    toks.expect("sym", "{")

    nodes: list[tuple[str, NodeLabel]] = []
    edges: list[tuple[str, str]] = []
    declared: set[str] = set()

    while not toks.accept("sym", "}"):
        tok = toks.next()
        if tok[0] == "eof":
            raise GraphFormatError(f"{tok[2]}:{tok[3]}: unexpected end of file")
        if tok[0] != "word":
            raise GraphFormatError(
                f"{tok[2]}:{tok[3]}: expected node id, got {tok[1]!r}"
            )
        ident = tok[1]
        if toks.accept("arrow"):
            dst = toks.expect("word")
            for endpoint in (ident, dst[1]):
                if endpoint not in declared:
                    raise GraphFormatError(
                        f"{dst[2]}:{dst[3]}: edge references undeclared node "
                        f"{endpoint!r}"
                    )
            edges.append((ident, dst[1]))
            toks.accept("sym", ";")
        elif toks.accept("sym", "["):
            attrs = _parse_attrs(toks)
            toks.accept("sym", ";")
            if "label" not in attrs:
                raise GraphFormatError(
                    f"{tok[2]}:{tok[3]}: node {ident!r} has no label attribute"
                )
            try:
                label = NodeLabel.parse(attrs["label"])
            except GraphFormatError as exc:
                raise GraphFormatError(f"{tok[2]}:{tok[3]}: {exc}") from None
            if ident in declared:
                raise GraphFormatError(
                    f"{tok[2]}:{tok[3]}: duplicate node id {ident!r}"
                )
            declared.add(ident)
            nodes.append((ident, label))
        elif toks.accept("sym", "="):
            # Graph-level attribute: ignored, not rejected.
            val = toks.next()
            if val[0] not in ("word", "string"):
                raise GraphFormatError(
                    f"{val[2]}:{val[3]}: expected attribute value, got {val[1]!r}"
                )
            toks.accept("sym", ";")
        else:
            nxt = toks.peek()
            raise GraphFormatError(
                f"{nxt[2]}:{nxt[3]}: expected '->', '[' or '=' after {ident!r}"
            )

    toks.expect("eof")
    return Cfg.build(name, nodes, edges)


def _parse_attrs(toks: _Tokens) -> dict[str, str]:
    attrs: dict[str, str] = {}
    while True:
        key = toks.expect("word")[1]
        toks.expect("sym", "=")
        val = toks.next()
        if val[0] == "string":
            attrs[key] = val[1][1:-1]
        elif val[0] == "word":
            attrs[key] = val[1]
        else:
            raise GraphFormatError(
                f"{val[2]}:{val[3]}: expected attribute value, got {val[1]!r}"
            )
        if toks.accept("sym", "]"):
            return attrs
        toks.expect("sym", ",")


def emit_graph_file(cfg: Cfg) -> str:
    """Serialize a CFG; parse(emit(c)) preserves ids, labels and edges."""
    lines = [f"digraph {cfg.name} {{"]
    for nid, label in cfg.nodes:
        lines.append(f'  {nid} [label="{label.key}"];')
    for a, b in cfg.edges:
        lines.append(f"  {a} -> {b};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Label similarity tables
# ---------------------------------------------------------------------------

class LabelSimilarityTable:
    """Symmetric node-label pair scores in [0, 1].

    The full matrix over the vocabulary must be positive semidefinite (its
    smallest eigenvalue at least ``-PSD_RTOL`` times the largest); this is
    what makes the walk kernel built on top of it a valid kernel.
    """

    def __init__(self, matrix: np.ndarray) -> None:
        matrix = np.asarray(matrix, dtype=float)
        n = len(VOCAB_KEYS)
        if matrix.shape != (n, n):
            raise SimilarityTableError(
                f"similarity matrix must be {n}x{n}, got {matrix.shape}"
            )
        if not np.allclose(matrix, matrix.T, atol=0.0):
            raise SimilarityTableError("similarity matrix is not symmetric")
        if np.any(matrix < 0.0) or np.any(matrix > 1.0):
            raise SimilarityTableError("similarity scores must lie in [0, 1]")
        if not np.all(np.diag(matrix) == 1.0):
            raise SimilarityTableError("similarity of a label with itself must be 1")
        eigs = np.linalg.eigvalsh(matrix)
        if eigs[0] < -PSD_RTOL * eigs[-1]:
            raise SimilarityTableError(
                "similarity matrix is not positive semidefinite "
                f"(minimum eigenvalue {eigs[0]:.6e})"
            )
        self._matrix = matrix.copy()
        self._matrix.setflags(write=False)

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    def score(self, a: NodeLabel | str, b: NodeLabel | str) -> float:
        ka = a.key if isinstance(a, NodeLabel) else a
        kb = b.key if isinstance(b, NodeLabel) else b
        return float(self._matrix[_KEY_INDEX[ka], _KEY_INDEX[kb]])

    def key_indices(self, keys: list[str]) -> np.ndarray:
        return np.array([_KEY_INDEX[k] for k in keys], dtype=np.intp)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self._matrix)[0])

    def digest(self) -> str:
        """Checksum identifying the table contents."""
        h = hashlib.sha256()
        for i, a in enumerate(VOCAB_KEYS):
            for j, b in enumerate(VOCAB_KEYS):
                if j < i:
                    continue
                h.update(f"{a} {b} {self._matrix[i, j]:.17g}\n".encode())
        return h.hexdigest()[:16]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelSimilarityTable):
            return NotImplemented
        return np.array_equal(self._matrix, other._matrix)


def _default_matrix() -> np.ndarray:
    n = len(VOCAB_KEYS)
    mat = np.eye(n)
    for a, b in SIMILAR_KIND_PAIRS:
        i, j = _KEY_INDEX[a], _KEY_INDEX[b]
        mat[i, j] = mat[j, i] = SIMILAR_SCORE
    # Call labels score 1 only on equal return types, which the identity
    # diagonal already provides.
    return mat


@lru_cache(maxsize=1)
def default_similarity_table() -> LabelSimilarityTable:
    """The built-in table: 1 on the diagonal, 0.5 for the similar-operator
    pairs, 0 elsewhere; call labels match exactly on return type."""
    return LabelSimilarityTable(_default_matrix())


def load_similarity_table(text: str) -> LabelSimilarityTable:
    """Apply override triples ``labelA labelB score`` to the default table.

    Lines may carry ``#`` comments.  Overrides must be consistent (no
    conflicting duplicate pairs), scores must lie in [0, 1], diagonal
    entries must stay 1, and the resulting matrix must stay positive
    semidefinite.
    """
    mat = _default_matrix()
    seen: dict[tuple[int, int], float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise SimilarityTableError(
                f"line {lineno}: expected 'labelA labelB score', got {raw!r}"
            )
        key_a, key_b, score_text = parts
        for key in (key_a, key_b):
            if key not in _KEY_INDEX:
                raise SimilarityTableError(f"line {lineno}: unknown label {key!r}")
        try:
            score = float(score_text)
        except ValueError:
            raise SimilarityTableError(
                f"line {lineno}: score {score_text!r} is not a number"
            ) from None
        if not 0.0 <= score <= 1.0:
            raise SimilarityTableError(
                f"line {lineno}: score {score} outside [0, 1]"
            )
        i, j = _KEY_INDEX[key_a], _KEY_INDEX[key_b]
        if i == j:
            if score != 1.0:
                raise SimilarityTableError(
                    f"line {lineno}: diagonal entry {key_a!r} must stay 1"
                )
            continue
        pair = (min(i, j), max(i, j))
        if pair in seen and seen[pair] != score:
            raise SimilarityTableError(
                f"line {lineno}: non-symmetric entry for ({key_a}, {key_b}): "
                f"{seen[pair]} vs {score}"
            )
        seen[pair] = score
        mat[i, j] = mat[j, i] = score
    return LabelSimilarityTable(mat)

"""Random-walk kernel between labeled control-flow graphs.

The kernel sums, over all pairs of equal-length walks in the two graphs,
the product of the per-step node-label similarities; a length-n pair is
damped by lambda**n and the series is truncated at a maximum walk length.
Edge pairs always contribute a factor of one (there is a single edge
type).  Computation runs on the weighted product graph; an exponential
brute-force enumeration is kept alongside as an independent oracle.
"""

from __future__ import annotations

import warnings
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .cfg import Cfg, LabelSimilarityTable, PSD_RTOL

BRUTEFORCE_MAX_PRODUCT_NODES = 64
BRUTEFORCE_MAX_LEN = 6


@dataclass(frozen=True)
class KernelParams:
    """Walk-kernel parameters: damping factor, truncation length, cosine flag."""

    lam: float
    max_len: int
    normalize: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam < 1.0:
            raise ValueError(f"lambda must lie in [0, 1), got {self.lam}")
        if self.max_len < 0:
            raise ValueError(f"max walk length must be >= 0, got {self.max_len}")


@dataclass(frozen=True)
class ProductGraph:
    """Node pairs with positive label similarity, and the edges they inherit.

    ``pnodes[p] = (i, j)`` pairs node i of the first graph with node j of
    the second; ``weights[p]`` is their label similarity.  ``adjacency`` has
    a 1 at (p, q) iff both underlying graphs have the corresponding edge.
    """

    pnodes: tuple[tuple[int, int], ...]
    weights: np.ndarray
    adjacency: sparse.csr_matrix


def build_product_graph(
    g1: Cfg, g2: Cfg, table: LabelSimilarityTable
) -> ProductGraph:
    keys1 = g1.label_keys()
    keys2 = g2.label_keys()
    idx1 = table.key_indices(keys1)
    idx2 = table.key_indices(keys2)
    sim = table.matrix[np.ix_(idx1, idx2)]

    pairs = np.argwhere(sim > 0.0)
    pnodes = tuple((int(i), int(j)) for i, j in pairs)
    weights = sim[pairs[:, 0], pairs[:, 1]] if len(pairs) else np.zeros(0)
    n = len(pnodes)

    # Pair up edges: (u,v) x (u',v') is a product edge iff both endpoints
    # are positive-weight node pairs.
    index = np.full((len(keys1), len(keys2)), -1, dtype=np.intp)
    if len(pairs):
        index[pairs[:, 0], pairs[:, 1]] = np.arange(n)
    e1 = np.array(g1.edge_indices(), dtype=np.intp).reshape(-1, 2)
    e2 = np.array(g2.edge_indices(), dtype=np.intp).reshape(-1, 2)
    if len(e1) and len(e2) and n:
        src = index[e1[:, 0][:, None], e2[:, 0][None, :]].ravel()
        dst = index[e1[:, 1][:, None], e2[:, 1][None, :]].ravel()
        mask = (src >= 0) & (dst >= 0)
        rows, cols = src[mask], dst[mask]
    else:
        rows = cols = np.zeros(0, dtype=np.intp)
    adjacency = sparse.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n, n)
    )
    return ProductGraph(pnodes, np.asarray(weights, dtype=float), adjacency)


def walk_profile(
    g1: Cfg, g2: Cfg, table: LabelSimilarityTable, max_len: int
) -> np.ndarray:
    """Per-length walk-pair similarity totals c_0 .. c_max_len.

    c_n sums, over all pairs of length-n walks, the product of the node
    similarities along the pair; the kernel is sum(lam**n * c_n).
    """
    product = build_product_graph(g1, g2, table)
    out = np.zeros(max_len + 1)
    if not product.pnodes:
        return out
    y = product.weights.copy()
    out[0] = y.sum()
    for n in range(1, max_len + 1):
        y = product.weights * (product.adjacency @ y)
        out[n] = y.sum()
    return out


def _accumulate(profile: np.ndarray, lam: float) -> float:
    total = 0.0
    factor = 1.0
    for c in profile:
        total += factor * float(c)
        factor *= lam
    return total


def kernel(
    g1: Cfg, g2: Cfg, table: LabelSimilarityTable, params: KernelParams
) -> float:
    """Truncated random-walk kernel value between two graphs."""
    value = _accumulate(walk_profile(g1, g2, table, params.max_len), params.lam)
    if not params.normalize:
        return value
    k11 = _accumulate(walk_profile(g1, g1, table, params.max_len), params.lam)
    k22 = _accumulate(walk_profile(g2, g2, table, params.max_len), params.lam)
    denom = k11 * k22
    if denom == 0.0:
        return 0.0
    return value / float(np.sqrt(denom))


def _walk_label_counts(cfg: Cfg, max_len: int) -> list[dict[tuple[str, ...], int]]:
    """Enumerate all walks up to max_len, grouped by their label sequence."""
    keys = cfg.label_keys()
    succ: dict[int, list[int]] = defaultdict(list)
    for a, b in cfg.edge_indices():
        succ[a].append(b)

    by_length: list[dict[tuple[str, ...], int]] = []
    frontier: dict[tuple[int, tuple[str, ...]], int] = {
        (i, (keys[i],)): 1 for i in range(len(keys))
    }
    for _ in range(max_len + 1):
        counts: dict[tuple[str, ...], int] = defaultdict(int)
        for (_, labels), cnt in frontier.items():
            counts[labels] += cnt
        by_length.append(dict(counts))
        nxt: dict[tuple[int, tuple[str, ...]], int] = defaultdict(int)
        for (node, labels), cnt in frontier.items():
            for child in succ[node]:
                nxt[(child, labels + (keys[child],))] += cnt
        frontier = dict(nxt)
    return by_length


def kernel_bruteforce(
    g1: Cfg, g2: Cfg, table: LabelSimilarityTable, params: KernelParams
) -> float:
    """Kernel by explicit walk-pair enumeration; exponential, small inputs only."""
    if g1.n_nodes * g2.n_nodes > BRUTEFORCE_MAX_PRODUCT_NODES:
        raise ValueError(
            "brute-force kernel limited to |V1|*|V2| <= "
            f"{BRUTEFORCE_MAX_PRODUCT_NODES}, got {g1.n_nodes * g2.n_nodes}"
        )
    if params.max_len > BRUTEFORCE_MAX_LEN:
        raise ValueError(
            f"brute-force kernel limited to L <= {BRUTEFORCE_MAX_LEN}, "
            f"got {params.max_len}"
        )
    walks1 = _walk_label_counts(g1, params.max_len)
    walks2 = _walk_label_counts(g2, params.max_len)
    value = 0.0
    factor = 1.0
    for n in range(params.max_len + 1):
        level = 0.0
        for labels1, cnt1 in walks1[n].items():
            for labels2, cnt2 in walks2[n].items():
                score = 1.0
                for a, b in zip(labels1, labels2):
                    score *= table.score(a, b)
                    if score == 0.0:
                        break
                level += cnt1 * cnt2 * score
        value += factor * level
        factor *= params.lam
    if not params.normalize:
        return value
    k11 = kernel_bruteforce(g1, g1, table, KernelParams(params.lam, params.max_len))
    k22 = kernel_bruteforce(g2, g2, table, KernelParams(params.lam, params.max_len))
    denom = k11 * k22
    if denom == 0.0:
        return 0.0
    return value / float(np.sqrt(denom))


@dataclass(frozen=True)
class GramMatrix:
    """Pairwise kernel values over a named function list."""

    names: tuple[str, ...]
    values: np.ndarray
    params: KernelParams
    table_digest: str

    def index_of(self, name: str) -> int:
        return self.names.index(name)


def gram_profiles(
    cfgs: list[Cfg],
    table: LabelSimilarityTable,
    max_len: int,
    workers: int = 1,
) -> np.ndarray:
    """Walk profiles for every graph pair: shape (n, n, max_len + 1).

    Profiles do not depend on lambda, so one pass serves a whole lambda
    grid.  Each (i, j) entry is computed independently; the result is
    identical for any worker count.
    """
    n = len(cfgs)
    out = np.zeros((n, n, max_len + 1))
    pairs = [(i, j) for i in range(n) for j in range(i, n)]

    def fill(pair: tuple[int, int]) -> None:
        i, j = pair
        profile = walk_profile(cfgs[i], cfgs[j], table, max_len)
        out[i, j] = profile
        out[j, i] = profile

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, pairs))
    else:
        for pair in pairs:
            fill(pair)
    return out


def gram_from_profiles(
    profiles: np.ndarray,
    names: list[str],
    params: KernelParams,
    table_digest: str,
    check_psd: bool = True,
) -> GramMatrix:
    lam_powers = params.lam ** np.arange(profiles.shape[2])
    lam_powers[0] = 1.0  # 0**0 == 1 by the length-0 walk convention
    # einsum keeps mirrored profile entries bit-identical, so the matrix is
    # exactly symmetric; a batched matmul would not guarantee that.
    values = np.einsum("ijk,k->ij", profiles, lam_powers)
    if params.normalize:
        diag = np.sqrt(np.diag(values))
        denom = np.outer(diag, diag)
        with np.errstate(invalid="ignore", divide="ignore"):
            values = np.where(denom > 0.0, values / denom, 0.0)
    if check_psd:
        eigs = np.linalg.eigvalsh((values + values.T) / 2.0)
        if eigs[0] < -PSD_RTOL * max(eigs[-1], 0.0):
            warnings.warn(
                f"Gram matrix is not positive semidefinite: min eigenvalue "
                f"{eigs[0]:.6e}, max {eigs[-1]:.6e}",
                stacklevel=2,
            )
    return GramMatrix(tuple(names), values, params, table_digest)


def gram(
    cfgs: list[Cfg],
    table: LabelSimilarityTable,
    params: KernelParams,
    workers: int = 1,
) -> GramMatrix:
    """Assemble the full kernel matrix over a list of graphs."""
    if not cfgs:
        raise ValueError("gram needs at least one graph")
    profiles = gram_profiles(cfgs, table, params.max_len, workers=workers)
    return gram_from_profiles(
        profiles, [c.name for c in cfgs], params, table.digest()
    )


def format_gram(gm: GramMatrix) -> str:
    lines = [
        "names: " + ",".join(gm.names),
        f"lambda: {gm.params.lam!r}",
        f"L: {gm.params.max_len}",
        f"normalized: {'true' if gm.params.normalize else 'false'}",
        f"table_digest: {gm.table_digest}",
    ]
    for row in gm.values:
        lines.append(" ".join(f"{v:.12e}" for v in row))
    return "\n".join(lines) + "\n"


def parse_gram(text: str) -> GramMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header: dict[str, str] = {}
    rows: list[list[float]] = []
    for line in lines:
        key, _, rest = line.partition(":")
        if not rows and rest and key in ("names", "lambda", "L", "normalized", "table_digest"):
            header[key] = rest.strip()
        else:
            rows.append([float(v) for v in line.split()])
    try:
        names = tuple(header["names"].split(","))
        params = KernelParams(
            lam=float(header["lambda"]),
            max_len=int(header["L"]),
            normalize=header["normalized"] == "true",
        )
        digest = header["table_digest"]
    except KeyError as exc:
        raise ValueError(f"gram file missing header field {exc}") from None
    values = np.array(rows)
    if values.shape != (len(names), len(names)):
        raise ValueError(
            f"gram file has {values.shape} values for {len(names)} names"
        )
    if not np.allclose(values, values.T, atol=1e-9):
        raise ValueError("gram file values are not symmetric")
    return GramMatrix(names, values, params, digest)

"""Shared test utilities: random valid CFGs and independent oracles."""

from __future__ import annotations

import itertools

import numpy as np

from mrkernel.cfg import Cfg, NodeLabel

MIDDLE_LABELS = [
    "assign", "const", "add", "sub", "mul", "div", "mod", "neg",
    "eq", "neq", "lt", "le", "gt", "ge", "and", "or", "not",
    "index_load", "index_store", "param", "return",
    "call:int", "call:real", "call:bool", "call:matrix", "call:void",
]


def random_cfg(rng: np.random.Generator, name: str = "g", max_mid: int = 4) -> Cfg:
    """A random valid CFG: a start-to-exit chain plus random extra edges."""
    n_mid = int(rng.integers(0, max_mid + 1))
    labels = (
        ["start"]
        + [MIDDLE_LABELS[int(rng.integers(len(MIDDLE_LABELS)))] for _ in range(n_mid)]
        + ["exit"]
    )
    nodes = [(f"n{i}", NodeLabel.parse(k)) for i, k in enumerate(labels)]
    n = len(nodes)
    edges = [(f"n{i}", f"n{i + 1}") for i in range(n - 1)]
    present = set(edges)
    for i in range(n - 1):  # no extra out-edges from exit
        for j in range(n):
            if i == j or (f"n{i}", f"n{j}") in present:
                continue
            if rng.random() < 0.15:
                edges.append((f"n{i}", f"n{j}"))
                present.add((f"n{i}", f"n{j}"))
    return Cfg.build(name, nodes, edges)


def bare_path(name: str, labels: list[str]) -> Cfg:
    """A label path without start/exit bookkeeping; for kernel math only."""
    nodes = tuple((f"p{i}", NodeLabel.parse(k)) for i, k in enumerate(labels))
    edges = tuple((f"p{i}", f"p{i + 1}") for i in range(len(labels) - 1))
    return Cfg(name, nodes, edges, "", "")


def rank_sum_auc(pos: list[float], neg: list[float]) -> float:
    """AUC via the Mann-Whitney rank-sum formula with average ranks for ties."""
    scores = list(pos) + list(neg)
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    ranks = [0.0] * len(scores)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    rank_sum_pos = sum(ranks[: len(pos)])
    u = rank_sum_pos - len(pos) * (len(pos) + 1) / 2.0
    return u / (len(pos) * len(neg))


def svm_dual_optimum(kernel: np.ndarray, labels: np.ndarray, c: float) -> float:
    """Exact dual maximum by enumerating the active sets of the box.

    Every candidate fixes each coefficient at 0, at C, or leaves it free;
    free coefficients solve the equality-constrained stationarity system.
    Feasible candidates are scored directly, so the best one is the true
    optimum regardless of how the iterative solver walks there.
    """
    y = np.asarray(labels, dtype=float)
    n = len(y)
    q = (y[:, None] * y[None, :]) * kernel

    def objective(alpha: np.ndarray) -> float:
        return float(alpha.sum() - 0.5 * alpha @ q @ alpha)

    best = -np.inf
    for states in itertools.product((0, 1, 2), repeat=n):
        alpha = np.zeros(n)
        free = [i for i, s in enumerate(states) if s == 2]
        for i, s in enumerate(states):
            if s == 1:
                alpha[i] = c
        if free:
            k = len(free)
            system = np.zeros((k + 1, k + 1))
            system[:k, :k] = q[np.ix_(free, free)]
            system[:k, k] = y[free]
            system[k, :k] = y[free]
            fixed = [i for i in range(n) if i not in free]
            rhs = np.concatenate(
                [
                    1.0 - q[np.ix_(free, fixed)] @ alpha[fixed],
                    [-float(y[fixed] @ alpha[fixed])],
                ]
            )
            try:
                sol = np.linalg.solve(system, rhs)
            except np.linalg.LinAlgError:
                sol, *_ = np.linalg.lstsq(system, rhs, rcond=None)
            cand = sol[:k]
            if np.any(cand < -1e-9) or np.any(cand > c + 1e-9):
                continue
            alpha[free] = np.clip(cand, 0.0, c)
        if abs(float(y @ alpha)) > 1e-8 * max(1.0, c):
            continue
        best = max(best, objective(alpha))
    return best

"""Soft-margin SVM on precomputed kernel values.

Training solves the standard dual

    maximize  sum(a) - 0.5 * sum_ij a_i a_j y_i y_j K_ij
    subject   0 <= a_i <= C,  sum_i a_i y_i = 0

with sequential two-variable optimization: the first index is the next
KKT violator in scan order, the second is drawn from a seeded generator
(falling back to the remaining indices when a step makes no progress).
Training is deterministic for a fixed instance order and seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Curvature floor for the two-variable subproblem; guards against tiny
# negative Gram eigenvalues produced by series truncation.
ETA_FLOOR = 1e-12


class SingleClassError(ValueError):
    """Training data contains only one class; caller must re-stratify."""


@dataclass(frozen=True)
class SvmParams:
    C: float
    tolerance: float = 1e-3
    max_passes: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.C <= 0.0:
            raise ValueError(f"C must be positive, got {self.C}")
        if self.tolerance <= 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")


@dataclass(frozen=True)
class SvmModel:
    """Trained dual solution: coefficients, labels, bias, and parameters."""

    alphas: np.ndarray
    labels: np.ndarray
    bias: float
    support_indices: tuple[int, ...]
    params: SvmParams

    @property
    def n_train(self) -> int:
        return len(self.alphas)


def _validate_training_inputs(kernel: np.ndarray, labels: np.ndarray) -> None:
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise ValueError(f"kernel matrix must be square, got {kernel.shape}")
    if kernel.shape[0] != len(labels):
        raise ValueError(
            f"{len(labels)} labels for a {kernel.shape[0]}-instance kernel"
        )
    if not np.all(np.isin(labels, (-1, 1))):
        raise ValueError("labels must be +1 or -1")
    if len(set(labels.tolist())) < 2:
        raise SingleClassError("training labels contain a single class")


def train(kernel: np.ndarray, labels: list[int] | np.ndarray, params: SvmParams) -> SvmModel:
    """Fit the dual on a precomputed kernel matrix restricted to training rows."""
    kernel = np.asarray(kernel, dtype=float)
    y = np.asarray(labels, dtype=float)
    _validate_training_inputs(kernel, y)

    n = len(y)
    C = params.C
    tol = params.tolerance
    rng = np.random.default_rng(params.seed)
    alphas = np.zeros(n)
    b = 0.0

    def raw_decision(i: int) -> float:
        return float((alphas * y) @ kernel[:, i])

    def take_step(i: int, j: int) -> bool:
        nonlocal b
        if i == j:
            return False
        e_i = raw_decision(i) + b - y[i]
        e_j = raw_decision(j) + b - y[j]
        a_i_old, a_j_old = alphas[i], alphas[j]
        if y[i] != y[j]:
            lo = max(0.0, a_j_old - a_i_old)
            hi = min(C, C + a_j_old - a_i_old)
        else:
            lo = max(0.0, a_i_old + a_j_old - C)
            hi = min(C, a_i_old + a_j_old)
        if lo >= hi:
            return False
        eta = kernel[i, i] + kernel[j, j] - 2.0 * kernel[i, j]
        if eta < ETA_FLOOR:
            eta = ETA_FLOOR
        a_j = a_j_old + y[j] * (e_i - e_j) / eta
        a_j = min(hi, max(lo, a_j))
        if abs(a_j - a_j_old) < 1e-14 * (a_j + a_j_old + 1.0):
            return False
        a_i = a_i_old + y[i] * y[j] * (a_j_old - a_j)
        alphas[i], alphas[j] = a_i, a_j
        # Keep a running bias estimate to steer KKT checks between passes.
        b1 = b - e_i - y[i] * (a_i - a_i_old) * kernel[i, i] \
            - y[j] * (a_j - a_j_old) * kernel[i, j]
        b2 = b - e_j - y[i] * (a_i - a_i_old) * kernel[i, j] \
            - y[j] * (a_j - a_j_old) * kernel[j, j]
        if 0.0 < a_i < C:
            b = b1
        elif 0.0 < a_j < C:
            b = b2
        else:
            b = (b1 + b2) / 2.0
        return True

    stalled = 0
    hard_cap = max(1000, 50 * params.max_passes)
    for _ in range(hard_cap):
        violations = 0
        progressed = 0
        for i in range(n):
            e_i = raw_decision(i) + b - y[i]
            r = y[i] * e_i
            if (r < -tol and alphas[i] < C) or (r > tol and alphas[i] > 0.0):
                violations += 1
                others = np.delete(np.arange(n), i)
                first = int(rng.integers(len(others)))
                order = np.concatenate((others[first:], others[:first]))
                for j in order:
                    if take_step(i, int(j)):
                        progressed += 1
                        break
        if violations == 0:
            break
        stalled = stalled + 1 if progressed == 0 else 0
        if stalled >= params.max_passes:
            break

    bias = _final_bias(kernel, y, alphas, C)
    support = tuple(int(i) for i in np.flatnonzero(alphas > 0.0))
    return SvmModel(alphas, y.astype(int), bias, support, params)


def _final_bias(kernel: np.ndarray, y: np.ndarray, alphas: np.ndarray, C: float) -> float:
    """Deterministic bias: mean over free support vectors, else the midpoint
    of the feasible interval implied by the bound vectors."""
    raw = kernel @ (alphas * y)
    free = (alphas > 0.0) & (alphas < C)
    if np.any(free):
        return float(np.mean(y[free] - raw[free]))
    lo, hi = -np.inf, np.inf
    for i in range(len(y)):
        bound = y[i] - raw[i]
        at_zero = alphas[i] <= 0.0
        if (at_zero and y[i] > 0) or (not at_zero and y[i] < 0):
            lo = max(lo, bound)
        else:
            hi = min(hi, bound)
    if not np.isfinite(lo):
        return float(hi)
    if not np.isfinite(hi):
        return float(lo)
    return float((lo + hi) / 2.0)


def decision_values(model: SvmModel, cross_kernel: np.ndarray) -> np.ndarray:
    """Decision scores f_i = sum_j a_j y_j K(test_i, train_j) + bias."""
    cross_kernel = np.atleast_2d(np.asarray(cross_kernel, dtype=float))
    if cross_kernel.shape[1] != model.n_train:
        raise ValueError(
            f"cross-kernel has {cross_kernel.shape[1]} columns, "
            f"model was trained on {model.n_train} instances"
        )
    return cross_kernel @ (model.alphas * model.labels) + model.bias


def predict(model: SvmModel, cross_kernel: np.ndarray) -> np.ndarray:
    """Signed predictions; a decision value of exactly 0 maps to +1."""
    scores = decision_values(model, cross_kernel)
    return np.where(scores >= 0.0, 1, -1)


def dual_objective(kernel: np.ndarray, labels: np.ndarray, alphas: np.ndarray) -> float:
    y = np.asarray(labels, dtype=float)
    a = np.asarray(alphas, dtype=float)
    q = (y[:, None] * y[None, :]) * kernel
    return float(a.sum() - 0.5 * a @ q @ a)


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

def format_model(model: SvmModel, mr: str = "", meta: dict[str, str] | None = None) -> str:
    """Text serialization: header fields plus one line per support vector."""
    lines = [
        f"C: {model.params.C!r}",
        f"bias: {model.bias!r}",
        f"n: {model.n_train}",
    ]
    if mr:
        lines.append(f"mr: {mr}")
    for key, value in (meta or {}).items():
        lines.append(f"{key}: {value}")
    for i in model.support_indices:
        lines.append(f"sv: {i} {int(model.labels[i])} {float(model.alphas[i])!r}")
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> tuple[SvmModel, str, dict[str, str]]:
    """Read a model file; returns the model, its MR name, and extra metadata."""
    header: dict[str, str] = {}
    svs: list[tuple[int, int, float]] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        key, _, rest = line.partition(":")
        key, rest = key.strip(), rest.strip()
        if key == "sv":
            idx_s, y_s, a_s = rest.split()
            svs.append((int(idx_s), int(y_s), float(a_s)))
        else:
            header[key] = rest
    try:
        c = float(header["C"])
        bias = float(header["bias"])
        n = int(header["n"])
    except KeyError as exc:
        raise ValueError(f"model file missing header field {exc}") from None
    alphas = np.zeros(n)
    labels = np.ones(n, dtype=int)
    for idx, y_val, alpha in svs:
        if not 0 <= idx < n:
            raise ValueError(f"support index {idx} outside 0..{n - 1}")
        alphas[idx] = alpha
        labels[idx] = y_val
    model = SvmModel(
        alphas, labels, bias,
        tuple(i for i, _, _ in svs), SvmParams(C=c),
    )
    mr = header.pop("mr", "")
    for key in ("C", "bias", "n"):
        header.pop(key, None)
    return model, mr, header

"""The metamorphic-relation catalog: input transforms and output checks.

Three high-level categories, each with sub-transformations:

* Permutative (permute all elements / rows / columns): output size must
  be preserved.
* Additive (add a scalar / an entrywise-positive matrix / a scalar to a
  subset of entries): output entries must increase or remain the same.
* Multiplicative (scale everything / a subset of entries): output
  entries must strictly increase, except entries that are exactly zero.

The checks above are sound only for strictly positive inputs, positive
addends, and multipliers above one; input generation enforces that.
Value-typed scalar arguments participate in the scalar transforms (an
additive follow-up shifts them, a multiplicative one scales them);
index-typed arguments are never transformed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrices import Matrix

CATEGORIES = ("Permutative", "Additive", "Multiplicative")

VARIANTS: dict[str, tuple[str, ...]] = {
    "Permutative": ("all-elements", "rows", "columns"),
    "Additive": ("scalar", "matrix-add", "subset"),
    "Multiplicative": ("scalar", "subset"),
}

OUTPUT_CHECKS = {
    "Permutative": "size-preserved",
    "Additive": "elementwise-geq",
    "Multiplicative": "elementwise-gt",
}

#: Slack for the elementwise comparisons.
COMPARE_TOL = 1e-9
#: Entries this close to zero are exempt from the strict-increase check
#: (zero stays zero under multiplication).
ZERO_TOL = 1e-12


class SkipCase(Exception):
    """The input cannot be transformed by this variant (e.g. nothing to permute)."""


@dataclass(frozen=True)
class MetamorphicRelation:
    category: str
    variant: str

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown MR category {self.category!r}")
        if self.variant not in VARIANTS[self.category]:
            raise ValueError(
                f"unknown {self.category} variant {self.variant!r}"
            )

    @property
    def output_check(self) -> str:
        return OUTPUT_CHECKS[self.category]


ALL_RELATIONS = tuple(
    MetamorphicRelation(category, variant)
    for category in CATEGORIES
    for variant in VARIANTS[category]
)


def relations_for(category: str) -> tuple[MetamorphicRelation, ...]:
    return tuple(r for r in ALL_RELATIONS if r.category == category)


# ---------------------------------------------------------------------------
# Subject input signatures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatrixArg:
    """A matrix input; dimension variables shared across arguments couple shapes."""

    rows: str = "m"
    cols: str = "n"


@dataclass(frozen=True)
class ScalarArg:
    """A value-typed scalar input; participates in scalar transforms."""


@dataclass(frozen=True)
class IndexArg:
    """An index input, bounded by a dimension variable ("min" = smallest drawn)."""

    bound: str = "min"


Signature = tuple[MatrixArg | ScalarArg | IndexArg, ...]


@dataclass(frozen=True)
class HarnessConfig:
    dim_lo: int = 2
    dim_hi: int = 6
    value_lo: float = 1.0
    value_hi: float = 10.0
    addend: float = 3.0
    multiplier: float = 2.0

    def __post_init__(self) -> None:
        if self.dim_lo < 1 or self.dim_hi < self.dim_lo:
            raise ValueError("bad dimension range")
        if self.value_lo <= 0.0:
            raise ValueError("input values must be strictly positive")
        if self.addend <= 0.0:
            raise ValueError("additive constant must be positive")
        if self.multiplier <= 1.0:
            raise ValueError("multiplier must exceed one")


DEFAULT_CONFIG = HarnessConfig()


def generate_source_input(
    signature: Signature, rng: np.random.Generator, config: HarnessConfig = DEFAULT_CONFIG
) -> list[object]:
    """Draw a conforming, strictly positive input tuple for a signature."""
    dims: dict[str, int] = {}
    for arg in signature:
        if isinstance(arg, MatrixArg):
            for var in (arg.rows, arg.cols):
                if var not in dims:
                    dims[var] = int(rng.integers(config.dim_lo, config.dim_hi + 1))
    if not any(isinstance(a, MatrixArg) for a in signature):
        raise ValueError("signature has no matrix input")

    inputs: list[object] = []
    for arg in signature:
        if isinstance(arg, MatrixArg):
            r, c = dims[arg.rows], dims[arg.cols]
            data = rng.uniform(config.value_lo, config.value_hi, size=r * c)
            inputs.append(Matrix(r, c, [float(v) for v in data]))
        elif isinstance(arg, ScalarArg):
            inputs.append(float(rng.uniform(config.value_lo, config.value_hi)))
        elif isinstance(arg, IndexArg):
            bound = min(dims.values()) if arg.bound == "min" else dims[arg.bound]
            inputs.append(int(rng.integers(0, bound)))
        else:
            raise ValueError(f"unknown signature part {arg!r}")
    return inputs


# ---------------------------------------------------------------------------
# Input transforms
# ---------------------------------------------------------------------------

def _nonidentity_permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 2:
        raise SkipCase("nothing to permute")
    while True:
        perm = rng.permutation(n)
        if not np.array_equal(perm, np.arange(n)):
            return perm


def _permute_matrix(matrix: Matrix, variant: str, rng: np.random.Generator) -> tuple[Matrix, str]:
    if variant == "all-elements":
        perm = _nonidentity_permutation(len(matrix.data), rng)
        data = [matrix.data[p] for p in perm]
        return Matrix(matrix.rows, matrix.cols, data), f"perm={perm.tolist()}"
    grid = matrix.to_rows()
    if variant == "rows":
        perm = _nonidentity_permutation(matrix.rows, rng)
        return Matrix.from_rows([grid[p] for p in perm]), f"rowperm={perm.tolist()}"
    perm = _nonidentity_permutation(matrix.cols, rng)
    permuted = [[row[p] for p in perm] for row in grid]
    return Matrix.from_rows(permuted), f"colperm={perm.tolist()}"


def apply_transform(
    relation: MetamorphicRelation,
    inputs: list[object],
    signature: Signature,
    rng: np.random.Generator,
    config: HarnessConfig = DEFAULT_CONFIG,
) -> tuple[list[object], str]:
    """Build the follow-up input; returns (inputs, reproducibility note).

    Raises :class:`SkipCase` when the variant cannot produce a follow-up
    that differs from the source.
    """
    if len(inputs) != len(signature):
        raise ValueError("inputs do not match signature")
    out = [v.copy() if isinstance(v, Matrix) else v for v in inputs]
    notes: list[str] = []

    if relation.category == "Permutative":
        for pos, (arg, value) in enumerate(zip(signature, out)):
            if isinstance(arg, MatrixArg):
                permuted, note = _permute_matrix(value, relation.variant, rng)
                out[pos] = permuted
                notes.append(f"arg{pos}:{note}")
        return out, " ".join(notes)

    if relation.category == "Additive":
        c = config.addend
        if relation.variant == "scalar":
            for pos, (arg, value) in enumerate(zip(signature, out)):
                if isinstance(arg, MatrixArg):
                    out[pos] = Matrix(value.rows, value.cols, [v + c for v in value.data])
                elif isinstance(arg, ScalarArg):
                    out[pos] = value + c
            return out, f"c={c}"
        if relation.variant == "matrix-add":
            for pos, (arg, value) in enumerate(zip(signature, out)):
                if isinstance(arg, MatrixArg):
                    addend = rng.uniform(
                        config.value_lo, config.value_hi, size=len(value.data)
                    )
                    out[pos] = Matrix(
                        value.rows, value.cols,
                        [v + float(a) for v, a in zip(value.data, addend)],
                    )
                    notes.append(f"arg{pos}:+M")
            return out, " ".join(notes)
        subset = _entry_subset(signature, out, rng)
        for pos, flat in subset:
            out[pos].data[flat] += c
        return out, f"c={c} subset={sorted(subset)}"

    k = config.multiplier
    if relation.variant == "scalar":
        for pos, (arg, value) in enumerate(zip(signature, out)):
            if isinstance(arg, MatrixArg):
                out[pos] = Matrix(value.rows, value.cols, [v * k for v in value.data])
            elif isinstance(arg, ScalarArg):
                out[pos] = value * k
        return out, f"k={k}"
    subset = _entry_subset(signature, out, rng)
    for pos, flat in subset:
        out[pos].data[flat] *= k
    for pos, (arg, value) in enumerate(zip(signature, out)):
        if isinstance(arg, ScalarArg):
            out[pos] = value * k
    return out, f"k={k} subset={sorted(subset)}"


def _entry_subset(
    signature: Signature, inputs: list[object], rng: np.random.Generator
) -> list[tuple[int, int]]:
    """A nonempty proper subset of all matrix entry positions, as (arg, flat) pairs."""
    universe = [
        (pos, flat)
        for pos, (arg, value) in enumerate(zip(signature, inputs))
        if isinstance(arg, MatrixArg)
        for flat in range(len(value.data))
    ]
    if len(universe) < 2:
        raise SkipCase("no proper nonempty entry subset exists")
    size = int(rng.integers(1, len(universe)))
    picks = rng.choice(len(universe), size=size, replace=False)
    return [universe[int(p)] for p in picks]


# ---------------------------------------------------------------------------
# Output checks
# ---------------------------------------------------------------------------

def check_relation(
    relation: MetamorphicRelation, source_output: Matrix, follow_up_output: Matrix
) -> tuple[bool, str | None]:
    """Apply the category's output check; returns (passed, first violation)."""
    if not source_output.same_size(follow_up_output):
        return False, (
            f"size {source_output.rows}x{source_output.cols} -> "
            f"{follow_up_output.rows}x{follow_up_output.cols}"
        )
    if relation.output_check == "size-preserved":
        return True, None

    strict = relation.output_check == "elementwise-gt"
    for i in range(source_output.rows):
        for j in range(source_output.cols):
            src = source_output.get(i, j)
            fup = follow_up_output.get(i, j)
            if strict and abs(src) > ZERO_TOL:
                if not fup > src + COMPARE_TOL:
                    return False, (
                        f"row {i} col {j}: {fup!r} not greater than {src!r}"
                    )
            elif fup < src - COMPARE_TOL:
                return False, (
                    f"row {i} col {j}: {fup!r} decreased from {src!r}"
                )
    return True, None

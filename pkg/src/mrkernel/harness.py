"""Metamorphic-testing campaigns over matrix-function subjects.

A campaign runs every relation variant of the requested categories for a
number of seeded trials and derives one +1/-1 label per category: positive
only if every executed case of every variant passed.  Skipped cases (the
variant could not transform the input) are excluded, but each variant must
execute at least once.  A subject that raises during execution is recorded
as a fault and the category goes negative.

Subjects are either the built-in Python reference implementations below or
mini-language functions run through the bundled interpreter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import minilang as ml
from .interp import ExecutionFault, Interpreter
from .matrices import Matrix
from .seeding import derive_seed
from .relations import (
    CATEGORIES,
    DEFAULT_CONFIG,
    VARIANTS,
    HarnessConfig,
    IndexArg,
    MatrixArg,
    MetamorphicRelation,
    ScalarArg,
    Signature,
    SkipCase,
    apply_transform,
    check_relation,
    generate_source_input,
)

DEFAULT_TRIALS = 100


@dataclass(frozen=True)
class Subject:
    name: str
    func: Callable[[list[object]], Matrix]
    signature: Signature


@dataclass(frozen=True)
class MrCase:
    relation: MetamorphicRelation
    source_input: tuple[object, ...]
    follow_up_input: tuple[object, ...]
    seed: int
    note: str = ""


@dataclass(frozen=True)
class MrVerdict:
    case: MrCase
    source_output: Matrix
    follow_up_output: Matrix
    passed: bool
    detail: str | None = None


@dataclass
class CampaignResult:
    subject: str
    labels: dict[str, int]
    verdicts: list[MrVerdict] = field(default_factory=list)
    faults: list[str] = field(default_factory=list)
    skipped: int = 0

    def report_lines(self) -> list[str]:
        lines = []
        for verdict in self.verdicts:
            case = verdict.case
            status = "pass" if verdict.passed else "fail"
            line = (
                f"{self.subject},{case.relation.category},{case.relation.variant},"
                f"{case.seed},{status}"
            )
            if verdict.detail:
                line += f",{verdict.detail}"
            lines.append(line)
        return lines


def _run_subject(subject: Subject, inputs: list[object]) -> Matrix:
    args = [v.copy() if isinstance(v, Matrix) else v for v in inputs]
    try:
        output = subject.func(args)
    except ExecutionFault as exc:
        raise ExecutionFault(f"{subject.name}: {exc}") from exc
    except Exception as exc:
        raise ExecutionFault(f"{subject.name}: {type(exc).__name__}: {exc}") from exc
    if not isinstance(output, Matrix):
        raise ExecutionFault(f"{subject.name}: returned {type(output).__name__}, not a matrix")
    try:
        Matrix(output.rows, output.cols, list(output.data))
    except ValueError as exc:
        raise ExecutionFault(f"{subject.name}: bad output: {exc}") from None
    return output


def run_campaign(
    subject: Subject,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    config: HarnessConfig = DEFAULT_CONFIG,
    categories: tuple[str, ...] = CATEGORIES,
) -> CampaignResult:
    """Execute trials for every variant of the given categories."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    result = CampaignResult(subject.name, {})
    for category in categories:
        positive = True
        for variant in VARIANTS[category]:
            relation = MetamorphicRelation(category, variant)
            executed = 0
            for trial in range(trials):
                case_seed = derive_seed(seed, subject.name, category, variant, trial)
                rng = np.random.default_rng(case_seed)
                inputs = generate_source_input(subject.signature, rng, config)
                try:
                    follow_up, note = apply_transform(
                        relation, inputs, subject.signature, rng, config
                    )
                except SkipCase:
                    result.skipped += 1
                    continue
                case = MrCase(relation, tuple(inputs), tuple(follow_up), case_seed, note)
                try:
                    src_out = _run_subject(subject, inputs)
                    fup_out = _run_subject(subject, follow_up)
                except ExecutionFault as exc:
                    result.faults.append(f"{category}/{variant} seed {case_seed}: {exc}")
                    positive = False
                    continue
                passed, detail = check_relation(relation, src_out, fup_out)
                result.verdicts.append(MrVerdict(case, src_out, fup_out, passed, detail))
                executed += 1
                if not passed:
                    positive = False
            if executed == 0:
                positive = False
        result.labels[category] = 1 if positive else -1
    return result


def campaign_labels(
    subjects: list[Subject],
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    config: HarnessConfig = DEFAULT_CONFIG,
) -> dict[str, dict[str, int]]:
    """Labels for a list of subjects: name -> category -> +-1."""
    return {
        s.name: run_campaign(s, trials=trials, seed=seed, config=config).labels
        for s in subjects
    }


# ---------------------------------------------------------------------------
# Built-in reference subjects
# ---------------------------------------------------------------------------

def _ref_add(args: list[object]) -> Matrix:
    a, b = args
    out = Matrix.zeros(a.rows, a.cols)
    for i in range(a.rows):
        for j in range(a.cols):
            out.set(i, j, a.get(i, j) + b.get(i, j))
    return out


def _ref_subtract(args: list[object]) -> Matrix:
    a, b = args
    out = Matrix.zeros(a.rows, a.cols)
    for i in range(a.rows):
        for j in range(a.cols):
            out.set(i, j, a.get(i, j) - b.get(i, j))
    return out


def _ref_multiply(args: list[object]) -> Matrix:
    a, b = args
    out = Matrix.zeros(a.rows, b.cols)
    for i in range(a.rows):
        for j in range(b.cols):
            total = 0.0
            for l in range(a.cols):
                total += a.get(i, l) * b.get(l, j)
            out.set(i, j, total)
    return out


def _ref_scalar_multiply(args: list[object]) -> Matrix:
    a, s = args
    out = Matrix.zeros(a.rows, a.cols)
    for i in range(a.rows):
        for j in range(a.cols):
            out.set(i, j, a.get(i, j) * s)
    return out


def _ref_transpose(args: list[object]) -> Matrix:
    (a,) = args
    out = Matrix.zeros(a.cols, a.rows)
    for i in range(a.rows):
        for j in range(a.cols):
            out.set(j, i, a.get(i, j))
    return out


def _ref_get_row(args: list[object]) -> Matrix:
    a, i = args
    out = Matrix.zeros(1, a.cols)
    for j in range(a.cols):
        out.set(0, j, a.get(i, j))
    return out


def _ref_get_column(args: list[object]) -> Matrix:
    a, j = args
    out = Matrix.zeros(a.rows, 1)
    for i in range(a.rows):
        out.set(i, 0, a.get(i, j))
    return out


def _ref_hadamard(args: list[object]) -> Matrix:
    a, b = args
    out = Matrix.zeros(a.rows, a.cols)
    for i in range(a.rows):
        for j in range(a.cols):
            out.set(i, j, a.get(i, j) * b.get(i, j))
    return out


def _ref_trace(args: list[object]) -> Matrix:
    (a,) = args
    total = 0.0
    for i in range(a.rows):
        total += a.get(i, i)
    out = Matrix.zeros(1, 1)
    out.set(0, 0, total)
    return out


def _ref_copy(args: list[object]) -> Matrix:
    (a,) = args
    return a.copy()


_SAME_SHAPE_PAIR: Signature = (MatrixArg("m", "n"), MatrixArg("m", "n"))

REFERENCE_SUBJECTS: dict[str, Subject] = {
    s.name: s
    for s in (
        Subject("add", _ref_add, _SAME_SHAPE_PAIR),
        Subject("subtract", _ref_subtract, _SAME_SHAPE_PAIR),
        Subject("multiply", _ref_multiply, (MatrixArg("m", "k"), MatrixArg("k", "n"))),
        Subject("scalar_multiply", _ref_scalar_multiply, (MatrixArg("m", "n"), ScalarArg())),
        Subject("transpose", _ref_transpose, (MatrixArg("m", "n"),)),
        Subject("get_row", _ref_get_row, (MatrixArg("m", "n"), IndexArg("m"))),
        Subject("get_column", _ref_get_column, (MatrixArg("m", "n"), IndexArg("n"))),
        Subject("hadamard", _ref_hadamard, _SAME_SHAPE_PAIR),
        Subject("trace", _ref_trace, (MatrixArg("m", "m"),)),
        Subject("copy", _ref_copy, (MatrixArg("m", "n"),)),
    )
}

#: Category labels every reference subject is expected to earn from a
#: campaign under the default configuration.
EXPECTED_REFERENCE_LABELS: dict[str, dict[str, int]] = {
    "add": {"Permutative": 1, "Additive": 1, "Multiplicative": -1},
    "subtract": {"Permutative": 1, "Additive": -1, "Multiplicative": -1},
    "multiply": {"Permutative": 1, "Additive": 1, "Multiplicative": -1},
    "scalar_multiply": {"Permutative": 1, "Additive": 1, "Multiplicative": 1},
    "transpose": {"Permutative": 1, "Additive": 1, "Multiplicative": -1},
    "get_row": {"Permutative": 1, "Additive": 1, "Multiplicative": -1},
    "get_column": {"Permutative": 1, "Additive": 1, "Multiplicative": -1},
    "hadamard": {"Permutative": 1, "Additive": 1, "Multiplicative": -1},
    "trace": {"Permutative": 1, "Additive": 1, "Multiplicative": -1},
    "copy": {"Permutative": 1, "Additive": 1, "Multiplicative": -1},
}


# ---------------------------------------------------------------------------
# Injected-fault variants (each violates at least one category)
# ---------------------------------------------------------------------------

def _faulty_add(args: list[object]) -> Matrix:
    # Sign flip on the last element.
    a, b = args
    out = _ref_add([a, b])
    out.set(a.rows - 1, a.cols - 1, a.get(a.rows - 1, a.cols - 1) - b.get(a.rows - 1, a.cols - 1))
    return out


def _faulty_multiply(args: list[object]) -> Matrix:
    # Inner-loop bound off by one: drops the last summand.
    a, b = args
    out = Matrix.zeros(a.rows, b.cols)
    for i in range(a.rows):
        for j in range(b.cols):
            total = 0.0
            for l in range(a.cols - 1):
                total += a.get(i, l) * b.get(l, j)
            out.set(i, j, total)
    return out


def _faulty_scalar_multiply(args: list[object]) -> Matrix:
    # Divides instead of multiplying.
    a, s = args
    out = Matrix.zeros(a.rows, a.cols)
    for i in range(a.rows):
        for j in range(a.cols):
            out.set(i, j, a.get(i, j) / s)
    return out


def _faulty_copy(args: list[object]) -> Matrix:
    # Negates the first element.
    (a,) = args
    out = a.copy()
    out.set(0, 0, -a.get(0, 0))
    return out


def _faulty_fill(args: list[object]) -> Matrix:
    # Fill that plants a negated value in one corner.
    a, v = args
    out = Matrix.zeros(a.rows, a.cols)
    for i in range(a.rows):
        for j in range(a.cols):
            out.set(i, j, v)
    out.set(0, 0, -v)
    return out


def _faulty_get_row(args: list[object]) -> Matrix:
    # Returns the negated row.
    a, i = args
    out = Matrix.zeros(1, a.cols)
    for j in range(a.cols):
        out.set(0, j, -a.get(i, j))
    return out


FAULT_SUBJECTS: dict[str, Subject] = {
    s.name: s
    for s in (
        Subject("faulty_add", _faulty_add, _SAME_SHAPE_PAIR),
        Subject("faulty_multiply", _faulty_multiply, (MatrixArg("m", "k"), MatrixArg("k", "n"))),
        Subject("faulty_scalar_multiply", _faulty_scalar_multiply, (MatrixArg("m", "n"), ScalarArg())),
        Subject("faulty_copy", _faulty_copy, (MatrixArg("m", "n"),)),
        Subject("faulty_fill", _faulty_fill, (MatrixArg("m", "n"), ScalarArg())),
        Subject("faulty_get_row", _faulty_get_row, (MatrixArg("m", "n"), IndexArg("m"))),
    )
}

#: One category each fault variant is expected to violate.
EXPECTED_FAULT_VIOLATIONS: dict[str, str] = {
    "faulty_add": "Additive",
    "faulty_multiply": "Multiplicative",
    "faulty_scalar_multiply": "Multiplicative",
    "faulty_copy": "Additive",
    "faulty_fill": "Multiplicative",
    "faulty_get_row": "Additive",
}


# ---------------------------------------------------------------------------
# Mini-language subjects
# ---------------------------------------------------------------------------

def heuristic_signature(fn: ml.FnDef) -> Signature:
    """Signature guessed from parameter types: all matrices share one shape,
    ints are indices bounded by the smallest dimension, reals are scalars."""
    parts: list[MatrixArg | ScalarArg | IndexArg] = []
    for _, ptype in fn.params:
        if ptype == "matrix":
            parts.append(MatrixArg("m", "n"))
        elif ptype == "int":
            parts.append(IndexArg("min"))
        elif ptype == "real":
            parts.append(ScalarArg())
        else:
            raise ValueError(f"cannot infer an input role for a {ptype} parameter")
    return tuple(parts)


def subjects_from_program(
    program: ml.Program,
    signatures: dict[str, Signature] | None = None,
) -> dict[str, Subject]:
    """Wrap every matrix-returning function of a program as a subject."""
    interp = Interpreter(program)
    subjects: dict[str, Subject] = {}
    for fn in program.functions:
        if fn.return_type != "matrix":
            continue
        signature = (signatures or {}).get(fn.name) or heuristic_signature(fn)

        def runner(args: list[object], _name: str = fn.name) -> Matrix:
            return interp.call(_name, args)

        subjects[fn.name] = Subject(fn.name, runner, signature)
    return subjects


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def format_report(
    results: list[CampaignResult], trials: int, seed: int
) -> str:
    lines = [f"# mt campaign: trials={trials} seed={seed}"]
    for result in results:
        lines.extend(result.report_lines())
    lines.append("# summary")
    for result in results:
        labels = " ".join(
            f"{category}={result.labels[category]:+d}" for category in CATEGORIES
            if category in result.labels
        )
        extras = []
        if result.faults:
            extras.append(f"faults={len(result.faults)}")
        if result.skipped:
            extras.append(f"skipped={result.skipped}")
        suffix = (" " + " ".join(extras)) if extras else ""
        lines.append(f"# {result.subject}: {labels}{suffix}")
    return "\n".join(lines) + "\n"


def format_labels_csv(labels: dict[str, dict[str, int]]) -> str:
    lines = ["function,MR,label"]
    for name in labels:
        for category in CATEGORIES:
            lines.append(f"{name},{category},{labels[name][category]}")
    return "\n".join(lines) + "\n"

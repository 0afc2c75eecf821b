"""Experimental protocol: stratified splits, grid search, AUC, repetitions.

For each MR category the data is dealt into train/validation/test folds
that preserve the class proportions (largest-remainder apportionment of
each class separately).  A grid over (C, lambda) is scored by validation
AUC; the winner (smallest C, then largest lambda, on ties) is retrained
and scored on the test fold.  The whole procedure repeats with fresh
splits, and the report carries per-repetition detail plus the mean
validation AUC, mean test AUC, and their gap per category.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import svm
from .cfg import LabelSimilarityTable, default_similarity_table
from .corpus import LabeledDataset
from .relations import CATEGORIES
from .rwkernel import KernelParams, gram_from_profiles, gram_profiles
from .seeding import derive_seed

FOLDS = ("train", "validation", "test")

PAPER_C_GRID = (0.1, 1.0, 10.0, 100.0, 1000.0)
DEFAULT_LAMBDA_GRID = tuple(round(0.1 * i, 1) for i in range(10))
DEFAULT_MAX_WALK_LEN = 10
DEFAULT_REPETITIONS = 10

AUC_TIE_TOL = 1e-12


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    seed: int
    assignment: dict[str, str]  # name -> fold

    def members(self, fold: str) -> list[str]:
        return [name for name, f in self.assignment.items() if f == fold]

    def indices(self, names: tuple[str, ...], fold: str) -> np.ndarray:
        return np.array(
            [i for i, name in enumerate(names) if self.assignment[name] == fold],
            dtype=np.intp,
        )


def _apportion(count: int, rng: np.random.Generator) -> dict[str, int]:
    """Largest-remainder split of `count` into the three folds; which folds
    take the remainder is seed-dependent."""
    base, remainder = divmod(count, len(FOLDS))
    sizes = {fold: base for fold in FOLDS}
    for fold_idx in rng.permutation(len(FOLDS))[:remainder]:
        sizes[FOLDS[fold_idx]] += 1
    return sizes


def stratified_split(
    dataset: LabeledDataset, category: str, seed: int, max_attempts: int = 10
) -> SplitSpec:
    """Deal positives and negatives independently into three folds."""
    labels = dataset.labels[category]
    pos = [name for name in dataset.names if labels[name] == 1]
    neg = [name for name in dataset.names if labels[name] == -1]
    if not pos or not neg:
        raise SplitError(f"category {category} is single-class")

    for attempt in range(max_attempts):
        rng = np.random.default_rng(derive_seed(seed, category, attempt))
        assignment: dict[str, str] = {}
        for group in (pos, neg):
            order = [group[i] for i in rng.permutation(len(group))]
            sizes = _apportion(len(group), rng)
            cursor = 0
            for fold in FOLDS:
                for name in order[cursor:cursor + sizes[fold]]:
                    assignment[name] = fold
                cursor += sizes[fold]
        spec = SplitSpec(seed, assignment)
        if all(
            any(assignment[n] == fold for n in pos)
            and any(assignment[n] == fold for n in neg)
            for fold in FOLDS
        ):
            return spec
    raise SplitError(
        f"could not build a stratified split for {category} "
        f"({len(pos)} positives, {len(neg)} negatives) in {max_attempts} attempts"
    )


def auc(scores_positive: list[float], scores_negative: list[float]) -> float:
    """Probability a random positive outscores a random negative; ties count 0.5."""
    if len(scores_positive) == 0 or len(scores_negative) == 0:
        raise ValueError("auc needs at least one score in each class")
    total = 0.0
    for p in scores_positive:
        for n in scores_negative:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(scores_positive) * len(scores_negative))


# ---------------------------------------------------------------------------
# Gram caching over a lambda grid
# ---------------------------------------------------------------------------

class GramCache:
    """Walk profiles computed once; kernel matrices derived per lambda.

    The profiles are lambda-independent, so a whole lambda grid costs one
    pass over the graph pairs.
    """

    def __init__(
        self,
        dataset: LabeledDataset,
        max_len: int = DEFAULT_MAX_WALK_LEN,
        table: LabelSimilarityTable | None = None,
        workers: int = 1,
    ) -> None:
        self.dataset = dataset
        self.max_len = max_len
        self.table = table or default_similarity_table()
        self._profiles = gram_profiles(
            dataset.cfg_list(), self.table, max_len, workers=workers
        )
        self._by_lambda: dict[float, np.ndarray] = {}

    def values(self, lam: float) -> np.ndarray:
        key = float(lam)
        if key not in self._by_lambda:
            gram = gram_from_profiles(
                self._profiles,
                list(self.dataset.names),
                KernelParams(lam=key, max_len=self.max_len),
                self.table.digest(),
                check_psd=False,
            )
            self._by_lambda[key] = gram.values
        return self._by_lambda[key]


# ---------------------------------------------------------------------------
# Grid search and the repeated experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridPoint:
    C: float
    lam: float


@dataclass
class GridSearchOutcome:
    selected: GridPoint
    val_auc: float
    ties: tuple[GridPoint, ...]
    flagged: tuple[GridPoint, ...] = ()


def _fold_scores(
    kernel_values: np.ndarray,
    labels: np.ndarray,
    train_idx: np.ndarray,
    eval_idx: np.ndarray,
    c: float,
    tolerance: float,
    seed: int,
) -> np.ndarray:
    params = svm.SvmParams(C=c, tolerance=tolerance, seed=seed)
    model = svm.train(
        kernel_values[np.ix_(train_idx, train_idx)], labels[train_idx], params
    )
    return svm.decision_values(model, kernel_values[np.ix_(eval_idx, train_idx)])


def _auc_from_scores(scores: np.ndarray, labels: np.ndarray) -> float:
    pos = [float(s) for s, y in zip(scores, labels) if y == 1]
    neg = [float(s) for s, y in zip(scores, labels) if y == -1]
    return auc(pos, neg)


def grid_search(
    cache: GramCache,
    category: str,
    split: SplitSpec,
    c_grid: tuple[float, ...] = PAPER_C_GRID,
    lam_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID,
    tolerance: float = 1e-3,
) -> GridSearchOutcome:
    """Score every (C, lambda) on the validation fold and pick the best.

    Ties are broken toward the smallest C, then the largest lambda; the
    full tie set is recorded.  A grid point whose training fails scores 0
    and is flagged.
    """
    dataset = cache.dataset
    names = dataset.names
    y = np.array([dataset.labels[category][name] for name in names])
    train_idx = split.indices(names, "train")
    val_idx = split.indices(names, "validation")

    scores_by_point: dict[GridPoint, float] = {}
    flagged: list[GridPoint] = []
    for lam in lam_grid:
        kernel_values = cache.values(lam)
        for c in c_grid:
            point = GridPoint(C=c, lam=lam)
            seed = derive_seed(split.seed, category, "grid", repr(c), repr(lam))
            try:
                scores = _fold_scores(
                    kernel_values, y, train_idx, val_idx, c, tolerance, seed
                )
                scores_by_point[point] = _auc_from_scores(scores, y[val_idx])
            except svm.SingleClassError:
                scores_by_point[point] = 0.0
                flagged.append(point)

    best = max(scores_by_point.values())
    ties = tuple(
        sorted(
            (p for p, v in scores_by_point.items() if v >= best - AUC_TIE_TOL),
            key=lambda p: (p.C, -p.lam),
        )
    )
    selected = min(ties, key=lambda p: (p.C, -p.lam))
    return GridSearchOutcome(selected, scores_by_point[selected], ties, tuple(flagged))


@dataclass
class RepetitionResult:
    seed: int
    selected: GridPoint | None = None
    ties: tuple[GridPoint, ...] = ()
    val_auc: float | None = None
    test_auc: float | None = None
    error: str | None = None


@dataclass
class CategoryReport:
    repetitions: list[RepetitionResult] = field(default_factory=list)
    mean_val_auc: float | None = None
    mean_test_auc: float | None = None
    overfit_gap: float | None = None


@dataclass
class EvalReport:
    base_seed: int
    repetitions: int
    c_grid: tuple[float, ...]
    lam_grid: tuple[float, ...]
    max_len: int
    corpus_size: int
    categories: dict[str, CategoryReport] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "base_seed": self.base_seed,
            "repetitions": self.repetitions,
            "c_grid": list(self.c_grid),
            "lambda_grid": list(self.lam_grid),
            "max_walk_len": self.max_len,
            "corpus_size": self.corpus_size,
            "categories": {
                category: {
                    "mean_val_auc": report.mean_val_auc,
                    "mean_test_auc": report.mean_test_auc,
                    "overfit_gap": report.overfit_gap,
                    "repetitions": [
                        {
                            "seed": rep.seed,
                            "selected": (
                                {"C": rep.selected.C, "lambda": rep.selected.lam}
                                if rep.selected
                                else None
                            ),
                            "ties": [
                                {"C": p.C, "lambda": p.lam} for p in rep.ties
                            ],
                            "val_auc": rep.val_auc,
                            "test_auc": rep.test_auc,
                            "error": rep.error,
                        }
                        for rep in report.repetitions
                    ],
                }
                for category, report in self.categories.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [
            "MR prediction evaluation",
            f"  corpus size: {self.corpus_size}",
            f"  repetitions: {self.repetitions}  base seed: {self.base_seed}",
            f"  C grid: {list(self.c_grid)}",
            f"  lambda grid: {list(self.lam_grid)}  L: {self.max_len}",
            "",
        ]
        for category, report in self.categories.items():
            lines.append(f"{category}:")
            for rep in report.repetitions:
                if rep.error:
                    lines.append(f"  seed {rep.seed}: error: {rep.error}")
                    continue
                lines.append(
                    f"  seed {rep.seed}: C={rep.selected.C:g} lambda={rep.selected.lam:g} "
                    f"val_auc={rep.val_auc:.4f} test_auc={rep.test_auc:.4f} "
                    f"ties={len(rep.ties)}"
                )
            if report.mean_val_auc is not None:
                lines.append(
                    f"  mean val AUC {report.mean_val_auc:.4f}  "
                    f"mean test AUC {report.mean_test_auc:.4f}  "
                    f"gap {report.overfit_gap:.4f}"
                )
            lines.append("")
        return "\n".join(lines)


def run_experiment(
    dataset: LabeledDataset,
    repetitions: int = DEFAULT_REPETITIONS,
    base_seed: int = 0,
    c_grid: tuple[float, ...] = PAPER_C_GRID,
    lam_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID,
    max_len: int = DEFAULT_MAX_WALK_LEN,
    tolerance: float = 1e-3,
    workers: int = 1,
    categories: tuple[str, ...] = CATEGORIES,
) -> EvalReport:
    """The full protocol: per repetition, split, select on validation, test."""
    cache = GramCache(dataset, max_len=max_len, workers=workers)
    names = dataset.names
    report = EvalReport(
        base_seed, repetitions, tuple(c_grid), tuple(lam_grid), max_len, len(names)
    )

    for category in categories:
        cat_report = CategoryReport()
        for rep in range(repetitions):
            seed = base_seed + rep
            result = RepetitionResult(seed=seed)
            try:
                split = stratified_split(dataset, category, seed)
                outcome = grid_search(
                    cache, category, split, c_grid, lam_grid, tolerance
                )
                y = np.array([dataset.labels[category][n] for n in names])
                train_idx = split.indices(names, "train")
                test_idx = split.indices(names, "test")
                final_seed = derive_seed(seed, category, "final")
                scores = _fold_scores(
                    cache.values(outcome.selected.lam),
                    y,
                    train_idx,
                    test_idx,
                    outcome.selected.C,
                    tolerance,
                    final_seed,
                )
                result.selected = outcome.selected
                result.ties = outcome.ties
                result.val_auc = outcome.val_auc
                result.test_auc = _auc_from_scores(scores, y[test_idx])
            except (SplitError, svm.SingleClassError) as exc:
                result.error = str(exc)
            cat_report.repetitions.append(result)

        done = [r for r in cat_report.repetitions if r.error is None]
        if done:
            cat_report.mean_val_auc = float(np.mean([r.val_auc for r in done]))
            cat_report.mean_test_auc = float(np.mean([r.test_auc for r in done]))
            cat_report.overfit_gap = abs(
                cat_report.mean_val_auc - cat_report.mean_test_auc
            )
        report.categories[category] = cat_report
    return report

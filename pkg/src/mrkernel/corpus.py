"""Function corpora: graph directories, label files, and the bundled corpus.

A corpus pairs one graph file per function with a label CSV
(``function,MR,label,comment``) covering all three MR categories.  The
bundled corpus is compiled from mini-language sources, labeled by
metamorphic-testing campaigns, and adjusted by checked-in manual
overrides; every override carries an explanatory comment.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from . import lowering, minilang
from .cfg import Cfg, GraphFormatError, parse_graph_file, emit_graph_file
from .harness import Subject, run_campaign, subjects_from_program
from .relations import (
    CATEGORIES,
    HarnessConfig,
    IndexArg,
    MatrixArg,
    ScalarArg,
    Signature,
)

GRAPH_SUFFIX = ".dot"

#: Positive/negative instance counts reported for the original 55-function
#: corpus; the bundled corpus matches these ratios to within 10 points.
PAPER_CLASS_COUNTS = {
    "Permutative": (14, 41),
    "Additive": (37, 18),
    "Multiplicative": (21, 34),
}

RATIO_TOLERANCE = 0.10

BUNDLE_SEED = 7
BUNDLE_TRIALS = 30


class CorpusError(ValueError):
    pass


@dataclass
class LabeledDataset:
    """Functions with their CFGs and one +-1 label per MR category."""

    names: tuple[str, ...]
    cfgs: dict[str, Cfg]
    labels: dict[str, dict[str, int]]  # category -> name -> label
    comments: dict[tuple[str, str], str] = field(default_factory=dict)

    def cfg_list(self) -> list[Cfg]:
        return [self.cfgs[name] for name in self.names]

    def class_counts(self, category: str) -> tuple[int, int]:
        values = [self.labels[category][name] for name in self.names]
        return values.count(1), values.count(-1)

    def learnable(self, category: str) -> bool:
        pos, neg = self.class_counts(category)
        return pos >= 1 and neg >= 1

    def validate(self) -> None:
        if len(set(self.names)) != len(self.names):
            raise CorpusError("duplicate function names in dataset")
        for name in self.names:
            if name not in self.cfgs:
                raise CorpusError(f"function {name!r} has no graph")
            for category in CATEGORIES:
                label = self.labels.get(category, {}).get(name)
                if label is None:
                    raise CorpusError(f"function {name!r} has no {category} label")
                if label not in (1, -1):
                    raise CorpusError(
                        f"label for {name!r}/{category} must be 1 or -1, got {label}"
                    )


def load_corpus(graph_dir: str | Path, label_file: str | Path) -> LabeledDataset:
    """Read a graph directory plus label CSV and validate the pairing."""
    graph_dir = Path(graph_dir)
    label_file = Path(label_file)

    cfgs: dict[str, Cfg] = {}
    for path in sorted(graph_dir.glob(f"*{GRAPH_SUFFIX}")):
        try:
            graph = parse_graph_file(path.read_text())
        except GraphFormatError as exc:
            raise CorpusError(f"{path.name}: {exc}") from exc
        name = path.stem
        if graph.name != name:
            # File stem wins; third-party graph files may carry generic names.
            graph = Cfg(name, graph.nodes, graph.edges, graph.start_id, graph.exit_id)
        if name in cfgs:
            raise CorpusError(f"duplicate function name {name!r}")
        cfgs[name] = graph
    if not cfgs:
        raise CorpusError(f"no {GRAPH_SUFFIX} files in {graph_dir}")

    labels: dict[str, dict[str, int]] = {category: {} for category in CATEGORIES}
    comments: dict[tuple[str, str], str] = {}
    with label_file.open(newline="") as handle:
        reader = csv.DictReader(handle)
        required = {"function", "MR", "label"}
        if not reader.fieldnames or not required.issubset(reader.fieldnames):
            raise CorpusError(
                f"label file needs columns function,MR,label; got {reader.fieldnames}"
            )
        for row in reader:
            name = row["function"].strip()
            category = row["MR"].strip()
            if category not in CATEGORIES:
                raise CorpusError(f"unknown MR category {category!r} for {name!r}")
            if name not in cfgs:
                raise CorpusError(f"label references unknown function {name!r}")
            try:
                label = int(row["label"])
            except ValueError:
                label = 0
            if label not in (1, -1):
                raise CorpusError(
                    f"label for {name!r}/{category} must be 1 or -1, got {row['label']!r}"
                )
            if name in labels[category]:
                raise CorpusError(f"duplicate label row for {name!r}/{category}")
            labels[category][name] = label
            comment = (row.get("comment") or "").strip()
            if comment:
                comments[(name, category)] = comment

    unlabeled = [
        name
        for name in cfgs
        if any(name not in labels[category] for category in CATEGORIES)
    ]
    if unlabeled:
        raise CorpusError(f"functions without complete labels: {sorted(unlabeled)}")

    dataset = LabeledDataset(tuple(sorted(cfgs)), cfgs, labels, comments)
    dataset.validate()
    return dataset


def save_corpus(dataset: LabeledDataset, graph_dir: str | Path, label_file: str | Path) -> None:
    graph_dir = Path(graph_dir)
    graph_dir.mkdir(parents=True, exist_ok=True)
    for name in dataset.names:
        (graph_dir / f"{name}{GRAPH_SUFFIX}").write_text(
            emit_graph_file(dataset.cfgs[name])
        )
    Path(label_file).write_text(format_labels(dataset))


def format_labels(dataset: LabeledDataset) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["function", "MR", "label", "comment"])
    for name in dataset.names:
        for category in CATEGORIES:
            writer.writerow([
                name,
                category,
                dataset.labels[category][name],
                dataset.comments.get((name, category), ""),
            ])
    return out.getvalue()


# ---------------------------------------------------------------------------
# Bundled corpus
# ---------------------------------------------------------------------------

_PAIR: Signature = (MatrixArg("m", "n"), MatrixArg("m", "n"))
_SINGLE: Signature = (MatrixArg("m", "n"),)

#: Input signature per bundled function family (family = name up to the
#: last underscore).  These couple dimensions (multiplication), mark index
#: arguments, and force square inputs where the algorithm needs them.
BUNDLED_SIGNATURES: dict[str, Signature] = {
    "add": _PAIR,
    "sub": _PAIR,
    "hadamard": _PAIR,
    "mul": (MatrixArg("m", "k"), MatrixArg("k", "n")),
    "axpy": (MatrixArg("m", "n"), MatrixArg("m", "n"), ScalarArg()),
    "smul": (MatrixArg("m", "n"), ScalarArg()),
    "sadd": (MatrixArg("m", "n"), ScalarArg()),
    "fill": (MatrixArg("m", "n"), ScalarArg()),
    "get_row": (MatrixArg("m", "n"), IndexArg("m")),
    "get_col": (MatrixArg("m", "n"), IndexArg("n")),
    "trace": (MatrixArg("m", "m"),),
    "diag": (MatrixArg("m", "m"),),
    "transpose": _SINGLE,
    "copy": _SINGLE,
    "negate": _SINGLE,
    "rowsums": _SINGLE,
    "colsums": _SINGLE,
    "cumsum": _SINGLE,
}


def family_of(name: str) -> str:
    return name.rsplit("_", 1)[0]


def bundled_sources() -> str:
    return resources.files("mrkernel").joinpath("data/bundled_corpus.mml").read_text()


def bundled_overrides() -> list[dict[str, str]]:
    text = resources.files("mrkernel").joinpath("data/bundled_overrides.csv").read_text()
    return list(csv.DictReader(io.StringIO(text)))


def bundled_program() -> minilang.Program:
    return minilang.parse_source(bundled_sources())


def bundled_subjects() -> dict[str, Subject]:
    program = bundled_program()
    signatures = {
        fn.name: BUNDLED_SIGNATURES[family_of(fn.name)] for fn in program.functions
    }
    return subjects_from_program(program, signatures)


def bundled_harness_labels(
    trials: int = BUNDLE_TRIALS, seed: int = BUNDLE_SEED
) -> dict[str, dict[str, int]]:
    """Campaign labels of the bundled functions, before manual overrides."""
    subjects = bundled_subjects()
    config = HarnessConfig()
    return {
        name: run_campaign(subject, trials=trials, seed=seed, config=config).labels
        for name, subject in subjects.items()
    }


@lru_cache(maxsize=2)
def build_bundled_corpus(
    trials: int = BUNDLE_TRIALS, seed: int = BUNDLE_SEED
) -> LabeledDataset:
    """Compile, label, and override the bundled corpus.

    Build-time checks: every label either matches a fresh campaign or has
    a commented override; every category keeps both classes; class ratios
    stay within 10 points of the original corpus ratios.
    """
    program = bundled_program()
    names = tuple(fn.name for fn in program.functions)
    cfgs = {name: lowering.lower_to_cfg(program, name) for name in names}

    harness_labels = bundled_harness_labels(trials=trials, seed=seed)
    labels: dict[str, dict[str, int]] = {
        category: {name: harness_labels[name][category] for name in names}
        for category in CATEGORIES
    }

    comments: dict[tuple[str, str], str] = {}
    for row in bundled_overrides():
        name = row["function"].strip()
        category = row["MR"].strip()
        comment = (row.get("comment") or "").strip()
        if name not in cfgs:
            raise CorpusError(f"override references unknown function {name!r}")
        if category not in CATEGORIES:
            raise CorpusError(f"override has unknown MR category {category!r}")
        if not comment:
            raise CorpusError(f"override for {name!r}/{category} has no comment")
        label = int(row["label"])
        if label not in (1, -1):
            raise CorpusError(f"override label for {name!r}/{category} must be +-1")
        labels[category][name] = label
        comments[(name, category)] = comment

    dataset = LabeledDataset(names, cfgs, labels, comments)
    dataset.validate()
    for category in CATEGORIES:
        pos, neg = dataset.class_counts(category)
        if pos == 0 or neg == 0:
            raise CorpusError(f"bundled corpus: {category} is single-class")
        paper_pos, paper_neg = PAPER_CLASS_COUNTS[category]
        target = paper_pos / (paper_pos + paper_neg)
        actual = pos / (pos + neg)
        if abs(actual - target) > RATIO_TOLERANCE:
            raise CorpusError(
                f"bundled corpus: {category} positive ratio {actual:.3f} strays "
                f"more than {RATIO_TOLERANCE:.0%} from the reference {target:.3f}"
            )
    return dataset

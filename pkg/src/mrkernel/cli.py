"""Command-line entry point.

Subcommands cover the pipeline stages: ``compile`` (mini-language to graph
files), ``gram`` (kernel matrix), ``train`` / ``predict`` (SVM), ``mt``
(metamorphic-testing campaigns), ``eval`` (the full repeated experiment),
and ``corpus-build`` (materialize the bundled corpus).

Defaults may come from a JSON config file (``--config`` or the
``MRKERNEL_CONFIG`` environment variable); explicit flags win.  Output
files are written atomically.  Exit codes: 0 success, 1 operational
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import evalpipe, harness, lowering, rwkernel, svm
from .cfg import (
    GraphFormatError,
    SimilarityTableError,
    default_similarity_table,
    emit_graph_file,
    load_similarity_table,
    parse_graph_file,
)
from .minilang import MinilangError
from .relations import CATEGORIES

CONFIG_ENV_VAR = "MRKERNEL_CONFIG"

EXIT_OK = 0
EXIT_OPERATIONAL = 1
EXIT_USAGE = 2


class CliError(Exception):
    """Operational failure: message to stderr, exit code 1."""


class UsageError(Exception):
    """Bad invocation or malformed input: message to stderr, exit code 2."""


@dataclass
class Config:
    """Defaults merged from a JSON config file; flag values take precedence."""

    values: dict

    @classmethod
    def load(cls, path: str | None) -> "Config":
        candidate = path or os.environ.get(CONFIG_ENV_VAR)
        if not candidate:
            return cls({})
        file = Path(candidate)
        if not file.exists():
            raise CliError(f"config file {candidate!r} does not exist")
        try:
            values = json.loads(file.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {candidate!r}: {exc}") from None
        if not isinstance(values, dict):
            raise UsageError(f"config file {candidate!r} must hold a JSON object")
        return cls(values)

    def fill(self, args: argparse.Namespace, defaults: dict) -> None:
        """Resolve None attributes from the config file, then hard defaults."""
        for key, fallback in defaults.items():
            if getattr(args, key, None) is None:
                setattr(args, key, self.values.get(key, fallback))


def atomic_write(path: str | Path, content: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile(
        "w", dir=path.parent, prefix=f".{path.name}.", delete=False
    )
    try:
        with handle:
            handle.write(content)
        os.replace(handle.name, path)
    except BaseException:
        os.unlink(handle.name)
        raise


def _load_graph_dir(graph_dir: str) -> list:
    directory = Path(graph_dir)
    if not directory.is_dir():
        raise CliError(f"graph directory {graph_dir!r} does not exist")
    graphs = []
    for path in sorted(directory.glob(f"*{corpus_mod.GRAPH_SUFFIX}")):
        try:
            graphs.append(parse_graph_file(path.read_text()))
        except GraphFormatError as exc:
            raise UsageError(f"{path.name}: {exc}") from None
    if not graphs:
        raise CliError(f"no {corpus_mod.GRAPH_SUFFIX} files in {graph_dir!r}")
    return graphs


def _load_table(path: str | None):
    if not path:
        return default_similarity_table()
    try:
        return load_similarity_table(Path(path).read_text())
    except FileNotFoundError:
        raise CliError(f"similarity table {path!r} does not exist") from None
    except SimilarityTableError as exc:
        raise UsageError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_compile(args: argparse.Namespace, config: Config) -> int:
    config.fill(args, {"out_dir": "."})
    source = Path(args.source)
    if source.is_dir():
        files = sorted(source.glob("*.mml"))
        if not files:
            print(f"warning: no .mml files in {source}", file=sys.stderr)
            return EXIT_OK
    elif source.exists():
        files = [source]
    else:
        raise CliError(f"source {args.source!r} does not exist")

    for path in files:
        try:
            cfgs = lowering.compile_source(path.read_text())
        except MinilangError as exc:
            raise UsageError(f"{path.name}:{exc}") from None
        for name, graph in cfgs.items():
            atomic_write(
                Path(args.out_dir) / f"{name}{corpus_mod.GRAPH_SUFFIX}",
                emit_graph_file(graph),
            )
        print(f"{path.name}: {len(cfgs)} graph(s) written to {args.out_dir}")
    return EXIT_OK


def cmd_gram(args: argparse.Namespace, config: Config) -> int:
    config.fill(
        args,
        {"lam": 0.9, "max_len": evalpipe.DEFAULT_MAX_WALK_LEN, "workers": 1},
    )
    graphs = _load_graph_dir(args.graphs)
    table = _load_table(args.table)
    try:
        params = rwkernel.KernelParams(
            lam=float(args.lam), max_len=int(args.max_len), normalize=args.normalize
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    gm = rwkernel.gram(graphs, table, params, workers=int(args.workers))
    atomic_write(args.out, rwkernel.format_gram(gm))
    print(f"{len(graphs)}x{len(graphs)} gram written to {args.out}")
    return EXIT_OK


def _labels_for_mr(label_file: str, mr: str, names: tuple[str, ...]) -> list[int]:
    if mr not in CATEGORIES:
        raise UsageError(f"--mr must be one of {CATEGORIES}, got {mr!r}")
    try:
        import csv

        with open(label_file, newline="") as handle:
            rows = list(csv.DictReader(handle))
    except FileNotFoundError:
        raise CliError(f"label file {label_file!r} does not exist") from None
    by_name = {
        row["function"].strip(): int(row["label"])
        for row in rows
        if row.get("MR", "").strip() == mr
    }
    missing = [name for name in names if name not in by_name]
    if missing:
        raise CliError(f"label file has no {mr} labels for: {missing}")
    return [by_name[name] for name in names]


def cmd_train(args: argparse.Namespace, config: Config) -> int:
    config.fill(args, {"c": 1.0, "tolerance": 1e-3, "seed": 0})
    try:
        gm = rwkernel.parse_gram(Path(args.gram).read_text())
    except FileNotFoundError:
        raise CliError(f"gram file {args.gram!r} does not exist") from None
    except ValueError as exc:
        raise UsageError(f"{args.gram}: {exc}") from None
    labels = _labels_for_mr(args.labels, args.mr, gm.names)
    try:
        model = svm.train(
            gm.values,
            labels,
            svm.SvmParams(
                C=float(args.c), tolerance=float(args.tolerance), seed=int(args.seed)
            ),
        )
    except svm.SingleClassError as exc:
        raise CliError(f"cannot train {args.mr}: {exc}") from None
    meta = {
        "lambda": repr(gm.params.lam),
        "L": str(gm.params.max_len),
        "normalized": "true" if gm.params.normalize else "false",
        "table_digest": gm.table_digest,
        "train_names": ",".join(gm.names),
    }
    atomic_write(args.out, svm.format_model(model, mr=args.mr, meta=meta))
    print(
        f"{args.mr} model trained on {model.n_train} functions "
        f"({len(model.support_indices)} support vectors) -> {args.out}"
    )
    return EXIT_OK


def cmd_predict(args: argparse.Namespace, config: Config) -> int:
    config.fill(args, {"workers": 1})
    table = _load_table(args.table)
    test_graphs = _load_graph_dir(args.graphs)
    train_graphs = {g.name: g for g in _load_graph_dir(args.train_graphs)}

    rows: list[str] = []
    for model_path in args.model:
        try:
            model, mr, meta = svm.parse_model(Path(model_path).read_text())
        except FileNotFoundError:
            raise CliError(f"model file {model_path!r} does not exist") from None
        except ValueError as exc:
            raise UsageError(f"{model_path}: {exc}") from None
        mr = mr or Path(model_path).stem
        if "train_names" in meta:
            order = meta["train_names"].split(",")
        else:
            order = sorted(train_graphs)
        if len(order) != model.n_train:
            raise CliError(
                f"{model_path}: model was trained on {model.n_train} functions "
                f"but {len(order)} training graphs are available"
            )
        missing = [name for name in order if name not in train_graphs]
        if missing:
            raise CliError(f"{model_path}: training graphs missing: {missing}")
        params = rwkernel.KernelParams(
            lam=float(meta.get("lambda", 0.9)),
            max_len=int(meta.get("L", evalpipe.DEFAULT_MAX_WALK_LEN)),
            normalize=meta.get("normalized") == "true",
        )
        cross = np.array(
            [
                [
                    rwkernel.kernel(test, train_graphs[name], table, params)
                    for name in order
                ]
                for test in test_graphs
            ]
        )
        scores = svm.decision_values(model, cross)
        labels = svm.predict(model, cross)
        for graph, score, label in zip(test_graphs, scores, labels):
            rows.append(f"{graph.name},{mr},{label:+d},{float(score)!r}")

    output = "function,MR,label,score\n" + "\n".join(rows) + "\n"
    if args.out:
        atomic_write(args.out, output)
    else:
        print(output, end="")
    return EXIT_OK


def _mt_registry(source: str | None) -> dict[str, harness.Subject]:
    registry: dict[str, harness.Subject] = {}
    registry.update(harness.REFERENCE_SUBJECTS)
    registry.update(harness.FAULT_SUBJECTS)
    if source:
        try:
            program = lowering.ml.parse_source(Path(source).read_text())
        except FileNotFoundError:
            raise CliError(f"source file {source!r} does not exist") from None
        except MinilangError as exc:
            raise UsageError(f"{source}:{exc}") from None
        registry.update(harness.subjects_from_program(program))
    else:
        registry.update(corpus_mod.bundled_subjects())
    return registry


def cmd_mt(args: argparse.Namespace, config: Config) -> int:
    config.fill(args, {"trials": harness.DEFAULT_TRIALS, "seed": 0})
    registry = _mt_registry(args.source)
    if args.subjects == "all":
        # Everything except the built-in reference and fault subjects: the
        # loaded corpus functions, which is what label files describe.
        names = [
            name
            for name in registry
            if name not in harness.REFERENCE_SUBJECTS
            and name not in harness.FAULT_SUBJECTS
        ]
        if not names:
            names = sorted(harness.REFERENCE_SUBJECTS)
    elif args.subjects == "refs":
        names = sorted(harness.REFERENCE_SUBJECTS)
    else:
        names = [n.strip() for n in args.subjects.split(",") if n.strip()]
        unknown = [n for n in names if n not in registry]
        if unknown:
            raise UsageError(f"unknown subjects: {unknown}")

    results = []
    labels: dict[str, dict[str, int]] = {}
    for name in names:
        result = harness.run_campaign(
            registry[name], trials=int(args.trials), seed=int(args.seed)
        )
        results.append(result)
        labels[name] = result.labels

    report = harness.format_report(results, int(args.trials), int(args.seed))
    if args.out:
        atomic_write(args.out, report)
    else:
        print(report, end="")
    if args.labels_out:
        atomic_write(args.labels_out, harness.format_labels_csv(labels))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, config: Config) -> int:
    config.fill(
        args,
        {
            "reps": evalpipe.DEFAULT_REPETITIONS,
            "seed": 0,
            "max_len": evalpipe.DEFAULT_MAX_WALK_LEN,
            "workers": 1,
        },
    )
    if bool(args.corpus) != bool(args.labels):
        raise UsageError("--corpus and --labels must be given together")
    if args.corpus:
        try:
            dataset = corpus_mod.load_corpus(args.corpus, args.labels)
        except corpus_mod.CorpusError as exc:
            raise CliError(str(exc)) from None
    else:
        dataset = corpus_mod.build_bundled_corpus()

    if args.paper_grid or not args.c_grid:
        c_grid = evalpipe.PAPER_C_GRID
    else:
        c_grid = tuple(float(v) for v in args.c_grid.split(","))
    lam_grid = (
        tuple(float(v) for v in args.lambda_grid.split(","))
        if args.lambda_grid
        else evalpipe.DEFAULT_LAMBDA_GRID
    )

    report = evalpipe.run_experiment(
        dataset,
        repetitions=int(args.reps),
        base_seed=int(args.seed),
        c_grid=c_grid,
        lam_grid=lam_grid,
        max_len=int(args.max_len),
        workers=int(args.workers),
    )
    atomic_write(f"{args.out}.txt", report.to_text())
    atomic_write(f"{args.out}.json", report.to_json())
    for category, cat_report in report.categories.items():
        if cat_report.mean_test_auc is None:
            print(f"{category}: no successful repetitions")
        else:
            print(
                f"{category}: mean test AUC {cat_report.mean_test_auc:.4f} "
                f"(validation {cat_report.mean_val_auc:.4f}, "
                f"gap {cat_report.overfit_gap:.4f})"
            )
    print(f"report written to {args.out}.txt and {args.out}.json")
    return EXIT_OK


def cmd_corpus_build(args: argparse.Namespace, config: Config) -> int:
    config.fill(
        args,
        {"trials": corpus_mod.BUNDLE_TRIALS, "seed": corpus_mod.BUNDLE_SEED},
    )
    try:
        dataset = corpus_mod.build_bundled_corpus(
            trials=int(args.trials), seed=int(args.seed)
        )
    except corpus_mod.CorpusError as exc:
        raise CliError(str(exc)) from None
    out_dir = Path(args.out_dir)
    corpus_mod.save_corpus(dataset, out_dir / "graphs", out_dir / "labels.csv")
    for category in CATEGORIES:
        pos, neg = dataset.class_counts(category)
        print(f"{category}: {pos} positive / {neg} negative")
    print(f"{len(dataset.names)} functions written to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    # argparse already exits with status 2 (our usage code) on bad flags.
    parser = argparse.ArgumentParser(prog="mrkernel", description=__doc__)
    parser.add_argument("--config", help="JSON config file with default flag values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile mini-language sources to graph files")
    p.add_argument("source", help=".mml file or a directory of .mml files")
    p.add_argument("--out-dir", dest="out_dir", help="graph output directory")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("gram", help="compute a kernel matrix over a graph directory")
    p.add_argument("--graphs", required=True)
    p.add_argument("--lambda", dest="lam", type=float, help="path weighting factor")
    p.add_argument("--max-len", dest="max_len", type=int, help="walk length cutoff")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--table", help="similarity override file")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("train", help="train an SVM on a precomputed gram matrix")
    p.add_argument("--gram", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--mr", required=True, help="MR category to train for")
    p.add_argument("--c", type=float, help="regularization parameter")
    p.add_argument("--tolerance", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score new graphs with trained models")
    p.add_argument("--model", action="append", required=True, help="repeatable")
    p.add_argument("--train-graphs", dest="train_graphs", required=True)
    p.add_argument("--graphs", required=True)
    p.add_argument("--table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("mt", help="run metamorphic-testing campaigns")
    p.add_argument(
        "--subjects",
        required=True,
        help="'all' (corpus subjects), 'refs', or a comma-separated name list",
    )
    p.add_argument("--source", help="run subjects from this .mml file instead")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="campaign report path")
    p.add_argument("--labels-out", dest="labels_out", help="label CSV path")
    p.set_defaults(func=cmd_mt)

    p = sub.add_parser("eval", help="run the full repeated evaluation")
    p.add_argument("--corpus", help="graph directory (default: bundled corpus)")
    p.add_argument("--labels", help="label CSV (default: bundled corpus)")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--c-grid", dest="c_grid", help="comma-separated C values")
    p.add_argument(
        "--paper-grid",
        dest="paper_grid",
        action="store_true",
        help="pin the C grid to 0.1,1,10,100,1000 (the default)",
    )
    p.add_argument("--lambda-grid", dest="lambda_grid", help="comma-separated values")
    p.add_argument("--max-len", dest="max_len", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True, help="report path prefix")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("corpus-build", help="materialize the bundled corpus")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_corpus_build)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = Config.load(args.config)
        return args.func(args, config)
    except UsageError as exc:
        print(f"mrkernel: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CliError as exc:
        print(f"mrkernel: error: {exc}", file=sys.stderr)
        return EXIT_OPERATIONAL
    except (GraphFormatError, corpus_mod.CorpusError, ValueError) as exc:
        print(f"mrkernel: error: {exc}", file=sys.stderr)
        return EXIT_OPERATIONAL


if __name__ == "__main__":
    sys.exit(main())

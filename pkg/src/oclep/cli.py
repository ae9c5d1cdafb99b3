"""Command-line entry point: ``oclep {train,score,evaluate,sweep,explain}``.

Exit codes: 0 success, 1 usage error, 2 data error. Progress goes to
stderr; results go to stdout or to files under ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import detector, evaluation
from .dataset import (
    DEFAULT_BINS,
    LABEL,
    DROP,
    AttributeSchema,
    Table,
    fit_schema,
    itemize_all,
    load_table,
    read_rows,
)
from .detector import DetectorModel, HyperParams
from .errors import DataError, OclepError, UsageError
from .miner import INF

log = logging.getLogger("oclep")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _label_col(v: str):
    if v == "auto":
        return v
    if v == "none":
        return None
    return int(v)


def _add_params(p: argparse.ArgumentParser) -> None:
    d = HyperParams()
    p.add_argument("--k", type=int, default=d.k, help="number of training probes")
    p.add_argument("--m", type=int, default=d.m, help="normal instances per sample")
    p.add_argument("--r", type=int, default=d.r, help="samples per instance")
    p.add_argument("--p", type=float, default=d.p, help="cutoff percentile in (0, 1]")
    p.add_argument("--statistic", choices=["min", "mean"], default=d.statistic)
    p.add_argument("--rule", choices=["inclusive", "strict"], default=d.rule)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS, help="equal-width bins per numeric attribute")


def _add_common(p: argparse.ArgumentParser, *, model: bool, test: bool) -> None:
    p.add_argument("--train-data", required=True, help="normal (or labelled) training CSV")
    if test:
        p.add_argument("--test-data", required=True, help="CSV of instances to score")
    if model:
        p.add_argument("--model", required=True, help="model file written by 'train'")
    p.add_argument("--label-col", type=_label_col, default="auto",
                   help="label column index, 'none' or 'auto' (default)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", help="report directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oclep", description="One-class detection by minimal emerging-pattern length.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="derive the length cutoff from normal data")
    _add_common(p, model=False, test=False)
    p.add_argument("--model", required=True, help="where to write the model file")
    p.add_argument("--schema", help="also write the schema sidecar here")
    _add_params(p)

    for name, helptext in (
        ("score", "label instances normal/intruder"),
        ("evaluate", "score a labelled test file and report metrics"),
        ("explain", "show the shortest emerging patterns of instances"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p, model=True, test=True)
        if name == "explain":
            p.add_argument("--rows", help="comma-separated test row indices (default: all)")

    p = sub.add_parser("sweep", help="train and evaluate over a range of one parameter")
    _add_common(p, model=False, test=True)
    p.add_argument("--param", required=True, choices=evaluation.SWEEPABLE)
    p.add_argument("--values", required=True, help="comma-separated values, or start:stop:step")
    _add_params(p)
    return parser


# ---------------------------------------------------------------------------
# helpers


def _progress(label: str):
    state = {"last": -1}

    def report(done: int, total: int) -> None:
        pct = 100 * done // total
        if pct // 5 != state["last"] or done == total:
            state["last"] = pct // 5
            print(f"\r{label}: {done}/{total}", end="\n" if done == total else "", file=sys.stderr, flush=True)

    return report


def _params(args) -> HyperParams:
    return HyperParams(k=args.k, m=args.m, r=args.r, p=args.p,
                       statistic=args.statistic, rule=args.rule, seed=args.seed)


def _normal_training(args, layout=None) -> Table:
    table = load_table(args.train_data, args.label_col, layout)
    if table.labelled:
        normal = table.normal_only()
        if not len(normal):
            raise DataError(f"{args.train_data}: no normal instances")
        log.info("kept %d normal of %d training rows", len(normal), len(table))
        return normal
    print(f"notice: {args.train_data} has no label column; all rows treated as normal", file=sys.stderr)
    return table


def _test_layout(schema: AttributeSchema, path) -> tuple[list[str], None]:
    rows = read_rows(path)
    if not rows:
        raise UsageError(f"{path}: test file is empty")
    ncol = len(rows[0])
    if ncol == len(schema.columns):
        return schema.columns, None
    features = [k for k in schema.columns if k not in (LABEL, DROP)]
    if ncol == len(features):
        return features, None
    with_label = [k for k in schema.columns if k != DROP]
    if ncol == len(with_label):
        return with_label, None
    raise DataError(f"{path}: {ncol} columns do not fit the trained layout ({len(schema.columns)})")


def _load_for_scoring(args):
    model = DetectorModel.load(args.model)
    if model.schema is None:
        raise DataError(f"{args.model}: model carries no schema")
    layout = (model.schema.columns, None)
    N = itemize_all(_normal_training(args, layout).instances, model.schema).matrix
    test = load_table(args.test_data, layout=_test_layout(model.schema, args.test_data))
    T = itemize_all(test.instances, model.schema).matrix
    return model, N, test, T


def _out_dir(args) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt_len(v: float) -> str:
    if v == INF:
        return "inf"
    return str(int(v)) if float(v).is_integer() else f"{v:.4f}"


def _verdict_lines(test: Table, lengths, kappa, rule) -> list[str]:
    lines = ["row\ttruth\tml\tverdict"]
    for j, (x, ml) in enumerate(zip(test.instances, lengths)):
        lines.append(f"{j}\t{x.label or '-'}\t{_fmt_len(ml)}\t{detector.classify(ml, kappa, rule)}")
    return lines


def _parse_values(text: str, param: str) -> list:
    conv = float if param == "p" else int
    if ":" in text:
        start, stop, step = (conv(x) for x in text.split(":"))
        out, v = [], start
        while v <= stop + (1e-12 if conv is float else 0):
            out.append(round(v, 10) if conv is float else v)
            v += step
        return out
    return [conv(x) for x in text.split(",") if x.strip()]


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    params = _params(args)
    table = _normal_training(args)
    schema = fit_schema(table, args.bins)
    N = itemize_all(table.instances, schema).matrix
    model = detector.train(N, params, schema, threads=args.threads, progress=_progress("train"))
    model.save(args.model)
    if args.schema:
        schema.save(args.schema)
    print(f"normal instances: {len(N)}")
    print(f"kappa: {_fmt_len(model.kappa)}")
    print("training length histogram:")
    for v, c in evaluation.lengths_histogram(model.training_lengths):
        print(f"  {_fmt_len(v)}\t{c}")
    return 0


def cmd_score(args) -> int:
    model, N, test, T = _load_for_scoring(args)
    lengths = evaluation.score_rows(model, N, T, args.threads, _progress("score"))
    text = "\n".join(_verdict_lines(test, lengths, model.kappa, model.params.rule)) + "\n"
    out = _out_dir(args)
    if out:
        (out / "verdicts.tsv").write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_evaluate(args) -> int:
    model, N, test, T = _load_for_scoring(args)
    labels = [x.label for x in test.instances]
    if any(lab is None for lab in labels):
        raise UsageError("evaluate needs a labelled test file; use 'score' instead")
    lengths = evaluation.score_rows(model, N, T, args.threads, _progress("evaluate"))
    _, counts, report = evaluation.evaluate_lengths(lengths, model.kappa, model.params.rule, labels)
    row = evaluation.report_row(model.kappa, counts, report)
    table = evaluation.format_table([row])
    out = _out_dir(args)
    if out:
        (out / "verdicts.tsv").write_text(
            "\n".join(_verdict_lines(test, lengths, model.kappa, model.params.rule)) + "\n")
        (out / "metrics.tsv").write_text(table)
        (out / "metrics.csv").write_text(evaluation.format_table([row], ","))
        (out / "metrics.json").write_text(json.dumps(
            {"kappa": _fmt_len(model.kappa), "counts": asdict(counts), "metrics": asdict(report)},
            indent=1) + "\n")
    sys.stdout.write(table)
    return 0


def cmd_sweep(args) -> int:
    values = _parse_values(args.values, args.param)
    params = _params(args)
    train_table = _normal_training(args)
    test = load_table(args.test_data, layout=(train_table.kinds, train_table.names))
    if not test.labelled:
        raise UsageError("sweep needs a labelled test file")
    rows = evaluation.sweep(args.param, values, params, train_table, test, args.bins,
                            threads=args.threads, progress=_progress(f"sweep {args.param}"))
    cells = [r.cells() for r in rows]
    tsv = evaluation.format_table(cells)
    out = _out_dir(args)
    if out:
        (out / f"sweep_{args.param}.tsv").write_text(tsv)
        (out / f"sweep_{args.param}.csv").write_text(evaluation.format_table(cells, ","))
    sys.stdout.write(tsv)
    return 0


def cmd_explain(args) -> int:
    model, N, test, T = _load_for_scoring(args)
    rows = range(len(T)) if not args.rows else [int(x) for x in args.rows.split(",")]
    lines = []
    for j in rows:
        if not 0 <= j < len(T):
            raise UsageError(f"row {j} is outside the test file (0..{len(T) - 1})")
        exp = detector.explain(T[j], N, model.params, key=j)
        ml = exp.ml if model.params.statistic == "min" else detector.score(T[j], N, model.params, key=j)
        verdict = detector.classify(ml, model.kappa, model.params.rule)
        lines.append(f"row {j}: ml={_fmt_len(ml)} verdict={verdict}")
        lines.extend(f"  {s}" for s in exp.render(model.schema))
    text = "\n".join(lines) + "\n"
    out = _out_dir(args)
    if out:
        (out / "explain.txt").write_text(text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {
    "train": cmd_train,
    "score": cmd_score,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "explain": cmd_explain,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s", stream=sys.stderr)
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be at least 1")
        return COMMANDS[args.command](args)
    except OclepError as exc:
        print(f"oclep: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

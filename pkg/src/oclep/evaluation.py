"""Confusion counts, accuracy measures and parameter sweeps.

Intruder/anomaly is the positive class. Percentages are rounded to two
decimals, half away from zero.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

import numpy as np

from . import detector
from .dataset import ANOMALY, NORMAL, Table, fit_schema, itemize_all
from .detector import HyperParams, classify
from .errors import UsageError
from .miner import MIN

REPORT_COLUMNS = ["value", "TP", "FP", "TN", "FN", "FPR", "TPR", "Prec", "Reca", "Fscore", "Accu"]
SWEEPABLE = ("k", "r", "m", "p", "bins")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    """Percentages (precision..accuracy) and rates (fpr, tpr); ``None`` marks
    a measure whose denominator is zero."""

    precision: float | None
    recall: float | None
    fscore: float | None
    accuracy: float | None
    fpr: float | None
    tpr: float | None


def round_half_up(x: float | None, places: int = 2) -> float | None:
    if x is None:
        return None
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


def confusion(verdicts: Sequence, labels: Sequence[str]) -> ConfusionCounts:
    if len(verdicts) != len(labels):
        raise UsageError(f"{len(verdicts)} verdicts but {len(labels)} labels")
    tp = fp = tn = fn = 0
    for v, lab in zip(verdicts, labels):
        predicted = getattr(v, "label", v) == detector.INTRUDER
        actual = lab == ANOMALY
        if lab not in (ANOMALY, NORMAL):
            raise UsageError(f"unknown ground-truth label {lab!r}")
        if predicted and actual:
            tp += 1
        elif predicted:
            fp += 1
        elif actual:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def _ratio(a: int, b: int) -> float | None:
    return a / b if b else None


def metrics(c: ConfusionCounts) -> MetricsReport:
    if c.total == 0:
        raise UsageError("metrics need at least one counted instance")
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    if precision is None or recall is None or precision + recall == 0:
        fscore = None
    else:
        fscore = 2 * precision * recall / (precision + recall)
    accuracy = (c.tp + c.tn) / c.total
    fpr = _ratio(c.fp, c.fp + c.tn)

    def pct(v):
        return round_half_up(100 * v) if v is not None else None

    return MetricsReport(
        precision=pct(precision),
        recall=pct(recall),
        fscore=pct(fscore),
        accuracy=pct(accuracy),
        fpr=round_half_up(fpr),
        tpr=round_half_up(recall),
    )


# ---------------------------------------------------------------------------
# reports


def _fmt(v) -> str:
    if v is None:
        return "undefined"
    if isinstance(v, float) and not v.is_integer():
        return f"{v:.2f}"
    return f"{v:g}" if isinstance(v, float) else str(v)


def report_row(value, c: ConfusionCounts, m: MetricsReport) -> list[str]:
    return [
        _fmt(value), str(c.tp), str(c.fp), str(c.tn), str(c.fn),
        _fmt2(m.fpr), _fmt2(m.tpr), _fmt2(m.precision), _fmt2(m.recall),
        _fmt2(m.fscore), _fmt2(m.accuracy),
    ]


def _fmt2(v: float | None) -> str:
    return "undefined" if v is None else f"{v:.2f}"


def format_table(rows: Sequence[Sequence[str]], delimiter: str = "\t") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# evaluation and sweeps


@dataclass
class SweepRow:
    value: float
    counts: ConfusionCounts
    report: MetricsReport
    kappa: float

    def cells(self) -> list[str]:
        return report_row(self.value, self.counts, self.report)


def evaluate_lengths(test_lengths, kappa, rule, labels):
    verdicts = [classify(ml, kappa, rule) for ml in test_lengths]
    c = confusion(verdicts, labels)
    return verdicts, c, metrics(c)


def score_rows(model, N, test, threads=1, progress=None) -> list[float]:
    """Length statistic of every test row; test row ``j`` uses sample key ``j``."""
    res = detector.batch_statistics(
        test, list(range(len(test))), N, model.params, detector.SCORE,
        threads=threads, progress=progress,
    )
    if model.params.statistic == MIN:
        return [float(v[-1]) for v in res]
    return [float(v) for v in res]


def sweep(
    param: str,
    values: Sequence,
    fixed: HyperParams,
    train_data: Table,
    test_data: Table,
    bins: int,
    threads: int = 1,
    progress=None,
) -> list[SweepRow]:
    """One train-and-evaluate cycle per value of ``param``.

    All rows share ``fixed.seed``. Probe sets are nested prefixes of one
    permutation and every sample has its own derived seed, so statistics
    computed for the largest ``k`` and ``r`` of a sweep are sliced for the
    smaller ones instead of being mined again; each row is identical to a
    standalone run with the same parameters.
    """
    if param not in SWEEPABLE:
        raise UsageError(f"cannot sweep {param!r}; choose from {SWEEPABLE}")
    if not values:
        raise UsageError("sweep needs at least one value")
    labels = [x.label for x in test_data.instances]
    if any(lab is None for lab in labels):
        raise UsageError("sweep needs a labelled test file")

    itemized: dict = {}

    def data_for(b):
        if b not in itemized:
            schema = fit_schema(train_data, b)
            itemized[b] = (
                itemize_all(train_data.instances, schema).matrix,
                itemize_all(test_data.instances, schema).matrix,
            )
        return itemized[b]

    rows_params = []
    for v in values:
        b = int(v) if param == "bins" else bins
        params = replace(fixed, **{param: v}) if param != "bins" else fixed
        rows_params.append((v, b, params))

    # group rows sharing everything that changes the mined statistics
    cache: dict = {}
    k_max = max(p.k for _, _, p in rows_params)
    r_max = max(p.r for _, _, p in rows_params)

    out = []
    for v, b, params in rows_params:
        N, T = data_for(b)
        params = params.fit_to(len(N))
        if params.statistic == MIN:
            key = (b, params.m)
            mined = replace(params, k=min(k_max, len(N)), r=r_max)
        else:
            key = (b, params.m, params.r)
            mined = replace(params, k=min(k_max, len(N)))
        if key not in cache:
            _, tr = detector.training_statistics(N, mined, threads, progress)
            te = detector.batch_statistics(
                T, list(range(len(T))), N, mined, detector.SCORE,
                threads=threads, progress=progress,
            )
            cache[key] = (tr, te)
        tr, te = cache[key]
        if params.statistic == MIN:
            train_l = [float(x[params.r - 1]) for x in tr[: params.k]]
            test_l = [float(x[params.r - 1]) for x in te]
        else:
            train_l = [float(x) for x in tr[: params.k]]
            test_l = [float(x) for x in te]
        kappa = detector.cutoff(train_l, params.p)
        _, c, rep = evaluate_lengths(test_l, kappa, params.rule, labels)
        out.append(SweepRow(v, c, rep, kappa))
    return out


def lengths_histogram(lengths: Sequence[float]) -> list[tuple[float, int]]:
    vals, counts = np.unique(np.asarray(lengths, dtype=float), return_counts=True)
    return [(float(v), int(c)) for v, c in zip(vals, counts)]

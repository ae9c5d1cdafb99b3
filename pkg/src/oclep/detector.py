"""Cutoff training and lazy scoring by minimal emerging-pattern length.

Training draws ``k`` probe instances from the normal data; for each probe it
mines minimal JEPs against ``r`` random samples of ``m`` other normal
instances and records the pooled length statistic. The cutoff is the value
at the ``p``-th percentile of those statistics sorted in decreasing order.
Scoring repeats the mining for a new instance against fresh samples of the
same normal data and compares the statistic with the cutoff.

Every sample is drawn from its own generator seeded with
``(seed, domain, key, i)`` so results do not depend on evaluation order or
worker count, and scoring a training probe with ``domain=TRAIN`` and
``key`` equal to its row reproduces its training statistic.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import AttributeSchema, ItemizedDataset, ItemizedInstance, Pattern
from .errors import DataError, UsageError
from .miner import (
    INF,
    MEAN,
    MIN,
    border_diff,
    length_statistic,
    min_jep_length,
)

log = logging.getLogger(__name__)

MODEL_VERSION = 1

INCLUSIVE = "inclusive"
STRICT = "strict"
NORMAL = "normal"
INTRUDER = "intruder"

TRAIN = 0
SCORE = 1
_PROBES = 2


@dataclass(frozen=True)
class HyperParams:
    k: int = 800
    m: int = 400
    r: int = 7
    p: float = 0.95
    statistic: str = MIN
    rule: str = INCLUSIVE
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.r < 1 or self.m < 1:
            raise UsageError("k, m and r must be positive")
        if not 0 < self.p <= 1:
            raise UsageError("p must lie in (0, 1]")
        if self.statistic not in (MIN, MEAN):
            raise UsageError(f"statistic must be {MIN!r} or {MEAN!r}")
        if self.rule not in (INCLUSIVE, STRICT):
            raise UsageError(f"rule must be {INCLUSIVE!r} or {STRICT!r}")
        if self.seed < 0:
            raise UsageError("seed must be nonnegative")

    def fit_to(self, n: int) -> "HyperParams":
        """Check against a normal set of size ``n``; lower ``m`` to ``n - 1``
        if needed."""
        if n < 2:
            raise UsageError(f"need at least 2 normal instances, got {n}")
        if self.k > n:
            raise UsageError(f"k={self.k} exceeds the {n} normal instances")
        if self.m > n - 1:
            log.warning("m=%d exceeds |N|-1=%d; using m=%d", self.m, n - 1, n - 1)
            return replace(self, m=n - 1)
        return self


@dataclass
class DetectorModel:
    kappa: float
    params: HyperParams
    schema: AttributeSchema | None
    training_lengths: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "params": asdict(self.params),
            "kappa": _enc(self.kappa),
            "training_lengths": [_enc(v) for v in self.training_lengths],
            "schema": self.schema.to_dict() if self.schema is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorModel":
        if d.get("version") != MODEL_VERSION:
            raise DataError(f"unsupported model version {d.get('version')!r}")
        return cls(
            kappa=_dec(d["kappa"]),
            params=HyperParams(**d["params"]),
            schema=AttributeSchema.from_dict(d["schema"]) if d["schema"] else None,
            training_lengths=[_dec(v) for v in d["training_lengths"]],
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "DetectorModel":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise DataError(f"cannot read model file {path}: {exc}") from exc
        try:
            return cls.from_dict(json.loads(text))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed model file {path}: {exc}") from exc


def _enc(v: float):
    if v == INF:
        return "inf"
    return int(v) if float(v).is_integer() else v


def _dec(v) -> float:
    return INF if v == "inf" else v


@dataclass
class Verdict:
    label: str
    ml: float
    explanation: list[Pattern] | None = None


@dataclass
class Explanation:
    ml: float
    shortest: list[Pattern]
    patterns: list[Pattern]

    @property
    def indistinguishable(self) -> bool:
        return not self.patterns

    def render(self, schema: AttributeSchema | None = None) -> list[str]:
        if self.indistinguishable:
            return ["(no emerging pattern: indistinguishable from normal data)"]
        return [p.render(schema) for p in self.shortest]


# ---------------------------------------------------------------------------
# sampling


def probe_order(n: int, seed: int) -> np.ndarray:
    """Permutation of ``range(n)``; the first ``k`` entries are the probes.

    Prefixes are nested, so a smaller ``k`` uses a subset of the probes of a
    larger one.
    """
    return np.random.default_rng([seed, _PROBES]).permutation(n)


def draw_sample(
    n: int, m: int, seed: int, domain: int, key: int, i: int, exclude: int | None = None
) -> np.ndarray:
    """Row indices of ``m`` distinct instances from ``range(n)`` minus ``exclude``."""
    pool = n - (exclude is not None)
    if m > pool:
        raise UsageError(f"cannot draw {m} instances from {pool}")
    rng = np.random.default_rng([seed, domain, key, i])
    idx = rng.choice(pool, size=m, replace=False)
    if exclude is not None:
        idx[idx >= exclude] += 1
    return idx


def prefix_min_lengths(
    x_row: np.ndarray,
    N: np.ndarray,
    params: HyperParams,
    domain: int,
    key: int,
    exclude: int | None = None,
) -> np.ndarray:
    """Minimal JEP length pooled over the first ``1..r`` samples.

    Entry ``j`` is the statistic that ``r = j + 1`` would give. Each sample
    is mined with the running minimum as a bound.
    """
    out = np.empty(params.r)
    best = INF
    for i in range(params.r):
        if best > 1:
            idx = draw_sample(len(N), params.m, params.seed, domain, key, i, exclude)
            best = min(best, min_jep_length(x_row, _take(N, idx), bound=best))
        out[i] = best
    return out


def sample_jepsets(x_row, N, params, domain, key, exclude=None):
    for i in range(params.r):
        idx = draw_sample(len(N), params.m, params.seed, domain, key, i, exclude)
        yield border_diff(x_row, _take(N, idx))


def instance_statistic(x_row, N, params, domain, key, exclude=None) -> float:
    if params.statistic == MIN:
        return float(prefix_min_lengths(x_row, N, params, domain, key, exclude)[-1])
    return length_statistic(sample_jepsets(x_row, N, params, domain, key, exclude), MEAN)


# ---------------------------------------------------------------------------
# batch evaluation (optionally across worker processes)

_shared: dict = {}


def _init_worker(N, params, domain):
    _shared.update(N=N, params=params, domain=domain)


def _task(args):
    row, key, exclude = args
    N, params, domain = _shared["N"], _shared["params"], _shared["domain"]
    if params.statistic == MIN:
        return prefix_min_lengths(row, N, params, domain, key, exclude)
    return instance_statistic(row, N, params, domain, key, exclude)


def batch_statistics(
    rows: np.ndarray,
    keys: Sequence[int],
    N: np.ndarray,
    params: HyperParams,
    domain: int,
    excludes: Sequence[int | None] | None = None,
    threads: int = 1,
    progress=None,
) -> list:
    """Per-row results of :func:`prefix_min_lengths` (``statistic=min``) or
    the pooled mean length (``statistic=mean``), in input order."""
    if excludes is None:
        excludes = [None] * len(keys)
    tasks = list(zip(rows, keys, excludes))
    if len(N) < params.m + any(e is not None for e in excludes):
        raise UsageError(f"normal set of {len(N)} is too small for m={params.m}")
    threads = threads or os.cpu_count() or 1
    if threads == 1 or len(tasks) < 2 * threads:
        _init_worker(N, params, domain)
        out = []
        for j, t in enumerate(tasks):
            out.append(_task(t))
            if progress:
                progress(j + 1, len(tasks))
        return out
    chunk = max(1, len(tasks) // (threads * 8))
    with ProcessPoolExecutor(threads, initializer=_init_worker, initargs=(N, params, domain)) as ex:
        out = []
        for j, res in enumerate(ex.map(_task, tasks, chunksize=chunk)):
            out.append(res)
            if progress:
                progress(j + 1, len(tasks))
        return out


# ---------------------------------------------------------------------------
# training and scoring


def _matrix(N):
    """Itemized rows as a matrix; anything else as a list of item sets."""
    if isinstance(N, ItemizedDataset):
        return N.matrix
    if isinstance(N, np.ndarray):
        return N
    if N and all(isinstance(x, ItemizedInstance) for x in N):
        return np.asarray([x.items for x in N])
    return [frozenset(x) for x in N]


def _row(x, N):
    if isinstance(N, np.ndarray):
        return np.asarray(x.items if isinstance(x, ItemizedInstance) else x)
    return x.item_set if isinstance(x, ItemizedInstance) else frozenset(x)


def _take(N, idx):
    if isinstance(N, np.ndarray):
        return N[idx]
    return [N[i] for i in idx]


def percentile_index(k: int, p: float) -> int:
    """0-based position of the ``ceil(p*k)``-th element (1-based)."""
    return max(1, math.ceil(round(p * k, 9))) - 1


def sort_lengths(lengths: Sequence[float]) -> list[float]:
    """Decreasing order; ``inf`` sorts first."""
    return sorted((float(v) for v in lengths), reverse=True)


def cutoff(lengths: Sequence[float], p: float) -> float:
    ordered = sort_lengths(lengths)
    return ordered[percentile_index(len(ordered), p)]


def training_statistics(N, params: HyperParams, threads: int = 1, progress=None):
    """Probe rows and their per-probe results (see :func:`batch_statistics`)."""
    N = _matrix(N)
    probes = probe_order(len(N), params.seed)[: params.k]
    res = batch_statistics(
        _take(N, probes), [int(t) for t in probes], N, params, TRAIN,
        excludes=[int(t) for t in probes], threads=threads, progress=progress,
    )
    return probes, res


def train(
    N,
    params: HyperParams = HyperParams(),
    schema: AttributeSchema | None = None,
    threads: int = 1,
    progress=None,
) -> DetectorModel:
    N = _matrix(N)
    params = params.fit_to(len(N))
    _, res = training_statistics(N, params, threads, progress)
    lengths = [float(v[-1]) if params.statistic == MIN else float(v) for v in res]
    ordered = sort_lengths(lengths)
    kappa = ordered[percentile_index(len(ordered), params.p)]
    return DetectorModel(kappa=kappa, params=params, schema=schema, training_lengths=ordered)


def score(x, N, params: HyperParams, key: int = 0, exclude: int | None = None, domain: int = SCORE) -> float:
    """Length statistic of ``x`` against ``r`` samples of ``N``.

    ``exclude`` is the row of ``x`` inside ``N`` when ``x`` is a member; an
    unseen instance is compared with all of ``N``.
    """
    N = _matrix(N)
    if len(N) < params.m + (exclude is not None):
        raise UsageError(f"normal set of {len(N)} is too small for m={params.m}")
    return instance_statistic(_row(x, N), N, params, domain, key, exclude)


def classify(ml: float, kappa: float, rule: str = INCLUSIVE) -> str:
    if ml == INF:
        return NORMAL
    if rule == STRICT:
        return NORMAL if ml > kappa else INTRUDER
    if rule == INCLUSIVE:
        return NORMAL if ml >= kappa else INTRUDER
    raise UsageError(f"unknown rule {rule!r}")


def explain(x, N, params: HyperParams, key: int = 0, exclude: int | None = None, domain: int = SCORE) -> Explanation:
    """All pooled minimal JEPs of ``x`` and the shortest among them."""
    N = _matrix(N)
    if len(N) < params.m + (exclude is not None):
        raise UsageError(f"normal set of {len(N)} is too small for m={params.m}")
    pool: set[Pattern] = set()
    for js in sample_jepsets(_row(x, N), N, params, domain, key, exclude):
        pool |= js.patterns
    if not pool:
        return Explanation(INF, [], [])
    ordered = sorted(pool, key=lambda p: (p.length, sorted(p.items)))
    ml = ordered[0].length
    return Explanation(ml, [p for p in ordered if p.length == ml], ordered)

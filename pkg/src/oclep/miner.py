"""Minimal jumping emerging patterns of one instance against a sample.

A pattern ``P`` drawn from ``t`` is absent from an opposing instance ``s``
exactly when ``P`` contains an item of ``t \\ s``. So the minimal JEPs of
``t`` versus ``M`` are the minimal transversals (hitting sets) of the family
``{t \\ s : s in M}``. Within one call the items of ``t`` are renumbered to
bit positions and sets are plain ints, which keeps edge minimization and the
border expansion cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dataset import ItemizedInstance, Pattern
from .errors import UsageError

INF = math.inf

MIN = "min"
MEAN = "mean"


@dataclass(frozen=True)
class DiffFamily:
    edges: tuple[frozenset, ...]
    has_empty: bool = False


@dataclass(frozen=True)
class JepSet:
    patterns: frozenset[Pattern]

    @property
    def ml(self) -> float:
        if not self.patterns:
            return INF
        return min(p.length for p in self.patterns)

    def __len__(self) -> int:
        return len(self.patterns)


EMPTY_JEPSET = JepSet(frozenset())


def _as_set(x) -> frozenset:
    if isinstance(x, ItemizedInstance):
        return x.item_set
    if isinstance(x, Pattern):
        return x.items
    return frozenset(x)


def diff_edge(t, s) -> frozenset:
    return _as_set(t) - _as_set(s)


def minimize_family(edges: Iterable) -> DiffFamily:
    """Drop duplicate and superset edges; keep and flag an empty edge."""
    uniq = sorted({frozenset(e) for e in edges}, key=lambda e: (len(e), sorted(e)))
    if uniq and not uniq[0]:
        return DiffFamily((frozenset(),), has_empty=True)
    kept: list[frozenset] = []
    for e in uniq:
        if not any(k <= e for k in kept):
            kept.append(e)
    return DiffFamily(tuple(kept))


# ---------------------------------------------------------------------------
# bitmask core


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low
        mask ^= low


def _minimize_masks(masks: Iterable[int]) -> list[int]:
    """Minimal elements of a family of int bitmasks, sorted by size.

    Returns ``[0]`` if the empty set is present.
    """
    uniq = sorted(set(masks), key=lambda e: (e.bit_count(), e))
    if uniq and uniq[0] == 0:
        return [0]
    kept: list[int] = []
    for e in uniq:
        for k in kept:
            if k & e == k:
                break
        else:
            kept.append(e)
    return kept


def _minimize_uint64(masks: np.ndarray) -> list[int]:
    u = np.unique(masks)
    if u[0] == 0:
        return [0]
    if len(u) > 1:
        inside = (u[:, None] & u[None, :]) == u[:, None]
        np.fill_diagonal(inside, False)
        u = u[~inside.any(axis=0)]
    return sorted((int(e) for e in u), key=lambda e: (e.bit_count(), e))


def minimal_transversals(edges: Sequence[int]) -> list[int]:
    """All minimal hitting sets of a minimized, nonempty-edge family.

    Incremental border expansion: after edge ``i`` the border holds the
    minimal sets hitting edges ``0..i``. Sets that already hit the new edge
    stay minimal; the others are extended by one item ``b`` of the edge and
    the extensions that contain a kept set are discarded. A kept set inside
    ``x | b`` must contain ``b`` (the old border is an antichain), and the
    surviving extensions are pairwise incomparable, so only kept sets
    holding ``b`` are checked and no further minimization is needed.
    """
    border = [0]
    for e in edges:
        kept, rest = [], []
        for x in border:
            (kept if x & e else rest).append(x)
        if not rest:
            continue
        grown: list[int] = []
        for b in _bits(e):
            holders = [k for k in kept if k & b]
            for x in rest:
                y = x | b
                for k in holders:
                    if k & y == k:
                        break
                else:
                    grown.append(y)
        border = kept + grown
    return border


def min_transversal_size(edges: Sequence[int], bound: float = INF) -> float:
    """Size of the smallest hitting set, or ``bound`` if none is smaller.

    Branch and bound: branch on the items of a smallest unhit edge, prune
    with a greedy packing of pairwise disjoint edges (each needs its own
    item). Branch ``j`` forbids the items tried in branches ``< j``.
    """
    if not edges:
        return 0
    if edges[0] == 0:
        return INF
    best = bound

    def search(family: list[int], depth: int) -> None:
        nonlocal best
        if not family:
            best = depth
            return
        used, packing = 0, 0
        for e in family:
            if not e & used:
                used |= e
                packing += 1
        if depth + packing >= best:
            return
        pivot = family[0]
        forbidden = 0
        for b in _bits(pivot):
            rest = []
            for e in family:
                if e & b:
                    continue
                e &= ~forbidden
                if not e:
                    break
                rest.append(e)
            else:
                rest.sort(key=int.bit_count)
                search(rest, depth + 1)
                if depth + 1 >= best:
                    return
            forbidden |= b

    search(sorted(edges, key=int.bit_count), 0)
    return best


# ---------------------------------------------------------------------------
# public mining entry points


def _general_masks(t, M) -> tuple[list, list[int]]:
    t_items = sorted(_as_set(t))
    pos = {item: 1 << i for i, item in enumerate(t_items)}
    masks = []
    for s in M:
        s_items = _as_set(s)
        masks.append(sum(bit for item, bit in pos.items() if item not in s_items))
    return t_items, masks


def _to_jepset(transversals: Iterable[int], items: Sequence) -> JepSet:
    pats = set()
    for mask in transversals:
        pats.add(Pattern(frozenset(items[b.bit_length() - 1] for b in _bits(mask))))
    return JepSet(frozenset(pats))


def border_diff(t, M: Sequence) -> JepSet:
    """Complete set of minimal JEPs of ``t`` versus the instances in ``M``.

    ``t`` and the members of ``M`` may be item sets or
    :class:`ItemizedInstance`; ``M`` may also be a 2-D array of item rows
    when ``t`` is a 1-D row (one item per attribute).
    """
    if len(M) == 0:
        raise UsageError("border_diff needs a nonempty opposing set")
    if isinstance(M, np.ndarray):
        return border_diff_rows(np.asarray(t), M)
    items, masks = _general_masks(t, M)
    family = _minimize_masks(masks)
    if family[0] == 0:
        return EMPTY_JEPSET
    return _to_jepset(minimal_transversals(family), items)


def row_family(t_row: np.ndarray, M: np.ndarray) -> list[int]:
    """Minimized diff family of an itemized row against itemized rows.

    With one item per attribute, ``t`` item ``a`` is absent from ``s``
    exactly when the two differ at attribute ``a``, so bit ``a`` of an edge
    is ``t[a] != s[a]``.
    """
    diff = M != t_row
    n_attr = diff.shape[1]
    if n_attr <= 64:
        weights = np.left_shift(np.uint64(1), np.arange(n_attr, dtype=np.uint64))
        masks = np.bitwise_or.reduce(np.where(diff, weights, np.uint64(0)), axis=1)
        return _minimize_uint64(masks)
    packed = np.packbits(diff, axis=1, bitorder="little")
    return _minimize_masks(int.from_bytes(row.tobytes(), "little") for row in packed)


def min_jep_length(t, M: Sequence, bound: float = INF) -> float:
    """Like :func:`min_jep_length_rows` for arbitrary item sets."""
    if len(M) == 0:
        raise UsageError("border_diff needs a nonempty opposing set")
    if isinstance(M, np.ndarray):
        return min_jep_length_rows(np.asarray(t), M, bound)
    family = _minimize_masks(_general_masks(t, M)[1])
    if family[0] == 0:
        return INF
    return min_transversal_size(family, bound)


def border_diff_rows(t_row: np.ndarray, M: np.ndarray) -> JepSet:
    if len(M) == 0:
        raise UsageError("border_diff needs a nonempty opposing set")
    family = row_family(t_row, M)
    if family[0] == 0:
        return EMPTY_JEPSET
    items = [int(v) for v in t_row]
    return _to_jepset(minimal_transversals(family), items)


def min_jep_length_rows(t_row: np.ndarray, M: np.ndarray, bound: float = INF) -> float:
    """Length of the shortest minimal JEP, ``inf`` if none exists.

    Returns ``bound`` when no JEP is shorter than it, which lets callers
    pooling several samples stop early.
    """
    if len(M) == 0:
        raise UsageError("border_diff needs a nonempty opposing set")
    family = row_family(t_row, M)
    if family[0] == 0:
        return INF
    return min_transversal_size(family, bound)


def length_statistic(ps: Iterable[JepSet], mode: str = MIN) -> float:
    """Pool the patterns of several JepSets; min or mean pattern length."""
    pool: set[Pattern] = set()
    for js in ps:
        pool |= js.patterns
    if mode not in (MIN, MEAN):
        raise UsageError(f"unknown length statistic {mode!r}")
    if not pool:
        return INF
    lengths = [p.length for p in pool]
    if mode == MIN:
        return min(lengths)
    return sum(lengths) / len(lengths)

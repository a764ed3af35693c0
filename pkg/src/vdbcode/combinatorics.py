"""Exact pair counts, placement counts, and the closed-form bounds.

Z(L, k, m) counts ordered word pairs at Hamming distance exactly k whose
unsigned values differ by exactly m; it is obtained by exhaustive
enumeration, which doubles as the oracle for everything built on top.
Y*(L, k, m) counts the distinct error masks of weight at most k that can
realize distortion m for some carrier word.  The two closed-form upper
bounds on Z are cheap to evaluate and the dataset generator emits the
exact/tight/loose comparison rows.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable

import numpy as np

from . import _kernels
from .core import ParameterError, SYMMETRIC, WordSpec, distortion_range

logger = logging.getLogger(__name__)

CLASS_ZERO = "zero"
CLASS_ONE = "one"
CLASS_MULTIPLE = "multiple"
CLASS_VIOLATION = "violation"

BOUNDS_CSV_HEADER = ("m", "z_exact", "z_tight", "z_loose")


@dataclass(frozen=True)
class CountTable:
    """Per-m counts over the full distortion range of (L, k)."""

    L: int
    k: int
    entries: dict[int, int]

    def __getitem__(self, m: int) -> int:
        return self.entries[m]


def _check_params(L: int, k: int) -> tuple[int, int]:
    spec = WordSpec(L, SYMMETRIC)
    return distortion_range(spec, k)


def masks_of_weight(L: int, k: int) -> np.ndarray:
    """All L-bit masks with exactly k set bits, ascending."""
    masks = []
    for bits in combinations(range(L), k):
        e = 0
        for i in bits:
            e |= 1 << i
        masks.append(e)
    return np.array(sorted(masks), dtype=np.int64)


def masks_up_to_weight(L: int, k: int) -> np.ndarray:
    """All nonzero L-bit masks with at most k set bits, ascending."""
    parts = [masks_of_weight(L, j) for j in range(1, k + 1)]
    return np.sort(np.concatenate(parts))


@lru_cache(maxsize=128)
def z_exact_table(L: int, k: int) -> CountTable:
    """Exhaustive Z counts for every m in the distortion range."""
    m_min, m_max = _check_params(L, k)
    counts = _kernels.distance_counts(L, masks_of_weight(L, k))
    entries = {m: int(counts[m]) for m in range(m_min, m_max + 1)}
    return CountTable(L, k, entries)


def z_exact(L: int, k: int, m: int) -> int:
    """Ordered pairs at Hamming distance exactly k and integer distance m."""
    m_min, m_max = _check_params(L, k)
    if not 1 <= m <= m_max:
        raise ParameterError(f"m must be in [1, {m_max}], got {m}")
    return z_exact_table(L, k).entries.get(m, 0)


def z_bound_loose(L: int, m: int) -> int:
    """Triangle bound 2**(L+1) - 2m."""
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    return (1 << (L + 1)) - 2 * m


def z_bound_tight(L: int, k: int, m: int) -> int:
    """Staircase bound: the loose bound rounded down to a multiple of 2**(L-k+1)."""
    _check_params(L, k)
    v = z_bound_loose(L, m)
    return v - (v % (1 << (L - k + 1)))


def reach_chunk_rows(L: int) -> int:
    """Masks per reach-matrix chunk, keeping each chunk around 64 MB."""
    return max(1, (1 << 26) >> L)


@lru_cache(maxsize=128)
def _y_star_counts(L: int, k: int) -> np.ndarray:
    masks = masks_up_to_weight(L, k)
    counts = np.zeros(1 << L, dtype=np.int64)
    step = reach_chunk_rows(L)
    for start in range(0, masks.size, step):
        reach = _kernels.reach_matrix(L, masks[start : start + step])
        counts += reach.sum(axis=0)
    return counts


def y_star(L: int, k: int, m: int) -> int:
    """Distinct placements of <= k errors that can realize distortion m."""
    m_min, m_max = _check_params(L, k)
    if not 1 <= m <= m_max:
        raise ParameterError(f"m must be in [1, {m_max}], got {m}")
    return int(_y_star_counts(L, k)[m])


@dataclass(frozen=True)
class DivisibilityReport:
    """Classification of every Z count as zero, one, or a 2**(L-k+1) multiple."""

    L: int
    k: int
    classes: dict[int, str]

    @property
    def violations(self) -> list[int]:
        return [m for m, c in sorted(self.classes.items()) if c == CLASS_VIOLATION]

    @property
    def clean(self) -> bool:
        return not self.violations


def divisibility_report(L: int, k: int) -> DivisibilityReport:
    """Check the observed structure of Z counts for one (L, k).

    A violation marks a count that is neither 0, 1, nor a multiple of
    2**(L-k+1); it is reported (and logged), not raised, since the
    underlying claim is an empirical observation rather than a theorem.
    """
    table = z_exact_table(L, k)
    modulus = 1 << (L - k + 1)
    classes = {}
    for m, z in table.entries.items():
        if z == 0:
            classes[m] = CLASS_ZERO
        elif z == 1:
            classes[m] = CLASS_ONE
        elif z % modulus == 0:
            classes[m] = CLASS_MULTIPLE
        else:
            classes[m] = CLASS_VIOLATION
            logger.warning("divisibility violation: L=%d k=%d m=%d count=%d", L, k, m, z)
    return DivisibilityReport(L, k, classes)


@dataclass(frozen=True)
class BoundsRow:
    m: int
    z_exact: int
    z_tight: int
    z_loose: int


def bounds_dataset(L: int, k: int) -> list[BoundsRow]:
    """Exact-vs-bounds comparison rows for every m in the distortion range."""
    table = z_exact_table(L, k)
    return [
        BoundsRow(m, z, z_bound_tight(L, k, m), z_bound_loose(L, m))
        for m, z in sorted(table.entries.items())
    ]


def write_bounds_csv(rows: Iterable[BoundsRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BOUNDS_CSV_HEADER)
        for row in rows:
            writer.writerow([row.m, row.z_exact, row.z_tight, row.z_loose])

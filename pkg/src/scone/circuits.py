"""Circuits and reduced circuits of a support.

A circuit is a pair ``(A, beta)`` with ``A`` affinely independent and
``beta`` in the relative interior of ``conv(A)``.  Its barycentric
coordinates are rational whenever the points are, and all geometry here is
done by exact Gaussian elimination over ``Fraction``.
"""
from __future__ import annotations

import enum
import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import lcm
from typing import Iterable, Sequence

from .core import ExponentVector, Support

__all__ = [
    "Parity",
    "BarycentricData",
    "Circuit",
    "ReducedFlag",
    "affine_coordinates",
    "barycentric",
    "make_circuit",
    "enumerate_circuits",
    "is_reduced",
    "enumerate_reduced",
]


class Parity(enum.Enum):
    EVEN = "even"
    ODD = "odd"


def _check_dims(points: Sequence[ExponentVector], *more: ExponentVector) -> int:
    dims = {len(p) for p in points} | {len(q) for q in more}
    if len(dims) != 1:
        raise ValueError(f"exponent vectors of mixed dimension {sorted(dims)}")
    return dims.pop()


def affine_coordinates(A: Sequence[ExponentVector], gamma: ExponentVector):
    """Solve ``sum l_i A_i = gamma, sum l_i = 1`` exactly.

    Returns the unique solution as a list of Fractions, or None when ``A`` is
    affinely dependent or ``gamma`` is off the affine hull of ``A``.
    """
    k = len(A)
    n = _check_dims(A, gamma)
    # augmented (n+1) x (k+1) system
    rows = [[Fraction(A[i][j]) for i in range(k)] + [Fraction(gamma[j])] for j in range(n)]
    rows.append([Fraction(1)] * k + [Fraction(1)])
    pivot_row = 0
    for col in range(k):
        piv = next((r for r in range(pivot_row, len(rows)) if rows[r][col] != 0), None)
        if piv is None:
            return None
        rows[pivot_row], rows[piv] = rows[piv], rows[pivot_row]
        lead = rows[pivot_row][col]
        rows[pivot_row] = [x / lead for x in rows[pivot_row]]
        for r in range(len(rows)):
            if r != pivot_row and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[pivot_row])]
        pivot_row += 1
    if any(rows[r][k] != 0 for r in range(pivot_row, len(rows))):
        return None
    return [rows[i][k] for i in range(k)]


def _affinely_independent(A: Sequence[ExponentVector]) -> bool:
    # gamma = A[0] is always on the hull, so a None answer means dependence
    return affine_coordinates(A, A[0]) is not None


@dataclass(frozen=True)
class BarycentricData:
    """Exact barycentric data of a circuit, aligned with ``Circuit.outer``.

    ``lam[i] = p_alpha[i] / p`` with ``p`` the least common denominator, and
    ``m = ceil(log2(p))``.
    """

    lam: tuple
    p: int
    p_alpha: tuple
    m: int


def barycentric(A: Sequence, beta) -> BarycentricData | None:
    """Barycentric data of ``beta`` w.r.t. ``A``, or None if ``(A, beta)``
    is not a circuit (dependent ``A``, ``beta`` outside the relative interior,
    or ``beta`` in ``A``)."""
    if not A:
        raise ValueError("A must be nonempty")
    A = [a if isinstance(a, ExponentVector) else ExponentVector(a) for a in A]
    beta = beta if isinstance(beta, ExponentVector) else ExponentVector(beta)
    _check_dims(A, beta)
    if beta in A:
        return None
    lam = affine_coordinates(A, beta)
    if lam is None or any(l <= 0 for l in lam):
        return None
    p = lcm(*(l.denominator for l in lam))
    p_alpha = tuple(int(l * p) for l in lam)
    return BarycentricData(tuple(lam), p, p_alpha, (p - 1).bit_length())


@dataclass(frozen=True)
class Circuit:
    outer: tuple
    inner: ExponentVector
    bary: BarycentricData
    parity: Parity = Parity.EVEN

    @property
    def odd(self) -> bool:
        return self.parity is Parity.ODD

    @property
    def p(self) -> int:
        return self.bary.p

    @property
    def m(self) -> int:
        return self.bary.m

    @property
    def lam(self) -> tuple:
        return self.bary.lam

    @property
    def p_alpha(self) -> tuple:
        return self.bary.p_alpha

    @property
    def points(self) -> tuple:
        return self.outer + (self.inner,)

    @property
    def id(self) -> str:
        """Short stable hash of ``(A, beta)``, used to scope lift variables."""
        key = ";".join(map(str, self.outer)) + "|" + str(self.inner)
        return hashlib.sha1(key.encode()).hexdigest()[:10]

    def sort_key(self):
        return (self.outer, self.inner)

    def __str__(self) -> str:
        outer = ",".join(map(str, self.outer))
        return f"({{{outer}}},{self.inner})"


def make_circuit(outer: Iterable, inner, odd: bool = False) -> Circuit:
    """Build a circuit from explicit points; raises ValueError if it is not one."""
    outer = tuple(sorted(a if isinstance(a, ExponentVector) else ExponentVector(a) for a in outer))
    inner = inner if isinstance(inner, ExponentVector) else ExponentVector(inner)
    bary = barycentric(outer, inner)
    if bary is None:
        raise ValueError(f"{inner} is not in the relative interior of an affinely independent {outer}")
    return Circuit(outer, inner, bary, Parity.ODD if odd else Parity.EVEN)


def _circuits_for(outer: tuple, inner_pool: Sequence, odd_points: frozenset) -> list:
    if not _affinely_independent(outer):
        return []
    found = []
    for beta in inner_pool:
        if beta in outer:
            continue
        bary = barycentric(outer, beta)
        if bary is not None:
            parity = Parity.ODD if beta in odd_points else Parity.EVEN
            found.append(Circuit(outer, beta, bary, parity))
    return found


def enumerate_circuits(support: Support, outer_pool=None, inner_pool=None,
                       max_outer: int | None = None, workers: int = 1) -> list:
    """All circuits with outer points from ``outer_pool`` and inner point from
    ``inner_pool`` (both default to the full support).

    Outer sets have between 2 and ``max_outer`` points (default ``n + 1``).
    The result is sorted by ``(outer, inner)`` and does not depend on
    ``workers``.
    """
    points = set(support.points)
    outer_pool = sorted(set(support.points if outer_pool is None else map(ExponentVector, outer_pool)))
    inner_pool = sorted(set(support.points if inner_pool is None else map(ExponentVector, inner_pool)))
    if not (set(outer_pool) <= points and set(inner_pool) <= points):
        raise ValueError("circuit pools must be subsets of the support")
    if max_outer is None:
        max_outer = support.dim + 1
    if max_outer > support.dim + 1:
        raise ValueError(f"max_outer={max_outer} exceeds n+1={support.dim + 1}")
    odd_points = frozenset(support.B)
    subsets = [c for size in range(2, max_outer + 1) for c in combinations(outer_pool, size)]

    def job(outer):
        return _circuits_for(outer, inner_pool, odd_points)

    if workers > 1 and len(subsets) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(job, subsets))
    else:
        chunks = [job(s) for s in subsets]
    found = [c for chunk in chunks for c in chunk]
    found.sort(key=Circuit.sort_key)
    return found


@dataclass(frozen=True)
class ReducedFlag:
    is_reduced: bool
    blockers: tuple = ()

    def __bool__(self) -> bool:
        return self.is_reduced


def is_reduced(circ: Circuit, ground: Support) -> ReducedFlag:
    """A circuit is reduced w.r.t. ``ground`` when no point of ``ground.A``
    other than ``A`` and ``beta`` lies in ``conv(A)`` (boundary included)."""
    skip = set(circ.points)
    blockers = []
    for gamma in ground.A:
        if gamma in skip:
            continue
        lam = affine_coordinates(circ.outer, gamma)
        if lam is not None and all(l >= 0 for l in lam):
            blockers.append(gamma)
    return ReducedFlag(not blockers, tuple(blockers))


def enumerate_reduced(support: Support, max_outer: int | None = None, workers: int = 1):
    """Return ``(even, odd)`` reduced circuits: outer points always from A,
    inner points from A for the even list and from B for the odd list."""
    even = enumerate_circuits(support, support.A, support.A, max_outer, workers)
    odd = (enumerate_circuits(support, support.A, support.B, max_outer, workers)
           if support.B else [])
    even = [c for c in even if is_reduced(c, support)]
    odd = [c for c in odd if is_reduced(c, support)]
    return even, odd

"""Primal and dual circuit matrices and their second-order form.

A circuit matrix is a block diagonal matrix of 1x1 and 2x2 blocks whose
entries are affine in named variables.  Positive semidefiniteness of the dual
matrix cuts out ``v_beta^p <= prod v_a^p_a`` after projecting away the lift
variables ``y[k][i]``; the primal matrix does the same for the circuit-number
inequality using lift variables ``x[k][i]`` and ``xbeta``.

Lift variables are indexed as ``(k, i)`` with level ``k`` starting at 1 for
the leaves; level ``k`` has ``2 ** (m - k)`` entries where ``m = ceil(log2 p)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .circuits import Circuit
from .core import ExponentVector

__all__ = [
    "VarRef",
    "AffineEntry",
    "BlockSpec",
    "SocConstraint",
    "CircuitMatrix",
    "theta",
    "dual_circuit_matrix",
    "primal_circuit_matrix",
    "odd_extension",
    "psd2x2_to_soc",
    "matrix_constraints",
]

PRIMAL = "primal"
DUAL = "dual"


def _ev(point) -> ExponentVector:
    return point if isinstance(point, ExponentVector) else ExponentVector(point)


@dataclass(frozen=True, order=True)
class VarRef:
    """A named scalar variable.  ``id`` determines ``kind`` and indices."""

    kind: str
    id: str

    def __str__(self) -> str:
        return self.id

    @classmethod
    def coeff_outer(cls, alpha):
        return cls("coeff_outer", f"c[{_ev(alpha)}]")

    @classmethod
    def coeff_inner(cls, beta):
        return cls("coeff_inner", f"c[{_ev(beta)}]")

    @classmethod
    def coeff(cls, gamma):
        """Global coefficient of an assembled primal problem."""
        return cls("coeff", f"c[{_ev(gamma)}]")

    @classmethod
    def dual(cls, gamma):
        return cls("dual", f"v[{_ev(gamma)}]")

    @classmethod
    def decomp(cls, circuit_id: str, gamma):
        return cls("decomp", f"c[{_ev(gamma)}]@{circuit_id}")

    @classmethod
    def slack(cls, alpha):
        return cls("slack", f"s[{_ev(alpha)}]")

    @classmethod
    def lift_primal(cls, k: int, i: int, circuit_id: str):
        return cls("lift_primal", f"x[{k}][{i}]@{circuit_id}")

    @classmethod
    def lift_primal_beta(cls, circuit_id: str):
        return cls("lift_primal_beta", f"xbeta@{circuit_id}")

    @classmethod
    def lift_dual(cls, k: int, i: int, circuit_id: str):
        return cls("lift_dual", f"y[{k}][{i}]@{circuit_id}")

    @classmethod
    def lift_dual_beta(cls, circuit_id: str):
        return cls("lift_dual_beta", f"ybeta@{circuit_id}")


@dataclass(frozen=True)
class AffineEntry:
    """``sum coef * var + constant``; terms are merged per variable."""

    terms: tuple = ()
    constant: float = 0.0

    def __post_init__(self):
        merged: dict = {}
        for coef, var in self.terms:
            merged[var] = merged.get(var, 0.0) + float(coef)
        object.__setattr__(self, "terms", tuple((c, v) for v, c in merged.items() if c != 0.0))
        object.__setattr__(self, "constant", float(self.constant))

    @classmethod
    def of(cls, var: VarRef, coef: float = 1.0) -> "AffineEntry":
        return cls(((coef, var),))

    def __add__(self, other: "AffineEntry") -> "AffineEntry":
        return AffineEntry(self.terms + other.terms, self.constant + other.constant)

    def __sub__(self, other: "AffineEntry") -> "AffineEntry":
        return self + other.scaled(-1.0)

    def scaled(self, k: float) -> "AffineEntry":
        return AffineEntry(tuple((k * c, v) for c, v in self.terms), k * self.constant)

    def variables(self) -> tuple:
        return tuple(v for _, v in self.terms)

    def evaluate(self, values: Mapping) -> float:
        try:
            return math.fsum([c * values[v] for c, v in self.terms] + [self.constant])
        except KeyError as exc:
            raise ValueError(f"no value for variable {exc.args[0]}") from None

    def __str__(self) -> str:
        parts = []
        for c, v in self.terms:
            parts.append(str(v) if c == 1.0 else f"{c:.17g}*{v}")
        if self.constant or not parts:
            parts.append(f"{self.constant:.17g}")
        return " + ".join(parts)


@dataclass(frozen=True)
class BlockSpec:
    """A symmetric 1x1 block ``(a,)`` or 2x2 block ``(a, b, c)`` meaning
    ``[[a, b], [b, c]]``.  ``tag`` names the block's role, e.g.
    ``("chain", k, i)``, ``("special",)``, ``("leaf", l)``."""

    size: int
    entries: tuple
    tag: tuple

    def evaluate(self, values: Mapping):
        return tuple(e.evaluate(values) for e in self.entries)


@dataclass(frozen=True)
class SocConstraint:
    """``||rows||_2 <= rhs``."""

    rows: tuple
    rhs: AffineEntry

    def residual(self, values: Mapping) -> float:
        norm = math.hypot(*(r.evaluate(values) for r in self.rows))
        return max(0.0, norm - self.rhs.evaluate(values))


@dataclass(frozen=True)
class CircuitMatrix:
    circuit: Circuit
    side: str
    blocks: tuple
    vars: tuple
    lift: Mapping = field(compare=False)
    beta_var: VarRef | None = None

    def count(self, size: int, include_extension: bool = False) -> int:
        return sum(1 for b in self.blocks
                   if b.size == size and (include_extension or b.tag[0] != "odd_extension"))

    def lift_vars(self) -> tuple:
        out = tuple(self.lift[key] for key in sorted(self.lift))
        return out + ((self.beta_var,) if self.beta_var is not None else ())


def _iroot(n: int, k: int) -> int:
    """Floor of the k-th root of a nonnegative integer."""
    if n < 2:
        return n
    x = 1 << -(-n.bit_length() // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            return x
        x = y


def theta(circ: Circuit) -> float:
    """``prod lam_a ** lam_a``.

    Equal to ``(prod p_a^p_a / p^p) ** (1/p)``; when that rational has an exact
    ``p``-th root (e.g. ``p = 2``, ``lam = (1/2, 1/2)`` gives exactly 1/2) the
    result is the correctly rounded float of it, otherwise it is computed in the
    log domain.
    """
    p = circ.p
    num = 1
    for pa in circ.p_alpha:
        num *= pa ** pa
    ratio = Fraction(num, p ** p)
    rn, rd = _iroot(ratio.numerator, p), _iroot(ratio.denominator, p)
    if rn ** p == ratio.numerator and rd ** p == ratio.denominator:
        return float(Fraction(rn, rd))
    logs = [pa * math.log(pa) for pa in circ.p_alpha] + [-p * math.log(p)]
    return math.exp(math.fsum(logs) / p)


def _leaf_slots(circ: Circuit, outer_entries: Sequence, beta_entry, leaf_order):
    slots = []
    for entry, pa in zip(outer_entries, circ.p_alpha):
        slots.extend([entry] * pa)
    slots.extend([beta_entry] * (2 ** circ.m - circ.p))
    if leaf_order is not None:
        if sorted(leaf_order) != list(range(len(slots))):
            raise ValueError(f"leaf_order must be a permutation of range({len(slots)})")
        slots = [slots[j] for j in leaf_order]
    return slots


def _lift_grid(m_top: int, m: int, make) -> dict:
    return {(k, i): make(k, i) for k in range(1, m_top + 1) for i in range(1, 2 ** (m - k) + 1)}


def _block2(a, b, c, tag) -> BlockSpec:
    return BlockSpec(2, (a, b, c), tag)


def dual_circuit_matrix(circ: Circuit, leaf_order: Sequence[int] | None = None) -> CircuitMatrix:
    """The dual circuit matrix of ``circ`` in the variables ``v[...]``.

    For an odd circuit the inner slot is played by ``ybeta`` and the
    odd-extension block ``[[ybeta, v_beta], [v_beta, ybeta]]`` is appended.
    With ``p = 2`` (``m = 1``) there are no ``y`` variables: the single leaf
    carries the inner slot off the diagonal.
    """
    m, cid = circ.m, circ.id
    v_outer = [AffineEntry.of(VarRef.dual(a)) for a in circ.outer]
    v_beta_ref = VarRef.dual(circ.inner)
    beta_var = VarRef.lift_dual_beta(cid) if circ.odd else None
    beta = AffineEntry.of(beta_var if circ.odd else v_beta_ref)
    lift = _lift_grid(m - 1, m, lambda k, i: VarRef.lift_dual(k, i, cid))
    y = {key: AffineEntry.of(ref) for key, ref in lift.items()}

    blocks = []
    for k in range(2, m):
        for i in range(1, 2 ** (m - k) + 1):
            blocks.append(_block2(y[k - 1, 2 * i - 1], y[k, i], y[k - 1, 2 * i], ("chain", k, i)))
    if m >= 2:
        blocks.append(_block2(y[m - 1, 1], beta, y[m - 1, 2], ("special",)))
    blocks.append(BlockSpec(1, (beta,), ("singleton_beta",)))
    slots = _leaf_slots(circ, v_outer, beta, leaf_order)
    for l in range(1, 2 ** (m - 1) + 1):
        top = y[1, l] if m >= 2 else beta
        blocks.append(_block2(slots[2 * l - 2], top, slots[2 * l - 1], ("leaf", l)))
    if circ.odd:
        blocks.append(odd_extension(DUAL, circ))

    vars_ = [VarRef.dual(a) for a in circ.outer] + [v_beta_ref]
    if beta_var is not None:
        vars_.append(beta_var)
    vars_.extend(lift[key] for key in sorted(lift))
    return CircuitMatrix(circ, DUAL, tuple(blocks), tuple(vars_), lift, beta_var)


def _primal_coeff_refs(circ: Circuit, decomposed: bool):
    if decomposed:
        return [VarRef.decomp(circ.id, a) for a in circ.outer], VarRef.decomp(circ.id, circ.inner)
    return [VarRef.coeff_outer(a) for a in circ.outer], VarRef.coeff_inner(circ.inner)


def primal_circuit_matrix(circ: Circuit, decomposed: bool = False,
                          leaf_order: Sequence[int] | None = None) -> CircuitMatrix:
    """The primal circuit matrix of ``circ``.

    Coefficients are the variables ``c[...]``; with ``decomposed=True`` they
    are scoped to this circuit (``c[...]@<id>``) for use inside an assembled
    decomposition.  Odd circuits get the block ``[[xbeta, c_beta], [c_beta,
    xbeta]]`` appended.
    """
    m, cid = circ.m, circ.id
    th = theta(circ)
    outer_refs, inner_ref = _primal_coeff_refs(circ, decomposed)
    xb = VarRef.lift_primal_beta(cid)
    lift = _lift_grid(m, m, lambda k, i: VarRef.lift_primal(k, i, cid))
    x = {key: AffineEntry.of(ref) for key, ref in lift.items()}
    scaled_xb = AffineEntry.of(xb, th)

    blocks = []
    for k in range(2, m + 1):
        for i in range(1, 2 ** (m - k) + 1):
            blocks.append(_block2(x[k - 1, 2 * i - 1], x[k, i], x[k - 1, 2 * i], ("chain", k, i)))
    blocks.append(BlockSpec(1, (x[m, 1] - scaled_xb,), ("singleton_theta",)))
    blocks.append(BlockSpec(1, (AffineEntry.of(xb) + AffineEntry.of(inner_ref),), ("singleton_beta",)))
    slots = _leaf_slots(circ, [AffineEntry.of(r) for r in outer_refs], scaled_xb, leaf_order)
    for l in range(1, 2 ** (m - 1) + 1):
        blocks.append(_block2(slots[2 * l - 2], x[1, l], slots[2 * l - 1], ("leaf", l)))
    if circ.odd:
        blocks.append(odd_extension(PRIMAL, circ, decomposed))

    vars_ = outer_refs + [inner_ref, xb] + [lift[key] for key in sorted(lift)]
    return CircuitMatrix(circ, PRIMAL, tuple(blocks), tuple(vars_), lift, xb)


def odd_extension(side: str, circ: Circuit, decomposed: bool = False) -> BlockSpec:
    """``[[xbeta, c_beta], [c_beta, xbeta]]`` (primal) or
    ``[[ybeta, v_beta], [v_beta, ybeta]]`` (dual)."""
    if not circ.odd:
        raise ValueError(f"odd extension requested for even circuit {circ}")
    if side == PRIMAL:
        lifted = AffineEntry.of(VarRef.lift_primal_beta(circ.id))
        coeff = AffineEntry.of(_primal_coeff_refs(circ, decomposed)[1])
    elif side == DUAL:
        lifted = AffineEntry.of(VarRef.lift_dual_beta(circ.id))
        coeff = AffineEntry.of(VarRef.dual(circ.inner))
    else:
        raise ValueError(f"side must be {PRIMAL!r} or {DUAL!r}, got {side!r}")
    return _block2(lifted, coeff, lifted, ("odd_extension",))


def psd2x2_to_soc(block: BlockSpec):
    """``[[a, b], [b, c]] >= 0`` iff ``||(2b, a - c)|| <= a + c``.

    A 1x1 block becomes the linear entry ``a`` (meaning ``a >= 0``).
    """
    if block.size == 1:
        return block.entries[0]
    if block.size != 2:
        raise ValueError(f"unsupported block size {block.size}")
    a, b, c = block.entries
    return SocConstraint((b.scaled(2.0), a - c), a + c)


def matrix_constraints(mat: CircuitMatrix):
    """Split a circuit matrix into ``(linear >= 0 entries, SOC constraints)``."""
    nonneg, socs = [], []
    for block in mat.blocks:
        con = psd2x2_to_soc(block)
        (socs if isinstance(con, SocConstraint) else nonneg).append(con)
    return nonneg, socs

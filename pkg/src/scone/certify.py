"""Exact membership tests for single-circuit cones and their duals.

Every accept/reject decision on rational data clears the denominators of
``lam = p_alpha / p`` and compares integers-to-integer-powers, so boundary
instances (Motzkin-type equalities) are decided exactly.  Floats are only used
to *report* circuit numbers and relative entropies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .circuits import Circuit
from .core import AGForm, as_fraction

__all__ = [
    "CircuitCoefficients",
    "EntropyCertificate",
    "circuit_number",
    "primal_margin",
    "check_primal_circuit",
    "check_dual_circuit",
    "relative_entropy",
    "verify_entropy_certificate",
]

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class CircuitCoefficients:
    """Values on a circuit: ``outer`` aligned with ``circuit.outer``, and the
    value at the inner point.  Used both for primal coefficients ``c`` and for
    dual points ``v``."""

    outer: tuple
    inner: Fraction

    def __init__(self, outer: Sequence, inner):
        object.__setattr__(self, "outer", tuple(as_fraction(x) for x in outer))
        object.__setattr__(self, "inner", as_fraction(inner))

    @classmethod
    def from_mapping(cls, circ: Circuit, values: Mapping) -> "CircuitCoefficients":
        return cls([values[a] for a in circ.outer], values[circ.inner])

    @classmethod
    def from_form(cls, f: AGForm, circ: Circuit) -> "CircuitCoefficients":
        """Restrict the coefficients of ``f`` to the points of ``circ``."""
        return cls([f[a] for a in circ.outer], f[circ.inner])


@dataclass(frozen=True)
class EntropyCertificate:
    nu: tuple  # aligned with circuit.outer


def _check_lengths(vals: CircuitCoefficients, circ: Circuit):
    if len(vals.outer) != len(circ.outer):
        raise ValueError(f"expected {len(circ.outer)} outer values, got {len(vals.outer)}")


def _require_nonnegative_outer(c: CircuitCoefficients, circ: Circuit):
    _check_lengths(c, circ)
    for alpha, ca in zip(circ.outer, c.outer):
        if ca < 0:
            raise ValueError(f"outer coefficient at {alpha} is negative ({ca})")


def circuit_number(c: CircuitCoefficients, circ: Circuit) -> float:
    """``prod (c_a / lam_a) ** lam_a``, summed in the log domain."""
    _require_nonnegative_outer(c, circ)
    if any(ca == 0 for ca in c.outer):
        return 0.0
    logs = [float(l) * (_log(ca) - _log(l)) for ca, l in zip(c.outer, circ.lam)]
    return math.exp(math.fsum(logs))


def _log(q: Fraction) -> float:
    # log of numerator and denominator separately survives huge/tiny rationals
    return math.log(q.numerator) - math.log(q.denominator)


def _power_sides(outer: Sequence[Fraction], circ: Circuit, p_weighted: bool):
    """``prod outer_a ** p_a`` (optionally times ``p ** p`` against
    ``prod p_a ** p_a``), the two sides of the cleared inequality."""
    prod = Fraction(1)
    for x, pa in zip(outer, circ.p_alpha):
        prod *= x ** pa
    if not p_weighted:
        return prod, 1
    weight = 1
    for pa in circ.p_alpha:
        weight *= pa ** pa
    return prod * circ.p ** circ.p, weight


def check_primal_circuit(c: CircuitCoefficients, circ: Circuit) -> bool:
    """Exact nonnegativity test of the circuit function with coefficients ``c``.

    Even circuits accept ``c_beta >= 0`` outright and otherwise require
    ``(-c_beta)^p prod p_a^p_a <= prod c_a^p_a * p^p``; odd circuits require
    the same with ``|c_beta|`` in place of ``-c_beta``.
    """
    _require_nonnegative_outer(c, circ)
    cb = c.inner
    if not circ.odd and cb >= 0:
        return True
    rhs, weight = _power_sides(c.outer, circ, p_weighted=True)
    return abs(cb) ** circ.p * weight <= rhs


def primal_margin(c: CircuitCoefficients, circ: Circuit) -> float:
    """Signed float margin ``N - (-c_beta)`` (even) or ``N - |c_beta|`` (odd),
    with ``N`` the circuit number.  For reporting and tolerance bands only."""
    n = circuit_number(c, circ)
    cb = float(c.inner)
    return n - abs(cb) if circ.odd else n + cb


def check_dual_circuit(v: CircuitCoefficients, circ: Circuit) -> bool:
    """Exact test of ``v`` against the dual circuit cone.

    Even: ``v >= 0`` on ``A`` and at ``beta``, and ``v_beta^p <= prod v_a^p_a``.
    Odd: ``v >= 0`` on ``A`` and ``|v_beta|^p <= prod v_a^p_a``.
    """
    _check_lengths(v, circ)
    if any(va < 0 for va in v.outer):
        return False
    vb = v.inner
    if not circ.odd and vb < 0:
        return False
    rhs, _ = _power_sides(v.outer, circ, p_weighted=False)
    return abs(vb) ** circ.p <= rhs


def relative_entropy(nu: Sequence[float], gamma: Sequence[float]) -> float:
    """``sum nu_i ln(nu_i / gamma_i)`` with ``0 ln(0/y) = 0`` and
    ``y ln(y/0) = inf``."""
    terms = []
    for x, y in zip(nu, gamma):
        if x == 0:
            continue
        if y == 0:
            return math.inf
        terms.append(x * (math.log(x) - math.log(y)))
    return math.fsum(terms)


def verify_entropy_certificate(c: CircuitCoefficients, circ: Circuit,
                               cert: EntropyCertificate, tol: float = DEFAULT_TOL) -> bool:
    """Check a supplied relative-entropy certificate ``nu`` for ``c``.

    The moment condition ``sum nu_a a = (sum nu_a) beta`` is checked exactly;
    ``D(nu, e c) <= c_beta`` (even) or ``<= -|c_beta|`` (odd) is checked in
    floating point up to ``tol`` relative.
    """
    _require_nonnegative_outer(c, circ)
    nu = [as_fraction(x) for x in cert.nu]
    if len(nu) != len(circ.outer) or any(x < 0 for x in nu):
        return False
    total = sum(nu, Fraction(0))
    for j in range(len(circ.inner)):
        if sum(x * a[j] for x, a in zip(nu, circ.outer)) != total * circ.inner[j]:
            return False
    d = relative_entropy([float(x) for x in nu], [math.e * float(ca) for ca in c.outer])
    bound = -abs(float(c.inner)) if circ.odd else float(c.inner)
    if math.isinf(d):
        return False
    return d <= bound + tol * max(1.0, abs(bound))

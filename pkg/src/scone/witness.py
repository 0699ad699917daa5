"""Lift-variable witnesses for circuit matrices.

Given a point of a circuit cone, the lift variables are filled in bottom-up by
geometric means: each leaf gets ``sqrt(u * w)`` of its two diagonal entries and
each chain level takes ``sqrt`` of the product of its two children.  All
square roots are in double precision; exact decisions stay in
:mod:`scone.certify`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .certify import (CircuitCoefficients, check_dual_circuit, check_primal_circuit,
                      circuit_number)
from .circuits import Circuit
from .liftrep import CircuitMatrix, VarRef, dual_circuit_matrix, primal_circuit_matrix

__all__ = [
    "VerifyReport",
    "complete_dual_witness",
    "complete_primal_witness",
    "verify_assignment",
    "assignment_to_json",
]

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class VerifyReport:
    ok: bool
    worst_block: tuple | None
    worst_margin: float

    def as_dict(self) -> dict:
        tag = None if self.worst_block is None else list(self.worst_block)
        return {"ok": self.ok, "worst_block": tag, "worst_margin": self.worst_margin}


def _fill_tree(mat: CircuitMatrix, values: dict, top_level: int):
    """Assign leaf and chain lift variables of ``mat`` from known diagonals."""
    for block in mat.blocks:
        if block.tag[0] == "leaf" and (1, block.tag[1]) in mat.lift:
            u = block.entries[0].evaluate(values)
            w = block.entries[2].evaluate(values)
            values[mat.lift[1, block.tag[1]]] = math.sqrt(u * w)
    for k in range(2, top_level + 1):
        for i in range(1, 2 ** (mat.circuit.m - k) + 1):
            left = values[mat.lift[k - 1, 2 * i - 1]]
            right = values[mat.lift[k - 1, 2 * i]]
            values[mat.lift[k, i]] = math.sqrt(left * right)


def complete_dual_witness(v: CircuitCoefficients, circ: Circuit,
                          leaf_order: Sequence[int] | None = None):
    """Lift values making the dual circuit matrix PSD, or None if ``v`` is
    not in the dual circuit cone (decided exactly).

    The returned mapping assigns every variable of
    ``dual_circuit_matrix(circ, leaf_order)``, the ``v`` coordinates included.
    """
    if not check_dual_circuit(v, circ):
        return None
    mat = dual_circuit_matrix(circ, leaf_order)
    values = {VarRef.dual(a): float(va) for a, va in zip(circ.outer, v.outer)}
    values[VarRef.dual(circ.inner)] = float(v.inner)
    if circ.odd:
        values[mat.beta_var] = abs(float(v.inner))
    _fill_tree(mat, values, circ.m - 1)
    return values


def complete_primal_witness(c: CircuitCoefficients, circ: Circuit,
                            leaf_order: Sequence[int] | None = None):
    """Lift values making the primal circuit matrix PSD, or None if the
    circuit function with coefficients ``c`` is not nonnegative.

    ``xbeta`` is set to the circuit number: that is the value for which the
    top of the chain equals ``theta * xbeta`` exactly, since then the inner
    slot ``theta * xbeta`` equals the weighted geometric mean
    ``(prod c_a^p_a)^(1/p)`` that the chain reproduces.
    """
    if not check_primal_circuit(c, circ):
        return None
    mat = primal_circuit_matrix(circ, leaf_order=leaf_order)
    values = {VarRef.coeff_outer(a): float(ca) for a, ca in zip(circ.outer, c.outer)}
    values[VarRef.coeff_inner(circ.inner)] = float(c.inner)
    values[mat.beta_var] = circuit_number(c, circ)
    _fill_tree(mat, values, circ.m)
    return values


def _block_margin(block, values) -> float:
    vals = block.evaluate(values)
    if block.size == 1:
        return vals[0]
    a, b, c = vals
    scale = max(1.0, abs(a) + abs(c)) ** 2
    return min(a, c, (a * c - b * b) / scale)


def verify_assignment(mat: CircuitMatrix, values: Mapping, tol: float = DEFAULT_TOL) -> VerifyReport:
    """Check every block of ``mat`` at ``values``.

    1x1 blocks need ``a >= -tol``; 2x2 blocks need both diagonals ``>= -tol``
    and ``det >= -tol * max(1, |a| + |c|)**2``.
    """
    missing = [v for v in mat.vars if v not in values]
    if missing:
        raise ValueError(f"assignment has no value for {missing[0]}")
    worst_tag, worst = None, math.inf
    for block in mat.blocks:
        margin = _block_margin(block, values)
        if margin < worst:
            worst_tag, worst = block.tag, margin
    return VerifyReport(worst >= -tol, worst_tag, worst)


def assignment_to_json(values: Mapping, report: VerifyReport | None = None) -> str:
    out = {"values": {str(k): float(v) for k, v in sorted(values.items(), key=lambda kv: kv[0].id)}}
    if report is not None:
        out["report"] = report.as_dict()
    return json.dumps(out, indent=2)

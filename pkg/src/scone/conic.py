"""Assembled second-order programs for whole S-cones.

The primal cone is a sum over reduced circuits: the coefficients ``c`` are
split into per-circuit pieces ``c[...]@<id>`` plus a nonnegative slack per
``A`` point, and each piece must satisfy its primal circuit matrix.  The dual
cone is an intersection: one shared point ``v`` must satisfy every dual
circuit matrix, each with its own lift variables.

Feasibility is decided numerically by projection splitting (Douglas-Rachford
by default, Dykstra on request) between the affine constraints and the product
of cones, in the lifted space ``(x, s)`` with one slack coordinate per cone row.
"""
from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .circuits import Circuit, enumerate_reduced
from .core import AGForm, Support, as_fraction
from .liftrep import (AffineEntry, CircuitMatrix, SocConstraint, VarRef, dual_circuit_matrix,
                      matrix_constraints, primal_circuit_matrix)
from .witness import verify_assignment

__all__ = [
    "ConicProblem",
    "FeasibilityResult",
    "FEASIBLE",
    "INFEASIBLE_HINT",
    "UNDETERMINED",
    "assemble_primal",
    "assemble_dual",
    "circuit_problem",
    "project_soc",
    "feasibility",
    "verify_problem",
    "export_problem",
    "import_problem",
]

log = logging.getLogger(__name__)

FEASIBLE = "feasible"
INFEASIBLE_HINT = "infeasible_hint"
UNDETERMINED = "undetermined"

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 50_000
STALL_WINDOW = 100
STALL_RTOL = 1e-6


@dataclass(frozen=True)
class ConicProblem:
    """Variables, ``= 0`` rows, ``>= 0`` rows and SOC constraints.

    ``matrices`` and ``infeasible_reason`` are bookkeeping from assembly and
    take no part in equality or serialization.
    """

    vars: tuple = ()
    equalities: tuple = ()
    nonneg: tuple = ()
    socs: tuple = ()
    objective: AffineEntry | None = None
    matrices: tuple = field(default=(), compare=False)
    infeasible_reason: str | None = field(default=None, compare=False)


@dataclass(frozen=True)
class FeasibilityResult:
    status: str
    assignment: dict | None = None
    residual: float = math.inf
    iterations: int = 0
    gap: float = math.inf

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


def _pin(var: VarRef, value) -> AffineEntry:
    return AffineEntry(((1.0, var),), -float(as_fraction(value)))


def _collect(matrices: Sequence[CircuitMatrix], head_vars: Sequence[VarRef]):
    vars_ = list(head_vars)
    seen = set(vars_)
    nonneg, socs = [], []
    for mat in matrices:
        for v in mat.vars:
            if v not in seen:
                seen.add(v)
                vars_.append(v)
        lin, soc = matrix_constraints(mat)
        nonneg.extend(lin)
        socs.extend(soc)
    return vars_, nonneg, socs


def assemble_primal(support: Support, form: AGForm | None = None,
                    max_outer: int | None = None, workers: int = 1) -> ConicProblem:
    """Second-order program for membership of ``form`` in the S-cone.

    Without ``form`` the coefficients ``c[...]`` are left free, so the
    projection of the feasible set onto them is the cone itself.
    """
    if form is not None and not set(form.support.points) <= set(support.points):
        raise ValueError("form is not supported on the given support")
    even, odd = enumerate_reduced(support, max_outer, workers)
    circuits = even + odd
    matrices = [primal_circuit_matrix(c, decomposed=True) for c in circuits]
    coeffs = [VarRef.coeff(g) for g in support.points]
    slacks = [VarRef.slack(a) for a in support.A]
    vars_, nonneg, socs = _collect(matrices, coeffs)
    vars_.extend(slacks)

    parts: dict = {g: [] for g in support.points}
    for circ in circuits:
        for g in circ.points:
            parts[g].append(VarRef.decomp(circ.id, g))
    slack_of = dict(zip(support.A, slacks))
    equalities = []
    for g, cvar in zip(support.points, coeffs):
        terms = [(1.0, d) for d in parts[g]] + [(-1.0, cvar)]
        if g in slack_of:
            terms.append((1.0, slack_of[g]))
        equalities.append(AffineEntry(tuple(terms)))
    reason = None
    if form is not None:
        equalities.extend(_pin(VarRef.coeff(g), form[g]) for g in support.points)
        if not circuits and (any(form[a] < 0 for a in support.A) or any(form[b] != 0 for b in support.B)):
            reason = "no reduced circuits, but the form has a negative or odd-monomial coefficient"
            log.info("primal problem trivially infeasible: %s", reason)
    nonneg = [AffineEntry.of(s) for s in slacks] + nonneg
    return ConicProblem(tuple(vars_), tuple(equalities), tuple(nonneg), tuple(socs),
                        matrices=tuple(matrices), infeasible_reason=reason)


def _point_values(support: Support, point) -> dict:
    if isinstance(point, Mapping):
        return {g: as_fraction(point[g]) for g in support.points}
    point = list(point)
    if len(point) != len(support.points):
        raise ValueError(f"point has {len(point)} entries, support has {len(support.points)} points")
    return {g: as_fraction(x) for g, x in zip(support.points, point)}


def assemble_dual(support: Support, point=None, max_outer: int | None = None,
                  workers: int = 1) -> ConicProblem:
    """Second-order program whose projection onto ``v[...]`` is the dual cone.

    ``point`` (a mapping or a sequence in ``support.points`` order) pins ``v``
    for a membership test.
    """
    even, odd = enumerate_reduced(support, max_outer, workers)
    matrices = [dual_circuit_matrix(c) for c in even + odd]
    coords = [VarRef.dual(g) for g in support.points]
    vars_, nonneg, socs = _collect(matrices, coords)
    nonneg = [AffineEntry.of(VarRef.dual(a)) for a in support.A] + nonneg
    equalities = []
    if point is not None:
        values = _point_values(support, point)
        equalities = [_pin(VarRef.dual(g), values[g]) for g in support.points]
    return ConicProblem(tuple(vars_), tuple(equalities), tuple(nonneg), tuple(socs),
                        matrices=tuple(matrices))


def circuit_problem(circ: Circuit, side: str, values=None) -> ConicProblem:
    """The constraints of a single circuit matrix, optionally with its
    coefficient (primal) or coordinate (dual) variables pinned.

    ``values`` is a mapping from the circuit's points to numbers.
    """
    if side == "primal":
        mat = primal_circuit_matrix(circ)
        refs = [VarRef.coeff_outer(a) for a in circ.outer] + [VarRef.coeff_inner(circ.inner)]
    elif side == "dual":
        mat = dual_circuit_matrix(circ)
        refs = [VarRef.dual(g) for g in circ.points]
    else:
        raise ValueError(f"side must be 'primal' or 'dual', got {side!r}")
    vars_, nonneg, socs = _collect([mat], [])
    equalities = []
    if values is not None:
        equalities = [_pin(ref, values[g]) for ref, g in zip(refs, circ.points)]
    return ConicProblem(tuple(vars_), tuple(equalities), tuple(nonneg), tuple(socs),
                        matrices=(mat,))


# -- feasibility -----------------------------------------------------------------


def project_soc(point) -> np.ndarray:
    """Euclidean projection of ``(t, z)`` onto ``{||z|| <= t}``."""
    point = np.asarray(point, dtype=float)
    t, z = point[0], point[1:]
    nz = np.linalg.norm(z)
    if nz <= t:
        return point.copy()
    if nz <= -t:
        return np.zeros_like(point)
    scale = (t + nz) / 2.0
    return np.concatenate(([scale], scale * z / nz))


class _Layout:
    """Dense matrices of a problem restricted to its free variables."""

    def __init__(self, prob: ConicProblem, fixed: Mapping):
        self.free = [v for v in prob.vars if v not in fixed]
        self.col = {v: j for j, v in enumerate(self.free)}
        self.fixed = dict(fixed)
        unknown = [v for e in self._entries(prob) for v in e.variables()
                   if v not in self.col and v not in self.fixed]
        if unknown:
            raise ValueError(f"constraint uses undeclared variable {unknown[0]}")

        self.E, self.e = self._rows(prob.equalities)
        rows = list(prob.nonneg)
        soc_sizes = []
        for soc in prob.socs:
            rows.append(soc.rhs)
            rows.extend(soc.rows)
            soc_sizes.append(1 + len(soc.rows))
        self.G, self.g = self._rows(rows)
        self.n_nonneg = len(prob.nonneg)
        # SOC blocks grouped by dimension for vectorized projection
        self.soc_groups = {}
        start = self.n_nonneg
        for size in soc_sizes:
            self.soc_groups.setdefault(size, []).append(range(start, start + size))
            start += size
        self.soc_groups = {d: np.array([list(r) for r in rs]) for d, rs in self.soc_groups.items()}

    @staticmethod
    def _entries(prob):
        yield from prob.equalities
        yield from prob.nonneg
        for soc in prob.socs:
            yield soc.rhs
            yield from soc.rows

    def _rows(self, entries):
        A = np.zeros((len(entries), len(self.free)))
        b = np.zeros(len(entries))
        for r, entry in enumerate(entries):
            const = entry.constant
            for coef, var in entry.terms:
                if var in self.col:
                    A[r, self.col[var]] += coef
                else:
                    const += coef * float(self.fixed[var])
            b[r] = const
        return A, b

    def project_cone(self, s: np.ndarray) -> np.ndarray:
        out = s.copy()
        out[: self.n_nonneg] = np.maximum(out[: self.n_nonneg], 0.0)
        for idx in self.soc_groups.values():
            blk = s[idx]
            t, z = blk[:, 0], blk[:, 1:]
            nz = np.linalg.norm(z, axis=1)
            scale = (t + nz) / 2.0
            proj = np.concatenate((scale[:, None], scale[:, None] * z / np.where(nz > 0, nz, 1.0)[:, None]), axis=1)
            proj[nz <= t] = blk[nz <= t]
            proj[nz <= -t] = 0.0
            out[idx] = proj
        return out

    def cone_violation(self, s: np.ndarray) -> float:
        worst = 0.0
        if self.n_nonneg:
            worst = max(worst, float(np.max(-s[: self.n_nonneg])))
        for idx in self.soc_groups.values():
            blk = s[idx]
            worst = max(worst, float(np.max(np.linalg.norm(blk[:, 1:], axis=1) - blk[:, 0])))
        return max(worst, 0.0)


def _douglas_rachford(start, project_affine, lay, nx, relax):
    z = start.copy()
    while True:
        a = project_affine(z)
        y = 2.0 * a - z
        b = np.concatenate((y[:nx], lay.project_cone(y[nx:])))
        z = z + relax * (b - a)
        yield a, b


def _dykstra(start, project_affine, lay, nx, relax):
    b = start.copy()
    p = np.zeros_like(b)
    q = np.zeros_like(b)
    while True:
        a = project_affine(b + p)
        p = b + p - a
        y = a + q
        b = np.concatenate((y[:nx], lay.project_cone(y[nx:])))
        q = y - b
        yield a, b


def feasibility(prob: ConicProblem, fixed: Mapping | None = None,
                max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL,
                method: str = "douglas_rachford", relax: float = 1.5) -> FeasibilityResult:
    """Search for a point satisfying all constraints of ``prob``.

    Both methods alternate between the projection onto the affine constraints
    and the projection onto the cones, carrying a correction term:
    ``"douglas_rachford"`` (default, relaxed by ``relax``) reflects through
    both sets, ``"dykstra"`` keeps Dykstra's increments and converges to the
    nearest feasible point, usually much more slowly.

    ``fixed`` pins variables to values.  The result is ``feasible`` once the
    affine iterate violates no cone constraint by more than ``tol``;
    ``infeasible_hint`` once the distance between the affine and the cone
    iterate has stayed above ``10 * tol`` and stopped changing for
    ``STALL_WINDOW`` iterations; ``undetermined`` after ``max_iter``.
    """
    if method not in ("douglas_rachford", "dykstra"):
        raise ValueError(f"unknown method {method!r}")
    fixed = dict(fixed or {})
    if prob.infeasible_reason is not None:
        return FeasibilityResult(INFEASIBLE_HINT)
    lay = _Layout(prob, fixed)
    nx, ns = len(lay.free), len(lay.g)

    # affine set {(x, s): E x + e = 0, G x + g - s = 0}
    M = np.block([[lay.E, np.zeros((len(lay.e), ns))], [lay.G, -np.eye(ns)]])
    r = np.concatenate((-lay.e, -lay.g))
    if M.size == 0:
        M = np.zeros((0, nx + ns))
    pinv = np.linalg.pinv(M) if M.shape[0] else np.zeros((nx + ns, 0))
    base = pinv @ r
    affine_gap = float(np.max(np.abs(M @ base - r))) if M.shape[0] else 0.0
    if affine_gap > tol * max(1.0, float(np.max(np.abs(r), initial=0.0))):
        return FeasibilityResult(INFEASIBLE_HINT, residual=affine_gap, gap=affine_gap)
    null_proj = np.eye(nx + ns) - pinv @ M

    def project_affine(w):
        return null_proj @ w + base

    def result_at(w, status, k, gap):
        values = dict(zip(lay.free, (float(x) for x in w[:nx])))
        values.update({v: float(val) for v, val in fixed.items()})
        return FeasibilityResult(status, values, lay.cone_violation(w[nx:]), k, gap)

    step = _dykstra if method == "dykstra" else _douglas_rachford
    gaps = deque(maxlen=STALL_WINDOW)
    gap = math.inf
    a = base
    for k, (a, b) in enumerate(step(base, project_affine, lay, nx, relax), start=1):
        if lay.cone_violation(a[nx:]) <= tol:
            return result_at(a, FEASIBLE, k, float(np.linalg.norm(a - b)))
        gap = float(np.linalg.norm(a - b))
        gaps.append(gap)
        if (len(gaps) == STALL_WINDOW and min(gaps) > 10 * tol
                and max(gaps) - min(gaps) <= STALL_RTOL * max(gaps)):
            res = result_at(a, INFEASIBLE_HINT, k, gap)
            return FeasibilityResult(INFEASIBLE_HINT, None, res.residual, k, gap)
        if k == max_iter:
            break
    res = result_at(a, UNDETERMINED, max_iter, gap)
    return FeasibilityResult(UNDETERMINED, None, res.residual, max_iter, gap)


def verify_problem(prob: ConicProblem, values: Mapping, tol: float = DEFAULT_TOL) -> bool:
    """Check an assignment against every circuit matrix of ``prob``."""
    return all(verify_assignment(mat, values, tol).ok for mat in prob.matrices)


# -- export -------------------------------------------------------------------------


def _entry_json(entry: AffineEntry) -> dict:
    return {"terms": [[c, v.id] for c, v in entry.terms], "const": entry.constant}


def _problem_json(prob: ConicProblem) -> dict:
    out = {
        "vars": [{"id": v.id, "kind": v.kind} for v in prob.vars],
        "eq": [_entry_json(e) for e in prob.equalities],
        "nonneg": [_entry_json(e) for e in prob.nonneg],
        "soc": [{"rows": [_entry_json(r) for r in s.rows], "rhs": _entry_json(s.rhs)} for s in prob.socs],
    }
    if prob.objective is not None:
        out["objective"] = _entry_json(prob.objective)
    return out


def _num(x: float) -> str:
    return format(x, ".17g")


def _entry_text(entry: AffineEntry) -> str:
    return " ".join([_num(entry.constant)] + [f"{_num(c)} {v.id}" for c, v in entry.terms])


def _problem_text(prob: ConicProblem) -> str:
    lines = [f"SOCP {len(prob.vars)} {len(prob.equalities)} {len(prob.nonneg)} {len(prob.socs)}", "VARS"]
    lines += [f"{v.id} {v.kind}" for v in prob.vars]
    lines.append("EQ")
    lines += [_entry_text(e) for e in prob.equalities]
    lines.append("NONNEG")
    lines += [_entry_text(e) for e in prob.nonneg]
    lines.append("SOC")
    lines += [" | ".join([_entry_text(s.rhs)] + [_entry_text(r) for r in s.rows]) for s in prob.socs]
    if prob.objective is not None:
        lines += ["OBJ", _entry_text(prob.objective)]
    return "\n".join(lines) + "\n"


def export_problem(prob: ConicProblem, fmt: str = "json") -> bytes:
    """Serialize ``prob`` as ``"json"`` or ``"socptext"``.

    Text lines encode an affine entry as ``const coef id coef id ...``; an SOC
    line is ``rhs | row | row`` meaning ``||rows|| <= rhs``.
    """
    if fmt == "json":
        return json.dumps(_problem_json(prob), separators=(",", ":")).encode()
    if fmt == "socptext":
        return _problem_text(prob).encode()
    raise ValueError(f"unsupported export format {fmt!r}")


def import_problem(data) -> ConicProblem:
    """Inverse of ``export_problem(prob, "json")``."""
    raw = json.loads(data)
    vars_ = tuple(VarRef(v["kind"], v["id"]) for v in raw["vars"])
    by_id = {v.id: v for v in vars_}

    def entry(d):
        return AffineEntry(tuple((c, by_id[i]) for c, i in d["terms"]), d["const"])

    objective = raw.get("objective")
    return ConicProblem(
        vars_,
        tuple(entry(e) for e in raw["eq"]),
        tuple(entry(e) for e in raw["nonneg"]),
        tuple(SocConstraint(tuple(entry(r) for r in s["rows"]), entry(s["rhs"])) for s in raw["soc"]),
        None if objective is None else entry(objective),
    )

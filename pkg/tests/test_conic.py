import json
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gen import rand_fraction, random_circuit, random_odd_circuit
from scone.certify import CircuitCoefficients, check_dual_circuit, check_primal_circuit, primal_margin
from scone.circuits import make_circuit
from scone.conic import (FEASIBLE, INFEASIBLE_HINT, UNDETERMINED, ConicProblem, assemble_dual,
                         assemble_primal, circuit_problem, export_problem, feasibility,
                         import_problem, project_soc, verify_problem)
from scone.core import AGForm, Support, parse_form
from scone.liftrep import AffineEntry, VarRef

TOL = 1e-6


def test_project_soc_cases():
    np.testing.assert_array_equal(project_soc([2, 1, 0]), [2, 1, 0])
    np.testing.assert_array_equal(project_soc([-2, 1, 0]), [0, 0, 0])
    np.testing.assert_allclose(project_soc([0, 2, 0]), [1, 1, 0])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=5))
def test_project_soc_satisfies_moreau_decomposition(point):
    # q is the projection iff q in K, point - q in the polar cone -K, and q . (point - q) = 0
    point = np.array(point)
    q = project_soc(point)
    r = point - q
    scale = max(1.0, np.linalg.norm(point))
    assert np.linalg.norm(q[1:]) <= q[0] + 1e-12 * scale
    assert np.linalg.norm(r[1:]) <= -r[0] + 1e-12 * scale
    assert abs(q @ r) <= 1e-12 * scale**2


def test_primal_examples():
    f = parse_form("1*|x|^(0) + 1*|x|^(2) - 2*x^(1)")
    prob = assemble_primal(f.support, f)
    assert len(prob.matrices) == 1 and prob.matrices[0].circuit.odd
    res = feasibility(prob)
    assert res.status == FEASIBLE and verify_problem(prob, res.assignment, TOL)

    f = parse_form("1*|x|^(0) + 1*|x|^(6) - 1.8*|x|^(2)")
    res = feasibility(assemble_primal(f.support, f))
    assert res.feasible

    f = parse_form("1*|x|^(0) + 2*|x|^(6) + 3*|x|^(2)")
    assert feasibility(assemble_primal(f.support, f)).feasible


def test_primal_trivial_infeasibility():
    f = AGForm.from_terms({(0,): -1})
    res = feasibility(assemble_primal(f.support, f))
    assert res.status == INFEASIBLE_HINT
    f = AGForm.from_terms({(0,): 1}, {(1,): 1})
    assert assemble_primal(f.support, f).infeasible_reason is not None


def test_primal_structure():
    support = Support([(0,), (2,), (6,)])
    prob = assemble_primal(support)
    circ = prob.matrices[0].circuit
    ids = {v.id for v in prob.vars}
    assert {"c[(0)]", "c[(2)]", "c[(6)]", "s[(0)]", "s[(2)]", "s[(6)]"} <= ids
    assert f"c[(2)]@{circ.id}" in ids
    assert len(prob.equalities) == 3
    assert len(set(prob.vars)) == len(prob.vars)


def test_dual_examples():
    support = Support([(0,), (2,), (6,)])
    assert feasibility(assemble_dual(support, [1, 1, 1])).feasible
    assert not feasibility(assemble_dual(support, [1, 2, 1])).feasible
    odd = Support([(0,), (4,)], [(1,)])
    for w, ok in [(0.5, True), (-0.9, True), (1.2, False), (-1.3, False)]:
        # support order is A then B: v0, v4, v1
        res = feasibility(assemble_dual(odd, [1, 1, w]))
        assert res.feasible == ok


def test_dual_without_circuits_is_orthant():
    support = Support([(0,), (2,)])
    prob = assemble_dual(support)
    assert prob.socs == () and len(prob.nonneg) == 2
    assert feasibility(assemble_dual(support, [1, 0])).feasible
    assert not feasibility(assemble_dual(support, [1, -1])).feasible


def _random_instance(rng, side):
    circ = random_circuit(rng, max_p=8, max_dim=2) if rng.random() < 0.6 else random_odd_circuit(rng, 4)
    if side == "primal":
        c_out = [rand_fraction(rng, 0.2, 3) for _ in circ.outer]
        n = primal_margin(CircuitCoefficients(c_out, 0), circ)
        cb = -Fraction(n) * rand_fraction(rng, 0.5, 1.5)
        vals = CircuitCoefficients(c_out, cb)
        return circ, vals, check_primal_circuit(vals, circ), primal_margin(vals, circ)
    v_out = [rand_fraction(rng, 0.2, 3) for _ in circ.outer]
    geo = float(np.prod([float(v) ** float(l) for v, l in zip(v_out, circ.lam)]))
    vb = Fraction(geo) * rand_fraction(rng, 0.5, 1.5)
    vals = CircuitCoefficients(v_out, vb)
    return circ, vals, check_dual_circuit(vals, circ), geo - abs(float(vb))


@pytest.mark.parametrize("side", ["primal", "dual"])
def test_single_circuit_feasibility_matches_exact(side):
    rng = random.Random(31 if side == "primal" else 32)
    for _ in range(40):
        circ, vals, exact, margin = _random_instance(rng, side)
        values = dict(zip(circ.points, list(vals.outer) + [vals.inner]))
        prob = circuit_problem(circ, side, values)
        res = feasibility(prob, tol=TOL)
        if exact is False:
            assert res.status != FEASIBLE
        if abs(margin) > 10 * TOL:
            assert res.feasible == exact
        if res.feasible:
            assert verify_problem(prob, res.assignment, 1e-5)


def test_contradictory_pins_never_feasible():
    circ = make_circuit([(0,), (6,)], (2,))
    for cb in ("-1.95", "-2.5", "-10"):
        prob = circuit_problem(circ, "primal", {(0,): 1, (6,): 1, (2,): Fraction(cb)})
        assert feasibility(prob).status in (INFEASIBLE_HINT, UNDETERMINED)


def test_contradictory_equalities_detected():
    x = VarRef.dual((0,))
    prob = ConicProblem((x,), (AffineEntry(((1.0, x),), -1.0), AffineEntry(((1.0, x),), -2.0)))
    assert feasibility(prob).status == INFEASIBLE_HINT


def test_dykstra_method_agrees_on_easy_instance():
    f = parse_form("1*|x|^(0) + 1*|x|^(6) - 1*|x|^(2)")
    prob = assemble_primal(f.support, f)
    assert feasibility(prob, method="dykstra").feasible
    with pytest.raises(ValueError):
        feasibility(prob, method="newton")


def test_monotone_in_outer_coefficients():
    base = parse_form("1*|x|^(0) + 1*|x|^(2) + 1*|x|^(4) - 1*|x|^(1) - 1*|x|^(3)")
    assert feasibility(assemble_primal(base.support, base)).feasible
    bigger = parse_form("3*|x|^(0) + 1*|x|^(2) + 2*|x|^(4) - 1*|x|^(1) - 1*|x|^(3)")
    assert feasibility(assemble_primal(bigger.support, bigger)).feasible


def test_export_empty_problem():
    assert export_problem(ConicProblem()) == b'{"vars":[],"eq":[],"nonneg":[],"soc":[]}'
    with pytest.raises(ValueError):
        export_problem(ConicProblem(), "mps")


def test_export_p2_example_text():
    circ = make_circuit([(0,), (2,)], (1,))
    text = export_problem(circuit_problem(circ, "primal"), "socptext").decode()
    lines = text.splitlines()
    assert lines[0] == "SOCP 5 0 2 1"
    nonneg = lines[lines.index("NONNEG") + 1: lines.index("SOC")]
    assert nonneg == [f"0 1 x[1][1]@{circ.id} -0.5 xbeta@{circ.id}",
                      f"0 1 xbeta@{circ.id} 1 c[(1)]"]
    assert lines[-1] == f"0 1 c[(0)] 1 c[(2)] | 0 2 x[1][1]@{circ.id} | 0 1 c[(0)] -1 c[(2)]"


def test_export_json_round_trip():
    f = parse_form("1*|x|^(0,0) + 1*|x|^(4,2) + 1*|x|^(2,4) - 3*|x|^(2,2) + 1*x^(1,1)")
    for prob in (assemble_primal(f.support, f), assemble_dual(f.support)):
        data = export_problem(prob)
        assert import_problem(data) == prob
        assert list(json.loads(data)) == ["vars", "eq", "nonneg", "soc"]
        assert export_problem(import_problem(data)) == data


def test_every_referenced_variable_is_declared():
    f = parse_form("1*|x|^(0,0) + 1*|x|^(4,0) + 1*|x|^(0,4) - 1*|x|^(1,1) + 1*x^(1,2)")
    for prob in (assemble_primal(f.support, f), assemble_dual(f.support)):
        declared = set(prob.vars)
        used = {v for e in prob.equalities + prob.nonneg for v in e.variables()}
        used |= {v for s in prob.socs for e in (s.rhs,) + s.rows for v in e.variables()}
        assert used <= declared

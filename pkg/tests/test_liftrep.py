import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gen import random_circuit, random_odd_circuit
from scone.circuits import make_circuit
from scone.liftrep import (AffineEntry, BlockSpec, SocConstraint, VarRef, dual_circuit_matrix,
                           matrix_constraints, odd_extension, primal_circuit_matrix,
                           psd2x2_to_soc, theta)


def E(*terms, const=0.0):
    return AffineEntry(tuple(terms), const)


def one(var):
    return AffineEntry.of(var)


def test_dual_running_example_structure():
    circ = make_circuit([(0,), (6,)], (2,))
    mat = dual_circuit_matrix(circ)
    v0, v2, v6 = (VarRef.dual(g) for g in [(0,), (2,), (6,)])
    y11, y12 = VarRef.lift_dual(1, 1, circ.id), VarRef.lift_dual(1, 2, circ.id)
    expected = (
        BlockSpec(2, (one(y11), one(v2), one(y12)), ("special",)),
        BlockSpec(1, (one(v2),), ("singleton_beta",)),
        BlockSpec(2, (one(v0), one(y11), one(v0)), ("leaf", 1)),
        BlockSpec(2, (one(v6), one(y12), one(v2)), ("leaf", 2)),
    )
    assert mat.blocks == expected
    assert set(mat.lift_vars()) == {y11, y12}


def test_primal_p2_example_structure():
    circ = make_circuit([(0,), (2,)], (1,))
    assert theta(circ) == 0.5
    mat = primal_circuit_matrix(circ)
    c0, c2 = VarRef.coeff_outer((0,)), VarRef.coeff_outer((2,))
    c1 = VarRef.coeff_inner((1,))
    x11, xb = VarRef.lift_primal(1, 1, circ.id), VarRef.lift_primal_beta(circ.id)
    nonneg, socs = matrix_constraints(mat)
    assert set(nonneg) == {E((1.0, x11), (-0.5, xb)), E((1.0, xb), (1.0, c1))}
    assert socs == [SocConstraint((E((2.0, x11)), E((1.0, c0), (-1.0, c2))),
                                  E((1.0, c0), (1.0, c2)))]


@pytest.mark.parametrize("p_alpha, expected", [
    ((1, 1), Fraction(1, 2)),
    ((1, 3), None),
    ((2, 2, 4), None),
])
def test_theta_value(p_alpha, expected):
    p = sum(p_alpha)
    outer = [(0,), (p,)] if len(p_alpha) == 2 else [(0, 0), (p, 0), (0, p)]
    beta = (p_alpha[1],) if len(p_alpha) == 2 else (p_alpha[1], p_alpha[2])
    circ = make_circuit(outer, beta)
    want = math.prod(float(l) ** float(l) for l in circ.lam)
    got = theta(circ)
    if expected is not None:
        assert got == float(expected)
    assert got == pytest.approx(want, rel=1e-14)


def test_theta_exact_after_reduction():
    # lam = (1/2, 1/2) after reducing p_alpha = (2, 2)
    assert theta(make_circuit([(0,), (4,)], (2,))) == 0.5


@pytest.mark.parametrize("p", range(2, 65))
def test_block_counts(p):
    k = next(k for k in range(1, p) if math.gcd(k, p) == 1)
    circ = make_circuit([(0,), (p,)], (k,))
    m = circ.m
    dual = dual_circuit_matrix(circ)
    primal = primal_circuit_matrix(circ)
    assert (dual.count(2), dual.count(1), len(dual.lift)) == (2**m - 1, 1, 2**m - 2)
    assert (primal.count(2), primal.count(1)) == (2**m - 1, 2)
    assert len(primal.lift) + 1 == 2**m


def test_odd_circuits_add_extension():
    circ = make_circuit([(0,), (4,)], (1,), odd=True)
    dual = dual_circuit_matrix(circ)
    assert dual.blocks[-1].tag == ("odd_extension",)
    assert dual.count(2, include_extension=True) == dual.count(2) + 1
    yb, v1 = dual.beta_var, VarRef.dual((1,))
    assert dual.blocks[-1].entries == (one(yb), one(v1), one(yb))
    # the beta slot of the tree uses ybeta, not v_beta
    assert all(v1 not in b.entries[0].variables() + b.entries[-1].variables()
               for b in dual.blocks[:-1])
    primal = primal_circuit_matrix(circ)
    assert primal.blocks[-1].entries == (one(primal.beta_var), one(VarRef.coeff_inner((1,))),
                                         one(primal.beta_var))
    with pytest.raises(ValueError):
        odd_extension("dual", make_circuit([(0,), (4,)], (1,)))


def test_decomposed_primal_uses_circuit_scoped_coefficients():
    circ = make_circuit([(0,), (6,)], (2,))
    mat = primal_circuit_matrix(circ, decomposed=True)
    kinds = {v.kind for v in mat.vars}
    assert "coeff_outer" not in kinds and "decomp" in kinds
    assert VarRef.decomp(circ.id, (6,)) in mat.vars


def test_leaf_order_keeps_diagonal_multiset():
    circ = make_circuit([(0, 0), (4, 2), (2, 4)], (1, 1))      # p = 6, 8 leaf slots
    base = dual_circuit_matrix(circ)
    perm = list(reversed(range(2**circ.m)))
    other = dual_circuit_matrix(circ, leaf_order=perm)
    diag = lambda mat: sorted(
        str(e) for b in mat.blocks if b.tag[0] == "leaf" for e in (b.entries[0], b.entries[2]))
    assert diag(base) == diag(other)
    assert base.blocks != other.blocks
    with pytest.raises(ValueError):
        dual_circuit_matrix(circ, leaf_order=[0, 0, 1, 2, 3, 4, 5, 6])


def test_affine_entry_algebra():
    x, y = VarRef.dual((0,)), VarRef.dual((1,))
    e = E((1.0, x), (2.0, y), (-1.0, x), const=1.5)
    assert e.terms == ((2.0, y),)
    assert (e - e).terms == () and (e - e).constant == 0.0
    assert e.scaled(2).evaluate({y: 1.0}) == 7.0
    with pytest.raises(ValueError):
        e.evaluate({})


def soc_holds(soc, values, tol=0.0):
    return soc.residual(values) <= tol


sym = st.floats(min_value=-10, max_value=10, allow_nan=False)


@settings(max_examples=500)
@given(sym, sym, sym)
def test_psd_iff_soc_against_eigenvalues(a, b, c):
    u, v, w = VarRef.dual((0,)), VarRef.dual((1,)), VarRef.dual((2,))
    block = BlockSpec(2, (one(u), one(v), one(w)), ("leaf", 1))
    soc = psd2x2_to_soc(block)
    values = {u: a, v: b, w: c}
    lam_min = np.linalg.eigvalsh(np.array([[a, b], [b, c]]))[0]
    scale = max(1.0, abs(a) + abs(b) + abs(c))
    if abs(lam_min) > 1e-9 * scale:
        assert soc_holds(soc, values) == (lam_min >= 0)


def test_singleton_block_becomes_nonnegativity():
    x = VarRef.dual((0,))
    assert psd2x2_to_soc(BlockSpec(1, (E((1.0, x), const=2.0),), ("singleton_beta",))) == \
        E((1.0, x), const=2.0)


def test_lift_variables_are_distinct_per_circuit():
    rng = random.Random(5)
    seen = {}
    for _ in range(50):
        circ = random_circuit(rng) if rng.random() < 0.8 else random_odd_circuit(rng)
        for v in dual_circuit_matrix(circ).lift_vars():
            assert seen.setdefault(v, circ.id) == circ.id

"""Exponent vectors, supports and AG forms.

An AG form is a function

    f(x) = sum_{alpha in A} c_alpha |x|^alpha + sum_{beta in B} c_beta x^beta

where the ``A`` exponents are arbitrary rationals and the ``B`` exponents are
natural numbers with at least one odd coordinate.  Everything here is exact
(``fractions.Fraction``); floats only show up in :func:`evaluate`.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

__all__ = [
    "ExponentVector",
    "Support",
    "AGForm",
    "ParseError",
    "as_fraction",
    "evaluate",
    "parse_form",
    "parse_support",
    "print_form",
]


def as_fraction(value) -> Fraction:
    """Exact conversion of ints, strings, Fractions and floats."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip().replace("−", "-"))
    if isinstance(value, float) and not math.isfinite(value):
        raise ValueError(f"non-finite value {value!r}")
    return Fraction(value)


class ExponentVector(tuple):
    """An exact rational point of R^n, ordered lexicographically."""

    def __new__(cls, coords: Iterable = ()):
        return super().__new__(cls, (as_fraction(c) for c in coords))

    @property
    def dim(self) -> int:
        return len(self)

    def is_natural(self) -> bool:
        return all(c.denominator == 1 and c >= 0 for c in self)

    def is_even(self) -> bool:
        return self.is_natural() and all(c.numerator % 2 == 0 for c in self)

    def __str__(self) -> str:
        return "(" + ",".join(str(c) for c in self) + ")"

    def __repr__(self) -> str:
        return f"ExponentVector({self})"


def _points(points: Iterable) -> tuple:
    return tuple(sorted({p if isinstance(p, ExponentVector) else ExponentVector(p) for p in points}))


@dataclass(frozen=True, init=False)
class Support:
    """Disjoint exponent sets ``A`` (|x|-terms) and ``B`` (odd monomials).

    Points are deduplicated and stored sorted, so two supports built from the
    same points in any order compare equal.
    """

    A: tuple
    B: tuple
    dim: int

    def __init__(self, A: Iterable, B: Iterable = ()):
        A, B = _points(A), _points(B)
        if not A:
            raise ValueError("the A part of a support must be nonempty")
        dims = {p.dim for p in A + B}
        if len(dims) != 1:
            raise ValueError(f"exponent vectors of mixed dimension {sorted(dims)}")
        clash = set(A) & set(B)
        if clash:
            raise ValueError(f"A and B must be disjoint; both contain {min(clash)}")
        for beta in B:
            if not beta.is_natural():
                raise ValueError(f"B exponent {beta} is not a vector of natural numbers")
            if beta.is_even():
                raise ValueError(f"B exponent {beta} has only even coordinates")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "dim", dims.pop())

    @property
    def points(self) -> tuple:
        return self.A + self.B

    def __contains__(self, point) -> bool:
        return point in self.A or point in self.B

    def __str__(self) -> str:
        a = ", ".join(map(str, self.A))
        b = ", ".join(map(str, self.B))
        return f"A={{{a}}} B={{{b}}}"


@dataclass(frozen=True)
class AGForm:
    """Coefficients over a support; absent points carry coefficient zero."""

    support: Support
    coeffs: Mapping = field(default_factory=dict)

    def __post_init__(self):
        full = {gamma: Fraction(0) for gamma in self.support.points}
        for key, value in self.coeffs.items():
            gamma = key if isinstance(key, ExponentVector) else ExponentVector(key)
            if gamma not in full:
                raise ValueError(f"coefficient for {gamma}, which is not in the support")
            full[gamma] = as_fraction(value)
        object.__setattr__(self, "coeffs", full)

    @classmethod
    def from_terms(cls, abs_terms: Mapping, odd_terms: Mapping = None) -> "AGForm":
        odd_terms = odd_terms or {}
        support = Support(abs_terms.keys(), odd_terms.keys())
        return cls(support, {**abs_terms, **odd_terms})

    def __getitem__(self, gamma) -> Fraction:
        if not isinstance(gamma, ExponentVector):
            gamma = ExponentVector(gamma)
        return self.coeffs.get(gamma, Fraction(0))

    def __str__(self) -> str:
        return print_form(self)


def evaluate(f: AGForm, x: Sequence[float]) -> float:
    """Evaluate ``f`` at a real point; returns ``math.inf`` when a term with a
    nonzero coefficient has a zero base raised to a negative power."""
    if len(x) != f.support.dim:
        raise ValueError(f"point has dimension {len(x)}, form has dimension {f.support.dim}")
    total = []
    infinite = False
    for gamma, c in f.coeffs.items():
        if c == 0:
            continue
        is_abs = gamma in f.support.A
        term = float(c)
        for xj, ej in zip(x, gamma):
            if ej == 0:
                continue
            if xj == 0:
                if ej < 0:
                    infinite = True
                    break
                term = 0.0
                break
            if is_abs:
                term *= abs(xj) ** float(ej)
            else:
                term *= xj ** int(ej)
        total.append(term)
    if infinite:
        return math.inf
    return math.fsum(total)


# -- text format ---------------------------------------------------------------


class ParseError(ValueError):
    """Malformed form text; ``pos`` is the 0-based offset of the problem."""

    def __init__(self, message: str, pos: int | None = None):
        self.pos = pos
        if pos is not None:
            message = f"{message} (at position {pos})"
        super().__init__(message)


_TOKEN = re.compile(
    r"""\s*(?:
        (?P<num>\d+(?:\.\d*)?(?:/\d+)?|\.\d+)
      | (?P<abs>\|x\|)
      | (?P<var>x)
      | (?P<op>[-+*^(),/−])
    )""",
    re.VERBOSE,
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        value = m.group(kind)
        if value == "−":
            value = "-"
        tokens.append((kind, value, m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, need_coeff: bool):
        self.tokens = _tokenize(text)
        self.i = 0
        self.need_coeff = need_coeff

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None, value=None):
        tok = self.tokens[self.i]
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            want = value or kind
            got = tok[1] or "end of input"
            raise ParseError(f"expected {want!r}, got {got!r}", tok[2])
        self.i += 1
        return tok

    def signed_number(self):
        sign = 1
        while self.peek()[1] in "+-" and self.peek()[0] == "op":
            if self.take()[1] == "-":
                sign = -sign
        tok = self.take("num")
        return sign * Fraction(tok[1]), tok[2]

    def terms(self):
        out = []
        sign = 1
        first = True
        while True:
            tok = self.peek()
            if tok[0] == "op" and tok[1] in "+-,":
                if tok[1] == "-":
                    sign = -sign
                self.take()
                continue
            if tok[0] == "end":
                if first or sign == -1:
                    raise ParseError("expected a term", tok[2])
                return out
            coeff, start = Fraction(1), tok[2]
            if tok[0] == "num":
                coeff = Fraction(self.take()[1])
                self.take("op", "*")
            elif self.need_coeff:
                raise ParseError("expected a coefficient", tok[2])
            base = self.peek()
            if base[0] not in ("abs", "var"):
                raise ParseError("expected '|x|' or 'x'", base[2])
            self.take()
            self.take("op", "^")
            self.take("op", "(")
            coords = [self.signed_number()[0]]
            while self.peek()[1] == ",":
                self.take()
                coords.append(self.signed_number()[0])
            self.take("op", ")")
            out.append((sign * coeff, base[0] == "abs", ExponentVector(coords), start))
            sign = 1
            first = False
            nxt = self.peek()
            if nxt[0] != "end" and not (nxt[0] == "op" and nxt[1] in "+-,"):
                raise ParseError(f"unexpected {nxt[1]!r}", nxt[2])


def _collect(text: str, need_coeff: bool):
    abs_terms, odd_terms = {}, {}
    dim = None
    for coeff, is_abs, gamma, pos in _Parser(text, need_coeff).terms():
        if dim is None:
            dim = gamma.dim
        elif gamma.dim != dim:
            raise ParseError(f"exponent {gamma} has dimension {gamma.dim}, expected {dim}", pos)
        if is_abs:
            if gamma in odd_terms:
                raise ParseError(f"{gamma} used both as |x| and x exponent", pos)
            abs_terms[gamma] = abs_terms.get(gamma, 0) + coeff
        else:
            if not gamma.is_natural():
                raise ParseError(f"x exponent {gamma} must consist of natural numbers", pos)
            if gamma.is_even():
                raise ParseError(f"exponent {gamma} all even, must use |x|", pos)
            if gamma in abs_terms:
                raise ParseError(f"{gamma} used both as |x| and x exponent", pos)
            odd_terms[gamma] = odd_terms.get(gamma, 0) + coeff
    if not abs_terms:
        raise ParseError("a form needs at least one |x| term", 0)
    return abs_terms, odd_terms


def parse_form(text: str) -> AGForm:
    """Parse ``"1*|x|^(0,0) + 1*|x|^(4,2) - 3*x^(1,1)"`` into an AGForm.

    Coefficients may be integers, ``p/q`` or finite decimals; all are kept
    exactly.  Repeated exponents are summed.
    """
    abs_terms, odd_terms = _collect(text, need_coeff=True)
    return AGForm.from_terms(abs_terms, odd_terms)


def parse_support(text: str) -> Support:
    """Like :func:`parse_form` but coefficients are optional and ignored."""
    abs_terms, odd_terms = _collect(text, need_coeff=False)
    return Support(abs_terms, odd_terms)


def print_form(f: AGForm) -> str:
    parts = []
    for gamma in f.support.points:
        c = f.coeffs[gamma]
        base = "|x|" if gamma in f.support.A else "x"
        body = f"{abs(c)}*{base}^{gamma}"
        if not parts:
            parts.append(("-" if c < 0 else "") + body)
        else:
            parts.append(("- " if c < 0 else "+ ") + body)
    return " ".join(parts)

"""Purely exponential equations: representation, parsing, exact evaluation and bounded search.

An equation is stored as ``sum(coeff * prod(base ** var)) = 0``.  Text such as
``3^x+4^y+5^z=6^w`` is parsed with the right-hand side negated.
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping

from .constraints import ConstraintSet

INT64_MIN, INT64_MAX = -(2**63), 2**63 - 1

Assignment = dict[str, int]


class EquationError(ValueError):
    pass


class ParseError(EquationError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


@dataclass(frozen=True)
class Term:
    coefficient: int
    factors: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        if self.coefficient == 0:
            raise EquationError("zero coefficient")
        if not INT64_MIN <= self.coefficient <= INT64_MAX:
            raise EquationError(f"coefficient {self.coefficient} does not fit in 64 bits")
        for base, _ in self.factors:
            if base <= 1:
                raise EquationError(f"base {base} must be greater than 1")

    def variables(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(v for _, v in self.factors))

    def value(self, asg: Mapping[str, int]) -> int:
        out = self.coefficient
        for base, var in self.factors:
            out *= base ** asg[var]
        return out

    def render(self, sign: int = 1) -> str:
        c = sign * self.coefficient
        powers = "*".join(f"{b}^{v}" for b, v in self.factors)
        if not powers:
            return str(c)
        return powers if c == 1 else f"{c}*{powers}"


def _normalize(terms: Iterable[Term]) -> tuple[Term, ...]:
    terms = tuple(terms)
    return tuple(t for t in terms if t.coefficient > 0) + tuple(t for t in terms if t.coefficient < 0)


@dataclass(frozen=True)
class ExpEquation:
    terms: tuple[Term, ...]
    variables: tuple[str, ...] = field(default=())

    def __post_init__(self):
        terms = _normalize(self.terms)
        object.__setattr__(self, "terms", terms)
        if len(terms) < 3:
            raise EquationError(f"need at least 3 terms, got {len(terms)}")
        if sum(1 for t in terms if not t.factors) > 1:
            raise EquationError("at most one constant term is allowed")
        seen = tuple(dict.fromkeys(v for t in terms for v in t.variables()))
        if not self.variables:
            object.__setattr__(self, "variables", seen)
        elif set(self.variables) != set(seen) or len(self.variables) != len(seen):
            raise EquationError("variable list does not match the variables used by the terms")

    def __str__(self) -> str:
        return render(self)

    def bases_of(self, var: str) -> list[int]:
        return [b for t in self.terms for b, v in t.factors if v == var]

    def negated(self) -> "ExpEquation":
        return ExpEquation(tuple(Term(-t.coefficient, t.factors) for t in self.terms), self.variables)

    def to_json(self) -> dict:
        return {
            "text": render(self),
            "variables": list(self.variables),
            "terms": [
                {"coeff": t.coefficient, "factors": [{"base": b, "var": v} for b, v in t.factors]}
                for t in self.terms
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ExpEquation":
        terms = tuple(
            Term(int(t["coeff"]), tuple((int(f["base"]), f["var"]) for f in t["factors"]))
            for t in data["terms"]
        )
        return cls(terms, tuple(data.get("variables", ())))


def render(eq: ExpEquation) -> str:
    left = [t.render() for t in eq.terms if t.coefficient > 0]
    right = [t.render(-1) for t in eq.terms if t.coefficient < 0]
    return f"{'+'.join(left) or '0'}={'+'.join(right) or '0'}"


_TOKEN = re.compile(r"(?P<int>\d+)|(?P<id>[A-Za-z_]\w*)|(?P<op>[-+*^=])")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self, ahead: int = 0) -> tuple[str, str, int] | None:
        j = self.i + ahead
        return self.tokens[j] if j < len(self.tokens) else None

    def where(self) -> int:
        tok = self.peek()
        return tok[2] if tok else len(self.text)

    def expect(self, kind: str, value: str | None = None) -> str:
        tok = self.peek()
        if tok is None or tok[0] != kind or (value is not None and tok[1] != value):
            got = "end of input" if tok is None else repr(tok[1])
            raise ParseError(f"expected {value or kind}, got {got}", self.where())
        self.i += 1
        return tok[1]

    def accept(self, value: str) -> bool:
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] == value:
            self.i += 1
            return True
        return False

    def side(self) -> list[Term]:
        tok, nxt = self.peek(), self.peek(1)
        if tok and tok[1] == "0" and (nxt is None or nxt[1] == "="):
            self.i += 1
            return []
        terms = [self.term()]
        while self.accept("+"):
            terms.append(self.term())
        return terms

    def term(self) -> Term:
        start = self.where()
        sign = -1 if self.accept("-") else 1
        first = int(self.expect("int"))
        factors: list[tuple[int, str]] = []
        coeff = 1
        if self.accept("^"):
            factors.append((first, self.expect("id")))
        else:
            coeff = first
            if coeff == 0:
                raise ParseError("zero coefficient", start)
        while self.accept("*"):
            pos = self.where()
            base = int(self.expect("int"))
            self.expect("op", "^")
            factors.append((base, self.expect("id")))
            if base <= 1:
                raise ParseError(f"base {base} must be greater than 1", pos)
        if factors and factors[0][0] <= 1:
            raise ParseError(f"base {factors[0][0]} must be greater than 1", start)
        try:
            return Term(sign * coeff, tuple(factors))
        except EquationError as exc:
            raise ParseError(str(exc), start) from None


def parse_equation(text: str) -> ExpEquation:
    """Parse ``expr = expr`` into an :class:`ExpEquation`.

    Terms are ``[coeff*]base^var[*base^var...]`` separated by ``+``; a bare
    integer is a constant term and a lone ``0`` denotes an empty side.
    """
    p = _Parser(text)
    left = p.side()
    p.expect("op", "=")
    right = p.side()
    if p.peek() is not None:
        raise ParseError(f"unexpected {p.peek()[1]!r}", p.where())
    terms = left + [Term(-t.coefficient, t.factors) for t in right]
    try:
        return ExpEquation(tuple(terms))
    except EquationError as exc:
        raise ParseError(str(exc), len(text)) from None


def evaluate(eq: ExpEquation, asg: Mapping[str, int]) -> int:
    """Exact value of the signed sum; zero iff ``asg`` is a solution."""
    missing = [v for v in eq.variables if v not in asg]
    if missing:
        raise EquationError(f"no value assigned to {', '.join(missing)}")
    for v in eq.variables:
        if asg[v] < 1:
            raise EquationError(f"exponent {v}={asg[v]} must be positive")
    return sum(t.value(asg) for t in eq.terms)


def _domains(eq: ExpEquation, bounds: Mapping[str, int], constraints: ConstraintSet) -> dict[str, list[int]]:
    doms = {}
    for v in eq.variables:
        if v not in bounds:
            raise EquationError(f"no bound given for {v}")
        if bounds[v] < 1:
            raise EquationError(f"empty bound box: {v} <= {bounds[v]}")
        doms[v] = [t for t in range(1, bounds[v] + 1) if constraints.admits(v, t)]
    return doms


def _pivot(eq: ExpEquation) -> str | None:
    """A variable occurring in exactly one term, preferring the last one."""
    for v in reversed(eq.variables):
        if sum(1 for t in eq.terms if v in t.variables()) == 1:
            return v
    return None


def _search(eq: ExpEquation, doms: dict[str, list[int]], first_values: list[int] | None) -> list[tuple[int, ...]]:
    variables = eq.variables
    pivot = _pivot(eq)
    outer = [v for v in variables if v != pivot]
    outer_doms = [doms[v] for v in outer]
    if first_values is not None and outer:
        outer_doms[0] = first_values
    found = []
    if pivot is None:
        for combo in product(*outer_doms):
            asg = dict(zip(outer, combo))
            if sum(t.value(asg) for t in eq.terms) == 0:
                found.append(tuple(asg[v] for v in variables))
        return found

    pterm = next(t for t in eq.terms if pivot in t.variables())
    others = [t for t in eq.terms if t is not pterm]
    pbase = math.prod(b for b, v in pterm.factors if v == pivot)
    rest_factors = [(b, v) for b, v in pterm.factors if v != pivot]
    table = {pbase**t: t for t in doms[pivot]}
    for combo in product(*outer_doms):
        asg = dict(zip(outer, combo))
        rest = sum(t.value(asg) for t in others)
        scale = pterm.coefficient
        for b, v in rest_factors:
            scale *= b ** asg[v]
        q, r = divmod(-rest, scale)
        if r == 0 and q in table:
            asg[pivot] = table[q]
            found.append(tuple(asg[v] for v in variables))
    return found


def brute_force_solutions(
    eq: ExpEquation,
    bounds: Mapping[str, int] | int,
    constraints: ConstraintSet | None = None,
    workers: int = 1,
) -> list[Assignment]:
    """All solutions with ``1 <= v <= bounds[v]`` satisfying ``constraints``.

    The search fixes every variable but one that occurs in a single term and
    solves for that last exponent exactly, so the cost is the size of the box
    without its pivot axis.  Results are sorted lexicographically in variable
    order; ``workers > 1`` splits the first axis across processes.
    """
    constraints = constraints or ConstraintSet()
    if isinstance(bounds, int):
        bounds = {v: bounds for v in eq.variables}
    doms = _domains(eq, bounds, constraints)
    pivot = _pivot(eq)
    outer = [v for v in eq.variables if v != pivot]
    if workers > 1 and outer and len(doms[outer[0]]) > 1:
        chunks = [doms[outer[0]][i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_search, [eq] * workers, [doms] * workers, chunks)
            found = [s for part in parts for s in part]
    else:
        found = _search(eq, doms, None)
    found = sorted(set(found))
    out = [dict(zip(eq.variables, s)) for s in found]
    return [a for a in out if constraints.admits_assignment(a)]


@dataclass(frozen=True)
class FamilyInstance:
    """Member ``(N-1)^x + N^y + (N+1)^z = (N+2)^w`` of the family with ``N = 4^e``."""

    e: int
    N: int
    a: int
    b: int
    c: int
    d: int
    mu_x: float
    mu_y: float
    mu_z: float

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in ("e", "N", "a", "b", "c", "d", "mu_x", "mu_y", "mu_z")}


FAMILY_VARIABLES = ("x", "y", "z", "w")


def consecutive_equation(N: int) -> ExpEquation:
    """``(N-1)^x + N^y + (N+1)^z = (N+2)^w`` for any ``N >= 2`` (``1^x`` becomes a constant)."""
    if N < 2:
        raise EquationError("N must be at least 2")
    first = Term(1, ((N - 1, "x"),)) if N > 2 else Term(1)
    return ExpEquation(
        (first, Term(1, ((N, "y"),)), Term(1, ((N + 1, "z"),)), Term(-1, ((N + 2, "w"),)))
    )


def family_equation(e: int) -> tuple[FamilyInstance, ExpEquation]:
    if e < 1:
        raise EquationError("e must be a positive integer")
    N = 4**e
    ld = math.log(N + 2)
    inst = FamilyInstance(
        e=e, N=N, a=N - 1, b=N, c=N + 1, d=N + 2,
        mu_x=ld / math.log(N - 1), mu_y=ld / math.log(N), mu_z=ld / math.log(N + 1),
    )
    return inst, consecutive_equation(N)

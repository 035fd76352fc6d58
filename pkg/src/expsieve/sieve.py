"""Modular sieve over exponent residue classes.

For a modulus ``M`` every power ``base^t mod M`` is eventually periodic.  Each
exponent variable therefore ranges over finitely many *choices*: explicit
small values ``t <= T`` (the preperiod, or a constraint's lower bound) and
residue classes ``r mod m`` standing for all ``t > T`` with ``t = r (mod m)``.
The sieve keeps the choice combinations whose residues cancel modulo ``M``.

Survivors are stored as *cells*: one atom per variable, either an ``int``
class residue or an :class:`Exact` value.  Cells from different moduli are
combined with :func:`intersect`, which lifts classes to the lcm of the two
class moduli.
"""

from __future__ import annotations

import os
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import product
from math import gcd, lcm, prod
from typing import Iterable, Sequence

from sympy import factorint

from .constraints import ConstraintSet
from .equation import ExpEquation

DEFAULT_BUDGET = 10**9
# upper bounds up to this size make a variable fully explicit; larger ones are ignored (sound)
EXPLICIT_UPPER_LIMIT = 4096


class SieveError(ValueError):
    pass


class PeriodTooLong(SieveError):
    pass


class BudgetExceeded(SieveError):
    def __init__(self, needed: int, budget: int, modulus: int):
        super().__init__(f"enumeration modulo {modulus} needs more than {budget} steps (at least {needed})")
        self.needed = needed
        self.budget = budget
        self.modulus = modulus


def default_budget() -> int:
    env = os.environ.get("EXPSIEVE_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


# -- eventually periodic power residues ------------------------------------------------


@dataclass(frozen=True)
class EventuallyPeriodicSequence:
    base: int
    modulus: int
    preperiod: tuple[int, ...]
    cycle: tuple[int, ...]

    @property
    def lam(self) -> int:
        return len(self.preperiod)

    @property
    def period(self) -> int:
        return len(self.cycle)

    def __getitem__(self, t: int) -> int:
        """``base^t mod modulus`` for ``t >= 1``."""
        if t < 1:
            raise IndexError("exponents start at 1")
        if t <= self.lam:
            return self.preperiod[t - 1]
        return self.cycle[(t - self.lam - 1) % self.period]


def residue_sequence(base: int, M: int, limit: int = 10**7) -> EventuallyPeriodicSequence:
    """Minimal preperiod/cycle decomposition of ``base^t mod M``, ``t = 1, 2, ...``."""
    if base <= 1:
        raise SieveError("base must be greater than 1")
    if M < 2:
        raise SieveError("modulus must be at least 2")
    seen: dict[int, int] = {}
    values: list[int] = []
    v = base % M
    while v not in seen:
        if len(values) >= limit:
            raise PeriodTooLong(f"period of {base} mod {M} exceeds {limit}")
        seen[v] = len(values)
        values.append(v)
        v = v * base % M
    start = seen[v]
    return EventuallyPeriodicSequence(base, M, tuple(values[:start]), tuple(values[start:]))


# -- survivor systems -------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Exact:
    """An explicit exponent value inside a survivor cell."""

    value: int

    def __repr__(self) -> str:
        return f"={self.value}"


Atom = int | Exact
Cell = tuple[Atom, ...]


def _atom_key(a: Atom) -> tuple[int, int]:
    return (1, a.value) if isinstance(a, Exact) else (0, a)


def cell_sort_key(cell: Cell):
    return tuple(_atom_key(a) for a in cell)


@dataclass(frozen=True)
class ResidueClassSystem:
    """Survivor cells over ``variables``.

    A class atom ``r`` for variable ``i`` means ``t > thresholds[i]`` and
    ``t = r (mod moduli[i])``; an :class:`Exact` atom is a single value
    ``t <= thresholds[i]``.
    """

    variables: tuple[str, ...]
    moduli: tuple[int, ...]
    thresholds: tuple[int, ...]
    cells: frozenset[Cell] = field(default_factory=frozenset)

    def __post_init__(self):
        n = len(self.variables)
        if len(self.moduli) != n or len(self.thresholds) != n:
            raise SieveError("moduli and thresholds must match the variable list")
        for cell in self.cells:
            for a, m, T in zip(cell, self.moduli, self.thresholds):
                if isinstance(a, Exact):
                    if not 1 <= a.value <= T:
                        raise SieveError(f"explicit value {a.value} outside 1..{T}")
                elif not 0 <= a < m:
                    raise SieveError(f"class residue {a} outside [0, {m})")

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def classes(self) -> frozenset[Cell]:
        """Cells in which every variable lies in a residue class."""
        return frozenset(c for c in self.cells if not any(isinstance(a, Exact) for a in c))

    @property
    def explicit(self) -> frozenset[Cell]:
        return frozenset(c for c in self.cells if any(isinstance(a, Exact) for a in c))

    def sorted_cells(self) -> list[Cell]:
        return sorted(self.cells, key=cell_sort_key)

    def contains(self, asg: dict[str, int]) -> bool:
        """Whether the exponent tuple ``asg`` falls into some cell."""
        sig = []
        for v, m, T in zip(self.variables, self.moduli, self.thresholds):
            t = asg[v]
            sig.append(Exact(t) if t <= T else t % m)
        return tuple(sig) in self.cells

    def to_json(self) -> dict:
        return {
            "variables": list(self.variables),
            "moduli": list(self.moduli),
            "thresholds": list(self.thresholds),
            "classes": [list(c) for c in sorted(self.classes, key=cell_sort_key)],
            "explicit": [
                [f"={a.value}" if isinstance(a, Exact) else a for a in c]
                for c in sorted(self.explicit, key=cell_sort_key)
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> "ResidueClassSystem":
        def atom(a):
            if isinstance(a, str):
                if not a.startswith("="):
                    raise SieveError(f"bad atom {a!r}")
                return Exact(int(a[1:]))
            return int(a)

        cells = [tuple(atom(a) for a in c) for c in d.get("classes", []) + d.get("explicit", [])]
        return cls(tuple(d["variables"]), tuple(d["moduli"]), tuple(d["thresholds"]), frozenset(cells))


def intersect(r1: ResidueClassSystem, r2: ResidueClassSystem, budget: int | None = None) -> ResidueClassSystem:
    """Cells compatible with both systems, over per-variable lcm class moduli.

    Raises :class:`BudgetExceeded` when the number of candidate pairs exceeds ``budget``.
    """
    if r1.variables != r2.variables:
        raise SieveError(f"variable mismatch: {r1.variables} vs {r2.variables}")
    n = len(r1.variables)
    mods = tuple(lcm(a, b) for a, b in zip(r1.moduli, r2.moduli))
    thr = tuple(max(a, b) for a, b in zip(r1.thresholds, r2.thresholds))
    g = [gcd(a, b) for a, b in zip(r1.moduli, r2.moduli)]
    # r1 + m1 * k with k = (r2 - r1)/g * inv(m1/g) mod m2/g
    inv = [pow(r1.moduli[i] // g[i], -1, r2.moduli[i] // g[i]) if r2.moduli[i] // g[i] > 1 else 0 for i in range(n)]

    def sig(cell: Cell) -> tuple[int, ...]:
        return tuple((a.value if isinstance(a, Exact) else a) % g[i] for i, a in enumerate(cell))

    buckets: dict[tuple[int, ...], list[Cell]] = defaultdict(list)
    for b in r2.cells:
        buckets[sig(b)].append(b)
    budget = default_budget() if budget is None else budget
    pairs = sum(len(buckets.get(sig(a), ())) for a in r1.cells)
    if pairs > budget:
        raise BudgetExceeded(pairs, budget, prod(mods))

    out: set[Cell] = set()
    for a in r1.cells:
        for b in buckets.get(sig(a), ()):
            cell = []
            for i in range(n):
                x, y = a[i], b[i]
                if isinstance(x, Exact):
                    if isinstance(y, Exact):
                        ok = x == y
                    else:
                        ok = x.value > r2.thresholds[i] and x.value % r2.moduli[i] == y
                    atom = x
                elif isinstance(y, Exact):
                    ok = y.value > r1.thresholds[i] and y.value % r1.moduli[i] == x
                    atom = y
                else:
                    m1, m2 = r1.moduli[i], r2.moduli[i]
                    q = m2 // g[i]
                    k = ((y - x) // g[i]) * inv[i] % q if q > 1 else 0
                    ok, atom = True, (x + m1 * k) % mods[i]
                if not ok:
                    break
                cell.append(atom)
            else:
                out.add(tuple(cell))
    return ResidueClassSystem(r1.variables, mods, thr, frozenset(out))


# -- per-variable domains -----------------------------------------------------------------


@dataclass(frozen=True)
class VarDomain:
    var: str
    threshold: int
    modulus: int
    explicit: tuple[int, ...]
    classes: tuple[int, ...]

    def representative(self, r: int) -> int:
        """Smallest exponent above the threshold in class ``r``."""
        lo = self.threshold + 1
        return lo + (r - lo) % self.modulus

    def choices(self) -> list[tuple[Atom, int]]:
        return [(Exact(t), t) for t in self.explicit] + [(r, self.representative(r)) for r in self.classes]

    def __len__(self) -> int:
        return len(self.explicit) + len(self.classes)


def variable_domain(
    eq: ExpEquation, var: str, M: int, constraints: ConstraintSet, min_threshold: int = 0,
    budget: int | None = None,
) -> VarDomain:
    if budget is None:
        seqs = [residue_sequence(b, M) for b in eq.bases_of(var)]
    else:
        # the domain is at least as long as any sequence, so a longer sequence already exceeds the budget
        seqs = []
        for b in eq.bases_of(var):
            try:
                seqs.append(residue_sequence(b, M, limit=budget + 1))
            except PeriodTooLong:
                raise BudgetExceeded(budget + 1, budget, M) from None
    lam = max(s.lam for s in seqs)
    L = lcm(*(s.period for s in seqs))
    fixed = constraints.fixed(var)
    if fixed is not None:
        return VarDomain(var, max(lam, fixed, min_threshold), L, (fixed,), ())
    m = lcm(L, constraints.congruence_modulus(var))
    T = max(lam, constraints.lower(var) - 1, min_threshold)
    upper = constraints.upper(var)
    if upper is not None and upper <= EXPLICIT_UPPER_LIMIT:
        T = max(T, upper)
        classes: tuple[int, ...] = ()
    else:
        classes = tuple(r for r in range(m) if constraints.admits_class(var, r, m))
    explicit = tuple(t for t in range(1, T + 1) if constraints.admits(var, t))
    return VarDomain(var, T, m, explicit, classes)


def estimated_cost(eq: ExpEquation, M: int, constraints: ConstraintSet | None = None) -> int:
    """Product over variables of (explicit values + classes) for modulus ``M``."""
    constraints = constraints or ConstraintSet()
    return prod(len(variable_domain(eq, v, M, constraints)) for v in eq.variables)


# -- enumeration ---------------------------------------------------------------------------


def _components(eq: ExpEquation) -> list[list[str]]:
    """Groups of variables linked by sharing a term."""
    parent = {v: v for v in eq.variables}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for t in eq.terms:
        vs = t.variables()
        for u in vs[1:]:
            parent[find(u)] = find(vs[0])
    groups: dict[str, list[str]] = {}
    for v in eq.variables:
        groups.setdefault(find(v), []).append(v)
    return list(groups.values())


def _split(eq: ExpEquation, sizes: dict[str, int]) -> tuple[list[str], list[str]]:
    """Partition variables into two term-separable halves of similar enumeration size."""
    comps = sorted(_components(eq), key=lambda c: -prod(sizes[v] for v in c))
    left: list[str] = []
    right: list[str] = []
    lsize = rsize = 1
    for comp in comps:
        csize = prod(sizes[v] for v in comp)
        if lsize <= rsize:
            left += comp
            lsize *= csize
        else:
            right += comp
            rsize *= csize
    return left, right


def _partial_sums(eq, M, group, choice_lists, terms, constant):
    """Map ``residue -> [atoms...]`` over all choice combinations of ``group``."""
    table: dict[int, list[tuple[Atom, ...]]] = defaultdict(list)
    idx = {v: i for i, v in enumerate(group)}
    compiled = [
        (t.coefficient % M, [(b, idx[v]) for b, v in t.factors]) for t in terms
    ]
    for combo in product(*(choice_lists[v] for v in group)):
        exps = [c[1] for c in combo]
        s = constant
        for coeff, factors in compiled:
            val = coeff
            for b, i in factors:
                val = val * pow(b, exps[i], M) % M
            s += val
        table[s % M].append(tuple(c[0] for c in combo))
    return table


def enumerate_system(
    eq: ExpEquation,
    M: int,
    constraints: ConstraintSet | None = None,
    budget: int | None = None,
    min_thresholds: dict[str, int] | None = None,
) -> ResidueClassSystem:
    """Survivor cells of ``eq`` modulo ``M`` by direct enumeration (no factoring of ``M``)."""
    if M < 2:
        raise SieveError("modulus must be at least 2")
    constraints = constraints or ConstraintSet()
    budget = default_budget() if budget is None else budget
    min_thresholds = min_thresholds or {}
    doms = {v: variable_domain(eq, v, M, constraints, min_thresholds.get(v, 0), budget) for v in eq.variables}
    choice_lists = {v: d.choices() for v, d in doms.items()}
    sizes = {v: len(d) for v, d in doms.items()}
    variables = eq.variables
    empty = ResidueClassSystem(
        variables, tuple(doms[v].modulus for v in variables), tuple(doms[v].threshold for v in variables)
    )
    if any(s == 0 for s in sizes.values()):
        return empty

    left, right = _split(eq, sizes)
    lsize = prod(sizes[v] for v in left)
    rsize = prod(sizes[v] for v in right)
    if lsize + rsize > budget:
        raise BudgetExceeded(lsize + rsize, budget, M)
    left_set = set(left)
    constant = sum(t.coefficient for t in eq.terms if not t.factors) % M
    lterms = [t for t in eq.terms if t.factors and set(t.variables()) <= left_set]
    rterms = [t for t in eq.terms if t.factors and not set(t.variables()) <= left_set]
    ltab = _partial_sums(eq, M, left, choice_lists, lterms, constant)
    rtab = _partial_sums(eq, M, right, choice_lists, rterms, 0)

    order = [variables.index(v) for v in left + right]
    pos = [order.index(i) for i in range(len(variables))]
    cells = set()
    spent = lsize + rsize
    for s, rparts in rtab.items():
        lparts = ltab.get(-s % M)
        if not lparts:
            continue
        spent += len(lparts) * len(rparts)
        if spent > budget:
            raise BudgetExceeded(spent, budget, M)
        for lp in lparts:
            for rp in rparts:
                joined = lp + rp
                cells.add(tuple(joined[p] for p in pos))
    return ResidueClassSystem(empty.variables, empty.moduli, empty.thresholds, frozenset(cells))


def prime_power_factors(M: int) -> list[int]:
    return [p**k for p, k in sorted(factorint(M).items())]


def sieve_system(
    eq: ExpEquation,
    M: int,
    constraints: ConstraintSet | None = None,
    budget: int | None = None,
) -> ResidueClassSystem:
    """Survivor cells modulo ``M``, computed per prime-power factor and intersected."""
    if M < 2:
        raise SieveError("modulus must be at least 2")
    constraints = constraints or ConstraintSet()
    parts = [enumerate_system(eq, q, constraints, budget) for q in prime_power_factors(M)]
    parts.sort(key=len)
    system = parts[0]
    for part in parts[1:]:
        if not system.cells:
            break
        system = intersect(system, part, budget)
    if not system.cells:
        # thresholds and moduli of an empty result still describe the full modulus
        for part in parts:
            system = ResidueClassSystem(
                system.variables,
                tuple(lcm(a, b) for a, b in zip(system.moduli, part.moduli)),
                tuple(max(a, b) for a, b in zip(system.thresholds, part.thresholds)),
            )
    return system


def size_prune(eq: ExpEquation, system: ResidueClassSystem) -> ResidueClassSystem:
    """Drop cells in which one side is fully fixed and the other side already exceeds it.

    Both sides are sums of positive terms increasing in every exponent, so
    the smallest admissible exponents give a lower bound for a side.
    """
    pos = [t for t in eq.terms if t.coefficient > 0]
    neg = [t for t in eq.terms if t.coefficient < 0]
    idx = {v: i for i, v in enumerate(system.variables)}

    def side_value(terms, asg):
        return sum(abs(t.coefficient) * prod(b**asg[v] for b, v in t.factors) for t in terms)

    def fixed(terms, cell):
        return all(isinstance(cell[idx[v]], Exact) for t in terms for _, v in t.factors)

    keep = set()
    for cell in system.cells:
        low = {}
        for v, a, m, T in zip(system.variables, cell, system.moduli, system.thresholds):
            low[v] = a.value if isinstance(a, Exact) else T + 1 + (a - T - 1) % m
        dead = False
        for side, other in ((neg, pos), (pos, neg)):
            if fixed(side, cell) and side_value(other, low) > side_value(side, low):
                dead = True
                break
        if not dead:
            keep.add(cell)
    if len(keep) == len(system.cells):
        return system
    return ResidueClassSystem(system.variables, system.moduli, system.thresholds, frozenset(keep))


# -- outcomes ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class SieveOutcome:
    """``no_solution``, ``exponent_bound`` or ``survivors`` for a modulus or chain of moduli."""

    kind: str
    moduli: tuple[int, ...]
    system: ResidueClassSystem
    variable: str | None = None
    bound: int | None = None
    history: tuple[ResidueClassSystem, ...] = ()

    @property
    def modulus(self) -> int:
        return lcm(*self.moduli)

    @property
    def is_certificate(self) -> bool:
        return self.kind != "survivors"

    def __str__(self) -> str:
        if self.kind == "no_solution":
            return "no solution"
        if self.kind == "exponent_bound":
            return f"{self.variable} <= {self.bound}"
        return f"{len(self.system.classes)} classes mod {self.system.moduli}, {len(self.system.explicit)} explicit cells"


def classify(system: ResidueClassSystem, moduli: Sequence[int], constraints: ConstraintSet) -> SieveOutcome:
    moduli = tuple(moduli)
    if not system.cells:
        return SieveOutcome("no_solution", moduli, system)
    if not system.classes:
        best = None
        for i, v in enumerate(system.variables):
            if constraints.bounded(v):
                continue
            if all(isinstance(c[i], Exact) for c in system.cells):
                b = max(c[i].value for c in system.cells)
                if best is None or b < best[1]:
                    best = (v, b)
        if best:
            return SieveOutcome("exponent_bound", moduli, system, best[0], best[1])
    return SieveOutcome("survivors", moduli, system)


def sieve(
    eq: ExpEquation,
    M: int,
    constraints: ConstraintSet | None = None,
    budget: int | None = None,
    size_filter: bool = True,
) -> SieveOutcome:
    constraints = constraints or ConstraintSet()
    system = sieve_system(eq, M, constraints, budget)
    if size_filter:
        system = size_prune(eq, system)
    return classify(system, (M,), constraints)


def sieve_chain(
    eq: ExpEquation,
    moduli: Sequence[int],
    constraints: ConstraintSet | None = None,
    budget: int | None = None,
    size_filter: bool = True,
) -> SieveOutcome:
    """Sieve with each modulus in turn, intersecting survivors; stop at the first certificate.

    ``history`` holds the cumulative system after each modulus.  With
    ``size_filter`` cells refuted by :func:`size_prune` are dropped at each step.
    """
    if not moduli:
        raise SieveError("empty modulus list")
    constraints = constraints or ConstraintSet()
    system = None
    history = []
    for k, M in enumerate(moduli, 1):
        step = sieve_system(eq, M, constraints, budget)
        system = step if system is None else intersect(system, step, budget)
        if size_filter:
            system = size_prune(eq, system)
        history.append(system)
        outcome = classify(system, moduli[:k], constraints)
        if outcome.is_certificate:
            break
    return SieveOutcome(outcome.kind, outcome.moduli, outcome.system, outcome.variable, outcome.bound, tuple(history))


def _candidate_moduli(primes: Sequence[int], caps: dict[int, int]) -> list[int]:
    ranges = [[p**k for k in range(caps.get(p, 2 if p == 2 else 1) + 1)] for p in primes]
    return sorted({prod(c) for c in product(*ranges)} - {1})


def auto_modulus_search(
    eq: ExpEquation,
    primes: Sequence[int],
    exponent_caps: dict[int, int] | None = None,
    enumeration_budget: int | None = None,
    constraints: ConstraintSet | None = None,
    max_candidates: int | None = None,
    size_filter: bool = True,
) -> list[tuple[int, SieveOutcome]]:
    """Try products of prime powers, cheapest estimated enumeration first.

    Returns every candidate modulus whose outcome is a certificate.  Caps
    default to 2 for the prime 2 and 1 otherwise.  Factor systems are cached,
    so each candidate costs one intersection per prime power.
    """
    if not primes:
        raise SieveError("empty prime budget")
    constraints = constraints or ConstraintSet()
    budget = default_budget() if enumeration_budget is None else enumeration_budget
    caps = dict(exponent_caps or {})
    ranked = []
    for M in _candidate_moduli(sorted(set(primes)), caps):
        try:
            cost = estimated_cost(eq, M, constraints)
        except SieveError:
            continue
        ranked.append((cost, M))
    ranked.sort()
    if max_candidates is not None:
        ranked = ranked[:max_candidates]

    cache: dict[int, ResidueClassSystem | None] = {}

    def factor_system(q: int) -> ResidueClassSystem | None:
        if q not in cache:
            try:
                cache[q] = enumerate_system(eq, q, constraints, budget)
            except BudgetExceeded:
                cache[q] = None
        return cache[q]

    found = []
    for cost, M in ranked:
        if cost > budget:
            continue
        parts = [factor_system(q) for q in prime_power_factors(M)]
        if any(p is None for p in parts):
            continue
        parts.sort(key=len)
        system = parts[0]
        try:
            for part in parts[1:]:
                system = intersect(system, part, budget)
        except BudgetExceeded:
            continue
        if size_filter:
            system = size_prune(eq, system)
        outcome = classify(system, (M,), constraints)
        if outcome.is_certificate:
            found.append((M, outcome))
    return found


def format_modulus(M: int) -> str:
    """Factored form such as ``2^2*7*13``."""
    return "*".join(f"{p}^{k}" if k > 1 else str(p) for p, k in sorted(factorint(M).items()))


def parse_modulus(text: str) -> int:
    """Accept ``2^2*7*13`` or a plain integer."""
    total = 1
    for part in text.replace(" ", "").split("*"):
        if not part:
            raise SieveError(f"malformed modulus {text!r}")
        base, caret, exp = part.partition("^")
        try:
            total *= int(base) ** (int(exp) if caret else 1)
        except ValueError:
            raise SieveError(f"malformed modulus {text!r}") from None
    if total < 2:
        raise SieveError("modulus must be at least 2")
    return total

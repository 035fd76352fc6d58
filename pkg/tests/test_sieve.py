from math import lcm

import pytest
from hypothesis import assume, given, settings, strategies as st

from expsieve.constraints import ConstraintSet
from expsieve.equation import brute_force_solutions, family_equation, parse_equation
from expsieve.sieve import (
    BudgetExceeded,
    Exact,
    ResidueClassSystem,
    SieveError,
    auto_modulus_search,
    enumerate_system,
    format_modulus,
    intersect,
    parse_modulus,
    prime_power_factors,
    residue_sequence,
    sieve,
    sieve_chain,
    sieve_system,
    size_prune,
)


def cs(*clauses):
    return ConstraintSet.parse(clauses)


# -- residue sequences -----------------------------------------------------------------------


def test_purely_periodic():
    s = residue_sequence(2, 5)
    assert s.lam == 0 and s.cycle == (2, 4, 3, 1)


def test_minimal_preperiod():
    s = residue_sequence(4, 16)
    assert (s.preperiod, s.cycle) == ((4,), (0,))
    s = residue_sequence(6, 8)
    assert (s.preperiod, s.cycle) == ((6, 4), (0,))


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 200), st.integers(2, 3000))
def test_sequence_matches_pow(base, M):
    s = residue_sequence(base, M)
    for t in range(1, s.lam + 2 * s.period + 3):
        assert s[t] == pow(base, t, M)
    if s.lam:
        # minimality: the last preperiod value differs from the value one period later
        assert s[s.lam] != s[s.lam + s.period]


def test_sequence_errors():
    with pytest.raises(SieveError):
        residue_sequence(1, 7)
    with pytest.raises(SieveError):
        residue_sequence(3, 1)
    with pytest.raises(IndexError):
        residue_sequence(3, 7)[0]


# -- basic sieve outcomes --------------------------------------------------------------------


def test_mod3_no_solution():
    eq = parse_equation("7^x+8^y+9^z=10^w")
    assert sieve(eq, 3).kind == "no_solution"


def test_mod4_pins_w(eq3456):
    out = sieve(eq3456, 4, cs("x=2", "y=1"), size_filter=False)
    assert (out.kind, out.variable, out.bound) == ("exponent_bound", "w", 1)


def test_mod16_classes(eq3456):
    out = sieve(eq3456, 16, cs("x>=3", "y>=2"))
    assert out.system.moduli == (4, 1, 4, 1)
    assert out.system.classes == {(1, 0, 3, 0), (3, 0, 1, 0)}


def test_chain_history(eq3456):
    out = sieve_chain(eq3456, [16, 7, 27, 13, 73], cs("x>=3", "y>=2"), size_filter=False)
    assert str(out) == "w <= 3"
    assert [h.moduli for h in out.history] == [
        (4, 1, 4, 1), (12, 3, 12, 2), (12, 9, 36, 2), (12, 18, 36, 12), (12, 18, 72, 36),
    ]


def test_mod2_survivors(eq3456):
    out = sieve(eq3456, 2)
    assert out.kind == "survivors" and not out.is_certificate


def test_ne_constraint(eq3456):
    out = sieve(eq3456, 24, cs("x!=2", "y=1"))
    assert str(out) == "w <= 2"


def test_decomposed_equals_direct(eq3456):
    for M in (12, 16 * 7, 27 * 13, 2**4 * 3**3 * 7):
        for c in (cs(), cs("x>=3", "y>=2"), cs("x odd", "w<=9")):
            assert sieve_system(eq3456, M, c) == enumerate_system(eq3456, M, c)


def test_family_member_decomposed_equals_direct():
    _, eq = family_equation(3)
    M = 2**2 * 13 * 37 * 73
    assert sieve_system(eq, M) == enumerate_system(eq, M)


def test_budget_exceeded(eq3456):
    with pytest.raises(BudgetExceeded):
        enumerate_system(eq3456, 999983, budget=100)


def test_modulus_text():
    assert format_modulus(2**2 * 7 * 13) == "2^2*7*13"
    assert parse_modulus("2^2*7*13") == 364
    assert parse_modulus("364") == 364
    assert prime_power_factors(2**4 * 3**3 * 7) == [16, 27, 7]
    for bad in ("", "2^", "1", "x*3"):
        with pytest.raises(SieveError):
            parse_modulus(bad)


# -- intersection ----------------------------------------------------------------------------


def test_intersection_crt():
    a = ResidueClassSystem(("x",), (4,), (0,), frozenset({(1,), (3,)}))
    b = ResidueClassSystem(("x",), (6,), (0,), frozenset({(1,)}))
    c = intersect(a, b)
    assert c.moduli == (12,) and c.cells == {(1,), (7,)}


def test_intersection_exact_against_class():
    a = ResidueClassSystem(("x",), (4,), (2,), frozenset({(Exact(1),), (1,)}))
    b = ResidueClassSystem(("x",), (2,), (5,), frozenset({(Exact(1),), (Exact(5),), (0,)}))
    c = intersect(a, b)
    # 5 > 2 and 5 ≡ 1 mod 4 keeps Exact(5); the class 1 mod 4 is odd, so it dies against 0 mod 2
    assert c.thresholds == (5,)
    assert c.cells == {(Exact(1),), (Exact(5),)}


def test_intersection_variable_mismatch():
    a = ResidueClassSystem(("x",), (1,), (0,))
    b = ResidueClassSystem(("y",), (1,), (0,))
    with pytest.raises(SieveError):
        intersect(a, b)


def test_system_json_roundtrip(eq3456):
    system = sieve_system(eq3456, 48, cs("x>=2"))
    assert ResidueClassSystem.from_json(system.to_json()) == system


# -- size filter -----------------------------------------------------------------------------


def test_size_filter_removes_trivial_identity():
    _, eq = family_equation(2)
    M = 2**2 * 7 * 13 * 19 * 37 * 73
    assert str(sieve(eq, M, size_filter=False)) == "w <= 1"
    assert str(sieve(eq, M)) == "no solution"


def test_size_filter_keeps_solutions(eq3456):
    system = sieve_system(eq3456, 2**4 * 3**3 * 7 * 13 * 73)
    pruned = size_prune(eq3456, system)
    for sol in brute_force_solutions(eq3456, 12):
        assert pruned.contains(sol)


# -- automatic modulus search ----------------------------------------------------------------


def test_auto_modulus_finds_certificate():
    _, eq = family_equation(2)
    found = auto_modulus_search(eq, [2, 7, 13, 19, 37, 73])
    moduli = [M for M, _ in found]
    assert 2**2 * 7 * 13 * 19 * 37 * 73 in moduli
    assert all(o.kind == "no_solution" for _, o in found)


def test_auto_modulus_empty_primes(eq3456):
    with pytest.raises(SieveError):
        auto_modulus_search(eq3456, [])


# -- soundness properties --------------------------------------------------------------------

BASES = st.integers(2, 30)


@settings(max_examples=120, deadline=None)
@given(
    bases=st.lists(BASES, min_size=3, max_size=4),
    exps=st.lists(st.integers(1, 6), min_size=4, max_size=4),
    M=st.integers(2, 400),
    ordered=st.booleans(),
)
def test_planted_solution_survives(bases, exps, M, ordered):
    names = "abcd"[: len(bases)]
    planted = dict(zip(names, exps))
    total = sum(b ** planted[v] for b, v in zip(bases, names))
    eq = parse_equation("+".join(f"{b}^{v}" for b, v in zip(bases, names)) + f"={total}")
    try:
        out = sieve(eq, M, budget=200_000, size_filter=ordered)
    except BudgetExceeded:
        assume(False)
    assert out.kind != "no_solution"
    assert out.system.contains(planted)
    if out.kind == "exponent_bound":
        assert planted[out.variable] <= out.bound


@settings(max_examples=80, deadline=None)
@given(bases=st.lists(BASES, min_size=4, max_size=4), M=st.integers(2, 300))
def test_no_solution_means_no_small_solution(bases, M):
    eq = parse_equation(f"{bases[0]}^x+{bases[1]}^y+{bases[2]}^z={bases[3]}^w")
    try:
        out = sieve(eq, M, budget=200_000)
    except BudgetExceeded:
        assume(False)
    sols = brute_force_solutions(eq, 8)
    if out.kind == "no_solution":
        assert sols == []
    for s in sols:
        assert out.system.contains(s)


@settings(max_examples=60, deadline=None)
@given(M1=st.integers(2, 60), M2=st.integers(2, 60))
def test_chain_and_lcm_keep_known_solutions(eq3456, M1, M2):
    try:
        chained = sieve_chain(eq3456, [M1, M2], size_filter=False, budget=200_000)
        direct = sieve(eq3456, lcm(M1, M2), size_filter=False, budget=200_000)
    except BudgetExceeded:
        assume(False)
    for sol in ({"x": 3, "y": 1, "z": 1, "w": 2}, {"x": 3, "y": 3, "z": 3, "w": 3}):
        assert chained.system.contains(sol)
        assert direct.system.contains(sol)


def test_intersection_budget():
    a = ResidueClassSystem(("x",), (5,), (0,), frozenset((r,) for r in range(5)))
    b = ResidueClassSystem(("x",), (7,), (0,), frozenset((r,) for r in range(7)))
    assert len(intersect(a, b).cells) == 35
    with pytest.raises(BudgetExceeded):
        intersect(a, b, budget=34)

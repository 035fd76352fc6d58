"""One test per acceptance criterion; each prints a PASS/FAIL line to the real stdout."""

import copy
import math
import random
import sys
import time
from contextlib import contextmanager

import pytest

from expsieve import baker
from expsieve import casework as C
from expsieve import certificates as certs
from expsieve.constraints import ConstraintSet
from expsieve.equation import brute_force_solutions, evaluate, family_equation, parse_equation
from expsieve.sieve import BudgetExceeded, sieve

INT64_MAX = 2**63 - 1


@contextmanager
def criterion(n: int, desc: str):
    try:
        yield
    except BaseException as exc:
        detail = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"[FAIL] criterion {n}: {desc} ({detail})", file=sys.__stdout__, flush=True)
        raise
    print(f"[PASS] criterion {n}: {desc}", file=sys.__stdout__, flush=True)


@pytest.fixture(scope="module")
def emitted():
    """Certificates produced by criteria 1 to 3, collected for criterion 9."""
    return []


@pytest.fixture(scope="module")
def eq3456():
    return parse_equation("3^x+4^y+5^z=6^w")


def test_criterion_1_table1(emitted, eq3456):
    with criterion(1, "Table 1 outputs reproduced with the reference moduli"):
        for e in range(1, 9):
            _, eq = family_equation(e)
            t = time.perf_counter()
            out, cert = certs.certify_sieve(eq, [C.TABLE1_MODULI[e]])
            elapsed = time.perf_counter() - t
            emitted.append(cert)
            assert str(out) == C.TABLE1_OUTPUT[e], f"e={e}: {out}"
            assert elapsed < 120, f"e={e} took {elapsed:.1f}s"
        # the e = 1 equation is the small-base equation; its case chain also gives w <= 3
        out, cert = certs.certify_sieve(
            eq3456, C.TABLE2_ROWS[3][2], ConstraintSet.parse(C.TABLE2_ROWS[3][1]), size_filter=False
        )
        emitted.append(cert)
        assert str(out) == "w <= 3"


def test_criterion_2_table2(emitted, eq3456):
    with criterion(2, "Table 2 rows give w <= 1, 2, 2, 3"):
        rows = C.replay_table2(eq3456)
        expected = [1, 2, 2, 3]
        for row, bound in zip(rows, expected):
            emitted.append(certs.sieve_certificate(eq3456, row.outcome, ConstraintSet.parse(row.clauses), False))
            assert row.outcome.kind == "exponent_bound" and row.outcome.variable == "w", row.label
            if row.label == "x=1, y>=2":
                assert row.outcome.bound <= bound
            else:
                assert row.outcome.bound == bound, f"{row.label}: {row.outcome}"


def test_criterion_3_restriction_sizes(emitted, eq3456):
    with criterion(3, "restriction set sizes 11, 18, 15 and an empty final set"):
        rep = C.x3_restriction_replay(eq3456)
        emitted.append(certs.sieve_certificate(eq3456, rep["chain"], ConstraintSet.parse(["x>=3", "y>=2"]), False))
        assert rep["chain_moduli"][1:4] == [(12, 3, 12, 2), (12, 9, 36, 2), (12, 18, 36, 12)]
        assert rep["class_counts"][1:] == [11, 18, 15, 0], f"class counts {rep['class_counts'][1:]}"


def test_criterion_4_solutions(eq3456):
    with criterion(4, "solution set of the small-base equation and of the full argument"):
        sols = brute_force_solutions(eq3456, 20)
        assert {tuple(s.values()) for s in sols} == {(3, 1, 1, 2), (3, 3, 3, 3)}
        t = time.perf_counter()
        assert C.full_theorem_pipeline() == {(3, 3, 1, 1, 2), (3, 3, 3, 3, 3)}
        assert time.perf_counter() - t < 900


def test_criterion_5_baker_thresholds():
    with criterion(5, "linear-form thresholds give e <= 8"):
        for e in range(9, 65):
            assert not baker.resolve_padic_y_case(e).compatible, f"2-adic e={e}"
            assert not baker.resolve_padic_x_case(e).compatible, f"3-adic e={e}"
        assert baker.resolve_padic_y_case(8).compatible
        assert baker.resolve_padic_x_case(8).compatible
        assert all(baker.solve_s_threshold(e) <= 5042 for e in range(1, 9))
        assert baker.resolve_rational_case() == 8


def test_criterion_6_proof_loops():
    with criterion(6, "proof-loop replays"):
        assert all(e <= 4 and w <= 12 for e, w in C.lemma_wge4e_growth_loop())
        assert C.lemma_mod4e2_exception_loop() == {(1, 3)}
        assert C.exceptional_solution_search() == {(1, 3, 3, 3, 3)}
        assert C.special_case_solutions() == {(1, 3, 1, 1, 2), (1, 3, 3, 3, 3)}


def _planted_equation(rng: random.Random):
    """Random equation with k <= 5 exponential terms, a balancing constant and a known solution."""
    while True:
        k = rng.randint(2, 5)
        names = "abcde"[:k]
        bases = [rng.randint(2, 50) for _ in range(k)]
        exps = {v: rng.randint(1, 12) for v in names}
        signs = [1] + [rng.choice((1, -1)) for _ in range(k - 1)]
        coeffs = [s * rng.randint(1, 3) for s in signs]
        total = sum(c * b ** exps[v] for c, b, v in zip(coeffs, bases, names))
        if total == 0 or abs(total) > INT64_MAX:
            continue
        lhs = "+".join(f"{c}*{b}^{v}" for c, b, v in zip(coeffs, bases, names))
        eq = parse_equation(f"{lhs}={total}")
        assert evaluate(eq, exps) == 0
        return eq, exps, lhs, total


def _random_modulus(rng: random.Random) -> int:
    return max(2, int(math.exp(rng.uniform(math.log(2), math.log(10**5)))))


def _sieve_resampled(eq, rng, budget=200_000, tries=60):
    for _ in range(tries):
        M = _random_modulus(rng)
        try:
            return M, sieve(eq, M, budget=budget)
        except BudgetExceeded:
            continue
    M = rng.randint(2, 30)
    return M, sieve(eq, M, budget=10**7)


def test_criterion_7_soundness():
    with criterion(7, "sieve soundness on 200 planted equations"):
        rng = random.Random(20240521)
        for i in range(200):
            eq, planted, lhs, total = _planted_equation(rng)
            M, out = _sieve_resampled(eq, rng)
            assert out.kind != "no_solution", f"#{i} mod {M}"
            assert out.system.contains(planted), f"#{i} mod {M}: planted {planted} missing"
            if out.kind == "exponent_bound":
                assert planted[out.variable] <= out.bound
            # an unplanted neighbour: every no-solution verdict must agree with the 12-box search
            shifted = parse_equation(f"{lhs}={total + 1}")
            M2, out2 = _sieve_resampled(shifted, rng)
            if out2.kind == "no_solution":
                assert not brute_force_solutions(shifted, 12), f"#{i} mod {M2}: solutions missed"


def test_criterion_8_valuation_chain():
    with criterion(8, "valuation inequalities at the known solutions"):
        for x, y, z, w in ((3, 1, 1, 2), (3, 3, 3, 3)):
            v2 = baker.padic_valuation(5**z - (-3) ** x, 2)
            v3 = baker.padic_valuation((-5) ** z - (-2) ** (2 * y), 3)
            assert min(y, w) <= v2
            assert min(x, w) <= v3
            assert baker.padic_bound(baker.case_y_params(1, z, x)).bound_value >= v2
            assert baker.padic_bound(baker.case_x_params(1, z, 2 * y)).bound_value >= v3
        assert baker.padic_valuation(5**3 - (-3) ** 3, 2) == 3


def test_criterion_9_certificates(emitted):
    with criterion(9, "emitted certificates verify and mutated ones do not"):
        assert len(emitted) >= 13
        for cert in emitted:
            res = certs.verify_certificate(cert)
            assert res.valid, res.reason
        for cert in emitted:
            bad = copy.deepcopy(cert)
            if bad["survivors"]["classes"]:
                bad["survivors"]["classes"].pop()
            else:
                bad["outcome"]["kind"] = "survivors"
            assert not certs.verify_certificate(bad).valid

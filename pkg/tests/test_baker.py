import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from expsieve import baker as B
from expsieve import rigorous as R
from expsieve.rigorous import hi, ilog, lo


# -- heights and valuations ------------------------------------------------------------------


@pytest.mark.parametrize("q, expected", [(5, 5), (-3, 3), (Fraction(3, 2), 3), (Fraction(-1, 7), 7), (1, 1)])
def test_log_height(q, expected):
    assert B.log_height(q) == pytest.approx(math.log(expected))


@pytest.mark.parametrize(
    "q, p, v",
    [(48, 2, 4), ((-5) ** 3 - (-2) ** 6, 3, 3), (5 - 1, 2, 2), (Fraction(5, 12), 2, -2), (7, 5, 0)],
)
def test_padic_valuation(q, p, v):
    assert B.padic_valuation(q, p) == v


def test_zero_and_composite_rejected():
    with pytest.raises(B.BakerParamError):
        B.log_height(0)
    with pytest.raises(B.BakerParamError):
        B.padic_valuation(0, 2)
    with pytest.raises(B.BakerParamError):
        B.padic_valuation(12, 4)


def test_independence():
    assert B.multiplicatively_independent(17, -15)
    assert not B.multiplicatively_independent(4, 8)
    assert not B.multiplicatively_independent(Fraction(2, 3), Fraction(9, 4))
    assert not B.multiplicatively_independent(-1, 5)


def _factor_rank_oracle(a: Fraction, b: Fraction) -> bool:
    from sympy import factorint

    def vec(q):
        v = dict(factorint(abs(q.numerator)))
        for p, k in factorint(q.denominator).items():
            v[p] = v.get(p, 0) - k
        return v

    va, vb = vec(a), vec(b)
    primes = set(va) | set(vb)
    if not any(va.values()) or not any(vb.values()):
        return False
    return any(va.get(p, 0) * vb.get(q, 0) != va.get(q, 0) * vb.get(p, 0) for p in primes for q in primes)


@settings(max_examples=300, deadline=None)
@given(
    st.integers(-2000, 2000).filter(bool), st.integers(1, 2000),
    st.integers(-2000, 2000).filter(bool), st.integers(1, 2000), st.integers(1, 4),
)
def test_independence_matches_factoring(n1, d1, n2, d2, k):
    a, b = Fraction(n1, d1), Fraction(n2, d2) ** k
    assert B.multiplicatively_independent(a, b) == _factor_rank_oracle(a, b)
    assert not B.multiplicatively_independent(a, a**k)


def test_logreal_exact_comparison():
    # 4*log 2 == log 16 exactly; the interval test alone could not decide equality
    assert B.real_geq(B.LogReal(16), B.LogReal(2, 4))
    assert B.real_geq(B.LogReal(2, 4), B.LogReal(16))
    assert not B.real_geq(B.LogReal(15), B.LogReal(2, 4))
    assert B.parse_real("3*log(2)") == B.LogReal(2, 3)
    assert str(B.LogReal(17)) == "log(17)"


# -- parameter invariants --------------------------------------------------------------------


def test_family_params_valid():
    for e in range(1, 12):
        B.case_y_params(e)
        B.case_x_params(e)


def test_case_y_e2_fields():
    p = B.case_y_params(2)
    assert (p.p, p.alpha1, p.alpha2, p.g, p.E) == (2, 17, -15, 1, 4)
    assert p.H1 == B.LogReal(17) and p.H2 == B.LogReal(2, 4)


@pytest.mark.parametrize(
    "change",
    [
        {"E": 2},  # not above 1 + 1/(p-1) = 2
        {"E": 5},  # nu_2(17 - 1) = 4 < 5
        {"alpha1": 16},  # not a 2-adic unit
        {"H1": B.LogReal(16)},  # below h(17)
        {"alpha2": 17},  # dependent on alpha1
        {"alpha2": -13, "H2": B.LogReal(13)},  # nu_2(alpha2 - 1) = 1 with p = 2
        {"g": 0},
    ],
)
def test_padic_invariant_violations(change):
    with pytest.raises(B.BakerParamError):
        B.case_y_params(2).replace(**change)


def test_rational_invariant_violations():
    good = B.rational_case_params(1)
    with pytest.raises(B.BakerParamError):
        good.replace(alpha1=Fraction(1, 2))
    with pytest.raises(B.BakerParamError):
        good.replace(H1=Fraction(1))  # below log 5
    with pytest.raises(B.BakerParamError):
        good.replace(alpha2=25, H2=B.LogReal(25))


def test_params_json_roundtrip():
    p = B.case_x_params(3, 5, 7)
    assert B.BakerPadicParams.from_json(p.to_json()) == p
    r = B.rational_case_params(2, 3, 4)
    assert B.BakerRationalParams.from_json(r.to_json()) == r


# -- bound values ----------------------------------------------------------------------------


def test_padic_e2_matches_formula():
    rep = B.padic_bound(B.case_y_params(2))
    with R.precision(200):
        expected = B.padic_case_formula_constant(2, "padic-y") * (6 * 4 * ilog(2)) ** 2
    assert rep.regime == "constant"
    assert float(lo(expected)) <= rep.bound_value <= float(hi(expected)) * (1 + 1e-15)


def test_padic_x_e9_constant_branch():
    rep = B.padic_bound(B.case_x_params(9))
    with R.precision(200):
        expected = B.padic_case_formula_constant(9, "padic-x") * (12 * ilog(3)) ** 2
    assert rep.regime == "constant"
    assert rep.bound_value == pytest.approx(float(expected.mid), rel=1e-14)
    assert rep.bound_value >= float(lo(expected))


def test_doubling_g_doubles():
    # g=2, E=4 is admissible for 17 and -15 at p=2
    base = B.case_y_params(2)
    doubled = base.replace(g=2)
    assert B.padic_bound(doubled).bound_value == pytest.approx(2 * B.padic_bound(base).bound_value, rel=1e-14)


def test_rational_e1_constant_branch():
    rep = B.rational_bound(B.rational_case_params(1, 1, 2))
    assert rep.regime == "constant"
    assert rep.bound_value == pytest.approx(25.2 * math.log(5) * math.log(6) * 100, rel=1e-13)


def test_rational_large_b_log_branch():
    rep = B.rational_bound(B.rational_case_params(1, 10**6, 2 * 10**6))
    assert rep.regime == "log"


def test_report_json_roundtrip():
    rep = B.padic_bound(B.case_y_params(3))
    assert B.BoundReport.from_json(rep.to_json()) == rep


@settings(max_examples=40, deadline=None)
@given(
    e=st.integers(2, 10),
    b1=st.integers(1, 10**8),
    b2=st.integers(1, 10**8),
    db=st.integers(0, 10**8),
    g_mult=st.integers(1, 4),
)
def test_padic_monotone(e, b1, b2, db, g_mult):
    base = B.case_y_params(e, b1, b2)
    ref = B.padic_bound(base).bound_value
    for bigger in (
        base.replace(b1=b1 + db),
        base.replace(b2=b2 + db),
        base.replace(g=g_mult),
        base.replace(H1=B.LogReal(4**e + 1, 1 + Fraction(db, 10**8))),
        base.replace(H2=B.LogReal(2, 2 * e + Fraction(db, 10**7))),
    ):
        assert B.padic_bound(bigger).bound_value >= ref


@settings(max_examples=40, deadline=None)
@given(e=st.integers(1, 10), b1=st.integers(1, 10**9), b2=st.integers(1, 10**9), db=st.integers(0, 10**9))
def test_rational_monotone(e, b1, b2, db):
    base = B.rational_case_params(e, b1, b2)
    ref = B.rational_bound(base).bound_value
    for bigger in (
        base.replace(b1=b1 + db),
        base.replace(b2=b2 + db),
        base.replace(H1=B.LogReal(4**e + 1, 1 + Fraction(db, 10**9))),
        base.replace(H2=B.LogReal(4**e + 2, 2)),
    ):
        assert B.rational_bound(bigger).bound_value >= ref


@settings(max_examples=25, deadline=None)
@given(e=st.integers(1, 20), b1=st.integers(1, 10**12), b2=st.integers(1, 10**12), extra=st.integers(1, 300))
def test_higher_precision_never_exceeds(e, b1, b2, extra):
    for params, fn in ((B.case_y_params(e, b1, b2), B.padic_bound), (B.rational_case_params(e, b1, b2), B.rational_bound)):
        assert fn(params, 113 + extra).bound_value <= fn(params, 113).bound_value


def test_precision_floor():
    with pytest.raises(ValueError):
        B.padic_bound(B.case_y_params(2), 64)


# -- valuation chain at the known solutions --------------------------------------------------


def test_two_adic_chain_at_3333():
    # (x,y,z,w) = (3,3,3,3) at e=1: c^z - (-a)^x
    assert B.padic_valuation(5**3 - (-3) ** 3, 2) == 3
    assert B.padic_bound(B.case_y_params(1, 3, 3)).bound_value >= 3


def test_three_adic_chain_at_known_solutions():
    for x, y, z, w in ((3, 1, 1, 2), (3, 3, 3, 3)):
        assert min(x, w) <= B.padic_valuation((-4 - 1) ** z - (-2) ** (2 * y), 3)


# -- case resolutions ------------------------------------------------------------------------


def test_padic_y_threshold():
    assert B.resolve_padic_y_case(8).compatible
    assert not B.resolve_padic_y_case(9).compatible
    assert not B.resolve_padic_y_case(100).compatible


def test_padic_x_threshold():
    assert B.resolve_padic_x_case(8).compatible
    assert not B.resolve_padic_x_case(9).compatible


def test_resolutions_reject_e1():
    with pytest.raises(B.BakerParamError):
        B.resolve_padic_y_case(1)
    with pytest.raises(B.BakerParamError):
        B.resolve_padic_x_case(1)


def test_nominal_prefactor_checks():
    assert all(B.nominal_prefactor_x(e) < 5 for e in range(9, 21))
    assert all(B.nominal_prefactor_y(e) < 3 for e in range(4, 21))


def test_kappa_dominates_nominal_x():
    # the rigorous 3-adic coefficient exceeds the nominal 5, so K falls back to hi(kappa)
    res = B.resolve_padic_x_case(9)
    assert res.K > 5 and not res.compatible


def test_case_prefactor_matches_closed_form():
    for e in (2, 5, 9, 30):
        for case, params in (("padic-y", B.case_y_params(e)), ("padic-x", B.case_x_params(e))):
            a, b = B.padic_prefactor(params), B.padic_case_formula_constant(e, case)
            assert abs(float(a.mid) - float(b.mid)) <= 1e-12 * float(b.mid)


def test_s_threshold_values():
    values = [B.solve_s_threshold(e) for e in range(1, 9)]
    assert all(S <= 5042 for S in values)
    assert values == sorted(values, reverse=True)


def test_s_threshold_report():
    rep = B.s_threshold_report(1)
    assert rep.kind == "s-threshold" and rep.bound_value == B.solve_s_threshold(1)


def test_rational_case():
    assert B.resolve_rational_case() == 8
    assert B.rational_case_compatible(1)[0]
    assert not B.rational_case_compatible(9)[0]


def test_tails():
    assert B.strictly_diverging([1.5, 2.0, 3.0])
    assert not B.strictly_diverging([0.9, 2.0])
    assert not B.strictly_diverging([2.0, 2.0])
    for kind in ("padic-y", "padic-x", "rational"):
        assert B.tail_check(kind)

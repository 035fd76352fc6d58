"""Explicit lower bounds for linear forms in two logarithms, and the inequality
chains that turn them into a bound on the family index ``e``.

Real inputs such as ``H1 = 2e*log 2`` are kept symbolic as :class:`LogReal`
so that height conditions with equality hold exactly; everything else is
evaluated in outward-rounded interval arithmetic.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, lcm

import mpmath
from mpmath import iv
from sympy import isprime

from . import rigorous as R
from .rigorous import DEFAULT_PRECISION, certainly_geq, certainly_less, hi, ilog, imax, lo, up


EXACT_BITS = 1 << 20


class BakerParamError(ValueError):
    pass


# --- exact reals of the form c*log(b) ---------------------------------------


@dataclass(frozen=True)
class LogReal:
    """``coeff * log(base)`` with rational ``coeff >= 0`` and rational ``base >= 1``."""

    base: Fraction
    coeff: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "base", Fraction(self.base))
        object.__setattr__(self, "coeff", Fraction(self.coeff))
        if self.base < 1 or self.coeff < 0:
            raise BakerParamError(f"LogReal needs base >= 1 and coeff >= 0, got {self}")

    def interval(self):
        return R.ival(self.coeff) * ilog(self.base)

    def __str__(self) -> str:
        c = "" if self.coeff == 1 else f"{self.coeff}*"
        return f"{c}log({self.base})"


Real = Fraction | LogReal

_LOGREAL = re.compile(r"^\s*(?:(?P<c>[0-9./]+)\s*\*\s*)?log\(\s*(?P<b>[0-9./]+)\s*\)\s*$")


def parse_real(value) -> Real:
    """Accept ints, Fractions, decimal strings and ``"c*log(b)"`` strings."""
    if isinstance(value, (LogReal, Fraction)):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    m = _LOGREAL.match(str(value))
    if m:
        return LogReal(Fraction(m["b"]), Fraction(m["c"] or 1))
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError) as exc:
        raise BakerParamError(f"cannot read real value {value!r}") from exc


def real_interval(x: Real):
    return x.interval() if isinstance(x, LogReal) else R.ival(x)


def real_geq(a: Real, b: Real) -> bool:
    """Decide ``a >= b``; exact for two LogReals, strict-interval otherwise."""
    if isinstance(a, LogReal) and isinstance(b, LogReal):
        if b.coeff == 0 or b.base == 1:
            return True
        if a.coeff == 0 or a.base == 1:
            return False
        ia, ib = a.interval(), b.interval()
        if certainly_geq(ia, ib):
            return True
        if certainly_less(ia, ib):
            return False
        d = lcm(a.coeff.denominator, b.coeff.denominator)
        ea = a.coeff.numerator * (d // a.coeff.denominator)
        eb = b.coeff.numerator * (d // b.coeff.denominator)
        if max(ea * a.base.numerator.bit_length(), eb * b.base.numerator.bit_length()) > EXACT_BITS:
            raise BakerParamError(f"cannot decide {a} >= {b} within {EXACT_BITS} bits")
        return a.base**ea >= b.base**eb
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a >= b
    return certainly_geq(real_interval(a), real_interval(b))


# --- heights, valuations, independence ---------------------------------------


def _rational(q) -> Fraction:
    q = Fraction(q)
    if q == 0:
        raise BakerParamError("zero has no height or valuation")
    return q


def height_of(q) -> LogReal:
    q = _rational(q)
    return LogReal(Fraction(max(abs(q.numerator), q.denominator)))


def log_height(q) -> float:
    """Absolute logarithmic height of a nonzero rational: log max(|num|, den)."""
    return math.log(max(abs(_rational(q).numerator), _rational(q).denominator))


def padic_valuation(q, p: int) -> int:
    q = _rational(q)
    if not isprime(p):
        raise BakerParamError(f"{p} is not prime")
    v = 0
    n, d = abs(q.numerator), q.denominator
    while n % p == 0:
        n //= p
        v += 1
    while d % p == 0:
        d //= p
        v -= 1
    return v


def _coprime_basis(values: list[int]) -> list[int]:
    """Pairwise coprime integers > 1 such that every input is a product of their powers."""
    basis = sorted({v for v in values if v > 1})
    while True:
        for i in range(len(basis)):
            for j in range(i + 1, len(basis)):
                g = gcd(basis[i], basis[j])
                if g > 1:
                    rest = [b for k, b in enumerate(basis) if k not in (i, j)]
                    basis = sorted({v for v in rest + [basis[i] // g, basis[j] // g, g] if v > 1})
                    break
            else:
                continue
            break
        else:
            return basis


def _exponents(n: int, basis: list[int]) -> list[int]:
    out = []
    for b in basis:
        k = 0
        while n % b == 0:
            n //= b
            k += 1
        out.append(k)
    return out


def multiplicatively_independent(a, b) -> bool:
    """Whether ``a^m * b^n = 1`` forces ``m = n = 0``.

    Works over a coprime basis from gcd refinement, so nothing is factored.
    """
    a, b = _rational(a), _rational(b)
    basis = _coprime_basis([abs(a.numerator), a.denominator, abs(b.numerator), b.denominator])
    va = [x - y for x, y in zip(_exponents(abs(a.numerator), basis), _exponents(a.denominator, basis))]
    vb = [x - y for x, y in zip(_exponents(abs(b.numerator), basis), _exponents(b.denominator, basis))]
    if not any(va) or not any(vb):
        return False
    return any(va[i] * vb[j] != va[j] * vb[i] for i in range(len(basis)) for j in range(len(basis)))


# --- parameter sets ----------------------------------------------------------


def _positive_int(name: str, v) -> int:
    if not isinstance(v, int) or v < 1:
        raise BakerParamError(f"{name} must be a positive integer, got {v!r}")
    return v


@dataclass(frozen=True)
class BakerPadicParams:
    p: int
    alpha1: Fraction
    alpha2: Fraction
    g: int
    E: Fraction
    H1: Real
    H2: Real
    b1: int = 1
    b2: int = 1

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "E"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        for name in ("H1", "H2"):
            object.__setattr__(self, name, parse_real(getattr(self, name)))
        for name in ("g", "b1", "b2"):
            _positive_int(name, getattr(self, name))
        p = self.p
        if not isprime(p):
            raise BakerParamError(f"p = {p} is not prime")
        if self.E <= 1 + Fraction(1, p - 1):
            raise BakerParamError(f"E = {self.E} must exceed 1 + 1/(p-1)")
        elog = LogReal(Fraction(p), self.E)
        for j, (a, H) in enumerate(((self.alpha1, self.H1), (self.alpha2, self.H2)), 1):
            if padic_valuation(a, p) != 0:
                raise BakerParamError(f"alpha{j} = {a} is not a {p}-adic unit")
            if padic_valuation(a**self.g - 1, p) < self.E:
                raise BakerParamError(f"nu_{p}(alpha{j}^g - 1) < E")
            if not (real_geq(H, height_of(a)) and real_geq(H, elog)):
                raise BakerParamError(f"H{j} = {H} is below max(h(alpha{j}), E log p)")
        if p == 2 and padic_valuation(self.alpha2 - 1, 2) < 2:
            raise BakerParamError("p = 2 requires nu_2(alpha2 - 1) >= 2")
        if not multiplicatively_independent(self.alpha1, self.alpha2):
            raise BakerParamError("alpha1 and alpha2 are multiplicatively dependent")

    def replace(self, **changes) -> "BakerPadicParams":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(changes)
        return BakerPadicParams(**d)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "alpha1": str(self.alpha1),
            "alpha2": str(self.alpha2),
            "g": self.g,
            "E": str(self.E),
            "H1": str(self.H1),
            "H2": str(self.H2),
            "b1": self.b1,
            "b2": self.b2,
        }

    @classmethod
    def from_json(cls, d: dict) -> "BakerPadicParams":
        return cls(
            int(d["p"]),
            Fraction(d["alpha1"]),
            Fraction(d["alpha2"]),
            int(d["g"]),
            Fraction(d["E"]),
            parse_real(d["H1"]),
            parse_real(d["H2"]),
            int(d["b1"]),
            int(d["b2"]),
        )


@dataclass(frozen=True)
class BakerRationalParams:
    alpha1: Fraction
    alpha2: Fraction
    H1: Real
    H2: Real
    b1: int = 1
    b2: int = 1

    def __post_init__(self):
        for name in ("alpha1", "alpha2"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        for name in ("H1", "H2"):
            object.__setattr__(self, name, parse_real(getattr(self, name)))
        for name in ("b1", "b2"):
            _positive_int(name, getattr(self, name))
        for j, (a, H) in enumerate(((self.alpha1, self.H1), (self.alpha2, self.H2)), 1):
            if a <= 1:
                raise BakerParamError(f"alpha{j} = {a} must exceed 1")
            if not (real_geq(H, height_of(a)) and real_geq(H, LogReal(a)) and real_geq(H, Fraction(1))):
                raise BakerParamError(f"H{j} = {H} is below max(h(alpha{j}), log alpha{j}, 1)")
        if not multiplicatively_independent(self.alpha1, self.alpha2):
            raise BakerParamError("alpha1 and alpha2 are multiplicatively dependent")

    def replace(self, **changes) -> "BakerRationalParams":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(changes)
        return BakerRationalParams(**d)

    def to_json(self) -> dict:
        return {
            "alpha1": str(self.alpha1),
            "alpha2": str(self.alpha2),
            "H1": str(self.H1),
            "H2": str(self.H2),
            "b1": self.b1,
            "b2": self.b2,
        }

    @classmethod
    def from_json(cls, d: dict) -> "BakerRationalParams":
        return cls(
            Fraction(d["alpha1"]),
            Fraction(d["alpha2"]),
            parse_real(d["H1"]),
            parse_real(d["H2"]),
            int(d["b1"]),
            int(d["b2"]),
        )


# --- bound evaluation --------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    kind: str
    bound_value: float
    regime: str
    inputs: dict
    precision: int
    enclosure: tuple[str, str] = ("", "")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "bound_value": self.bound_value,
            "regime": self.regime,
            "inputs": self.inputs,
            "precision": self.precision,
            "enclosure": list(self.enclosure),
        }

    @classmethod
    def from_json(cls, d: dict) -> "BoundReport":
        return cls(
            d["kind"], float(d["bound_value"]), d["regime"], d["inputs"], int(d["precision"]),
            tuple(d.get("enclosure", ("", ""))),
        )


def _regime(log_side, const_side) -> str:
    if certainly_less(const_side, log_side):
        return "log"
    if certainly_less(log_side, const_side):
        return "constant"
    return "ambiguous"


def _enclosure(x) -> tuple[str, str]:
    return (mpmath.nstr(lo(x), 36), mpmath.nstr(hi(x), 36))


def padic_prefactor(params: BakerPadicParams):
    """``36.1 g H1 H2 / (E^3 log^4 p)`` as an interval."""
    E = R.ival(params.E)
    return (
        iv.mpf("36.1") * params.g * real_interval(params.H1) * real_interval(params.H2)
        / (E**3 * ilog(params.p) ** 4)
    )


def padic_bound(params: BakerPadicParams, precision: int = DEFAULT_PRECISION) -> BoundReport:
    """Upper bound for ``nu_p(alpha1^b1 - alpha2^b2)``."""
    with R.precision(precision):
        H1, H2 = real_interval(params.H1), real_interval(params.H2)
        elogp = R.ival(params.E) * ilog(params.p)
        bprime = params.b1 / H2 + params.b2 / H1
        log_side = iv.log(bprime) + iv.log(elogp) + iv.mpf("0.4")
        const_side = 6 * elogp
        value = padic_prefactor(params) * imax(log_side, const_side) ** 2
        return BoundReport(
            "padic", up(value), _regime(log_side, const_side), params.to_json(), precision,
            _enclosure(value),
        )


def rational_bound(params: BakerRationalParams, precision: int = DEFAULT_PRECISION) -> BoundReport:
    """Upper bound for ``-log|b2 log alpha2 - b1 log alpha1|``."""
    with R.precision(precision):
        H1, H2 = real_interval(params.H1), real_interval(params.H2)
        bprime = params.b1 / H2 + params.b2 / H1
        log_side = iv.log(bprime) + iv.mpf("0.38")
        const_side = iv.mpf(10)
        value = iv.mpf("25.2") * H1 * H2 * imax(log_side, const_side) ** 2
        return BoundReport(
            "rational", up(value), _regime(log_side, const_side), params.to_json(), precision,
            _enclosure(value),
        )


# --- parameters used for the family N = 4^e ----------------------------------


def case_y_params(e: int, b1: int = 1, b2: int = 1) -> BakerPadicParams:
    """2-adic parameters for ``(4^e+1)^b1 - (1-4^e)^b2``.

    For ``e = 1`` the choice ``g=1, E=2`` is not admissible (``E`` must exceed 2),
    so ``g=2, E=3, H=3 log 2`` is used instead.
    """
    if e < 1:
        raise BakerParamError("e must be positive")
    N = 4**e
    if e == 1:
        h = LogReal(Fraction(2), Fraction(3))
        return BakerPadicParams(2, Fraction(N + 1), Fraction(1 - N), 2, Fraction(3), h, h, b1, b2)
    return BakerPadicParams(
        2, Fraction(N + 1), Fraction(1 - N), 1, Fraction(2 * e),
        LogReal(Fraction(N + 1)), LogReal(Fraction(2), Fraction(2 * e)), b1, b2,
    )


def case_x_params(e: int, b1: int = 1, b2: int = 1) -> BakerPadicParams:
    """3-adic parameters for ``(-4^e-1)^b1 - (-2)^b2``; ``H1`` is raised to ``2 log 3`` at ``e = 1``."""
    if e < 1:
        raise BakerParamError("e must be positive")
    N = 4**e
    H1 = LogReal(Fraction(N + 1)) if N + 1 >= 9 else LogReal(Fraction(3), Fraction(2))
    return BakerPadicParams(
        3, Fraction(-N - 1), Fraction(-2), 3, Fraction(2), H1, LogReal(Fraction(3), Fraction(2)), b1, b2,
    )


def w_lower_interval(e: int):
    N = 4**e
    mx, _, mz = R.family_mus(N)
    return N / (mx + mz)


def nominal_prefactor_y(e: int):
    """``exp(0.4) (mu_x + mu_z)``, the constant compared against 3."""
    mx, _, mz = R.family_mus(4**e)
    return iv.exp(iv.mpf("0.4")) * (mx + mz)


def nominal_prefactor_x(e: int):
    """``exp(0.4) (mu_z + 2 log 3 mu_y)``, the constant compared against 5."""
    _, my, mz = R.family_mus(4**e)
    return iv.exp(iv.mpf("0.4")) * (mz + 2 * ilog(3) * my)


def kappa_y(e: int):
    """Rigorous ``kappa`` with ``exp(0.4) b' E log 2 < kappa w``."""
    N = 4**e
    mx, _, mz = R.family_mus(N)
    return iv.exp(iv.mpf("0.4")) * (mz + mx * 2 * e * ilog(2) / ilog(N + 1))


def kappa_x(e: int):
    """Rigorous ``kappa`` with ``exp(0.4) b' 2 log 3 < kappa w`` where ``b2 = 2ey``."""
    N = 4**e
    _, my, mz = R.family_mus(N)
    return iv.exp(iv.mpf("0.4")) * (mz + my * 4 * e * ilog(3) / ilog(N + 1))


@dataclass(frozen=True)
class CaseResolution:
    e: int
    case: str
    compatible: bool
    K: float
    constant: tuple[str, str]
    branches: dict = field(default_factory=dict)
    margin: float = 0.0

    @property
    def verdict(self) -> str:
        return "compatible" if self.compatible else "incompatible"

    def __str__(self) -> str:
        return f"{self.case} e={self.e}: {self.verdict}"

    def to_json(self) -> dict:
        return {
            "e": self.e,
            "case": self.case,
            "verdict": self.verdict,
            "K": self.K,
            "constant": list(self.constant),
            "branches": self.branches,
            "margin": self.margin,
        }


def _resolve(e: int, case: str, params: BakerPadicParams, kappa, k_nominal: int, T) -> CaseResolution:
    C = padic_prefactor(params)
    K = R.ival(k_nominal) if certainly_less(kappa, k_nominal) else R.ival(hi(kappa))
    two_c = 2 * C
    w_low = w_lower_interval(e)

    # branch log(Kw) > T: w/log^2(Kw) is increasing there, evaluate at the least w
    wA = imax(iv.exp(T) / K, w_low)
    fA = wA / iv.log(K * wA) ** 2
    incompatible_a = certainly_geq(fA, two_c)
    # branch log(Kw) <= T: w <= 2C T^2 against w > w_low
    rhsB = two_c * T**2
    incompatible_b = certainly_geq(w_low, rhsB)

    margin = min(float(lo(fA) / hi(two_c)), float(lo(w_low) / hi(rhsB)))
    return CaseResolution(
        e,
        case,
        not (incompatible_a and incompatible_b),
        up(K),
        _enclosure(C),
        {
            "large_w": {"compatible": not incompatible_a, "lhs": R.show(fA), "rhs": R.show(two_c)},
            "small_w": {"compatible": not incompatible_b, "lhs": R.show(w_low), "rhs": R.show(rhsB)},
        },
        margin,
    )


def resolve_padic_y_case(e: int, precision: int = DEFAULT_PRECISION) -> CaseResolution:
    """Whether ``y >= w/2`` is consistent with the 2-adic bound and ``w > N/(mu_x+mu_z)``."""
    if e < 2:
        raise BakerParamError("the 2-adic case needs e >= 2")
    with R.precision(precision):
        T = 12 * e * ilog(2)
        return _resolve(e, "padic-y", case_y_params(e), kappa_y(e), 3, T)


def resolve_padic_x_case(e: int, precision: int = DEFAULT_PRECISION) -> CaseResolution:
    """Whether ``x >= w/2`` is consistent with the 3-adic bound and ``w > N/(mu_x+mu_z)``."""
    if e < 2:
        raise BakerParamError("the 3-adic case needs e >= 2")
    with R.precision(precision):
        T = 12 * ilog(3)
        return _resolve(e, "padic-x", case_x_params(e), kappa_x(e), 5, T)


def padic_case_formula_constant(e: int, case: str):
    """The closed-form constant written for each case, for comparison with :func:`padic_prefactor`."""
    if case == "padic-y":
        return iv.mpf("36.1") * ilog(4**e + 1) / ((2 * e) ** 2 * ilog(2) ** 3)
    return iv.mpf("36.1") * 3 * ilog(4**e + 1) / (4 * ilog(3) ** 3)


# --- rational case -----------------------------------------------------------


def _s_inequality_gap(s, additive):
    """``s - RHS(s)``; the inequality holds iff this is negative."""
    s = R.ival(s)
    rhs = iv.mpf("50.4") * imax(iv.log(2 * s) + iv.mpf("0.38"), 10) ** 2 + additive
    return s - rhs


def _s_additive(e: int):
    N = 4**e
    return 2 * ilog(6) / (ilog(N + 1) * ilog(N + 2))


def s_gap_increasing() -> bool:
    """``s - RHS(s)`` is strictly increasing on ``s > 0``.

    Below ``s_b = exp(9.62)/2`` the right side is constant.  Above it the
    derivative is ``1 - 100.8 (log 2s + 0.38)/s``, and ``(log 2s + 0.38)/s``
    decreases there, so positivity at ``s_b`` suffices.
    """
    s_b = iv.exp(iv.mpf("9.62")) / 2
    return certainly_less(iv.mpf("100.8") * 10 / s_b, 1)


def solve_s_threshold(e: int, precision: int = DEFAULT_PRECISION) -> int:
    """Least integer ``S`` such that every ``s >= S`` violates the rational-case inequality."""
    if e < 1:
        raise BakerParamError("e must be positive")
    with R.precision(precision):
        if not s_gap_increasing():
            raise ArithmeticError("could not certify monotonicity of the s-inequality")
        add = _s_additive(e)
        lo_s, hi_s = 1, 10**9
        if certainly_geq(_s_inequality_gap(lo_s, add), 0):
            return lo_s
        if not certainly_geq(_s_inequality_gap(hi_s, add), 0):
            raise ArithmeticError("no crossing below 10^9")
        while hi_s - lo_s > 1:
            mid = (lo_s + hi_s) // 2
            if certainly_geq(_s_inequality_gap(mid, add), 0):
                hi_s = mid
            else:
                lo_s = mid
        return hi_s


def s_threshold_report(e: int, precision: int = DEFAULT_PRECISION) -> BoundReport:
    S = solve_s_threshold(e, precision)
    with R.precision(precision):
        gap = _s_inequality_gap(S, _s_additive(e))
        const = iv.log(2 * R.ival(S)) + iv.mpf("0.38") < 10
    return BoundReport(
        "s-threshold", float(S), "constant" if const is True else "log",
        {"e": e, "c": 4**e + 1, "d": 4**e + 2}, precision, _enclosure(gap),
    )


def rational_case_params(e: int, z: int = 1, w: int = 1) -> BakerRationalParams:
    N = 4**e
    return BakerRationalParams(
        Fraction(N + 1), Fraction(N + 2), LogReal(Fraction(N + 1)), LogReal(Fraction(N + 2)), z, w
    )


def rational_case_compatible(e: int, precision: int = DEFAULT_PRECISION) -> tuple[bool, float]:
    """Whether ``N/(mu_x+mu_z) < S(e) log(N+1)`` can hold, and the ratio of the two sides."""
    S = solve_s_threshold(e, precision)
    with R.precision(precision):
        lhs = w_lower_interval(e)
        rhs = S * ilog(4**e + 1)
        return (not certainly_geq(lhs, rhs), float(lo(lhs) / hi(rhs)))


def resolve_rational_case(cap: int = 64, precision: int = DEFAULT_PRECISION) -> int:
    """Largest ``e <= cap`` for which the rational-case inequality is compatible."""
    best = 0
    for e in range(1, cap + 1):
        if rational_case_compatible(e, precision)[0]:
            best = e
    return best


def strictly_diverging(margins: list[float]) -> bool:
    """Tail policy for finite scans: ratios above 1 and strictly increasing."""
    return all(m > 1 for m in margins) and all(a < b for a, b in zip(margins, margins[1:]))


def tail_check(kind: str, cap: int = 64, window: int = 16) -> bool:
    es = range(cap - window + 1, cap + 1)
    if kind == "padic-y":
        margins = [resolve_padic_y_case(e).margin for e in es]
    elif kind == "padic-x":
        margins = [resolve_padic_x_case(e).margin for e in es]
    elif kind == "rational":
        margins = [rational_case_compatible(e)[1] for e in es]
    else:
        raise ValueError(f"unknown case {kind!r}")
    return strictly_diverging(margins)

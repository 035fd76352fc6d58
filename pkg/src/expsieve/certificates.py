"""Self-contained JSON certificates and their independent re-verification.

A sieve certificate is re-checked by enumerating each modulus directly,
without the prime-power decomposition used to produce it.  A bound
certificate is re-evaluated at its own precision and at a higher one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from . import baker
from .constraints import ConstraintSet
from .equation import ExpEquation
from .sieve import (
    ResidueClassSystem,
    SieveOutcome,
    cell_sort_key,
    classify,
    enumerate_system,
    format_modulus,
    intersect,
    parse_modulus,
    sieve_chain,
    size_prune,
)

FORMAT = "expsieve-certificate/1"
VERIFY_EXTRA_BITS = 64


class CertificateError(ValueError):
    pass


def outcome_json(outcome: SieveOutcome) -> dict:
    d = {"kind": outcome.kind, "summary": str(outcome)}
    if outcome.kind == "exponent_bound":
        d.update(variable=outcome.variable, bound=outcome.bound)
    return d


def sieve_certificate(eq: ExpEquation, outcome: SieveOutcome, constraints: ConstraintSet | None = None,
                      size_filter: bool = True) -> dict:
    constraints = constraints or ConstraintSet()
    return {
        "size_filter": size_filter,
        "format": FORMAT,
        "type": "sieve",
        "equation": eq.to_json(),
        "moduli": [format_modulus(m) for m in outcome.moduli],
        "modulus": format_modulus(outcome.modulus),
        "constraints": constraints.to_json(),
        "outcome": outcome_json(outcome),
        "survivors": outcome.system.to_json(),
    }


def certify_sieve(eq: ExpEquation, moduli, constraints: ConstraintSet | None = None,
                  budget: int | None = None, size_filter: bool = True) -> tuple[SieveOutcome, dict]:
    out = sieve_chain(eq, list(moduli), constraints, budget, size_filter)
    return out, sieve_certificate(eq, out, constraints, size_filter)


def bound_certificate(report: baker.BoundReport) -> dict:
    return {"format": FORMAT, "type": "bound", "report": report.to_json()}


@dataclass(frozen=True)
class Verification:
    valid: bool
    reason: str
    first_difference: str | None = None

    def __bool__(self) -> bool:
        return self.valid

    def to_json(self) -> dict:
        return {"valid": self.valid, "reason": self.reason, "first_difference": self.first_difference}


def load(source) -> dict:
    if isinstance(source, dict):
        return source
    try:
        return json.loads(Path(source).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CertificateError(f"not JSON: {exc}") from exc


def _direct_chain(eq: ExpEquation, moduli: list[int], cs: ConstraintSet, budget, size_filter: bool) -> SieveOutcome:
    system = None
    for k, M in enumerate(moduli, 1):
        step = enumerate_system(eq, M, cs, budget)
        system = step if system is None else intersect(system, step, budget)
        if size_filter:
            system = size_prune(eq, system)
        outcome = classify(system, moduli[:k], cs)
        if outcome.is_certificate:
            return outcome
    return outcome


def _first_difference(a: ResidueClassSystem, b: ResidueClassSystem) -> str | None:
    if (a.variables, a.moduli, a.thresholds) != (b.variables, b.moduli, b.thresholds):
        return f"layout {a.moduli}/{a.thresholds} vs recomputed {b.moduli}/{b.thresholds}"
    diff = sorted(a.cells ^ b.cells, key=cell_sort_key)
    if not diff:
        return None
    cell = diff[0]
    side = "missing from certificate" if cell in b.cells else "not reproduced"
    return f"{cell} {side}"


def _verify_sieve(cert: dict, budget) -> Verification:
    try:
        eq = ExpEquation.from_json(cert["equation"])
        moduli = [parse_modulus(m) for m in cert["moduli"]]
        cs = ConstraintSet.from_json(cert.get("constraints", []))
        claimed = cert["outcome"]
        survivors = ResidueClassSystem.from_json(cert["survivors"])
        size_filter = bool(cert.get("size_filter", True))
    except (KeyError, TypeError, ValueError) as exc:
        raise CertificateError(f"schema mismatch: {exc}") from exc
    out = _direct_chain(eq, moduli, cs, budget, size_filter)
    if out.kind != claimed.get("kind"):
        return Verification(False, f"outcome {out.kind} differs from claimed {claimed.get('kind')}")
    if out.kind == "exponent_bound" and (out.variable, out.bound) != (claimed.get("variable"), claimed.get("bound")):
        return Verification(False, f"bound {out} differs from claimed {claimed.get('summary')}")
    diff = _first_difference(survivors, out.system)
    if diff:
        return Verification(False, "survivor sets differ", diff)
    return Verification(True, f"reproduced: {out}")


def _verify_bound(cert: dict) -> Verification:
    try:
        rep = baker.BoundReport.from_json(cert["report"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CertificateError(f"schema mismatch: {exc}") from exc
    if rep.kind == "s-threshold":
        e = int(rep.inputs["e"])
        again = baker.solve_s_threshold(e, rep.precision)
        finer = baker.solve_s_threshold(e, rep.precision + VERIFY_EXTRA_BITS)
        if again != rep.bound_value or finer > rep.bound_value:
            return Verification(False, f"threshold recomputed as {again}/{finer}, claimed {rep.bound_value}")
        return Verification(True, f"s < {again}")
    if rep.kind == "padic":
        params = baker.BakerPadicParams.from_json(rep.inputs)
        evaluate = baker.padic_bound
    elif rep.kind == "rational":
        params = baker.BakerRationalParams.from_json(rep.inputs)
        evaluate = baker.rational_bound
    else:
        raise CertificateError(f"unknown bound kind {rep.kind!r}")
    again = evaluate(params, rep.precision)
    finer = evaluate(params, rep.precision + VERIFY_EXTRA_BITS)
    if again.bound_value != rep.bound_value or again.regime != rep.regime:
        return Verification(False, f"recomputed {again.bound_value} ({again.regime}), claimed {rep.bound_value}")
    if finer.bound_value > rep.bound_value:
        return Verification(False, f"higher precision gives {finer.bound_value} > {rep.bound_value}")
    return Verification(True, f"{rep.kind} bound {rep.bound_value}")


def verify_certificate(source, budget: int | None = None) -> Verification:
    cert = load(source)
    if cert.get("format") != FORMAT:
        raise CertificateError(f"unknown certificate format {cert.get('format')!r}")
    kind = cert.get("type")
    if kind == "sieve":
        return _verify_sieve(cert, budget)
    if kind == "bound":
        return _verify_bound(cert)
    raise CertificateError(f"unknown certificate type {kind!r}")


def dumps(cert: dict) -> str:
    return json.dumps(cert, indent=2, sort_keys=True, ensure_ascii=False) + "\n"

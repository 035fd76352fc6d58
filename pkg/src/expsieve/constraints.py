"""Per-variable exponent restrictions shared by the sieve and the brute-force search."""

from __future__ import annotations

import re
from dataclasses import dataclass
from math import lcm
from typing import Iterable, Iterator


class ConstraintError(ValueError):
    pass


KINDS = ("eq", "ne", "ge", "le", "mod")


@dataclass(frozen=True, order=True)
class Constraint:
    var: str
    kind: str
    value: int
    modulus: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConstraintError(f"unknown constraint kind {self.kind!r}")
        if self.kind == "mod":
            if self.modulus < 1:
                raise ConstraintError("congruence modulus must be positive")
            object.__setattr__(self, "value", self.value % self.modulus)

    def admits(self, t: int) -> bool:
        if self.kind == "eq":
            return t == self.value
        if self.kind == "ne":
            return t != self.value
        if self.kind == "ge":
            return t >= self.value
        if self.kind == "le":
            return t <= self.value
        return t % self.modulus == self.value

    def __str__(self) -> str:
        if self.kind == "mod":
            if self.modulus == 2:
                return f"{self.var} {'odd' if self.value else 'even'}"
            return f"{self.var}≡{self.value} mod {self.modulus}"
        op = {"eq": "=", "ne": "!=", "ge": ">=", "le": "<="}[self.kind]
        return f"{self.var}{op}{self.value}"

    def to_json(self) -> dict:
        d = {"var": self.var, "kind": self.kind, "value": self.value}
        if self.kind == "mod":
            d["modulus"] = self.modulus
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Constraint":
        return cls(d["var"], d["kind"], int(d["value"]), int(d.get("modulus", 0)))


_CLAUSE = re.compile(
    r"""^\s*(?P<var>[A-Za-z_]\w*)\s*
    (?:
        (?P<parity>odd|even)
      | (?:≡|~|=)\s*(?P<res>-?\d+)\s*(?:mod|%)\s*(?P<mod>\d+)
      | (?P<op>>=|<=|!=|≠|≥|≤|=)\s*(?P<val>-?\d+)
    )\s*$""",
    re.VERBOSE,
)


def parse_clause(text: str) -> Constraint:
    """Parse one clause: ``x>=3``, ``x=2``, ``x!=2``, ``x odd``, ``x≡1 mod 4``."""
    m = _CLAUSE.match(text)
    if not m:
        raise ConstraintError(f"cannot parse constraint {text!r}")
    var = m["var"]
    if m["parity"]:
        return Constraint(var, "mod", 1 if m["parity"] == "odd" else 0, 2)
    if m["mod"] is not None:
        return Constraint(var, "mod", int(m["res"]), int(m["mod"]))
    op = {"=": "eq", "!=": "ne", "≠": "ne", ">=": "ge", "≥": "ge", "<=": "le", "≤": "le"}[m["op"]]
    return Constraint(var, op, int(m["val"]))


class ConstraintSet:
    """An immutable conjunction of :class:`Constraint` clauses."""

    def __init__(self, clauses: Iterable[Constraint] = ()):
        self._clauses = tuple(sorted(set(clauses)))
        self._check_consistent()

    @classmethod
    def parse(cls, clauses: Iterable[str]) -> "ConstraintSet":
        return cls(parse_clause(c) for c in clauses)

    def __iter__(self) -> Iterator[Constraint]:
        return iter(self._clauses)

    def __len__(self) -> int:
        return len(self._clauses)

    def __bool__(self) -> bool:
        return bool(self._clauses)

    def __eq__(self, other) -> bool:
        return isinstance(other, ConstraintSet) and self._clauses == other._clauses

    def __hash__(self) -> int:
        return hash(self._clauses)

    def __repr__(self) -> str:
        return f"ConstraintSet([{', '.join(str(c) for c in self._clauses)}])"

    def __and__(self, other: "ConstraintSet") -> "ConstraintSet":
        return ConstraintSet(self._clauses + tuple(other))

    def with_clause(self, *clauses: Constraint | str) -> "ConstraintSet":
        extra = [parse_clause(c) if isinstance(c, str) else c for c in clauses]
        return ConstraintSet(self._clauses + tuple(extra))

    def for_var(self, var: str) -> tuple[Constraint, ...]:
        return tuple(c for c in self._clauses if c.var == var)

    def variables(self) -> set[str]:
        return {c.var for c in self._clauses}

    def admits(self, var: str, t: int) -> bool:
        return all(c.admits(t) for c in self.for_var(var))

    def admits_assignment(self, asg: dict[str, int]) -> bool:
        return all(c.admits(asg[c.var]) for c in self._clauses if c.var in asg)

    def fixed(self, var: str) -> int | None:
        for c in self.for_var(var):
            if c.kind == "eq":
                return c.value
        return None

    def lower(self, var: str) -> int:
        """Least admissible value, never below 1."""
        return max([1] + [c.value for c in self.for_var(var) if c.kind == "ge"])

    def upper(self, var: str) -> int | None:
        ups = [c.value for c in self.for_var(var) if c.kind == "le"]
        return min(ups) if ups else None

    def congruence_modulus(self, var: str) -> int:
        return lcm(1, *(c.modulus for c in self.for_var(var) if c.kind == "mod"))

    def admits_class(self, var: str, r: int, m: int) -> bool:
        """Whether residue class ``r mod m`` is compatible with every congruence on ``var``.

        ``m`` must be a multiple of :meth:`congruence_modulus`.
        """
        return all(r % c.modulus == c.value for c in self.for_var(var) if c.kind == "mod")

    def bounded(self, var: str) -> bool:
        return self.fixed(var) is not None or self.upper(var) is not None

    def to_json(self) -> list[dict]:
        return [c.to_json() for c in self._clauses]

    @classmethod
    def from_json(cls, data: list[dict]) -> "ConstraintSet":
        return cls(Constraint.from_json(d) for d in data)

    def _check_consistent(self) -> None:
        for var in self.variables():
            lo, hi = self.lower(var), self.upper(var)
            if hi is not None and hi < lo:
                raise ConstraintError(f"empty range for {var}: {lo}..{hi}")
            fixed = [c.value for c in self.for_var(var) if c.kind == "eq"]
            if len(set(fixed)) > 1:
                raise ConstraintError(f"{var} fixed to several values {sorted(set(fixed))}")
            if fixed and not self.admits(var, fixed[0]):
                raise ConstraintError(f"{var}={fixed[0]} violates its own constraints")

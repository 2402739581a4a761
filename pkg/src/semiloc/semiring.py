"""Commutative semirings as first-class values.

Finite semirings (min-max chains, bounded distributive lattices, the
Boolean semiring) are tabulated and validated exhaustively; the natural,
tropical and Viterbi semirings are symbolic with exact arithmetic
(unbounded integers, Fractions, and math.inf for the tropical zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence


class SemiringError(Exception):
    """Invalid semiring construction or operation."""


INF = math.inf  # tropical zero


@dataclass(frozen=True)
class SemiringSpec:
    """A commutative semiring.

    For finite kinds, values are indices into `carrier` and both
    operations are table lookups.  For the symbolic builtins, values are
    exact numbers and the operations are callables.
    """

    kind: str                      # boolean | minmax | lattice | natural | tropical | viterbi
    name: str
    zero: object
    one: object
    carrier: Optional[tuple] = None           # element names, finite kinds only
    add_table: Optional[tuple] = None
    mul_table: Optional[tuple] = None
    add_fn: Optional[Callable] = field(default=None, compare=False)
    mul_fn: Optional[Callable] = field(default=None, compare=False)
    leq_fn: Optional[Callable] = field(default=None, compare=False)

    @property
    def finite(self) -> bool:
        return self.carrier is not None

    def elements(self) -> tuple:
        if not self.finite:
            raise SemiringError(f"{self.name} has an infinite carrier")
        return tuple(range(len(self.carrier)))

    def add(self, a, b):
        if self.add_table is not None:
            return self.add_table[a][b]
        return self.add_fn(a, b)

    def mul(self, a, b):
        if self.mul_table is not None:
            return self.mul_table[a][b]
        return self.mul_fn(a, b)

    def leq(self, a, b) -> bool:
        """Natural order a <= b iff a + c = b for some c."""
        if self.leq_fn is not None:
            return self.leq_fn(a, b)
        if self.finite:
            return any(self.add(a, c) == b for c in self.elements())
        raise SemiringError(f"no order predicate for {self.name}")

    def sum(self, values):
        acc = self.zero
        for v in values:
            acc = self.add(acc, v)
        return acc

    def product(self, values):
        acc = self.one
        for v in values:
            acc = self.mul(acc, v)
        return acc

    def token(self, v) -> str:
        """Canonical printed form of a value."""
        if self.finite:
            return str(self.carrier[v])
        if v == INF:
            return "inf"
        if isinstance(v, Fraction):
            return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
        return str(v)

    def parse_token(self, token: str):
        token = str(token).strip()
        if self.finite:
            names = [str(c) for c in self.carrier]
            if token in names:
                return names.index(token)
            if token.isdigit() and int(token) < len(self.carrier):
                return int(token)
            raise SemiringError(f"value {token!r} outside the carrier of {self.name}")
        if self.kind == "natural":
            if not token.lstrip("-").isdigit() or int(token) < 0:
                raise SemiringError(f"natural-semiring value must be a nonnegative integer, got {token!r}")
            return int(token)
        if self.kind == "tropical":
            if token == "inf":
                return INF
            frac = Fraction(token)
            if frac < 0:
                raise SemiringError(f"tropical value must be nonnegative, got {token!r}")
            return frac
        if self.kind == "viterbi":
            frac = Fraction(token)
            if not 0 <= frac <= 1:
                raise SemiringError(f"Viterbi value must lie in [0,1], got {token!r}")
            return frac
        raise SemiringError(f"cannot parse value for semiring kind {self.kind!r}")

    def __repr__(self):
        return f"SemiringSpec({self.name})"


def _check_axioms(spec: SemiringSpec):
    """Exhaustive semiring axioms on a finite carrier."""
    els = spec.elements()
    add, mul, zero, one = spec.add, spec.mul, spec.zero, spec.one
    if zero == one:
        raise SemiringError("0 = 1 is not allowed")
    for a in els:
        if add(a, zero) != a:
            raise SemiringError(f"0 is not additively neutral at {spec.token(a)}")
        if mul(a, one) != a:
            raise SemiringError(f"1 is not multiplicatively neutral at {spec.token(a)}")
        if mul(a, zero) != zero:
            raise SemiringError(f"0 does not annihilate at {spec.token(a)}")
        for b in els:
            if add(a, b) != add(b, a):
                raise SemiringError(f"+ not commutative at ({spec.token(a)},{spec.token(b)})")
            if mul(a, b) != mul(b, a):
                raise SemiringError(f"* not commutative at ({spec.token(a)},{spec.token(b)})")
            for c in els:
                if add(add(a, b), c) != add(a, add(b, c)):
                    raise SemiringError("+ not associative")
                if mul(mul(a, b), c) != mul(a, mul(b, c)):
                    raise SemiringError("* not associative")
                if mul(a, add(b, c)) != add(mul(a, b), mul(a, c)):
                    raise SemiringError(
                        "* does not distribute over + at "
                        f"({spec.token(a)},{spec.token(b)},{spec.token(c)})"
                    )


def make_minmax_chain(n: int) -> SemiringSpec:
    """Min-max semiring on the chain 0 < 1 < ... < n-1 (add = max, mul = min)."""
    if n < 2:
        raise SemiringError(f"a min-max chain needs at least 2 elements, got {n}")
    add = tuple(tuple(max(a, b) for b in range(n)) for a in range(n))
    mul = tuple(tuple(min(a, b) for b in range(n)) for a in range(n))
    spec = SemiringSpec(
        kind="minmax", name=f"minmax:{n}", zero=0, one=n - 1,
        carrier=tuple(str(i) for i in range(n)), add_table=add, mul_table=mul,
    )
    _check_axioms(spec)
    return spec


def make_lattice(join: Sequence[Sequence[int]], meet: Sequence[Sequence[int]],
                 bottom: int, top: int, names: Optional[Sequence[str]] = None) -> SemiringSpec:
    """Lattice semiring from join/meet tables over carrier 0..n-1.

    All lattice-semiring axioms are verified exhaustively; a violated
    axiom is reported with a witness.
    """
    n = len(join)
    if any(len(row) != n for row in join) or len(meet) != n or any(len(row) != n for row in meet):
        raise SemiringError("join and meet must be square tables over the same carrier")
    carrier = tuple(names) if names is not None else tuple(str(i) for i in range(n))
    if len(carrier) != n:
        raise SemiringError("carrier names do not match table size")
    join = tuple(tuple(row) for row in join)
    meet = tuple(tuple(row) for row in meet)
    spec = SemiringSpec(
        kind="lattice", name=f"lattice:{','.join(map(str, carrier))}",
        zero=bottom, one=top, carrier=carrier, add_table=join, mul_table=meet,
    )
    els = range(n)
    for a in els:
        if join[a][a] != a or meet[a][a] != a:
            raise SemiringError(f"lattice operations not idempotent at {carrier[a]}")
        for b in els:
            if join[a][meet[a][b]] != a or meet[a][join[a][b]] != a:
                raise SemiringError(f"absorption fails at ({carrier[a]},{carrier[b]})")
            for c in els:
                if meet[a][join[b][c]] != join[meet[a][b]][meet[a][c]]:
                    raise SemiringError(
                        f"not distributive: witness ({carrier[a]},{carrier[b]},{carrier[c]})"
                    )
    for a in els:
        if join[bottom][a] != a or meet[top][a] != a:
            raise SemiringError(f"lattice not bounded by the given bottom/top at {carrier[a]}")
    _check_axioms(spec)
    return spec


def diamond_lattice() -> SemiringSpec:
    """The 4-element distributive lattice 0 < a,b < 1 with a,b incomparable."""
    O, A, B, I = 0, 1, 2, 3
    join = [[O, A, B, I], [A, A, I, I], [B, I, B, I], [I, I, I, I]]
    meet = [[O, O, O, O], [O, A, O, A], [O, O, B, B], [O, A, B, I]]
    return make_lattice(join, meet, O, I, names=("0", "a", "b", "1"))


def builtin(name: str) -> SemiringSpec:
    """Symbolic builtins with exact arithmetic: boolean, natural, tropical
    (min, +, zero=inf, one=0) and Viterbi (max, *, on [0,1])."""
    if name == "boolean":
        spec = make_minmax_chain(2)
        return SemiringSpec(kind="boolean", name="boolean", zero=0, one=1,
                            carrier=("0", "1"), add_table=spec.add_table,
                            mul_table=spec.mul_table)
    if name == "natural":
        return SemiringSpec(
            kind="natural", name="natural", zero=0, one=1,
            add_fn=lambda a, b: a + b, mul_fn=lambda a, b: a * b,
            leq_fn=lambda a, b: a <= b,
        )
    if name == "tropical":
        def t_add(a, b):
            return min(a, b)

        def t_mul(a, b):
            if a == INF or b == INF:
                return INF
            return a + b

        return SemiringSpec(
            kind="tropical", name="tropical", zero=INF, one=Fraction(0),
            add_fn=t_add, mul_fn=t_mul,
            leq_fn=lambda a, b: b <= a,  # natural order inverts the numeric one
        )
    if name == "viterbi":
        return SemiringSpec(
            kind="viterbi", name="viterbi", zero=Fraction(0), one=Fraction(1),
            add_fn=max, mul_fn=lambda a, b: a * b,
            leq_fn=lambda a, b: a <= b,
        )
    raise SemiringError(f"unknown builtin semiring {name!r}")


@dataclass
class PropertyRecord:
    naturally_ordered: bool
    fully_idempotent: bool
    absorptive: bool


_BUILTIN_PROPERTIES = {
    "natural": PropertyRecord(True, False, False),
    "tropical": PropertyRecord(True, False, True),
    "viterbi": PropertyRecord(True, False, True),
}


def check_properties(spec: SemiringSpec) -> PropertyRecord:
    """naturally-ordered / fully-idempotent / absorptive flags; exhaustive
    for finite carriers, known values for the symbolic builtins."""
    if not spec.finite:
        return _BUILTIN_PROPERTIES[spec.kind]
    els = spec.elements()
    leq = {(a, b) for a in els for b in els if spec.leq(a, b)}
    antisym = all(not ((a, b) in leq and (b, a) in leq) or a == b for a in els for b in els)
    trans = all(
        (a, c) in leq
        for a in els for b in els for c in els
        if (a, b) in leq and (b, c) in leq
    )
    refl = all((a, a) in leq for a in els)
    idem = all(spec.add(a, a) == a and spec.mul(a, a) == a for a in els)
    absorptive = all(spec.add(spec.one, a) == spec.one for a in els)
    return PropertyRecord(refl and antisym and trans, idem, absorptive)


def dual_semiring(spec: SemiringSpec) -> SemiringSpec:
    """Invert the order of a min-max or lattice semiring: add/mul and 0/1
    swap; an involution."""
    if spec.kind not in ("minmax", "lattice", "boolean"):
        raise SemiringError(f"dual semiring is only defined for min-max/lattice kinds, not {spec.kind}")
    name = spec.name[5:] if spec.name.startswith("dual:") else f"dual:{spec.name}"
    return SemiringSpec(
        kind="lattice" if spec.kind == "lattice" else spec.kind,
        name=name, zero=spec.one, one=spec.zero, carrier=spec.carrier,
        add_table=spec.mul_table, mul_table=spec.add_table,
    )


@dataclass(frozen=True)
class Homomorphism:
    source: SemiringSpec
    target: SemiringSpec
    mapping: tuple  # mapping[i] = image of carrier index i

    def apply(self, v):
        return self.mapping[v]


def verify_homomorphism(h: Homomorphism) -> bool:
    src, tgt, m = h.source, h.target, h.mapping
    if m[src.zero] != tgt.zero or m[src.one] != tgt.one:
        return False
    for a in src.elements():
        for b in src.elements():
            if m[src.add(a, b)] != tgt.add(m[a], m[b]):
                return False
            if m[src.mul(a, b)] != tgt.mul(m[a], m[b]):
                return False
    return True


def separating_hom(spec: SemiringSpec, b) -> Homomorphism:
    """Threshold homomorphism h_b(x) = 1 iff x >= b into the Boolean
    semiring.  Always a homomorphism on chains; on lattices only for
    join-irreducible b, which is validated exhaustively."""
    if spec.kind not in ("minmax", "lattice", "boolean"):
        raise SemiringError("separating homomorphisms are defined for min-max/lattice semirings")
    if b == spec.zero:
        raise SemiringError("threshold must be nonzero")
    if b not in spec.elements():
        raise SemiringError(f"threshold {b!r} outside the carrier")
    boolean = builtin("boolean")
    mapping = tuple(1 if spec.leq(b, x) else 0 for x in spec.elements())
    h = Homomorphism(spec, boolean, mapping)
    if not verify_homomorphism(h):
        raise SemiringError(
            f"threshold {spec.token(b)} does not induce a homomorphism "
            f"(it is not join-irreducible in {spec.name})"
        )
    return h


def separating_family(spec: SemiringSpec) -> list[Homomorphism]:
    """All valid threshold homomorphisms; separates every pair of distinct
    values for chains and finite distributive lattices."""
    out = []
    for b in spec.elements():
        if b == spec.zero:
            continue
        try:
            out.append(separating_hom(spec, b))
        except SemiringError:
            continue
    return out

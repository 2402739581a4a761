"""Brute-force ground truth: exhaustive enumeration of model-defining
positive-tracking interpretations within bounds, equivalence verdicts
with self-certifying counterexamples, and the counterexample suites.

Enumeration order is fixed: universes of increasing size, atoms in
lexicographic order, values in carrier order, assignments in universe
order, semirings in the order given by the bounds.  Verdicts are
deterministic; the first mismatch in that order is the one reported.
"""

from __future__ import annotations

import itertools
import random
import string
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Sequence

from . import formula as F
from .formula import Formula, Signature
from .semiring import SemiringSpec, builtin, separating_family
from .semantics import Interpretation, evaluate
from . import _vector


class OracleError(Exception):
    pass


def _universe(n: int) -> tuple:
    letters = string.ascii_lowercase
    if n <= len(letters):
        return tuple(letters[:n])
    return tuple(f"e{i}" for i in range(n))


def atom_order(sig: Signature, universe: Sequence[str]) -> list:
    atoms = []
    for rel in sorted(sig.relations):
        for args in itertools.product(universe, repeat=sig.arity(rel)):
            atoms.append((rel, args))
    return atoms


@dataclass
class EnumerationBounds:
    """Bounds for exhaustive enumeration.

    Semirings with infinite carriers require an explicit finite value
    palette (keyed by semiring name); exhaustiveness is then relative to
    the palette.  A cap, when set, samples interpretation indices
    reproducibly from the seed.
    """

    max_universe: int = 3
    semirings: tuple = ()
    degree_bound: Optional[int] = None
    cap: Optional[int] = None
    seed: int = 0
    palettes: Mapping[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        if self.max_universe < 1:
            raise OracleError("max universe size must be >= 1")
        if not self.semirings:
            self.semirings = (builtin("boolean"),)

    def palette(self, spec: SemiringSpec) -> tuple:
        if spec.finite:
            return spec.elements()
        pal = self.palettes.get(spec.name)
        if pal is None:
            raise OracleError(
                f"semiring {spec.name} has an infinite carrier; "
                "provide a finite value palette in the bounds"
            )
        if spec.zero not in pal:
            pal = (spec.zero,) + tuple(pal)
        return tuple(pal)


def space_size(sig: Signature, spec: SemiringSpec, bounds: EnumerationBounds, n: int) -> int:
    return len(bounds.palette(spec)) ** len(atom_order(sig, _universe(n)))


def interpretation_at(sig: Signature, spec: SemiringSpec, bounds: EnumerationBounds,
                      n: int, index: int) -> Interpretation:
    """The index-th interpretation of universe size n, in enumeration
    order (first atom is the most significant digit)."""
    universe = _universe(n)
    atoms = atom_order(sig, universe)
    palette = bounds.palette(spec)
    base = len(palette)
    values = {}
    for pos, atom in enumerate(reversed(atoms)):
        values[atom] = palette[(index // base ** pos) % base]
    return Interpretation(universe, sig, spec, values)


def enumerate_interpretations(sig: Signature, bounds: EnumerationBounds) -> Iterator[Interpretation]:
    """All model-defining positive-tracking interpretations within bounds:
    every universe size 1..max, every assignment of palette values to the
    instantiated positive atoms, for every semiring in the bounds."""
    for spec in bounds.semirings:
        for n in range(1, bounds.max_universe + 1):
            total = space_size(sig, spec, bounds, n)
            indices: Sequence[int]
            if bounds.cap is not None and total > bounds.cap:
                rng = random.Random(bounds.seed)
                indices = sorted(rng.sample(range(total), bounds.cap))
            else:
                indices = range(total)
            for i in indices:
                pi = interpretation_at(sig, spec, bounds, n, i)
                if bounds.degree_bound is not None:
                    if pi.gaifman_graph().max_degree() > bounds.degree_bound:
                        continue
                yield pi


@dataclass
class Verdict:
    """Equivalent within bounds, or a concrete counterexample that
    re-evaluates to the stated unequal values."""

    equivalent: bool
    bounds: EnumerationBounds
    interpretation: Optional[Interpretation] = None
    assignment: Optional[dict] = None
    value_lhs: object = None
    value_rhs: object = None

    def __bool__(self):
        return self.equivalent

    def describe(self) -> str:
        if self.equivalent:
            return "Equivalent within bounds"
        pi = self.interpretation
        toks = pi.semiring.token
        assign = ", ".join(f"{v}={e}" for v, e in sorted(self.assignment.items()))
        return (
            f"Counterexample: {pi!r}; assignment [{assign}]; "
            f"lhs={toks(self.value_lhs)} rhs={toks(self.value_rhs)}"
        )


def _assignments(frees: Sequence[str], universe: Sequence[str]) -> Iterator[dict]:
    if not frees:
        yield {}
        return
    for combo in itertools.product(universe, repeat=len(frees)):
        yield dict(zip(frees, combo))


def check_equivalence(lhs: Formula, rhs: Formula, frees: Sequence[str],
                      bounds: EnumerationBounds) -> Verdict:
    """Exhaustive value comparison over every enumerated interpretation and
    assignment; the first mismatch (in enumeration order) is returned as a
    self-certified counterexample.

    Finite semirings without degree bounds or caps go through a vectorized
    engine that computes whole value tables at once; its result is
    re-checked with the scalar evaluator before being reported.
    """
    frees = tuple(frees)
    extra = (lhs.free | rhs.free) - set(frees)
    if extra:
        raise OracleError(f"free variables {sorted(extra)} not declared")
    sig = _inferred_signature(lhs, rhs)
    for spec in bounds.semirings:
        for n in range(1, bounds.max_universe + 1):
            fast = (
                spec.finite
                and bounds.degree_bound is None
                and (bounds.cap is None or bounds.cap >= space_size(sig, spec, bounds, n))
                and _vector.supported(lhs)
                and _vector.supported(rhs)
            )
            if fast:
                hit = _vector.first_mismatch(lhs, rhs, frees, sig, spec, _universe(n))
                if hit is None:
                    continue
                index, assignment = hit
                pi = interpretation_at(sig, spec, bounds, n, index)
                vl = evaluate(pi, lhs, assignment)
                vr = evaluate(pi, rhs, assignment)
                if vl == vr:
                    raise OracleError("vectorized engine reported a spurious mismatch")
                return Verdict(False, bounds, pi, dict(assignment), vl, vr)
            sub = EnumerationBounds(
                max_universe=n, semirings=(spec,), degree_bound=bounds.degree_bound,
                cap=bounds.cap, seed=bounds.seed, palettes=bounds.palettes,
            )
            for pi in enumerate_interpretations(sig, sub):
                if len(pi.universe) != n:
                    continue
                for sigma in _assignments(frees, pi.universe):
                    vl = evaluate(pi, lhs, sigma)
                    vr = evaluate(pi, rhs, sigma)
                    if vl != vr:
                        return Verdict(False, bounds, pi, sigma, vl, vr)
    return Verdict(True, bounds)


def _inferred_signature(*formulas: Formula) -> Signature:
    rels: dict = {}
    for f in formulas:
        for node in F.walk(f):
            if isinstance(node, (F.PosAtom, F.NegAtom)):
                prev = rels.get(node.rel)
                if prev is not None and prev != len(node.args):
                    raise OracleError(f"relation {node.rel!r} used with two arities")
                rels[node.rel] = len(node.args)
            if isinstance(node, (F.BallExists, F.BallForall)) and node.sig:
                for r in node.sig:
                    rels.setdefault(r, 1)
    if not rels:
        rels = {"U": 1}
    return Signature(rels)


def signature_of(*formulas: Formula) -> Signature:
    return _inferred_signature(*formulas)


def lift_check(lhs: Formula, rhs: Formula, lattice: SemiringSpec,
               bounds: EnumerationBounds) -> tuple[Verdict, list]:
    """Verify equivalence over a lattice semiring, after confirming it over
    the Boolean semiring at the same bounds.  For a lattice counterexample,
    report the separating threshold homomorphisms h with h(lhs) != h(rhs) —
    the h∘pi diagnostic of the lifting argument."""
    bool_bounds = EnumerationBounds(
        max_universe=bounds.max_universe, semirings=(builtin("boolean"),),
        degree_bound=bounds.degree_bound, cap=bounds.cap, seed=bounds.seed,
    )
    base = check_equivalence(lhs, rhs, [], bool_bounds)
    if not base:
        raise OracleError(
            "lift_check precondition violated: not Boolean-equivalent: " + base.describe()
        )
    latt_bounds = EnumerationBounds(
        max_universe=bounds.max_universe, semirings=(lattice,),
        degree_bound=bounds.degree_bound, cap=bounds.cap, seed=bounds.seed,
    )
    verdict = check_equivalence(lhs, rhs, [], latt_bounds)
    if verdict:
        return verdict, []
    separating = []
    for h in separating_family(lattice):
        if h.apply(verdict.value_lhs) != h.apply(verdict.value_rhs):
            separating.append(h)
    return verdict, separating


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

@dataclass
class SuiteCheck:
    description: str
    expected: str
    actual: str
    provenance: str
    passed: bool


@dataclass
class SuiteReport:
    suite: str
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "suite": self.suite,
            "pass": self.passed,
            "checks": [
                {
                    "description": c.description,
                    "expected": c.expected,
                    "actual": c.actual,
                    "provenance": c.provenance,
                    "pass": c.passed,
                }
                for c in self.checks
            ],
        }

    def render_text(self) -> str:
        lines = [f"suite {self.suite}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            mark = "ok " if c.passed else "FAIL"
            lines.append(f"  [{mark}] {c.description}: expected {c.expected}, got {c.actual} ({c.provenance})")
        return "\n".join(lines)


def run_suite(name: str) -> SuiteReport:
    from . import suites
    try:
        fn = suites.REGISTRY[name]
    except KeyError:
        raise OracleError(
            f"unknown suite {name!r}; available: {', '.join(sorted(suites.REGISTRY))}"
        ) from None
    return fn()

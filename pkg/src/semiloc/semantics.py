"""Finite K-interpretations, Gaifman graphs, neighborhoods and the
semiring evaluation of formulae (including ball, outside and scattered
quantifiers and distance atoms).

Interpretations are model-defining and track only positive information by
construction: only positive literal values are stored, unlisted atoms are
0, and negative literals are derived as 1 where the positive value is 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from . import formula as F
from .formula import Formula, Signature
from .semiring import SemiringSpec

INF = math.inf


class ModelError(Exception):
    """Invalid interpretation data."""


class EvaluationError(Exception):
    """Evaluation precondition violated (unassigned variable, unknown relation)."""


Atom = tuple  # (relation name, element tuple)


class Interpretation:
    """A model-defining, positive-tracking K-interpretation over a finite
    universe.  Immutable after construction; reduct Gaifman graphs are
    cached per signature subset on first use."""

    def __init__(self, universe: Sequence[str], sig: Signature, semiring: SemiringSpec,
                 values: Mapping[Atom, object]):
        if not universe:
            raise ModelError("universe must be nonempty")
        if len(set(universe)) != len(universe):
            raise ModelError("universe elements must be distinct")
        self.universe = tuple(universe)
        self.sig = sig
        self.semiring = semiring
        self._index = {e: i for i, e in enumerate(self.universe)}
        vals = {}
        for (rel, args), v in values.items():
            if rel not in sig:
                raise ModelError(f"unknown relation {rel!r}")
            if len(args) != sig.arity(rel):
                raise ModelError(f"arity mismatch for {rel!r}: {args!r}")
            for a in args:
                if a not in self._index:
                    raise ModelError(f"unknown element {a!r} in literal {rel}{args}")
            if semiring.finite and not (isinstance(v, int) and 0 <= v < len(semiring.carrier)):
                raise ModelError(f"value {v!r} outside the carrier of {semiring.name}")
            if v != semiring.zero:
                vals[(rel, tuple(args))] = v
        self._values = vals
        self._graphs: dict = {}
        self._eval_memo: dict = {}

    def value(self, rel: str, args: Sequence[str]):
        """Value of the positive literal rel(args)."""
        if rel not in self.sig:
            raise EvaluationError(f"relation {rel!r} missing from the signature")
        return self._values.get((rel, tuple(args)), self.semiring.zero)

    def neg_value(self, rel: str, args: Sequence[str]):
        """Value of the negative literal ~rel(args): 1 iff the positive one is 0."""
        pos = self.value(rel, args)
        return self.semiring.one if pos == self.semiring.zero else self.semiring.zero

    def nonzero_literals(self) -> dict:
        return dict(self._values)

    def gaifman_graph(self, rels: Optional[frozenset] = None) -> "GaifmanGraph":
        key = frozenset(self.sig.relations) if rels is None else frozenset(rels)
        if key not in self._graphs:
            unknown = key - set(self.sig.relations)
            if unknown:
                raise ModelError(f"unknown relations in reduct: {sorted(unknown)}")
            self._graphs[key] = GaifmanGraph.build(self, key)
        return self._graphs[key]

    def __repr__(self):
        lits = ", ".join(
            f"{rel}({','.join(args)})={self.semiring.token(v)}"
            for (rel, args), v in sorted(self._values.items())
        )
        return f"Interpretation({list(self.universe)}; {self.semiring.name}; {lits or 'all atoms 0'})"


@dataclass
class GaifmanGraph:
    """Adjacency and all-pairs distances of the Gaifman graph; distances
    between elements in different components are +inf."""

    universe: tuple
    adjacency: dict          # element -> frozenset of neighbours
    distance: dict = field(repr=False)  # (a, b) -> int | inf

    @staticmethod
    def build(pi: Interpretation, rels: frozenset) -> "GaifmanGraph":
        adj = {a: set() for a in pi.universe}
        for (rel, args), _v in pi.nonzero_literals().items():
            if rel not in rels:
                continue
            distinct = set(args)
            for a in distinct:
                for b in distinct:
                    if a != b:
                        adj[a].add(b)
        dist = {}
        for src in pi.universe:
            seen = {src: 0}
            frontier = [src]
            d = 0
            while frontier:
                d += 1
                nxt = []
                for a in frontier:
                    for b in adj[a]:
                        if b not in seen:
                            seen[b] = d
                            nxt.append(b)
                frontier = nxt
            for tgt in pi.universe:
                dist[(src, tgt)] = seen.get(tgt, INF)
        return GaifmanGraph(pi.universe, {a: frozenset(ns) for a, ns in adj.items()}, dist)

    def d(self, a: str, b: str):
        return self.distance[(a, b)]

    def ball(self, radius: int, centers: Sequence[str]) -> tuple:
        """Union of radius-balls around the centers, in universe order.
        An empty center tuple gives the empty ball."""
        if not centers:
            return ()
        return tuple(
            b for b in self.universe
            if any(self.distance[(c, b)] <= radius for c in centers)
        )

    def outside(self, radius: int, centers: Sequence[str]) -> tuple:
        if not centers:
            return self.universe
        return tuple(
            b for b in self.universe
            if all(self.distance[(c, b)] > radius for c in centers)
        )

    def max_degree(self) -> int:
        return max((len(ns) for ns in self.adjacency.values()), default=0)


def load_interpretation(universe: Sequence[str], sig: Signature, semiring: SemiringSpec,
                        positive_values: Mapping) -> Interpretation:
    """Build an interpretation from {atom: value}.  Atom keys may be
    (rel, args) pairs or strings "R(a,b)"; values may be raw semiring
    values or string tokens."""
    parsed = {}
    for key, val in positive_values.items():
        if isinstance(key, str):
            rel, args = _parse_atom_key(key)
        else:
            rel, args = key[0], tuple(key[1])
        if isinstance(val, str) or semiring.finite and not isinstance(val, int):
            val = semiring.parse_token(str(val))
        elif semiring.finite and isinstance(val, int):
            if not 0 <= val < len(semiring.carrier):
                raise ModelError(f"value {val!r} outside the carrier of {semiring.name}")
        parsed[(rel, args)] = val
    return Interpretation(universe, sig, semiring, parsed)


def _parse_atom_key(key: str) -> tuple[str, tuple]:
    key = key.strip()
    if "(" not in key or not key.endswith(")"):
        raise ModelError(f"bad atom key {key!r}; expected R(a,b)")
    rel, rest = key.split("(", 1)
    args = tuple(a.strip() for a in rest[:-1].split(",")) if rest[:-1].strip() else ()
    return rel.strip(), args


def load_model_file(path: str, semiring: SemiringSpec) -> Interpretation:
    """Model file format: {"universe": [...], "signature": {R: arity},
    "values": {"R(a,b)": token}}; unlisted atoms are 0."""
    with open(path) as fh:
        doc = json.load(fh)
    try:
        universe = doc["universe"]
        sig = Signature(doc["signature"])
        values = doc.get("values", {})
    except KeyError as exc:
        raise ModelError(f"model file {path} is missing key {exc}") from None
    return load_interpretation(universe, sig, semiring, values)


def gaifman_graph(pi: Interpretation) -> GaifmanGraph:
    return pi.gaifman_graph()


def evaluate_reduct_graph(pi: Interpretation, rels) -> GaifmanGraph:
    """Gaifman graph of the reduct to the given relation subset (cached)."""
    return pi.gaifman_graph(frozenset(rels))


def ball(pi: Interpretation, radius: int, elements: Sequence[str]) -> tuple:
    for a in elements:
        if a not in pi._index:
            raise ModelError(f"unknown element {a!r}")
    return pi.gaifman_graph().ball(radius, elements)


@dataclass
class Neighborhood:
    """Induced sub-interpretation on a ball with a distinguished tuple."""

    interpretation: Interpretation
    centers: tuple
    radius: int

    @property
    def carrier(self) -> tuple:
        return self.interpretation.universe

    def __repr__(self):
        return f"Neighborhood(r={self.radius}, centers={self.centers}, {self.interpretation!r})"


def neighborhood(pi: Interpretation, radius: int, centers: Sequence[str]) -> Neighborhood:
    carrier = ball(pi, radius, centers)
    inside = set(carrier)
    values = {
        (rel, args): v
        for (rel, args), v in pi.nonzero_literals().items()
        if all(a in inside for a in args)
    }
    sub = Interpretation(carrier, pi.sig, pi.semiring, values)
    return Neighborhood(sub, tuple(centers), radius)


def _element_profile(pi: Interpretation, elem: str):
    touching = sorted(
        (rel, tuple(i for i, a in enumerate(args) if a == elem), pi.semiring.token(v))
        for (rel, args), v in pi.nonzero_literals().items()
        if elem in args
    )
    return tuple(touching)


def neighborhood_iso(n1: Neighborhood, n2: Neighborhood) -> bool:
    """Decide whether a bijection mapping the distinguished tuples onto
    each other and preserving all literal values exists; backtracking with
    per-element profile pruning."""
    a, b = n1.interpretation, n2.interpretation
    if a.sig != b.sig or a.semiring.name != b.semiring.name:
        return False
    if len(a.universe) != len(b.universe) or len(n1.centers) != len(n2.centers):
        return False
    mapping: dict = {}
    used = set()
    for x, y in zip(n1.centers, n2.centers):
        if mapping.get(x, y) != y:
            return False
        mapping[x] = y
        used.add(y)
    if len(set(mapping.values())) != len(set(mapping.keys())):
        return False

    prof_a = {e: _element_profile(a, e) for e in a.universe}
    prof_b = {e: _element_profile(b, e) for e in b.universe}
    if sorted(prof_a.values()) != sorted(prof_b.values()):
        return False
    for x, y in mapping.items():
        if prof_a[x] != prof_b[y]:
            return False

    lits_a = a.nonzero_literals()
    lits_b = b.nonzero_literals()
    if len(lits_a) != len(lits_b):
        return False
    rest = [e for e in a.universe if e not in mapping]

    def consistent(m: dict) -> bool:
        dom = set(m)
        for (rel, args), v in lits_a.items():
            if all(x in dom for x in args):
                if lits_b.get((rel, tuple(m[x] for x in args))) != v:
                    return False
        img = set(m.values())
        inv = {y: x for x, y in m.items()}
        for (rel, args), v in lits_b.items():
            if all(y in img for y in args):
                if lits_a.get((rel, tuple(inv[y] for y in args))) != v:
                    return False
        return True

    if not consistent(mapping):
        return False

    def backtrack(i: int) -> bool:
        if i == len(rest):
            return True
        x = rest[i]
        for y in b.universe:
            if y in used or prof_a[x] != prof_b[y]:
                continue
            mapping[x] = y
            used.add(y)
            if consistent(mapping) and backtrack(i + 1):
                return True
            del mapping[x]
            used.remove(y)
        return False

    return backtrack(0)


def is_partial_isomorphism(pa: Interpretation, pb: Interpretation,
                           pairs: Sequence[tuple]) -> bool:
    """Check that the finite map {a -> b} preserves all literal values on
    literals instantiated entirely inside its domain."""
    mapping = {}
    for a, b in pairs:
        if mapping.get(a, b) != b:
            return False
        mapping[a] = b
    if len(set(mapping.values())) != len(mapping):
        return False
    dom = list(mapping)
    import itertools as it
    for rel, arity in pa.sig.relations.items():
        for args in it.product(dom, repeat=arity):
            img = tuple(mapping[x] for x in args)
            if pa.value(rel, args) != pb.value(rel, img):
                return False
            if pa.neg_value(rel, args) != pb.neg_value(rel, img):
                return False
    return True


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

class Evaluator:
    """Structural evaluation of a formula over one interpretation.

    Conjunction/universal quantification fold with mul, disjunction and
    existential quantification with add, in universe order.  Ball
    quantifiers range over the ball in the Gaifman graph of the
    quantifier's signature reduct; outside quantifiers over its
    complement.  Scattered quantifiers and distance atoms are evaluated
    directly, exactly as their desugared forms prescribe.

    With dual=True the formula is read over the dual semiring: add/mul
    and the 0/1 constants swap while literal values, the derivation of
    negative literals and the Gaifman graph stay those of the original
    interpretation (reading the same valuation over the dual order).
    Closed subformulas are memoized per interpretation.
    """

    def __init__(self, pi: Interpretation, dual: bool = False):
        self.pi = pi
        self.dual = dual
        spec = pi.semiring
        if dual:
            self.add = spec.mul
            self.mul = spec.add
            self.zero = spec.one
            self.one = spec.zero
        else:
            self.add = spec.add
            self.mul = spec.mul
            self.zero = spec.zero
            self.one = spec.one
        self._memo = pi._eval_memo

    def run(self, f: Formula, sigma: Optional[Mapping[str, str]] = None):
        sigma = dict(sigma or {})
        missing = f.free - set(sigma)
        if missing:
            raise EvaluationError(f"unassigned free variables: {sorted(missing)}")
        return self._eval(f, sigma)

    def _graph(self, rels: Optional[frozenset]) -> GaifmanGraph:
        return self.pi.gaifman_graph(rels)

    def _eval(self, f: Formula, sigma: dict):
        if f.free:
            key = (f, self.dual, tuple(sorted((v, sigma[v]) for v in f.free)))
        else:
            key = (f, self.dual)
        if key in self._memo:
            return self._memo[key]
        val = self._eval_inner(f, sigma)
        self._memo[key] = val
        return val

    def _eval_inner(self, f: Formula, sigma: dict):
        pi = self.pi
        if isinstance(f, F.PosAtom):
            return pi.value(f.rel, tuple(sigma[a] for a in f.args))
        if isinstance(f, F.NegAtom):
            pos = pi.value(f.rel, tuple(sigma[a] for a in f.args))
            return self.one if pos == pi.semiring.zero else self.zero
        if isinstance(f, F.Eq):
            return self.one if sigma[f.left] == sigma[f.right] else self.zero
        if isinstance(f, F.Neq):
            return self.zero if sigma[f.left] == sigma[f.right] else self.one
        if isinstance(f, F.TrueAtom):
            return self.one
        if isinstance(f, F.FalseAtom):
            return self.zero
        if isinstance(f, F.DistLeq):
            d = self._graph(None).d(sigma[f.left], sigma[f.right])
            return self.one if d <= f.bound else self.zero
        if isinstance(f, F.DistGt):
            d = self._graph(None).d(sigma[f.left], sigma[f.right])
            return self.one if d > f.bound else self.zero
        if isinstance(f, F.And):
            acc = self.one
            for c in f.children:
                acc = self.mul(acc, self._eval(c, sigma))
            return acc
        if isinstance(f, F.Or):
            acc = self.zero
            for c in f.children:
                acc = self.add(acc, self._eval(c, sigma))
            return acc
        if isinstance(f, F.Exists):
            return self._fold(f.var, f.body, pi.universe, sigma, self.add, self.zero)
        if isinstance(f, F.Forall):
            return self._fold(f.var, f.body, pi.universe, sigma, self.mul, self.one)
        if isinstance(f, F.BallExists):
            dom = self._graph(f.sig).ball(f.radius, [sigma[c] for c in f.centers])
            return self._fold(f.var, f.body, dom, sigma, self.add, self.zero)
        if isinstance(f, F.BallForall):
            dom = self._graph(f.sig).ball(f.radius, [sigma[c] for c in f.centers])
            return self._fold(f.var, f.body, dom, sigma, self.mul, self.one)
        if isinstance(f, F.OutsideForall):
            dom = self._graph(None).outside(f.radius, [sigma[c] for c in f.centers])
            return self._fold(f.var, f.body, dom, sigma, self.mul, self.one)
        if isinstance(f, F.OutsideExists):
            dom = self._graph(None).outside(f.radius, [sigma[c] for c in f.centers])
            return self._fold(f.var, f.body, dom, sigma, self.add, self.zero)
        if isinstance(f, F.ScatteredExists):
            return self._scattered(f, sigma)
        if isinstance(f, F.ScatteredForall):
            return self._scattered(f, sigma)
        raise EvaluationError(f"cannot evaluate node {type(f).__name__}")

    def _fold(self, var: str, body: Formula, domain, sigma: dict, op, neutral):
        acc = neutral
        for elem in domain:
            sigma[var] = elem
            acc = op(acc, self._eval(body, sigma))
        sigma.pop(var, None)
        return acc

    def _scattered(self, f, sigma: dict):
        # Esc r ys . t  ==  E y1 .. E ym . (AND_{i<j} d(yi,yj) > 2r  &  t)
        # Asc r ys . t  ==  A y1 .. A ym . (OR_{i<j} d(yi,yj) <= 2r | t)
        # Evaluated per tuple exactly as the desugared form prescribes; for
        # the A-kind each close pair contributes a summand 1, which matters
        # in semirings with non-idempotent addition.
        graph = self._graph(None)
        m = len(f.vars_)
        exists_kind = isinstance(f, F.ScatteredExists)
        op = self.add if exists_kind else self.mul
        acc = self.zero if exists_kind else self.one
        import itertools as it
        for tup in it.product(self.pi.universe, repeat=m):
            close = sum(
                1
                for i in range(m) for j in range(i + 1, m)
                if graph.d(tup[i], tup[j]) <= 2 * f.radius
            )
            if exists_kind:
                if close:
                    continue  # a false guard annihilates the conjunction
                for v, e in zip(f.vars_, tup):
                    sigma[v] = e
                term = self._eval(f.body, sigma)
            else:
                for v, e in zip(f.vars_, tup):
                    sigma[v] = e
                term = self._eval(f.body, sigma)
                for _ in range(close):
                    term = self.add(term, self.one)
            acc = op(acc, term)
        for v in f.vars_:
            sigma.pop(v, None)
        return acc


def evaluate(pi: Interpretation, f: Formula, sigma: Optional[Mapping[str, str]] = None, *,
             dual: bool = False):
    """Value of f(sigma) in pi; with dual=True, the value of f read over
    the dual semiring (see Evaluator)."""
    return Evaluator(pi, dual=dual).run(f, sigma)

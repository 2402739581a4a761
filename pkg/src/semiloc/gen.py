"""Seeded random generators for formulae and interpretations, used by the
property and acceptance tests (duality identities, involution checks,
round trips)."""

from __future__ import annotations

import itertools
import random
from typing import Optional, Sequence

from . import formula as F
from .formula import Formula, Signature
from .semiring import SemiringSpec
from .semantics import Interpretation


def random_formula(rng: random.Random, sig: Signature, scope: Sequence[str] = (),
                   depth: int = 3, allow_sugar: bool = True) -> Formula:
    """A random well-formed formula with free variables among `scope`."""
    scope = list(scope)

    def atom() -> Formula:
        kinds = ["rel", "rel", "eq", "const"]
        if allow_sugar:
            kinds.append("dist")
        kind = rng.choice(kinds)
        if kind == "rel" or not scope:
            rel = rng.choice(sorted(sig.relations))
            if not scope:
                return F.TRUE
            args = tuple(rng.choice(scope) for _ in range(sig.arity(rel)))
            return (F.PosAtom if rng.random() < 0.7 else F.NegAtom)(rel, args)
        if kind == "eq":
            a, b = rng.choice(scope), rng.choice(scope)
            return (F.Eq if rng.random() < 0.5 else F.Neq)(a, b)
        if kind == "dist":
            a, b = rng.choice(scope), rng.choice(scope)
            bound = rng.randrange(0, 3)
            return (F.DistLeq if rng.random() < 0.5 else F.DistGt)(a, b, bound)
        return F.TRUE if rng.random() < 0.5 else F.FALSE

    def go(d: int, scope: list) -> Formula:
        if d <= 0 or rng.random() < 0.2:
            return atom()
        choice = rng.random()
        if choice < 0.3:
            k = rng.randint(2, 3)
            node = F.And if rng.random() < 0.5 else F.Or
            return node(tuple(go(d - 1, scope) for _ in range(k)))
        v = F.fresh_var("_g")
        if choice < 0.55 or not scope:
            q = F.Exists if rng.random() < 0.5 else F.Forall
            return q(v, go(d - 1, scope + [v]))
        if choice < 0.8:
            centers = (rng.choice(scope),)
            radius = rng.randrange(0, 3)
            q = F.BallExists if rng.random() < 0.5 else F.BallForall
            return q(v, radius, centers, None, go(d - 1, scope + [v]))
        if choice < 0.9 and allow_sugar:
            centers = (rng.choice(scope),)
            radius = rng.randrange(0, 3)
            q = F.OutsideForall if rng.random() < 0.5 else F.OutsideExists
            return q(v, radius, centers, go(d - 1, scope + [v]))
        if allow_sugar:
            v2 = F.fresh_var("_g")
            radius = rng.randrange(0, 2)
            q = F.ScatteredExists if rng.random() < 0.5 else F.ScatteredForall
            return q((v, v2), radius, go(d - 1, scope + [v, v2]))
        return F.Exists(v, go(d - 1, scope + [v]))

    return go(depth, scope)


def random_interpretation(rng: random.Random, sig: Signature, spec: SemiringSpec,
                          size: int, palette: Optional[Sequence] = None) -> Interpretation:
    universe = [f"e{i}" for i in range(size)]
    if palette is None:
        palette = spec.elements()
    values = {}
    for rel in sorted(sig.relations):
        for args in itertools.product(universe, repeat=sig.arity(rel)):
            values[(rel, args)] = rng.choice(list(palette))
    return Interpretation(universe, sig, spec, values)

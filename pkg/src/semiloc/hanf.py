"""Hanf locality machinery: bijective r-equivalence of pointed
interpretations, the census condition with threshold t, the radius and
threshold recurrences, and back-and-forth system construction with
exhaustive verification of the extension property."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

from .formula import Formula, quantifier_rank
from .semantics import Interpretation, Neighborhood, neighborhood, neighborhood_iso, evaluate


class HanfError(Exception):
    pass


@dataclass
class IsoTypeCensus:
    """Isomorphism-type census of single-center r-neighborhoods: pairwise
    non-isomorphic representatives with multiplicities summing to |A|."""

    radius: int
    entries: list  # of (Neighborhood, multiplicity)

    @property
    def total(self) -> int:
        return sum(m for _, m in self.entries)


def neighborhood_census(pi: Interpretation, r: int) -> IsoTypeCensus:
    entries: list = []
    for elem in pi.universe:
        nb = neighborhood(pi, r, (elem,))
        for i, (rep, count) in enumerate(entries):
            if neighborhood_iso(nb, rep):
                entries[i] = (rep, count + 1)
                break
        else:
            entries.append((nb, 1))
    return IsoTypeCensus(r, entries)


def hanf_r_equivalent(pa: Interpretation, a: Sequence[str],
                      pb: Interpretation, b: Sequence[str], r: int) -> bool:
    """Bijective r-equivalence of pointed interpretations: a bijection f
    with B_r(a,c) isomorphic to B_r(b,f(c)) for all c.  Decided by
    classifying elements by the iso type of their pointed neighborhood and
    comparing class multiplicities."""
    a, b = tuple(a), tuple(b)
    if len(a) != len(b):
        raise HanfError(f"tuple lengths differ: {len(a)} vs {len(b)}")
    if len(pa.universe) != len(pb.universe):
        return False
    classes: list = []  # (representative Neighborhood, count_a, count_b)
    for side, (pi, base) in enumerate(((pa, a), (pb, b))):
        for c in pi.universe:
            nb = neighborhood(pi, r, base + (c,))
            for i, (rep, ca, cb) in enumerate(classes):
                if neighborhood_iso(nb, rep):
                    classes[i] = (rep, ca + (side == 0), cb + (side == 1))
                    break
            else:
                classes.append((nb, int(side == 0), int(side == 1)))
    return all(ca == cb for _, ca, cb in classes)


def hanf_rt_equivalent(pa: Interpretation, pb: Interpretation, r: int, t: int) -> bool:
    """Census condition: every iso type of single-center r-neighborhoods
    is realised equally often on both sides, or at least t times on both."""
    if pa.sig != pb.sig or pa.semiring.name != pb.semiring.name:
        raise HanfError("interpretations must share signature and semiring")
    ca = neighborhood_census(pa, r)
    cb = list(neighborhood_census(pb, r).entries)
    for rep, count in ca.entries:
        match = None
        for i, (rep_b, count_b) in enumerate(cb):
            if neighborhood_iso(rep, rep_b):
                match = i
                break
        other = cb.pop(match)[1] if match is not None else 0
        if count != other and not (count >= t and other >= t):
            return False
    return all(False for _ in cb) if cb else True


@dataclass
class HanfParameters:
    """Radius/threshold recurrence: r_0 = 0, r_{i+1} = 3 r_i + 1,
    r = r_{m-1}; e = 1 + l + ... + l^r bounds the ball size at degree l;
    t = m*e + 1."""

    m: int
    degree: int
    r: int
    e: int
    t: int
    radii: tuple  # (r_0, ..., r_{m-1})


def radius_sequence(count: int) -> tuple:
    out = [0]
    while len(out) < count:
        out.append(3 * out[-1] + 1)
    return tuple(out[:count])


def hanf_parameters(m: int, degree: int) -> HanfParameters:
    if m < 1:
        raise HanfError("quantifier rank m must be >= 1")
    if degree < 0:
        raise HanfError("degree bound must be >= 0")
    radii = radius_sequence(m)
    r = radii[-1]
    e = sum(degree ** i for i in range(r + 1))
    t = m * e + 1
    return HanfParameters(m, degree, r, e, t, radii)


@dataclass
class BackAndForthSystem:
    """Sequence (I_j)_{j<=m} of sets of partial isomorphisms (as tuple
    pairs); I_m contains the empty map and each I_{j+1} has back-and-forth
    extensions in I_j."""

    m: int
    radii: tuple
    levels: dict  # j -> set of (a-tuple, b-tuple)

    def size(self) -> int:
        return sum(len(s) for s in self.levels.values())


def build_back_and_forth(pa: Interpretation, pb: Interpretation, m: int,
                         radii: Optional[Sequence[int]] = None) -> Optional[BackAndForthSystem]:
    """Construct I_j = { a->b : |a| = |b| = m-j and B_{r_j}(a) iso
    B_{r_j}(b) } and verify the extension property exhaustively; returns
    None if the verification fails (including I_j empty too early)."""
    if radii is None:
        radii = radius_sequence(m)
    radii = tuple(radii)
    if len(radii) != m:
        raise HanfError(f"expected {m} radii, got {len(radii)}")

    def classify(pi: Interpretation, tuples: list, r: int) -> dict:
        reps: list = []
        out = {}
        for tup in tuples:
            nb = neighborhood(pi, r, tup)
            for idx, rep in enumerate(reps):
                if neighborhood_iso(nb, rep):
                    out[tup] = idx
                    break
            else:
                reps.append(nb)
                out[tup] = len(reps) - 1
        return out

    levels: dict = {m: {((), ())}}
    for j in range(m - 1, -1, -1):
        size = m - j
        r = radii[j]
        tuples_a = list(itertools.product(pa.universe, repeat=size))
        tuples_b = list(itertools.product(pb.universe, repeat=size))
        # classify jointly so representative indices agree across sides
        joint: list = []
        class_a = {}
        class_b = {}
        for pi, tuples, store in ((pa, tuples_a, class_a), (pb, tuples_b, class_b)):
            for tup in tuples:
                nb = neighborhood(pi, r, tup)
                for idx, rep in enumerate(joint):
                    if neighborhood_iso(nb, rep):
                        store[tup] = idx
                        break
                else:
                    joint.append(nb)
                    store[tup] = len(joint) - 1
        level = {
            (ta, tb)
            for ta in tuples_a for tb in tuples_b
            if class_a[ta] == class_b[tb]
        }
        if not level:
            return None
        levels[j] = level

    system = BackAndForthSystem(m, radii, levels)
    return system if _verify_extensions(system, pa, pb) else None


def _verify_extensions(system: BackAndForthSystem, pa: Interpretation,
                       pb: Interpretation) -> bool:
    if ((), ()) not in system.levels[system.m]:
        return False
    for j in range(system.m - 1, -1, -1):
        upper = system.levels[j + 1]
        lower = system.levels[j]
        for ta, tb in upper:
            for c in pa.universe:
                if not any((ta + (c,), tb + (d,)) in lower for d in pb.universe):
                    return False
            for d in pb.universe:
                if not any((ta + (c,), tb + (d,)) in lower for c in pa.universe):
                    return False
    return True


def check_m_equivalence(pa: Interpretation, pb: Interpretation, m: int,
                        pool: Sequence[Formula]) -> bool:
    """True iff evaluation agrees on every pool sentence.  Sentences of
    quantifier rank above m are rejected; for the implication from a
    back-and-forth system the semiring should be fully idempotent."""
    for psi in pool:
        qr = quantifier_rank(psi)
        if qr > m:
            raise HanfError(f"pool sentence has quantifier rank {qr} > {m}: {psi!r}")
        if psi.free:
            raise HanfError(f"pool formula is not a sentence: {psi!r}")
        if evaluate(pa, psi) != evaluate(pb, psi):
            return False
    return True


def sentence_pool(sig, m: int = 2) -> list:
    """Deterministic pool of sentences of quantifier rank <= m: prenex
    prefixes over x, y with matrices that are literals or one And/Or of
    two distinct literals (connective depth <= 2), deduplicated."""
    from . import formula as F
    if m < 1 or m > 2:
        raise HanfError("the generated pool supports m in {1, 2}")

    def literals(scope: tuple) -> list:
        out = []
        for rel in sorted(sig.relations):
            for args in itertools.product(scope, repeat=sig.arity(rel)):
                out.append(F.PosAtom(rel, args))
                out.append(F.NegAtom(rel, args))
        if len(scope) == 2:
            out.append(F.Eq(scope[0], scope[1]))
            out.append(F.Neq(scope[0], scope[1]))
        return out

    def matrices(scope: tuple) -> list:
        lits = literals(scope)
        out = list(lits)
        for i, a in enumerate(lits):
            for b in lits[i + 1:]:
                out.append(F.And((a, b)))
                out.append(F.Or((a, b)))
        return out

    pool: list = []
    seen = set()

    def emit(f: Formula):
        if f not in seen:
            seen.add(f)
            pool.append(f)

    for mat in matrices(("x",)):
        emit(F.Exists("x", mat))
        emit(F.Forall("x", mat))
    if m >= 2:
        for mat in matrices(("x", "y")):
            if "y" not in mat.free:
                continue
            for q1 in (F.Exists, F.Forall):
                for q2 in (F.Exists, F.Forall):
                    emit(q1("x", q2("y", mat)))
    return pool

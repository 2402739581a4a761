"""Constructive Gaifman-normal-form pipeline for sentences over min-max
semirings, exposed as composable rewriting steps with a top-level driver.

Every rewrite here is a minmax-equivalence: it preserves values over
every min-max semiring (and lattice semirings, via the threshold
homomorphism argument), but not over semirings with non-idempotent
operations.  The oracle test suite certifies each step by exhaustive
evaluation at desk scale.

The pipeline comes in two mirrored polarities.  The existential mode
handles E*- and E*A*-sentences; the universal mode is the min/max
exchanged image handling A*- and A*E*-sentences.  The mirror swaps the
constructed quantifiers and connectives but keeps the semantic facts
both proofs share: literals split by a configuration are replaced by
the constants they evaluate to, and distance guards keep the polarity
their role dictates.  (Conjugating by the syntactic dual instead would
be unsound: dualization does not preserve minmax-equivalence, because
equalities and distance formulae keep their standard semantics.)
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

from . import formula as F
from .formula import (
    And, Or, Exists, Forall, BallExists, BallForall, OutsideForall,
    OutsideExists, ScatteredExists, ScatteredForall, PosAtom, NegAtom,
    Eq, Neq, TrueAtom, FalseAtom, DistLeq, DistGt, TRUE, FALSE,
    Formula, alpha_rename, alpha_normal, fresh_var, locality_radius,
    polarity, simplify, substitute,
)


class GaifmanError(Exception):
    """Pipeline precondition violated (unexpected shape, crossing literal)."""


# ---------------------------------------------------------------------------
# Partitions, configurations, clustering
# ---------------------------------------------------------------------------

def partitions_iter(n: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    """All set partitions of {0..n-1} in restricted-growth-string order;
    classes are listed by first occurrence, so class representatives are
    the minimal indices."""
    if n == 0:
        yield ()
        return
    s = [0] * n
    while True:
        blocks: dict = {}
        for i, b in enumerate(s):
            blocks.setdefault(b, []).append(i)
        yield tuple(tuple(blocks[b]) for b in sorted(blocks))
        i = n - 1
        while i > 0 and s[i] > max(s[:i]):
            i -= 1
        if i == 0:
            return
        s[i] += 1
        for j in range(i + 1, n):
            s[j] = 0


@dataclass(frozen=True)
class Partition:
    """Partition of tuple indices 0..n-1 with minimal-index representatives."""

    classes: tuple  # of tuples of ints

    def __post_init__(self):
        seen: set = set()
        for cls in self.classes:
            if not cls or sorted(cls) != list(cls):
                raise GaifmanError(f"classes must be nonempty and sorted: {self.classes}")
            if seen & set(cls):
                raise GaifmanError("classes overlap")
            seen.update(cls)
        if seen != set(range(len(seen))):
            raise GaifmanError("classes must cover 0..n-1")

    @property
    def n(self) -> int:
        return sum(len(c) for c in self.classes)

    @property
    def k(self) -> int:
        return len(self.classes)

    @property
    def representatives(self) -> tuple:
        return tuple(cls[0] for cls in self.classes)

    def is_discrete(self) -> bool:
        return all(len(c) == 1 for c in self.classes)


@dataclass(frozen=True)
class Configuration:
    """Configuration (P, r): class members within 5^(n-k) r - r of their
    representative, representatives more than 4 * 5^(n-k) r apart."""

    partition: Partition
    r: int

    def check(self, dist) -> bool:
        P, r = self.partition, self.r
        s = 5 ** (P.n - P.k) * r
        for cls in P.classes:
            rep = cls[0]
            for i in cls:
                if dist(rep, i) > s - r:
                    return False
        for a, b in itertools.combinations(P.representatives, 2):
            if dist(a, b) <= 4 * s:
                return False
        return True


def cluster_tuple(dist, n: int, r: int) -> Partition:
    """Partition certifying configuration (P, r) against the distances:
    starting from singletons, repeatedly merge the lexicographically
    smallest pair of classes whose representatives violate the scattering
    condition; merging preserves the closeness condition."""
    classes = [[i] for i in range(n)]
    while True:
        k = len(classes)
        s = 5 ** (n - k) * r
        merged = False
        for a, b in itertools.combinations(range(k), 2):
            if dist(classes[a][0], classes[b][0]) <= 4 * s:
                classes[a] = sorted(classes[a] + classes[b])
                del classes[b]
                merged = True
                break
        if not merged:
            break
    part = Partition(tuple(tuple(c) for c in sorted(classes)))
    if not Configuration(part, r).check(dist):
        raise GaifmanError("clustering failed to certify its configuration")
    return part


# ---------------------------------------------------------------------------
# Structural helpers
# ---------------------------------------------------------------------------

def flatten_and(f: Formula) -> list:
    if isinstance(f, And):
        out = []
        for c in f.children:
            out.extend(flatten_and(c))
        return out
    if isinstance(f, TrueAtom):
        return []
    return [f]


def flatten_or(f: Formula) -> list:
    if isinstance(f, Or):
        out = []
        for c in f.children:
            out.extend(flatten_or(c))
        return out
    if isinstance(f, FalseAtom):
        return []
    return [f]


def mk_and(parts: Sequence[Formula]) -> Formula:
    # constant folding is sound here: the pipeline works over min-max
    # semirings, where 0 and 1 are the extremes
    if any(isinstance(p, FalseAtom) for p in parts):
        return FALSE
    parts = [p for p in parts if not isinstance(p, TrueAtom)]
    if not parts:
        return TRUE
    return parts[0] if len(parts) == 1 else And(tuple(parts))


def mk_or(parts: Sequence[Formula]) -> Formula:
    if any(isinstance(p, TrueAtom) for p in parts):
        return TRUE
    parts = [p for p in parts if not isinstance(p, FalseAtom)]
    if not parts:
        return FALSE
    return parts[0] if len(parts) == 1 else Or(tuple(parts))


def ball_chain(variables: Sequence[str], radius: int, centers, body: Formula,
               kind=BallExists, sig=None) -> Formula:
    """Nested single-variable ball quantifiers, all around the same
    center(s)."""
    centers = (centers,) if isinstance(centers, str) else tuple(centers)
    out = body
    for v in reversed(list(variables)):
        out = kind(v, radius, centers, sig, out)
    return out


def exists_chain(variables: Sequence[str], body: Formula) -> Formula:
    out = body
    for v in reversed(list(variables)):
        out = Exists(v, out)
    return out


def forall_chain(variables: Sequence[str], body: Formula) -> Formula:
    out = body
    for v in reversed(list(variables)):
        out = Forall(v, out)
    return out


def split_multicenter(f: Formula) -> Formula:
    """Rewrite every multi-center ball quantifier into the idempotent
    union decomposition (E over a union of balls = Or of per-center E;
    dually for A).  Minmax-equivalent only."""
    if isinstance(f, F.ATOMS):
        return f
    if isinstance(f, F.BALL) and len(f.centers) > 1:
        body = split_multicenter(f.body)
        parts = [type(f)(f.var, f.radius, (c,), f.sig, body) for c in f.centers]
        return mk_or(parts) if isinstance(f, BallExists) else mk_and(parts)
    return F.replace_children(f, [split_multicenter(c) for c in F.children_of(f)])


def measured_locality(f: Formula, around: Sequence[str]) -> int:
    rad = locality_radius(f, around)
    if rad is None:
        raise GaifmanError(f"not a local formula (plain/outside quantifier inside): {f!r}")
    return rad


# ---------------------------------------------------------------------------
# Pipeline polarity modes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mode:
    """Constructor table for one polarity of the pipeline.

    In the existential mode the main quantifiers are E/Esc/Eball, parts
    of a requirement combine with `both` (= and), alternatives with
    `some` (= or), the residual quantifier is OutsideForall, and far
    guards are d > .. atoms combined into requirements.  The universal
    mode is the min/max exchanged mirror image.
    """

    name: str
    univ: bool
    plain: type               # main plain quantifier
    co_plain: type
    sc: type                  # main scattered quantifier
    ball: type                # main ball quantifier
    co_ball: type
    out: type                 # residual outside quantifier
    both: Callable            # combine required parts
    some: Callable            # combine alternatives
    neutral_both: Formula     # value of the empty `both`
    neutral_some: Formula
    far_guard: type           # admissibility guard between scattered elements
    near_guard: type          # exemption guard near a center

    def chain(self, variables, body):
        out = body
        for v in reversed(list(variables)):
            out = self.plain(v, out)
        return out

    def co_chain(self, variables, body):
        out = body
        for v in reversed(list(variables)):
            out = self.co_plain(v, out)
        return out

    def strip_plain(self, f: Formula):
        vs = []
        while isinstance(f, self.plain):
            vs.append(f.var)
            f = f.body
        return vs, f

    def strip_co_plain(self, f: Formula):
        vs = []
        while isinstance(f, self.co_plain):
            vs.append(f.var)
            f = f.body
        return vs, f

    def flatten_both(self, f: Formula) -> list:
        return flatten_and(f) if not self.univ else flatten_or(f)

    def flatten_some(self, f: Formula) -> list:
        return flatten_or(f) if not self.univ else flatten_and(f)

    def exempt_tuple(self, v: str, targets: Sequence[str], bound: int) -> Formula:
        """Exemption 'v is near the tuple' (existential mode) or 'v is far
        from the tuple' (universal mode); neutral when targets is empty."""
        if not self.univ:
            return mk_or([DistLeq(v, t, bound) for t in targets])
        return mk_and([DistGt(v, t, bound) for t in targets])

    def other(self) -> "Mode":
        return UNIV_MODE if not self.univ else EXIST_MODE


EXIST_MODE = Mode(
    name="existential", univ=False,
    plain=Exists, co_plain=Forall, sc=ScatteredExists,
    ball=BallExists, co_ball=BallForall, out=OutsideForall,
    both=mk_and, some=mk_or, neutral_both=TRUE, neutral_some=FALSE,
    far_guard=DistGt, near_guard=DistLeq,
)

UNIV_MODE = Mode(
    name="universal", univ=True,
    plain=Forall, co_plain=Exists, sc=ScatteredForall,
    ball=BallForall, co_ball=BallExists, out=OutsideExists,
    both=mk_or, some=mk_and, neutral_both=FALSE, neutral_some=TRUE,
    far_guard=DistLeq, near_guard=DistGt,
)


# ---------------------------------------------------------------------------
# Ball prenexing, anchors, split literals, separation
# ---------------------------------------------------------------------------

def _ball_prenex(f: Formula):
    """Hoist single-center ball quantifiers of a local formula to a prefix
    (minmax-sound; balls are nonempty).  Returns (prefix, matrix) where
    prefix entries are (cls, var, radius, centers, sig) in binding order."""
    f = alpha_rename(f)
    prefix: list = []

    def go(g: Formula) -> Formula:
        if isinstance(g, F.ATOMS):
            return g
        if isinstance(g, F.BALL):
            prefix.append((type(g), g.var, g.radius, g.centers, g.sig))
            return go(g.body)
        if isinstance(g, (And, Or)):
            return F.replace_children(g, [go(c) for c in g.children])
        raise GaifmanError(f"not a local formula: contains {type(g).__name__}")

    matrix = go(f)
    return prefix, matrix


def _anchor_env(prefix, group_of: dict) -> dict:
    """Map each prefix-bound variable to the set of group indices its
    center chain reaches."""
    env: dict = {}

    def anchors_of(c: str) -> frozenset:
        if c in group_of:
            return frozenset((group_of[c],))
        return env.get(c, frozenset())

    for _cls, var, _radius, centers, _sig in prefix:
        acc = frozenset()
        for c in centers:
            acc |= anchors_of(c)
        env[var] = acc
    return env


def _literal_groups(lit: Formula, group_of: dict, env: dict) -> frozenset:
    acc = frozenset()
    for v in lit.free:
        if v in group_of:
            acc |= frozenset((group_of[v],))
        else:
            acc |= env.get(v, frozenset())
    return acc


_POSITIVE_KIND = (PosAtom, Eq, DistLeq)
_NEGATIVE_KIND = (NegAtom, Neq, DistGt)


def replace_split_literals(f: Formula, groups: Sequence[Sequence[str]],
                           class_of_group=None) -> Formula:
    """Replace literals whose variables are anchored in two or more
    (classes of) groups: positive literals, equalities and d<= atoms by
    false; negative literals, inequalities and d> atoms by true.

    These are the values such literals take on tuples in the
    corresponding configuration, because cross-class instances are
    farther apart than any radius occurring in the formula; the rule is
    shared by both pipeline polarities."""
    group_of = {v: i for i, vs in enumerate(groups) for v in vs}
    if class_of_group is None:
        class_of_group = {i: i for i in range(len(groups))}

    def go(g: Formula, env: dict) -> Formula:
        if isinstance(g, F.ATOMS):
            touched = {class_of_group[i] for i in _literal_groups(g, group_of, env)}
            if len(touched) > 1:
                return FALSE if isinstance(g, _POSITIVE_KIND) else TRUE
            return g
        if isinstance(g, F.BALL):
            acc = frozenset()
            for c in g.centers:
                acc |= frozenset((group_of[c],)) if c in group_of else env.get(c, frozenset())
            return type(g)(g.var, g.radius, g.centers, g.sig,
                           go(g.body, {**env, g.var: acc}))
        if isinstance(g, (And, Or)):
            return F.replace_children(g, [go(c, env) for c in g.children])
        raise GaifmanError(f"not a local formula: contains {type(g).__name__}")

    return go(f, {})


# Tagged trees: ("leaf", group_index_or_None, Formula) | ("and"/"or", [subtrees])

def _tag_tree(matrix: Formula, group_of: dict, env: dict):
    if isinstance(matrix, (And, Or)):
        kind = "and" if isinstance(matrix, And) else "or"
        return (kind, [_tag_tree(c, group_of, env) for c in matrix.children])
    if isinstance(matrix, F.ATOMS):
        gs = _literal_groups(matrix, group_of, env)
        if len(gs) > 1:
            raise GaifmanError(f"literal crosses separation groups: {F.render(matrix)}")
        return ("leaf", next(iter(gs)) if gs else None, matrix)
    raise GaifmanError(f"unexpected node in separation matrix: {type(matrix).__name__}")


def _tree_dnf(tree, dual: bool = False) -> list:
    """Tagged tree -> list of conjuncts (frozensets of leaves), with
    subsumption pruning.  With dual=True computes the CNF instead."""

    def go(t) -> list:
        if t[0] == "leaf":
            return [frozenset(((t[1], t[2]),))]
        kind, parts = t
        results = [go(p) for p in parts]
        if (kind == "and") != dual:
            acc = [frozenset()]
            for lst in results:
                acc = [a | b for a in acc for b in lst]
                acc = _subsume(acc)
                if len(acc) > 4096:
                    raise GaifmanError("normal form exploded during separation")
            return acc
        merged = []
        for lst in results:
            merged.extend(lst)
        return _subsume(merged)

    return go(tree)


def _subsume(conjuncts: list) -> list:
    out = []
    for c in sorted(set(conjuncts), key=len):
        if not any(prev <= c for prev in out):
            out.append(c)
    return out


def _coarsen(tree):
    """Collapse maximal subtrees whose leaves all carry one group tag (or
    none) into single leaves; keeps later wrapping steps and normal forms
    small.  Wrapping a whole same-group cluster under one ball quantifier
    is sound by distributivity over the nonempty ball."""
    if tree[0] == "leaf":
        return tree
    kind, parts = tree
    parts = [_coarsen(p) for p in parts]
    flat = []
    for p in parts:
        if p[0] == kind:
            flat.extend(p[1])
        else:
            flat.append(p)
    tags = set()

    def collect(t):
        if t[0] == "leaf":
            if t[1] is not None:
                tags.add(t[1])
            return
        for c in t[1]:
            collect(c)

    node = (kind, flat)
    collect(node)
    if len(tags) <= 1:
        tag = next(iter(tags)) if tags else None
        return ("leaf", tag, _tree_to_formula(node))
    return node


def _separate_tagged(phi: Formula, groups: Sequence[Sequence[str]], univ: bool):
    """Core of the separation rewriting: returns a tagged tree whose
    leaves are local formulae around single groups (tag None = variable-
    free part).  Follows the proof: ball-prenex, then from the innermost
    quantifier outward wrap the leaves mentioning the bound variable,
    normalising with DNF for existential and CNF for universal balls;
    group-pure subtrees are coarsened into single leaves between steps."""
    phi = split_multicenter(phi)
    prefix, matrix = _ball_prenex(phi)
    group_of = {v: i for i, vs in enumerate(groups) for v in vs}
    env = _anchor_env(prefix, group_of)
    for _cls, var, _r, _cs, _sig in prefix:
        if len(env[var]) > 1:
            raise GaifmanError(f"ball variable {var!r} is quantified around several groups")
    tree = _coarsen(_tag_tree(matrix, group_of, env))

    def contains_var(t, var) -> bool:
        if t[0] == "leaf":
            return var in t[2].free
        return any(contains_var(c, var) for c in t[1])

    def wrap(t, cls, var, radius, centers, sig, i0):
        # push the quantifier to the subtrees actually mentioning var;
        # distribution over the dual connective only happens where var
        # occurs in several children of the matching connective
        exists = cls is BallExists
        if t[0] == "leaf":
            return ("leaf", i0, cls(var, radius, centers, sig, t[2]))
        kind, parts = t
        var_parts = [p for p in parts if contains_var(p, var)]
        rest = [p for p in parts if not contains_var(p, var)]
        if (kind == "or") == exists or len(var_parts) == 1:
            # the quantifier distributes over this connective, or only one
            # child mentions the variable
            new = [wrap(p, cls, var, radius, centers, sig, i0) for p in var_parts]
            return (kind, rest + new)
        # several children of the dual connective mention var: normalise the
        # var-subtree locally, then wrap each normal-form part
        sub = (kind, var_parts)
        branches = _tree_dnf(sub, dual=not exists)
        rebuilt = []
        for leaves in branches:
            inside = [lf for lf in leaves if var in lf[1].free]
            outside = [lf for lf in leaves if var not in lf[1].free]
            items = [("leaf", t2, frm2) for t2, frm2 in outside]
            inner_parts = [frm2 for _t2, frm2 in inside]
            body = mk_and(inner_parts) if exists else mk_or(inner_parts)
            items.append(("leaf", i0, cls(var, radius, centers, sig, body)))
            rebuilt.append(("and" if exists else "or", items))
        normal = ("or" if exists else "and", rebuilt)
        return (kind, rest + [normal])

    for cls, var, radius, centers, sig in reversed(prefix):
        tags = env[var]
        i0 = next(iter(tags)) if tags else None
        if not contains_var(tree, var):
            continue  # vacuous ball quantifier over a nonempty ball
        tree = _coarsen(wrap(tree, cls, var, radius, centers, sig, i0))
    return tree


def _tree_to_formula(tree) -> Formula:
    if tree[0] == "leaf":
        return tree[2]
    parts = [_tree_to_formula(p) for p in tree[1]]
    return mk_and(parts) if tree[0] == "and" else mk_or(parts)


def separate_local(phi: Formula, groups: Sequence[Sequence[str]]) -> Formula:
    """Split a local formula around disjoint variable groups into a
    positive Boolean combination of formulae each local around a single
    group.  Errors on a literal or quantifier crossing two groups."""
    groups = [tuple(g) for g in groups]
    flat = [v for g in groups for v in g]
    if len(set(flat)) != len(flat):
        raise GaifmanError("separation groups must be disjoint")
    measured_locality(phi, flat)
    tree = _separate_tagged(phi, groups, univ=False)
    return simplify(_tree_to_formula(tree))


def _group_parts(phi: Formula, groups: Sequence[Sequence[str]], mode: Mode) -> list:
    """Main normal form of the separated formula: one dict
    {group_index: [formulas]} per disjunct (existential mode) or clause
    (universal mode); variable-free parts are keyed None."""
    tree = _separate_tagged(phi, groups, mode.univ)
    out = []
    for leaves in _tree_dnf(tree, dual=mode.univ):
        byg: dict = {}
        for tag, frm in leaves:
            byg.setdefault(tag, []).append(frm)
        for key in byg:
            byg[key] = sorted(byg[key], key=F.render)
        out.append(byg)
    return out


# ---------------------------------------------------------------------------
# Abstraction Lemma machinery
# ---------------------------------------------------------------------------

@dataclass
class AbstractionEntry:
    name: str
    original: Formula          # the replaced literal (with its free variables)
    abstracted_vars: tuple     # non-free variables, in literal order
    dummy: bool                # fresh atom carries an unrelated scope variable
    side_condition_ok: bool    # R unary, or a positive literal containing the vars


@dataclass
class AbstractionMap:
    frees: tuple
    entries: list = field(default_factory=list)

    def flagged(self) -> list:
        return [e for e in self.entries if not e.side_condition_ok]

    def names(self) -> set:
        return {e.name for e in self.entries}


def _literal_vars_in_order(lit: Formula) -> tuple:
    if isinstance(lit, (PosAtom, NegAtom)):
        return lit.args
    if isinstance(lit, (Eq, Neq)):
        return (lit.left, lit.right)
    if isinstance(lit, (DistLeq, DistGt)):
        return (lit.left, lit.right)
    return ()


def abstract_atoms(phi: Formula, frees: Sequence[str],
                   fresh_prefix: str = "_R") -> tuple[Formula, AbstractionMap]:
    """Replace every maximal literal (including equalities and distance
    atoms) containing a variable of `frees` by a fresh positive atom over
    its remaining variables; identical literals share one fresh symbol.
    Literals with no remaining variable get a unary fresh atom carried by
    the innermost bound variable in scope.  Entries that violate the
    abstraction side condition (fresh symbol of arity >= 2 not coming
    from a positive literal) are flagged."""
    frees = frozenset(frees)
    amap = AbstractionMap(tuple(sorted(frees)))
    by_literal: dict = {}

    def entry_for(lit: Formula, scope: tuple) -> Formula:
        known = by_literal.get(lit)
        if known is None:
            remaining = []
            for v in _literal_vars_in_order(lit):
                if v not in frees and v not in remaining:
                    remaining.append(v)
            name = fresh_var(fresh_prefix)
            dummy = not remaining
            if dummy and not scope:
                raise GaifmanError(
                    f"cannot abstract variable-free literal {F.render(lit)}: no variable in scope"
                )
            side_ok = len(remaining) <= 1 or isinstance(lit, PosAtom)
            known = AbstractionEntry(name, lit, tuple(remaining), dummy, side_ok)
            by_literal[lit] = known
            amap.entries.append(known)
        args = (scope[-1],) if known.dummy else known.abstracted_vars
        return PosAtom(known.name, args)

    def go(g: Formula, scope: tuple) -> Formula:
        if isinstance(g, F.ATOMS):
            if g.free & frees:
                return entry_for(g, scope)
            return g
        if isinstance(g, (And, Or)):
            return F.replace_children(g, [go(c, scope) for c in g.children])
        if isinstance(g, (Exists, Forall)):
            return type(g)(g.var, go(g.body, scope + (g.var,)))
        if isinstance(g, F.BALL):
            return type(g)(g.var, g.radius, g.centers, g.sig, go(g.body, scope + (g.var,)))
        if isinstance(g, F.OUTSIDE):
            return type(g)(g.var, g.radius, g.centers, go(g.body, scope + (g.var,)))
        if isinstance(g, F.SCATTERED):
            return type(g)(g.vars_, g.radius, go(g.body, scope + g.vars_))
        raise GaifmanError(f"unknown node {type(g).__name__}")

    out = go(phi, ())
    names = frozenset(amap.names())
    if names:
        out = _extend_ball_sigs(out, names)
    return out, amap


def _extend_ball_sigs(f: Formula, names: frozenset) -> Formula:
    if isinstance(f, F.ATOMS):
        return f
    if isinstance(f, F.BALL) and f.sig is not None:
        return type(f)(f.var, f.radius, f.centers, frozenset(f.sig) | names,
                       _extend_ball_sigs(f.body, names))
    return F.replace_children(f, [_extend_ball_sigs(c, names) for c in F.children_of(f)])


def restore_atoms(phi: Formula, amap: AbstractionMap) -> Formula:
    """Substitute the original literals back for the fresh atoms and strip
    the fresh symbols from explicit ball signatures; the inverse of
    abstract_atoms on its image."""
    by_name = {e.name: e for e in amap.entries}
    names = frozenset(by_name)

    def go(g: Formula) -> Formula:
        if isinstance(g, PosAtom) and g.rel in by_name:
            e = by_name[g.rel]
            want = 1 if e.dummy else len(e.abstracted_vars)
            if len(g.args) != want:
                raise GaifmanError(
                    f"fresh symbol {g.rel} used at arity {len(g.args)}, expected {want}"
                )
            if e.dummy:
                return e.original
            mapping = dict(zip(e.abstracted_vars, g.args))
            return substitute(e.original, mapping)
        if isinstance(g, NegAtom) and g.rel in by_name:
            raise GaifmanError(f"fresh symbol {g.rel} occurs negated")
        if isinstance(g, F.ATOMS):
            return g
        if isinstance(g, F.BALL) and g.sig is not None:
            return type(g)(g.var, g.radius, g.centers, frozenset(g.sig) - names, go(g.body))
        return F.replace_children(g, [go(c) for c in F.children_of(g)])

    return go(phi)


# ---------------------------------------------------------------------------
# Local sentence validation
# ---------------------------------------------------------------------------

def validate_local_sentence(f: Formula) -> tuple[bool, list]:
    """True iff f is a positive Boolean combination of basic local
    sentences: scattered quantifiers (or single plain quantifiers) over
    per-variable local formulae within the scattered radius.  Variable-
    free true/false leaves are accepted as degenerate local sentences."""
    diags: list = []

    def basic(g: Formula) -> bool:
        if isinstance(g, (TrueAtom, FalseAtom)):
            return True
        if isinstance(g, (ScatteredExists, ScatteredForall)):
            parts = flatten_and(g.body) if isinstance(g, ScatteredExists) else flatten_or(g.body)
            for p in parts:
                fv = p.free
                if fv - set(g.vars_):
                    diags.append(f"part mentions a non-scattered variable: {F.render(p)}")
                    return False
                if not fv:
                    if locality_radius(p, []) is None:
                        diags.append(f"non-local part under scattered quantifier: {F.render(p)}")
                        return False
                    continue
                if len(fv) != 1:
                    diags.append(f"part mentions several scattered variables: {F.render(p)}")
                    return False
                v = next(iter(fv))
                rad = locality_radius(p, [v])
                if rad is None:
                    diags.append(f"part is not a local formula: {F.render(p)}")
                    return False
                if rad > g.radius:
                    diags.append(
                        f"part is {rad}-local around {v}, exceeding scattered radius {g.radius}"
                    )
                    return False
            return True
        if isinstance(g, (Exists, Forall)):
            fv = g.body.free
            if fv - {g.var}:
                diags.append(f"quantified body has stray free variables: {F.render(g)}")
                return False
            if locality_radius(g.body, [g.var]) is None:
                diags.append(f"plain quantifier over a non-local body: {F.render(g)}")
                return False
            return True
        diags.append(f"not a basic local sentence: {F.render(g)}")
        return False

    def go(g: Formula) -> bool:
        if isinstance(g, (And, Or)):
            return all(go(c) for c in g.children)
        return basic(g)

    return go(f), diags


def check_negation_preservation(inp: Formula, out: Formula) -> bool:
    """Every relation occurring only positively (only negatively, or not
    at all) in the input keeps that status in the output; distance atoms
    reference no relations and are therefore excluded automatically."""
    pin = polarity(inp).by_relation
    pout = polarity(out).by_relation
    for rel in set(pin) | set(pout):
        a = pin.get(rel, "absent")
        b = pout.get(rel, "absent")
        if a == "both":
            continue
        if a == "absent" and b != "absent":
            return False
        if a == "positive-only" and b not in ("positive-only", "absent"):
            return False
        if a == "negative-only" and b not in ("negative-only", "absent"):
            return False
    return True


# ---------------------------------------------------------------------------
# Step 1: asymmetric basic local sentences
# ---------------------------------------------------------------------------

def _per_var_parts(body: Formula, vars_: Sequence[str], mode: Mode) -> dict:
    by_var: dict = {v: [] for v in vars_}
    spare: list = []
    for part in mode.flatten_both(body):
        owners = part.free & set(vars_)
        if part.free - set(vars_):
            raise GaifmanError(f"part mentions a foreign variable: {F.render(part)}")
        if len(owners) > 1:
            raise GaifmanError(f"part mentions several scattered variables: {F.render(part)}")
        if owners:
            by_var[next(iter(owners))].append(part)
        else:
            spare.append(part)
    if spare:
        by_var[vars_[0]].extend(spare)
    return by_var


def _step1(sentence: Formula, mode: Mode) -> Formula:
    """Asymmetric basic local sentences: Esc r {xs} AND_i phi_i(x_i) in the
    existential mode, Asc r {xs} OR_i phi_i(x_i) in the universal one."""
    if isinstance(sentence, mode.plain):
        sentence = mode.sc((sentence.var,),
                           max(0, measured_locality(sentence.body, [sentence.var])),
                           sentence.body)
    if not isinstance(sentence, mode.sc):
        raise GaifmanError(f"expected a {mode.name} scattered sentence, got {F.render(sentence)}")
    vars_, r, body = sentence.vars_, sentence.radius, sentence.body
    by_var = _per_var_parts(body, vars_, mode)
    phis = {v: mode.both(by_var[v]) for v in vars_}
    for v, phi in phis.items():
        rad = measured_locality(phi, [v])
        if rad > r:
            raise GaifmanError(f"part for {v} is {rad}-local, exceeding the scattered radius {r}")
    m = len(vars_)
    if m == 1:
        return sentence

    def inst(phi_owner: str, at: str) -> Formula:
        phi = phis[phi_owner]
        if phi_owner == at:
            return phi
        return substitute(alpha_rename(phi), {phi_owner: at})

    pointwise = mode.sc(
        vars_, 4 * r,
        mode.both([mode.some([inst(w, v) for w in vars_]) for v in vars_]),
    )
    leave_one_out = [
        _step1(mode.sc(
            tuple(v for v in vars_ if v != w), 4 * r,
            mode.both([phis[v] for v in vars_ if v != w]),
        ), mode)
        for w in vars_
    ]
    line1 = mode.both([pointwise] + leave_one_out)

    line2 = []
    for classes in partitions_iter(m):
        part = Partition(classes)
        if part.is_discrete():
            continue
        k = part.k
        s4 = 5 ** (m - k) * 4 * r
        packed = []
        for cls in part.classes:
            rep = vars_[cls[0]]
            if len(cls) == 1:
                packed.append(phis[rep])
                continue
            members = [vars_[i] for i in cls]
            guards = [mode.far_guard(members[i], members[j], 2 * r)
                      for i in range(len(members)) for j in range(i + 1, len(members))]
            inner = mode.both([phis[v] for v in members] + guards)
            packed.append(ball_chain(members[1:], s4 - r, rep, inner, kind=mode.ball))
        reps = tuple(vars_[i] for i in part.representatives)
        line2.append(_step1(mode.sc(reps, 2 * s4, mode.both(packed)), mode))

    return simplify(mode.some([line1] + line2))


def gnf_step1(sentence: Formula) -> Formula:
    """Rewrite Esc r {x1..xm} AND_i phi_i(x_i) into an existential local
    sentence: scattered-at-4r pointwise disjunctions plus leave-one-out
    sentences, together with a disjunction over non-discrete partitions
    whose classes are packed into balls around representatives."""
    return _step1(sentence, EXIST_MODE)


def gnf_step1_univ(sentence: Formula) -> Formula:
    """Mirror image of gnf_step1 for Asc r {x1..xm} OR_i phi_i(x_i)."""
    return _step1(sentence, UNIV_MODE)


# ---------------------------------------------------------------------------
# Step 2: single-block sentences
# ---------------------------------------------------------------------------

def _step2(sentence: Formula, mode: Mode) -> Formula:
    vars_, matrix = mode.strip_plain(sentence)
    if not vars_:
        raise GaifmanError(f"expected a leading {mode.name} block")
    if matrix.free - set(vars_):
        raise GaifmanError("matrix has free variables beyond the quantified block")
    matrix = split_multicenter(matrix)
    r = max(1, measured_locality(matrix, vars_))

    results = []
    for classes in partitions_iter(len(vars_)):
        part = Partition(classes)
        k = part.k
        s = 5 ** (len(vars_) - k) * r
        class_of = {i: ci for ci, cls in enumerate(classes) for i in cls}
        phat = replace_split_literals(
            matrix, [(v,) for v in vars_],
            class_of_group={i: class_of[i] for i in range(len(vars_))},
        )
        phat = simplify(phat)
        if phat == mode.neutral_some:
            continue
        groups = [tuple(vars_[i] for i in cls) for cls in classes]
        for conj in _group_parts(phat, groups, mode):
            packed = []
            for ci, cls in enumerate(classes):
                rep = vars_[cls[0]]
                parts = list(conj.get(ci, []))
                if ci == 0:
                    parts += conj.get(None, [])
                inner = mode.both(parts)
                if len(cls) == 1:
                    packed.append(inner)
                else:
                    packed.append(ball_chain([vars_[i] for i in cls[1:]], s - r, rep, inner,
                                             kind=mode.ball))
            reps = tuple(vars_[i] for i in part.representatives)
            results.append(_step1(mode.sc(reps, 2 * s, mode.both(packed)), mode))
    return simplify(mode.some(results))


def gnf_step2(sentence: Formula) -> Formula:
    """Localize E x1 .. E xm . phi-local(xs): disjunction over partitions;
    per partition, literals split by the configuration are replaced by
    constants, the Separation Lemma splits the matrix per class, classes
    are ball-packed around scattered representatives and handed to
    gnf_step1."""
    return _step2(sentence, EXIST_MODE)


def gnf_step2_univ(sentence: Formula) -> Formula:
    """Mirror image of gnf_step2 for A x1 .. A xm . phi-local(xs)."""
    return _step2(sentence, UNIV_MODE)


# ---------------------------------------------------------------------------
# Basic local sentences of the co-polarity -> outside form (Lemma 6.10 style)
# ---------------------------------------------------------------------------

def _co_basic_to_outside(sentence: Formula, mode: Mode) -> Formula:
    """Convert a basic local sentence of the co-polarity (universal in the
    existential mode) into main-polarity quantification ending in a single
    outside quantifier."""
    co_sc = ScatteredForall if not mode.univ else ScatteredExists
    if isinstance(sentence, mode.co_plain):
        body = sentence.body
        rho = max(1, measured_locality(body, [sentence.var]))
        return mode.out(sentence.var, 2 * rho, (), body)
    if not isinstance(sentence, co_sc):
        raise GaifmanError(f"expected a co-{mode.name} basic local sentence, got {F.render(sentence)}")
    vars_, rho, body = sentence.vars_, max(1, sentence.radius), sentence.body
    n = len(vars_)
    if n == 1:
        return mode.out(vars_[0], 2 * rho, (), body)

    parts = mode.flatten_some(body)
    per_var: dict = {v: [] for v in vars_}
    spare = []
    for p in parts:
        owners = p.free & set(vars_)
        if p.free - set(vars_):
            raise GaifmanError(f"part mentions a foreign variable: {F.render(p)}")
        if len(owners) > 1:
            raise GaifmanError(f"part mentions several scattered variables: {F.render(p)}")
        (per_var[next(iter(owners))] if owners else spare).append(p)
    probe = fresh_var()
    candidates = []
    for v in vars_:
        cand = mode.some([substitute(alpha_rename(p), {v: probe}) for p in per_var[v]] + spare)
        candidates.append(cand)
    norms = {alpha_normal(c) for c in candidates}
    if len(norms) != 1:
        sym = _step1(sentence, mode.other())
        return _map_basic_leaves(sym, lambda leaf: _co_basic_to_outside(leaf, mode))

    phi_probe = candidates[0]

    def phi_at(v: str) -> Formula:
        return substitute(alpha_rename(phi_probe), {probe: v})

    vs = [fresh_var() for _ in range(n - 1)]
    pair_guards = [mode.near_guard(vars_[i], vars_[j], 2 * rho)
                   for i in range(n) for j in range(i + 1, n)]
    near_matrix = mode.some(pair_guards + [phi_at(v) for v in vars_])
    near = ball_chain(vars_, 2 * rho, tuple(vs), near_matrix, kind=mode.co_ball)
    far_var = fresh_var()
    far = mode.out(far_var, 2 * rho, tuple(vs), phi_at(far_var))
    return mode.chain(vs, mode.both([near, far]))


def universal_basic_to_outside(sentence: Formula) -> Formula:
    """Rewrite a universal basic local sentence Asc r {x1..xn} OR_i phi(x_i)
    into E v1..v_{n-1} (ball-checked near part AND a single OutsideForall);
    asymmetric inputs are symmetrized through the universal step 1 first."""
    return _co_basic_to_outside(sentence, EXIST_MODE)


def existential_basic_to_outside(sentence: Formula) -> Formula:
    """Mirror image: Esc r {xs} AND phi(x_i) into A v1..v_{n-1} (... OR a
    single OutsideExists)."""
    return _co_basic_to_outside(sentence, UNIV_MODE)


def _map_basic_leaves(combo: Formula, fn) -> Formula:
    if isinstance(combo, (And, Or)):
        return F.replace_children(combo, [_map_basic_leaves(c, fn) for c in combo.children])
    if isinstance(combo, (TrueAtom, FalseAtom)):
        return combo
    return fn(combo)


# ---------------------------------------------------------------------------
# Merging outside quantifiers (Lemma 6.11 style)
# ---------------------------------------------------------------------------

def notball_combine(chains: Sequence[tuple], R: int, extra_centers: Sequence[str] = (),
                    mode: Mode = EXIST_MODE) -> tuple:
    """Merge outside quantifiers: chains are (radius, centers, var, body)
    entries denoting `mode.out` var notin B[radius](centers) . body.
    Returns (merged outside quantifier over all centers plus extra_centers
    at radius R, compensating ball formula); requires R >= every chain
    radius.  Elements between a chain radius and R are covered by the
    compensator's exemption guards."""
    z = fresh_var()
    all_centers: list = []
    for _r, cs, _v, _b in chains:
        for c in cs:
            if c not in all_centers:
                all_centers.append(c)
    for c in extra_centers:
        if c not in all_centers:
            all_centers.append(c)
    if any(r > R for r, _cs, _v, _b in chains):
        raise GaifmanError("merge radius below a chain radius")
    bodies = [substitute(alpha_rename(b), {v: z}) for _r, _cs, v, b in chains]
    merged = mode.out(z, R, tuple(all_centers), mode.both(bodies))
    z2 = fresh_var()
    comp_parts = []
    for (r_q, cs_q, v_q, b_q) in chains:
        exempt = mode.exempt_tuple(z2, cs_q, r_q)
        comp_parts.append(mode.some([exempt, substitute(alpha_rename(b_q), {v_q: z2})]))
    compensator = mode.co_ball(z2, R, tuple(all_centers), None, mode.both(comp_parts)) \
        if all_centers else mode.neutral_both
    return merged, compensator


# ---------------------------------------------------------------------------
# Outside quantification over a configuration (Lemma 6.13 style)
# ---------------------------------------------------------------------------

def outside_partition_rewrite(part: Partition, vars_: Sequence[str], radius: int,
                              r_out: int, theta: Formula, theta_var: str,
                              mode: Mode = EXIST_MODE) -> Formula:
    """On tuples in configuration (P, radius) with r_out <= radius, the
    value of `mode.out` z notin B[r_out](vars) theta(z) equals that of the
    returned formula, which touches only the representatives: outside
    quantification at 5^(m-k)*radius around them, plus per-class ball
    compensators exempting elements near class members.  For the discrete
    partition the original radius is kept and no compensators arise."""
    if r_out > radius:
        raise GaifmanError("outside radius exceeds the configuration base radius")
    m, k = part.n, part.k
    big = 5 ** (m - k) * radius

    def theta_at(v: str) -> Formula:
        return substitute(alpha_rename(theta), {theta_var: v})

    reps = tuple(vars_[i] for i in part.representatives)
    z = fresh_var()
    parts: list = [mode.out(z, r_out if part.is_discrete() else big, reps, theta_at(z))]
    if not part.is_discrete():
        for cls in part.classes:
            rep = vars_[cls[0]]
            zc = fresh_var()
            exempt = mode.exempt_tuple(zc, [vars_[i] for i in cls], r_out)
            parts.append(mode.co_ball(zc, big, (rep,), None,
                                      mode.some([exempt, theta_at(zc)])))
    return mode.both(parts)


# ---------------------------------------------------------------------------
# Step 3a: split the co-polarity block into in-ball and outside parts
# ---------------------------------------------------------------------------

def split_radii(n: int, r0: int) -> dict:
    """Radii r_{i,s} = (2^(n-1) + sum_{j<i} s_j 2^(n-1-j)) r0 per sign
    sequence s in {-1,1}^n; in- and out-annotated variables of different
    indices end up at least r0 apart."""
    out = {}
    for s in itertools.product((1, -1), repeat=n):
        out[s] = [
            (2 ** (n - 1) + sum(s[j] * 2 ** (n - 1 - j) for j in range(i))) * r0
            for i in range(n)
        ]
    return out


def _step3_split(sentence: Formula, mode: Mode) -> Formula:
    ys, rest = mode.strip_plain(sentence)
    xs, matrix = mode.strip_co_plain(rest)
    if not ys or not xs:
        raise GaifmanError(f"expected a {mode.name} sentence with two nonempty blocks")
    if matrix.free - set(ys) - set(xs):
        raise GaifmanError("matrix has stray free variables")
    matrix = split_multicenter(matrix)
    r = max(1, measured_locality(matrix, ys + xs))
    r0 = 4 * r
    n = len(xs)
    radii = split_radii(n, r0)

    clauses = []  # (theta side, chain spec or None, psi side or None)
    for s, rs in sorted(radii.items(), reverse=True):
        fresh_xs = [fresh_var() for _ in xs]
        mat_s = substitute(alpha_rename(matrix), dict(zip(xs, fresh_xs)))
        out_vars = tuple(v for v, si in zip(fresh_xs, s) if si == -1)
        chain_spec = tuple((v, ri) for v, si, ri in zip(fresh_xs, s, rs) if si == -1)
        near_group = tuple(ys) + tuple(v for v, si in zip(fresh_xs, s) if si == 1)
        groups = [near_group, out_vars] if out_vars else [near_group]
        cut = replace_split_literals(mat_s, groups) if out_vars else mat_s
        cut = simplify(cut)
        tree = _separate_tagged(cut, groups, mode.univ)
        for clause in _tree_dnf(tree, dual=not mode.univ):
            near_parts = [frm for tag, frm in clause if tag == 0]
            far_parts = [frm for tag, frm in clause if tag == 1]
            movable = [frm for tag, frm in clause if tag is None]
            theta = mode.some(near_parts)
            for v, si, ri in zip(fresh_xs, s, rs):
                if si == 1 and v in theta.free:
                    theta = mode.co_ball(v, ri, tuple(ys), None, theta)
            if out_vars:
                psi = mode.some(far_parts + movable)
                clauses.append((theta, chain_spec, psi))
            else:
                clauses.append((mode.some([theta] + movable), None, None))

    # merge clauses sharing an identical chained far part:
    # (a|C)&(b|C) = (a&b)|C, and its mirror image
    merged: dict = {}
    for theta, spec, psi in clauses:
        merged.setdefault((spec, psi), []).append(theta)
    units = []
    for (spec, psi), thetas in merged.items():
        theta = simplify(mode.both(thetas))
        if spec is None:
            units.append((theta, None))
        else:
            chain: Formula = psi
            for v, ri in reversed(spec):
                chain = mode.out(v, ri, tuple(ys), chain)
            units.append((theta, chain))

    # drop duplicate units up to bound-variable names
    unique_units = []
    seen_units = set()
    for theta, chain in units:
        key = (alpha_normal(theta), alpha_normal(chain) if chain is not None else None)
        if key not in seen_units:
            seen_units.add(key)
            unique_units.append((theta, chain))

    # main normal form over the clause units, one sentence per choice;
    # choices picking a superset of another choice are dominated
    choices = [frozenset()]
    for theta, chain in unique_units:
        new = []
        for d in choices:
            if theta != mode.neutral_some:
                new.append(d | {("t", theta)})
            if chain is not None:
                new.append(d | {("c", chain)})
        choices = _subsume(new)
        if len(choices) > 20000:
            raise GaifmanError("split stage exploded; simplify the input")

    out = []
    seen = set()
    for picked in choices:
        sent = mode.chain(ys, mode.both([p for _tag, p in sorted(
            picked, key=lambda tp: F.render(tp[1]))]))
        key = alpha_normal(sent)
        if key not in seen:
            seen.add(key)
            out.append(sent)
    return mode.some(out)


def gnf_step3_split(sentence: Formula) -> Formula:
    """Rewrite E ys . A xs . phi-local into a disjunction of sentences
    E ys (theta-local(ys) AND OutsideForall chains), by annotating each
    universal variable as inside/outside a ball around ys per sign
    sequence, removing literals that connect near and far groups, and
    separating.  Clauses with identical far parts share their chain."""
    return _step3_split(sentence, EXIST_MODE)


def gnf_step3_split_univ(sentence: Formula) -> Formula:
    """Mirror image for A ys . E xs . phi-local sentences."""
    return _step3_split(sentence, UNIV_MODE)


# ---------------------------------------------------------------------------
# Step 3b: collapse the outside chains into a single outside quantifier
# ---------------------------------------------------------------------------

def _unwind_chain(f: Formula, ys: set, mode: Mode) -> tuple[list, Formula]:
    entries = []
    while isinstance(f, mode.out):
        if set(f.centers) - ys:
            raise GaifmanError("outside quantifier centered outside the leading block")
        entries.append((f.var, f.radius))
        f = f.body
    return entries, f


def _drop_far_dist(f: Formula, ys: set) -> Formula:
    """Under an outside quantifier whose radius exceeds the body locality,
    distance atoms reaching the leading block cannot be within range:
    d <= atoms become false, d > atoms true (their semantic values)."""
    if isinstance(f, DistLeq) and (f.left in ys or f.right in ys):
        return FALSE
    if isinstance(f, DistGt) and (f.left in ys or f.right in ys):
        return TRUE
    if isinstance(f, F.ATOMS):
        return f
    return F.replace_children(f, [_drop_far_dist(c, ys) for c in F.children_of(f)])


def _step3_single_outside(sentence: Formula, mode: Mode) -> Formula:
    ys, body = mode.strip_plain(sentence)
    yset = set(ys)
    theta_parts = []
    chains = []
    seen_parts = set()
    for part in mode.flatten_both(body):
        key = alpha_normal(part)
        if key in seen_parts:
            continue
        seen_parts.add(key)
        if isinstance(part, mode.out):
            # chains from one split branch may share bound-variable names;
            # rename so the merged prefix binds each variable once
            chains.append(_unwind_chain(alpha_rename(part), yset, mode))
        else:
            theta_parts.append(part)
    if not chains:
        return _step2(mode.chain(ys, mode.both(theta_parts)), mode)
    theta = mode.both(theta_parts)
    measured_locality(theta, ys)

    # chains -> co-polarity quantification over all chain variables, with
    # the per-variable exemptions abstracted as unary atoms
    dmap: dict = {}

    def datom(v: str, radius: int) -> Formula:
        name = dmap.setdefault(radius, fresh_var("_D"))
        return PosAtom(name, (v,))

    all_chain_vars: list = []
    conj = []
    for entries, psi in chains:
        guards = []
        for v, radius in entries:
            all_chain_vars.append(v)
            guards.append(datom(v, radius))
        conj.append(mode.some([psi] + guards))
    core = mode.co_chain(all_chain_vars, mode.both(conj))

    local = _step2(core, mode.other())
    converted = _map_basic_leaves(local, lambda leaf: _co_basic_to_outside(leaf, mode))

    def restore(g: Formula) -> Formula:
        if isinstance(g, PosAtom) and len(g.args) == 1:
            for radius, name in dmap.items():
                if g.rel == name:
                    return mode.exempt_tuple(g.args[0], ys, radius)
        if isinstance(g, F.ATOMS):
            return g
        return F.replace_children(g, [restore(c) for c in F.children_of(g)])

    converted = restore(converted)

    prefix: list = []

    def hoist(g: Formula) -> Formula:
        if isinstance(g, mode.plain):
            prefix.append(g.var)
            return hoist(g.body)
        if isinstance(g, (And, Or)):
            return F.replace_children(g, [hoist(c) for c in g.children])
        return g

    hoisted = hoist(converted)

    def expand(g: Formula, acc):
        some_node = Or if not mode.univ else And
        both_node = And if not mode.univ else Or
        if isinstance(g, some_node):
            out = []
            for c in g.children:
                out.extend(expand(c, [list(d) for d in acc]))
            return out
        if isinstance(g, both_node):
            for c in g.children:
                acc = expand(c, acc)
            return acc
        for d in acc:
            d.append(g)
        return acc

    out_sentences = []
    for choice in expand(hoisted, [[]]):
        locals_: list = list(theta_parts)
        outs: list = []
        for item in choice:
            if isinstance(item, mode.out):
                outs.append((item.radius, item.centers, item.var, item.body))
            else:
                locals_.append(item)
        ws = list(ys) + list(prefix)
        if not outs:
            out_sentences.append(_step2(mode.chain(ws, mode.both(locals_)), mode))
            continue
        lam = max(max(1, measured_locality(b, [v])) for _r, _cs, v, b in outs)
        R = max([lam + 1] + [r for r, _cs, _v, _b in outs])
        merged, compensator = notball_combine(outs, R, extra_centers=ws, mode=mode)
        merged = mode.out(merged.var, merged.radius, merged.centers,
                          _drop_far_dist(merged.body, yset))
        out_sentences.append(mode.chain(ws, mode.both(locals_ + [compensator, merged])))
    return mode.some(out_sentences)


def gnf_step3_single_outside(sentence: Formula) -> Formula:
    """Rewrite E ys (theta AND OutsideForall chains) so that one outside
    quantifier remains: chains become universal quantification with
    distance exemptions, exemptions are abstracted by unary atoms, the
    universal core is localized by the universal step 2, each universal
    basic local sentence becomes an exists+outside form, and all outside
    quantifiers merge at an enlarged radius; distance atoms reaching ys
    under the merged quantifier are then replaced by their values."""
    return _step3_single_outside(sentence, EXIST_MODE)


def gnf_step3_single_outside_univ(sentence: Formula) -> Formula:
    """Mirror image for A ys (theta OR OutsideExists chains) sentences."""
    return _step3_single_outside(sentence, UNIV_MODE)


# ---------------------------------------------------------------------------
# Step 3c: scattered quantification around the outside part
# ---------------------------------------------------------------------------

def _step3_scatter(sentence: Formula, mode: Mode) -> Formula:
    xs, body = mode.strip_plain(sentence)
    if not xs:
        raise GaifmanError(f"expected a leading {mode.name} block")
    phi_parts = []
    outside = None
    for part in mode.flatten_both(body):
        if isinstance(part, mode.out):
            if outside is not None:
                raise GaifmanError("expected a single outside quantifier")
            outside = part
        else:
            phi_parts.append(part)
    if outside is None:
        return _step2(sentence, mode)
    if set(outside.centers) != set(xs):
        raise GaifmanError("outside quantifier must range around the whole leading tuple")
    theta, tvar, r_out = outside.body, outside.var, outside.radius
    phi = split_multicenter(mode.both(phi_parts))
    lam_theta = max(1, measured_locality(theta, [tvar]))
    rc = max(1, measured_locality(phi, xs), r_out, lam_theta)

    m = len(xs)
    results = []
    for classes in partitions_iter(m):
        part = Partition(classes)
        k = part.k
        s = 5 ** (m - k) * rc
        class_of = {i: ci for ci, cls in enumerate(classes) for i in cls}
        phat = simplify(replace_split_literals(
            phi, [(v,) for v in xs],
            class_of_group={i: class_of[i] for i in range(m)},
        ))
        if phat == mode.neutral_some:
            continue
        groups = [tuple(xs[i] for i in cls) for cls in classes]
        rewrite_parts = mode.flatten_both(
            outside_partition_rewrite(part, xs, rc, r_out, theta, tvar, mode=mode)
        )
        new_outside = rewrite_parts[0]
        comp_of_class = dict(enumerate(rewrite_parts[1:]))
        for conj in _group_parts(phat, groups, mode):
            packed = []
            for ci, cls in enumerate(classes):
                rep = xs[cls[0]]
                parts = list(conj.get(ci, []))
                if ci == 0:
                    parts += conj.get(None, [])
                if ci in comp_of_class:
                    parts.append(comp_of_class[ci])
                inner = mode.both(parts)
                if len(cls) == 1:
                    packed.append(inner)
                else:
                    packed.append(ball_chain([xs[i] for i in cls[1:]], s - rc, rep, inner,
                                             kind=mode.ball))
            reps = tuple(xs[i] for i in part.representatives)
            results.append(mode.sc(reps, 2 * s, mode.both(packed + [new_outside])))
    return mode.some(results)


def gnf_step3_scatter(sentence: Formula) -> Formula:
    """Rewrite E xs (phi-local(xs) AND A z notin B[r'](xs) theta) into a
    disjunction over partitions of scattered sentences whose outside part
    depends only on the representatives (per-class ball compensators take
    care of elements near class members)."""
    return _step3_scatter(sentence, EXIST_MODE)


def gnf_step3_scatter_univ(sentence: Formula) -> Formula:
    """Mirror image for A xs (... OR E z notin B[r'](xs) theta)."""
    return _step3_scatter(sentence, UNIV_MODE)


# ---------------------------------------------------------------------------
# Step 3d: eliminate the final outside quantifier
# ---------------------------------------------------------------------------

def _step3_final(sentence: Formula, mode: Mode) -> Formula:
    if isinstance(sentence, mode.plain):
        sentence = mode.sc((sentence.var,), 0, sentence.body)
    if not isinstance(sentence, mode.sc):
        raise GaifmanError(f"expected a scattered {mode.name} sentence, got {F.render(sentence)}")
    us, r, body = list(sentence.vars_), sentence.radius, sentence.body
    outside = None
    phi_parts: dict = {v: [] for v in us}
    spare: list = []
    for part in mode.flatten_both(body):
        if isinstance(part, mode.out):
            if outside is not None:
                raise GaifmanError("expected a single outside quantifier")
            outside = part
            continue
        owners = part.free & set(us)
        if part.free - set(us):
            raise GaifmanError(f"stray free variables in {F.render(part)}")
        if len(owners) > 1:
            raise GaifmanError(f"part mentions several scattered variables: {F.render(part)}")
        (phi_parts[next(iter(owners))] if owners else spare).append(part)
    if outside is None:
        return _step1(sentence, mode)
    if set(outside.centers) != set(us):
        raise GaifmanError("outside quantifier must range around the scattered tuple")
    psi, xvar, R = outside.body, outside.var, outside.radius
    phis = {v: mode.both(phi_parts[v] + (spare if v == us[0] else [])) for v in us}
    M = len(us)
    if M == 1:
        # no scattering guards exist, so the radius is only a locality label
        r = max(1, r, measured_locality(phis[us[0]], [us[0]]))
    else:
        for v in us:
            rad = measured_locality(phis[v], [v])
            if rad > r:
                raise GaifmanError(
                    f"part for {v} is {rad}-local, exceeding the scattered radius {r}"
                )
    lam_psi = measured_locality(psi, [xvar])
    if lam_psi > R:
        raise GaifmanError("outside body exceeds the outside radius in locality")
    if R < 1:
        raise GaifmanError("outside radius must be at least 1")

    def psi_at(v: str) -> Formula:
        return substitute(alpha_rename(psi), {xvar: v})

    def phi_at(owner: str) -> Formula:
        return phis[owner]

    # the middle part checks psi on M+1 scattered points; partition-free
    sc_vars = [fresh_var() for _ in range(M + 1)]
    co_sc = ScatteredForall if not mode.univ else ScatteredExists
    psi2 = co_sc(tuple(sc_vars), R, mode.some([psi_at(v) for v in sc_vars]))
    psi2_local = _step1(psi2, mode.other())

    out = []
    for classes in partitions_iter(M):
        part = Partition(classes)
        k = part.k
        T = 5 ** (M - k) * (r + R)
        reps = [us[i] for i in part.representatives]

        # part 1: scattered representatives, ball-packed classes, guards,
        # and the wide ball compensator for psi
        xw = fresh_var()
        comp1 = mode.co_ball(xw, 2 * T, tuple(us), None,
                             mode.some([mode.exempt_tuple(xw, us, R), psi_at(xw)]))
        guards1 = [mode.far_guard(us[i], us[j], 2 * r)
                   for i in range(M) for j in range(i + 1, M)]
        inner1 = mode.both(guards1 + [phi_at(v) for v in us] + [comp1])
        for cls in reversed(part.classes):
            members = [us[i] for i in cls[1:]]
            if members:
                inner1 = ball_chain(members, T - (r + R), us[cls[0]], inner1, kind=mode.ball)
        psi1_sentence = mode.chain(
            reps,
            mode.both([mode.far_guard(a, b, 2 * (2 * T))
                       for a, b in itertools.combinations(reps, 2)] + [inner1]),
        )
        psi1_local = _step2(psi1_sentence, mode)

        # part 3: a co-polarity sweep over v1..vM with partial configurations
        vs = [fresh_var() for _ in range(M)]
        j_parts = []
        for size in range(k + 1):
            for J in itertools.combinations(range(k), size):
                covered = [i for ci in J for i in part.classes[ci]]
                xw3 = fresh_var()
                comp3 = mode.co_ball(
                    xw3, 2 * R, tuple(vs), None,
                    mode.some([mode.exempt_tuple(xw3, [us[i] for i in covered], R),
                               psi_at(xw3)]),
                )
                guards3 = [mode.far_guard(us[a], us[b], 2 * r)
                           for a, b in itertools.combinations(covered, 2)]
                inner3 = mode.both([phi_at(us[i]) for i in covered] + guards3 + [comp3])
                for ci in reversed(J):
                    cls = part.classes[ci]
                    members = [us[i] for i in cls[1:]]
                    if members:
                        inner3 = ball_chain(members, T - (r + R), us[cls[0]], inner3,
                                            kind=mode.ball)
                piece = inner3
                for ci in reversed(J):
                    piece = mode.ball(us[part.classes[ci][0]], 3 * R + T, tuple(vs), None, piece)
                j_parts.append(piece)
        psi3_sentence = mode.co_chain(vs, mode.some(j_parts))
        psi3_local = _step2(psi3_sentence, mode.other())

        out.append(mode.both([psi1_local, psi2_local, psi3_local]))
    return simplify(mode.some(out))


def gnf_step3_final(sentence: Formula) -> Formula:
    """Eliminate the remaining outside quantifier from Esc r {u1..uM}
    (AND_i phi_i(u_i) AND A x notin B[R](us) psi): a disjunction over
    partitions of three parts -- scattered representatives with class
    balls and a wide compensator; a universal scattered check of psi on
    M+1 points; and a universal sweep matching partial configurations --
    each localized by step 2 of the matching polarity."""
    return _step3_final(sentence, EXIST_MODE)


def gnf_step3_final_univ(sentence: Formula) -> Formula:
    """Mirror image for Asc r {us} (OR_i phi_i(u_i) OR OutsideExists ...)."""
    return _step3_final(sentence, UNIV_MODE)


# ---------------------------------------------------------------------------
# Quantifier swapping for local sentences
# ---------------------------------------------------------------------------

def swap_blocks(local_sentence: Formula, target: str) -> Formula:
    """Bring a positive combination of basic local sentences into prenex
    form with two blocks in the requested order ('exists-forall' or
    'forall-exists'); the local matrices combine into one local matrix.
    Sound because every basic local sentence contributes quantifiers of a
    single kind, so the blocks can be interleaved freely."""
    if target not in ("exists-forall", "forall-exists"):
        raise GaifmanError(f"unknown target {target!r}")
    ok, diags = validate_local_sentence(local_sentence)
    if not ok:
        raise GaifmanError("swap_blocks input is not a local sentence: " + "; ".join(diags))

    f = alpha_rename(local_sentence)
    evars: list = []
    avars: list = []

    def strip(g: Formula) -> Formula:
        if isinstance(g, (And, Or)):
            return F.replace_children(g, [strip(c) for c in g.children])
        if isinstance(g, ScatteredExists):
            evars.extend(g.vars_)
            return mk_and(F.scattered_guards(g.vars_, g.radius, "E") + [strip(g.body)])
        if isinstance(g, ScatteredForall):
            avars.extend(g.vars_)
            return mk_or(F.scattered_guards(g.vars_, g.radius, "A") + [strip(g.body)])
        if isinstance(g, Exists):
            evars.append(g.var)
            return g.body
        if isinstance(g, Forall):
            avars.append(g.var)
            return g.body
        return g

    matrix = strip(f)
    if target == "exists-forall":
        return exists_chain(evars, forall_chain(avars, matrix))
    return forall_chain(avars, exists_chain(evars, matrix))


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def _localize_two_blocks(sentence: Formula, mode: Mode) -> Formula:
    """The full chain for two alternating blocks led by the mode's
    polarity: split, then per piece a single outside quantifier,
    scattered quantification, and elimination."""
    locals_ = []

    def has_outside(g: Formula) -> bool:
        return any(isinstance(node, F.OUTSIDE) for node in F.walk(g))

    for piece in mode.flatten_some(_step3_split(sentence, mode)):
        for with_single in mode.flatten_some(_step3_single_outside(piece, mode)):
            if not has_outside(with_single):
                locals_.append(with_single)  # localized on the no-chain path
                continue
            for final_input in mode.flatten_some(_step3_scatter(with_single, mode)):
                if has_outside(final_input):
                    locals_.append(_step3_final(final_input, mode))
                else:
                    locals_.append(final_input)
    result = simplify(mode.some(locals_))
    ok, diags = validate_local_sentence(result)
    if not ok:
        raise GaifmanError(f"{mode.name} two-block localization failed: " + "; ".join(diags))
    return result


def _localize_blocks(blocks: list, matrix: Formula) -> Formula:
    """Base cases of the induction: at most two alternating blocks."""

    def build(bs, mat):
        out = mat
        for kind, vs in reversed(bs):
            chain = exists_chain if kind == "E" else forall_chain
            out = chain(vs, out)
        return out

    if not blocks:
        ok, _ = validate_local_sentence(matrix)
        if ok:
            return matrix
        raise GaifmanError("quantifier-free sentence is not a local sentence")
    sentence = build(blocks, matrix)
    kinds = tuple(k for k, _vs in blocks)
    if kinds == ("E",):
        return _step2(sentence, EXIST_MODE)
    if kinds == ("A",):
        return _step2(sentence, UNIV_MODE)
    if kinds == ("E", "A"):
        return _localize_two_blocks(sentence, EXIST_MODE)
    if kinds == ("A", "E"):
        return _localize_two_blocks(sentence, UNIV_MODE)
    raise GaifmanError(f"unexpected block structure {kinds}")


def gnf(sentence: Formula) -> Formula:
    """Gaifman normal form: rewrite a first-order sentence into a
    minmax-equivalent positive combination of basic local sentences.

    Accepts plain sentences (true/false sugar allowed); sentences already
    in local form are returned simplified.  The alternation-elimination
    loop abstracts atoms over outer blocks, localizes the innermost two
    blocks, swaps them and merges, reducing the number of alternations by
    one per round."""
    if sentence.free:
        raise GaifmanError(f"gnf expects a sentence; free variables {sorted(sentence.free)}")
    simplified = simplify(sentence)
    ok, _ = validate_local_sentence(simplified)
    if ok:
        return simplified
    if isinstance(simplified, (And, Or)) and all(not c.free for c in simplified.children):
        # a combination of sentences localizes sentence by sentence
        combine = mk_and if isinstance(simplified, And) else mk_or
        return simplify(combine([gnf(c) for c in simplified.children]))
    sentence = simplified
    for node in F.walk(sentence):
        if isinstance(node, (*F.BALL, *F.OUTSIDE, *F.SCATTERED, DistLeq, DistGt)):
            raise GaifmanError(
                "gnf expects a plain first-order sentence "
                f"(found {type(node).__name__}); desugar or pre-localize first"
            )
    f = F.desugar(sentence)
    prefix, matrix = F.prenex_decompose(f)
    blocks, _ = F.alternation_blocks(_rebuild_prefix(prefix, matrix))

    current_blocks = blocks
    current_matrix = matrix
    while len(current_blocks) > 3:
        # generic reduction: localize the innermost two blocks under
        # abstraction, swap them as one sentence, merge into the prefix
        inner = current_blocks[-2:]
        outer = current_blocks[:-2]
        outer_vars = [v for _k, vs in outer for v in vs]
        inner_sentence = _rebuild_blocks(inner, current_matrix)
        abstracted, amap = abstract_atoms(inner_sentence, outer_vars)
        abs_blocks, abs_matrix = F.alternation_blocks(abstracted)
        local = _localize_blocks(abs_blocks, abs_matrix)
        target = "exists-forall" if outer[-1][0] == "E" else "forall-exists"
        swapped = swap_blocks(local, target)
        restored = restore_atoms(swapped, amap)
        rebuilt = _rebuild_blocks(outer, restored)
        current_blocks, current_matrix = F.alternation_blocks(rebuilt)
    if len(current_blocks) == 3:
        result = _localize_three_blocks(current_blocks, current_matrix)
    else:
        result = _localize_blocks(current_blocks, current_matrix)
    result = simplify(result)
    ok, diags = validate_local_sentence(result)
    if not ok:
        raise GaifmanError("gnf produced a non-local sentence: " + "; ".join(diags))
    return result


def _basic_normal_form(local_sentence: Formula, kind: str) -> list:
    """Normal form of a local sentence at the basic-sentence level: a
    disjunction of conjunctions for kind 'E' (so an existential quantifier
    distributes over it), a conjunction of disjunctions for kind 'A';
    entries are lists of basic local sentences, subsumption-pruned."""

    def tag(g: Formula):
        if isinstance(g, (And, Or)):
            return ("and" if isinstance(g, And) else "or",
                    [tag(c) for c in g.children])
        return ("leaf", None, g)

    groups = _tree_dnf(tag(local_sentence), dual=(kind == "A"))
    return [[frm for _t, frm in leaves] for leaves in groups]


def _localize_three_blocks(blocks: list, matrix: Formula) -> Formula:
    """Three alternating blocks: localize the two innermost under
    abstraction, bring the result to the basic-sentence normal form
    matching the outer quantifier, and localize each branch separately
    after swapping -- the outer quantifier distributes over the branches,
    which keeps every swapped sentence small."""
    outer = blocks[0]
    outer_vars = list(outer[1])
    inner_sentence = _rebuild_blocks(blocks[1:], matrix)
    abstracted, amap = abstract_atoms(inner_sentence, outer_vars)
    abs_blocks, abs_matrix = F.alternation_blocks(abstracted)
    local = _localize_blocks(abs_blocks, abs_matrix)
    kind = outer[0]
    target = "exists-forall" if kind == "E" else "forall-exists"
    combine_leaf = mk_and if kind == "E" else mk_or
    combine_all = mk_or if kind == "E" else mk_and
    results = []
    for branch in _basic_normal_form(simplify(local), kind):
        swapped = swap_blocks(combine_leaf(branch), target)
        restored = restore_atoms(swapped, amap)
        merged = _rebuild_blocks([outer], restored)
        m_blocks, m_matrix = F.alternation_blocks(merged)
        results.append(_localize_blocks(m_blocks, m_matrix))
    return simplify(combine_all(results))


def _rebuild_prefix(prefix: list, matrix: Formula) -> Formula:
    out = matrix
    for kind, var in reversed(prefix):
        out = (Exists if kind == "E" else Forall)(var, out)
    return out


def _rebuild_blocks(blocks: list, matrix: Formula) -> Formula:
    out = matrix
    for kind, vs in reversed(blocks):
        out = (exists_chain if kind == "E" else forall_chain)(vs, out)
    return out

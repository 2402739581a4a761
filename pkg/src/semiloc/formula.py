"""Abstract syntax, concrete syntax and syntactic transformations for
first-order formulae in negation normal form, extended with ball,
outside and scattered quantifiers and distance atoms.

Every node is immutable and hash-consable: hashes and free-variable sets
are computed once at construction, so formulae can be shared, deduplicated
and used as dictionary keys cheaply even for large trees.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, fields
from typing import Iterable, Iterator, Mapping, Optional, Sequence


class FormulaError(Exception):
    """Malformed formula or violated operation precondition."""


class ParseError(FormulaError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class Signature:
    """Finite relational vocabulary: relation name -> arity (>= 1)."""

    relations: Mapping[str, int]

    def __post_init__(self):
        for name, arity in self.relations.items():
            if not isinstance(arity, int) or arity < 1:
                raise FormulaError(f"relation {name!r} must have arity >= 1, got {arity!r}")
        object.__setattr__(self, "relations", dict(self.relations))

    def arity(self, name: str) -> int:
        try:
            return self.relations[name]
        except KeyError:
            raise FormulaError(f"unknown relation {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.relations

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self.relations))

    def restrict(self, names: Iterable[str]) -> "Signature":
        keep = set(names)
        unknown = keep - set(self.relations)
        if unknown:
            raise FormulaError(f"unknown relations in restriction: {sorted(unknown)}")
        return Signature({n: a for n, a in self.relations.items() if n in keep})

    def extend(self, extra: Mapping[str, int]) -> "Signature":
        merged = dict(self.relations)
        for n, a in extra.items():
            if n in merged and merged[n] != a:
                raise FormulaError(f"relation {n!r} redeclared with different arity")
            merged[n] = a
        return Signature(merged)

    def __hash__(self):
        return hash(tuple(sorted(self.relations.items())))

    def __eq__(self, other):
        return isinstance(other, Signature) and dict(self.relations) == dict(other.relations)


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

import weakref

_INTERN: "weakref.WeakValueDictionary" = weakref.WeakValueDictionary()


class Formula:
    """Base class for all formula nodes (negation normal form).

    Nodes are interned (hash-consed): constructing a node structurally
    equal to a live one returns the existing object, so equality is
    usually an identity check and repeated subtrees share storage."""

    __slots__ = ()

    def __new__(cls, *args, **kwargs):
        key = (cls, args, tuple(sorted(kwargs.items()))) if kwargs else (cls, args)
        hit = _INTERN.get(key)
        if hit is not None:
            return hit
        obj = object.__new__(cls)
        object.__setattr__(obj, "_intern_key", key)
        return obj

    @classmethod
    def _field_names(cls) -> tuple:
        names = cls.__dict__.get("_FIELD_NAMES")
        if names is None:
            names = tuple(f.name for f in fields(cls))
            cls._FIELD_NAMES = names
        return names

    def __post_init__(self):
        if "_h" in self.__dict__:
            return  # an interned instance re-running its generated __init__
        parts = tuple(getattr(self, n) for n in self._field_names())
        object.__setattr__(self, "_h", hash((self.__class__.__name__, parts)))
        object.__setattr__(self, "_free", self._free_vars())
        key = self.__dict__.get("_intern_key")
        if key is not None:
            _INTERN[key] = self

    def _free_vars(self) -> frozenset:
        return frozenset()

    @property
    def free(self) -> frozenset:
        return self._free  # type: ignore[attr-defined]

    def __hash__(self):
        return self._h  # type: ignore[attr-defined]

    def __eq__(self, other):
        if self is other:
            return True
        if self.__class__ is not other.__class__:
            return False
        if self._h != other._h:  # type: ignore[attr-defined]
            return False
        return all(getattr(self, n) == getattr(other, n) for n in self._field_names())

    def __repr__(self):
        return f"<{render(self)}>"


def _vars_ok(vs: Sequence[str]):
    if not all(isinstance(v, str) and v for v in vs):
        raise FormulaError(f"bad variable tuple {vs!r}")


@dataclass(frozen=True, eq=False, repr=False)
class PosAtom(Formula):
    rel: str
    args: tuple[str, ...]

    def __post_init__(self):
        _vars_ok(self.args)
        super().__post_init__()

    def _free_vars(self):
        return frozenset(self.args)


@dataclass(frozen=True, eq=False, repr=False)
class NegAtom(Formula):
    rel: str
    args: tuple[str, ...]

    def __post_init__(self):
        _vars_ok(self.args)
        super().__post_init__()

    def _free_vars(self):
        return frozenset(self.args)


@dataclass(frozen=True, eq=False, repr=False)
class Eq(Formula):
    left: str
    right: str

    def _free_vars(self):
        return frozenset((self.left, self.right))


@dataclass(frozen=True, eq=False, repr=False)
class Neq(Formula):
    left: str
    right: str

    def _free_vars(self):
        return frozenset((self.left, self.right))


@dataclass(frozen=True, eq=False, repr=False)
class TrueAtom(Formula):
    pass


@dataclass(frozen=True, eq=False, repr=False)
class FalseAtom(Formula):
    pass


TRUE = TrueAtom()
FALSE = FalseAtom()


@dataclass(frozen=True, eq=False, repr=False)
class DistLeq(Formula):
    """Distance atom d(left,right) <= bound; evaluates to 0 or 1 only."""

    left: str
    right: str
    bound: int

    def _free_vars(self):
        return frozenset((self.left, self.right))


@dataclass(frozen=True, eq=False, repr=False)
class DistGt(Formula):
    left: str
    right: str
    bound: int

    def _free_vars(self):
        return frozenset((self.left, self.right))


@dataclass(frozen=True, eq=False, repr=False)
class And(Formula):
    children: tuple[Formula, ...]

    def _free_vars(self):
        return frozenset().union(*(c.free for c in self.children)) if self.children else frozenset()


@dataclass(frozen=True, eq=False, repr=False)
class Or(Formula):
    children: tuple[Formula, ...]

    def _free_vars(self):
        return frozenset().union(*(c.free for c in self.children)) if self.children else frozenset()


@dataclass(frozen=True, eq=False, repr=False)
class Exists(Formula):
    var: str
    body: Formula

    def _free_vars(self):
        return self.body.free - {self.var}


@dataclass(frozen=True, eq=False, repr=False)
class Forall(Formula):
    var: str
    body: Formula

    def _free_vars(self):
        return self.body.free - {self.var}


@dataclass(frozen=True, eq=False, repr=False)
class BallExists(Formula):
    """Existential quantification over the radius-`radius` ball around
    `centers`, computed in the Gaifman graph of the `sig`-reduct
    (None means the ambient signature)."""

    var: str
    radius: int
    centers: tuple[str, ...]
    sig: Optional[frozenset]
    body: Formula

    def __post_init__(self):
        _vars_ok(self.centers)
        if self.var in self.centers:
            raise FormulaError(f"ball-quantified variable {self.var!r} used as its own center")
        super().__post_init__()

    def _free_vars(self):
        return (self.body.free - {self.var}) | frozenset(self.centers)


@dataclass(frozen=True, eq=False, repr=False)
class BallForall(Formula):
    var: str
    radius: int
    centers: tuple[str, ...]
    sig: Optional[frozenset]
    body: Formula

    def __post_init__(self):
        _vars_ok(self.centers)
        if self.var in self.centers:
            raise FormulaError(f"ball-quantified variable {self.var!r} used as its own center")
        super().__post_init__()

    def _free_vars(self):
        return (self.body.free - {self.var}) | frozenset(self.centers)


@dataclass(frozen=True, eq=False, repr=False)
class OutsideForall(Formula):
    """Universal quantification over the complement of a ball (ambient
    signature).  Empty center tuples are allowed and denote the empty
    ball, so the quantifier then ranges over the whole universe."""

    var: str
    radius: int
    centers: tuple[str, ...]
    body: Formula

    def __post_init__(self):
        _vars_ok(self.centers)
        if self.var in self.centers:
            raise FormulaError(f"outside-quantified variable {self.var!r} used as its own center")
        super().__post_init__()

    def _free_vars(self):
        return (self.body.free - {self.var}) | frozenset(self.centers)


@dataclass(frozen=True, eq=False, repr=False)
class OutsideExists(Formula):
    var: str
    radius: int
    centers: tuple[str, ...]
    body: Formula

    def __post_init__(self):
        _vars_ok(self.centers)
        if self.var in self.centers:
            raise FormulaError(f"outside-quantified variable {self.var!r} used as its own center")
        super().__post_init__()

    def _free_vars(self):
        return (self.body.free - {self.var}) | frozenset(self.centers)


@dataclass(frozen=True, eq=False, repr=False)
class ScatteredExists(Formula):
    """Esc r {v1..vm}: existentially quantify a tuple whose entries are
    pairwise at distance > 2r."""

    vars_: tuple[str, ...]
    radius: int
    body: Formula

    def __post_init__(self):
        _vars_ok(self.vars_)
        if len(set(self.vars_)) != len(self.vars_):
            raise FormulaError("scattered quantifier repeats a variable")
        super().__post_init__()

    def _free_vars(self):
        return self.body.free - set(self.vars_)


@dataclass(frozen=True, eq=False, repr=False)
class ScatteredForall(Formula):
    vars_: tuple[str, ...]
    radius: int
    body: Formula

    def __post_init__(self):
        _vars_ok(self.vars_)
        if len(set(self.vars_)) != len(self.vars_):
            raise FormulaError("scattered quantifier repeats a variable")
        super().__post_init__()

    def _free_vars(self):
        return self.body.free - set(self.vars_)


ATOMS = (PosAtom, NegAtom, Eq, Neq, TrueAtom, FalseAtom, DistLeq, DistGt)
BALL = (BallExists, BallForall)
OUTSIDE = (OutsideForall, OutsideExists)
SCATTERED = (ScatteredExists, ScatteredForall)
PLAIN = (Exists, Forall)


_fresh_counter = itertools.count(1)


def fresh_var(prefix: str = "_v") -> str:
    return f"{prefix}{next(_fresh_counter)}"


# ---------------------------------------------------------------------------
# Generic traversal helpers
# ---------------------------------------------------------------------------

def children_of(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, (And, Or)):
        return f.children
    if isinstance(f, (Exists, Forall, *BALL, *OUTSIDE, *SCATTERED)):
        return (f.body,)
    return ()


def replace_children(f: Formula, new: Sequence[Formula]) -> Formula:
    if isinstance(f, And):
        return And(tuple(new))
    if isinstance(f, Or):
        return Or(tuple(new))
    if isinstance(f, Exists):
        return Exists(f.var, new[0])
    if isinstance(f, Forall):
        return Forall(f.var, new[0])
    if isinstance(f, BallExists):
        return BallExists(f.var, f.radius, f.centers, f.sig, new[0])
    if isinstance(f, BallForall):
        return BallForall(f.var, f.radius, f.centers, f.sig, new[0])
    if isinstance(f, OutsideForall):
        return OutsideForall(f.var, f.radius, f.centers, new[0])
    if isinstance(f, OutsideExists):
        return OutsideExists(f.var, f.radius, f.centers, new[0])
    if isinstance(f, ScatteredExists):
        return ScatteredExists(f.vars_, f.radius, new[0])
    if isinstance(f, ScatteredForall):
        return ScatteredForall(f.vars_, f.radius, new[0])
    return f


def walk(f: Formula) -> Iterator[Formula]:
    """Yield every node once (nodes shared by reference are not repeated)."""
    seen = set()
    stack = [f]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        yield node
        stack.extend(children_of(node))


def bound_vars(f: Formula) -> set:
    out = set()
    for node in walk(f):
        if isinstance(node, (Exists, Forall, *BALL, *OUTSIDE)):
            out.add(node.var)
        elif isinstance(node, SCATTERED):
            out.update(node.vars_)
    return out


def relations_of(f: Formula) -> set:
    return {n.rel for n in walk(f) if isinstance(n, (PosAtom, NegAtom))}


def substitute(f: Formula, mapping: Mapping[str, str]) -> Formula:
    """Rename free variables of `f` according to `mapping`.

    Bound variables must be disjoint from the mapping's keys and values
    (the pipeline alpha-renames before substituting, so no capture checks
    beyond an assertion are performed here).
    """
    if not mapping or not (f.free & set(mapping)):
        return f

    def sub_var(v: str) -> str:
        return mapping.get(v, v)

    if isinstance(f, PosAtom):
        return PosAtom(f.rel, tuple(sub_var(a) for a in f.args))
    if isinstance(f, NegAtom):
        return NegAtom(f.rel, tuple(sub_var(a) for a in f.args))
    if isinstance(f, Eq):
        return Eq(sub_var(f.left), sub_var(f.right))
    if isinstance(f, Neq):
        return Neq(sub_var(f.left), sub_var(f.right))
    if isinstance(f, DistLeq):
        return DistLeq(sub_var(f.left), sub_var(f.right), f.bound)
    if isinstance(f, DistGt):
        return DistGt(sub_var(f.left), sub_var(f.right), f.bound)
    if isinstance(f, (TrueAtom, FalseAtom)):
        return f
    if isinstance(f, (And, Or)):
        return replace_children(f, [substitute(c, mapping) for c in f.children])
    if isinstance(f, (Exists, Forall)):
        if f.var in mapping or f.var in mapping.values():
            raise FormulaError(f"substitution would capture bound variable {f.var!r}")
        return replace_children(f, [substitute(f.body, mapping)])
    if isinstance(f, BALL):
        if f.var in mapping or f.var in mapping.values():
            raise FormulaError(f"substitution would capture bound variable {f.var!r}")
        body = substitute(f.body, mapping)
        centers = tuple(sub_var(c) for c in f.centers)
        return type(f)(f.var, f.radius, centers, f.sig, body)
    if isinstance(f, OUTSIDE):
        if f.var in mapping or f.var in mapping.values():
            raise FormulaError(f"substitution would capture bound variable {f.var!r}")
        body = substitute(f.body, mapping)
        centers = tuple(sub_var(c) for c in f.centers)
        return type(f)(f.var, f.radius, centers, body)
    if isinstance(f, SCATTERED):
        if any(v in mapping or v in mapping.values() for v in f.vars_):
            raise FormulaError("substitution would capture a scattered variable")
        return replace_children(f, [substitute(f.body, mapping)])
    raise FormulaError(f"unknown node {type(f).__name__}")


def alpha_rename(f: Formula, prefix: str = "_v") -> Formula:
    """Give every bound variable a globally fresh name."""

    def go(g: Formula, env: Mapping[str, str]) -> Formula:
        if isinstance(g, ATOMS):
            return substitute(g, {v: env[v] for v in g.free if v in env})
        if isinstance(g, (And, Or)):
            return replace_children(g, [go(c, env) for c in g.children])
        if isinstance(g, (Exists, Forall)):
            nv = fresh_var(prefix)
            return type(g)(nv, go(g.body, {**env, g.var: nv}))
        if isinstance(g, BALL):
            nv = fresh_var(prefix)
            centers = tuple(env.get(c, c) for c in g.centers)
            return type(g)(nv, g.radius, centers, g.sig, go(g.body, {**env, g.var: nv}))
        if isinstance(g, OUTSIDE):
            nv = fresh_var(prefix)
            centers = tuple(env.get(c, c) for c in g.centers)
            return type(g)(nv, g.radius, centers, go(g.body, {**env, g.var: nv}))
        if isinstance(g, SCATTERED):
            nvs = tuple(fresh_var(prefix) for _ in g.vars_)
            env2 = {**env, **dict(zip(g.vars_, nvs))}
            return type(g)(nvs, g.radius, go(g.body, env2))
        raise FormulaError(f"unknown node {type(g).__name__}")

    return go(f, {})


import functools


@functools.lru_cache(maxsize=1 << 18)
def formula_size(f: Formula) -> int:
    return 1 + sum(formula_size(c) for c in children_of(f))


@functools.lru_cache(maxsize=1 << 17)
def alpha_normal(f: Formula) -> Formula:
    """Canonical bound-variable names (_n1, _n2, ... in traversal order),
    so alpha-equivalent formulae compare structurally equal."""
    counter = itertools.count(1)

    def go(g: Formula, env: Mapping[str, str]) -> Formula:
        if isinstance(g, ATOMS):
            return substitute(g, {v: env[v] for v in g.free if v in env})
        if isinstance(g, (And, Or)):
            return replace_children(g, [go(c, env) for c in g.children])
        if isinstance(g, (Exists, Forall)):
            nv = f"_n{next(counter)}"
            return type(g)(nv, go(g.body, {**env, g.var: nv}))
        if isinstance(g, BALL):
            nv = f"_n{next(counter)}"
            centers = tuple(env.get(c, c) for c in g.centers)
            return type(g)(nv, g.radius, centers, g.sig, go(g.body, {**env, g.var: nv}))
        if isinstance(g, OUTSIDE):
            nv = f"_n{next(counter)}"
            centers = tuple(env.get(c, c) for c in g.centers)
            return type(g)(nv, g.radius, centers, go(g.body, {**env, g.var: nv}))
        if isinstance(g, SCATTERED):
            nvs = tuple(f"_n{next(counter)}" for _ in g.vars_)
            env2 = {**env, **dict(zip(g.vars_, nvs))}
            return type(g)(nvs, g.radius, go(g.body, env2))
        raise FormulaError(f"unknown node {type(g).__name__}")

    return go(f, {})


def check_well_formed(f: Formula, sig: Optional[Signature] = None):
    """Raise FormulaError on double binding along a path or arity mismatch."""

    def go(g: Formula, scope: frozenset):
        if isinstance(g, (PosAtom, NegAtom)) and sig is not None:
            want = sig.arity(g.rel)
            if len(g.args) != want:
                raise FormulaError(
                    f"relation {g.rel!r} has arity {want}, applied to {len(g.args)} arguments"
                )
        binder = None
        if isinstance(g, (Exists, Forall, *BALL, *OUTSIDE)):
            binder = (g.var,)
        elif isinstance(g, SCATTERED):
            binder = g.vars_
        if binder:
            for v in binder:
                if v in scope:
                    raise FormulaError(f"variable {v!r} bound twice on one path")
            scope = scope | frozenset(binder)
        for c in children_of(g):
            go(c, scope)

    go(f, frozenset())


def to_nnf(f: Formula) -> Formula:
    """Negation-normal-form normalisation.

    The tree cannot express negation except on atoms, so this checks the
    invariants and returns the formula unchanged (idempotent by design).
    """
    check_well_formed(f)
    return f


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN_SPEC = [
    ("<=", "LEQ"), ("!=", "NEQ"), ("=", "EQ"), (">", "GT"),
    ("(", "LP"), (")", "RP"), ("[", "LB"), ("]", "RB"),
    ("{", "LC"), ("}", "RC"), (",", "COMMA"), (".", "DOT"),
    ("&", "AND"), ("|", "OR"), ("~", "NOT"), ("@", "AT"),
]


def _tokenize(text: str):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        for lit, kind in _TOKEN_SPEC:
            if text.startswith(lit, i):
                tokens.append((kind, lit, i))
                i += len(lit)
                break
        else:
            if ch.isdigit():
                j = i
                while j < n and text[j].isdigit():
                    j += 1
                tokens.append(("NAT", text[i:j], i))
                i = j
            elif ch.isalpha() or ch == "_":
                j = i
                while j < n and (text[j].isalnum() or text[j] in "_'"):
                    j += 1
                tokens.append(("NAME", text[i:j], i))
                i = j
            else:
                raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(("EOF", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, sig: Signature):
        self.toks = _tokenize(text)
        self.pos = 0
        self.sig = sig

    def peek(self, ahead: int = 0):
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self):
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str):
        tok = self.next()
        if tok[0] != kind:
            raise ParseError(f"expected {kind}, found {tok[1]!r}", tok[2])
        return tok

    def name(self) -> str:
        kind, val, at = self.next()
        if kind != "NAME":
            raise ParseError(f"expected a name, found {val!r}", at)
        return val

    def nat(self) -> int:
        kind, val, at = self.next()
        if kind != "NAT":
            raise ParseError(f"expected a number, found {val!r}", at)
        return int(val)

    def var(self) -> str:
        kind, val, at = self.next()
        if kind != "NAME" or not (val[0].islower() or val[0] == "_"):
            raise ParseError(f"expected a variable (lowercase), found {val!r}", at)
        return val

    def formula(self) -> Formula:
        first = self.conj()
        parts = [first]
        while self.peek()[0] == "OR":
            self.next()
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj(self) -> Formula:
        parts = [self.unit()]
        while self.peek()[0] == "AND":
            self.next()
            parts.append(self.unit())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unit(self) -> Formula:
        kind, val, at = self.peek()
        if kind == "LP":
            self.next()
            f = self.formula()
            self.expect("RP")
            return f
        if kind == "NOT":
            self.next()
            rel = self.name()
            args = self.arg_list()
            self.check_arity(rel, args, at)
            return NegAtom(rel, args)
        if kind == "NAME":
            if val in ("E", "A") and self.peek(1)[0] == "NAME" and self.peek(1)[1][0].islower():
                return self.quantifier(val)
            if val in ("Esc", "Asc") and self.peek(1)[0] == "LB":
                return self.scattered(val)
            if val == "true":
                self.next()
                return TRUE
            if val == "false":
                self.next()
                return FALSE
            if val == "d" and self.peek(1)[0] == "LP":
                return self.distance()
            if self.peek(1)[0] == "LP":
                self.next()
                args = self.arg_list()
                self.check_arity(val, args, at)
                return PosAtom(val, args)
            # VAR = VAR  |  VAR != VAR
            left = self.var()
            op = self.next()
            if op[0] == "EQ":
                return Eq(left, self.var())
            if op[0] == "NEQ":
                return Neq(left, self.var())
            raise ParseError(f"expected '=' or '!=', found {op[1]!r}", op[2])
        raise ParseError(f"unexpected token {val!r}", at)

    def check_arity(self, rel: str, args: tuple, at: int):
        if rel not in self.sig:
            raise ParseError(f"unknown relation {rel!r}", at)
        want = self.sig.arity(rel)
        if len(args) != want:
            raise ParseError(f"relation {rel!r} expects {want} arguments, got {len(args)}", at)

    def arg_list(self) -> tuple[str, ...]:
        self.expect("LP")
        args = [self.var()]
        while self.peek()[0] == "COMMA":
            self.next()
            args.append(self.var())
        self.expect("RP")
        return tuple(args)

    def distance(self) -> Formula:
        self.next()  # 'd'
        self.expect("LP")
        left = self.var()
        self.expect("COMMA")
        right = self.var()
        self.expect("RP")
        op = self.next()
        if op[0] == "LEQ":
            return DistLeq(left, right, self.nat())
        if op[0] == "GT":
            return DistGt(left, right, self.nat())
        raise ParseError(f"expected '<=' or '>', found {op[1]!r}", op[2])

    def quantifier(self, q: str) -> Formula:
        self.next()  # E or A
        v = self.var()
        kind, val, at = self.peek()
        if kind == "DOT":
            self.next()
            body = self.unit()
            return Exists(v, body) if q == "E" else Forall(v, body)
        if kind == "NAME" and val in ("in", "notin"):
            self.next()
            bname = self.name()
            if bname != "B":
                raise ParseError(f"expected 'B', found {bname!r}", at)
            self.expect("LB")
            radius = self.nat()
            self.expect("RB")
            centers = self.center_list()
            if val == "notin":
                self.expect("DOT")
                body = self.unit()
                return (OutsideForall if q == "A" else OutsideExists)(v, radius, centers, body)
            sig = None
            if self.peek()[0] == "AT":
                self.next()
                self.expect("LC")
                rels = [self.name()]
                while self.peek()[0] == "COMMA":
                    self.next()
                    rels.append(self.name())
                self.expect("RC")
                for r in rels:
                    if r not in self.sig:
                        raise ParseError(f"unknown relation {r!r} in ball signature", at)
                sig = frozenset(rels)
            self.expect("DOT")
            body = self.unit()
            return (BallExists if q == "E" else BallForall)(v, radius, centers, sig, body)
        raise ParseError(f"expected '.', 'in' or 'notin', found {val!r}", at)

    def center_list(self) -> tuple[str, ...]:
        self.expect("LP")
        centers = [self.var()]
        while self.peek()[0] in ("COMMA", "NAME"):
            if self.peek()[0] == "COMMA":
                self.next()
            centers.append(self.var())
        self.expect("RP")
        return tuple(centers)

    def scattered(self, q: str) -> Formula:
        self.next()  # Esc / Asc
        self.expect("LB")
        radius = self.nat()
        self.expect("RB")
        vs = [self.var()]
        while self.peek()[0] == "NAME" and (self.peek()[1][0].islower() or self.peek()[1][0] == "_") \
                and self.peek(1)[0] in ("NAME", "DOT"):
            vs.append(self.var())
        self.expect("DOT")
        body = self.unit()
        return (ScatteredExists if q == "Esc" else ScatteredForall)(tuple(vs), radius, body)


def parse(text: str, sig: Signature) -> Formula:
    p = _Parser(text, sig)
    f = p.formula()
    tok = p.peek()
    if tok[0] != "EOF":
        raise ParseError(f"trailing input {tok[1]!r}", tok[2])
    check_well_formed(f, sig)
    return f


# ---------------------------------------------------------------------------
# Renderer
# ---------------------------------------------------------------------------

def render(f: Formula) -> str:
    return _render(f, top=True)


def _paren_unit(f: Formula) -> str:
    if isinstance(f, (And, Or)):
        return f"({_render(f, top=True)})"
    return _render(f, top=True)


def _render(f: Formula, top: bool = False) -> str:
    if isinstance(f, PosAtom):
        return f"{f.rel}({', '.join(f.args)})"
    if isinstance(f, NegAtom):
        return f"~{f.rel}({', '.join(f.args)})"
    if isinstance(f, Eq):
        return f"{f.left} = {f.right}"
    if isinstance(f, Neq):
        return f"{f.left} != {f.right}"
    if isinstance(f, TrueAtom):
        return "true"
    if isinstance(f, FalseAtom):
        return "false"
    if isinstance(f, DistLeq):
        return f"d({f.left}, {f.right}) <= {f.bound}"
    if isinstance(f, DistGt):
        return f"d({f.left}, {f.right}) > {f.bound}"
    if isinstance(f, And):
        parts = [
            f"({_render(c, top=True)})" if isinstance(c, Or) else _render(c)
            for c in f.children
        ]
        return " & ".join(parts) if parts else "true"
    if isinstance(f, Or):
        parts = [_render(c) for c in f.children]
        return " | ".join(parts) if parts else "false"
    if isinstance(f, Exists):
        return f"E {f.var} . {_paren_unit(f.body)}"
    if isinstance(f, Forall):
        return f"A {f.var} . {_paren_unit(f.body)}"
    if isinstance(f, BALL):
        q = "E" if isinstance(f, BallExists) else "A"
        sig = "" if f.sig is None else " @ {" + ", ".join(sorted(f.sig)) + "}"
        centers = ", ".join(f.centers)
        return f"{q} {f.var} in B[{f.radius}]({centers}){sig} . {_paren_unit(f.body)}"
    if isinstance(f, OUTSIDE):
        q = "A" if isinstance(f, OutsideForall) else "E"
        centers = ", ".join(f.centers)
        return f"{q} {f.var} notin B[{f.radius}]({centers}) . {_paren_unit(f.body)}"
    if isinstance(f, SCATTERED):
        q = "Esc" if isinstance(f, ScatteredExists) else "Asc"
        return f"{q} [{f.radius}] {' '.join(f.vars_)} . {_paren_unit(f.body)}"
    raise FormulaError(f"unknown node {type(f).__name__}")


# ---------------------------------------------------------------------------
# Quantification dag and locality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantificationDag:
    """Nodes are the variables of the formula; one labelled edge per
    (ball quantifier, center) pair, pointing from the bound variable to
    the center."""

    nodes: frozenset
    edges: tuple  # of (child, parent, label)

    def longest_into(self, var: str) -> int:
        incoming = {}
        for child, parent, label in self.edges:
            incoming.setdefault(parent, []).append((child, label))
        memo = {}

        def depth(v):
            if v in memo:
                return memo[v]
            best = 0
            for child, label in incoming.get(v, ()):
                best = max(best, label + depth(child))
            memo[v] = best
            return best

        return depth(var)


def quantification_dag(f: Formula) -> QuantificationDag:
    nodes = set(f.free)
    edges = []

    def go(g: Formula):
        if isinstance(g, (Exists, Forall)):
            nodes.add(g.var)
        elif isinstance(g, BALL):
            nodes.add(g.var)
            for c in g.centers:
                nodes.add(c)
                edges.append((g.var, c, g.radius))
        elif isinstance(g, OUTSIDE):
            nodes.add(g.var)
            nodes.update(g.centers)
        elif isinstance(g, SCATTERED):
            nodes.update(g.vars_)
        for c in children_of(g):
            go(c)

    go(f)
    return QuantificationDag(frozenset(nodes), tuple(edges))


def _locality_edges(f: Formula) -> Optional[tuple]:
    """Edges of the quantification dag extended with one virtual edge per
    distance atom, charged against the atom's first argument (the
    one-sided ball encoding of d(x,y)<=r is r-local only around x).
    Returns None if a plain or outside quantifier occurs."""
    edges = []
    counter = itertools.count()

    def go(g: Formula) -> bool:
        if isinstance(g, (Exists, Forall, *OUTSIDE, *SCATTERED)):
            return False
        if isinstance(g, (DistLeq, DistGt)):
            edges.append((f"_dist{next(counter)}", g.left, g.bound))
            return True
        if isinstance(g, BALL):
            for c in g.centers:
                edges.append((g.var, c, g.radius))
        return all(go(c) for c in children_of(g))

    if not go(f):
        return None
    return tuple(edges)


def locality_radius(f: Formula, around: Sequence[str]) -> Optional[int]:
    """Smallest r such that f is r-local around `around`, or None if f
    contains plain, outside or scattered quantifiers."""
    edges = _locality_edges(f)
    if edges is None:
        return None
    dag = QuantificationDag(frozenset(v for e in edges for v in e[:2]) | set(around), edges)
    return max((dag.longest_into(v) for v in around), default=0)


def check_local(f: Formula, around: Sequence[str], r: int) -> bool:
    """True iff f uses only ball quantifiers (and distance atoms) and every
    quantification path ending in a variable of `around` has total label
    sum at most r."""
    rad = locality_radius(f, around)
    return rad is not None and rad <= r


# ---------------------------------------------------------------------------
# Dualization
# ---------------------------------------------------------------------------

_DUAL_PAIRS = {
    And: Or, Or: And,
    Exists: Forall, Forall: Exists,
    BallExists: BallForall, BallForall: BallExists,
    OutsideForall: OutsideExists, OutsideExists: OutsideForall,
    ScatteredExists: ScatteredForall, ScatteredForall: ScatteredExists,
}


def dualize(f: Formula) -> Formula:
    """Swap E/A (plain, ball, outside, scattered), And/Or, =/!=, true/false
    and the two distance comparisons; relation literals are unchanged.

    Equalities and distance atoms must flip because their semantics is
    pinned to the semiring constants: over the dual semiring the roles of
    0 and 1 are exchanged, and the swap is exactly what makes
    pi[[f]] = dual-pi[[dualize(f)]] hold.
    """
    if isinstance(f, (PosAtom, NegAtom)):
        return f
    if isinstance(f, Eq):
        return Neq(f.left, f.right)
    if isinstance(f, Neq):
        return Eq(f.left, f.right)
    if isinstance(f, TrueAtom):
        return FALSE
    if isinstance(f, FalseAtom):
        return TRUE
    if isinstance(f, DistLeq):
        return DistGt(f.left, f.right, f.bound)
    if isinstance(f, DistGt):
        return DistLeq(f.left, f.right, f.bound)
    if isinstance(f, (And, Or)):
        return _DUAL_PAIRS[type(f)](tuple(dualize(c) for c in f.children))
    if isinstance(f, (Exists, Forall)):
        return _DUAL_PAIRS[type(f)](f.var, dualize(f.body))
    if isinstance(f, BALL):
        return _DUAL_PAIRS[type(f)](f.var, f.radius, f.centers, f.sig, dualize(f.body))
    if isinstance(f, OUTSIDE):
        return _DUAL_PAIRS[type(f)](f.var, f.radius, f.centers, dualize(f.body))
    if isinstance(f, SCATTERED):
        return _DUAL_PAIRS[type(f)](f.vars_, f.radius, dualize(f.body))
    raise FormulaError(f"unknown node {type(f).__name__}")


# ---------------------------------------------------------------------------
# Simplification (sound in every min-max semiring)
# ---------------------------------------------------------------------------

def simplify(f: Formula) -> Formula:
    """Apply rewrites valid in all min-max semirings: idempotence,
    absorption, flattening, constant folding with true/false (1 is the
    greatest and 0 the least element there), factoring out common
    conjuncts/disjuncts, and dropping vacuous non-outside quantifiers.

    The result is minmax-equivalent to the input; it is generally NOT
    equivalent over non-idempotent semirings such as the natural one.
    """
    memo: dict = {}

    def go(g: Formula) -> Formula:
        if g in memo:
            return memo[g]
        out = _simplify_node(g, go)
        memo[g] = out
        return out

    prev = None
    cur = f
    for _ in range(8):
        if prev is cur:
            break
        prev = cur
        memo.clear()
        cur = go(cur)
        if cur == prev:
            break
    return cur


def _simplify_node(g: Formula, go) -> Formula:
    if isinstance(g, Eq):
        return TRUE if g.left == g.right else g
    if isinstance(g, Neq):
        return FALSE if g.left == g.right else g
    if isinstance(g, DistLeq):
        return TRUE if g.left == g.right else g
    if isinstance(g, DistGt):
        return FALSE if g.left == g.right else g
    if isinstance(g, ATOMS):
        return g

    if isinstance(g, (And, Or)):
        is_and = isinstance(g, And)
        absorber = FALSE if is_and else TRUE   # x & false = false ; x | true = true
        neutral = TRUE if is_and else FALSE
        flat: list[Formula] = []
        for c in g.children:
            c = go(c)
            if isinstance(c, type(g)):
                flat.extend(c.children)
            else:
                flat.append(c)
        out: list[Formula] = []
        seen = set()
        for c in flat:
            if c == absorber:
                return absorber
            if c == neutral:
                continue
            key = alpha_normal(c)
            if key in seen:
                continue
            seen.add(key)
            out.append(c)
        out = _absorb(out, is_and)
        out = _factor(out, is_and)
        if not out:
            return neutral
        if len(out) == 1:
            return out[0]
        return (And if is_and else Or)(tuple(out))

    if isinstance(g, (Exists, Forall)):
        body = go(g.body)
        if isinstance(body, FalseAtom):
            return FALSE
        if isinstance(body, TrueAtom):
            return TRUE
        if g.var not in body.free:
            return body  # universe is nonempty and operations idempotent
        exists = isinstance(g, Exists)
        rebuilt = _miniscope(body, g.var, exists,
                             lambda b: type(g)(g.var, b), go)
        return rebuilt

    if isinstance(g, BALL):
        body = go(g.body)
        empty_ball = not g.centers
        if isinstance(g, BallExists):
            if isinstance(body, FalseAtom) or empty_ball:
                return FALSE
            if isinstance(body, TrueAtom):
                return TRUE
        else:
            if isinstance(body, TrueAtom) or empty_ball:
                return TRUE
            if isinstance(body, FalseAtom):
                return FALSE
        if g.var not in body.free:
            return body  # ball contains its centers, hence nonempty
        return _miniscope(body, g.var, isinstance(g, BallExists),
                          lambda b: type(g)(g.var, g.radius, g.centers, g.sig, b), go)

    if isinstance(g, OUTSIDE):
        body = go(g.body)
        # the complement of a ball may be empty, so only foldings and
        # extractions against the quantifier's neutral element are sound
        exists = isinstance(g, OutsideExists)
        if not exists and isinstance(body, TrueAtom):
            return TRUE
        if exists and isinstance(body, FalseAtom):
            return FALSE
        wrap = lambda b: type(g)(g.var, g.radius, g.centers, b)
        inner_t, outer_t = (And, Or) if exists else (Or, And)
        if isinstance(body, outer_t):
            # the fold over the (possibly empty) complement splits exactly
            return go(outer_t(tuple(wrap(c) for c in body.children)))
        if isinstance(body, inner_t):
            # parts without the variable move out: against 0 (sums) or 1
            # (products) this is exact even for an empty complement
            dep = [c for c in body.children if g.var in c.free]
            rest = [c for c in body.children if g.var not in c.free]
            if rest and dep:
                inner = dep[0] if len(dep) == 1 else inner_t(tuple(dep))
                return go(inner_t(tuple(rest + [wrap(inner)])))
        return wrap(body)

    if isinstance(g, SCATTERED):
        body = go(g.body)
        if len(g.vars_) == 1:
            # a single scattered variable has no distance guards
            return go((Exists if isinstance(g, ScatteredExists) else Forall)(g.vars_[0], body))
        exists = isinstance(g, ScatteredExists)
        if exists and isinstance(body, FalseAtom):
            return FALSE
        if not exists and isinstance(body, TrueAtom):
            return TRUE
        inner_t = And if exists else Or
        if isinstance(body, inner_t):
            # parts free of all scattered variables move out
            vs = set(g.vars_)
            dep = [c for c in body.children if c.free & vs]
            rest = [c for c in body.children if not (c.free & vs)]
            if rest:
                inner = inner_t(tuple(dep)) if len(dep) > 1 else \
                    (dep[0] if dep else (TRUE if exists else FALSE))
                return go(inner_t(tuple(rest + [type(g)(g.vars_, g.radius, inner)])))
        return type(g)(g.vars_, g.radius, body)

    raise FormulaError(f"unknown node {type(g).__name__}")


def _miniscope(body: Formula, var: str, exists: bool, wrap, go):
    """Distribute a (nonempty-range) quantifier over its matching
    connective and pull variable-free parts out of the other one; these
    are the quantifier-scoping equivalences of min-max semirings."""
    dist_t = Or if exists else And
    pull_t = And if exists else Or
    if isinstance(body, dist_t):
        parts = [wrap(c) if var in c.free else c for c in body.children]
        return go(dist_t(tuple(parts)))
    if isinstance(body, pull_t):
        dep = [c for c in body.children if var in c.free]
        rest = [c for c in body.children if var not in c.free]
        if rest and dep:
            inner = dep[0] if len(dep) == 1 else pull_t(tuple(dep))
            return go(pull_t(tuple(rest + [wrap(inner)])))
    return wrap(body)


@functools.lru_cache(maxsize=1 << 18)
def _leq_memo(f: Formula, g: Formula, depth: int) -> bool:
    if f == g:
        return True
    if isinstance(f, FalseAtom) or isinstance(g, TrueAtom):
        return True
    if depth <= 0:
        return False
    if isinstance(g, Or) and any(_leq_memo(f, c, depth - 1) for c in g.children):
        return True
    if isinstance(f, And) and any(_leq_memo(c, g, depth - 1) for c in f.children):
        return True
    if isinstance(f, Or):
        return all(_leq_memo(c, g, depth - 1) for c in f.children)
    if isinstance(g, And):
        return all(_leq_memo(f, c, depth - 1) for c in g.children)
    same_binder = None
    if type(f) is type(g):
        if isinstance(f, (Exists, Forall)):
            same_binder = True
        elif isinstance(f, BALL) and f.radius == g.radius \
                and f.centers == g.centers and f.sig == g.sig:
            same_binder = True
        elif isinstance(f, OUTSIDE) and f.radius == g.radius and f.centers == g.centers:
            same_binder = True
    if same_binder:
        if f.var == g.var:
            return _leq_memo(f.body, g.body, depth - 1)
        w = fresh_var()
        return _leq_memo(substitute(f.body, {f.var: w}),
                         substitute(g.body, {g.var: w}), depth - 1)
    if type(f) is type(g) and isinstance(f, SCATTERED) and \
            f.radius == g.radius and len(f.vars_) == len(g.vars_):
        if f.vars_ == g.vars_:
            return _leq_memo(f.body, g.body, depth - 1)
        ws = {v: fresh_var() for v in f.vars_}
        fb = substitute(f.body, ws)
        gb = substitute(g.body, dict(zip(g.vars_, (ws[v] for v in f.vars_))))
        return _leq_memo(fb, gb, depth - 1)
    return False


def syntactic_leq(f: Formula, g: Formula, depth: int = 12) -> bool:
    """Conservative syntactic check that f <= g pointwise over every
    min-max semiring and interpretation (sound, incomplete).  Used for
    absorption: in a disjunction a dominated child can be dropped, in a
    conjunction a dominating one."""
    return _leq_memo(alpha_normal(f), alpha_normal(g), depth)


def _absorb(children: list, is_and: bool) -> list:
    """Absorption via the syntactic pointwise order: inside Or drop any
    child dominated by another (max unchanged), inside And any child
    dominating another (min unchanged).  Skipped for very wide or very
    large sibling lists, where the quadratic comparison is not worth it."""
    if len(children) > 40:
        return children
    sizes = [formula_size(c) for c in children]
    keep: list = []
    for i, c in enumerate(children):
        absorbed = False
        for j, d in enumerate(children):
            if i == j or sizes[i] + sizes[j] > 400:
                continue
            if syntactic_leq(d, c) if is_and else syntactic_leq(c, d):
                absorbed = True
                break
        if not absorbed:
            keep.append(c)
    return keep


def _factor(children: list, is_and: bool) -> list:
    """Distributivity-based factoring: (a&x)|(a&y) -> a&(x|y), dually for
    And over Or.  Strictly reduces node count; applied greedily."""
    inner_t = Or if is_and else And
    outer_t = And if is_and else Or
    while True:
        groups: dict = {}
        for idx, c in enumerate(children):
            if isinstance(c, inner_t):
                for part in c.children:
                    groups.setdefault(part, []).append(idx)
        best = None
        for part, idxs in groups.items():
            if len(idxs) >= 2 and (best is None or len(idxs) > len(groups[best])):
                best = part
        if best is None:
            return children
        idxs = set(groups[best])
        rest = [c for i, c in enumerate(children) if i not in idxs]
        residues = []
        for i in sorted(idxs):
            c = children[i]
            others = tuple(p for p in c.children if p != best)
            if not others:
                residues = None  # one factored child equals `best`: absorption
                break
            residues.append(others[0] if len(others) == 1 else inner_t(others))
        if residues is None:
            factored = best
        else:
            residue = outer_t(tuple(residues)) if len(residues) > 1 else residues[0]
            factored = inner_t((best, residue))
        children = rest + [factored]
        if len(children) == 1:
            return children


# ---------------------------------------------------------------------------
# Prenex normal form (plain quantifiers only; minmax-equivalent)
# ---------------------------------------------------------------------------

def prenex_decompose(f: Formula) -> tuple[list[tuple[str, str]], Formula]:
    """Return ([(kind, var), ...], matrix) with kind in {'E', 'A'}.

    Only plain quantifiers are hoisted; the input must not contain ball,
    outside or scattered quantifiers.  Bound variables are renamed fresh.
    Child prefixes are merged greedily by quantifier kind to keep the
    number of alternations small.
    """
    for node in walk(f):
        if isinstance(node, (*BALL, *OUTSIDE, *SCATTERED)):
            raise FormulaError("prenex normal form requires plain quantifiers only")
    f = alpha_rename(f)

    def go(g: Formula) -> tuple[list, Formula]:
        if isinstance(g, ATOMS):
            return [], g
        if isinstance(g, (Exists, Forall)):
            prefix, matrix = go(g.body)
            kind = "E" if isinstance(g, Exists) else "A"
            return [(kind, g.var)] + prefix, matrix
        if isinstance(g, (And, Or)):
            pieces = [go(c) for c in g.children]
            prefixes = [list(p) for p, _ in pieces]
            matrices = [m for _, m in pieces]
            merged: list = []
            pending = [p for p in prefixes if p]
            current = pending[0][0][0] if pending else "E"
            while any(prefixes):
                advanced = False
                for p in prefixes:
                    while p and p[0][0] == current:
                        merged.append(p.pop(0))
                        advanced = True
                if not advanced:
                    current = "A" if current == "E" else "E"
            return merged, replace_children(g, matrices)
        raise FormulaError(f"unknown node {type(g).__name__}")

    return go(f)


def to_prenex(f: Formula) -> Formula:
    """Prenex normal form Q1 v1 ... Qk vk . matrix, minmax-equivalent to f."""
    prefix, matrix = prenex_decompose(f)
    out = matrix
    for kind, var in reversed(prefix):
        out = (Exists if kind == "E" else Forall)(var, out)
    return out


def alternation_blocks(f: Formula) -> tuple[list[tuple[str, tuple[str, ...]]], Formula]:
    """Decompose a prenex formula into maximal same-kind quantifier blocks."""
    blocks: list[tuple[str, list]] = []
    g = f
    while isinstance(g, (Exists, Forall)):
        kind = "E" if isinstance(g, Exists) else "A"
        if blocks and blocks[-1][0] == kind:
            blocks[-1][1].append(g.var)
        else:
            blocks.append((kind, [g.var]))
        g = g.body
    return [(k, tuple(vs)) for k, vs in blocks], g


# ---------------------------------------------------------------------------
# Polarity
# ---------------------------------------------------------------------------

@dataclass
class PolarityReport:
    """Relation name -> 'positive-only' | 'negative-only' | 'both' | 'absent'."""

    by_relation: dict

    def of(self, rel: str) -> str:
        return self.by_relation.get(rel, "absent")


def polarity(f: Formula, sig: Optional[Signature] = None) -> PolarityReport:
    pos, neg = set(), set()
    for node in walk(f):
        if isinstance(node, PosAtom):
            pos.add(node.rel)
        elif isinstance(node, NegAtom):
            neg.add(node.rel)
    rels = set(sig.relations) if sig is not None else (pos | neg)
    report = {}
    for rel in sorted(rels | pos | neg):
        if rel in pos and rel in neg:
            report[rel] = "both"
        elif rel in pos:
            report[rel] = "positive-only"
        elif rel in neg:
            report[rel] = "negative-only"
        else:
            report[rel] = "absent"
    return PolarityReport(report)


# ---------------------------------------------------------------------------
# Desugaring
# ---------------------------------------------------------------------------

def scattered_guards(vars_: Sequence[str], radius: int, kind: str) -> list[Formula]:
    """Pairwise scattering guards: d(vi,vj) > 2r for 'E', <= 2r for 'A'."""
    out: list[Formula] = []
    for i in range(len(vars_)):
        for j in range(i + 1, len(vars_)):
            if kind == "E":
                out.append(DistGt(vars_[i], vars_[j], 2 * radius))
            else:
                out.append(DistLeq(vars_[i], vars_[j], 2 * radius))
    return out


def expand_scattered(f: Formula) -> Formula:
    """Rewrite a scattered quantifier into plain quantifiers with distance
    guards, leaving distance atoms intact."""
    if isinstance(f, ScatteredExists):
        body = And(tuple(scattered_guards(f.vars_, f.radius, "E")) + (f.body,))
        out: Formula = body
        for v in reversed(f.vars_):
            out = Exists(v, out)
        return out
    if isinstance(f, ScatteredForall):
        body = Or(tuple(scattered_guards(f.vars_, f.radius, "A")) + (f.body,))
        out = body
        for v in reversed(f.vars_):
            out = Forall(v, out)
        return out
    raise FormulaError("not a scattered quantifier")


def desugar(f: Formula) -> Formula:
    """Expand scattered quantifiers, encode distance atoms with one-sided
    ball quantifiers, and rewrite true/false to x=x / x!=x on the innermost
    in-scope variable (wrapping in E z . z=z at top level if none exists).
    Multi-center ball and outside quantifiers are core nodes and are kept.
    """

    def go(g: Formula, scope: tuple[str, ...]) -> Formula:
        if isinstance(g, TrueAtom):
            if scope:
                return Eq(scope[-1], scope[-1])
            z = fresh_var()
            return Exists(z, Eq(z, z))
        if isinstance(g, FalseAtom):
            if scope:
                return Neq(scope[-1], scope[-1])
            z = fresh_var()
            return Exists(z, Neq(z, z))
        if isinstance(g, DistLeq):
            v = fresh_var()
            return BallExists(v, g.bound, (g.left,), None, Eq(v, g.right))
        if isinstance(g, DistGt):
            v = fresh_var()
            return BallForall(v, g.bound, (g.left,), None, Neq(v, g.right))
        if isinstance(g, ATOMS):
            return g
        if isinstance(g, SCATTERED):
            return go(expand_scattered(g), scope)
        if isinstance(g, (And, Or)):
            return replace_children(g, [go(c, scope) for c in g.children])
        if isinstance(g, (Exists, Forall)):
            return type(g)(g.var, go(g.body, scope + (g.var,)))
        if isinstance(g, BALL):
            return type(g)(g.var, g.radius, g.centers, g.sig, go(g.body, scope + (g.var,)))
        if isinstance(g, OUTSIDE):
            return type(g)(g.var, g.radius, g.centers, go(g.body, scope + (g.var,)))
        raise FormulaError(f"unknown node {type(g).__name__}")

    return go(f, ())


def quantifier_rank(f: Formula) -> int:
    """Quantifier rank; ball/outside quantifiers count 1, scattered counts
    one per bound variable."""
    if isinstance(f, ATOMS):
        return 0
    if isinstance(f, (And, Or)):
        return max((quantifier_rank(c) for c in f.children), default=0)
    if isinstance(f, (Exists, Forall, *BALL, *OUTSIDE)):
        return 1 + quantifier_rank(f.body)
    if isinstance(f, SCATTERED):
        return len(f.vars_) + quantifier_rank(f.body)
    raise FormulaError(f"unknown node {type(f).__name__}")

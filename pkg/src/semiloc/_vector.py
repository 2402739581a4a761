"""Vectorized exhaustive evaluation for finite semirings.

The space of all value assignments to the instantiated atoms is indexed
like an odometer (first atom in lexicographic order = most significant
digit, values in carrier order), and formula values are computed as
uint8 arrays over whole index ranges at once.  Both semiring operations
are table lookups, so min-max chains and lattices are handled uniformly.

Only used as a fast path by oracle.check_equivalence; any reported
mismatch is re-checked with the scalar evaluator.
"""

from __future__ import annotations

import itertools
from typing import Optional, Sequence

import numpy as np

from . import formula as F
from .formula import Formula, Signature
from .semiring import SemiringSpec

_CHUNK = 1 << 17
_MEMO_CAP = 4096
_FAR = 120  # distance stand-in for "unreachable"; radii are clipped below it

_NODES = (
    F.PosAtom, F.NegAtom, F.Eq, F.Neq, F.TrueAtom, F.FalseAtom,
    F.DistLeq, F.DistGt, F.And, F.Or, F.Exists, F.Forall,
    F.BallExists, F.BallForall, F.OutsideForall, F.OutsideExists,
    F.ScatteredExists, F.ScatteredForall,
)


def supported(f: Formula) -> bool:
    return all(isinstance(node, _NODES) for node in F.walk(f))


class _Space:
    def __init__(self, sig: Signature, spec: SemiringSpec, universe: Sequence[str]):
        from .oracle import atom_order
        self.sig = sig
        self.spec = spec
        self.universe = tuple(universe)
        self.atoms = atom_order(sig, universe)
        self.k = len(spec.carrier)
        self.total = self.k ** len(self.atoms)
        self.add_t = np.array(spec.add_table, dtype=np.uint8)
        self.mul_t = np.array(spec.mul_table, dtype=np.uint8)
        self.zero = np.uint8(spec.zero)
        self.one = np.uint8(spec.one)
        self._atom_pos = {atom: i for i, atom in enumerate(self.atoms)}

    def chunk(self, lo: int, hi: int) -> "_Chunk":
        return _Chunk(self, lo, hi)


class _Chunk:
    def __init__(self, space: _Space, lo: int, hi: int):
        self.s = space
        self.lo = lo
        self.idx = np.arange(lo, hi, dtype=np.int64)
        self._atom_arrays: dict = {}
        self._dist: dict = {}
        self._memo: dict = {}

    def atom(self, rel: str, args: tuple) -> np.ndarray:
        key = (rel, args)
        arr = self._atom_arrays.get(key)
        if arr is None:
            pos = self.s._atom_pos[key]
            stride = self.s.k ** (len(self.s.atoms) - 1 - pos)
            arr = ((self.idx // stride) % self.s.k).astype(np.uint8)
            self._atom_arrays[key] = arr
        return arr

    def distances(self, rels: Optional[frozenset]) -> dict:
        """(a, b) -> uint8 distance array in the Gaifman graph of the
        given reduct (None = full signature)."""
        key = frozenset(self.s.sig.relations) if rels is None else frozenset(rels)
        if key in self._dist:
            return self._dist[key]
        uni = self.s.universe
        n_items = len(self.idx)
        adj = {}
        for a, b in itertools.combinations(uni, 2):
            acc = np.zeros(n_items, dtype=bool)
            for rel, args in self.s.atoms:
                if rel in key and a in args and b in args:
                    acc |= self.atom(rel, args) != self.s.zero
            adj[(a, b)] = acc
            adj[(b, a)] = acc
        dist = {}
        for a in uni:
            for b in uni:
                if a == b:
                    dist[(a, b)] = np.zeros(n_items, dtype=np.uint8)
                else:
                    d = np.full(n_items, _FAR, dtype=np.uint8)
                    d[adj[(a, b)]] = 1
                    dist[(a, b)] = d
        for mid in uni:  # Floyd-Warshall on the tiny vertex set
            for a in uni:
                for b in uni:
                    if a == b:
                        continue
                    via = dist[(a, mid)].astype(np.int16) + dist[(mid, b)].astype(np.int16)
                    np.minimum(dist[(a, b)], np.minimum(via, _FAR).astype(np.uint8),
                               out=dist[(a, b)])
        self._dist[key] = dist
        return dist

    def _in_ball(self, rels, radius: int, centers: Sequence[str], elem: str) -> np.ndarray:
        dist = self.distances(rels)
        r = min(radius, _FAR - 1)
        acc = np.zeros(len(self.idx), dtype=bool)
        for c in centers:
            acc |= dist[(c, elem)] <= r
        return acc

    def eval(self, f: Formula, sigma: dict) -> np.ndarray:
        if f.free:
            key = (f, tuple(sorted((v, sigma[v]) for v in f.free)))
        else:
            key = f
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        val = self._eval(f, sigma)
        if len(self._memo) < _MEMO_CAP:
            self._memo[key] = val
        return val

    def _const(self, v) -> np.ndarray:
        return np.full(len(self.idx), v, dtype=np.uint8)

    def _eval(self, f: Formula, sigma: dict) -> np.ndarray:
        s = self.s
        if isinstance(f, F.PosAtom):
            return self.atom(f.rel, tuple(sigma[a] for a in f.args))
        if isinstance(f, F.NegAtom):
            pos = self.atom(f.rel, tuple(sigma[a] for a in f.args))
            return np.where(pos == s.zero, s.one, s.zero)
        if isinstance(f, F.Eq):
            return self._const(s.one if sigma[f.left] == sigma[f.right] else s.zero)
        if isinstance(f, F.Neq):
            return self._const(s.zero if sigma[f.left] == sigma[f.right] else s.one)
        if isinstance(f, F.TrueAtom):
            return self._const(s.one)
        if isinstance(f, F.FalseAtom):
            return self._const(s.zero)
        if isinstance(f, F.DistLeq):
            d = self.distances(None)[(sigma[f.left], sigma[f.right])]
            return np.where(d <= min(f.bound, _FAR - 1), s.one, s.zero)
        if isinstance(f, F.DistGt):
            d = self.distances(None)[(sigma[f.left], sigma[f.right])]
            return np.where(d > min(f.bound, _FAR - 1), s.one, s.zero)
        if isinstance(f, F.And):
            acc = self._const(s.one)
            for c in f.children:
                acc = s.mul_t[acc, self.eval(c, sigma)]
            return acc
        if isinstance(f, F.Or):
            acc = self._const(s.zero)
            for c in f.children:
                acc = s.add_t[acc, self.eval(c, sigma)]
            return acc
        if isinstance(f, (F.Exists, F.Forall)):
            table, acc = (s.add_t, self._const(s.zero)) if isinstance(f, F.Exists) \
                else (s.mul_t, self._const(s.one))
            for e in s.universe:
                sigma[f.var] = e
                acc = table[acc, self.eval(f.body, sigma)]
            sigma.pop(f.var, None)
            return acc
        if isinstance(f, (F.BallExists, F.BallForall)):
            exists = isinstance(f, F.BallExists)
            table = s.add_t if exists else s.mul_t
            neutral = s.zero if exists else s.one
            acc = self._const(neutral)
            centers = [sigma[c] for c in f.centers]
            for e in s.universe:
                member = self._in_ball(f.sig, f.radius, centers, e)
                sigma[f.var] = e
                term = np.where(member, self.eval(f.body, sigma), neutral)
                acc = table[acc, term]
            sigma.pop(f.var, None)
            return acc
        if isinstance(f, (F.OutsideForall, F.OutsideExists)):
            forall = isinstance(f, F.OutsideForall)
            table = s.mul_t if forall else s.add_t
            neutral = s.one if forall else s.zero
            acc = self._const(neutral)
            centers = [sigma[c] for c in f.centers]
            for e in s.universe:
                inside = self._in_ball(None, f.radius, centers, e) if centers \
                    else np.zeros(len(self.idx), dtype=bool)
                sigma[f.var] = e
                term = np.where(inside, neutral, self.eval(f.body, sigma))
                acc = table[acc, term]
            sigma.pop(f.var, None)
            return acc
        if isinstance(f, (F.ScatteredExists, F.ScatteredForall)):
            # addition is idempotent in every finite kind we tabulate, so a
            # close pair contributes plain 0 (E-kind) or 1 (A-kind)
            exists = isinstance(f, F.ScatteredExists)
            table = s.add_t if exists else s.mul_t
            neutral = s.zero if exists else s.one
            dist = self.distances(None)
            acc = self._const(neutral)
            bound = min(2 * f.radius, _FAR - 1)
            for tup in itertools.product(s.universe, repeat=len(f.vars_)):
                scattered = np.ones(len(self.idx), dtype=bool)
                for i in range(len(tup)):
                    for j in range(i + 1, len(tup)):
                        scattered &= dist[(tup[i], tup[j])] > bound
                if not scattered.any():
                    continue
                for v, e in zip(f.vars_, tup):
                    sigma[v] = e
                body = self.eval(f.body, sigma)
                term = np.where(scattered, body, neutral)
                acc = table[acc, term]
            for v in f.vars_:
                sigma.pop(v, None)
            return acc
        raise TypeError(f"unsupported node {type(f).__name__}")


def first_mismatch(lhs: Formula, rhs: Formula, frees: Sequence[str], sig: Signature,
                   spec: SemiringSpec, universe: Sequence[str]) -> Optional[tuple]:
    """Least (interpretation index, assignment) where the two formulae
    differ, with assignments ordered per-interpretation; None if equal
    everywhere."""
    space = _Space(sig, spec, universe)
    assignments = [dict(zip(frees, combo))
                   for combo in itertools.product(universe, repeat=len(frees))]
    for lo in range(0, space.total, _CHUNK):
        chunk = space.chunk(lo, min(lo + _CHUNK, space.total))
        masks = []
        combined = np.zeros(len(chunk.idx), dtype=bool)
        for sigma in assignments:
            m = chunk.eval(lhs, dict(sigma)) != chunk.eval(rhs, dict(sigma))
            masks.append(m)
            combined |= m
        if combined.any():
            at = int(np.argmax(combined))
            for sigma, m in zip(assignments, masks):
                if m[at]:
                    return lo + at, sigma
    return None

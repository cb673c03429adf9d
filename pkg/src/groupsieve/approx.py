"""Approximate-subgroup statistics on finite subsets of enumerated groups.

Product sets, greedy covering constants, tripling ratios, multiplicative
energy, Larsen-Pink concentration ratios and growth scans.  Everything
here is exact: subsets are id sets over a GroupTable with a boolean
membership mask, product sets are computed by full pairwise composition
with bitset dedup, and energy is an integer count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import MissingIdentity, NotSymmetric, TableMismatch
from .rng import draw_u64_np
from .table import GroupTable


class FiniteSubset:
    """A subset of an enumerated group, kept as sorted ids plus a mask."""

    __slots__ = ("table", "ids", "mask", "symmetric", "contains_identity")

    def __init__(self, table: GroupTable, ids):
        ids = np.unique(np.asarray(ids, dtype=np.int64))
        if len(ids) and (ids[0] < 0 or ids[-1] >= table.order):
            raise ValueError("ids out of range")
        mask = np.zeros(table.order, dtype=bool)
        mask[ids] = True
        inv = table.inverse_ids()
        self.table = table
        self.ids = ids
        self.mask = mask
        self.symmetric = bool(len(ids)) and bool(mask[inv[ids]].all())
        self.contains_identity = bool(mask[table.identity_id()])

    def __len__(self) -> int:
        return len(self.ids)

    def contains(self, ids) -> np.ndarray:
        return self.mask[np.asarray(ids, dtype=np.int64)]

    def __eq__(self, other) -> bool:
        return (isinstance(other, FiniteSubset) and other.table is self.table
                and len(other.ids) == len(self.ids)
                and bool(np.all(other.ids == self.ids)))

    def __repr__(self):
        return (f"FiniteSubset(|A|={len(self.ids)}, symmetric={self.symmetric}, "
                f"identity={self.contains_identity})")


def random_symmetric_subset(table: GroupTable, size: int, seed: int) -> FiniteSubset:
    """A random symmetric subset containing the identity, |A| >= size.

    Elements are drawn from the counter-based stream for (seed); each draw
    is added together with its inverse, so the result can overshoot the
    requested size by one.  Deterministic in (table, size, seed).
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    inv = table.inverse_ids()
    chosen = {int(table.identity_id())}
    step = 0
    while len(chosen) < size:
        step += 1
        draws = draw_u64_np(seed, step, np.arange(64, dtype=np.uint64))
        for idx in (draws % np.uint64(table.order)).astype(np.int64):
            chosen.add(int(idx))
            chosen.add(int(inv[idx]))
            if len(chosen) >= size:
                break
    return FiniteSubset(table, np.fromiter(chosen, dtype=np.int64))


def product_set(a: FiniteSubset, b: FiniteSubset) -> FiniteSubset:
    """Exact product set {xy : x in A, y in B}."""
    if a.table is not b.table:
        raise TableMismatch("product of subsets of different tables")
    table = a.table
    mask = np.zeros(table.order, dtype=bool)
    # loop over the smaller factor; each pass composes one element with
    # the whole other side
    if len(a) <= len(b):
        for x in a.ids:
            mask[table.compose_ids(int(x), b.ids)] = True
    else:
        for y in b.ids:
            mask[table.compose_ids(a.ids, int(y))] = True
    return FiniteSubset(table, np.nonzero(mask)[0])


def power_set(a: FiniteSubset, n: int) -> FiniteSubset:
    """A^n = A ... A (n factors)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    out = a
    for _ in range(n - 1):
        out = product_set(out, a)
    return out


def greedy_cover(a: FiniteSubset) -> tuple[int, np.ndarray]:
    """Greedy left-translate cover of AA by A: returns (K_hat, X).

    X is grown by repeatedly taking the element of AA whose translate xA
    covers the most still-uncovered elements of AA (smallest id on ties).
    The result satisfies AA subset of XA exactly (verified before
    returning); K_hat = |X| is an upper bound on the minimal covering
    constant, which is not claimed (minimal set cover is hard).
    """
    if not a.symmetric:
        raise NotSymmetric("greedy_cover needs a symmetric set")
    if not a.contains_identity:
        raise MissingIdentity("greedy_cover needs the identity in A")
    table = a.table
    aa = product_set(a, a)
    uncovered = aa.mask.copy()
    translates = {}
    chosen = []
    while uncovered.any():
        best_gain, best_x = -1, -1
        for x in aa.ids:
            x = int(x)
            if x not in translates:
                translates[x] = table.compose_ids(x, a.ids)
            gain = int(uncovered[translates[x]].sum())
            if gain > best_gain:
                best_gain, best_x = gain, x
        if best_gain <= 0:
            raise AssertionError("cover stalled; AA not coverable by xA translates")
        chosen.append(best_x)
        uncovered[translates[best_x]] = False
    x_ids = np.array(sorted(chosen), dtype=np.int64)
    covered = np.zeros(table.order, dtype=bool)
    for x in x_ids:
        covered[table.compose_ids(int(x), a.ids)] = True
    if not bool(covered[aa.ids].all()):
        raise AssertionError("greedy cover failed its own verification")
    return len(x_ids), x_ids


def tripling(a: FiniteSubset) -> float:
    """|AAA| / |A|."""
    if len(a) == 0:
        raise ValueError("empty set")
    return len(power_set(a, 3)) / len(a)


def energy(a: FiniteSubset) -> int:
    """Multiplicative energy E(A,A) = |{(a,b,c,d) in A^4 : ab = cd}|.

    Computed as sum of r(x)^2 where r(x) = |{(a,b) : ab = x}|.
    """
    table = a.table
    r = np.zeros(table.order, dtype=np.int64)
    for x in a.ids:
        np.add.at(r, table.compose_ids(int(x), a.ids), 1)
    return int(np.dot(r, r))


def variety_predicate(table: GroupTable, kind: str, value: int | None = None,
                      line=None) -> tuple[np.ndarray, int]:
    """Boolean membership mask and dimension for a named subvariety of SL_2.

    Supported kinds: "trace" (fixed trace value, dim 2), "diagonal_torus"
    (dim 1), "unipotent_upper" (dim 1), "fixed_line" (stabilizer of a line
    in P^1, dim 2).  dim SL_2 = 3.
    """
    if table.kind != "matrix" or len(table.mods) != 1 or table.mods[0].d != 2:
        raise ValueError("variety predicates need a single-prime SL_2 table")
    p = table.mods[0].p
    ent = table.entries()
    va, vb, vc, vd = ent[:, 0], ent[:, 1], ent[:, 2], ent[:, 3]
    if kind == "trace":
        if value is None:
            raise ValueError("trace variety needs a value")
        return ((va + vd) % p == value % p), 2
    if kind == "diagonal_torus":
        return ((vb == 0) & (vc == 0)), 1
    if kind == "unipotent_upper":
        return ((vc == 0) & (va == 1) & (vd == 1)), 1
    if kind == "fixed_line":
        if line is None:
            raise ValueError("fixed_line needs a line (x, y)")
        x, y = int(line[0]) % p, int(line[1]) % p
        if x == 0 and y == 0:
            raise ValueError("line must be a nonzero vector")
        gx = (va * x + vb * y) % p
        gy = (vc * x + vd * y) % p
        return ((gx * y - gy * x) % p == 0), 2
    raise ValueError(f"unknown variety kind {kind!r}")


def larsen_pink_ratio(a: FiniteSubset, variety, dim_v: int, dim_g: int) -> float:
    """|A intersect V| / |A|^(dim V / dim G).

    variety is a full-length boolean mask or a callable on id arrays.
    """
    if not 0 <= dim_v <= dim_g:
        raise ValueError("need 0 <= dim_v <= dim_g")
    if len(a) == 0:
        raise ValueError("empty set")
    if callable(variety):
        hits = int(np.asarray(variety(a.ids), dtype=bool).sum())
    else:
        hits = int(np.asarray(variety, dtype=bool)[a.ids].sum())
    return hits / len(a) ** (dim_v / dim_g)


@dataclass(frozen=True)
class GrowthScan:
    sizes: tuple[int, ...]
    epsilon: float | None
    saturated: bool
    generates: bool


def growth_scan(a: FiniteSubset, max_power: int = 5) -> GrowthScan:
    """Sizes |A|, |A^2|, ..., |A^max_power| and the measured growth exponent.

    epsilon = log(|A^3|/|A|)/log|A| when |A^3| < |G|, undefined (None) once
    the products saturate the whole group.  generates reports whether the
    powers reached |G| or stalled on a proper subset (a proper subgroup or
    coset structure).
    """
    if max_power < 3:
        raise ValueError("max_power must be >= 3 to measure tripling growth")
    if len(a) == 0:
        raise ValueError("empty set")
    table = a.table
    sizes = [len(a)]
    cur = a
    stalled = False
    for _ in range(max_power - 1):
        nxt = product_set(cur, a)
        sizes.append(len(nxt))
        if len(nxt) == len(cur) and bool(np.all(nxt.ids == cur.ids)):
            stalled = True
        cur = nxt
    saturated = sizes[-1] == table.order
    generates = saturated or not stalled
    if sizes[2] >= table.order:
        eps = None
    elif len(a) == 1:
        eps = 0.0
    else:
        eps = math.log(sizes[2] / sizes[0]) / math.log(sizes[0])
    return GrowthScan(sizes=tuple(sizes), epsilon=eps,
                      saturated=saturated, generates=generates)


@dataclass(frozen=True)
class ApproxReport:
    size: int
    size_aa: int
    size_aaa: int
    k_hat: int
    tripling: float
    energy: int

    def check(self) -> None:
        assert self.k_hat >= 1
        assert self.tripling >= 1.0 - 1e-12
        assert self.energy >= self.size * self.size
        assert self.energy <= self.size ** 3


def approx_report(a: FiniteSubset) -> ApproxReport:
    """Full approximate-subgroup statistics for a symmetric set with 1."""
    aa = product_set(a, a)
    aaa = product_set(aa, a)
    k_hat, _ = greedy_cover(a)
    rep = ApproxReport(size=len(a), size_aa=len(aa), size_aaa=len(aaa),
                       k_hat=k_hat, tripling=len(aaa) / len(a),
                       energy=energy(a))
    rep.check()
    return rep

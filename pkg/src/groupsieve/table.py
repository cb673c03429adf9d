"""Finite group tables and breadth-first enumeration.

A GroupTable stores the elements of a finite group together with the left
action of its generators as permutation arrays, which is all the spectral and
walk layers need. Matrix tables hold SL_d(F_p) elements (or tuples of them for
product groups) as packed integer keys; element ordering is deterministic:
identity first, then each BFS layer sorted by packed key, which coincides with
lexicographic order on the row-major entry vectors.

Entry packing uses mixed-radix Horner evaluation, one block of d^2 base-p
digits per prime. Packing requires the full radix product to fit in a signed
64-bit word, which holds for every dimension/prime combination under the
enumeration cap.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CapExceeded,
    DimensionMismatch,
    NotASubgroup,
    UnsupportedDimension,
)
from .modp import GenSet, IntMat, MatFp, PrimeModulus, reduce_mod

DEFAULT_CAP = 8_000_000


def _radix_for(mods: Sequence[PrimeModulus]) -> np.ndarray:
    radix = []
    for mod in mods:
        radix.extend([mod.p] * (mod.d * mod.d))
    total = 1
    for r in radix:
        total *= r
        if total > 2 ** 62:
            raise DimensionMismatch("packed key would overflow 64 bits")
    return np.asarray(radix, dtype=np.int64)


def _pack(entries: np.ndarray, radix: np.ndarray) -> np.ndarray:
    keys = np.zeros(entries.shape[0], dtype=np.int64)
    for col in range(radix.shape[0]):
        keys *= radix[col]
        keys += entries[:, col]
    return keys


def _unpack(keys: np.ndarray, radix: np.ndarray) -> np.ndarray:
    out = np.empty((keys.shape[0], radix.shape[0]), dtype=np.int64)
    rem = keys.astype(np.int64).copy()
    for col in range(radix.shape[0] - 1, -1, -1):
        out[:, col] = rem % radix[col]
        rem //= radix[col]
    return out


def _block_spans(mods: Sequence[PrimeModulus]) -> list[tuple[int, int, int]]:
    """(offset, d, p) per block."""
    spans = []
    off = 0
    for mod in mods:
        spans.append((off, mod.d, mod.p))
        off += mod.d * mod.d
    return spans


def _left_mul_row(g_row: np.ndarray, entries: np.ndarray,
                  spans: list[tuple[int, int, int]]) -> np.ndarray:
    """Blockwise g @ x for a single generator row against a batch."""
    out = np.empty_like(entries)
    for off, d, p in spans:
        for i in range(d):
            for j in range(d):
                acc = np.zeros(entries.shape[0], dtype=np.int64)
                for k in range(d):
                    gv = int(g_row[off + i * d + k])
                    if gv:
                        acc += gv * entries[:, off + k * d + j]
                out[:, off + i * d + j] = acc % p
    return out


def _pairwise_mul(a: np.ndarray, b: np.ndarray,
                  spans: list[tuple[int, int, int]]) -> np.ndarray:
    """Row-aligned products a[i] @ b[i]."""
    out = np.empty_like(a)
    for off, d, p in spans:
        for i in range(d):
            for j in range(d):
                acc = np.zeros(a.shape[0], dtype=np.int64)
                for k in range(d):
                    acc += a[:, off + i * d + k] * b[:, off + k * d + j]
                out[:, off + i * d + j] = acc % p
    return out


def _batch_inverse(entries: np.ndarray, spans: list[tuple[int, int, int]]) -> np.ndarray:
    """Inverses of det-1 matrices via the adjugate, blockwise."""
    out = np.empty_like(entries)
    for off, d, p in spans:
        if d == 2:
            a = entries[:, off + 0]
            b = entries[:, off + 1]
            c = entries[:, off + 2]
            e = entries[:, off + 3]
            out[:, off + 0] = e
            out[:, off + 1] = (-b) % p
            out[:, off + 2] = (-c) % p
            out[:, off + 3] = a
        elif d == 3:
            m = [entries[:, off + i] for i in range(9)]
            cof = [
                m[4] * m[8] - m[5] * m[7], m[2] * m[7] - m[1] * m[8], m[1] * m[5] - m[2] * m[4],
                m[5] * m[6] - m[3] * m[8], m[0] * m[8] - m[2] * m[6], m[2] * m[3] - m[0] * m[5],
                m[3] * m[7] - m[4] * m[6], m[1] * m[6] - m[0] * m[7], m[0] * m[4] - m[1] * m[3],
            ]
            for i in range(9):
                out[:, off + i] = cof[i] % p
        else:
            raise UnsupportedDimension(f"batch inverse supports d in {{2, 3}}, got {d}")
    return out


class GroupTable:
    """Enumerated finite group with generator action permutations."""

    __slots__ = ("kind", "mods", "order", "keys", "gen_action", "gens", "steps",
                 "layer_sizes", "_radix", "_sorted_keys", "_sorted_to_id",
                 "_entries", "_inverse_ids")

    def __init__(self, kind: str, mods: tuple[PrimeModulus, ...], keys: np.ndarray,
                 gen_action: np.ndarray, gens: GenSet | None,
                 layer_sizes: tuple[int, ...], steps: tuple[int, ...] = (),
                 radix: np.ndarray | None = None):
        self.kind = kind
        self.mods = mods
        self.order = int(keys.shape[0])
        self.keys = keys
        self.gen_action = gen_action
        self.gens = gens
        self.steps = steps
        self.layer_sizes = layer_sizes
        self._radix = radix
        if kind == "matrix":
            order_idx = np.argsort(keys, kind="stable")
            self._sorted_keys = keys[order_idx]
            self._sorted_to_id = order_idx.astype(np.int64)
        else:
            self._sorted_keys = None
            self._sorted_to_id = None
        self._entries = None
        self._inverse_ids = None

    # -- construction ------------------------------------------------------

    @classmethod
    def enumerate_group(cls, gens: GenSet, mod: PrimeModulus, cap: int = DEFAULT_CAP) -> "GroupTable":
        """BFS closure of the generators inside SL_d(F_p)."""
        return cls._enumerate(gens, (mod,), cap)

    @classmethod
    def enumerate_product(cls, gens: GenSet, mods: Sequence[PrimeModulus],
                          cap: int = DEFAULT_CAP) -> "GroupTable":
        """BFS closure of the diagonal image inside a product of SL_d(F_p_i)."""
        return cls._enumerate(gens, tuple(mods), cap)

    @classmethod
    def _enumerate(cls, gens: GenSet, mods: tuple[PrimeModulus, ...], cap: int) -> "GroupTable":
        radix = _radix_for(mods)
        spans = _block_spans(mods)
        gen_rows = np.stack([_gen_row(m, mods) for m in gens.members])
        ident = np.concatenate([
            np.asarray([1 if i == j else 0 for i in range(mod.d) for j in range(mod.d)],
                       dtype=np.int64)
            for mod in mods
        ])[None, :]
        id_key = int(_pack(ident, radix)[0])
        visited = {id_key}
        all_keys = [np.asarray([id_key], dtype=np.int64)]
        all_entries = [ident]
        layer_sizes = [1]
        frontier = ident
        total = 1
        while frontier.shape[0] > 0:
            cand = np.concatenate([_left_mul_row(g, frontier, spans) for g in gen_rows])
            cand_keys = _pack(cand, radix)
            u_keys, u_idx = np.unique(cand_keys, return_index=True)
            fresh = np.asarray([k not in visited for k in u_keys.tolist()], dtype=bool)
            new_keys = u_keys[fresh]
            if new_keys.shape[0] == 0:
                break
            visited.update(new_keys.tolist())
            total += new_keys.shape[0]
            if total > cap:
                raise CapExceeded(total, cap)
            new_entries = cand[u_idx[fresh]]
            all_keys.append(new_keys)
            all_entries.append(new_entries)
            layer_sizes.append(int(new_keys.shape[0]))
            frontier = new_entries
        keys = np.concatenate(all_keys)
        entries = np.concatenate(all_entries)
        table = cls("matrix", mods, keys, np.empty((0, 0), dtype=np.int64), gens,
                    tuple(layer_sizes), radix=radix)
        table._entries = entries
        table.gen_action = table.action_of(gen_rows)
        return table

    @classmethod
    def cyclic_group(cls, n: int, steps: Iterable[int] = (1, -1)) -> "GroupTable":
        """Z/n with generator steps, symmetrized, as an abstract table."""
        norm = []
        for s in steps:
            s = s % n
            if s == 0:
                continue
            if s not in norm:
                norm.append(s)
        for s in list(norm):
            if (n - s) % n not in norm:
                norm.append((n - s) % n)
        if not norm:
            raise ValueError("no nontrivial steps")
        keys = np.arange(n, dtype=np.int64)
        gen_action = np.stack([(keys + s) % n for s in norm]).astype(np.int64)
        return cls("cyclic", (), keys, gen_action, None, (n,), steps=tuple(norm))

    # -- lookups -----------------------------------------------------------

    def entries(self) -> np.ndarray:
        """Row-major entry matrix, one row per element, BFS order."""
        if self.kind != "matrix":
            raise UnsupportedDimension("abstract tables have no matrix entries")
        if self._entries is None:
            self._entries = _unpack(self.keys, self._radix)
        return self._entries

    def spans(self) -> list[tuple[int, int, int]]:
        return _block_spans(self.mods)

    def ids_of_keys(self, keys: np.ndarray, strict: bool = True) -> np.ndarray:
        pos = np.searchsorted(self._sorted_keys, keys)
        pos = np.clip(pos, 0, self._sorted_keys.shape[0] - 1)
        ids = self._sorted_to_id[pos]
        if strict:
            if not np.array_equal(self._sorted_keys[pos], keys):
                raise KeyError("some keys are not elements of the table")
        return ids

    def member_mask_of_keys(self, probe: np.ndarray, member_sorted_keys: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(member_sorted_keys, probe)
        pos = np.clip(pos, 0, max(0, member_sorted_keys.shape[0] - 1))
        if member_sorted_keys.shape[0] == 0:
            return np.zeros(probe.shape[0], dtype=bool)
        return member_sorted_keys[pos] == probe

    def action_of(self, gen_rows: np.ndarray) -> np.ndarray:
        """Left-multiplication permutations for explicit generator rows."""
        spans = self.spans()
        ent = self.entries()
        acts = []
        for g in gen_rows:
            prod = _left_mul_row(g, ent, spans)
            acts.append(self.ids_of_keys(_pack(prod, self._radix)))
        return np.stack(acts)

    def action_of_mats(self, mats: Sequence[MatFp]) -> np.ndarray:
        rows = np.stack([_gen_row(m, self.mods) for m in mats])
        return self.action_of(rows)

    def identity_id(self) -> int:
        return 0

    def compose_ids(self, a_ids: np.ndarray, b_ids: np.ndarray) -> np.ndarray:
        """Row-aligned products; broadcasting a scalar id against an array is allowed."""
        a_ids = np.atleast_1d(np.asarray(a_ids, dtype=np.int64))
        b_ids = np.atleast_1d(np.asarray(b_ids, dtype=np.int64))
        if a_ids.shape[0] == 1 and b_ids.shape[0] > 1:
            a_ids = np.broadcast_to(a_ids, b_ids.shape)
        if b_ids.shape[0] == 1 and a_ids.shape[0] > 1:
            b_ids = np.broadcast_to(b_ids, a_ids.shape)
        if self.kind == "cyclic":
            return (a_ids + b_ids) % self.order
        ent = self.entries()
        prod = _pairwise_mul(ent[a_ids], ent[b_ids], self.spans())
        return self.ids_of_keys(_pack(prod, self._radix))

    def inverse_ids(self) -> np.ndarray:
        """Permutation mapping each element id to the id of its inverse."""
        if self._inverse_ids is None:
            if self.kind == "cyclic":
                self._inverse_ids = (-self.keys) % self.order
            else:
                inv = _batch_inverse(self.entries(), self.spans())
                self._inverse_ids = self.ids_of_keys(_pack(inv, self._radix))
        return self._inverse_ids

    def mat_of_id(self, idx: int) -> MatFp:
        if self.kind != "matrix" or len(self.mods) != 1:
            raise UnsupportedDimension("mat_of_id requires a single-prime matrix table")
        row = self.entries()[idx]
        return MatFp(self.mods[0], [int(x) for x in row])

    def k(self) -> int:
        return int(self.gen_action.shape[0])

    def __repr__(self):
        return f"GroupTable(kind={self.kind}, order={self.order}, k={self.k()})"


def _gen_row(mat, mods: tuple[PrimeModulus, ...]) -> np.ndarray:
    """Flatten a generator to a concatenated entry row over all blocks."""
    if isinstance(mat, MatFp):
        if len(mods) != 1 or mat.mod != mods[0]:
            raise DimensionMismatch("generator modulus does not match table modulus")
        return np.asarray(mat.entries, dtype=np.int64)
    if isinstance(mat, IntMat):
        parts = []
        for mod in mods:
            parts.append(np.asarray(reduce_mod(mat, mod).entries, dtype=np.int64))
        return np.concatenate(parts)
    raise TypeError(f"unsupported generator type {type(mat)!r}")


def enumerate_group(gens: GenSet, mod: PrimeModulus, cap: int = DEFAULT_CAP) -> GroupTable:
    """BFS enumeration of the subgroup generated mod p."""
    return GroupTable.enumerate_group(gens, mod, cap)


def special_linear_order(p: int, d: int) -> int:
    """|SL_d(F_p)| = p^(d(d-1)/2) * prod_{i=2..d} (p^i - 1)."""
    n = p ** (d * (d - 1) // 2)
    for i in range(2, d + 1):
        n *= p ** i - 1
    return n


def elementary_generators(mod: PrimeModulus) -> GenSet:
    """The unit elementary matrices E_ij(1), a standard generating set of SL_d."""
    d = mod.d
    mats = []
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            ent = [1 if a == b else 0 for a in range(d) for b in range(d)]
            ent[i * d + j] = 1
            mats.append(MatFp(mod, ent))
    return GenSet(mats)


def full_special_linear(p: int, d: int = 2, cap: int = DEFAULT_CAP) -> GroupTable:
    """The full SL_d(F_p) table, enumerated from elementary generators."""
    mod = PrimeModulus(p, d)
    expected = special_linear_order(p, d)
    if expected > cap:
        raise CapExceeded(expected, cap)
    table = enumerate_group(elementary_generators(mod), mod, cap)
    if table.order != expected:
        raise NotASubgroup(f"elementary generators produced order {table.order}, expected {expected}")
    return table


# -- entry-level predicates (d = 2 and d = 3) -------------------------------


def squares_mask(p: int) -> np.ndarray:
    """Boolean table over F_p marking squares (0 included)."""
    mask = np.zeros(p, dtype=bool)
    mask[(np.arange(p, dtype=np.int64) ** 2) % p] = True
    return mask


def trace_column(entries: np.ndarray, d: int, p: int, offset: int = 0) -> np.ndarray:
    tr = np.zeros(entries.shape[0], dtype=np.int64)
    for i in range(d):
        tr += entries[:, offset + i * d + i]
    return tr % p


def standard_subgroup(table: GroupTable, name: str, line=None) -> np.ndarray:
    """Sorted element ids of a named algebraic subgroup of SL_d(F_p).

    Names: torus (diagonal), borel (upper triangular), monomial
    (torus plus permutation part), line_stabilizer (needs a nonzero
    projective point as the `line` argument).
    """
    if table.kind != "matrix" or len(table.mods) != 1:
        raise UnsupportedDimension("standard subgroups require a single-prime matrix table")
    mod = table.mods[0]
    d, p = mod.d, mod.p
    if d not in (2, 3):
        raise UnsupportedDimension("standard subgroups support d in {2, 3}")
    ent = table.entries()
    if d == 2:
        a, b, c, e = (ent[:, i] for i in range(4))
        if name == "torus":
            mask = (b == 0) & (c == 0)
        elif name == "borel":
            mask = c == 0
        elif name == "monomial":
            mask = ((b == 0) & (c == 0)) | ((a == 0) & (e == 0))
        elif name == "line_stabilizer":
            x, y = (int(v) % p for v in line)
            if x == 0 and y == 0:
                raise ValueError("line must be a nonzero point")
            u1 = (a * x + b * y) % p
            u2 = (c * x + e * y) % p
            mask = (u1 * y - u2 * x) % p == 0
        else:
            raise ValueError(f"unknown subgroup name {name!r}")
    else:
        cols = [ent[:, i] for i in range(9)]
        diag_idx = {0, 4, 8}
        if name == "torus":
            mask = np.ones(table.order, dtype=bool)
            for i in range(9):
                if i not in diag_idx:
                    mask &= cols[i] == 0
        elif name == "borel":
            mask = (cols[3] == 0) & (cols[6] == 0) & (cols[7] == 0)
        elif name == "monomial":
            nz = [(c != 0).astype(np.int64) for c in cols]
            rows_ok = ((nz[0] + nz[1] + nz[2]) == 1) & ((nz[3] + nz[4] + nz[5]) == 1) \
                & ((nz[6] + nz[7] + nz[8]) == 1)
            cols_ok = ((nz[0] + nz[3] + nz[6]) == 1) & ((nz[1] + nz[4] + nz[7]) == 1) \
                & ((nz[2] + nz[5] + nz[8]) == 1)
            mask = rows_ok & cols_ok
        elif name == "line_stabilizer":
            x, y, z = (int(v) % p for v in line)
            if x == 0 and y == 0 and z == 0:
                raise ValueError("line must be a nonzero point")
            u = [(cols[3 * i] * x + cols[3 * i + 1] * y + cols[3 * i + 2] * z) % p
                 for i in range(3)]
            c0 = (u[1] * z - u[2] * y) % p
            c1 = (u[2] * x - u[0] * z) % p
            c2 = (u[0] * y - u[1] * x) % p
            mask = (c0 == 0) & (c1 == 0) & (c2 == 0)
        else:
            raise ValueError(f"unknown subgroup name {name!r}")
    return np.nonzero(mask)[0].astype(np.int64)


def verify_subgroup(table: GroupTable, ids: np.ndarray, chunk: int = 512) -> None:
    """Raise NotASubgroup unless the id set is closed, symmetric, and unital."""
    ids = np.unique(np.asarray(ids, dtype=np.int64))
    if ids.shape[0] == 0 or ids[0] != table.identity_id():
        raise NotASubgroup("identity missing")
    member = np.zeros(table.order, dtype=bool)
    member[ids] = True
    if not member[table.inverse_ids()[ids]].all():
        raise NotASubgroup("inverse missing")
    for lo in range(0, ids.shape[0], chunk):
        left = ids[lo:lo + chunk]
        rep = np.repeat(left, ids.shape[0])
        tile = np.tile(ids, left.shape[0])
        prods = table.compose_ids(rep, tile)
        if not member[prods].all():
            raise NotASubgroup("product escapes the set")

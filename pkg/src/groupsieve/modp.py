"""Exact matrix arithmetic: rational unimodular matrices and their mod-p reductions.

IntMat holds Fraction entries with det = 1 enforced exactly; MatFp holds the
reduction mod a validated prime. Both are immutable and hashable so they can
serve as dict keys during enumeration.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from itertools import permutations
from typing import Iterable, NamedTuple, Sequence, Union

from .errors import (
    DenominatorDivisibleByP,
    DimensionMismatch,
    NotDeterminantOne,
    NotRegularSemisimple,
    NotSymmetric,
    UnsupportedDimension,
)
from .primes import is_prime
from . import polyfp


class PrimeModulus:
    """A validated prime p together with the matrix dimension d."""

    __slots__ = ("p", "d")

    def __init__(self, p: int, d: int = 2):
        if not is_prime(p):
            raise ValueError(f"{p} is not prime")
        if d < 2:
            raise UnsupportedDimension(f"dimension must be >= 2, got {d}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "d", d)

    def __setattr__(self, *a):
        raise AttributeError("PrimeModulus is immutable")

    def __eq__(self, other):
        return isinstance(other, PrimeModulus) and (self.p, self.d) == (other.p, other.d)

    def __hash__(self):
        return hash((self.p, self.d))

    def __repr__(self):
        return f"PrimeModulus(p={self.p}, d={self.d})"


def _perm_sign(perm: tuple[int, ...]) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, cyc = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            cyc += 1
        if cyc % 2 == 0:
            sign = -sign
    return sign


def _det_exact(entries: Sequence, d: int):
    """Leibniz determinant; entries may be ints or Fractions."""
    total = 0
    for perm in permutations(range(d)):
        term = _perm_sign(perm)
        for i in range(d):
            term = term * entries[i * d + perm[i]]
        total = total + term
    return total


class MatFp:
    """Immutable d x d matrix over F_p with determinant 1."""

    __slots__ = ("mod", "entries")

    def __init__(self, mod: PrimeModulus, entries: Sequence[int]):
        d = mod.d
        if len(entries) != d * d:
            raise DimensionMismatch(f"expected {d * d} entries, got {len(entries)}")
        ent = tuple(int(e) % mod.p for e in entries)
        if _det_exact(ent, d) % mod.p != 1:
            raise NotDeterminantOne(f"det != 1 mod {mod.p}")
        object.__setattr__(self, "mod", mod)
        object.__setattr__(self, "entries", ent)

    def __setattr__(self, *a):
        raise AttributeError("MatFp is immutable")

    @classmethod
    def identity(cls, mod: PrimeModulus) -> "MatFp":
        d = mod.d
        return cls(mod, tuple(1 if i == j else 0 for i in range(d) for j in range(d)))

    def __mul__(self, other: "MatFp") -> "MatFp":
        if self.mod != other.mod:
            raise DimensionMismatch("mixed moduli")
        d, p = self.mod.d, self.mod.p
        a, b = self.entries, other.entries
        out = [0] * (d * d)
        for i in range(d):
            for j in range(d):
                s = 0
                for k in range(d):
                    s += a[i * d + k] * b[k * d + j]
                out[i * d + j] = s % p
        return MatFp(self.mod, out)

    def inverse(self) -> "MatFp":
        d, p = self.mod.d, self.mod.p
        if d == 2:
            a, b, c, e = self.entries
            return MatFp(self.mod, (e, (-b) % p, (-c) % p, a))
        # Gauss-Jordan mod p
        aug = [[self.entries[i * d + j] for j in range(d)] + [1 if i == j else 0 for j in range(d)]
               for i in range(d)]
        for col in range(d):
            piv = next(r for r in range(col, d) if aug[r][col] % p != 0)
            aug[col], aug[piv] = aug[piv], aug[col]
            inv = pow(aug[col][col], -1, p)
            aug[col] = [x * inv % p for x in aug[col]]
            for r in range(d):
                if r != col and aug[r][col] % p != 0:
                    f = aug[r][col]
                    aug[r] = [(x - f * y) % p for x, y in zip(aug[r], aug[col])]
        return MatFp(self.mod, [aug[i][d + j] for i in range(d) for j in range(d)])

    def __pow__(self, e: int) -> "MatFp":
        if e < 0:
            return self.inverse() ** (-e)
        result = MatFp.identity(self.mod)
        base = self
        while e > 0:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def trace(self) -> int:
        d = self.mod.d
        return sum(self.entries[i * d + i] for i in range(d)) % self.mod.p

    def is_identity(self) -> bool:
        return self == MatFp.identity(self.mod)

    def __eq__(self, other):
        return (isinstance(other, MatFp)
                and self.mod == other.mod and self.entries == other.entries)

    def __hash__(self):
        return hash((self.mod.p, self.entries))

    def __repr__(self):
        return f"MatFp(p={self.mod.p}, {list(self.entries)})"


Rational = Union[int, Fraction, str]


def _to_fraction(x: Rational) -> Fraction:
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)


class IntMat:
    """Immutable d x d matrix with exact rational entries and determinant 1."""

    __slots__ = ("d", "entries")

    def __init__(self, entries: Sequence[Rational], d: int | None = None):
        flat = tuple(_to_fraction(e) for e in entries)
        if d is None:
            d = math.isqrt(len(flat))
        if d * d != len(flat) or d < 2:
            raise DimensionMismatch(f"cannot shape {len(flat)} entries into a d x d matrix, d >= 2")
        if _det_exact(flat, d) != 1:
            raise NotDeterminantOne("det != 1")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "entries", flat)

    def __setattr__(self, *a):
        raise AttributeError("IntMat is immutable")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Rational]]) -> "IntMat":
        return cls([e for row in rows for e in row], d=len(rows))

    @classmethod
    def identity(cls, d: int) -> "IntMat":
        return cls([1 if i == j else 0 for i in range(d) for j in range(d)], d=d)

    def __mul__(self, other: "IntMat") -> "IntMat":
        if self.d != other.d:
            raise DimensionMismatch("mixed dimensions")
        d = self.d
        a, b = self.entries, other.entries
        out = []
        for i in range(d):
            for j in range(d):
                s = Fraction(0)
                for k in range(d):
                    s += a[i * d + k] * b[k * d + j]
                out.append(s)
        return IntMat(out, d=d)

    def inverse(self) -> "IntMat":
        d = self.d
        if d == 2:
            a, b, c, e = self.entries
            return IntMat((e, -b, -c, a), d=2)
        aug = [[self.entries[i * d + j] for j in range(d)]
               + [Fraction(1 if i == j else 0) for j in range(d)] for i in range(d)]
        for col in range(d):
            piv = next(r for r in range(col, d) if aug[r][col] != 0)
            aug[col], aug[piv] = aug[piv], aug[col]
            inv = 1 / aug[col][col]
            aug[col] = [x * inv for x in aug[col]]
            for r in range(d):
                if r != col and aug[r][col] != 0:
                    f = aug[r][col]
                    aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
        return IntMat([aug[i][d + j] for i in range(d) for j in range(d)], d=d)

    def __pow__(self, e: int) -> "IntMat":
        if e < 0:
            return self.inverse() ** (-e)
        result = IntMat.identity(self.d)
        base = self
        while e > 0:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def is_identity(self) -> bool:
        return self == IntMat.identity(self.d)

    def __eq__(self, other):
        return isinstance(other, IntMat) and self.d == other.d and self.entries == other.entries

    def __hash__(self):
        return hash((self.d, self.entries))

    def __repr__(self):
        return f"IntMat({[str(e) for e in self.entries]})"


def reduce_mod(mat: IntMat, mod: PrimeModulus) -> MatFp:
    """Reduce a rational matrix mod p; the ring map is only defined when no
    denominator is divisible by p."""
    if mat.d != mod.d:
        raise DimensionMismatch(f"matrix is {mat.d} x {mat.d}, modulus expects d={mod.d}")
    p = mod.p
    out = []
    for e in mat.entries:
        if e.denominator % p == 0:
            raise DenominatorDivisibleByP(f"entry {e} has denominator divisible by {p}")
        out.append(e.numerator * pow(e.denominator, -1, p) % p)
    return MatFp(mod, out)


class HeightPair(NamedTuple):
    log_height: float
    naive: int


def naive_height(mat: IntMat) -> int:
    """Max over entries of max(|numerator|, denominator) in lowest terms."""
    best = 1
    for e in mat.entries:
        best = max(best, abs(e.numerator), e.denominator)
    return best


def log_height(mat: IntMat) -> float:
    """Sum over places of log+ of the entry-wise p-adic norms, with the
    archimedean place bounded by the Frobenius norm.

    The finite-place sum collapses to log(lcm of the entry denominators).
    The Frobenius norm upper-bounds the operator norm, so this is an upper
    bound for the operator-norm height; the standard comparisons with the
    naive height still hold for integer matrices (see tests).
    """
    lcm = 1
    for e in mat.entries:
        lcm = lcm * e.denominator // math.gcd(lcm, e.denominator)
    sq = Fraction(0)
    for e in mat.entries:
        sq += e * e
    # log of a Fraction via integer logs, safe for large entries
    log_frob = 0.5 * (math.log(sq.numerator) - math.log(sq.denominator)) if sq > 0 else 0.0
    return math.log(lcm) + max(0.0, log_frob)


def heights(mat: IntMat) -> HeightPair:
    """Logarithmic and naive heights of a rational matrix."""
    return HeightPair(log_height(mat), naive_height(mat))


class GenSet:
    """A symmetric generating set; inverses are appended unless symmetry is
    asserted and verified. Members keep their multiplicity so that the uniform
    measure on the set pushes forward correctly under reduction."""

    __slots__ = ("members",)

    def __init__(self, members: Sequence, symmetric: bool = False, _raw: bool = False):
        mats = list(members)
        if not mats:
            raise ValueError("empty generating set")
        if _raw:
            object.__setattr__(self, "members", tuple(mats))
            return
        seen = dict.fromkeys(mats)  # ordered dedupe
        mats = list(seen)
        inv = {m.inverse(): m for m in mats}
        if symmetric:
            missing = [m for m in inv if m not in seen]
            if missing:
                raise NotSymmetric(f"{len(missing)} inverse(s) missing from asserted-symmetric set")
        else:
            for m in list(mats):
                mi = m.inverse()
                if mi not in seen:
                    seen[mi] = None
                    mats.append(mi)
        object.__setattr__(self, "members", tuple(mats))

    def __setattr__(self, *a):
        raise AttributeError("GenSet is immutable")

    @property
    def k(self) -> int:
        return len(self.members)

    @property
    def d(self) -> int:
        m = self.members[0]
        return m.d if isinstance(m, IntMat) else m.mod.d

    @property
    def contains_identity(self) -> bool:
        return any(m.is_identity() for m in self.members)

    def reduce(self, mod: PrimeModulus) -> "GenSet":
        """Entrywise reduction; multiplicity preserved (members may collide)."""
        return GenSet([reduce_mod(m, mod) for m in self.members], _raw=True)

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    def __repr__(self):
        return f"GenSet(k={self.k}, d={self.d})"


def sanov_generators() -> GenSet:
    """The classical free pair [[1,2],[0,1]], [[1,0],[2,1]], symmetrized."""
    a = IntMat((1, 2, 0, 1))
    b = IntMat((1, 0, 2, 1))
    return GenSet([a, b])


def load_generator_file(path: str) -> GenSet:
    """Load a generator set from JSON.

    Accepted forms: a bare array of d x d matrices, or an object
    {"matrices": [...], "symmetric": bool}. Entries are integers or
    "num/den" strings. det = 1 is enforced per matrix.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    symmetric = False
    if isinstance(data, dict):
        symmetric = bool(data.get("symmetric", False))
        extra = set(data) - {"matrices", "symmetric"}
        if extra:
            raise ValueError(f"unknown keys in generator file: {sorted(extra)}")
        data = data["matrices"]
    mats = [IntMat.from_rows(rows) for rows in data]
    return GenSet(mats, symmetric=symmetric)


def char_poly(mat: MatFp) -> tuple[int, ...]:
    """Coefficients of det(xI - M) over F_p, descending degree, monic."""
    d, p = mat.mod.d, mat.mod.p
    # entries of xI - M as degree <= 1 polynomials, ascending coefficients
    polys = []
    for i in range(d):
        for j in range(d):
            c = (-mat.entries[i * d + j]) % p
            polys.append((c, 1) if i == j else ((c,) if c else ()))
    total: polyfp.Poly = ()
    for perm in permutations(range(d)):
        term: polyfp.Poly = (1,)
        for i in range(d):
            term = polyfp.mul(term, polys[i * d + perm[i]], p)
            if not term:
                break
        if not term:
            continue
        if _perm_sign(perm) == -1:
            term = tuple((-c) % p for c in term)
        total = polyfp.add(total, term, p)
    asc = list(total) + [0] * (d + 1 - len(total))
    return tuple(reversed(asc[: d + 1]))


def is_regular_semisimple(mat: MatFp) -> bool:
    """True when the characteristic polynomial is squarefree over F_p."""
    coeffs_desc = char_poly(mat)
    asc = tuple(reversed(coeffs_desc))
    return polyfp.is_squarefree(asc, mat.mod.p)


def cycle_type(mat: MatFp) -> tuple[int, ...]:
    """Partition of d given by the degrees of the irreducible factors of the
    characteristic polynomial; defined only for regular semisimple elements."""
    coeffs_desc = char_poly(mat)
    asc = tuple(reversed(coeffs_desc))
    p = mat.mod.p
    if not polyfp.is_squarefree(asc, p):
        raise NotRegularSemisimple(f"char poly {coeffs_desc} is not squarefree mod {p}")
    return polyfp.distinct_degree_type(asc, p)


def is_power_unipotent(mat: MatFp) -> bool:
    """True when mat^(d!) is unipotent, i.e. (mat^(d!) - I)^d = 0."""
    d, p = mat.mod.d, mat.mod.p
    u = mat ** math.factorial(d)
    # nilpotency of n = u - I checked via n^d = 0, entrywise mod p
    n = [(u.entries[i] - (1 if i % (d + 1) == 0 else 0)) % p for i in range(d * d)]
    power = n
    for _ in range(d - 1):
        nxt = [0] * (d * d)
        for i in range(d):
            for j in range(d):
                s = 0
                for k in range(d):
                    s += power[i * d + k] * n[k * d + j]
                nxt[i * d + j] = s % p
        power = nxt
    return all(x == 0 for x in power)

"""Random walks: exact convolution on enumerated groups and Monte Carlo
residue walks on infinite integer matrix groups.

The exact side works with distribution vectors indexed by GroupTable ids
and costs O(k |G|) per step.  The Monte Carlo side never materializes the
integer products (entries grow like M_S^n); each sample carries only its
reductions mod the registered primes, updated by one mod-p multiplication
per prime per step.  Draws are counter-based pure functions of
(seed, step, sample index), so results are independent of chunking and
worker scheduling by construction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    CapExceeded,
    DenominatorDivisibleByP,
    InsufficientSignal,
    PredicateMissingPrime,
    UnsupportedDimension,
    VerificationFailure,
)
from .modp import GenSet, IntMat, PrimeModulus, naive_height
from .rng import choice_index_np
from .spectral import _resolve_action, lambda1, markov_apply
from .table import (
    DEFAULT_CAP,
    GroupTable,
    enumerate_group,
    special_linear_order,
    squares_mask,
    verify_subgroup,
)

WILSON_Z99 = 2.5758293035489004  # two-sided 99% normal quantile
NOISE_FLOOR_SCALE = 5.0
DEFAULT_CHUNK = 1 << 17


# ---------------------------------------------------------------------------
# exact convolution
# ---------------------------------------------------------------------------

def _check_dist(dist: np.ndarray, order: int) -> np.ndarray:
    dist = np.asarray(dist, dtype=np.float64)
    if dist.shape != (order,):
        raise ValueError(f"distribution has shape {dist.shape}, expected ({order},)")
    if np.any(dist < -1e-15):
        raise ValueError("distribution has negative mass")
    s = float(dist.sum())
    if abs(s - 1.0) > 1e-9:
        raise ValueError(f"distribution sums to {s!r}, not 1")
    return dist


def convolve_step(dist: np.ndarray, table: GroupTable, gens=None) -> np.ndarray:
    """One exact step mu * dist of the uniform generator measure."""
    dist = _check_dist(dist, table.order)
    action = _resolve_action(table, gens)
    return markov_apply(dist, action)


def walk_distribution(table: GroupTable, gens=None, n: int = 0,
                      dist: np.ndarray | None = None) -> np.ndarray:
    """mu^n applied to dist (default: the point mass at the identity)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if dist is None:
        dist = np.zeros(table.order)
        dist[table.identity_id()] = 1.0
    dist = _check_dist(dist, table.order)
    action = _resolve_action(table, gens)
    for _ in range(n):
        dist = markov_apply(dist, action)
    return dist


def return_probability(table: GroupTable, gens=None, n: int = 0) -> float:
    """mu^n(1) by exact convolution.

    For even n the value is also computed as ||mu^(n/2)||_2^2 and the two
    must agree to 1e-10; a mismatch indicates a broken generator action.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    dist = walk_distribution(table, gens, n)
    value = float(dist[table.identity_id()])
    if n % 2 == 0:
        half = walk_distribution(table, gens, n // 2)
        alt = float(np.dot(half, half))
        if abs(value - alt) > 1e-10:
            raise VerificationFailure(
                f"mu^{n}(1) = {value!r} but ||mu^{n // 2}||^2 = {alt!r}")
    return value


def subgroup_mass(table: GroupTable, gens=None, subgroup_ids=None,
                  n: int = 0, verify: bool = True) -> float:
    """mu^n(H) for a verified subgroup H given by its ids."""
    if subgroup_ids is None:
        raise ValueError("subgroup_ids is required")
    ids = np.asarray(subgroup_ids, dtype=np.int64)
    if verify:
        verify_subgroup(table, ids)
    dist = walk_distribution(table, gens, n)
    return float(dist[ids].sum())


def subgroup_mass_sequence(table: GroupTable, gens=None, subgroup_ids=None,
                           ns: Sequence[int] = (), verify: bool = True) -> list[float]:
    """mu^n(H) over the schedule ns, checking the even-time monotonicity.

    The even-time sequence mu^(2n)(H) is non-increasing for any subgroup;
    a violation beyond float slop raises VerificationFailure.
    """
    if subgroup_ids is None:
        raise ValueError("subgroup_ids is required")
    ids = np.asarray(subgroup_ids, dtype=np.int64)
    if verify:
        verify_subgroup(table, ids)
    ns = sorted(set(int(n) for n in ns))
    if ns and ns[0] < 0:
        raise ValueError("schedule entries must be >= 0")
    action = _resolve_action(table, gens)
    dist = np.zeros(table.order)
    dist[table.identity_id()] = 1.0
    out = {}
    step = 0
    for n in ns:
        while step < n:
            dist = markov_apply(dist, action)
            step += 1
        out[n] = float(dist[ids].sum())
    evens = [n for n in ns if n % 2 == 0]
    for a, b in zip(evens, evens[1:]):
        if out[b] > out[a] + 1e-12:
            raise VerificationFailure(
                f"mu^{b}(H) = {out[b]!r} exceeds mu^{a}(H) = {out[a]!r}")
    return [out[n] for n in ns]


@dataclass(frozen=True)
class EquidistributionResult:
    n: int
    deviation: float
    spectral_bound: float
    alpha_star: float


def equidistribution_test(table: GroupTable, gens=None, n: int = 0,
                          dist: np.ndarray | None = None,
                          alpha_star: float | None = None) -> EquidistributionResult:
    """Exact sup deviation max_x |mu^n(x) - 1/|G|| with its spectral bound.

    The bound is alpha_star^n where alpha_star = max(|alpha_1|, |alpha_min|);
    it is computed from the dense spectrum when the group is small enough
    and by power iteration otherwise, or supplied by the caller.
    """
    out = walk_distribution(table, gens, n, dist)
    deviation = float(np.abs(out - 1.0 / table.order).max())
    if alpha_star is None:
        rep = lambda1(table, gens=gens)
        alpha_star = max(abs(rep.alpha1), abs(rep.alpha_min))
    if alpha_star > 1.0 - 1e-9:
        warnings.warn(
            "walk does not equidistribute (alpha_star ~ 1); "
            "consider a lazy walk", stacklevel=2)
    bound = alpha_star ** n
    return EquidistributionResult(n=n, deviation=deviation,
                                  spectral_bound=bound, alpha_star=alpha_star)


# ---------------------------------------------------------------------------
# Monte Carlo residue walks
# ---------------------------------------------------------------------------

def pack_states(entries: np.ndarray, p: int) -> np.ndarray:
    """Horner-pack rows of mod-p matrix entries into int64 keys.

    Matches the GroupTable packing for a single-prime table, so packed
    states can be looked up against table.keys directly.
    """
    keys = np.zeros(len(entries), dtype=np.int64)
    for j in range(entries.shape[1]):
        keys = keys * p + entries[:, j]
    return keys


class Target:
    """A named per-prime membership predicate over residue states."""

    __slots__ = ("name", "prime", "d", "fn")

    def __init__(self, name: str, prime: int, d: int,
                 fn: Callable[[np.ndarray], np.ndarray]):
        self.name = name
        self.prime = int(prime)
        self.d = int(d)
        self.fn = fn

    def hits(self, entries: np.ndarray) -> np.ndarray:
        return self.fn(entries)

    @staticmethod
    def identity(p: int, d: int = 2, name: str | None = None) -> "Target":
        flat = np.eye(d, dtype=np.int64).reshape(-1) % p
        return Target(name or f"identity_mod_{p}", p, d,
                      lambda e: np.all(e == flat, axis=1))

    @staticmethod
    def borel(p: int, d: int = 2, name: str | None = None) -> "Target":
        """Upper-triangular residues: all below-diagonal entries zero."""
        below = [i * d + j for i in range(d) for j in range(d) if i > j]
        def fn(e: np.ndarray) -> np.ndarray:
            mask = np.ones(len(e), dtype=bool)
            for col in below:
                mask &= e[:, col] == 0
            return mask
        return Target(name or f"borel_mod_{p}", p, d, fn)

    @staticmethod
    def trace(p: int, value: int, d: int = 2, name: str | None = None) -> "Target":
        value = value % p
        diag = [i * (d + 1) for i in range(d)]
        def fn(e: np.ndarray) -> np.ndarray:
            t = np.zeros(len(e), dtype=np.int64)
            for col in diag:
                t += e[:, col]
            return t % p == value
        return Target(name or f"trace_{value}_mod_{p}", p, d, fn)

    @staticmethod
    def cycle_type(p: int, ctype: Sequence[int], name: str | None = None) -> "Target":
        """Regular semisimple residues of the given cycle type (d = 2 only).

        Type (2) means irreducible characteristic polynomial, i.e.
        tr^2 - 4 a nonzero non-square mod p; type (1, 1) means split,
        tr^2 - 4 a nonzero square.
        """
        ctype = tuple(sorted(int(c) for c in ctype))
        if ctype not in ((2,), (1, 1)):
            raise UnsupportedDimension(f"cycle type {ctype} not supported")
        sq = squares_mask(p)
        want_square = ctype == (1, 1)
        def fn(e: np.ndarray) -> np.ndarray:
            disc = (e[:, 0] + e[:, 3]) ** 2 - 4
            disc %= p
            mask = disc != 0
            mask &= sq[disc] if want_square else ~sq[disc]
            return mask
        label = "split" if want_square else "irreducible"
        return Target(name or f"cycle_{label}_mod_{p}", p, 2, fn)

    @staticmethod
    def power_unipotent(p: int, name: str | None = None) -> "Target":
        """d = 2 residues m with m^2 unipotent, i.e. trace = +-2 mod p."""
        def fn(e: np.ndarray) -> np.ndarray:
            t = (e[:, 0] + e[:, 3]) % p
            return (t == 2 % p) | (t == (-2) % p)
        return Target(name or f"power_unipotent_mod_{p}", p, 2, fn)

    @staticmethod
    def from_ids(table: GroupTable, ids: np.ndarray,
                 name: str = "subset") -> "Target":
        """Membership in an explicit id subset of a single-prime table."""
        if table.kind != "matrix" or len(table.mods) != 1:
            raise ValueError("from_ids needs a single-prime matrix table")
        mod = table.mods[0]
        keys = np.sort(table.keys[np.asarray(ids, dtype=np.int64)])
        def fn(e: np.ndarray) -> np.ndarray:
            if len(keys) == 0:
                return np.zeros(len(e), dtype=bool)
            state_keys = pack_states(e, mod.p)
            pos = np.searchsorted(keys, state_keys)
            pos[pos == len(keys)] = 0
            return keys[pos] == state_keys
        return Target(name, mod.p, mod.d, fn)


class WalkSampler:
    """Integer generator set plus seeded counter-based streams plus the
    per-prime reduced generator tables for residue walks."""

    __slots__ = ("gens", "seed", "mods", "_gen_entries")

    def __init__(self, gens: GenSet, seed: int, primes: Iterable[int] = ()):
        if not gens.members or not isinstance(gens.members[0], IntMat):
            raise ValueError("WalkSampler needs a GenSet over IntMat")
        self.gens = gens
        self.seed = int(seed)
        mods = []
        gen_entries = {}
        d = gens.members[0].d
        for p in primes:
            mod = p if isinstance(p, PrimeModulus) else PrimeModulus(int(p), d)
            if mod.p in gen_entries:
                continue
            reduced = gens.reduce(mod)
            rows = np.array([[int(v) for v in m.entries]
                             for m in reduced.members], dtype=np.int64)
            # one extra identity row so lazy draws can gather a no-op
            idrow = (np.eye(d, dtype=np.int64) % mod.p).reshape(1, -1)
            gen_entries[mod.p] = np.concatenate([rows, idrow], axis=0)
            mods.append(mod)
        self.mods = tuple(sorted(mods, key=lambda m: m.p))
        self._gen_entries = gen_entries

    @property
    def k(self) -> int:
        return len(self.gens.members)

    @property
    def d(self) -> int:
        return self.gens.members[0].d

    def primes(self) -> tuple[int, ...]:
        return tuple(m.p for m in self.mods)

    def init_states(self, m: int) -> dict[int, np.ndarray]:
        flat = {}
        for mod in self.mods:
            idrow = (np.eye(self.d, dtype=np.int64) % mod.p).reshape(-1)
            flat[mod.p] = np.tile(idrow, (m, 1))
        return flat

    def advance(self, states: dict[int, np.ndarray], idx: np.ndarray) -> None:
        """Right-multiply each sample's residues by its chosen generator.

        idx indexes the generator table; index k is the identity row used
        by lazy draws.  In place, one mod-p multiplication per prime.
        """
        d = self.d
        for p, st in states.items():
            g = self._gen_entries[p][idx]
            if d == 2:
                sa, sb, sc, sd = st[:, 0], st[:, 1], st[:, 2], st[:, 3]
                ga, gb, gc, gd = g[:, 0], g[:, 1], g[:, 2], g[:, 3]
                na = (sa * ga + sb * gc) % p
                nb = (sa * gb + sb * gd) % p
                nc = (sc * ga + sd * gc) % p
                nd = (sc * gb + sd * gd) % p
                st[:, 0], st[:, 1], st[:, 2], st[:, 3] = na, nb, nc, nd
            else:
                prod = np.einsum("mij,mjk->mik", st.reshape(-1, d, d),
                                 g.reshape(-1, d, d))
                st[:] = (prod % p).reshape(-1, d * d)

    def choices(self, step: int, sample_ids: np.ndarray, lazy: bool) -> np.ndarray:
        k = self.k
        if lazy:
            raw = choice_index_np(self.seed, step, sample_ids, 2 * k)
            return np.minimum(raw, k)
        return choice_index_np(self.seed, step, sample_ids, k)


def wilson_interval(count: int, samples: int,
                    z: float = WILSON_Z99) -> tuple[float, float]:
    if samples <= 0:
        raise ValueError("samples must be positive")
    phat = count / samples
    denom = 1.0 + z * z / samples
    center = (phat + z * z / (2 * samples)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / samples
                         + z * z / (4.0 * samples * samples)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class WalkStats:
    schedule: tuple[int, ...]
    samples: int
    target_primes: dict[str, int]
    counts: dict[str, dict[int, int]]

    def frequency(self, target: str, n: int) -> float:
        return self.counts[target][n] / self.samples

    def frequencies(self, target: str) -> np.ndarray:
        return np.array([self.frequency(target, n) for n in self.schedule])

    def interval(self, target: str, n: int) -> tuple[float, float]:
        return wilson_interval(self.counts[target][n], self.samples)

    def noise_floor(self) -> float:
        return NOISE_FLOOR_SCALE / math.sqrt(self.samples)


def monte_carlo_walk(sampler: WalkSampler, n, samples: int,
                     targets: Sequence[Target], chunk: int = DEFAULT_CHUNK,
                     lazy: bool = False) -> WalkStats:
    """Empirical mu^n(target) over the scheduled step counts.

    n may be a single step count or an iterable schedule.  Each sample's
    trajectory depends only on (seed, sample index), so the result is
    bit-identical under any chunking or worker split.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    schedule = (int(n),) if isinstance(n, int) else tuple(sorted(set(int(v) for v in n)))
    if not schedule or schedule[0] < 0:
        raise ValueError("schedule must be non-empty with entries >= 0")
    names = [t.name for t in targets]
    if len(set(names)) != len(names):
        raise ValueError("duplicate target names")
    registered = set(sampler.primes())
    for t in targets:
        if t.prime not in registered:
            raise PredicateMissingPrime(
                f"target {t.name!r} needs prime {t.prime} "
                f"not registered in the sampler")
        if t.d != sampler.d:
            raise ValueError(f"target {t.name!r} has dimension {t.d}, "
                             f"sampler has {sampler.d}")
    sched_set = set(schedule)
    counts: dict[str, dict[int, int]] = {t.name: {s: 0 for s in schedule}
                                         for t in targets}
    n_max = schedule[-1]
    for start in range(0, samples, chunk):
        m = min(chunk, samples - start)
        ids = np.arange(start, start + m, dtype=np.uint64)
        states = sampler.init_states(m)
        if 0 in sched_set:
            for t in targets:
                counts[t.name][0] += int(t.hits(states[t.prime]).sum())
        for step in range(1, n_max + 1):
            idx = sampler.choices(step, ids, lazy)
            sampler.advance(states, idx)
            if step in sched_set:
                for t in targets:
                    counts[t.name][step] += int(t.hits(states[t.prime]).sum())
    return WalkStats(schedule=schedule, samples=samples,
                     target_primes={t.name: t.prime for t in targets},
                     counts=counts)


# ---------------------------------------------------------------------------
# decay fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    c: float
    r_squared: float
    window: tuple[int, int]
    points: int
    intercept: float


def fit_log_decay(ns: Sequence[int], freqs: Sequence[float],
                  floor: float = 0.0, min_points: int = 4) -> FitResult:
    """Least-squares slope of log frequency against n; c = -slope.

    Points with frequency <= floor are dropped (Monte Carlo noise would
    bias the slope); fewer than min_points survivors raises
    InsufficientSignal.
    """
    kept = [(int(n), float(f)) for n, f in zip(ns, freqs) if f > floor]
    if len(kept) < min_points:
        raise InsufficientSignal(
            f"{len(kept)} points above floor {floor!r}, need {min_points}")
    x = np.array([n for n, _ in kept], dtype=np.float64)
    y = np.log([f for _, f in kept])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return FitResult(c=float(-slope), r_squared=float(r2),
                     window=(int(x[0]), int(x[-1])), points=len(kept),
                     intercept=float(intercept))


def nonconcentration_fit(stats: WalkStats, target: str | None = None,
                         floor: float | None = None) -> FitResult:
    """Decay fit for one target of a Monte Carlo run.

    The noise floor defaults to 5/sqrt(samples).
    """
    if target is None:
        if len(stats.counts) != 1:
            raise ValueError("stats holds several targets; name one")
        target = next(iter(stats.counts))
    if floor is None:
        floor = stats.noise_floor()
    freqs = [stats.frequency(target, s) for s in stats.schedule]
    return fit_log_decay(stats.schedule, freqs, floor=floor)


# ---------------------------------------------------------------------------
# strong approximation scan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanRow:
    prime: int
    status: str  # surjective | proper | skipped | bad_reduction
    order: int | None
    expected: int


@dataclass(frozen=True)
class ScanReport:
    rows: tuple[ScanRow, ...]
    m_s: int
    d: int

    def statuses(self) -> dict[int, str]:
        return {r.prime: r.status for r in self.rows}


def strong_approx_scan(gens: GenSet, primes: Iterable[int],
                       cap: int = DEFAULT_CAP) -> ScanReport:
    """BFS-enumerate the mod-p image for each prime and classify it.

    surjective: order equals the SL_d(F_p) order formula; proper: smaller;
    skipped: BFS cap exceeded before closure (nothing is asserted beyond
    the cap); bad_reduction: a generator denominator vanishes mod p.
    M_S, the max naive height of the generators, is recorded alongside.
    """
    if not gens.members or not isinstance(gens.members[0], IntMat):
        raise ValueError("strong_approx_scan needs a GenSet over IntMat")
    d = gens.members[0].d
    m_s = max(naive_height(mat) for mat in gens.members)
    rows = []
    for p in sorted(set(int(q) for q in primes)):
        mod = PrimeModulus(p, d)
        expected = special_linear_order(p, d)
        try:
            reduced = gens.reduce(mod)
        except DenominatorDivisibleByP:
            rows.append(ScanRow(p, "bad_reduction", None, expected))
            continue
        try:
            table = enumerate_group(reduced, mod, cap=cap)
        except CapExceeded:
            rows.append(ScanRow(p, "skipped", None, expected))
            continue
        status = "surjective" if table.order == expected else "proper"
        rows.append(ScanRow(p, status, table.order, expected))
    return ScanReport(rows=tuple(rows), m_s=m_s, d=d)


# ---------------------------------------------------------------------------
# free group oracle
# ---------------------------------------------------------------------------

def free_group_return_sequence(k: int, n_max: int) -> list[Fraction]:
    """Exact mu^n(e), n = 0..n_max, for the simple walk on F_k.

    Distance-distribution recursion: from the origin the walk moves to
    distance 1; from distance m >= 1 it steps back with probability
    1/(2k) and forward with probability (2k-1)/(2k).
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if not 0 <= n_max <= 30:
        raise ValueError("exact recursion supports 0 <= n <= 30")
    back = Fraction(1, 2 * k)
    fwd = Fraction(2 * k - 1, 2 * k)
    dist = {0: Fraction(1)}
    out = [Fraction(1)]
    for _ in range(n_max):
        nxt: dict[int, Fraction] = {}
        for m, mass in dist.items():
            if m == 0:
                nxt[1] = nxt.get(1, Fraction(0)) + mass
            else:
                nxt[m - 1] = nxt.get(m - 1, Fraction(0)) + mass * back
                nxt[m + 1] = nxt.get(m + 1, Fraction(0)) + mass * fwd
        dist = nxt
        out.append(dist.get(0, Fraction(0)))
    return out


def free_group_return_oracle(k: int, n: int) -> Fraction:
    """Exact mu^n(e) for the simple walk on the free group F_k."""
    return free_group_return_sequence(k, n)[n]


def kesten_radius(k: int) -> float:
    """Spectral radius sqrt(2k-1)/k of the simple walk on F_k."""
    if k < 2:
        raise ValueError("k must be >= 2")
    return math.sqrt(2 * k - 1) / k

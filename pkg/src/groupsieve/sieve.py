"""The group sieve: prime batteries, per-prime exclusion densities, sieve
runs against Monte Carlo walks, and the probabilistic bounds they rest on.

A sieve target is realized as one precomputed excluded set per battery
prime; a walk sample counts as a hit at time n iff its residue lies in
the excluded set at EVERY battery prime.  Densities and the power-map /
cycle-type statistics are exact rationals from full enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyBattery,
    InsufficientSignal,
    PredicateMissingPrime,
    SearchBoundExceeded,
    UnsupportedDimension,
    VerificationFailure,
)
from .modp import GenSet, PrimeModulus, is_power_unipotent
from .polyfp import distinct_degree_type, is_squarefree
from .primes import is_prime
from .table import (
    DEFAULT_CAP,
    GroupTable,
    enumerate_group,
    full_special_linear,
    special_linear_order,
)
from .walks import (
    DEFAULT_CHUNK,
    FitResult,
    WalkSampler,
    fit_log_decay,
    pack_states,
    wilson_interval,
)

PRIME_SCAN_CEILING = 100_000


# ---------------------------------------------------------------------------
# prime batteries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrimeBattery:
    primes: tuple[int, ...]
    modulus: int
    p_min: int
    source_note: str

    def __post_init__(self):
        if len(set(self.primes)) != len(self.primes):
            raise ValueError("battery primes must be distinct")
        for p in self.primes:
            if not is_prime(p):
                raise ValueError(f"{p} is not prime")
            if p < self.p_min:
                raise ValueError(f"{p} below p_min = {self.p_min}")
            if self.modulus > 1 and p % self.modulus != 1:
                raise ValueError(f"{p} is not 1 mod {self.modulus}")

    def __len__(self) -> int:
        return len(self.primes)


def _eratosthenes(ceiling: int) -> np.ndarray:
    flags = np.ones(ceiling + 1, dtype=bool)
    flags[:2] = False
    for q in range(2, math.isqrt(ceiling) + 1):
        if flags[q]:
            flags[q * q:: q] = False
    return np.nonzero(flags)[0]


def select_primes(n_primes: int, m: int = 1, p_min: int = 3,
                  ceiling: int = PRIME_SCAN_CEILING) -> PrimeBattery:
    """The n_primes smallest primes >= p_min congruent to 1 mod m."""
    if n_primes < 1:
        raise ValueError("n_primes must be >= 1")
    if m < 1:
        raise ValueError("m must be >= 1")
    candidates = _eratosthenes(ceiling)
    candidates = candidates[candidates >= p_min]
    if m > 1:
        candidates = candidates[candidates % m == 1]
    if len(candidates) < n_primes:
        raise SearchBoundExceeded(
            f"only {len(candidates)} primes >= {p_min} with p = 1 mod {m} "
            f"below {ceiling}, need {n_primes}")
    chosen = tuple(int(p) for p in candidates[:n_primes])
    note = (f"first {n_primes} primes >= {p_min} congruent to 1 mod {m} "
            f"(Eratosthenes scan to {ceiling})")
    return PrimeBattery(primes=chosen, modulus=m, p_min=p_min, source_note=note)


# ---------------------------------------------------------------------------
# exact densities
# ---------------------------------------------------------------------------

def _power_map_ids(table: GroupTable, m: int) -> np.ndarray:
    """id array g -> g^m by binary exponentiation on row-aligned composition."""
    ids = np.arange(table.order, dtype=np.int64)
    acc = np.full(table.order, table.identity_id(), dtype=np.int64)
    base = ids
    e = m
    while e:
        if e & 1:
            acc = table.compose_ids(acc, base)
        e >>= 1
        if e:
            base = table.compose_ids(base, base)
    return acc


def m_power_density(p: int, m: int, d: int = 2, cap: int = DEFAULT_CAP) -> Fraction:
    """Exact |{g^m : g in SL_d(F_p)}| / |SL_d(F_p)| by image enumeration."""
    if m < 1:
        raise ValueError("m must be >= 1")
    table = full_special_linear(p, d, cap=cap)
    image = np.unique(_power_map_ids(table, m))
    return Fraction(int(len(image)), table.order)


def _char_poly_pairs(table: GroupTable) -> tuple[np.ndarray, np.ndarray]:
    """Per-element characteristic polynomial coefficients, vectorized.

    d=2: x^2 - t x + 1, returns (t, zeros).  d=3: x^3 - c2 x^2 + c1 x - 1
    with c2 the trace and c1 the sum of principal 2x2 minors; returns
    (c2, c1).  Only p (or p^2) distinct pairs occur, so type
    classification runs once per pair, not per element.
    """
    mod = table.mods[0]
    p, d = mod.p, mod.d
    ent = table.entries()
    if d == 2:
        return (ent[:, 0] + ent[:, 3]) % p, np.zeros(table.order, dtype=np.int64)
    if d == 3:
        a = ent.reshape(-1, 3, 3)
        c2 = (a[:, 0, 0] + a[:, 1, 1] + a[:, 2, 2]) % p
        m01 = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
        m02 = a[:, 0, 0] * a[:, 2, 2] - a[:, 0, 2] * a[:, 2, 0]
        m12 = a[:, 1, 1] * a[:, 2, 2] - a[:, 1, 2] * a[:, 2, 1]
        c1 = (m01 + m02 + m12) % p
        return c2, c1
    raise UnsupportedDimension("characteristic pairs implemented for d in {2, 3}")


def _poly_of_pair(c_hi: int, c_lo: int, p: int, d: int) -> tuple[int, ...]:
    # ascending coefficients of the char poly with the given invariants
    if d == 2:
        return (1, (-c_hi) % p, 1)
    return ((-1) % p, c_lo % p, (-c_hi) % p, 1)


def _type_masks_by_pair(p: int, d: int, partition: tuple[int, ...]):
    """For each (c_hi, c_lo) invariant pair: is the char poly squarefree of
    the given factorization type?  Returns two dense lookup tables indexed
    by c_hi*p + c_lo: matches_type and regular_semisimple."""
    size = p * p if d == 3 else p
    matches = np.zeros(size, dtype=bool)
    regular = np.zeros(size, dtype=bool)
    for idx in range(size):
        c_hi, c_lo = (divmod(idx, p) if d == 3 else (idx, 0))
        f = _poly_of_pair(c_hi, c_lo, p, d)
        if not is_squarefree(f, p):
            continue
        regular[idx] = True
        if distinct_degree_type(f, p) == partition:
            matches[idx] = True
    return matches, regular


def cycle_type_density(p: int, partition: Sequence[int], d: int = 2,
                       cap: int = DEFAULT_CAP) -> Fraction:
    """Exact fraction of SL_d(F_p) that is regular semisimple with the given
    factorization type of its characteristic polynomial."""
    partition = tuple(sorted(int(c) for c in partition))
    if sum(partition) != d or any(c < 1 for c in partition):
        raise ValueError(f"partition {partition} does not sum to d = {d}")
    table = full_special_linear(p, d, cap=cap)
    c_hi, c_lo = _char_poly_pairs(table)
    matches, _ = _type_masks_by_pair(p, d, partition)
    idx = c_hi * p + c_lo if d == 3 else c_hi
    return Fraction(int(matches[idx].sum()), table.order)


def non_regular_semisimple_density(p: int, d: int = 2,
                                   cap: int = DEFAULT_CAP) -> Fraction:
    """Exact fraction with non-squarefree characteristic polynomial."""
    table = full_special_linear(p, d, cap=cap)
    c_hi, c_lo = _char_poly_pairs(table)
    _, regular = _type_masks_by_pair(p, d, (d,))
    idx = c_hi * p + c_lo if d == 3 else c_hi
    return Fraction(int(table.order - regular[idx].sum()), table.order)


# ---------------------------------------------------------------------------
# target predicates
# ---------------------------------------------------------------------------

TARGET_KINDS = ("m_power", "missing_cycle_type", "trace_value",
                "power_unipotent", "custom_subset")


class TargetPredicate:
    """Per-prime excluded sets realizing a sieve target.

    For each battery prime the excluded set is precomputed over the full
    enumerated group as a sorted packed-key array (O(log|G|) membership
    against walk residues); the exact exclusion density is kept alongside.
    """

    __slots__ = ("kind", "params", "primes", "excluded_keys", "densities", "orders")

    def __init__(self, kind: str, params: dict, primes: tuple[int, ...],
                 excluded_keys: dict, densities: dict, orders: dict):
        self.kind = kind
        self.params = params
        self.primes = primes
        self.excluded_keys = excluded_keys
        self.densities = densities
        self.orders = orders

    def hit_mask(self, states: dict[int, np.ndarray]) -> np.ndarray:
        """Conjunction over all primes: residue in the excluded set at each."""
        mask = None
        for p in self.primes:
            keys = pack_states(states[p], p)
            excl = self.excluded_keys[p]
            if len(excl) == 0:
                m = len(keys)
                return np.zeros(m, dtype=bool)
            pos = np.searchsorted(excl, keys)
            pos[pos == len(excl)] = 0
            ok = excl[pos] == keys
            mask = ok if mask is None else (mask & ok)
            if not mask.any():
                break
        return mask


def _excluded_mask(table: GroupTable, kind: str, params: dict) -> np.ndarray:
    mod = table.mods[0]
    p, d = mod.p, mod.d
    ent = table.entries()
    if kind == "m_power":
        m = params["m"]
        mask = np.zeros(table.order, dtype=bool)
        mask[np.unique(_power_map_ids(table, m))] = True
        return mask
    if kind == "missing_cycle_type":
        partition = params["partition"]
        c_hi, c_lo = _char_poly_pairs(table)
        matches, _ = _type_masks_by_pair(p, d, partition)
        idx = c_hi * p + c_lo if d == 3 else c_hi
        return ~matches[idx]
    if kind == "trace_value":
        t = params["t"] % p
        diag = [i * (d + 1) for i in range(d)]
        tr = np.zeros(table.order, dtype=np.int64)
        for col in diag:
            tr += ent[:, col]
        return tr % p == t
    if kind == "power_unipotent":
        if d == 2:
            tr = (ent[:, 0] + ent[:, 3]) % p
            return (tr == 2 % p) | (tr == (p - 2) % p)
        return np.array([is_power_unipotent(table.mat_of_id(i))
                         for i in range(table.order)], dtype=bool)
    if kind == "custom_subset":
        ids = params["subsets"][p]
        mask = np.zeros(table.order, dtype=bool)
        mask[np.asarray(ids, dtype=np.int64)] = True
        return mask
    raise ValueError(f"unknown target kind {kind!r}")


def target_predicate(kind: str, battery: PrimeBattery, gens: GenSet,
                     d: int = 2, cap: int = DEFAULT_CAP,
                     verify_surjective: bool = True,
                     m: int | None = None,
                     partition: Sequence[int] | None = None,
                     t: int | None = None,
                     subsets: dict | None = None) -> TargetPredicate:
    """Precompute the per-prime excluded sets for a sieve target.

    Each battery prime's group is BFS-enumerated from the generators and,
    unless disabled, checked surjective onto SL_d(F_p) before anything is
    excluded (the sieve presumes the full quotient structure).
    """
    if kind not in TARGET_KINDS:
        raise ValueError(f"unknown target kind {kind!r}")
    if len(battery) == 0:
        raise EmptyBattery("no battery primes")
    params: dict = {}
    if kind == "m_power":
        if m is None or m < 2:
            raise ValueError("m_power needs m >= 2")
        params["m"] = int(m)
    if kind == "missing_cycle_type":
        if partition is None:
            raise ValueError("missing_cycle_type needs a partition")
        partition = tuple(sorted(int(c) for c in partition))
        if sum(partition) != d or any(c < 1 for c in partition):
            raise ValueError(f"partition {partition} does not sum to d = {d}")
        params["partition"] = partition
    if kind == "trace_value":
        if t is None:
            raise ValueError("trace_value needs t")
        params["t"] = int(t)
    if kind == "custom_subset":
        if subsets is None:
            raise ValueError("custom_subset needs per-prime id sets")
        missing = [p for p in battery.primes if p not in subsets]
        if missing:
            raise PredicateMissingPrime(f"no subset for primes {missing}")
        params["subsets"] = subsets
    excluded_keys, densities, orders = {}, {}, {}
    for p in battery.primes:
        mod = PrimeModulus(p, d)
        table = enumerate_group(gens.reduce(mod), mod, cap=cap)
        expected = special_linear_order(p, d)
        if verify_surjective and table.order != expected:
            raise VerificationFailure(
                f"generators are not surjective mod {p}: "
                f"order {table.order} != {expected}")
        mask = _excluded_mask(table, kind, params)
        excluded_keys[p] = np.sort(table.keys[np.nonzero(mask)[0]])
        densities[p] = Fraction(int(mask.sum()), table.order)
        orders[p] = table.order
    return TargetPredicate(kind=kind, params=params, primes=battery.primes,
                           excluded_keys=excluded_keys, densities=densities,
                           orders=orders)


# ---------------------------------------------------------------------------
# sieve runs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SieveReport:
    kind: str
    primes: tuple[int, ...]
    densities: dict
    alpha: float
    schedule: tuple[int, ...]
    samples: int
    counts: dict
    fit: FitResult | None
    b_hat: float | None
    threshold_n: float | None
    bound_value: float
    bound_met: bool | None

    def estimate(self, n: int) -> float:
        return self.counts[n] / self.samples

    def estimates(self) -> list[float]:
        return [self.estimate(n) for n in self.schedule]

    def interval(self, n: int) -> tuple[float, float]:
        return wilson_interval(self.counts[n], self.samples)


def sieve_run(sampler: WalkSampler, predicate: TargetPredicate,
              battery: PrimeBattery, n_schedule, samples: int,
              b_hat: float | None = None, chunk: int = DEFAULT_CHUNK,
              lazy: bool = False) -> SieveReport:
    """Monte Carlo estimate of mu^n(Z) for the sieve conjunction target.

    A sample hits at time n iff its residue lies in the excluded set at
    every battery prime.  Reports per-prime densities, the sieve exponent
    alpha = min_p (1 - density_p), Wilson intervals, a decay fit when the
    signal allows one, and whether the estimate fell to 1/N on the part of
    the schedule at or beyond b_hat * log N.
    """
    if len(battery) == 0:
        raise EmptyBattery("no battery primes")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    registered = set(sampler.primes())
    missing = [p for p in battery.primes if p not in registered]
    if missing:
        raise PredicateMissingPrime(f"sampler lacks battery primes {missing}")
    missing = [p for p in battery.primes if p not in predicate.excluded_keys]
    if missing:
        raise PredicateMissingPrime(f"predicate lacks battery primes {missing}")
    schedule = ((int(n_schedule),) if isinstance(n_schedule, int)
                else tuple(sorted(set(int(v) for v in n_schedule))))
    if not schedule or schedule[0] < 0:
        raise ValueError("schedule must be non-empty with entries >= 0")
    sched_set = set(schedule)
    counts = {n: 0 for n in schedule}
    n_max = schedule[-1]
    for start in range(0, samples, chunk):
        width = min(chunk, samples - start)
        ids = np.arange(start, start + width, dtype=np.uint64)
        states = sampler.init_states(width)
        battery_states = {p: states[p] for p in battery.primes}
        if 0 in sched_set:
            counts[0] += int(predicate.hit_mask(battery_states).sum())
        for step in range(1, n_max + 1):
            idx = sampler.choices(step, ids, lazy)
            sampler.advance(states, idx)
            if step in sched_set:
                counts[step] += int(predicate.hit_mask(battery_states).sum())
    n_batt = len(battery)
    alpha = float(min(1 - predicate.densities[p] for p in battery.primes))
    try:
        fit = fit_log_decay(schedule, [counts[n] / samples for n in schedule],
                            floor=5.0 / math.sqrt(samples))
    except InsufficientSignal:
        fit = None
    bound_value = 1.0 / n_batt
    threshold_n = b_hat * math.log(n_batt) if b_hat is not None else None
    bound_met: bool | None = None
    if threshold_n is not None:
        tail = [n for n in schedule if n >= threshold_n]
        if tail:
            bound_met = all(counts[n] / samples <= bound_value for n in tail)
    return SieveReport(kind=predicate.kind, primes=battery.primes,
                       densities=dict(predicate.densities), alpha=alpha,
                       schedule=schedule, samples=samples, counts=counts,
                       fit=fit, b_hat=b_hat, threshold_n=threshold_n,
                       bound_value=bound_value, bound_met=bound_met)


# ---------------------------------------------------------------------------
# probabilistic bounds
# ---------------------------------------------------------------------------

def pairwise_bound(omega: float, delta: float, n_events: int) -> float:
    """(delta + 3/N) / omega^2, the pairwise-almost-independence bound on
    P(intersection of N events each of probability <= 1 - omega with
    pairwise correlation excess <= delta)."""
    if not 0 < omega <= 1:
        raise ValueError("need 0 < omega <= 1")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if n_events < 1:
        raise ValueError("n_events must be >= 1")
    return (delta + 3.0 / n_events) / (omega * omega)


@dataclass(frozen=True)
class MomentCheck:
    chebyshev_ok: bool
    second_moment_ok: bool
    p_below: Fraction
    p_above: Fraction
    lower_first: Fraction
    lower_second: Fraction


def moment_check(values: Iterable, t) -> MomentCheck:
    """Verify both moment inequalities exactly on an empirical distribution.

    For X the uniform draw from the sample and T >= 1:
      P(X <= T E X) >= 1 - 1/T          (first moment)
      P(X >= E X / T) >= (1 - 1/T)^2 E(X)^2 / E(X^2)   (second moment)
    All arithmetic in exact rationals; returns the four quantities too.
    """
    xs = [Fraction(v) for v in values]
    if not xs:
        raise ValueError("empty sample")
    if any(x < 0 for x in xs):
        raise ValueError("sample must be nonnegative")
    t = Fraction(t)
    if t < 1:
        raise ValueError("T must be >= 1")
    n = len(xs)
    ex = sum(xs) / n
    ex2 = sum(x * x for x in xs) / n
    p_below = Fraction(sum(1 for x in xs if x <= t * ex), n)
    p_above = Fraction(sum(1 for x in xs if t * x >= ex), n)
    lower_first = 1 - 1 / t
    if ex2 == 0:
        lower_second = Fraction(0)
    else:
        lower_second = (1 - 1 / t) ** 2 * ex * ex / ex2
    return MomentCheck(chebyshev_ok=p_below >= lower_first,
                       second_moment_ok=p_above >= lower_second,
                       p_below=p_below, p_above=p_above,
                       lower_first=lower_first, lower_second=lower_second)

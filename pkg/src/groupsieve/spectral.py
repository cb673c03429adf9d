"""Spectral gaps of Cayley graphs.

The averaging operator of the uniform measure on a symmetric generating set S
acts on functions by (T f)(x) = (1/k) sum_s f(s^-1 x); the Laplacian is
Delta = I - T and the gap is lambda1 = 1 - alpha1 with alpha1 the second
largest eigenvalue of T. Two routes are provided: a dense symmetric
eigensolve for small groups and a deflated power iteration that only touches
the generator permutations.

The iterative route runs the power iteration on the nonnegative shift
(I + T)/2 restricted to the mean-zero subspace, so it converges to the top
signed eigenvalue alpha1 even on bipartite graphs where |alpha_min| = alpha0;
a second phase on (I - T)/2 recovers alpha_min. Start vectors are hashed
sign patterns (two salts, best Rayleigh quotient kept): a literal alternating
pattern would be an exact eigenvector on even cycles and the iteration would
never leave it. Stopping requires both a small Rayleigh-quotient change and a
residual certificate ||Tv - alpha v|| <= 10 tol, which is what guarantees
agreement with the dense route at the promised tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import TooLargeForDense, UnsupportedDimension
from .modp import GenSet, IntMat, MatFp, PrimeModulus
from .rng import uniform_vector
from .table import DEFAULT_CAP, GroupTable, special_linear_order

DENSE_CAP = 4000
_SALTS = (0x5EED0001, 0x5EED0002)


def _resolve_action(table: GroupTable, gens: GenSet | None) -> np.ndarray:
    if gens is None:
        return table.gen_action
    if table.kind != "matrix":
        raise UnsupportedDimension("explicit generators require a matrix table")
    members = list(gens.members)
    if isinstance(members[0], IntMat):
        return table.action_of(np.stack([_int_row(m, table) for m in members]))
    return table.action_of_mats(members)


def _int_row(mat: IntMat, table: GroupTable) -> np.ndarray:
    from .table import _gen_row

    return _gen_row(mat, table.mods)


def markov_apply(f: np.ndarray, action: np.ndarray) -> np.ndarray:
    """(T f)(x) averaged over the generator permutations."""
    out = f[action[0]].astype(np.float64, copy=True)
    for j in range(1, action.shape[0]):
        out += f[action[j]]
    out /= action.shape[0]
    return out


def apply_markov(f: np.ndarray, table: GroupTable, gens: GenSet | None = None) -> np.ndarray:
    """One application of the averaging operator to a function on the group."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape[-1] != table.order:
        raise ValueError(f"function has {f.shape[-1]} values, group has {table.order}")
    action = _resolve_action(table, gens)
    return markov_apply(f, action)


def dense_markov_matrix(table: GroupTable, gens: GenSet | None = None,
                        cap: int = DENSE_CAP) -> np.ndarray:
    if table.order > cap:
        raise TooLargeForDense(f"order {table.order} exceeds dense cap {cap}")
    action = _resolve_action(table, gens)
    n, k = table.order, action.shape[0]
    t = np.zeros((n, n), dtype=np.float64)
    idx = np.arange(n)
    for j in range(k):
        np.add.at(t, (action[j], idx), 1.0 / k)
    return t


def full_spectrum(table: GroupTable, gens: GenSet | None = None,
                  cap: int = DENSE_CAP) -> np.ndarray:
    """All eigenvalues of T, descending; alpha0 = 1 leads."""
    t = dense_markov_matrix(table, gens, cap)
    ev = np.linalg.eigvalsh(t)
    return ev[::-1].copy()


@dataclass(frozen=True)
class SpectralReport:
    order: int
    k: int
    lambda1: float
    alpha1: float
    alpha_min: float
    method: str
    iterations: int
    residual: float
    converged: bool
    disconnected: bool


def _power_phase(action: np.ndarray, sign: float, tol: float, maxiter: int) -> tuple[float, int, float, bool]:
    """Power iteration for the top eigenvalue of (I + sign*T)/2 on mean-zero.

    Returns (theta, iterations, B-residual, converged); theta estimates the
    largest eigenvalue of the shifted operator, which lies in [0, 1].
    """
    n = action.shape[1]
    best = (-np.inf, 0, np.inf, False)
    total_iters = 0
    for salt in _SALTS:
        v = uniform_vector(n, salt)
        v -= v.mean()
        nv = np.linalg.norm(v)
        if nv == 0.0:
            continue
        v /= nv
        theta_prev = -np.inf
        converged = False
        theta = 0.0
        resid = np.inf
        iters = 0
        while iters < maxiter:
            w = 0.5 * (v + sign * markov_apply(v, action))
            w -= w.mean()
            theta = float(v @ w)
            resid = float(np.linalg.norm(w - theta * v))
            iters += 1
            if abs(theta - theta_prev) < tol and resid <= 5.0 * tol:
                converged = True
                break
            theta_prev = theta
            nw = np.linalg.norm(w)
            if nw == 0.0:
                # v spans an exact kernel vector of the shifted operator
                converged = True
                resid = 0.0
                theta = 0.0
                break
            v = w / nw
        total_iters += iters
        if theta > best[0]:
            best = (theta, iters, resid, converged)
    theta, _, resid, converged = best
    return theta, total_iters, resid, converged


def lambda1(table: GroupTable, gens: GenSet | None = None, method: str = "auto",
            tol: float = 1e-10, maxiter: int = 1_000_000,
            dense_cap: int = DENSE_CAP) -> SpectralReport:
    """Spectral gap report for the Cayley graph of (table, gens)."""
    action = _resolve_action(table, gens)
    n, k = table.order, action.shape[0]
    if method == "auto":
        method = "dense" if n <= dense_cap else "power_iteration"
    if method == "dense":
        t = dense_markov_matrix(table, gens, cap=max(dense_cap, n))
        ev = np.linalg.eigvalsh(t)
        alpha1 = float(ev[-2]) if n > 1 else 1.0
        alpha_min = float(ev[0])
        disconnected = int(np.sum(ev > 1.0 - 1e-9)) > 1
        return SpectralReport(order=n, k=k, lambda1=1.0 - alpha1, alpha1=alpha1,
                              alpha_min=alpha_min, method="dense", iterations=0,
                              residual=0.0, converged=True, disconnected=disconnected)
    if method != "power_iteration":
        raise ValueError(f"unknown method {method!r}")
    theta_hi, it_hi, resid_hi, conv_hi = _power_phase(action, +1.0, tol, maxiter)
    theta_lo, it_lo, resid_lo, conv_lo = _power_phase(action, -1.0, tol, maxiter)
    alpha1 = 2.0 * theta_hi - 1.0
    alpha_min = 1.0 - 2.0 * theta_lo
    residual = 2.0 * max(resid_hi, resid_lo)
    converged = conv_hi and conv_lo
    disconnected = alpha1 >= 1.0 - 1e-8
    return SpectralReport(order=n, k=k, lambda1=1.0 - alpha1, alpha1=alpha1,
                          alpha_min=alpha_min, method="power_iteration",
                          iterations=it_hi + it_lo, residual=residual,
                          converged=converged, disconnected=disconnected)


def trace_identity_residual(table: GroupTable, n: int, gens: GenSet | None = None,
                            cap: int = DENSE_CAP) -> float:
    """|sum_i alpha_i^n - |G| mu^n(1)| for even n; exact convolution vs spectrum."""
    if n % 2 != 0:
        raise ValueError("trace identity is checked at even times")
    spectrum = full_spectrum(table, gens, cap)
    action = _resolve_action(table, gens)
    mass = np.zeros(table.order)
    mass[table.identity_id()] = 1.0
    for _ in range(n):
        mass = markov_apply(mass, action)
    lhs = float(np.sum(spectrum ** n))
    rhs = table.order * float(mass[table.identity_id()])
    return abs(lhs - rhs)


@dataclass(frozen=True)
class QuasirandomBound:
    p: int
    d: int
    min_dim: int
    order: int
    beta: float
    degenerate: bool


def quasirandom_bound(p: int, d: int = 2) -> QuasirandomBound:
    """Lower bound on nontrivial complex representation dimension and the
    quasirandomness exponent beta = log(min_dim)/log(|G|).

    d = 2 uses the classical (p-1)/2 bound; d >= 3 uses the conservative
    Landazuri-Seitz-type bound p^(d-1) - 1.
    """
    PrimeModulus(p, d)
    order = special_linear_order(p, d)
    if d == 2:
        min_dim = max(1, (p - 1) // 2)
    else:
        min_dim = max(1, p ** (d - 1) - 1)
    beta = math.log(min_dim) / math.log(order) if min_dim > 1 else 0.0
    return QuasirandomBound(p=p, d=d, min_dim=min_dim, order=order, beta=beta,
                            degenerate=min_dim <= 1)


@dataclass(frozen=True)
class ReturnGapBound:
    applies: bool
    threshold: float
    alpha1_bound: float | None


def alpha1_bound_from_return(mu_n_at_1: float, n: int, order: int, beta: float,
                             c1: float) -> ReturnGapBound:
    """If mu^n(1) <= |G|^-(1-beta/2) at an even time n <= c1 log|G|, the
    spectrum satisfies alpha1 <= exp(-beta/(2 c1))."""
    if n % 2 != 0 or n <= 0:
        raise ValueError("requires a positive even time")
    if beta <= 0:
        raise ValueError("requires beta > 0")
    if n > c1 * math.log(order) * (1 + 1e-12):
        raise ValueError(f"n = {n} exceeds c1 log|G| = {c1 * math.log(order):.3f}")
    threshold = order ** (-(1.0 - beta / 2.0))
    if mu_n_at_1 <= threshold * (1 + 1e-12):
        return ReturnGapBound(True, threshold, math.exp(-beta / (2.0 * c1)))
    return ReturnGapBound(False, threshold, None)


def product_group_gap(gens: GenSet, p1: int, p2: int, d: int = 2,
                      method: str = "auto", tol: float = 1e-10,
                      cap: int = DEFAULT_CAP) -> SpectralReport:
    """Gap of the diagonal image inside SL_d(F_p1) x SL_d(F_p2)."""
    if p1 == p2:
        raise ValueError("product gap needs two distinct primes")
    mods = (PrimeModulus(p1, d), PrimeModulus(p2, d))
    table = GroupTable.enumerate_product(gens, mods, cap)
    return lambda1(table, method=method, tol=tol)


@dataclass(frozen=True)
class FlatteningPoint:
    n: int
    l2: float
    l2_doubled: float
    ratio: float


def flattening_trajectory(table: GroupTable, ns: Sequence[int],
                          gens: GenSet | None = None) -> list[FlatteningPoint]:
    """Exact ||mu^n||_2 along a schedule, with the one-step-doubling ratio
    ||mu^2n||_2 / ||mu^n||_2 that the flattening statement controls."""
    ns = sorted(set(int(n) for n in ns))
    if not ns or ns[0] < 1:
        raise ValueError("schedule must contain positive times")
    action = _resolve_action(table, gens)
    horizon = 2 * ns[-1]
    want = set(ns) | {2 * n for n in ns}
    mass = np.zeros(table.order)
    mass[table.identity_id()] = 1.0
    norms: dict[int, float] = {}
    for step in range(1, horizon + 1):
        mass = markov_apply(mass, action)
        if step in want:
            norms[step] = float(np.linalg.norm(mass))
    return [FlatteningPoint(n=n, l2=norms[n], l2_doubled=norms[2 * n],
                            ratio=norms[2 * n] / norms[n]) for n in ns]

"""Deterministic primality testing and small prime generation."""

from __future__ import annotations

# Witness set proving Miller-Rabin deterministic for all n < 3.3 * 10^24,
# far beyond any modulus this library handles.
_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for 64-bit-scale integers."""
    if n < 2:
        return False
    for w in _WITNESSES:
        if n == w:
            return True
        if n % w == 0:
            return False
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for w in _WITNESSES:
        x = pow(w, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def primes_from(start: int):
    """Yield primes >= start in increasing order, indefinitely."""
    n = max(2, start)
    if n > 2 and n % 2 == 0:
        if n == 2:
            yield 2
        n += 1
    if n == 2:
        yield 2
        n = 3
    while True:
        if is_prime(n):
            yield n
        n += 2 if n > 2 else 1

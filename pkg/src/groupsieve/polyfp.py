"""Polynomial arithmetic over F_p.

Polynomials are tuples of coefficients in ascending degree order, entries
reduced to [0, p). The zero polynomial is the empty tuple.
"""

from __future__ import annotations

Poly = tuple[int, ...]


def trim(a: Poly) -> Poly:
    i = len(a)
    while i > 0 and a[i - 1] == 0:
        i -= 1
    return a[:i]


def degree(a: Poly) -> int:
    """Degree, with deg 0 = -1 by convention."""
    return len(a) - 1


def add(a: Poly, b: Poly, p: int) -> Poly:
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, c in enumerate(b):
        out[i] = (out[i] + c) % p
    return trim(tuple(out))


def sub(a: Poly, b: Poly, p: int) -> Poly:
    neg = tuple((-c) % p for c in b)
    return add(a, neg, p)


def mul(a: Poly, b: Poly, p: int) -> Poly:
    if not a or not b:
        return ()
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            out[i + j] = (out[i + j] + ai * bj) % p
    return trim(tuple(out))


def divmod_poly(a: Poly, b: Poly, p: int) -> tuple[Poly, Poly]:
    """Quotient and remainder; b must be nonzero."""
    b = trim(b)
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    a = list(trim(a))
    db, lb = degree(b), b[-1]
    inv_lb = pow(lb, -1, p)
    q = [0] * max(0, len(a) - db)
    while len(a) - 1 >= db and a:
        da = len(a) - 1
        coef = a[-1] * inv_lb % p
        q[da - db] = coef
        for i in range(db + 1):
            a[da - db + i] = (a[da - db + i] - coef * b[i]) % p
        while a and a[-1] == 0:
            a.pop()
    return trim(tuple(q)), trim(tuple(a))


def mod(a: Poly, b: Poly, p: int) -> Poly:
    return divmod_poly(a, b, p)[1]


def monic(a: Poly, p: int) -> Poly:
    a = trim(a)
    if not a:
        return a
    inv = pow(a[-1], -1, p)
    return tuple(c * inv % p for c in a)


def gcd(a: Poly, b: Poly, p: int) -> Poly:
    a, b = trim(a), trim(b)
    while b:
        a, b = b, mod(a, b, p)
    return monic(a, p)


def derivative(a: Poly, p: int) -> Poly:
    if len(a) <= 1:
        return ()
    return trim(tuple(i * a[i] % p for i in range(1, len(a))))


def powmod(base: Poly, e: int, f: Poly, p: int) -> Poly:
    """base^e mod (f, p) by square and multiply."""
    result: Poly = (1,)
    base = mod(base, f, p)
    while e > 0:
        if e & 1:
            result = mod(mul(result, base, p), f, p)
        base = mod(mul(base, base, p), f, p)
        e >>= 1
    return result


def is_squarefree(f: Poly, p: int) -> bool:
    """True when gcd(f, f') = 1 over F_p."""
    d = derivative(f, p)
    if not d:
        return degree(trim(f)) <= 0
    return degree(gcd(f, d, p)) == 0


def distinct_degree_type(f: Poly, p: int) -> tuple[int, ...]:
    """Degrees of the irreducible factors of a squarefree monic f, sorted.

    Stage i of distinct-degree factorization splits off the product of all
    irreducible factors of degree exactly i as gcd(x^(p^i) - x, f).
    """
    f = monic(trim(f), p)
    if degree(f) <= 0:
        return ()
    degs: list[int] = []
    h: Poly = (0, 1)
    i = 0
    while degree(f) > 0:
        i += 1
        if degree(f) < 2 * i:
            # what remains is a single irreducible factor
            degs.append(degree(f))
            break
        h = powmod(h, p, f, p)
        g = gcd(sub(h, (0, 1), p), f, p)
        if degree(g) > 0:
            degs.extend([i] * (degree(g) // i))
            f = divmod_poly(f, g, p)[0]
            h = mod(h, f, p)
    return tuple(sorted(degs))

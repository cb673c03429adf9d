"""Exact rational matrices, mod-p reduction, heights, and element classes."""

import json
import math
import random
from fractions import Fraction

import pytest
import sympy

from groupsieve.errors import (
    DenominatorDivisibleByP,
    DimensionMismatch,
    NotDeterminantOne,
    NotRegularSemisimple,
    NotSymmetric,
)
from groupsieve.modp import (
    GenSet,
    IntMat,
    MatFp,
    PrimeModulus,
    char_poly,
    cycle_type,
    heights,
    is_power_unipotent,
    is_regular_semisimple,
    load_generator_file,
    log_height,
    naive_height,
    reduce_mod,
    sanov_generators,
)


def _random_sl2_int(rng, bound=6):
    """Random integer SL_2 matrix via a short word in the Sanov pair."""
    a = IntMat((1, 2, 0, 1))
    b = IntMat((1, 0, 2, 1))
    word = IntMat.identity(2)
    for _ in range(rng.randrange(1, bound)):
        g = rng.choice([a, b, a.inverse(), b.inverse()])
        word = word * g
    return word


def _random_matfp(rng, mod):
    """Random element of SL_d(F_p) by rejection on a random last row fixup."""
    d, p = mod.d, mod.p
    while True:
        ent = [rng.randrange(p) for _ in range(d * d)]
        try:
            m = MatFp(mod, ent)
            return m
        except NotDeterminantOne:
            # scale one row to fix the determinant when it is invertible
            det = _det(ent, d, p)
            if det == 0:
                continue
            inv = pow(det, -1, p)
            for j in range(d):
                ent[j] = ent[j] * inv % p
            return MatFp(mod, ent)


def _det(ent, d, p):
    import itertools
    total = 0
    for perm in itertools.permutations(range(d)):
        sign = 1
        seen = [False] * d
        for i in range(d):
            if seen[i]:
                continue
            j, c = i, 0
            while not seen[j]:
                seen[j] = True
                j = perm[j]
                c += 1
            if c % 2 == 0:
                sign = -sign
        term = sign
        for i in range(d):
            term = term * ent[i * d + perm[i]]
        total += term
    return total % p


def test_prime_modulus_validation():
    with pytest.raises(ValueError):
        PrimeModulus(15)
    mod = PrimeModulus(7, 3)
    assert (mod.p, mod.d) == (7, 3)
    with pytest.raises(AttributeError):
        mod.p = 11


def test_matfp_det_enforced():
    mod = PrimeModulus(5)
    with pytest.raises(NotDeterminantOne):
        MatFp(mod, (1, 0, 0, 2))
    m = MatFp(mod, (2, 0, 0, 3))  # det = 6 = 1 mod 5
    assert m * m.inverse() == MatFp.identity(mod)


def test_intmat_exact_inverse():
    m = IntMat((Fraction(1, 2), 0, 7, 2))
    assert (m * m.inverse()).is_identity()
    assert (m.inverse() * m).is_identity()
    with pytest.raises(NotDeterminantOne):
        IntMat((1, 1, 1, 1))
    with pytest.raises(DimensionMismatch):
        IntMat((1, 0, 0), d=2)


def test_intmat_accepts_fraction_strings():
    m = IntMat(("1/2", "0", "7", "2"))
    assert m.entries[0] == Fraction(1, 2)


def test_reduce_mod_is_ring_map():
    """reduce(AB) = reduce(A) reduce(B) over many random pairs."""
    rng = random.Random(7)
    mod = PrimeModulus(13)
    for _ in range(10_000):
        a = _random_sl2_int(rng)
        b = _random_sl2_int(rng)
        assert reduce_mod(a * b, mod) == reduce_mod(a, mod) * reduce_mod(b, mod)


def test_reduce_mod_bad_denominator():
    m = IntMat((Fraction(1, 5), 0, 3, 5))
    with pytest.raises(DenominatorDivisibleByP):
        reduce_mod(m, PrimeModulus(5))
    # fine at any other prime
    assert reduce_mod(m, PrimeModulus(7)).entries[0] == pow(5, -1, 7)


def test_heights_basic():
    a = IntMat((1, 2, 0, 1))
    assert naive_height(a) == 2
    assert naive_height(IntMat.identity(2)) == 1
    h = heights(a)
    assert h.naive == 2
    assert h.log_height == log_height(a)
    # Frobenius bound: log height of an integer matrix is at least the log
    # of its largest entry and at most log of (d * max^2)^(1/2) ... just
    # sanity-bound it between log(max entry) and log(d * max entry).
    assert math.log(2) <= h.log_height <= math.log(2 * math.sqrt(6))


def test_log_height_submultiplicative_up_to_dimension():
    """log H(AB) <= log H(A) + log H(B) + log d for the Frobenius height."""
    rng = random.Random(19)
    slack = math.log(2) + 1e-9
    for _ in range(300):
        a = _random_sl2_int(rng)
        b = _random_sl2_int(rng)
        assert log_height(a * b) <= log_height(a) + log_height(b) + slack


def test_word_height_growth_is_exponential():
    # heights along powers of a Sanov generator grow linearly in log scale
    a = IntMat((1, 2, 0, 1))
    hs = [log_height(a ** n) for n in range(1, 8)]
    diffs = [hs[i + 1] - hs[i] for i in range(len(hs) - 1)]
    assert all(d > 0 for d in diffs)
    assert naive_height(a ** 7) == 14


def test_genset_symmetrizes():
    g = sanov_generators()
    assert g.k == 4 and g.d == 2
    assert not g.contains_identity
    mats = set(g.members)
    for m in g.members:
        assert m.inverse() in mats


def test_genset_asserted_symmetry_checked():
    a = IntMat((1, 2, 0, 1))
    with pytest.raises(NotSymmetric):
        GenSet([a], symmetric=True)
    order2 = IntMat((0, 1, -1, 0))  # own inverse up to sign; check directly
    GenSet([order2, order2.inverse()], symmetric=True)


def test_genset_reduce_keeps_multiplicity():
    # two distinct integer matrices can collide mod p; the reduced set keeps
    # both slots so the uniform step distribution is preserved
    a = IntMat((1, 2, 0, 1))
    b = IntMat((1, 7, 0, 1))
    g = GenSet([a, b])
    r = g.reduce(PrimeModulus(5))
    assert len(r.members) == len(g.members)
    assert r.members[0] == r.members[1]  # 2 = 7 mod 5


def test_generator_file_round_trip(tmp_path):
    path = tmp_path / "gens.json"
    path.write_text(json.dumps([[[1, 2], [0, 1]], [["1/3", 0], [0, 3]]]))
    g = load_generator_file(str(path))
    assert g.d == 2 and g.k == 4
    obj = {"matrices": [[[1, 2], [0, 1]], [[1, -2], [0, 1]]], "symmetric": True}
    path.write_text(json.dumps(obj))
    g2 = load_generator_file(str(path))
    assert g2.k == 2

    path.write_text(json.dumps([[[1, 1], [1, 1]]]))
    with pytest.raises(NotDeterminantOne):
        load_generator_file(str(path))
    path.write_text(json.dumps({"matrices": [], "extra": 1}))
    with pytest.raises(ValueError):
        load_generator_file(str(path))


def test_char_poly_frozen_cases():
    mod = PrimeModulus(7)
    m = MatFp(mod, (0, 6, 1, 3))  # companion of x^2 - 3x + 1
    assert char_poly(m) == (1, 4, 1)  # x^2 - 3x + 1 = x^2 + 4x + 1 mod 7
    assert char_poly(MatFp.identity(mod)) == (1, 5, 1)  # (x-1)^2


def _sympy_char_poly(m):
    d, p = m.mod.d, m.mod.p
    M = sympy.Matrix(d, d, [int(e) for e in m.entries])
    coeffs = sympy.Poly(M.charpoly().as_expr(), sympy.Symbol("lambda")).all_coeffs()
    return tuple(int(c) % p for c in coeffs)


@pytest.mark.parametrize("p,d", [(5, 2), (13, 2), (3, 3), (7, 3)])
def test_char_poly_against_sympy(p, d):
    rng = random.Random(100 * p + d)
    mod = PrimeModulus(p, d)
    for _ in range(60):
        m = _random_matfp(rng, mod)
        assert char_poly(m) == _sympy_char_poly(m)


def test_cycle_type_matches_sympy_factorization():
    rng = random.Random(23)
    x = sympy.Symbol("x")
    for p in (5, 11):
        mod = PrimeModulus(p, 2)
        for _ in range(80):
            m = _random_matfp(rng, mod)
            coeffs = char_poly(m)
            poly = sympy.Poly(sum(int(c) * x**(len(coeffs) - 1 - i)
                                  for i, c in enumerate(coeffs)), x, modulus=p)
            if not is_regular_semisimple(m):
                with pytest.raises(NotRegularSemisimple):
                    cycle_type(m)
                continue
            _, factors = sympy.factor_list(poly)
            expected = tuple(sorted(int(sympy.degree(f)) for f, mult in factors
                                    for _ in range(mult)))
            assert cycle_type(m) == expected


def test_cycle_type_split_vs_inert():
    mod = PrimeModulus(5)
    split = MatFp(mod, (2, 0, 0, 3))       # eigenvalues 2, 3 in F_5
    assert cycle_type(split) == (1, 1)
    inert = MatFp(mod, (0, 4, 1, 1))       # char poly x^2 - x + 1, no roots mod 5
    assert cycle_type(inert) == (2,)


def test_power_unipotent_classification():
    mod = PrimeModulus(7)
    upper = MatFp(mod, (1, 3, 0, 1))
    assert is_power_unipotent(upper)
    minus_upper = MatFp(mod, (6, 3, 0, 6))  # -U, squares to unipotent
    assert is_power_unipotent(minus_upper)
    assert is_power_unipotent(MatFp.identity(mod))
    generic = MatFp(mod, (2, 0, 0, 4))      # order 3 torus element, 2*4=8=1
    assert not is_power_unipotent(generic)


def test_power_unipotent_trace_criterion_d2():
    """In SL_2, power-unipotent = trace in {2, -2} (elements of B-conjugates
    with eigenvalue +-1), checked exhaustively for small p."""
    for p in (3, 5, 7):
        mod = PrimeModulus(p)
        rng = random.Random(p)
        for _ in range(150):
            m = _random_matfp(rng, mod)
            assert is_power_unipotent(m) == (m.trace() in (2 % p, (-2) % p))

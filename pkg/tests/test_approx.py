"""Approximate-subgroup statistics: product sets, covers, energy, growth."""

import math

import numpy as np
import pytest

from groupsieve.approx import (
    ApproxReport,
    FiniteSubset,
    approx_report,
    energy,
    greedy_cover,
    growth_scan,
    larsen_pink_ratio,
    power_set,
    product_set,
    random_symmetric_subset,
    tripling,
    variety_predicate,
)
from groupsieve.errors import MissingIdentity, NotSymmetric, TableMismatch
from groupsieve.modp import GenSet, MatFp, PrimeModulus, sanov_generators
from groupsieve.table import (
    GroupTable,
    enumerate_group,
    full_special_linear,
    standard_subgroup,
)


def _interval_subset(n, radius):
    table = GroupTable.cyclic_group(n)
    ids = sorted(set(r % n for r in range(-radius, radius + 1)))
    return FiniteSubset(table, ids)


def test_finite_subset_basic():
    table = GroupTable.cyclic_group(10)
    a = FiniteSubset(table, [3, 3, 7, 0])
    assert len(a) == 3
    assert a.contains_identity
    assert a.symmetric  # 3 and 7 are mutual inverses mod 10
    assert a.contains([3, 4]).tolist() == [True, False]
    b = FiniteSubset(table, [0, 3])
    assert not b.symmetric
    with pytest.raises(ValueError):
        FiniteSubset(table, [10])


def test_random_symmetric_subset_properties():
    table = full_special_linear(7)
    a = random_symmetric_subset(table, 40, seed=5)
    assert a.symmetric and a.contains_identity
    assert 40 <= len(a) <= 41
    again = random_symmetric_subset(table, 40, seed=5)
    assert np.array_equal(a.ids, again.ids)
    other = random_symmetric_subset(table, 40, seed=6)
    assert not np.array_equal(a.ids, other.ids)


def test_product_set_against_python_sets():
    n = 24
    table = GroupTable.cyclic_group(n)
    a = FiniteSubset(table, [0, 1, 5, 19, 23])
    b = FiniteSubset(table, [2, 7])
    expected = sorted({(x + y) % n for x in (0, 1, 5, 19, 23) for y in (2, 7)})
    assert product_set(a, b).ids.tolist() == expected
    assert product_set(b, a).ids.tolist() == expected  # abelian


def test_product_set_subgroup_closure():
    table = full_special_linear(7)
    borel = FiniteSubset(table, standard_subgroup(table, "borel"))
    assert product_set(borel, borel) == borel
    torus = FiniteSubset(table, standard_subgroup(table, "torus"))
    tb = product_set(torus, borel)
    assert tb == borel  # T B = B


def test_product_set_table_mismatch():
    a = FiniteSubset(GroupTable.cyclic_group(5), [0])
    b = FiniteSubset(GroupTable.cyclic_group(7), [0])
    with pytest.raises(TableMismatch):
        product_set(a, b)


def test_power_set_small_powers():
    a = _interval_subset(41, 5)
    assert power_set(a, 1) == a
    assert power_set(a, 2) == product_set(a, a)
    assert len(power_set(a, 2)) == 21
    assert len(power_set(a, 3)) == 31
    with pytest.raises(ValueError):
        power_set(a, 0)


def test_interval_is_3_approximate():
    """The interval {-5..5} in Z/41: AA = {-10..10} is covered by three
    translates and the tripling constant is 31/11."""
    a = _interval_subset(41, 5)
    k_hat, x_ids = greedy_cover(a)
    assert k_hat == 3
    assert tripling(a) == pytest.approx(31 / 11, rel=1e-15)
    # verify the cover property AA subset of XA by hand
    table = a.table
    aa = product_set(a, a)
    covered = np.zeros(table.order, dtype=bool)
    for x in x_ids:
        covered[table.compose_ids(int(x), a.ids)] = True
    assert covered[aa.ids].all()


def test_greedy_cover_requires_symmetry_and_identity():
    table = GroupTable.cyclic_group(12)
    with pytest.raises(NotSymmetric):
        greedy_cover(FiniteSubset(table, [0, 1]))
    with pytest.raises(MissingIdentity):
        greedy_cover(FiniteSubset(table, [1, 11]))


def test_cover_constant_one_iff_subgroup():
    table = full_special_linear(7)
    for name in ("torus", "borel", "monomial"):
        sub = FiniteSubset(table, standard_subgroup(table, name))
        k_hat, x_ids = greedy_cover(sub)
        assert k_hat == 1
        assert x_ids.tolist() == [table.identity_id()]
    # a generator ball is not a subgroup and needs more than one translate
    mod = PrimeModulus(11)
    ball_table = enumerate_group(sanov_generators().reduce(mod), mod)
    ball = FiniteSubset(ball_table,
                        [ball_table.identity_id()]
                        + [int(ball_table.gen_action[j, ball_table.identity_id()])
                           for j in range(4)])
    k_hat, _ = greedy_cover(ball)
    assert k_hat >= 2


def test_power_growth_bounded_by_cover_constant():
    """AA subset of XA gives |A^n| <= K_hat^(n-1) |A| for every n."""
    for a in (_interval_subset(41, 5), _interval_subset(100, 7)):
        k_hat, _ = greedy_cover(a)
        for n in (2, 3, 4):
            assert len(power_set(a, n)) <= k_hat ** (n - 1) * len(a)


def test_energy_definition_small_case():
    n = 12
    table = GroupTable.cyclic_group(n)
    ids = [0, 1, 11, 4, 8]
    a = FiniteSubset(table, ids)
    r = {}
    for x in ids:
        for y in ids:
            r[(x + y) % n] = r.get((x + y) % n, 0) + 1
    assert energy(a) == sum(v * v for v in r.values())


def test_energy_extremes():
    table = full_special_linear(5)
    torus = FiniteSubset(table, standard_subgroup(table, "torus"))
    assert energy(torus) == len(torus) ** 3  # subgroups are maximally structured
    single = FiniteSubset(table, [table.identity_id()])
    assert energy(single) == 1


def test_energy_and_tripling_laws_on_random_subsets():
    """|A|^2 <= E(A) <= |A|^3, E(A) >= |A|^4/|AA|, tripling >= 1; no
    violations across many random symmetric subsets in several groups."""
    tables = [GroupTable.cyclic_group(100), full_special_linear(5),
              full_special_linear(7)]
    checked = 0
    for ti, table in enumerate(tables):
        for seed in range(70):
            size = 3 + (seed * 7) % 40
            a = random_symmetric_subset(table, size, seed=seed + 1000 * ti)
            e = energy(a)
            s = len(a)
            aa = product_set(a, a)
            assert s * s <= e <= s ** 3
            assert e * len(aa) >= s ** 4  # Cauchy-Schwarz
            assert tripling(a) >= 1.0
            checked += 1
    assert checked == 210


def test_variety_predicates_and_larsen_pink():
    p = 7
    table = full_special_linear(p)
    whole = FiniteSubset(table, np.arange(table.order))
    torus_mask, dim_t = variety_predicate(table, "diagonal_torus")
    assert dim_t == 1 and int(torus_mask.sum()) == p - 1
    unip_mask, dim_u = variety_predicate(table, "unipotent_upper")
    assert dim_u == 1 and int(unip_mask.sum()) == p
    ratio_t = larsen_pink_ratio(whole, torus_mask, dim_t, 3)
    assert ratio_t == pytest.approx((p - 1) / table.order ** (1 / 3), rel=1e-12)
    assert ratio_t == pytest.approx(0.863054, abs=1e-6)
    ratio_u = larsen_pink_ratio(whole, unip_mask, dim_u, 3)
    assert ratio_u == pytest.approx(1.006897, abs=1e-6)
    # V = G is the trivial variety: the ratio collapses to exactly 1
    assert larsen_pink_ratio(whole, np.ones(table.order, dtype=bool), 3, 3) == 1.0


def test_larsen_pink_for_whole_group_stays_bounded():
    """For A = G the torus ratio (p-1)/|G|^(1/3) stays within a constant."""
    for p in (5, 7, 13, 31, 61):
        table = full_special_linear(p)
        whole = FiniteSubset(table, np.arange(table.order))
        mask, dim_v = variety_predicate(table, "diagonal_torus")
        ratio = larsen_pink_ratio(whole, mask, dim_v, 3)
        assert 0.5 <= ratio <= 2.0


def test_larsen_pink_accepts_callables_and_validates():
    table = full_special_linear(5)
    a = FiniteSubset(table, standard_subgroup(table, "borel"))
    mask, dim_v = variety_predicate(table, "trace", value=2)
    by_mask = larsen_pink_ratio(a, mask, dim_v, 3)
    by_call = larsen_pink_ratio(a, lambda ids: mask[ids], dim_v, 3)
    assert by_mask == by_call
    with pytest.raises(ValueError):
        larsen_pink_ratio(a, mask, 4, 3)
    with pytest.raises(ValueError):
        variety_predicate(table, "trace")
    with pytest.raises(ValueError):
        variety_predicate(table, "nonsense")


def test_growth_scan_generator_ball():
    mod = PrimeModulus(31)
    table = enumerate_group(sanov_generators().reduce(mod), mod)
    e = table.identity_id()
    ball = FiniteSubset(table, [e] + [int(table.gen_action[j, e]) for j in range(4)])
    scan = growth_scan(ball, max_power=6)
    assert scan.sizes == (5, 17, 53, 161, 485, 1457)
    assert scan.generates and not scan.saturated
    assert scan.epsilon == pytest.approx(math.log(53 / 5) / math.log(5), rel=1e-12)


def test_growth_scan_subgroup_stalls():
    table = full_special_linear(7)
    torus = FiniteSubset(table, standard_subgroup(table, "torus"))
    scan = growth_scan(torus)
    assert scan.sizes == (6, 6, 6, 6, 6)
    assert not scan.generates and not scan.saturated
    assert scan.epsilon == 0.0


def test_growth_scan_saturation():
    table = GroupTable.cyclic_group(20)
    big = FiniteSubset(table, sorted(set(list(range(8)) + [20 - i for i in range(1, 8)])))
    scan = growth_scan(big)
    assert scan.saturated and scan.generates
    assert scan.epsilon is None
    with pytest.raises(ValueError):
        growth_scan(big, max_power=2)


def test_approx_report_subgroup_values():
    table = full_special_linear(13)
    torus = FiniteSubset(table, standard_subgroup(table, "torus"))
    rep = approx_report(torus)
    assert rep == ApproxReport(size=12, size_aa=12, size_aaa=12, k_hat=1,
                               tripling=1.0, energy=12 ** 3)
    rep.check()


def test_approx_report_interval_values():
    rep = approx_report(_interval_subset(41, 5))
    assert rep.size == 11 and rep.size_aa == 21 and rep.size_aaa == 31
    assert rep.k_hat == 3
    assert rep.energy >= rep.size ** 2

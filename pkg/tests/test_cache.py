import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from instances import chain_specs, single_list_specs
from jcsp.cache import (
    CacheModelError,
    ListCacheSpec,
    access_factors,
    brute_force_cache_oracle,
    cache_marginals,
    isolated_cache_hit_miss,
    normalizing_constant,
)

ZIPF3 = np.array([6, 3, 2]) / 11.0


# -- access factors ------------------------------------------------------------
def test_single_list_factors_equal_rates():
    g = access_factors(ListCacheSpec.single_list([1.0, 2.0, 3.0], 1))
    np.testing.assert_array_equal(g, [[1, 1], [1, 2], [1, 3]])


def test_half_insertion_halves_factors():
    spec = ListCacheSpec.build(3, (1,), rates=[1.0, 2.0, 3.0], access=[[0.5, 0.5], [0.0, 1.0]])
    np.testing.assert_allclose(access_factors(spec)[:, 1], [0.5, 1.0, 1.5])


def test_chain_factor_multiplies_by_rate_in_parent_list():
    rates = np.array([[[1.0, 2.0, 0.0], [3.0, 5.0, 0.0]]])
    g = access_factors(ListCacheSpec.build(2, (1, 1), (0, 1), rates))
    np.testing.assert_allclose(g[:, 2], g[:, 1] * rates[0, :, 1])


def test_malformed_parents_are_rejected():
    with pytest.raises(CacheModelError):
        ListCacheSpec.build(3, (1, 1), (2, 1), [1.0, 1.0, 1.0])


# -- normalizing constants -----------------------------------------------------------
def test_normalizing_constant_is_elementary_symmetric():
    gamma = np.array([[1, 1], [1, 2], [1, 3]], float)
    nc = normalizing_constant(gamma, (2,))
    assert nc.E == pytest.approx(11.0, rel=1e-12)
    assert nc.E_loo[2] == pytest.approx(2.0, rel=1e-12)


def test_full_cache_constant_is_product():
    gamma = np.array([[1, 2], [1, 3], [1, 5]], float)
    assert normalizing_constant(gamma, (3,)).E == pytest.approx(30.0, rel=1e-12)


def test_capacity_above_items_is_rejected():
    with pytest.raises(CacheModelError):
        ListCacheSpec.single_list([1.0, 1.0], 3)


# -- marginals -------------------------------------------------------------------
def test_marginals_of_three_items_one_slot():
    marg = cache_marginals(ListCacheSpec.single_list([1.0, 2.0, 3.0], 1))
    assert marg.pi[0, 1] == pytest.approx(1 / 6, abs=1e-12)
    assert marg.pi[0, 0] == pytest.approx(5 / 6, abs=1e-12)


def test_uniform_rates_give_equal_miss_ratios():
    np.testing.assert_allclose(cache_marginals(ListCacheSpec.single_list([1.0] * 3, 1)).miss_ratio, 2 / 3,
                               atol=1e-12)


def test_full_cache_never_misses():
    marg = cache_marginals(ListCacheSpec.single_list([1.0, 4.0, 2.0], 3))
    np.testing.assert_allclose(marg.miss_ratio, 0.0, atol=1e-12)
    assert marg.total_miss_rate == pytest.approx(0.0, abs=1e-12)


def test_no_insert_scales_miss_rate():
    spec = ListCacheSpec.single_list([1.0, 2.0, 3.0], 1, no_insert=0.25)
    marg = cache_marginals(spec)
    np.testing.assert_allclose(marg.miss_rates[0], spec.rates[0, :, 0] * marg.pi[:, 0] * 0.75)


# -- isolated hit and miss ---------------------------------------------------------
def test_single_item_always_hits():
    p_hit, p_miss, _ = isolated_cache_hit_miss(ListCacheSpec.single_list([2.0], 1))
    assert p_hit[0] == pytest.approx(1.0) and p_miss[0] == pytest.approx(0.0, abs=1e-15)


def test_uniform_hit_equals_occupancy():
    p_hit, _, _ = isolated_cache_hit_miss(ListCacheSpec.single_list([1.0] * 3, 1))
    assert p_hit[0] == pytest.approx(1 / 3, abs=1e-12)


def test_zipf_hit_matches_enumeration():
    spec = ListCacheSpec.single_list(ZIPF3, 1)
    p_hit, p_miss, _ = isolated_cache_hit_miss(spec)
    oracle = brute_force_cache_oracle(spec)
    assert p_hit[0] == pytest.approx(float(ZIPF3 @ (1 - oracle.pi[:, 0])), abs=1e-9)
    assert p_hit[0] + p_miss[0] == pytest.approx(1.0, abs=1e-15)


def test_class_rates_do_not_change_single_stream_hit():
    spec = ListCacheSpec.single_list(ZIPF3, 1)
    a, _, _ = isolated_cache_hit_miss(spec)
    b, _, _ = isolated_cache_hit_miss(spec, np.array([40.0]))
    assert a[0] == pytest.approx(b[0], abs=1e-12)


def test_zero_arrival_rate_is_an_error():
    with pytest.raises(CacheModelError):
        isolated_cache_hit_miss(ListCacheSpec.single_list([1.0, 1.0], 1), np.array([0.0]))


# -- enumeration oracle -------------------------------------------------------------------
def test_oracle_matches_three_item_example():
    spec = ListCacheSpec.single_list([1.0, 2.0, 3.0], 1)
    np.testing.assert_allclose(brute_force_cache_oracle(spec).pi, cache_marginals(spec).pi, atol=1e-12)


def test_oracle_two_symmetric_items():
    np.testing.assert_allclose(brute_force_cache_oracle(ListCacheSpec.single_list([1.0, 1.0], 1)).miss_ratio,
                               0.5)


def test_oracle_chain_occupancy():
    pi = brute_force_cache_oracle(ListCacheSpec.build(3, (1, 1), (0, 1), [1.0, 2.0, 3.0])).pi
    np.testing.assert_allclose(pi[:, 1:].sum(axis=0), [1.0, 1.0], atol=1e-12)


def test_oracle_guard():
    with pytest.raises(CacheModelError):
        brute_force_cache_oracle(ListCacheSpec.single_list(np.ones(13), 2))


def test_chain_marginals_match_oracle():
    for spec in chain_specs(count=20):
        np.testing.assert_allclose(cache_marginals(spec).pi, brute_force_cache_oracle(spec).pi, atol=1e-9)


def test_single_list_marginals_match_oracle():
    for spec in single_list_specs(count=40):
        np.testing.assert_allclose(cache_marginals(spec).pi, brute_force_cache_oracle(spec).pi, atol=1e-9)


# -- properties -------------------------------------------------------------------------
rates_st = st.lists(st.floats(0.01, 100.0), min_size=1, max_size=10)


@settings(max_examples=60, deadline=None)
@given(rates_st, st.integers(1, 10), st.floats(0.001, 1000.0))
def test_identities_and_scale_invariance(rates, m, alpha):
    m = min(m, len(rates))
    spec = ListCacheSpec.single_list(rates, m)
    pi = cache_marginals(spec).pi
    np.testing.assert_allclose(pi.sum(axis=1), 1.0, atol=1e-12)
    assert pi[:, 1].sum() == pytest.approx(m, abs=1e-12 * max(1, m))
    scaled = cache_marginals(ListCacheSpec.single_list(np.asarray(rates) * alpha, m)).pi
    np.testing.assert_allclose(scaled, pi, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 100.0), min_size=2, max_size=10))
def test_more_capacity_never_raises_miss_ratio(rates):
    prev = None
    for m in range(1, len(rates) + 1):
        miss = cache_marginals(ListCacheSpec.single_list(rates, m)).miss_ratio
        if prev is not None:
            assert np.all(miss <= prev + 1e-12)
        prev = miss


@settings(max_examples=40, deadline=None)
@given(rates_st, st.integers(1, 10), st.randoms(use_true_random=False))
def test_permuting_items_permutes_marginals(rates, m, rnd):
    m = min(m, len(rates))
    perm = list(range(len(rates)))
    rnd.shuffle(perm)
    base = cache_marginals(ListCacheSpec.single_list(rates, m)).pi
    shuffled = cache_marginals(ListCacheSpec.single_list(np.asarray(rates)[perm], m)).pi
    np.testing.assert_allclose(shuffled, base[perm], atol=1e-12)

from dataclasses import replace

import numpy as np
import pytest

from conftest import three_level, two_layer
from instances import caching_submodels
from jcsp.experiments import validation_model
from jcsp.model.types import CacheConfig, CacheList, PhaseType, Popularity
from jcsp.solver import (
    CacheLower,
    CacheUpper,
    CachingSubmodelState,
    ConvergenceReport,
    JobClass,
    SolverOptions,
    SolverResult,
    ClosedNetwork,
    decompose_layers,
    exact_mva_solve,
    fpi_lambda_update,
    solve_caching_submodel,
    solve_lqn,
    split_caching_submodel,
    total_response_time,
)


def state(**kw):
    base = dict(lam=1.0, s=2, theta_t=1.0, theta_m=1.0, theta_h=0.0, p_hit=0.5, p_miss=0.5)
    return CachingSubmodelState(**{**base, **kw})


# -- fixed-point update ------------------------------------------------------------
def test_little_law_update():
    assert fpi_lambda_update(state()) == pytest.approx(4 / 3)


@pytest.mark.parametrize("form", ["little-law", "literal-eq3"])
def test_vanishing_delays_fix_lambda_at_population_over_think(form):
    st = state(lam=2.0, theta_m=0.0, theta_h=0.0)
    assert fpi_lambda_update(st, form) == pytest.approx(2.0)


def test_zero_denominator_is_an_error():
    with pytest.raises(ZeroDivisionError):
        fpi_lambda_update(state(theta_t=0.0, theta_m=0.0))


def test_inconsistent_probabilities_are_rejected():
    with pytest.raises(ValueError):
        state(p_hit=0.5, p_miss=0.6)


def single_item_cache(think=1.0, hit_delay=1.0):
    upper = CacheUpper(CacheConfig(1, (CacheList(1, 0),), Popularity.uniform()), np.ones((1, 1)), np.ones(1))
    lower = CacheLower(1, think, np.zeros(1), np.zeros(1), ("ps",), (1,), hit_delay, 0.0)
    return upper, lower


def test_always_cached_item_converges_to_half():
    res = solve_caching_submodel(*single_item_cache())
    assert res.lam == pytest.approx(0.5, abs=1e-9)
    assert res.p_hit == pytest.approx(1.0) and res.p_miss == pytest.approx(0.0, abs=1e-15)


def test_full_cache_reduces_to_hit_class():
    upper = CacheUpper(CacheConfig(3, (CacheList(3, 0),), Popularity.uniform()), np.full((1, 3), 1 / 3), np.ones(1))
    lower = CacheLower(3, 1.0, np.array([0.2]), np.array([0.5]), ("ps",), (1,))
    res = solve_caching_submodel(upper, lower)
    hit_only = exact_mva_solve(ClosedNetwork.single_class(3, 1.0, [0.2]))
    assert res.p_miss == pytest.approx(0.0, abs=1e-12)
    assert res.throughput == pytest.approx(hit_only.throughput[0], rel=1e-9)


def test_random_submodels_converge_consistently():
    for upper, lower in caching_submodels(count=25, seed=21):
        res = solve_caching_submodel(upper, lower, SolverOptions(delta=1e-6))
        assert res.max_inner_iterations <= 100
        assert res.p_hit + res.p_miss == pytest.approx(1.0, abs=1e-12)


def test_iteration_cap_is_reported():
    from jcsp.solver import SolverConvergenceError

    upper, lower = next(caching_submodels(count=1, seed=2))
    with pytest.raises(SolverConvergenceError):
        solve_caching_submodel(upper, lower, SolverOptions(delta=1e-300, max_inner=1, max_outer=1))


# -- layers --------------------------------------------------------------------------
def test_pure_processor_model_has_one_submodel():
    assert len(decompose_layers(two_layer(users=1))) == 1


def test_task_layer_adds_a_submodel():
    subs = decompose_layers(two_layer(users=2))
    assert [s.depth for s in subs] == [1, 2]
    assert subs[1].classes == ("T1",)


def test_three_level_order_is_topological():
    depths = [s.depth for s in decompose_layers(three_level())]
    assert depths == sorted(depths)


def test_cache_submodel_is_flagged_and_split():
    m = validation_model(4, 3)
    sub = [s for s in decompose_layers(m) if s.caching]
    assert len(sub) == 1
    upper, lower = split_caching_submodel(m, sub[0])
    assert upper.config.capacity == 1 and upper.config.items == 3
    assert lower.population == 3
    assert lower.hit_demand.tolist() == [0.2] and lower.miss_demand.tolist() == [0.5]


def test_cache_tokens_beyond_users_are_idle():
    m = validation_model(2, 3)
    _, lower = split_caching_submodel(m, decompose_layers(m)[0])
    assert lower.population == 2


def test_split_without_cache_is_an_error():
    m = two_layer()
    with pytest.raises(ValueError):
        split_caching_submodel(m, decompose_layers(m)[0])


# -- full solve -------------------------------------------------------------------------
def test_flat_model_matches_exact_mva():
    r = solve_lqn(two_layer(users=3, multiplicity=3))
    flat = exact_mva_solve(ClosedNetwork.single_class(3, 1.0, [0.5]))
    assert r.residence("E1") == pytest.approx(flat.residence[0, 0], rel=1e-12)
    assert total_response_time(r) == pytest.approx(0.9, rel=1e-12)


def test_doubling_demand_raises_residence():
    m = three_level()
    acts = tuple(replace(a, host_demand=PhaseType.exponential(0.6)) if a.id == "b" else a for a in m.activities)
    assert solve_lqn(replace(m, activities=acts)).residence("B") > solve_lqn(m).residence("B")


def test_validation_model_hit_probability():
    r = solve_lqn(validation_model(2, 2))
    assert r.p_hit("items") == pytest.approx(1 / 3, abs=1e-9)


def test_hit_override_is_used():
    r = solve_lqn(validation_model(2, 2), p_hit={"items": 1.0})
    assert r.p_hit("items") == pytest.approx(1.0)


def test_solve_is_deterministic():
    a, b = solve_lqn(validation_model(3, 2)), solve_lqn(validation_model(3, 2))
    assert a.entities_csv() == b.entities_csv() and a.cache_csv() == b.cache_csv()


def test_single_server_utilization_bounded():
    r = solve_lqn(three_level(users=20))
    for row in r.entities:
        if row.entity in ("P1", "P2", "back"):
            assert row.utilization <= 1 + 1e-6


def result(X, R):
    classes = {f"c{i}": JobClass(f"c{i}", "users", x, r) for i, (x, r) in enumerate(zip(X, R))}
    return SolverResult("t", classes, [], [], ConvergenceReport(1, []))


def test_weighted_response_time():
    assert total_response_time(result([2.0], [0.3])) == pytest.approx(0.3)
    assert total_response_time(result([2.0, 1.0], [0.3, 0.6])) == pytest.approx(0.4)
    assert total_response_time(result([1.0, 1.0, 1.0], [0.7] * 3)) == pytest.approx(0.7)


def test_zero_throughput_is_an_error():
    with pytest.raises(ZeroDivisionError):
        total_response_time(result([0.0], [1.0]))

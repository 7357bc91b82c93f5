import numpy as np
import pytest

from conftest import two_layer
from jcsp.cache import ListCacheSpec, cache_marginals
from jcsp.experiments import validation_model
from jcsp.model.types import INF, PS, ModelBuilder
from jcsp.sim import (
    Engine,
    EntityMismatchError,
    PsStation,
    SimOptions,
    SimulationError,
    compare_residence,
    simulate,
)
from jcsp.solver import solve_lqn

FAST = SimOptions(seed=3, events=60_000, replications=5)


def open_mm1(gap=2.0, work=1.0):
    b = ModelBuilder("mm1")
    b.processor("P0", INF, is_pseudo=True)
    b.processor("P1", PS, 1)
    b.task("src", "P0", 1, "reference")
    b.task("srv", "P1", 1000)
    b.activity("gap", "src", gap)
    b.entry("go", "src", "gap")
    b.call("gap", "job", kind="asynchronous")
    b.activity("work", "srv", work)
    b.entry("job", "srv", "work")
    return b.build()


def test_open_ps_queue_response():
    r = simulate(open_mm1(), SimOptions(seed=3, events=200_000, replications=10)).row("job")
    assert abs(r.response - 2.0) <= r.response_hw
    assert r.throughput == pytest.approx(0.5, rel=0.02)


def test_closed_delay_and_queue_throughput():
    s = simulate(two_layer(users=1), SimOptions(seed=3, events=100_000, replications=10))
    r = s.row("users")
    assert r.throughput == pytest.approx(2 / 3, rel=0.02)


def test_two_item_cache_occupancy_is_half():
    s = simulate(validation_model(1, 1, items=2), FAST)
    mean, hw = s.occupancy["CT"]
    assert np.all(np.abs(mean - 0.5) <= np.maximum(hw, 0.01))


def test_cache_occupancy_matches_product_form():
    s = simulate(validation_model(2, 1, items=3), FAST)
    pi = cache_marginals(ListCacheSpec.single_list(np.ones(3), 1)).pi[:, 1]
    mean, hw = s.occupancy["CT"]
    np.testing.assert_allclose(mean, pi, atol=0.02)


def test_hit_and_miss_frequencies_sum_to_one():
    c = simulate(validation_model(2, 2), FAST).cache_row("items")
    assert 0 <= c.hit <= 1 and c.hit + c.miss == pytest.approx(1.0)
    assert c.hit == pytest.approx(1 / 3, abs=0.03)


def test_flow_balance_and_utilization():
    s = simulate(validation_model(3, 2), FAST)
    for rep in s.flow:
        for arrivals, departures, inside in rep.values():
            assert arrivals == departures + inside
    assert all(r.utilization <= 1 + 1e-9 for r in s.rows if r.entity == "Pc")
    assert all(r.residence_hw >= 0 for r in s.rows)


def test_same_seed_same_result():
    a, b = simulate(validation_model(2, 2), FAST), simulate(validation_model(2, 2), FAST)
    assert a.to_csv() == b.to_csv() and a.cache_csv() == b.cache_csv()


def test_different_seed_differs():
    a = simulate(validation_model(2, 2), FAST)
    b = simulate(validation_model(2, 2), SimOptions(seed=4, events=60_000, replications=5))
    assert a.to_csv() != b.to_csv()


def test_engine_round_robin_sharing():
    # two equal jobs at one PS server finish together after twice their work
    eng = Engine()
    eng.stations["P"] = PsStation(eng, "P")
    done = []

    def job():
        yield ("ps", "P", 1.0, None)
        done.append(eng.now)

    eng.spawn(job())
    eng.spawn(job())
    eng.run(100)
    assert done == pytest.approx([2.0, 2.0])


def test_engine_rejects_unknown_command():
    eng = Engine()

    def bad():
        yield ("teleport",)

    eng.spawn(bad())
    with pytest.raises(SimulationError):
        eng.run(10)


def test_invalid_options():
    with pytest.raises(ValueError):
        SimOptions(warmup=1.0)
    with pytest.raises(ValueError):
        SimOptions(replications=0)


def test_comparison_within_ten_percent():
    m = validation_model(1, 1)
    table = compare_residence(solve_lqn(m), simulate(m, SimOptions(seed=1, events=100_000, replications=10)),
                              kinds=("entry",))
    assert table.row("items").rel_diff <= 0.10


def test_comparison_entity_mismatch():
    with pytest.raises(EntityMismatchError):
        compare_residence(solve_lqn(validation_model(1, 1)), simulate(two_layer(users=1), FAST))


def test_zero_demand_entity_compares_equal():
    m = two_layer(users=2, demand=0.0)
    r = compare_residence(solve_lqn(m), simulate(m, FAST)).row("E1")
    assert (r.analytical, r.simulated, r.abs_diff, r.rel_diff) == (0.0, 0.0, 0.0, 0.0)

import numpy as np
import pytest

from instances import delay_queue_networks
from jcsp.solver import ClosedNetwork, SolverConvergenceError, amva_solve, exact_mva_solve


def net(n, demands=(0.5,), think=1.0, **kw):
    return ClosedNetwork.single_class(n, think, demands, **kw)


@pytest.mark.parametrize("solve", [exact_mva_solve, amva_solve])
def test_one_customer(solve):
    r = solve(net(1))
    assert r.throughput[0] == pytest.approx(2 / 3, abs=1e-10)
    assert r.residence[0, 0] == pytest.approx(0.5, abs=1e-10)


def test_two_customers_exact():
    r = exact_mva_solve(net(2))
    assert r.throughput[0] == pytest.approx(1.2, abs=1e-12)
    assert r.queue[0, 0] == pytest.approx(0.8, abs=1e-12)


@pytest.mark.parametrize("method", ["linearizer", "bard-schweitzer"])
def test_two_customers_approximate(method):
    assert amva_solve(net(2), method=method).throughput[0] == pytest.approx(1.2, rel=0.05)


@pytest.mark.parametrize("solve", [exact_mva_solve, amva_solve])
def test_zero_demand_queue(solve):
    r = solve(net(3, (0.0,), think=2.0))
    assert r.residence[0, 0] == 0.0
    assert r.throughput[0] == pytest.approx(1.5)


def test_symmetric_queues_have_equal_lengths():
    r = exact_mva_solve(net(5, (0.3, 0.3)))
    assert r.queue[0, 0] == pytest.approx(r.queue[0, 1], abs=1e-12)


def test_littles_law():
    for n in delay_queue_networks(count=20, seed=9):
        for r in (exact_mva_solve(n), amva_solve(n)):
            cycle = r.residence[0].sum() + n.think[0]
            assert r.throughput[0] * cycle == pytest.approx(n.populations[0], rel=1e-7)


def test_delay_station_adds_its_demand():
    r = exact_mva_solve(net(4, (0.5, 0.7), kinds=("ps", "is")))
    assert r.residence[0, 1] == pytest.approx(0.7)


def test_multiserver_is_faster_than_single():
    one = exact_mva_solve(net(6, (1.0,)))
    two = exact_mva_solve(net(6, (1.0,), servers=(2,)))
    assert two.throughput[0] > one.throughput[0]


def test_multiclass_exact_agrees_with_single_class_split():
    # two identical classes behave like one class of the combined population
    two = ClosedNetwork(np.array([2, 2]), np.array([1.0, 1.0]), np.array([[0.4], [0.4]]), ("ps",))
    one = exact_mva_solve(net(4, (0.4,)))
    assert exact_mva_solve(two).throughput.sum() == pytest.approx(one.throughput[0], rel=1e-12)


def test_iteration_cap_raises():
    n = ClosedNetwork(np.array([8, 5]), np.array([0.1, 0.2]), np.array([[0.4, 0.2], [0.1, 0.5]]), ("ps", "ps"))
    with pytest.raises(SolverConvergenceError):
        amva_solve(n, tol=1e-15, max_iter=1)


def test_invalid_networks_are_rejected():
    with pytest.raises(ValueError):
        net(1, (-1.0,))
    with pytest.raises(ValueError):
        net(1, (1.0,), kinds=("lifo",))

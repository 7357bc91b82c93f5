import json

import numpy as np
import pytest

from instances import write_trace
from jcsp.model import validate_model
from jcsp.model.edge import build_edge_model
from jcsp.experiments import even_allocation, random_placement
from jcsp.model import apply_cache_allocation
from jcsp.model.types import Popularity
from jcsp.workload import (
    WorkloadError,
    cdf_report,
    cdf_table,
    ingest_trace,
    load_workload,
    read_trace,
    save_workload,
    synth_catalog,
    synth_workload,
)


# -- popularity and synthesis ----------------------------------------------------------
def test_zipf_zero_is_uniform():
    np.testing.assert_allclose(Popularity.zipf(0.0).probabilities(4), 0.25)


def test_zipf_one_over_two_items():
    np.testing.assert_allclose(Popularity.zipf(1.0).probabilities(2), [2 / 3, 1 / 3], atol=1e-15)


@pytest.mark.parametrize("eta", [0.3, 1.0, 2.5])
def test_zipf_is_normalized_and_nonincreasing(eta):
    p = Popularity.zipf(eta).probabilities(50)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(p) <= 0)


def test_grid_point_is_reproducible():
    a = synth_workload(4, 25, 20, q=750, p=1, eta=1.0, seed=9)
    b = synth_workload(4, 25, 20, q=750, p=1, eta=1.0, seed=9)
    assert save_workload(a) == save_workload(b)
    assert save_workload(a) != save_workload(synth_workload(4, 25, 20, seed=10))


def test_request_probabilities_sum_to_one():
    w = synth_workload(2, 5, 13, seed=1)
    assert sum(w.groups[0].probabilities) == pytest.approx(1.0, abs=1e-12)


def test_item_count_follows_slot_size():
    w = synth_workload(2, 5, 3, q=500.0, p=1.0, seed=0, slots_per_node=50)
    for it in w.items:
        assert it.count == round(it.total_size_gb * 1024.0 / 10.0)
        assert 0.5 * 1024 / 10 - 1 <= it.count <= 1.5 * 1024 / 10 + 1


@pytest.mark.parametrize("kw", [dict(q=0.0), dict(eta=-1.0), dict(M=0)])
def test_invalid_parameters(kw):
    args = dict(M=2, N=3, C=2) | kw
    with pytest.raises(WorkloadError):
        synth_workload(**args)


def test_generated_workloads_build_valid_models():
    for seed in range(4):
        w = synth_workload(3, 6, 5, seed=seed, slots_per_node=8)
        cat = synth_catalog(w, seed=seed)
        x = random_placement(cat, np.random.default_rng(seed))
        assert validate_model(apply_cache_allocation(build_edge_model(cat, x, w), even_allocation(cat, x, w), w)) == []


def test_workload_document_round_trip():
    w = synth_workload(2, 4, 3, seed=3)
    assert load_workload(save_workload(w)) == w
    assert json.loads(save_workload(w))["schema"] == "jcsp-workload/1"


# -- trace ingestion ---------------------------------------------------------------------------
def test_daily_invocations_give_rate(tmp_path):
    w = ingest_trace(*write_trace(tmp_path), horizon_days=1.0)
    s = w.services[0]
    assert s.rate == pytest.approx(1 / 60)
    assert s.service_time.mean == pytest.approx(0.5)
    assert s.memory_mb == 150.0


def test_duration_ordering_is_checked_per_row(tmp_path):
    files = write_trace(tmp_path, functions=(("a1", "f1", (5,), (10.0, 500.0, 900.0)),
                                             ("a1", "f2", (5,), (800.0, 500.0, 400.0))))
    with pytest.raises(WorkloadError, match="row 3"):
        read_trace(*files)


def test_missing_memory_application(tmp_path):
    files = write_trace(tmp_path, functions=(("a2", "f1", (3,), (1.0, 2.0, 3.0)),))
    with pytest.raises(WorkloadError, match="a2"):
        read_trace(*files)


def test_non_numeric_cell_names_its_row(tmp_path):
    inv, dur, mem = write_trace(tmp_path)
    dur.write_text(dur.read_text().replace("500.0", "fast"))
    with pytest.raises(WorkloadError, match="row 2"):
        read_trace(inv, dur, mem)


def test_sampling_is_deterministic(tmp_path):
    fns = tuple(("a1", f"f{i}", (i + 1, 2), (1.0, 2.0, 3.0)) for i in range(10))
    files = write_trace(tmp_path, functions=fns)
    a = ingest_trace(*files, sample=4, seed=2)
    b = ingest_trace(*files, sample=4, seed=2)
    assert a == b and len(a.services) == 4


def test_column_mapping(tmp_path):
    inv, dur, mem = write_trace(tmp_path)
    dur.write_text(dur.read_text().replace("Average", "Mean"))
    mapping = tmp_path / "map.json"
    mapping.write_text(json.dumps({"duration-avg": "Mean"}))
    assert ingest_trace(inv, dur, mem, mapping).services[0].service_time.mean == pytest.approx(0.5)


# -- CDF summaries ------------------------------------------------------------------------------
def test_single_value_is_one_step():
    t = cdf_table("x", [2.5])
    assert set(t.values) == {2.5} and set(t.cdf) == {1.0}


def test_median_of_two_means():
    assert cdf_table("x", [1.0, 3.0]).value_at(50.0) == pytest.approx(2.0)


def test_synthetic_cdfs_are_monotone():
    for t in cdf_report(synth_workload(4, 25, 20, seed=0)).values():
        assert np.all(np.diff(t.values) >= 0) and np.all(np.diff(t.cdf) >= 0)
        assert 0.0 <= min(t.cdf) and max(t.cdf) <= 1.0


def test_synthetic_execution_times_are_trace_shaped():
    t = cdf_report(synth_workload(4, 25, 200, seed=0))["execution-time"]
    assert t.value_at(50.0) <= 0.7 and t.value_at(100.0) <= 3.0

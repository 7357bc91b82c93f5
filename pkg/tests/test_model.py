import json

import numpy as np
import pytest

from conftest import three_level, two_layer
from jcsp.experiments import validation_model
from jcsp.model import (
    AllocationError,
    CacheAllocation,
    EmptyFeasibleSetError,
    InfeasibleDecisionError,
    ModelBuilder,
    ModelError,
    PhaseType,
    PlacementDecision,
    PrecedenceEdge,
    ServiceCatalog,
    Workflow,
    apply_cache_allocation,
    build_edge_model,
    catalog_from_dict,
    catalog_to_dict,
    decision_from_dict,
    decision_to_dict,
    feasible_nodes,
    load_model,
    model_to_dict,
    save_model,
    validate_model,
)
from jcsp.model.types import INF, PS
from jcsp.solver import decompose_layers
from jcsp.workload import ItemCatalog, ServiceSpec, UserGroup, WorkloadSpec
from jcsp.model.types import Popularity


def codes(model):
    return [d.code for d in validate_model(model)]


# -- documents -----------------------------------------------------------------
def test_minimal_document_has_one_layer():
    m = load_model(save_model(two_layer(users=1)))
    assert len(decompose_layers(m)) == 1


def test_validation_document_keeps_cache_fields():
    m = load_model(save_model(validation_model(1, 1)))
    cfg = m.task["CT"].cache_spec
    assert cfg.capacity == 1 and cfg.items == 3


def test_or_branch_summing_below_one_is_rejected():
    b = ModelBuilder("bad")
    b.processor("Pu", INF, is_pseudo=True)
    b.processor("P1", PS)
    b.task("users", "Pu", 1, "reference")
    b.task("T", "P1")
    b.activity("think", "users", 1.0)
    b.entry("go", "users", "think")
    b.call("think", "E")
    b.activity("a", "E", 0.1)
    b.activity("b", "E", 0.1)
    b.activity("c", "E", 0.1)
    b.entry("E", "T", "a")
    b.or_branch("a", ("b", "c"), (0.5, 0.4))
    with pytest.raises(ModelError) as exc:
        load_model(json.dumps(model_to_dict(b.build())))
    assert any(d.code == "or-branch-probabilities" for d in exc.value.diagnostics)


def test_round_trip_is_identity():
    for m in (two_layer(), three_level(), validation_model(3, 2)):
        assert load_model(save_model(m)) == m


def test_round_trip_keeps_branch_probabilities_exactly():
    b = ModelBuilder("p")
    b.processor("Pu", INF, is_pseudo=True)
    b.processor("P1", PS)
    b.task("users", "Pu", 1, "reference")
    b.task("T", "P1")
    b.activity("think", "users", 1.0)
    b.entry("go", "users", "think")
    b.call("think", "E")
    for a in "abc":
        b.activity(a, "E", 0.1)
    b.entry("E", "T", "a")
    p = 1 / 3
    b.or_branch("a", ("b", "c"), (p, 1 - p))
    m = load_model(save_model(b.build()))
    assert m.precedences[0].branch_probabilities == (p, 1 - p)


def test_parse_error_reports_location():
    with pytest.raises(ModelError, match="line 1"):
        load_model("{not json")


def test_missing_field_reports_path():
    doc = model_to_dict(two_layer())
    del doc["tasks"][0]["host-processor"]
    with pytest.raises(ModelError, match="host-processor"):
        load_model(json.dumps(doc))


# -- validation ------------------------------------------------------------------
def test_valid_models_have_no_diagnostics():
    assert validate_model(three_level()) == []
    assert validate_model(validation_model(2, 3)) == []


def test_layering_cycle_is_reported():
    b = ModelBuilder("cyc")
    b.processor("Pu", INF, is_pseudo=True)
    b.processor("P1", PS)
    b.task("users", "Pu", 1, "reference")
    b.task("A", "P1")
    b.task("B", "P1")
    b.activity("think", "users", 1.0)
    b.entry("go", "users", "think")
    b.call("think", "EA")
    b.activity("a", "EA", 0.1)
    b.entry("EA", "A", "a")
    b.call("a", "EB")
    b.activity("b", "EB", 0.1)
    b.entry("EB", "B", "b")
    b.call("b", "EA")
    assert "layering-cycle" in codes(b.build())


def test_cache_access_with_three_successors_names_the_edge():
    m = validation_model(1, 1)
    bad = PrecedenceEdge(("access",), ("hit", "miss", "hit"), "cache-access")
    m2 = type(m)(m.name, m.processors, m.tasks, m.entries, m.activities, (bad,), m.calls)
    diags = validate_model(m2)
    assert [d.code for d in diags] == ["cache-access-arity"]
    assert diags[0].path.startswith("precedences[0]")


def test_each_violation_yields_one_diagnostic():
    m = validation_model(1, 1)
    t = m.tasks[0]
    broken = type(t)(t.id, "nowhere", 0, t.kind, t.cache_spec)
    m2 = type(m)(m.name, m.processors, (broken,) + m.tasks[1:], m.entries, m.activities, m.precedences, m.calls)
    assert sorted(codes(m2)) == ["dangling-reference", "multiplicity"]


def test_phase_type_kinds():
    assert PhaseType.exponential(2.0).scv == 1.0
    h = PhaseType.hyperexp(1.0, 4.0)
    assert h.kind == "hyper-exponential" and h.scv == 4.0
    assert PhaseType("erlang", 1.0, 2.0).consistency_errors()
    assert PhaseType.erlang(1.0, 4).phases == 4


# -- edge systems ------------------------------------------------------------------
def catalog(placement, times=None, flows=None, job_service=None):
    p = tuple(tuple(r) for r in placement)
    K = len(p[0])
    t = times or tuple(tuple(0.1 for _ in range(K)) for _ in p)
    return ServiceCatalog(p, t, job_service or tuple(range(K)), flows or (Workflow(tuple(range(K))),))


def workload(C, users=2, items=(), caps=()):
    services = tuple(ServiceSpec(f"s{c}", 1.0, PhaseType.exponential(0.1)) for c in range(C))
    probs = tuple([1.0 / C] * C)
    return WorkloadSpec(services, (UserGroup(users, probs),), items, caps, 1.0)


def test_feasible_nodes_reads_the_placement_matrix():
    assert feasible_nodes(catalog([[1], [0]]), 0) == {0}
    assert feasible_nodes(catalog([[1, 1, 1]] * 5), 2) == {0, 1, 2, 3, 4}


def test_empty_feasible_set_is_an_error():
    with pytest.raises(EmptyFeasibleSetError):
        catalog([[0], [0]])


def test_single_node_single_job_gives_two_layers():
    m = build_edge_model(catalog([[1]]), PlacementDecision((0,), 1), workload(1))
    assert validate_model(m) == []
    assert len(decompose_layers(m)) == 2


def test_jobs_on_different_nodes_call_across_nodes():
    cat = catalog([[1, 1], [1, 1]])
    m = build_edge_model(cat, PlacementDecision((0, 1), 2), workload(2))
    owner = {e.id: e.owner_task for e in m.entries}
    hosts = {m.task[owner[c.to_entry]].host_processor for c in m.calls}
    assert hosts == {"node0", "node1"}
    assert validate_model(m) == []


def test_chain_of_three_jobs_visits_one_node_task_each():
    cat = catalog([[1, 1, 1]])
    m = build_edge_model(cat, PlacementDecision((0, 0, 0), 1), workload(3))
    assert validate_model(m) == []
    ref = m.reference_tasks[0]
    called = [c.to_entry for c in m.calls if m.activity[c.from_activity].owner in
              {e.id for e in m.entries if e.owner_task == ref.id} | {ref.id}]
    assert len(called) == 3


def test_infeasible_decision_is_rejected():
    cat = catalog([[1], [0]])
    with pytest.raises(InfeasibleDecisionError):
        build_edge_model(cat, PlacementDecision((1,), 2), workload(1))


def item_workload():
    items = (ItemCatalog("s0", 4, 0.06, Popularity.zipf(1.0)), ItemCatalog("s1", 4, 0.06, Popularity.zipf(1.0)))
    return workload(2, items=items, caps=(30.0,))


def test_zero_allocation_keeps_pure_miss_path():
    w = item_workload()
    cat = catalog([[1, 1]])
    m = build_edge_model(cat, PlacementDecision((0, 0), 1), w)
    out = apply_cache_allocation(m, CacheAllocation(((2, 0),), (2,)), w)
    assert [t.id for t in out.cache_tasks] == ["C0_s0"]


def test_even_split_creates_two_caches_of_capacity_one():
    w = item_workload()
    cat = catalog([[1, 1]])
    m = build_edge_model(cat, PlacementDecision((0, 0), 1), w)
    out = apply_cache_allocation(m, CacheAllocation(((1, 1),), (2,)), w)
    assert sorted(t.cache_spec.capacity for t in out.cache_tasks) == [1, 1]
    assert validate_model(out) == []


def test_allocation_must_use_exact_capacity():
    with pytest.raises(AllocationError):
        CacheAllocation(((2, 1),), (2,))


def test_decision_vector_matches_assignment():
    x = PlacementDecision((1, 0), 2)
    assert x.vector.tolist() == [0, 1, 1, 0]
    assert PlacementDecision.from_matrix(x.matrix) == x


def test_catalog_and_decision_documents_round_trip():
    cat = catalog([[1, 0], [1, 1]], flows=(Workflow((0, 1), 0.7), Workflow((1,), 0.3)))
    assert catalog_from_dict(json.loads(json.dumps(catalog_to_dict(cat)))) == cat
    x, a = PlacementDecision((0, 1), 2), CacheAllocation(((1, 1), (0, 2)), (2, 2))
    assert decision_from_dict(json.loads(json.dumps(decision_to_dict(x, a)))) == (x, a)

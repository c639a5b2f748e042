"""Backward selection and network assembly."""

import numpy as np
import pytest

from netinf.netsim import (
    NO_NOISE,
    StateSpaceModel,
    derive_dsf_structure,
    simulate,
)
from netinf.problem import ModelStructure
from netinf.topology import (
    SelectionEntry,
    _argmax_sparse,
    backward_select,
    exhaustive_select,
    infer_network,
    trace_to_dict,
)
from netinf.vi import ViConfig

CFG = ViConfig(seed=17, max_iter=30)


def _two_node_model(coupling=0.6):
    a = np.array([[0.3, 0.0], [coupling, 0.2]])
    b_u = np.eye(2)
    return StateSpaceModel(a=a, b_u=b_u, b_e=np.zeros((2, 2)), p=2)


def test_removal_order_is_ascending_confidence():
    entries = [
        SelectionEntry(ModelStructure(0, (("y", 1),)), lower_bound=-5.0,
                       removed_groups=()),
        SelectionEntry(ModelStructure(0, ()), lower_bound=-1.0,
                       removed_groups=(("y", 1),)),
    ]
    assert _argmax_sparse(entries) == 1


def test_argmax_tie_prefers_sparser():
    entries = [
        SelectionEntry(ModelStructure(0, (("y", 1), ("y", 2))), -1.0, ()),
        SelectionEntry(ModelStructure(0, (("y", 1),)), -1.0, (("y", 2),)),
        SelectionEntry(ModelStructure(0, ()), -3.0, (("y", 1), ("y", 2))),
    ]
    assert _argmax_sparse(entries) == 1


def test_backward_select_nested_and_contains_full():
    model = _two_node_model()
    exp = simulate(model, 60, NO_NOISE, seed=1)
    trace = backward_select([exp], target=1, config=CFG, trunc=8)
    actives = [set(e.structure.active_groups) for e in trace.entries]
    assert actives[0] == {("y", 0), ("u", 0), ("u", 1)}
    for prev, cur in zip(actives, actives[1:]):
        assert cur < prev
    assert actives[-1] == set()
    for e in trace.entries[1:]:
        assert len(e.removed_groups) >= 1


def test_backward_select_removal_thresholds():
    """Groups are removed cumulatively in ascending confidence order."""
    model = _two_node_model()
    exp = simulate(model, 60, NO_NOISE, seed=2)
    trace = backward_select([exp], target=1, config=CFG, trunc=8)
    conf = trace.entries[0].confidences
    order = sorted(conf, key=lambda g: conf[g])
    for k, entry in enumerate(trace.entries[1:], start=1):
        assert set(entry.removed_groups) == set(order[:k])


def test_two_node_network_noiseless():
    model = _two_node_model()
    exp = simulate(model, 80, NO_NOISE, seed=3)
    net = infer_network([exp], CFG, trunc=8)
    np.testing.assert_array_equal(net.q_adj, [[False, False], [True, False]])
    truth = derive_dsf_structure(model)
    np.testing.assert_array_equal(net.q_adj, truth.q_adj)
    np.testing.assert_array_equal(net.p_adj, truth.p_adj)
    assert ("y", 1, 0) in net.w_hat


def test_independent_nodes_give_empty_topology():
    a = np.diag([0.4, -0.3])
    model = StateSpaceModel(a=a, b_u=np.eye(2), b_e=np.zeros((2, 2)), p=2)
    exp = simulate(model, 80, NO_NOISE, seed=4)
    net = infer_network([exp], CFG, trunc=8)
    assert net.q_adj.sum() == 0
    np.testing.assert_array_equal(net.p_adj, np.eye(2, dtype=bool))


def test_all_zero_data_selects_empty():
    model = StateSpaceModel(a=np.zeros((2, 2)), b_u=np.zeros((2, 1)),
                            b_e=np.zeros((2, 2)), p=2)
    exp = simulate(model, 50, NO_NOISE, seed=5)
    trace = backward_select([exp], target=0, config=CFG, trunc=6)
    assert trace.chosen_structure.n_active == 0


def test_backward_matches_exhaustive_on_small_fixture():
    model = _two_node_model()
    exp = simulate(model, 80, NO_NOISE, seed=6)
    bwd = backward_select([exp], target=1, config=CFG, trunc=8)
    exh = exhaustive_select([exp], target=1, config=CFG, trunc=8)
    assert set(bwd.chosen_structure.active_groups) == \
        set(exh.chosen_structure.active_groups)


def test_infer_network_determinism():
    model = _two_node_model()
    exp = simulate(model, 60, NO_NOISE, seed=7)
    n1 = infer_network([exp], CFG, trunc=8)
    n2 = infer_network([exp], CFG, trunc=8)
    np.testing.assert_array_equal(n1.q_adj, n2.q_adj)
    for key in n1.w_hat:
        np.testing.assert_array_equal(n1.w_hat[key], n2.w_hat[key])
    t1 = [e.lower_bound for e in n1.traces[0].entries]
    t2 = [e.lower_bound for e in n2.traces[0].entries]
    assert t1 == t2


def test_trace_serialization():
    model = _two_node_model()
    exp = simulate(model, 60, NO_NOISE, seed=8)
    trace = backward_select([exp], target=0, config=CFG, trunc=8)
    payload = trace_to_dict(trace)
    assert payload["target"] == 0
    assert len(payload["entries"]) == len(trace.entries)
    import json
    json.dumps(payload)

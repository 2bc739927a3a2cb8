import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stripslearn.encoding import (
    STAR, build_fluent_index, changes_vector, deschematize, encode_trace, format_trits,
    schematize, trits,
)
from stripslearn.pddl import Literal, parse_domain
from stripslearn.simulator import (
    GroundAction, ObservationModel, WorldState, atom_universe, full_observation,
    generate_trace,
)

from conftest import BW_ORDER
from worked_examples import S0, S1, S2, obs


@pytest.fixture(scope="module")
def stack_index(bw):
    return build_fluent_index(bw, "stack", BW_ORDER)


def test_stack_index_layout(stack_index):
    assert stack_index.to_lines() == [
        "(armempty)", "(clear arg1)", "(ontable arg1)", "(holding arg1)", "(on arg1 arg2)",
        "(clear arg2)", "(ontable arg2)", "(holding arg2)", "(on arg2 arg1)"]


def test_default_order_is_alphabetical_within_groups(bw):
    idx = build_fluent_index(bw, "stack")
    assert idx.to_lines()[:5] == ["(armempty)", "(clear arg1)", "(holding arg1)",
                                  "(on arg1 arg2)", "(ontable arg1)"]
    assert len(idx) == 9


def test_stack_vectors(stack_index):
    a = GroundAction("stack", ("b1", "b2"))
    prior = schematize(S1, a, stack_index)
    succ = schematize(S2, a, stack_index)
    assert np.array_equal(prior, trits("<*, -1, *, 1, -1, *, -1, *, -1>"))
    assert np.array_equal(succ, trits("<1, 1, *, -1, *, 1, 1, *, *>"))
    # changed bits: clear arg1, holding arg1, ontable arg2; everything else unknown
    assert np.array_equal(changes_vector(prior, succ), trits("<*, 1, *, 1, *, *, 1, *, *>"))


def test_pickup_vectors(bw):
    idx = build_fluent_index(bw, "pickup", BW_ORDER)
    assert len(idx) == 4
    a = GroundAction("pickup", ("b1",))
    assert np.array_equal(schematize(S0, a, idx), trits("<1, 1, *, 1>"))
    assert np.array_equal(schematize(S1, a, idx), trits("<*, -1, *, 1>"))


def test_empty_observation_all_star(stack_index):
    v = schematize(obs(), GroundAction("stack", ("b1", "b2")), stack_index)
    assert (v == STAR).all()


def test_schematize_arity(stack_index):
    with pytest.raises(ValueError):
        schematize(S1, GroundAction("stack", ("b1",)), stack_index)


def test_deschematize_example(stack_index):
    got = deschematize(trits("<*, -1, -1, 1, -1, 1, *, *, *>"), stack_index)
    assert got == {Literal("clear", ("arg1",), False), Literal("ontable", ("arg1",), False),
                   Literal("holding", ("arg1",)), Literal("on", ("arg1", "arg2"), False),
                   Literal("clear", ("arg2",))}
    assert deschematize(np.zeros(9, np.int8), stack_index) == frozenset()


def test_nullary_index():
    d = parse_domain("(define (domain z) (:requirements :strips) (:predicates (p) (q))"
                     " (:action a :parameters () :precondition (and (p)) :effect (and (q))))")
    idx = build_fluent_index(d, "a")
    assert idx.to_lines() == ["(p)", "(q)"]


def test_typed_index_matches_enumeration(zeno):
    fly = zeno.actions["fly"]
    idx = build_fluent_index(zeno, fly)
    types = fly.param_types
    expected = set()
    for pred in zeno.predicates.values():
        for i in range(len(types)):
            for j in range(len(types)):
                if pred.arity == 2 and i != j and zeno.compatible(types[i], pred.param_types[0]) \
                        and zeno.compatible(types[j], pred.param_types[1]):
                    expected.add((pred.name, (i, j)))
    assert set(idx.fluents) == expected
    assert ("at", (3, 4)) not in idx.fluents  # flevel/flevel is not type-legal


def test_changes_small_cases():
    v = trits("<1, -1, 1>")
    assert (changes_vector(v, v) == -1).all()
    assert (changes_vector(np.zeros(3, np.int8), v) == STAR).all()
    with pytest.raises(ValueError):
        changes_vector(v, v[:2])


tritvec = st.lists(st.sampled_from([-1, 0, 1]), min_size=1, max_size=12)


@given(st.data())
def test_changes_symmetric_and_star_absorbing(data):
    a = np.array(data.draw(tritvec), np.int8)
    b = np.array(data.draw(st.lists(st.sampled_from([-1, 0, 1]), min_size=len(a), max_size=len(a))), np.int8)
    d = changes_vector(a, b)
    assert np.array_equal(d, changes_vector(b, a))
    assert ((d == STAR) == ((a == STAR) | (b == STAR))).all()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_round_trip_on_full_states(bw, bw_train, seed):
    rng = np.random.default_rng(seed)
    idx = build_fluent_index(bw, "stack")
    atoms = atom_universe(bw, bw_train)
    state = WorldState(frozenset(a for a in atoms if rng.random() < 0.3))
    blocks = sorted(bw_train.objects)
    x, y = rng.choice(blocks, 2, replace=False)
    act = GroundAction("stack", (str(x), str(y)))
    v = schematize(full_observation(state, atoms), act, idx)
    assert (v != STAR).all()
    lits = deschematize(v, idx, [x, y])
    assert {l.atom for l in lits if l.positive} == {a for a in idx.ground(act.args) if a in state}


def test_trits_format_round_trip():
    v = trits("⟨*, −1, 1⟩")
    assert format_trits(v) == "<*, -1, 1>"


def test_encode_trace_skips_repeated_and_rejects_unknown(bw, bw_train):
    tr = generate_trace(bw, bw_train, 200, obs=ObservationModel(0.5, 0.0), seed=0)
    data = encode_trace(tr, bw)
    assert sum(len(d) for d in data.values()) == 200
    for d in data.values():
        assert d.priors.shape == d.diffs.shape
    tr.steps[0].action = GroundAction("stack", ("b1", "b1"))
    assert sum(len(d) for d in encode_trace(tr, bw).values()) == 199
    tr.steps[0].action = GroundAction("teleport", ("b1",))
    with pytest.raises(ValueError):
        encode_trace(tr, bw)

import numpy as np
import pytest

from stripslearn.simulator import (
    GroundAction, ObservationModel, ObservedState, WorldState, applicable, apply, atom_universe,
    full_observation, generate_trace, ground_actions, observe, read_trace, write_trace,
)


@pytest.fixture
def two_blocks():
    return WorldState(frozenset({("armempty",), ("ontable", "b1"), ("ontable", "b2"),
                                 ("clear", "b1"), ("clear", "b2")}))


def test_pickup_then_stack(bw, two_blocks):
    s1 = apply(two_blocks, GroundAction("pickup", ("b1",)), bw)
    assert ("holding", "b1") in s1 and ("armempty",) not in s1
    stack = GroundAction("stack", ("b1", "b2"))
    assert applicable(s1, stack, bw)
    s2 = apply(s1, stack, bw)
    assert {("armempty",), ("clear", "b1"), ("on", "b1", "b2")} <= s2.true_atoms
    assert ("clear", "b2") not in s2 and ("holding", "b1") not in s2


def test_failed_action_is_noop(bw, two_blocks):
    stack = GroundAction("stack", ("b1", "b2"))
    assert not applicable(two_blocks, stack, bw)
    assert apply(two_blocks, stack, bw) == two_blocks


def test_second_pickup_is_noop(bw, two_blocks):
    pick = GroundAction("pickup", ("b1",))
    s1 = apply(two_blocks, pick, bw)
    assert apply(s1, pick, bw) == s1


def test_unknown_action(bw, two_blocks):
    with pytest.raises(ValueError):
        applicable(two_blocks, GroundAction("fly", ("b1",)), bw)


def test_arity_mismatch(bw, two_blocks):
    with pytest.raises(ValueError):
        applicable(two_blocks, GroundAction("pickup", ("b1", "b2")), bw)


def test_type_mismatch(zeno, zeno_train):
    state = WorldState(frozenset())
    person = next(o for o, t in zeno_train.objects.items() if t == "person")
    city = next(o for o, t in zeno_train.objects.items() if t == "city")
    with pytest.raises(ValueError):
        applicable(state, GroundAction("board", (city, person, city)), zeno, zeno_train)


def test_typed_universe_excludes_illegal(zeno, zeno_train):
    atoms = atom_universe(zeno, zeno_train)
    kinds = zeno_train.objects
    for a in atoms:
        if a[0] == "at":
            assert kinds[a[1]] in ("person", "aircraft") and kinds[a[2]] == "city"
    assert not any(a[0] == "at" and kinds[a[1]] == "flevel" for a in atoms)


def test_ground_actions_distinct(bw, bw_train):
    for g in ground_actions(bw, bw_train):
        assert len(set(g.args)) == len(g.args)


def test_observe_identity(two_blocks):
    atoms = sorted(two_blocks.true_atoms | {("holding", "b1")})
    o = observe(two_blocks, atoms, ObservationModel(1.0, 0.0), np.random.default_rng(0))
    assert o == full_observation(two_blocks, atoms)


def test_observe_nothing(two_blocks):
    atoms = sorted(two_blocks.true_atoms)
    o = observe(two_blocks, atoms, ObservationModel(0.0, 0.0), np.random.default_rng(0))
    assert len(o) == 0


def test_corruption_rates(two_blocks):
    atoms = [("ontable", f"b{i}") for i in range(200_000)]
    state = WorldState(frozenset(atoms[::2]))
    model = ObservationModel(0.25, 0.05)
    o = observe(state, atoms, model, np.random.default_rng(1))
    assert abs(len(o) / len(atoms) - 0.25) < 0.01
    flips = sum(1 for a in o.pos if a not in state) + sum(1 for a in o.neg if a in state)
    assert abs(flips / len(o) - 0.05) < 0.005


def test_observed_state_rejects_clash():
    with pytest.raises(ValueError):
        ObservedState(frozenset({("p",)}), frozenset({("p",)}))


def test_observation_model_validation():
    with pytest.raises(ValueError):
        ObservationModel(1.5, 0.0)
    with pytest.raises(ValueError):
        ObservationModel(1.0, -0.1)


def test_trace_success_mix_and_failure_invariant(bw, bw_train):
    tr = generate_trace(bw, bw_train, 2000, 0.5, obs=ObservationModel(1.0, 0.0), seed=3)
    assert len(tr) == 2000
    frac = np.mean([s.succeeded for s in tr])
    assert abs(frac - 0.5) < 0.05
    for s in tr:
        if not s.succeeded:
            assert s.prior_obs == s.succ_obs


def test_trace_all_success(bw, bw_train):
    tr = generate_trace(bw, bw_train, 300, 1.0, seed=0)
    assert all(s.succeeded for s in tr)


def test_episodes(bw, bw_train):
    tr = generate_trace(bw, bw_train, 1200, episode_len=400, seed=0)
    assert tr.episode_starts == [0, 400, 800]
    atoms = atom_universe(bw, bw_train)
    init = full_observation(WorldState(bw_train.init), atoms)
    for start in tr.episode_starts:
        assert tr.steps[start].prior_obs == init


def test_trace_determinism(bw, bw_train):
    obs = ObservationModel(0.5, 0.05)
    a = generate_trace(bw, bw_train, 300, obs=obs, seed=11)
    b = generate_trace(bw, bw_train, 300, obs=obs, seed=11)
    assert a.steps == b.steps


def test_trace_file_round_trip(tmp_path, bw, bw_train):
    tr = generate_trace(bw, bw_train, 50, obs=ObservationModel(0.5, 0.05), seed=2)
    path = tmp_path / "t.jsonl"
    write_trace(tr, path)
    back = read_trace(path, with_truth=True)
    assert back.config == tr.config
    assert [(s.prior_obs, s.action, s.succ_obs, s.succeeded) for s in back] == \
           [(s.prior_obs, s.action, s.succ_obs, s.succeeded) for s in tr]
    hidden = read_trace(path)
    assert not any(s.succeeded for s in hidden)
    assert "succeeded" not in path.read_text()


def test_empty_trace_file(tmp_path, bw, bw_train):
    path = tmp_path / "e.jsonl"
    write_trace(generate_trace(bw, bw_train, 0, seed=0), path)
    assert len(path.read_text().splitlines()) == 1
    assert len(read_trace(path)) == 0

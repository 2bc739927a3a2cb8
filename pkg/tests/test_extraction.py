import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stripslearn.encoding import STAR, build_fluent_index, encode_trace, trits
from stripslearn.extraction import (
    PerEffectRule, covers, covers_neg, extract_from_seed, extract_rules, format_rules,
    least_discriminative_bit,
)
from stripslearn.perceptron import KernelSpec, train
from stripslearn.simulator import ObservationModel, generate_trace

from worked_examples import LATTICE_NEG, LATTICE_SEED, lattice_weigh

def test_covers_examples():
    assert covers(trits("<1, *>"), trits("<1, -1>"))
    assert not covers(trits("<1, *>"), trits("<-1, *>"))
    assert covers(trits("<1, -1>"), trits("<*, *>"))
    with pytest.raises(ValueError):
        covers(trits("<1>"), trits("<1, 1>"))


def test_covers_neg_examples():
    priors = np.array([trits("<1, 1>"), trits("<-1, -1>")])
    labels = np.array([1, -1])
    assert covers_neg(trits("<-1, -1>"), priors, labels)
    assert not covers_neg(trits("<1, 1>"), priors, labels)


def test_lattice_stub_path():
    assert lattice_weigh(LATTICE_SEED)[0] == 100
    assert least_discriminative_bit(lattice_weigh, LATTICE_SEED) == 2
    assert least_discriminative_bit(lattice_weigh, trits("<1, -1, *, 1>")) == 1
    labels = -np.ones(len(LATTICE_NEG), dtype=int)
    rule, flagged = extract_from_seed(LATTICE_SEED, lattice_weigh, LATTICE_NEG, labels)
    assert np.array_equal(rule, trits("<1, *, *, 1>")) and not flagged
    assert not covers_neg(rule, LATTICE_NEG, labels)
    for bit in (0, 3):
        child = rule.copy()
        child[bit] = STAR
        assert covers_neg(child, LATTICE_NEG, labels)


def test_lattice_stub_strict_mode_agrees():
    labels = -np.ones(len(LATTICE_NEG), dtype=int)
    rule, _ = extract_from_seed(LATTICE_SEED, lattice_weigh, LATTICE_NEG, labels, strict=True)
    assert np.array_equal(rule, trits("<1, *, *, 1>"))


def test_single_observed_bit():
    assert least_discriminative_bit(lattice_weigh, trits("<*, *, 1, *>")) == 2
    with pytest.raises(ValueError):
        least_discriminative_bit(lattice_weigh, trits("<*, *, *, *>"))


def test_ties_break_low():
    assert least_discriminative_bit(lambda Q: np.zeros(len(Q)), trits("<*, 1, -1>")) == 1


def test_noise_bit_removed_first():
    # target x0 and x1; bit 2 is independent noise
    X = np.array(list(itertools.product((1, -1), repeat=3)), np.int8)
    y = np.where((X[:, 0] == 1) & (X[:, 1] == 1), 1, -1)
    m = train(np.tile(X, (3, 1)), np.tile(y, 3), KernelSpec("kdnf", 3), epochs=3)
    seed = trits("<1, 1, 1>")
    drops = {}
    for b in range(3):
        alt = seed.copy()
        alt[b] = -alt[b]
        drops[b] = m.weight(seed) - m.weight(alt)
    assert min(drops, key=lambda b: (drops[b], b)) == 2
    assert least_discriminative_bit(m, seed) == 2


def test_seed_covering_negative_is_flagged():
    seed = trits("<1, 1>")
    priors = np.array([seed])
    rule, flagged = extract_from_seed(seed, lattice_weigh_2, priors, np.array([-1]))
    assert flagged and np.array_equal(rule, seed)


def lattice_weigh_2(Q):
    return np.atleast_2d(Q).astype(np.int64) @ np.array([3, 1])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_extracted_rules_are_sound(seed):
    rng = np.random.default_rng(seed)
    n = 5
    X = rng.choice([-1, 0, 1], size=(80, n), p=[0.4, 0.2, 0.4]).astype(np.int8)
    target = (X[:, 0] == 1) & (X[:, 2] == -1)
    y = np.where(target, 1, -1)
    flip = rng.random(len(y)) < 0.05
    y[flip] *= -1
    m = train(X, y, KernelSpec("kdnf", 3), epochs=2)
    for r in extract_rules(m, X, y):
        assert r.weight > 0 and r.weight == m.weight(r.pre)
        assert covers(r.pre, r.seed_sv)
        if not r.flagged:
            assert not covers_neg(r.pre, X, y)
        # a generalisation never loses coverage of the seed and only replaces bits by *
        assert ((r.pre == STAR) | (r.pre == r.seed_sv)).all()


def test_pickup_rules_cover_true_effects(bw, bw_train):
    tr = generate_trace(bw, bw_train, 2000, obs=ObservationModel(1.0, 0.0), seed=0)
    d = encode_trace(tr, bw)["pickup"]
    effects = set()
    for bit in range(len(d.index)):
        idx = d.labelled(bit)
        m = train(d.priors[idx], d.diffs[idx, bit], KernelSpec("kdnf", 3), effect_bit=bit)
        if extract_rules(m, d.priors[idx], d.diffs[idx, bit]):
            effects.add(d.index.name(bit, ["?ob"]))
    truth = {"(" + " ".join((l.predicate, *l.args)) + ")" for l in bw.actions["pickup"].eff}
    assert effects == truth


def test_format_rules(bw):
    idx = build_fluent_index(bw, "stack", ("armempty", "clear", "ontable", "holding", "on"))
    rules = [PerEffectRule(trits("<*, -1, *, 1, -1, *, *, *, *>"), 1, 14),
             PerEffectRule(trits("<*, *, *, 1, *, *, *, *, *>"), 3, 15)]
    text = format_rules(rules, idx)
    assert "(clear arg1) changes when:" in text
    assert "[14] (AND (NOT(clear arg1)) (holding arg1) (NOT(on arg1 arg2)))" in text
    assert "[15] (AND (holding arg1))" in text

"""Merge per-effect rules into one STRIPS rule per action.

The draft rule starts from the heaviest per-effect precondition with no effects
and absorbs the remaining rules in weight order.  Preconditions are merged with
conflict resolution and locks, simplified, and accepted only when they stay
consistent with the classifiers, supported by the data and not much worse in
F-score.  Effects are kept only while their F-score is comparable to the others.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .encoding import STAR, ActionDataset, FluentIndex, deschematize, format_trits
from .extraction import PerEffectRule, covers
from .pddl import ActionSchema, Literal

log = logging.getLogger(__name__)

EPS_P = 0.95
EPS_E = 0.5

Weigher = Callable[[np.ndarray], np.ndarray]


@dataclass
class StripsRuleDraft:
    v_rule: np.ndarray
    e_rule: set[int] = field(default_factory=set)
    locks: set[int] = field(default_factory=set)
    origin: dict[int, PerEffectRule] = field(default_factory=dict)
    log: list[str] = field(default_factory=list, repr=False)

    def __repr__(self) -> str:
        return f"StripsRuleDraft({format_trits(self.v_rule)}, {sorted(self.e_rule)}, locks={sorted(self.locks)})"


@dataclass(frozen=True)
class FScoreReport:
    precision: float
    recall: float
    f: float
    effect_bit: int = -1
    pre: tuple = ()


def _f(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


class Scorer:
    """Coverage and F-score queries against one action's training set, memoised by precondition."""

    def __init__(self, data: ActionDataset):
        self.priors = data.priors
        self.diffs = data.diffs
        self._cover: dict[tuple, np.ndarray] = {}

    def coverage(self, pre) -> np.ndarray:
        key = tuple(int(v) for v in pre)
        cov = self._cover.get(key)
        if cov is None:
            cov = covers(np.asarray(pre, dtype=np.int8), self.priors)
            self._cover[key] = cov
        return cov

    def fscore(self, pre, bit: int) -> FScoreReport:
        col = self.diffs[:, bit]
        labelled = col != STAR
        predicted = self.coverage(pre) & labelled
        actual = col > 0
        tp = int((predicted & actual).sum())
        n_pred = int(predicted.sum())
        n_act = int(actual.sum())
        if n_pred == 0 and n_act == 0:
            p = r = 1.0
        else:
            p = tp / n_pred if n_pred else 0.0
            r = tp / n_act if n_act else 0.0
        return FScoreReport(p, r, 1.0 if n_pred == n_act == 0 else _f(p, r), bit,
                            tuple(int(v) for v in pre))

    def f(self, pre, bit: int) -> float:
        return self.fscore(pre, bit).f

    def supports(self, pre, bit: int) -> bool:
        """Does ``pre`` cover at least one example where ``bit`` changed?"""
        return bool((self.coverage(pre) & (self.diffs[:, bit] > 0)).any())


def _scorer(data) -> Scorer:
    return data if isinstance(data, Scorer) else Scorer(data)


def fscore(pre, effect_bit: int, data: ActionDataset | Scorer) -> FScoreReport:
    return _scorer(data).fscore(pre, effect_bit)


def _weight(weighers: Mapping[int, Weigher], bit: int, v) -> int:
    return int(np.asarray(weighers[bit](np.asarray(v, dtype=np.int8)[None, :]))[0])


def accept_precons(draft: StripsRuleDraft, v_new, weighers: Mapping[int, Weigher],
                   data: ActionDataset | Scorer, eps_p: float = EPS_P) -> bool:
    sc = _scorer(data)
    for e in sorted(draft.e_rule):
        if _weight(weighers, e, v_new) <= 0:
            return False
        if not sc.supports(v_new, e):
            return False
        if sc.f(v_new, e) < eps_p * sc.f(draft.v_rule, e):
            return False
    return True


def accept_effect(draft: StripsRuleDraft, e_new: int, data: ActionDataset | Scorer,
                  eps_e: float = EPS_E, against: set[int] | None = None) -> bool:
    sc = _scorer(data)
    others = draft.e_rule if against is None else against
    f_new = sc.f(draft.v_rule, e_new)
    return all(f_new >= eps_e * sc.f(draft.v_rule, e) for e in others if e != e_new)


def resolve_conflict(bit: int, draft: StripsRuleDraft, v_next, weighers: Mapping[int, Weigher],
                     merged=None):
    """Value for a conflicting bit: 0 (wildcard, to be locked), +1, -1, or None if unresolved.

    ``merged`` is the candidate with every conflicting bit already set to the
    wildcard; if omitted it is ``v_rule`` with ``bit`` cleared.
    """
    base = np.array(draft.v_rule if merged is None else merged, dtype=np.int8)
    effects = sorted(draft.e_rule)
    variants = {}
    for value in (STAR, 1, -1):
        v = base.copy()
        v[bit] = value
        variants[value] = [_weight(weighers, e, v) for e in effects]
    if all(w > 0 for w in variants[STAR]):
        return STAR
    ok = {val: ws for val, ws in variants.items() if val != STAR and all(w > 0 for w in ws)}
    if not ok:
        return None
    # highest average weight; +1 wins an exact tie
    return max(ok, key=lambda val: (np.mean(ok[val]) if ok[val] else 0.0, val))


def effect_conflict(draft: StripsRuleDraft, nxt: PerEffectRule) -> bool:
    e = nxt.effect_bit
    a, b = draft.v_rule[e], nxt.pre[e]
    return e in draft.e_rule and a != STAR and b != STAR and a != b


def combine_precons(draft: StripsRuleDraft, nxt: PerEffectRule, weighers: Mapping[int, Weigher]):
    """Merged candidate and the bits to lock with it; ``(v_rule, set())`` on rejection."""
    v_rule = draft.v_rule
    if effect_conflict(draft, nxt):
        draft.log.append(f"  effect conflict on bit {nxt.effect_bit}: rule rejected")
        return v_rule.copy(), set()
    v_next = np.asarray(nxt.pre, dtype=np.int8)
    cand = v_rule.copy()
    conflicts = []
    for i in range(len(cand)):
        if i in draft.locks or v_rule[i] == v_next[i] or v_next[i] == STAR:
            continue
        if v_rule[i] == STAR:
            cand[i] = v_next[i]
        else:
            conflicts.append(i)
    if not conflicts:
        return cand, set()
    merged = cand.copy()
    merged[conflicts] = STAR
    locks = set()
    for i in conflicts:
        value = resolve_conflict(i, draft, v_next, weighers, merged)
        if value is None:
            draft.log.append(f"  conflict on bit {i} unresolved: rule rejected")
            return v_rule.copy(), set()
        cand[i] = value
        if value == STAR:
            locks.add(i)
        draft.log.append(f"  conflict on bit {i} resolved to {'*' if value == STAR else value}")
    return cand, locks


def simplify_precons(draft: StripsRuleDraft, v_candidate, weighers: Mapping[int, Weigher],
                     data: ActionDataset | Scorer, eps_p: float = EPS_P) -> np.ndarray:
    """Clear bits that differ from ``v_rule`` when clearing never lowers any F-score.

    Bits are visited in ascending order and decisions accumulate.
    """
    sc = _scorer(data)
    cand = np.array(v_candidate, dtype=np.int8)
    for i in np.flatnonzero(cand != draft.v_rule):
        if cand[i] == STAR:
            continue
        alt = cand.copy()
        alt[i] = STAR
        if not accept_precons(draft, alt, weighers, sc, eps_p):
            continue
        if all(sc.f(alt, e) >= sc.f(cand, e) for e in draft.e_rule):
            draft.log.append(f"  simplify: bit {i} cleared")
            cand = alt
    return cand


def simplify_effects(draft: StripsRuleDraft, data: ActionDataset | Scorer,
                     eps_e: float = EPS_E) -> set[int]:
    sc = _scorer(data)
    kept = set(draft.e_rule)
    for e in sorted(draft.e_rule):
        if not accept_effect(draft, e, sc, eps_e, against=kept - {e}):
            kept.discard(e)
            draft.log.append(f"  simplify effects: bit {e} removed")
    return kept


def order_rules(rules: Sequence[PerEffectRule]) -> list[PerEffectRule]:
    return sorted(rules, key=lambda r: (-r.weight, r.effect_bit, r.key))


def combine(rules: Sequence[PerEffectRule], weighers: Mapping[int, Weigher],
            data: ActionDataset | Scorer, eps_p: float = EPS_P, eps_e: float = EPS_E,
            n_bits: int | None = None) -> StripsRuleDraft:
    """Build one STRIPS rule from per-effect rules.

    ``rule.weight`` is taken as the ordering weight; callers recompute it with the
    rule's own classifier.  An empty rule set gives an all-wildcard draft with no
    effects.
    """
    sc = _scorer(data)
    rules = order_rules(rules)
    if not rules:
        width = n_bits if n_bits is not None else sc.priors.shape[1]
        return StripsRuleDraft(np.zeros(width, dtype=np.int8))
    draft = StripsRuleDraft(np.array(rules[0].pre, dtype=np.int8))
    for nxt in rules:
        combine_step(draft, nxt, weighers, sc, eps_p, eps_e)
    return draft


def combine_step(draft: StripsRuleDraft, nxt: PerEffectRule, weighers: Mapping[int, Weigher],
                 data: ActionDataset | Scorer, eps_p: float = EPS_P, eps_e: float = EPS_E) -> StripsRuleDraft:
    """Absorb one per-effect rule into ``draft`` (in place)."""
    sc = _scorer(data)
    draft.log.append(f"next {format_trits(nxt.pre)} e={nxt.effect_bit} w={nxt.weight}")
    cand, locks = combine_precons(draft, nxt, weighers)
    if not np.array_equal(cand, draft.v_rule):
        cand = simplify_precons(draft, cand, weighers, sc, eps_p)
        if accept_precons(draft, cand, weighers, sc, eps_p):
            draft.v_rule = cand
            draft.locks |= {i for i in locks if cand[i] == STAR}
            draft.log.append(f"  precondition accepted: {format_trits(cand)}")
        else:
            draft.log.append(f"  precondition rejected: {format_trits(cand)}")
    if accept_effect(draft, nxt.effect_bit, sc, eps_e):
        if nxt.effect_bit not in draft.e_rule:
            draft.origin[nxt.effect_bit] = nxt
            draft.log.append(f"  effect {nxt.effect_bit} accepted")
        draft.e_rule.add(nxt.effect_bit)
        draft.e_rule = simplify_effects(draft, sc, eps_e)
    else:
        draft.log.append(f"  effect {nxt.effect_bit} rejected")
    return draft


def effect_direction(draft: StripsRuleDraft, bit: int, data: ActionDataset | Scorer | None = None) -> int | None:
    """Value the fluent changes *from*: +1 (deleted) or -1 (added); None if unknown."""
    if draft.v_rule[bit] != STAR:
        return int(draft.v_rule[bit])
    origin = draft.origin.get(bit)
    if origin is not None and origin.pre[bit] != STAR:
        return int(origin.pre[bit])
    if data is None:
        return None
    sc = _scorer(data)
    rows = sc.coverage(draft.v_rule) & (sc.diffs[:, bit] > 0)
    vals = sc.priors[rows, bit]
    n_true, n_false = int((vals > 0).sum()), int((vals < 0).sum())
    if n_true == n_false:
        return None
    return 1 if n_true > n_false else -1


def to_strips(draft: StripsRuleDraft, index: FluentIndex, params: Sequence[tuple[str, str]] | None = None,
              data: ActionDataset | Scorer | None = None, name: str | None = None) -> ActionSchema:
    """Convert a finished draft to an action schema over ``?x1 .. ?xn``."""
    n = len(index.param_types)
    names = [f"?x{i + 1}" for i in range(n)]
    types = [t for _, t in params] if params is not None else list(index.param_types)
    pre = deschematize(draft.v_rule, index, names)
    eff = set()
    for bit in sorted(draft.e_rule):
        direction = effect_direction(draft, bit, data)
        if direction is None:
            log.warning("%s: cannot tell the direction of effect %s; dropped",
                        index.action, index.name(bit))
            continue
        pred, slots = index.fluents[bit]
        eff.add(Literal(pred, tuple(names[i] for i in slots), positive=direction < 0))
    return ActionSchema(name or index.action, tuple(zip(names, types)), pre, frozenset(eff))

"""Per-effect rule extraction from trained voted perceptrons.

Each positive support vector seeds a greedy walk down the generalisation
lattice: the observed bit whose negation costs the least weight is replaced by
the wildcard, until the next candidate would cover a negative training example.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .encoding import STAR, FluentIndex, deschematize, format_trits, placeholder_names
from .perceptron import VotedModel, positive_support_vectors

Weigher = Callable[[np.ndarray], np.ndarray]  # (B, n) -> (B,) weights


@dataclass(eq=False)
class PerEffectRule:
    pre: np.ndarray
    effect_bit: int
    weight: int
    seed_sv: np.ndarray = field(default=None, repr=False)
    flagged: bool = False  # the seed itself already covered a negative example

    @property
    def key(self) -> tuple:
        return tuple(int(v) for v in self.pre)

    def __repr__(self) -> str:
        flag = ", flagged" if self.flagged else ""
        return f"PerEffectRule({format_trits(self.pre)}, e={self.effect_bit}, w={self.weight}{flag})"


def covers(pre, priors) -> np.ndarray | bool:
    """True where no observed bit of ``pre`` is contradicted by the example.

    Works on a single example (returns bool) or a matrix of examples.
    """
    pre = np.asarray(pre)
    priors = np.asarray(priors)
    if priors.shape[-1] != pre.shape[-1]:
        raise ValueError("length mismatch")
    clash = (pre != STAR) & (priors != STAR) & (priors != pre)
    if priors.ndim == 1:
        return not clash.any()
    return ~clash.any(axis=1)


def covers_neg(pre, priors: np.ndarray, labels: np.ndarray) -> bool:
    """Does ``pre`` cover some example whose label is -1 (no change)?"""
    neg = np.asarray(labels) < 0
    if not neg.any():
        return False
    return bool(covers(pre, np.asarray(priors)[neg]).any())


def _children_scores(weigh: Weigher, x: np.ndarray):
    observed = np.flatnonzero(x != STAR)
    if observed.size == 0:
        raise ValueError("vector has no observed bits")
    batch = np.repeat(x[None, :], observed.size + 1, axis=0)
    batch[np.arange(1, observed.size + 1), observed] *= -1
    w = np.asarray(weigh(batch))
    drops = w[0] - w[1:]
    return observed, drops


def least_discriminative_bit(weigh: Weigher | VotedModel, x) -> int:
    """Observed bit whose negation lowers the weight least (lowest index on ties)."""
    weigh = _as_weigher(weigh)
    observed, drops = _children_scores(weigh, np.asarray(x, dtype=np.int8))
    return int(observed[int(np.argmin(drops))])


def _as_weigher(w) -> Weigher:
    return w.weights if isinstance(w, VotedModel) else w


def extract_from_seed(seed, weigh: Weigher | VotedModel, priors: np.ndarray, labels: np.ndarray,
                      strict: bool = False) -> tuple[np.ndarray, bool]:
    """Generalise one seed; returns (rule, flagged).

    Default mode follows the greedy path and stops as soon as the chosen child
    covers a negative example.  ``strict`` mode instead tries children in
    increasing weight-drop order and stops only when every child covers a
    negative example.
    """
    weigh = _as_weigher(weigh)
    child = np.array(seed, dtype=np.int8)
    if covers_neg(child, priors, labels):
        return child, True
    while True:
        parent = child
        if not (parent != STAR).any():
            return parent, False
        observed, drops = _children_scores(weigh, parent)
        if not strict:
            bit = int(observed[int(np.argmin(drops))])
            child = parent.copy()
            child[bit] = STAR
            if covers_neg(child, priors, labels):
                return parent, False
            continue
        for j in np.argsort(drops, kind="stable"):
            child = parent.copy()
            child[observed[j]] = STAR
            if not covers_neg(child, priors, labels):
                break
        else:
            return parent, False


def extract_rules(model: VotedModel, priors: np.ndarray, labels: np.ndarray, *,
                  strict: bool = False, label_based: bool = False) -> list[PerEffectRule]:
    """Rules for one classifier, heaviest first, identical preconditions merged."""
    best: dict[tuple, PerEffectRule] = {}
    for sv in positive_support_vectors(model, label_based=label_based):
        pre, flagged = extract_from_seed(sv, model, priors, labels, strict=strict)
        rule = PerEffectRule(pre, model.effect_bit, model.weight(pre), sv, flagged)
        if rule.weight <= 0:
            continue
        old = best.get(rule.key)
        if old is None or rule.weight > old.weight:
            best[rule.key] = rule
    return sorted(best.values(), key=lambda r: (-r.weight, r.key))


def format_rules(rules: Sequence[PerEffectRule], index: FluentIndex) -> str:
    """Per-effect rules grouped by effect fluent, weights in brackets."""
    names = placeholder_names(len(index.param_types))
    lines = []
    for bit in sorted({r.effect_bit for r in rules}):
        lines.append(f"{index.name(bit, names)} changes when:")
        for r in (r for r in rules if r.effect_bit == bit):
            lits = sorted(deschematize(r.pre, index, names), key=lambda l: index_order(index, l, names))
            body = " ".join(_rule_literal(l) for l in lits)
            mark = "  ; seed covers a negative example" if r.flagged else ""
            lines.append(f"[{r.weight}] (AND {body}){mark}")
        lines.append("")
    return "\n".join(lines)


def index_order(index: FluentIndex, lit, names) -> int:
    slots = tuple(names.index(a) for a in lit.args)
    return index.position((lit.predicate, slots))


def _rule_literal(lit) -> str:
    body = "(" + " ".join((lit.predicate, *lit.args)) + ")"
    return body if lit.positive else f"(NOT{body})"

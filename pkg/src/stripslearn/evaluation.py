"""Scoring learned models: error rate against the true domain, and prediction
F-score on noiseless, fully observable test traces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .encoding import STAR, FluentIndex, build_fluent_index, encode_trace
from .pddl import ActionSchema, Domain, Literal, Problem
from .perceptron import KernelSpec, SameRows, VotedModel
from .simulator import GroundAction, ObservationModel, ObservedState, Trace, generate_trace


@dataclass(frozen=True)
class ActionError:
    name: str
    e_pre: int
    e_eff: int
    t: int

    @property
    def error(self) -> float:
        if self.t == 0:
            return 0.0 if self.e_pre + self.e_eff == 0 else 1.0
        return (self.e_pre + self.e_eff) / (2 * self.t)


@dataclass
class ErrorReport:
    actions: dict[str, ActionError]
    unmatched: list[str] = field(default_factory=list)  # learned actions absent from the truth

    @property
    def error(self) -> float:
        if not self.actions:
            return 0.0
        return sum(a.error for a in self.actions.values()) / len(self.actions)

    def to_tsv(self) -> str:
        lines = ["action\tE_pre\tE_eff\tT\terror"]
        for name in sorted(self.actions):
            a = self.actions[name]
            lines.append(f"{name}\t{a.e_pre}\t{a.e_eff}\t{a.t}\t{a.error:.6f}")
        lines.append(f"ALL\t\t\t\t{self.error:.6f}")
        return "\n".join(lines) + "\n"


def _rename(lits: Iterable[Literal], mapping: Mapping[str, str]) -> set[Literal]:
    return {Literal(l.predicate, tuple(mapping.get(a, a) for a in l.args), l.positive) for l in lits}


def action_error(learned: ActionSchema | None, truth: ActionSchema, t: int) -> ActionError:
    if learned is None or learned.arity != truth.arity:
        return ActionError(truth.name, t, t, t)
    mapping = dict(zip(learned.variables, truth.variables))
    pre = _rename(learned.pre, mapping)
    eff = _rename(learned.eff, mapping)
    return ActionError(truth.name, len(pre ^ set(truth.pre)), len(eff ^ set(truth.eff)), t)


def error_rate(learned: Domain, truth: Domain) -> ErrorReport:
    """Extra plus missing literals over twice the number of possible fluents, averaged over actions.

    Parameters are aligned by position.  Literal comparison is polarity-sensitive
    and purely syntactic (no implication reasoning).
    """
    by_name = {n.lower(): a for n, a in learned.actions.items()}
    report = ErrorReport({})
    for name, schema in truth.actions.items():
        t = len(build_fluent_index(truth, schema))
        report.actions[name] = action_error(by_name.get(name.lower()), schema, t)
    report.unmatched = sorted(n for n in by_name if n not in truth.actions)
    return report


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


def _ground(lit: Literal, bind: Mapping[str, str]) -> tuple:
    return (lit.predicate, *(bind[a] for a in lit.args))


def predict_with_rules(learned: Domain, prior: ObservedState, action: GroundAction) -> set[Literal]:
    """Ground effect literals if the learned precondition is not contradicted, else nothing."""
    schema = learned.actions.get(action.name)
    if schema is None:
        raise ValueError(f"unknown action {action.name!r}")
    bind = dict(zip(schema.variables, action.args))
    for lit in schema.pre:
        if prior.value(_ground(lit, bind)) == (-1 if lit.positive else 1):
            return set()
    return {Literal(lit.predicate, tuple(bind[a] for a in lit.args), lit.positive) for lit in schema.eff}


@dataclass
class PredictionReport:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    per_action: dict[str, tuple[int, int, int]] = field(default_factory=dict)

    @staticmethod
    def _prf(tp, fp, fn) -> tuple[float, float, float]:
        if tp + fp + fn == 0:
            return 1.0, 1.0, 1.0
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        return p, r, (2 * p * r / (p + r) if p + r else 0.0)

    @property
    def precision(self) -> float:
        return self._prf(self.tp, self.fp, self.fn)[0]

    @property
    def recall(self) -> float:
        return self._prf(self.tp, self.fp, self.fn)[1]

    @property
    def f(self) -> float:
        return self._prf(self.tp, self.fp, self.fn)[2]

    @property
    def macro_f(self) -> float:
        if not self.per_action:
            return self.f
        return float(np.mean([self._prf(*v)[2] for v in self.per_action.values()]))

    def to_tsv(self) -> str:
        lines = ["action\ttp\tfp\tfn\tprecision\trecall\tf"]
        for name in sorted(self.per_action):
            tp, fp, fn = self.per_action[name]
            p, r, f = self._prf(tp, fp, fn)
            lines.append(f"{name}\t{tp}\t{fp}\t{fn}\t{p:.6f}\t{r:.6f}\t{f:.6f}")
        lines.append(f"ALL\t{self.tp}\t{self.fp}\t{self.fn}\t{self.precision:.6f}\t"
                     f"{self.recall:.6f}\t{self.f:.6f}")
        return "\n".join(lines) + "\n"


def _check_clean(trace: Trace) -> None:
    cfg = trace.config or {}
    if cfg.get("observability", 1.0) != 1.0 or cfg.get("noise_prob", 0.0) != 0.0:
        raise ValueError("prediction F-score needs a noiseless, fully observable test trace")


def _rule_predictions(schema: ActionSchema | None, index: FluentIndex, priors: np.ndarray) -> np.ndarray:
    """Predicted change matrix (+1 / -1) for one action's test priors."""
    out = -np.ones_like(priors, dtype=np.int8)
    if schema is None or len(priors) == 0:
        return out
    var_pos = {v: i for i, v in enumerate(schema.variables)}
    pre = np.zeros(len(index), dtype=np.int8)
    for lit in schema.pre:
        pre[index.position((lit.predicate, tuple(var_pos[a] for a in lit.args)))] = 1 if lit.positive else -1
    clash = (pre != STAR) & (priors != STAR) & (priors != pre)
    fires = ~clash.any(axis=1)
    for lit in schema.eff:
        bit = index.position((lit.predicate, tuple(var_pos[a] for a in lit.args)))
        # a literal only changes the fluent if it currently has the other value
        new_val = 1 if lit.positive else -1
        out[fires & (priors[:, bit] != new_val), bit] = 1
    return out


def prediction_fscore(predictor: Domain | Mapping[str, Mapping[int, VotedModel]], test: Trace,
                      domain: Domain, voted: bool = True) -> PredictionReport:
    """Micro-averaged F over (step, fluent) change predictions.

    ``predictor`` is a learned domain or a mapping action -> bit -> classifier.
    ``voted=False`` scores classifiers with their final hypothesis only (the
    standard perceptron).
    """
    _check_clean(test)
    data = encode_trace(test, domain)
    report = PredictionReport()
    for name, ds in data.items():
        actual = ds.diffs > 0
        if isinstance(predictor, Domain):
            pred = _rule_predictions(predictor.actions.get(name), ds.index, ds.priors) > 0
        else:
            pred = np.zeros_like(actual)
            for bit, model in (predictor.get(name) or {}).items():
                pred[:, bit] = model.predict_many(ds.priors, voted=voted) > 0
        tp = int((pred & actual).sum())
        fp = int((pred & ~actual).sum())
        fn = int((~pred & actual).sum())
        report.per_action[name] = (tp, fp, fn)
        report.tp += tp
        report.fp += fp
        report.fn += fn
    return report


# ---------------------------------------------------------------------------
# Kernel comparison
# ---------------------------------------------------------------------------

# variant name -> (kernel, voted)
VARIANTS = {
    "perceptron": (KernelSpec("linear", 1), False),
    "voted-linear": (KernelSpec("linear", 1), True),
    "voted-dnf": (KernelSpec("dnf", 1), True),
    "voted-2dnf": (KernelSpec("kdnf", 2), True),
    "voted-3dnf": (KernelSpec("kdnf", 3), True),
    "voted-5dnf": (KernelSpec("kdnf", 5), True),
}


@dataclass
class ComparisonResult:
    rows: list[dict]  # one per (variant, noise, observability, seed)

    def summary(self) -> list[dict]:
        groups: dict[tuple, list[float]] = {}
        for r in self.rows:
            groups.setdefault((r["variant"], r["noise"], r["observability"]), []).append(r["f"])
        out = []
        for (variant, noise, obs), fs in groups.items():
            sem = float(np.std(fs, ddof=1) / math.sqrt(len(fs))) if len(fs) > 1 else 0.0
            out.append({"variant": variant, "noise": noise, "observability": obs,
                        "n": len(fs), "mean_f": float(np.mean(fs)), "stderr": sem})
        return out

    def mean(self, variant: str, noise: float | None = None, observability: float | None = None) -> float:
        fs = [r["f"] for r in self.rows if r["variant"] == variant
              and (noise is None or r["noise"] == noise)
              and (observability is None or r["observability"] == observability)]
        return float(np.mean(fs))

    def to_tsv(self) -> str:
        lines = ["variant\tnoise\tobservability\tseed\tf"]
        for r in self.rows:
            lines.append(f"{r['variant']}\t{r['noise']}\t{r['observability']}\t{r['seed']}\t{r['f']:.6f}")
        return "\n".join(lines) + "\n"

    def summary_tsv(self) -> str:
        lines = ["variant\tnoise\tobservability\tn\tmean_f\tstderr"]
        for r in self.summary():
            lines.append(f"{r['variant']}\t{r['noise']}\t{r['observability']}\t{r['n']}\t"
                         f"{r['mean_f']:.6f}\t{r['stderr']:.6f}")
        return "\n".join(lines) + "\n"


def kernel_comparison(domain: Domain, train_problems: Sequence[Problem] | Problem,
                      test_problems: Sequence[Problem] | Problem,
                      noise_levels: Sequence[float], observabilities: Sequence[float],
                      seeds: Sequence[int], n_train: int = 5000, n_test: int = 1000,
                      variants: Sequence[str] = tuple(VARIANTS), epochs: int = 2,
                      success_ratio: float = 0.5, episode_len: int | None = None) -> ComparisonResult:
    """Train every perceptron variant on identical traces and score the implicit models."""
    if len(seeds) < 2:
        raise ValueError("kernel comparison needs at least two seeds")
    from .learn import train_action

    rows = []
    for seed in seeds:
        test = generate_trace(domain, test_problems, n_test, success_ratio, episode_len,
                              ObservationModel(1.0, 0.0, seed), seed=seed + 7_919)
        for noise in noise_levels:
            for obs in observabilities:
                trace = generate_trace(domain, train_problems, n_train, success_ratio, episode_len,
                                       ObservationModel(obs, noise, seed), seed=seed)
                data = encode_trace(trace, domain)
                gram = {name: SameRows(ds.priors) for name, ds in data.items()}
                for variant in variants:
                    kernel, voted = VARIANTS[variant]
                    models = {name: train_action(ds, kernel, epochs, seed, rows=gram[name])
                              for name, ds in data.items()}
                    f = prediction_fscore(models, test, domain, voted=voted).f
                    rows.append({"variant": variant, "noise": noise, "observability": obs,
                                 "seed": seed, "f": f})
    return ComparisonResult(rows)

"""End-to-end learning: encode, train per-effect classifiers, extract, combine."""

from __future__ import annotations

import json
import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .combination import EPS_E, EPS_P, Scorer, StripsRuleDraft, combine, to_strips
from .encoding import ActionDataset, FluentIndex, encode_trace, format_trits
from .extraction import PerEffectRule, extract_rules, format_rules
from .pddl import Domain, required_requirements
from .perceptron import KernelSpec, SameRows, VotedModel, train
from .simulator import Trace

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LearnConfig:
    kernel: KernelSpec = KernelSpec("kdnf", 3)
    epochs: int = 2
    eps_p: float = EPS_P
    eps_e: float = EPS_E
    strict: bool = False
    label_based: bool = False
    shuffle: bool = False
    seed: int = 0
    workers: int = 1


@dataclass
class ActionResult:
    name: str
    index: FluentIndex
    data: ActionDataset
    models: dict[int, VotedModel]
    rules: list[PerEffectRule] = field(default_factory=list)
    draft: StripsRuleDraft | None = None
    schema: object = None


@dataclass
class LearnResult:
    domain: Domain
    actions: dict[str, ActionResult]

    @property
    def models(self) -> dict[str, dict[int, VotedModel]]:
        return {name: r.models for name, r in self.actions.items()}


def _classifier_seed(seed: int, action: str, bit: int) -> int:
    ss = np.random.SeedSequence([int(seed), zlib.crc32(f"classifier.{action}.{bit}".encode())])
    return int(ss.generate_state(1)[0])


def train_action(data: ActionDataset, kernel: KernelSpec, epochs: int = 2, seed: int = 0,
                 shuffle: bool = False, rows: SameRows | None = None) -> dict[int, VotedModel]:
    """One voted perceptron per bit, trained on the examples where that bit's change is known."""
    rows = rows or SameRows(data.priors)
    n_bits = len(data.index)
    models = {}
    for bit in range(n_bits):
        idx = data.labelled(bit)
        if idx.size == 0:
            models[bit] = VotedModel(kernel, np.zeros((0, n_bits), np.int8), [], [], epochs,
                                     data.index.action, bit, n_bits)
            continue
        models[bit] = train(data.priors[idx], data.diffs[idx, bit], kernel, epochs,
                            _classifier_seed(seed, data.index.action, bit), shuffle=shuffle,
                            same_rows=lambda t, idx=idx: rows.row(int(idx[t]))[idx],
                            action=data.index.action, effect_bit=bit)
    return models


def learn_action(data: ActionDataset, params, config: LearnConfig = LearnConfig(),
                 models: Mapping[int, VotedModel] | None = None) -> ActionResult:
    index = data.index
    if models is None:
        models = train_action(data, config.kernel, config.epochs, config.seed, config.shuffle)
    rules: list[PerEffectRule] = []
    for bit, model in sorted(models.items()):
        idx = data.labelled(bit)
        rules.extend(extract_rules(model, data.priors[idx], data.diffs[idx, bit],
                                   strict=config.strict, label_based=config.label_based))
    scorer = Scorer(data)
    weighers = {bit: m.weights for bit, m in models.items()}
    draft = combine(rules, weighers, scorer, config.eps_p, config.eps_e, n_bits=len(index))
    schema = to_strips(draft, index, params, scorer)
    return ActionResult(index.action, index, data, dict(models), rules, draft, schema)


def _learn_one(args):
    data, params, config, models = args
    return learn_action(data, params, config, models)


def learn_domain(domain: Domain, trace: Trace | Iterable | Mapping[str, ActionDataset],
                 config: LearnConfig = LearnConfig(),
                 models: Mapping[str, Mapping[int, VotedModel]] | None = None) -> LearnResult:
    """Learn a schema for every action that occurs in ``trace``.

    ``models`` supplies already trained classifiers per action; missing actions are trained.
    """
    datasets = trace if isinstance(trace, Mapping) else encode_trace(trace, domain)
    for name in sorted(set(domain.actions) - set(datasets)):
        log.warning("action %s never observed; no schema learned", name)
    models = models or {}
    jobs = [(datasets[n], domain.actions[n].params, config, models.get(n)) for n in sorted(datasets)]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_learn_one, jobs))
    else:
        results = [_learn_one(j) for j in jobs]
    actions = {r.name: r for r in results}
    learned = Domain(domain.name, frozenset(), dict(domain.types), dict(domain.predicates),
                     {n: r.schema for n, r in actions.items()})
    learned = Domain(learned.name, required_requirements(learned), learned.types,
                     learned.predicates, learned.actions)
    return LearnResult(learned, actions)


MODEL_FORMAT = "stripslearn-models/1"


def save_models(result: LearnResult, directory) -> list[Path]:
    """One JSON file per action: fluent index plus every classifier's mistake list."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in sorted(result.actions):
        r = result.actions[name]
        doc = {
            "format": MODEL_FORMAT,
            "action": name,
            "param_types": list(r.index.param_types),
            "fluent_index": r.index.to_lines(),
            "classifiers": [r.models[b].to_dict() for b in sorted(r.models)],
        }
        path = directory / f"{name}.json"
        path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
        paths.append(path)
    return paths


def load_models(directory) -> dict[str, dict[int, VotedModel]]:
    out = {}
    for path in sorted(Path(directory).glob("*.json")):
        doc = json.loads(path.read_text(encoding="utf-8"))
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
        models = [VotedModel.from_dict(d) for d in doc["classifiers"]]
        out[doc["action"]] = {m.effect_bit: m for m in models}
    return out


def rules_text(result: LearnResult) -> str:
    parts = []
    for name in sorted(result.actions):
        r = result.actions[name]
        parts.append(f"=== {name} ===\n" + format_rules(r.rules, r.index))
    return "\n".join(parts)


def report_text(result: LearnResult) -> str:
    """Per action: examples, combination trace, final rule with per-effect F-scores."""
    lines = []
    for name in sorted(result.actions):
        r = result.actions[name]
        lines.append(f"=== {name} ({len(r.data)} examples, {len(r.rules)} per-effect rules) ===")
        lines.extend(r.draft.log)
        scorer = Scorer(r.data)
        lines.append(f"final precondition {format_trits(r.draft.v_rule)}")
        lines.append(f"locks {sorted(r.draft.locks)}")
        for e in sorted(r.draft.e_rule):
            f = scorer.fscore(r.draft.v_rule, e)
            lines.append(f"effect {r.index.name(e)}: p={f.precision:.4f} r={f.recall:.4f} f={f.f:.4f}")
        lines.append("")
    return "\n".join(lines)

"""Ground STRIPS execution, random-walk trace generation and observation noise."""

from __future__ import annotations

import itertools
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .pddl import ActionSchema, Domain, PDDLSemanticError, Problem

Atom = tuple  # ("on", "b1", "b2")

TRACE_FORMAT = "stripslearn-trace/1"


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for the named sub-stream of ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


@dataclass(frozen=True, order=True)
class GroundAction:
    name: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        return "(" + " ".join((self.name, *self.args)) + ")"


@dataclass(frozen=True)
class WorldState:
    true_atoms: frozenset = frozenset()

    def __contains__(self, atom) -> bool:
        return atom in self.true_atoms


@dataclass(frozen=True)
class ObservedState:
    pos: frozenset = frozenset()
    neg: frozenset = frozenset()

    def __post_init__(self):
        clash = self.pos & self.neg
        if clash:
            raise ValueError(f"atoms observed both true and false: {sorted(clash)[:3]}")

    def value(self, atom) -> int:
        """+1 observed true, -1 observed false, 0 unobserved."""
        if atom in self.pos:
            return 1
        if atom in self.neg:
            return -1
        return 0

    def __len__(self) -> int:
        return len(self.pos) + len(self.neg)


@dataclass(frozen=True)
class ObservationModel:
    observability: float = 1.0
    noise_prob: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.observability <= 1.0:
            raise ValueError("observability must be in [0, 1]")
        if not 0.0 <= self.noise_prob <= 1.0:
            raise ValueError("noise_prob must be in [0, 1]")


@dataclass
class TraceStep:
    prior_obs: ObservedState
    action: GroundAction
    succ_obs: ObservedState
    succeeded: bool  # ground truth; not part of the learner's input
    episode: int = 0


@dataclass
class Trace:
    steps: list[TraceStep] = field(default_factory=list)
    episode_starts: list[int] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)


# ---------------------------------------------------------------------------
# Ground semantics
# ---------------------------------------------------------------------------


def _binding(schema: ActionSchema, action: GroundAction) -> dict[str, str]:
    if len(action.args) != schema.arity:
        raise ValueError(f"{action}: expected {schema.arity} arguments")
    return dict(zip(schema.variables, action.args))


def _schema(domain: Domain, action: GroundAction) -> ActionSchema:
    try:
        return domain.actions[action.name]
    except KeyError:
        raise ValueError(f"unknown action {action.name!r}") from None


def _check_types(domain: Domain, schema: ActionSchema, action: GroundAction, problem: Problem | None):
    if problem is None:
        return
    for obj, t in zip(action.args, schema.param_types):
        if obj not in problem.objects:
            raise ValueError(f"{action}: unknown object {obj!r}")
        if not domain.is_subtype(problem.objects[obj], t):
            raise ValueError(f"{action}: {obj!r} is not a {t}")


def applicable(state: WorldState, action: GroundAction, domain: Domain,
               problem: Problem | None = None) -> bool:
    schema = _schema(domain, action)
    bind = _binding(schema, action)
    _check_types(domain, schema, action, problem)
    for lit in schema.pre:
        atom = (lit.predicate, *(bind[a] for a in lit.args))
        if (atom in state.true_atoms) != lit.positive:
            return False
    return True


def apply(state: WorldState, action: GroundAction, domain: Domain,
          problem: Problem | None = None) -> WorldState:
    """Successor state; failed (inapplicable) actions leave the state unchanged."""
    if not applicable(state, action, domain, problem):
        return state
    bind = _binding(_schema(domain, action), action)
    atoms = set(state.true_atoms)
    eff = domain.actions[action.name].eff
    for lit in eff:
        if not lit.positive:
            atoms.discard((lit.predicate, *(bind[a] for a in lit.args)))
    for lit in eff:
        if lit.positive:
            atoms.add((lit.predicate, *(bind[a] for a in lit.args)))
    return WorldState(frozenset(atoms))


def objects_of_type(domain: Domain, problem: Problem, t: str) -> list[str]:
    return sorted(o for o, ot in problem.objects.items() if domain.is_subtype(ot, t))


def atom_universe(domain: Domain, problem: Problem) -> list[Atom]:
    """All type-legal ground atoms, sorted."""
    atoms = []
    for pdef in domain.predicates.values():
        pools = [objects_of_type(domain, problem, t) for t in pdef.param_types]
        atoms.extend((pdef.name, *combo) for combo in itertools.product(*pools))
    return sorted(atoms)


def ground_actions(domain: Domain, problem: Problem, distinct_args: bool = True) -> list[GroundAction]:
    """All type-legal instances (without repeated arguments by default), sorted."""
    out = []
    for name in sorted(domain.actions):
        schema = domain.actions[name]
        pools = [objects_of_type(domain, problem, t) for t in schema.param_types]
        for combo in itertools.product(*pools):
            if distinct_args and len(set(combo)) < len(combo):
                continue
            out.append(GroundAction(name, combo))
    return out


def observe(state: WorldState, all_atoms: Sequence[Atom], obs: ObservationModel,
            rng: np.random.Generator) -> ObservedState:
    """Drop each atom with probability 1-observability, flip kept ones with noise_prob."""
    n = len(all_atoms)
    keep = rng.random(n) < obs.observability
    flip = rng.random(n) < obs.noise_prob
    truth = np.fromiter((a in state.true_atoms for a in all_atoms), dtype=bool, count=n)
    return _observed(all_atoms, truth, keep, flip)


def _observed(all_atoms, truth, keep, flip) -> ObservedState:
    seen = truth ^ flip
    pos = frozenset(itertools.compress(all_atoms, keep & seen))
    neg = frozenset(itertools.compress(all_atoms, keep & ~seen))
    return ObservedState(pos, neg)


def full_observation(state: WorldState, all_atoms: Iterable[Atom]) -> ObservedState:
    pos = frozenset(a for a in all_atoms if a in state.true_atoms)
    neg = frozenset(a for a in all_atoms if a not in state.true_atoms)
    return ObservedState(pos, neg)


# ---------------------------------------------------------------------------
# Compiled problem for fast random walks
# ---------------------------------------------------------------------------


class _Compiled:
    """Index arrays for every ground instance of a problem."""

    def __init__(self, domain: Domain, problem: Problem):
        self.atoms = atom_universe(domain, problem)
        self.atom_id = {a: i for i, a in enumerate(self.atoms)}
        self.instances = ground_actions(domain, problem)
        if not self.instances:
            raise ValueError(f"problem {problem.name!r} has no ground action instances")
        missing = [a for a in problem.init if a not in self.atom_id]
        if missing:
            raise PDDLSemanticError(f"init atoms outside the typed universe: {missing[:3]}")
        self.init = np.zeros(len(self.atoms), dtype=bool)
        self.init[[self.atom_id[a] for a in problem.init]] = True
        # per-schema blocks of instances with padded index arrays
        self.blocks = []
        start = 0
        for name, group in itertools.groupby(self.instances, key=lambda g: g.name):
            group = list(group)
            schema = domain.actions[name]
            arrays = [self._index(schema, group, lits)
                      for lits in (_lits(schema.pre, True), _lits(schema.pre, False),
                                   _lits(schema.eff, True), _lits(schema.eff, False))]
            self.blocks.append((start, start + len(group), *arrays))
            start += len(group)

    def _index(self, schema, group, lits):
        out = np.empty((len(group), len(lits)), dtype=np.int64)
        for i, g in enumerate(group):
            bind = dict(zip(schema.variables, g.args))
            for j, lit in enumerate(lits):
                out[i, j] = self.atom_id[(lit.predicate, *(bind[a] for a in lit.args))]
        return out

    def applicable_mask(self, state: np.ndarray) -> np.ndarray:
        mask = np.empty(len(self.instances), dtype=bool)
        for start, stop, ppos, pneg, _, _ in self.blocks:
            ok = state[ppos].all(axis=1) if ppos.shape[1] else np.ones(stop - start, dtype=bool)
            if pneg.shape[1]:
                ok &= ~state[pneg].any(axis=1)
            mask[start:stop] = ok
        return mask

    def apply(self, state: np.ndarray, k: int) -> np.ndarray:
        for start, stop, _, _, add, dele in self.blocks:
            if start <= k < stop:
                new = state.copy()
                new[dele[k - start]] = False
                new[add[k - start]] = True
                return new
        raise IndexError(k)


def _lits(lits, positive):
    return sorted(l for l in lits if l.positive == positive)


def generate_trace(domain: Domain, problems: Problem | Sequence[Problem], n_steps: int,
                   success_ratio: float = 0.5, episode_len: int | None = None,
                   obs: ObservationModel | None = None, seed: int = 0) -> Trace:
    """Random walk mixing applicable and inapplicable actions.

    Each step draws from the applicable pool with probability ``success_ratio``
    (otherwise from the inapplicable pool; an empty pool falls back to the other),
    picking uniformly among ground instances.  Every ``episode_len`` steps the
    world is reset to the init state of the next problem (cycling through
    ``problems``).  Each state is observed once, so the successor observation of
    a step is also the prior observation of the next step in the same episode.
    """
    if isinstance(problems, Problem):
        problems = [problems]
    problems = list(problems)
    if not problems:
        raise ValueError("at least one problem is required")
    if not 0.0 <= success_ratio <= 1.0:
        raise ValueError("success_ratio must be in [0, 1]")
    obs = obs or ObservationModel()
    episode_len = episode_len or max(n_steps, 1)
    if episode_len < 1:
        raise ValueError("episode_len must be >= 1")
    compiled = [_Compiled(domain, p) for p in problems]
    act_rng = substream(seed, "trace.actions")
    obs_rng = substream(seed, "trace.observations")
    config = {
        "domain": domain.name,
        "problems": [p.name for p in problems],
        "n_steps": n_steps,
        "success_ratio": success_ratio,
        "episode_len": episode_len,
        "observability": obs.observability,
        "noise_prob": obs.noise_prob,
        "seed": seed,
    }
    trace = Trace(config=config)

    def look(c: _Compiled, state: np.ndarray) -> ObservedState:
        n = len(c.atoms)
        keep = obs_rng.random(n) < obs.observability
        flip = obs_rng.random(n) < obs.noise_prob
        return _observed(c.atoms, state, keep, flip)

    c = state = prior = None
    for step in range(n_steps):
        if step % episode_len == 0:
            episode = step // episode_len
            c = compiled[episode % len(compiled)]
            state = c.init.copy()
            prior = look(c, state)
            trace.episode_starts.append(step)
        mask = c.applicable_mask(state)
        want_success = act_rng.random() < success_ratio
        pool = np.flatnonzero(mask if want_success else ~mask)
        if pool.size == 0:
            pool = np.flatnonzero(~mask if want_success else mask)
        k = int(pool[act_rng.integers(pool.size)])
        ok = bool(mask[k])
        if ok:
            state = c.apply(state, k)
        succ = look(c, state)
        trace.steps.append(TraceStep(prior, c.instances[k], succ, ok, step // episode_len))
        prior = succ
    return trace


# ---------------------------------------------------------------------------
# Trace files
# ---------------------------------------------------------------------------


def _obs_json(o: ObservedState) -> dict:
    return {"pos": [list(a) for a in sorted(o.pos)], "neg": [list(a) for a in sorted(o.neg)]}


def _obs_from(d: dict) -> ObservedState:
    return ObservedState(frozenset(tuple(a) for a in d["pos"]), frozenset(tuple(a) for a in d["neg"]))


def truth_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".truth.json")


def write_trace(trace: Trace, path) -> None:
    """Write the learner-visible JSONL trace plus a sidecar with success flags."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": TRACE_FORMAT, "config": trace.config,
                  "episode_starts": trace.episode_starts}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for n, st in enumerate(trace.steps):
            rec = {"step": n, "episode": st.episode,
                   "action": {"name": st.action.name, "args": list(st.action.args)},
                   "prior": _obs_json(st.prior_obs), "succ": _obs_json(st.succ_obs)}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(truth_path(path), "w", encoding="utf-8") as fh:
        json.dump({"format": TRACE_FORMAT, "succeeded": [st.succeeded for st in trace.steps]}, fh)
        fh.write("\n")


def read_trace(path, with_truth: bool = False) -> Trace:
    """Read a trace file.  Success flags are loaded only when asked for."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            raise ValueError(f"{path}: empty trace file (missing header)")
        header = json.loads(first)
        if header.get("format") != TRACE_FORMAT:
            raise ValueError(f"{path}: not a {TRACE_FORMAT} file")
        steps = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                steps.append(TraceStep(_obs_from(rec["prior"]),
                                       GroundAction(rec["action"]["name"], tuple(rec["action"]["args"])),
                                       _obs_from(rec["succ"]), succeeded=False,
                                       episode=rec.get("episode", 0)))
            except (KeyError, TypeError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed trace record ({exc})") from exc
    if with_truth:
        with open(truth_path(path), encoding="utf-8") as fh:
            flags = json.load(fh)["succeeded"]
        for st, ok in zip(steps, flags):
            st.succeeded = bool(ok)
    return Trace(steps, header.get("episode_starts", []), header.get("config", {}))

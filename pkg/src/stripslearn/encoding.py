"""Schematised trit-vector encoding of observations under the STRIPS scope assumption.

Trit vectors are ``int8`` numpy arrays: ``+1`` observed true, ``-1`` observed
false and ``0`` for the wildcard (unobserved).  Changes vectors use the same
alphabet: ``+1`` changed, ``-1`` unchanged, ``0`` undetermined.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .pddl import ActionSchema, Domain, Literal
from .simulator import GroundAction, ObservedState, Trace

log = logging.getLogger(__name__)

STAR = 0
Fluent = tuple  # (predicate, (placeholder positions...))


@dataclass(frozen=True)
class FluentIndex:
    """Ordered schematised fluents for one action; bit ``b`` is ``fluents[b]``."""

    action: str
    param_types: tuple[str, ...]
    fluents: tuple[Fluent, ...]
    _position: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_position", {f: i for i, f in enumerate(self.fluents)})

    def __len__(self) -> int:
        return len(self.fluents)

    def position(self, fluent: Fluent) -> int:
        return self._position[fluent]

    def ground(self, args: Sequence[str]) -> list[tuple]:
        """Ground atoms for every bit given the action's arguments."""
        return [(pred, *(args[i] for i in slots)) for pred, slots in self.fluents]

    def name(self, bit: int, names: Sequence[str] | None = None) -> str:
        pred, slots = self.fluents[bit]
        names = names or placeholder_names(len(self.param_types))
        return "(" + " ".join((pred, *(names[i] for i in slots))) + ")"

    def to_lines(self) -> list[str]:
        return [self.name(b) for b in range(len(self))]


def placeholder_names(n: int, prefix: str = "arg") -> list[str]:
    return [f"{prefix}{i + 1}" for i in range(n)]


def build_fluent_index(domain: Domain, action: ActionSchema | str,
                       predicate_order: Sequence[str] | None = None) -> FluentIndex:
    """Every type-legal schematised fluent over distinct action parameters.

    Bits are grouped by their first placeholder (nullary fluents first), then
    ordered by predicate (alphabetically unless ``predicate_order`` is given) and
    by the remaining placeholders.
    """
    if isinstance(action, str):
        action = domain.actions[action]
    types = action.param_types
    order = list(predicate_order) if predicate_order is not None else sorted(domain.predicates)
    unknown = set(domain.predicates) - set(order)
    order += sorted(unknown)
    rank = {p: i for i, p in enumerate(order)}
    fluents = []
    for pdef in domain.predicates.values():
        for slots in itertools.permutations(range(len(types)), pdef.arity):
            if all(domain.compatible(types[s], t) for s, t in zip(slots, pdef.param_types)):
                fluents.append((pdef.name, slots))
    fluents.sort(key=lambda f: (f[1][0] if f[1] else -1, rank[f[0]], f[1]))
    return FluentIndex(action.name, types, tuple(fluents))


def schematize(obs: ObservedState, action: GroundAction, index: FluentIndex) -> np.ndarray:
    if len(action.args) != len(index.param_types):
        raise ValueError(f"{action}: arity does not match the index for {index.action}")
    return np.fromiter((obs.value(a) for a in index.ground(action.args)),
                       dtype=np.int8, count=len(index))


def changes_vector(prior: np.ndarray, succ: np.ndarray) -> np.ndarray:
    """+1 where both observed and different, -1 where both observed and equal, else 0."""
    prior = np.asarray(prior, dtype=np.int8)
    succ = np.asarray(succ, dtype=np.int8)
    if prior.shape != succ.shape:
        raise ValueError("length mismatch")
    both = (prior != STAR) & (succ != STAR)
    return np.where(both, np.where(prior == succ, -1, 1), STAR).astype(np.int8)


def deschematize(v: np.ndarray, index: FluentIndex, names: Sequence[str] | None = None) -> frozenset[Literal]:
    names = names or placeholder_names(len(index.param_types))
    out = set()
    for bit, val in enumerate(v):
        if val == STAR:
            continue
        pred, slots = index.fluents[bit]
        out.add(Literal(pred, tuple(names[i] for i in slots), bool(val > 0)))
    return frozenset(out)


def trits(text: str) -> np.ndarray:
    """Parse ``"<*, -1, 1>"`` (or ``"* -1 1"``) into a trit vector."""
    cleaned = text.strip().strip("<>⟨⟩").replace(",", " ").replace("−", "-")
    return np.array([STAR if t == "*" else int(t) for t in cleaned.split()], dtype=np.int8)


def format_trits(v: Iterable[int]) -> str:
    return "<" + ", ".join("*" if x == STAR else str(int(x)) for x in v) + ">"


@dataclass
class ActionDataset:
    """All encoded examples of one action, in trace order."""

    index: FluentIndex
    priors: np.ndarray  # (N, n) trits
    diffs: np.ndarray  # (N, n) changes trits
    steps: np.ndarray  # trace step numbers

    def __len__(self) -> int:
        return len(self.priors)

    def labelled(self, bit: int) -> np.ndarray:
        """Row indices whose change at ``bit`` is known."""
        return np.flatnonzero(self.diffs[:, bit] != STAR)


def encode_trace(trace: Trace | Iterable, domain: Domain,
                 indices: dict[str, FluentIndex] | None = None) -> dict[str, ActionDataset]:
    """Encode every step into per-action datasets.

    Steps whose action repeats an argument are skipped: one object cannot fill two
    placeholder roles.
    """
    indices = dict(indices or {})
    rows: dict[str, tuple[list, list, list]] = {}
    skipped = 0
    for n, st in enumerate(trace):
        name = st.action.name
        if name not in domain.actions:
            raise ValueError(f"trace step {n}: action {name!r} is not in domain {domain.name!r}")
        if len(set(st.action.args)) < len(st.action.args):
            skipped += 1
            continue
        if name not in indices:
            indices[name] = build_fluent_index(domain, name)
        index = indices[name]
        atoms = index.ground(st.action.args)
        prior = np.fromiter((st.prior_obs.value(a) for a in atoms), dtype=np.int8, count=len(atoms))
        succ = np.fromiter((st.succ_obs.value(a) for a in atoms), dtype=np.int8, count=len(atoms))
        p, d, s = rows.setdefault(name, ([], [], []))
        p.append(prior)
        d.append(changes_vector(prior, succ))
        s.append(n)
    if skipped:
        log.warning("skipped %d steps with repeated action arguments", skipped)
    out = {}
    for name in sorted(rows):
        p, d, s = rows[name]
        n_bits = len(indices[name])
        out[name] = ActionDataset(indices[name],
                                  np.array(p, dtype=np.int8).reshape(-1, n_bits),
                                  np.array(d, dtype=np.int8).reshape(-1, n_bits),
                                  np.array(s, dtype=np.int64))
    return out

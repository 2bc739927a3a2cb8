"""Parsing and emission for the STRIPS subset of PDDL.

Supported requirements are ``:strips``, ``:typing`` and
``:negative-preconditions``.  Anything else (conditional effects, quantifiers,
disjunctions, equality, constants, numeric fluents, ...) is rejected with
:class:`UnsupportedRequirementError` rather than silently ignored.

Identifiers are case-insensitive and normalised to lower case.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator

ROOT_TYPE = "object"
SUPPORTED_REQUIREMENTS = frozenset({":strips", ":typing", ":negative-preconditions"})

# keywords that mark constructs outside the supported subset
_UNSUPPORTED_FORMULAS = {
    "or", "imply", "exists", "forall", "when", "=", "either",
    "increase", "decrease", "assign", "scale-up", "scale-down",
}
_UNSUPPORTED_SECTIONS = {
    ":constants", ":functions", ":derived", ":durative-action", ":axiom",
    ":constraints", ":metric", ":timeless",
}


class PDDLError(ValueError):
    """Base class for PDDL problems."""


class PDDLSyntaxError(PDDLError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, column {col}: {message}")


class UnsupportedRequirementError(PDDLError):
    def __init__(self, construct: str, line: int = 0, col: int = 0):
        self.construct = construct
        self.line = line
        self.col = col
        super().__init__(
            f"line {line}, column {col}: unsupported PDDL construct {construct!r} "
            "(only :strips, :typing and :negative-preconditions are supported)"
        )


class PDDLSemanticError(PDDLError):
    pass


# ---------------------------------------------------------------------------
# Data model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PredicateDef:
    name: str
    param_types: tuple[str, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.param_types)


@dataclass(frozen=True, order=True)
class Literal:
    """A (possibly negated) atom.  ``args`` are variables (``?x``) or objects."""

    predicate: str
    args: tuple[str, ...] = ()
    positive: bool = True

    @property
    def atom(self) -> tuple[str, ...]:
        return (self.predicate, *self.args)

    def negate(self) -> "Literal":
        return Literal(self.predicate, self.args, not self.positive)

    def __str__(self) -> str:
        body = "(" + " ".join((self.predicate, *self.args)) + ")"
        return body if self.positive else f"(not {body})"


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[tuple[str, str], ...]  # (variable, type)
    pre: frozenset[Literal] = frozenset()
    eff: frozenset[Literal] = frozenset()

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.params)

    @property
    def param_types(self) -> tuple[str, ...]:
        return tuple(t for _, t in self.params)


@dataclass(frozen=True)
class Domain:
    name: str
    requirements: frozenset[str] = frozenset({":strips"})
    types: dict[str, str] = field(default_factory=dict)  # child -> parent
    predicates: dict[str, PredicateDef] = field(default_factory=dict)
    actions: dict[str, ActionSchema] = field(default_factory=dict)

    def __hash__(self) -> int:
        return hash((self.name, tuple(sorted(self.actions))))

    def ancestors(self, type_name: str) -> list[str]:
        """``type_name`` followed by its parents up to ``object``."""
        chain = [type_name]
        seen = {type_name}
        while chain[-1] != ROOT_TYPE:
            parent = self.types.get(chain[-1], ROOT_TYPE)
            if parent in seen:
                raise PDDLSemanticError(f"cyclic type hierarchy at {parent!r}")
            chain.append(parent)
            seen.add(parent)
        return chain

    def is_subtype(self, sub: str, sup: str) -> bool:
        return sup in self.ancestors(sub)

    def compatible(self, a: str, b: str) -> bool:
        """True if some object could have both types (one subsumes the other)."""
        return self.is_subtype(a, b) or self.is_subtype(b, a)


@dataclass(frozen=True)
class Problem:
    name: str
    domain_name: str
    objects: dict[str, str] = field(default_factory=dict)  # object -> type
    init: frozenset[tuple[str, ...]] = frozenset()  # positive ground atoms
    goal: frozenset[Literal] = frozenset()

    def __hash__(self) -> int:
        return hash((self.name, self.domain_name, self.init))


# ---------------------------------------------------------------------------
# Tokenising / s-expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    value: str
    line: int
    col: int


class SExpr(list):
    """A parenthesised list that remembers where it opened."""

    line = 0
    col = 0


def tokenize(text: str) -> Iterator[Token]:
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col = line + 1, 1
            i += 1
        elif ch.isspace():
            i += 1
            col += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield Token(ch, line, col)
            i += 1
            col += 1
        else:
            start, start_col = i, col
            while i < n and not text[i].isspace() and text[i] not in "();":
                i += 1
            col += i - start
            yield Token(text[start:i].lower(), line, start_col)


def parse_sexpr(text: str) -> SExpr:
    stack: list[SExpr] = []
    result: SExpr | None = None
    for tok in tokenize(text):
        if tok.value == "(":
            node = SExpr()
            node.line, node.col = tok.line, tok.col
            stack.append(node)
        elif tok.value == ")":
            if not stack:
                raise PDDLSyntaxError("unbalanced ')'", tok.line, tok.col)
            node = stack.pop()
            if stack:
                stack[-1].append(node)
            elif result is None:
                result = node
            else:
                raise PDDLSyntaxError("more than one top-level expression", tok.line, tok.col)
        else:
            if not stack:
                raise PDDLSyntaxError(f"unexpected token {tok.value!r} outside parentheses",
                                      tok.line, tok.col)
            stack[-1].append(tok)
    if stack:
        raise PDDLSyntaxError("unclosed '('", stack[-1].line, stack[-1].col)
    if result is None:
        raise PDDLSyntaxError("empty input", 1, 1)
    return result


def _loc(node) -> tuple[int, int]:
    return (node.line, node.col)


def _word(node, what: str) -> str:
    if not isinstance(node, Token):
        raise PDDLSyntaxError(f"expected {what}, found a list", *_loc(node))
    return node.value


def _list(node, what: str) -> SExpr:
    if not isinstance(node, SExpr):
        raise PDDLSyntaxError(f"expected {what}, found {node.value!r}", *_loc(node))
    return node


def _typed_list(items: list, *, variables: bool) -> list[tuple[str, str, Token]]:
    """Parse ``a b - t c - u d`` into [(name, type, token)]."""
    out: list[tuple[str, str, Token]] = []
    pending: list[Token] = []
    i = 0
    while i < len(items):
        item = items[i]
        if isinstance(item, SExpr):
            raise PDDLSyntaxError("unexpected list in typed list", *_loc(item))
        if item.value == "-":
            if i + 1 >= len(items):
                raise PDDLSyntaxError("missing type after '-'", *_loc(item))
            tnode = items[i + 1]
            if isinstance(tnode, SExpr):
                head = tnode[0].value if tnode and isinstance(tnode[0], Token) else "?"
                raise UnsupportedRequirementError(head, *_loc(tnode))
            if not pending:
                raise PDDLSyntaxError("type without names", *_loc(item))
            out.extend((p.value, tnode.value, p) for p in pending)
            pending = []
            i += 2
            continue
        if variables and not item.value.startswith("?"):
            raise PDDLSyntaxError(f"expected a variable, found {item.value!r}", *_loc(item))
        pending.append(item)
        i += 1
    out.extend((p.value, ROOT_TYPE, p) for p in pending)
    return out


def _section_head(node) -> str:
    node = _list(node, "a section")
    if not node:
        raise PDDLSyntaxError("empty section", *_loc(node))
    return _word(node[0], "a section keyword")


# ---------------------------------------------------------------------------
# Domain parsing
# ---------------------------------------------------------------------------


def _parse_formula(node, *, allow_negative: bool, context: str) -> list[tuple[Literal, Token | SExpr]]:
    """Flatten a conjunction of (possibly negated) atoms."""
    node = _list(node, f"a {context} formula")
    if not node:
        return []
    head = _word(node[0], "a formula head")
    if head == "and":
        out = []
        for sub in node[1:]:
            out.extend(_parse_formula(sub, allow_negative=allow_negative, context=context))
        return out
    if head == "not":
        if len(node) != 2:
            raise PDDLSyntaxError("'not' takes exactly one argument", *_loc(node))
        inner = _list(node[1], "an atom")
        if inner and isinstance(inner[0], Token) and inner[0].value in ("and", "not"):
            raise UnsupportedRequirementError(f"not {inner[0].value}", *_loc(inner))
        if not allow_negative:
            raise UnsupportedRequirementError(
                "negative precondition without :negative-preconditions", *_loc(node))
        ((lit, src),) = _parse_formula(inner, allow_negative=True, context=context)
        return [(lit.negate(), src)]
    if head in _UNSUPPORTED_FORMULAS:
        raise UnsupportedRequirementError(head, *_loc(node))
    if head.startswith(":"):
        raise PDDLSyntaxError(f"unexpected keyword {head!r} in formula", *_loc(node))
    args = tuple(_word(a, "a term") for a in node[1:])
    return [(Literal(head, args), node)]


def parse_domain(text: str) -> Domain:
    """Parse a STRIPS-subset PDDL domain."""
    root = parse_sexpr(text)
    if not root or _word(root[0], "'define'") != "define":
        raise PDDLSyntaxError("expected (define ...)", *_loc(root))
    if len(root) < 2:
        raise PDDLSyntaxError("missing (domain NAME)", *_loc(root))
    header = _list(root[1], "(domain NAME)")
    if len(header) != 2 or _word(header[0], "'domain'") != "domain":
        raise PDDLSyntaxError("expected (domain NAME)", *_loc(header))
    name = _word(header[1], "a domain name")

    requirements = frozenset({":strips"})
    types: dict[str, str] = {}
    predicates: dict[str, PredicateDef] = {}
    raw_actions: list[SExpr] = []
    for section in root[2:]:
        head = _section_head(section)
        if head == ":requirements":
            reqs = [_word(r, "a requirement") for r in section[1:]]
            for r, tok in zip(reqs, section[1:]):
                if r not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedRequirementError(r, *_loc(tok))
            requirements = frozenset(reqs) or requirements
        elif head == ":types":
            for tname, parent, tok in _typed_list(section[1:], variables=False):
                if tname == ROOT_TYPE:
                    continue
                if tname in types and types[tname] != parent:
                    raise PDDLSemanticError(f"type {tname!r} declared with two parents")
                types[tname] = parent
        elif head == ":predicates":
            for pnode in section[1:]:
                pnode = _list(pnode, "a predicate declaration")
                pname = _word(pnode[0], "a predicate name")
                if pname in predicates:
                    raise PDDLSemanticError(f"predicate {pname!r} declared twice")
                params = _typed_list(pnode[1:], variables=True)
                predicates[pname] = PredicateDef(pname, tuple(t for _, t, _ in params))
        elif head == ":action":
            raw_actions.append(section)
        elif head in _UNSUPPORTED_SECTIONS:
            raise UnsupportedRequirementError(head, *_loc(section))
        else:
            raise PDDLSyntaxError(f"unknown domain section {head!r}", *_loc(section))

    for parent in list(types.values()):
        if parent != ROOT_TYPE and parent not in types:
            types[parent] = ROOT_TYPE  # implicitly declared supertype
    domain = Domain(name, requirements, types, predicates, {})
    for pdef in predicates.values():
        for t in pdef.param_types:
            _check_type(domain, t)

    for node in raw_actions:
        schema = _parse_action(node, domain)
        if schema.name in domain.actions:
            raise PDDLSemanticError(f"action {schema.name!r} declared twice")
        domain.actions[schema.name] = schema
    return domain


def _check_type(domain: Domain, t: str) -> None:
    if t != ROOT_TYPE and t not in domain.types:
        raise PDDLSemanticError(f"undeclared type {t!r}")


def _parse_action(node: SExpr, domain: Domain) -> ActionSchema:
    if len(node) < 2:
        raise PDDLSyntaxError("action without a name", *_loc(node))
    name = _word(node[1], "an action name")
    fields: dict[str, object] = {}
    rest = node[2:]
    if len(rest) % 2:
        raise PDDLSyntaxError(f"malformed action {name!r}", *_loc(node))
    for key, value in zip(rest[::2], rest[1::2]):
        k = _word(key, "an action keyword")
        if k not in (":parameters", ":precondition", ":effect"):
            raise UnsupportedRequirementError(k, *_loc(key))
        fields[k] = value

    params = []
    if ":parameters" in fields:
        for var, t, tok in _typed_list(_list(fields[":parameters"], "a parameter list"),
                                       variables=True):
            _check_type(domain, t)
            params.append((var, t))
    var_types = dict(params)
    if len(var_types) != len(params):
        raise PDDLSemanticError(f"action {name!r}: duplicate parameter")

    negative_ok = ":negative-preconditions" in domain.requirements
    pre = _parse_formula(fields[":precondition"], allow_negative=negative_ok, context="precondition") \
        if ":precondition" in fields else []
    eff = _parse_formula(fields[":effect"], allow_negative=True, context="effect") \
        if ":effect" in fields else []

    for lit, src in itertools.chain(pre, eff):
        pdef = domain.predicates.get(lit.predicate)
        if pdef is None:
            raise PDDLSemanticError(f"action {name!r}: unknown predicate {lit.predicate!r} "
                                    f"(line {src.line})")
        if pdef.arity != len(lit.args):
            raise PDDLSemanticError(f"action {name!r}: {lit} has arity {len(lit.args)}, "
                                    f"expected {pdef.arity}")
        for arg, slot in zip(lit.args, pdef.param_types):
            if not arg.startswith("?"):
                raise UnsupportedRequirementError(f"constant {arg!r}", src.line, src.col)
            if arg not in var_types:
                raise PDDLSemanticError(
                    f"action {name!r}: variable {arg} is not a parameter (STRIPS scope assumption)")
            if not domain.compatible(var_types[arg], slot):
                raise PDDLSemanticError(f"action {name!r}: {lit} violates typing")

    pre_set = frozenset(lit for lit, _ in pre)
    eff_set = frozenset(lit for lit, _ in eff)
    for label, lits in (("precondition", pre_set), ("effect", eff_set)):
        for lit in lits:
            if lit.positive and lit.negate() in lits:
                raise PDDLSemanticError(f"action {name!r}: {label} contains {lit} and its negation")
    return ActionSchema(name, tuple(params), pre_set, eff_set)


# ---------------------------------------------------------------------------
# Problem parsing
# ---------------------------------------------------------------------------


def parse_problem(text: str, domain: Domain) -> Problem:
    root = parse_sexpr(text)
    if not root or _word(root[0], "'define'") != "define":
        raise PDDLSyntaxError("expected (define ...)", *_loc(root))
    header = _list(root[1], "(problem NAME)") if len(root) > 1 else None
    if header is None or len(header) != 2 or _word(header[0], "'problem'") != "problem":
        raise PDDLSyntaxError("expected (problem NAME)", *_loc(root))
    name = _word(header[1], "a problem name")

    domain_name = None
    objects: dict[str, str] = {}
    init_nodes: list = []
    goal_node = None
    for section in root[2:]:
        head = _section_head(section)
        if head == ":domain":
            domain_name = _word(section[1], "a domain name")
        elif head == ":objects":
            for obj, t, tok in _typed_list(section[1:], variables=False):
                if t != ROOT_TYPE and t not in domain.types:
                    raise PDDLSemanticError(f"object {obj!r} has unknown type {t!r} (line {tok.line})")
                if obj in objects:
                    raise PDDLSemanticError(f"object {obj!r} declared twice")
                objects[obj] = t
        elif head == ":init":
            init_nodes = list(section[1:])
        elif head == ":goal":
            goal_node = section[1] if len(section) > 1 else None
        elif head == ":requirements":
            for tok in section[1:]:
                if _word(tok, "a requirement") not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedRequirementError(tok.value, *_loc(tok))
        elif head in _UNSUPPORTED_SECTIONS or head == ":metric":
            raise UnsupportedRequirementError(head, *_loc(section))
        else:
            raise PDDLSyntaxError(f"unknown problem section {head!r}", *_loc(section))
    if domain_name is None:
        raise PDDLSemanticError("problem does not name its domain")
    if domain_name != domain.name:
        raise PDDLSemanticError(f"problem is for domain {domain_name!r}, not {domain.name!r}")

    init = set()
    for node in init_nodes:
        node = _list(node, "an init atom")
        head = _word(node[0], "a predicate") if node else ""
        if head == "not":
            raise UnsupportedRequirementError("negative init literal", *_loc(node))
        lits = _parse_formula(node, allow_negative=False, context="init")
        for lit, src in lits:
            _check_ground(lit, domain, objects, src)
            init.add(lit.atom)
    goal = set()
    if goal_node is not None:
        for lit, src in _parse_formula(goal_node, allow_negative=True, context="goal"):
            _check_ground(lit, domain, objects, src)
            goal.add(lit)
    return Problem(name, domain_name, objects, frozenset(init), frozenset(goal))


def _check_ground(lit: Literal, domain: Domain, objects: dict[str, str], src) -> None:
    pdef = domain.predicates.get(lit.predicate)
    if pdef is None:
        raise PDDLSemanticError(f"unknown predicate {lit.predicate!r} (line {src.line})")
    if pdef.arity != len(lit.args):
        raise PDDLSemanticError(f"{lit} has wrong arity (line {src.line})")
    for arg, slot in zip(lit.args, pdef.param_types):
        if arg not in objects:
            raise PDDLSemanticError(f"undeclared object {arg!r} in {lit} (line {src.line})")
        if not domain.is_subtype(objects[arg], slot):
            raise PDDLSemanticError(f"{lit}: object {arg!r} is not a {slot} (line {src.line})")


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


def _lit_key(lit: Literal):
    return (lit.predicate, lit.args, not lit.positive)


def _conjunction(lits: Iterable[Literal]) -> str:
    parts = [str(lit) for lit in sorted(lits, key=_lit_key)]
    return "(and" + "".join(" " + p for p in parts) + ")"


def _typed(names: Iterable[tuple[str, str]], typing: bool) -> str:
    if not typing:
        return " ".join(n for n, _ in names)
    return " ".join(f"{n} - {t}" for n, t in names)


def required_requirements(domain: Domain) -> frozenset[str]:
    reqs = {":strips"}
    if domain.types or any(t != ROOT_TYPE for p in domain.predicates.values() for t in p.param_types):
        reqs.add(":typing")
    if any(not lit.positive for a in domain.actions.values() for lit in a.pre):
        reqs.add(":negative-preconditions")
    return frozenset(reqs)


def emit_domain(domain: Domain) -> str:
    """Deterministic PDDL text for ``domain`` (sorted predicates, actions, literals)."""
    reqs = sorted(domain.requirements | required_requirements(domain))
    typing = ":typing" in reqs
    lines = [f"(define (domain {domain.name})", f"  (:requirements {' '.join(reqs)})"]
    if domain.types:
        by_parent: dict[str, list[str]] = {}
        for child, parent in domain.types.items():
            by_parent.setdefault(parent, []).append(child)
        groups = [f"{' '.join(sorted(kids))} - {parent}" for parent, kids in sorted(by_parent.items())]
        lines.append(f"  (:types {' '.join(groups)})")
    lines.append("  (:predicates")
    for pname in sorted(domain.predicates):
        pdef = domain.predicates[pname]
        params = _typed(((f"?a{i + 1}", t) for i, t in enumerate(pdef.param_types)), typing)
        lines.append(f"    ({pname}{' ' + params if params else ''})")
    lines[-1] += ")"
    for aname in sorted(domain.actions):
        a = domain.actions[aname]
        lines.append(f"  (:action {a.name}")
        lines.append(f"    :parameters ({_typed(a.params, typing)})")
        lines.append(f"    :precondition {_conjunction(a.pre)}")
        lines.append(f"    :effect {_conjunction(a.eff)})")
    lines[-1] += ")"
    return "\n".join(lines) + "\n"


def emit_problem(problem: Problem, typing: bool = True) -> str:
    by_type: dict[str, list[str]] = {}
    for obj, t in problem.objects.items():
        by_type.setdefault(t, []).append(obj)
    objs = " ".join(f"{' '.join(sorted(v))}" + (f" - {t}" if typing else "")
                    for t, v in sorted(by_type.items()))
    init = " ".join("(" + " ".join(a) + ")" for a in sorted(problem.init))
    lines = [f"(define (problem {problem.name})", f"  (:domain {problem.domain_name})",
             f"  (:objects {objs})", f"  (:init {init})"]
    lines.append(f"  (:goal {_conjunction(problem.goal)}))")
    return "\n".join(lines) + "\n"


def load_domain(path) -> Domain:
    with open(path, encoding="utf-8") as fh:
        return parse_domain(fh.read())


def load_problem(path, domain: Domain) -> Problem:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read(), domain)

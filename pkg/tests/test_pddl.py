import pytest
from hypothesis import given, settings, strategies as st

from stripslearn.pddl import (
    ActionSchema, Domain, Literal, PDDLSemanticError, PDDLSyntaxError, PredicateDef,
    UnsupportedRequirementError, emit_domain, emit_problem, parse_domain, parse_problem,
)

from conftest import DATA

TINY = """
(define (domain tiny)
  (:requirements :strips :typing)
  (:types block)
  (:predicates (on ?x - block ?y - block) (clear ?x - block))
  (:action move
    :parameters (?a - block ?b - block)
    :precondition (and (clear ?a) (clear ?b))
    :effect (and (on ?a ?b) (not (clear ?b)))))
"""


def test_parse_tiny():
    d = parse_domain(TINY)
    assert d.name == "tiny"
    assert d.predicates["on"] == PredicateDef("on", ("block", "block"))
    move = d.actions["move"]
    assert move.variables == ("?a", "?b")
    assert Literal("on", ("?a", "?b")) in move.eff
    assert Literal("clear", ("?b",), False) in move.eff


@pytest.mark.parametrize("name", ["blocksworld.pddl", "zenotravel.pddl", "depots.pddl",
                                  "zenotravel-learned-anchor.pddl"])
def test_bundled_domains_round_trip(name):
    d = parse_domain((DATA / name).read_text())
    assert parse_domain(emit_domain(d)) == d


def test_emit_is_deterministic(bw):
    assert emit_domain(bw) == emit_domain(parse_domain(emit_domain(bw)))


def test_problem_round_trip(bw, bw_train):
    assert len(bw_train.objects) == 13
    again = parse_problem(emit_problem(bw_train), bw)
    assert again.init == bw_train.init and again.objects == bw_train.objects


def test_case_insensitive():
    d = parse_domain(TINY.upper().replace("?A", "?a"))
    assert "move" in d.actions


@pytest.mark.parametrize("req", [":adl", ":conditional-effects", ":equality", ":fluents"])
def test_unsupported_requirement(req):
    with pytest.raises(UnsupportedRequirementError) as exc:
        parse_domain(TINY.replace(":typing", f":typing {req}"))
    assert exc.value.line > 0


@pytest.mark.parametrize("formula", ["(or (clear ?a) (clear ?b))", "(forall (?z) (clear ?z))",
                                     "(= ?a ?b)"])
def test_unsupported_formula(formula):
    with pytest.raises(UnsupportedRequirementError):
        parse_domain(TINY.replace("(and (clear ?a) (clear ?b))", formula))


def test_syntax_error_has_location():
    with pytest.raises(PDDLSyntaxError) as exc:
        parse_domain(TINY.rstrip().rstrip(")"))
    assert exc.value.line >= 1


def test_negative_precondition_needs_requirement():
    text = TINY.replace("(and (clear ?a) (clear ?b))", "(and (clear ?a) (not (on ?a ?b)))")
    with pytest.raises(UnsupportedRequirementError):
        parse_domain(text)
    d = parse_domain(text.replace(":typing", ":typing :negative-preconditions"))
    assert Literal("on", ("?a", "?b"), False) in d.actions["move"].pre


def test_scope_violation():
    with pytest.raises(PDDLSemanticError):
        parse_domain(TINY.replace("(on ?a ?b)", "(on ?a ?c)"))


def test_contradictory_effects():
    with pytest.raises(PDDLSemanticError):
        parse_domain(TINY.replace("(not (clear ?b))", "(not (on ?a ?b))"))


def test_problem_rejects_unknown_object(bw):
    text = "(define (problem p) (:domain blocksworld) (:objects a) (:init (clear z)) (:goal (and)))"
    with pytest.raises(PDDLSemanticError):
        parse_problem(text, bw)


def test_problem_rejects_negative_init(bw):
    text = "(define (problem p) (:domain blocksworld) (:objects a) (:init (not (clear a))) (:goal (and)))"
    with pytest.raises(Exception):
        parse_problem(text, bw)


names = st.sampled_from(["p", "q", "r", "s"])


@st.composite
def strips_domains(draw):
    arity = {n: draw(st.integers(0, 2)) for n in ["p", "q", "r", "s"]}
    preds = {n: PredicateDef(n, ("object",) * a) for n, a in arity.items()}
    actions = {}
    for i in range(draw(st.integers(1, 3))):
        k = draw(st.integers(0, 3))
        vars_ = tuple(f"?v{j}" for j in range(k))

        def lits(positive_only):
            out = {}
            for _ in range(draw(st.integers(0, 4))):
                n = draw(names)
                if arity[n] and not k:
                    continue
                args = tuple(draw(st.sampled_from(vars_)) for _ in range(arity[n]))
                pos = True if positive_only else draw(st.booleans())
                out[(n, args)] = Literal(n, args, pos)
            return frozenset(out.values())

        actions[f"a{i}"] = ActionSchema(f"a{i}", tuple((v, "object") for v in vars_),
                                        lits(False), lits(False))
    return Domain("gen", frozenset({":strips", ":negative-preconditions"}), {}, preds, actions)


@settings(max_examples=60, deadline=None)
@given(strips_domains())
def test_emit_parse_round_trip(d):
    again = parse_domain(emit_domain(d))
    assert again.actions == d.actions
    assert again.predicates == d.predicates

import random

import pytest
from hypothesis import given, settings, strategies as st

from fleetplan.ltl import (
    TOP,
    Alphabet,
    AlphabetMismatch,
    And,
    Atom,
    Eventually,
    FormulaSyntaxError,
    Next,
    Not,
    NotCoSafe,
    Or,
    Prop,
    Trace,
    Until,
    UnknownProposition,
    accepts_empty,
    atoms_of,
    evaluate,
    format_formula,
    formula_from_json,
    formula_to_json,
    is_normalized,
    normalize_co_safe,
    parse,
)
from oracles import TraceUniverse, enumerate_traces, random_co_safe

AB = Alphabet.of_names("a", "b", "c")
A, B, C = (Atom(AB[n]) for n in "abc")


# --- parsing ---------------------------------------------------------------

def test_parse_single_operator():
    assert parse("F a", AB) == Eventually(A)


def test_parse_nested_eventually_task_pattern():
    assert parse("F (a & F b)", AB) == Eventually(And(A, Eventually(B)))


def test_parse_precedence_until_or():
    assert parse("a U b | c", AB) == Or(Until(A, B), C)


def test_parse_precedence_ladder():
    f = parse("!a & X b U c | T", AB)
    assert f == Or(And(Not(A), Until(Next(B), C)), TOP)


def test_parse_until_right_associative():
    assert parse("a U b U c", AB) == Until(A, Until(B, C))


def test_parse_unknown_prop_offset():
    with pytest.raises(UnknownProposition) as err:
        parse("F (a & zz)", AB)
    assert err.value.name == "zz"
    assert err.value.offset == 7


def test_parse_syntax_error_offset():
    with pytest.raises(FormulaSyntaxError) as err:
        parse("a & & b", AB)
    assert err.value.offset == 4
    with pytest.raises(FormulaSyntaxError):
        parse("(a", AB)
    with pytest.raises(FormulaSyntaxError):
        parse("a @ b", AB)


def _formulas(depth=4):
    leaf = st.sampled_from([A, B, C, TOP])
    def extend(children):
        return st.one_of(
            st.builds(Not, children),
            st.builds(Next, children),
            st.builds(Eventually, children),
            st.builds(And, children, children),
            st.builds(Or, children, children),
            st.builds(Until, children, children),
        )
    return st.recursive(leaf, extend, max_leaves=12)


@given(_formulas())
@settings(max_examples=200, deadline=None)
def test_roundtrip_parse_format(f):
    assert parse(format_formula(f), AB) == f


def test_parse_agrees_with_independent_oracle():
    # second opinion: a hand-rolled shunting-yard style parser
    def oracle_parse(text):
        tokens = []
        i = 0
        while i < len(text):
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            if ch.isalnum() or ch == "_":
                j = i
                while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                tokens.append(text[i:j])
                i = j
            else:
                tokens.append(ch)
                i += 1
        pos = [0]

        def peek():
            return tokens[pos[0]] if pos[0] < len(tokens) else None

        def take():
            tok = peek()
            pos[0] += 1
            return tok

        def level_or():
            f = level_and()
            while peek() == "|":
                take()
                f = Or(f, level_and())
            return f

        def level_and():
            f = level_until()
            while peek() == "&":
                take()
                f = And(f, level_until())
            return f

        def level_until():
            f = unary()
            if peek() == "U":
                take()
                return Until(f, level_until())
            return f

        def unary():
            tok = take()
            if tok == "!":
                return Not(unary())
            if tok == "X":
                return Next(unary())
            if tok == "F":
                return Eventually(unary())
            if tok == "T":
                return TOP
            if tok == "(":
                f = level_or()
                assert take() == ")"
                return f
            return Atom(AB[tok])

        out = level_or()
        assert pos[0] == len(tokens)
        return out

    rng = random.Random(9)
    for _ in range(50):
        f = random_co_safe(rng, AB, depth=4)
        text = format_formula(f)
        assert parse(text, AB) == oracle_parse(text)


# --- normalization -----------------------------------------------------------

def test_normalize_de_morgan():
    assert normalize_co_safe(Not(And(A, B))) == Or(Not(A), Not(B))
    assert normalize_co_safe(Not(Or(A, B))) == And(Not(A), Not(B))


def test_normalize_fixpoint():
    f = Eventually(A)
    assert normalize_co_safe(f) == f
    assert normalize_co_safe(Not(Not(A))) == A


def test_normalize_rejects_negated_eventually():
    with pytest.raises(NotCoSafe) as err:
        normalize_co_safe(Not(Eventually(A)))
    assert err.value.path == (0,)


def test_normalize_rejects_negated_next_until_top():
    for bad in (Not(Next(A)), Not(Until(A, B)), Not(TOP)):
        with pytest.raises(NotCoSafe):
            normalize_co_safe(bad)


def test_not_co_safe_reports_subtree_path():
    f = And(A, Or(B, Not(Until(A, B))))
    with pytest.raises(NotCoSafe) as err:
        normalize_co_safe(f)
    assert err.value.path == (1, 1, 0)


@given(_formulas())
@settings(max_examples=150, deadline=None)
def test_normalization_preserves_semantics(f):
    try:
        g = normalize_co_safe(f)
    except NotCoSafe:
        return
    assert is_normalized(g)
    for trace in enumerate_traces(["a", "b"], 3):
        assert evaluate(f, trace) == evaluate(g, trace)


# --- semantics ----------------------------------------------------------------

def test_evaluate_examples():
    assert evaluate(parse("F a", AB), Trace.of(set(), {"a"})) is True
    assert evaluate(parse("X a", AB), Trace.of({"a"})) is False  # no successor position
    assert evaluate(parse("a U b", AB), Trace.of({"a"}, {"a"}, {"b"})) is True
    assert evaluate(parse("a U b", AB), Trace.of({"a"}, {"a"})) is False


def test_evaluate_until_against_brute_force():
    f = parse("a U b", AB)

    def brute(trace):
        steps = trace.steps
        for j in range(len(steps)):
            if "b" in steps[j]:
                return True
            if "a" not in steps[j]:
                return False
        return False

    for trace in enumerate_traces(["a", "b"], 4):
        assert evaluate(f, trace) == brute(trace)


def test_empty_trace_satisfies_only_top_closure():
    empty = Trace.of()
    assert evaluate(TOP, empty)
    assert evaluate(And(TOP, TOP), empty)
    assert evaluate(Or(A, TOP), empty)
    for f in (A, Not(A), Next(TOP), Eventually(TOP), Until(TOP, TOP)):
        assert not evaluate(f, empty)
    assert accepts_empty(Or(TOP, A)) and not accepts_empty(Eventually(TOP))


def test_prefix_closure_of_satisfaction():
    # once a co-safe formula holds, any extension still holds
    rng = random.Random(3)
    names = ["a", "b"]
    symbols = [frozenset(), frozenset({"a"}), frozenset({"b"}), frozenset({"a", "b"})]
    for _ in range(40):
        f = random_co_safe(rng, AB, depth=3)
        for trace in enumerate_traces(names, 3):
            if evaluate(f, trace):
                for extra in symbols:
                    extended = Trace(trace.steps + (extra,))
                    assert evaluate(f, extended), (format_formula(f), trace, extra)


def test_vectorized_oracle_matches_evaluate():
    rng = random.Random(17)
    ab2 = Alphabet.of_names("a", "b")
    universe = TraceUniverse(["a", "b"], 3)
    for _ in range(30):
        f = random_co_safe(rng, ab2, depth=3)
        expected = {t for t in enumerate_traces(["a", "b"], 3) if evaluate(f, t)}
        assert universe.satisfying(f) == expected


def test_alphabet_mismatch():
    other = Alphabet.of_names("z")
    with pytest.raises(AlphabetMismatch):
        evaluate(parse("F a", AB), Trace.of({"a"}), alphabet=other)
    with pytest.raises(AlphabetMismatch):
        evaluate(Atom(Prop("zz")), Trace.of({"a"}), alphabet=AB)


# --- serialization ---------------------------------------------------------------

@given(_formulas())
@settings(max_examples=100, deadline=None)
def test_json_roundtrip(f):
    assert formula_from_json(formula_to_json(f), AB) == f


def test_props_and_alphabet_validation():
    with pytest.raises(ValueError):
        Prop("")
    with pytest.raises(ValueError):
        Prop("x", kind="weird")
    with pytest.raises(ValueError):
        Prop("x", kind="composite")  # needs a child
    with pytest.raises(ValueError):
        Alphabet([Prop("a"), Prop("a")])
    assert atoms_of(parse("F (a & F b)", AB)) == frozenset({"a", "b"})

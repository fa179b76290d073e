import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from javagen import random_method
from sfgloc.errors import LexError, ParseError, SfglocError, UnresolvedName, UnsupportedConstruct
from sfgloc.frontend import VarType, parse_method, print_method, resolve_types, tokenize
from sfgloc.frontend import ast as A
from sfgloc.frontend.ast import dump, to_tree


def test_tokenize_simple_declaration():
    s = tokenize("int a = 0;")
    assert s.texts == ["int", "a", "=", "0", ";"]
    assert [t.kind for t in s] == ["keyword", "identifier", "operator", "literal", "punctuation"]


def test_tokenize_empty():
    assert len(tokenize("")) == 0


def test_illegal_character_reports_column():
    with pytest.raises(LexError) as info:
        tokenize("int @@ x")
    assert (info.value.line, info.value.col) == (1, 5)


def test_comments_go_to_their_own_channel():
    s = tokenize("/** Adds one. */ int f(int x) { // bump\n return x + 1; }")
    assert "Adds" not in s.texts
    assert s.comment_text == "Adds one. bump"


def test_lines_and_columns():
    s = tokenize("int a;\n  a = 1;")
    assert [(t.line, t.col) for t in s][:4] == [(1, 1), (1, 5), (1, 6), (2, 3)]


def test_spans_reproduce_the_source():
    src = 'void f(int a) {\n  String s = "x y";\n  a += 1; // note\n}\n'
    s = tokenize(src)
    pieces = sorted([(t.start, t.end) for t in s] + [(c.start, c.end) for c in s.comments])
    rebuilt, pos = [], 0
    for a, b in pieces:
        gap = src[pos:a]
        assert gap.strip() == ""
        rebuilt += [gap, src[a:b]]
        pos = b
    assert "".join(rebuilt) + src[pos:] == src


def test_minimal_method():
    m = parse_method("void f(){ int a = 0; }")
    assert isinstance(m, A.MethodDecl)
    assert [type(s) for s in m.body.stmts] == [A.VarDecl]


def test_if_else_structure():
    m = parse_method("void f(){ if (x) { y = 1; } else { y = 2; } }")
    (s,) = m.body.stmts
    assert isinstance(s, A.If) and isinstance(s.then, A.Block) and isinstance(s.orelse, A.Block)


@pytest.mark.parametrize("src", [
    "void f(){ try {} catch(Exception e) {} }",
    "void f(){ synchronized (this) { } }",
    "void f(){ Runnable r = () -> 1; }",
    "void f(){ outer: while (true) { } }",
    "void f(){ List<String> xs; }",
])
def test_out_of_subset_constructs_are_rejected(src):
    with pytest.raises(UnsupportedConstruct):
        parse_method(src)


def test_syntax_error():
    with pytest.raises(ParseError):
        parse_method("void f() { int a = ; }")


def test_unresolved_use():
    with pytest.raises(UnresolvedName) as info:
        resolve_types(parse_method("void f(){ String s; s = t; }"))
    assert info.value.name == "t"


def _types(src):
    return {o.name: o.var_type for o in resolve_types(parse_method(src)).occurrences}


def test_user_defined_and_array_types():
    t = _types("void f(){ Foo a; int[] xs; String[][] grid; java.util.List l; }")
    assert t == {"a": VarType.USER_DEFINED, "xs": VarType.ARRAY, "grid": VarType.ARRAY, "l": VarType.LIST}


def test_twenty_variable_types():
    assert len(VarType) == 20


def test_shadowing_picks_innermost():
    typed = resolve_types(parse_method("void f(int a){ { long a; a = 1; } a = 2; }"))
    kinds = [(o.name, o.var_type, o.decl.kind) for o in typed.occurrences if not o.is_declaration]
    assert kinds == [("a", VarType.LONG, "local"), ("a", VarType.INT, "param")]


def test_parent_links():
    m = parse_method("void f(int a){ while (a > 0) { a = a - 1; } }")
    for node in m.walk():
        for c in node.children():
            assert c.parent is node


def test_ast_dump_forms():
    m = parse_method("void f(int a){ return a; }")
    assert dump(m).splitlines()[0].startswith("MethodDecl name='f'")
    tree = to_tree(m)
    assert tree["kind"] == "MethodDecl" and tree["children"][-1]["kind"] == "Block"


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10**6))
def test_print_parse_round_trip(seed):
    ast = parse_method(random_method(seed))
    assert parse_method(print_method(ast)) == ast


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_every_name_has_one_type(seed):
    typed = resolve_types(parse_method(random_method(seed)))
    offsets = [o.span.start for o in typed.occurrences]
    assert len(offsets) == len(set(offsets))
    assert all(isinstance(o.var_type, VarType) for o in typed.occurrences)


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=80))
def test_arbitrary_bytes_never_crash(data):
    text = data.decode("utf-8", errors="replace")
    try:
        resolve_types(parse_method(text))
    except SfglocError:
        pass


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(["void", "f", "(", ")", "{", "}", "int", "a", "=", "1", ";", "if", "while",
                                 "else", "for", ":", "switch", "case", "default", "+", "[", "]", ".", ","]),
                max_size=30))
def test_token_soup_never_crashes(toks):
    try:
        parse_method(" ".join(toks))
    except SfglocError:
        pass

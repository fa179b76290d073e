"""Name resolution and variable typing."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from ..errors import UnresolvedName
from . import ast as A


class VarType(str, enum.Enum):
    BYTE = "byte"
    SHORT = "short"
    INT = "int"
    LONG = "long"
    FLOAT = "float"
    DOUBLE = "double"
    BOOLEAN = "boolean"
    CHAR = "char"
    STRING = "String"
    INTEGER = "Integer"
    LONG_BOX = "Long"
    DOUBLE_BOX = "Double"
    BOOLEAN_BOX = "Boolean"
    CHARACTER = "Character"
    OBJECT = "Object"
    LIST = "List"
    MAP = "Map"
    SET = "Set"
    ARRAY = "Array"
    USER_DEFINED = "UserDefined"

    def __str__(self):
        return self.value


_BY_NAME = {t.value: t for t in VarType if t not in (VarType.ARRAY, VarType.USER_DEFINED)}
_QUALIFIED = {
    "java.lang.String": "String", "java.lang.Integer": "Integer", "java.lang.Long": "Long",
    "java.lang.Double": "Double", "java.lang.Boolean": "Boolean", "java.lang.Character": "Character",
    "java.lang.Object": "Object", "java.util.List": "List", "java.util.Map": "Map",
    "java.util.Set": "Set",
}


def var_type_of(ref: Optional[A.TypeRef]) -> VarType:
    """Map a declared type to one of the 20 variable types."""
    if ref is None:
        return VarType.USER_DEFINED
    if ref.dims > 0:
        return VarType.ARRAY
    name = _QUALIFIED.get(ref.name, ref.name)
    return _BY_NAME.get(name, VarType.USER_DEFINED)


@dataclass(frozen=True)
class Declaration:
    name: str
    var_type: VarType
    kind: str  # param | local | foreach | implicit
    span: Optional[A.Span] = None  # name span of the declarator; None for implicit


@dataclass(frozen=True)
class Occurrence:
    """One textual occurrence of a variable, declaration sites included."""

    name: str
    span: A.Span
    decl: Declaration
    node: A.Node  # Name, VarDecl, Param or Foreach
    is_declaration: bool

    @property
    def var_type(self):
        return self.decl.var_type


@dataclass
class TypedAst:
    method: A.MethodDecl
    occurrences: list = field(default_factory=list)
    type_names: set = field(default_factory=set)  # offsets of names used as class qualifiers
    constants: set = field(default_factory=set)  # offsets of unresolved case labels

    def occurrence_at(self, offset) -> Optional[Occurrence]:
        return self._by_offset.get(offset)

    def __post_init__(self):
        self._by_offset = {o.span.start: o for o in self.occurrences}

    def index(self):
        self._by_offset = {o.span.start: o for o in self.occurrences}
        return self


class _Resolver:
    def __init__(self, strict: bool):
        self.strict = strict
        self.scopes: list[dict] = [{}]
        self.implicit: dict = {}
        self.out = TypedAst(method=None)

    def lookup(self, name):
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        return None

    def declare(self, name, ref, kind, span, node):
        decl = Declaration(name, var_type_of(ref), kind, span)
        self.scopes[-1][name] = decl
        self.out.occurrences.append(Occurrence(name, span, decl, node, True))
        return decl

    def push(self):
        self.scopes.append({})

    def pop(self):
        self.scopes.pop()

    # -- expressions -----------------------------------------------------

    def expr(self, e, qualifier=False, case_label=False):
        if e is None:
            return
        if isinstance(e, A.Name):
            decl = self.lookup(e.id)
            if decl is None:
                if qualifier:
                    self.out.type_names.add(e.span.start)
                    return
                if case_label:
                    self.out.constants.add(e.span.start)
                    return
                if self.strict:
                    raise UnresolvedName(e.id, e.span.line, e.span.col)
                decl = self.implicit.get(e.id)
                if decl is None:
                    decl = Declaration(e.id, VarType.USER_DEFINED, "implicit", None)
                    self.implicit[e.id] = decl
            self.out.occurrences.append(Occurrence(e.id, e.span, decl, e, False))
        elif isinstance(e, A.Call):
            self.expr(e.target, qualifier=True)
            for a in e.args:
                self.expr(a)
        elif isinstance(e, A.FieldAccess):
            self.expr(e.target, qualifier=True)
        else:
            for c in e.children():
                if isinstance(c, A.Expr):
                    self.expr(c)

    # -- statements ------------------------------------------------------

    def stmt(self, s):
        if isinstance(s, A.Block):
            self.push()
            for c in s.stmts:
                self.stmt(c)
            self.pop()
        elif isinstance(s, A.VarDecl):
            self.expr(s.init)
            self.declare(s.name, s.type, "local", s.name_span, s)
        elif isinstance(s, A.Assign):
            self.expr(s.target)
            self.expr(s.value)
        elif isinstance(s, A.ExprStmt):
            self.expr(s.expr)
        elif isinstance(s, A.Return):
            self.expr(s.value)
        elif isinstance(s, A.If):
            self.expr(s.cond)
            self.scoped(s.then)
            if s.orelse is not None:
                self.scoped(s.orelse)
        elif isinstance(s, A.While):
            self.expr(s.cond)
            self.scoped(s.body)
        elif isinstance(s, A.DoWhile):
            self.scoped(s.body)
            self.expr(s.cond)
        elif isinstance(s, A.For):
            self.push()
            for i in s.init:
                self.stmt(i)
            self.expr(s.cond)
            # update is textually before the body but executes after it; scoping is the same
            for u in s.update:
                self.stmt(u)
            self.scoped(s.body)
            self.pop()
        elif isinstance(s, A.Foreach):
            self.expr(s.iterable)
            self.push()
            self.declare(s.var_name, s.var_type, "foreach", s.var_span, s)
            self.scoped(s.body)
            self.pop()
        elif isinstance(s, A.Switch):
            self.expr(s.selector)
            self.push()
            for case in s.cases:
                for label in case.labels:
                    self.expr(label, case_label=True)
                for c in case.body:
                    self.stmt(c)
            self.pop()
        elif isinstance(s, (A.Break, A.Continue)):
            pass
        else:
            raise TypeError(f"unexpected statement {s!r}")

    def scoped(self, s):
        self.push()
        self.stmt(s)
        self.pop()

    def method(self, m: A.MethodDecl):
        self.out.method = m
        for p in m.params:
            self.declare(p.name, p.type, "param", p.name_span, p)
        self.stmt(m.body)
        self.out.occurrences.sort(key=lambda o: o.span.start)
        return self.out.index()


def resolve_types(ast: A.MethodDecl, strict: bool = True) -> TypedAst:
    """Attach a VarType to every variable occurrence.

    In strict mode a use with no visible declaration raises UnresolvedName.
    Non-strict mode (used for diff fragments, which routinely reference
    fields declared elsewhere) treats such names as implicit UserDefined
    variables. Unresolved qualifiers such as ``Math`` in ``Math.max(a, b)``
    are class names in both modes, as in Java's own name classification.
    """
    return _Resolver(strict).method(ast)

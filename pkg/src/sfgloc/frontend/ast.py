"""AST node classes for the Java subset.

Equality is structural: spans and parent links are excluded from comparison,
so a re-parsed pretty-print compares equal to the original tree.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Iterator, Optional


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    line: int = 0
    col: int = 0


NO_SPAN = Span(-1, -1)


def _span():
    return field(default=NO_SPAN, compare=False, repr=False, kw_only=True)


@dataclass(eq=True)
class Node:
    span: Span = _span()
    parent: Optional["Node"] = field(default=None, compare=False, repr=False, kw_only=True)

    @property
    def kind(self):
        return type(self).__name__

    def children(self) -> Iterator["Node"]:
        for f in fields(self):
            if f.name in ("span", "parent"):
                continue
            value = getattr(self, f.name)
            if isinstance(value, Node):
                yield value
            elif isinstance(value, list):
                for v in value:
                    if isinstance(v, Node):
                        yield v

    def walk(self) -> Iterator["Node"]:
        """Pre-order traversal; children in field order, which is source order."""
        yield self
        for c in self.children():
            yield from c.walk()


@dataclass(eq=True)
class TypeRef(Node):
    name: str = ""
    dims: int = 0

    def __str__(self):
        return self.name + "[]" * self.dims


# -- expressions -----------------------------------------------------------

class Expr(Node):
    pass


@dataclass(eq=True)
class Name(Expr):
    id: str = ""


@dataclass(eq=True)
class Literal(Expr):
    text: str = ""


@dataclass(eq=True)
class Binary(Expr):
    op: str = ""
    left: Expr = None
    right: Expr = None


@dataclass(eq=True)
class Unary(Expr):
    op: str = ""
    operand: Expr = None
    prefix: bool = True


@dataclass(eq=True)
class Call(Expr):
    target: Optional[Expr] = None
    name: str = ""
    args: list = field(default_factory=list)


@dataclass(eq=True)
class FieldAccess(Expr):
    target: Expr = None
    name: str = ""


@dataclass(eq=True)
class ArrayAccess(Expr):
    array: Expr = None
    index: Expr = None


@dataclass(eq=True)
class Cast(Expr):
    type: TypeRef = None
    operand: Expr = None


@dataclass(eq=True)
class New(Expr):
    type: TypeRef = None
    args: list = field(default_factory=list)
    dims: list = field(default_factory=list)
    extra_dims: int = 0

    @property
    def is_array(self):
        return bool(self.dims) or self.extra_dims > 0


# -- statements ------------------------------------------------------------

class Stmt(Node):
    pass


@dataclass(eq=True)
class Param(Node):
    type: TypeRef = None
    name: str = ""
    name_span: Span = _span()


@dataclass(eq=True)
class Block(Stmt):
    stmts: list = field(default_factory=list)


@dataclass(eq=True)
class VarDecl(Stmt):
    type: TypeRef = None
    name: str = ""
    init: Optional[Expr] = None
    name_span: Span = _span()


@dataclass(eq=True)
class Assign(Stmt):
    target: Expr = None
    op: str = "="
    value: Expr = None


@dataclass(eq=True)
class If(Stmt):
    cond: Expr = None
    then: Stmt = None
    orelse: Optional[Stmt] = None
    else_span: Span = _span()


@dataclass(eq=True)
class While(Stmt):
    cond: Expr = None
    body: Stmt = None


@dataclass(eq=True)
class DoWhile(Stmt):
    body: Stmt = None
    cond: Expr = None
    while_span: Span = _span()


@dataclass(eq=True)
class For(Stmt):
    init: list = field(default_factory=list)
    cond: Optional[Expr] = None
    update: list = field(default_factory=list)
    body: Stmt = None
    update_span: Span = _span()


@dataclass(eq=True)
class Foreach(Stmt):
    var_type: TypeRef = None
    var_name: str = ""
    iterable: Expr = None
    body: Stmt = None
    var_span: Span = _span()


@dataclass(eq=True)
class SwitchCase(Node):
    labels: list = field(default_factory=list)
    is_default: bool = False
    body: list = field(default_factory=list)


@dataclass(eq=True)
class Switch(Stmt):
    selector: Expr = None
    cases: list = field(default_factory=list)


@dataclass(eq=True)
class Break(Stmt):
    pass


@dataclass(eq=True)
class Continue(Stmt):
    pass


@dataclass(eq=True)
class Return(Stmt):
    value: Optional[Expr] = None


@dataclass(eq=True)
class ExprStmt(Stmt):
    expr: Expr = None


@dataclass(eq=True)
class MethodDecl(Node):
    name: str = ""
    return_type: Optional[TypeRef] = None  # None means void
    modifiers: list = field(default_factory=list)
    params: list = field(default_factory=list)
    throws: list = field(default_factory=list)
    body: Block = None


CONTROL_KINDS = (If, While, DoWhile, For, Foreach, Switch)


def link_parents(root: Node) -> Node:
    for node in root.walk():
        for child in node.children():
            child.parent = node
    return root


def _attrs(node: Node) -> dict:
    out = {}
    for f in fields(node):
        if f.name in ("span", "parent"):
            continue
        v = getattr(node, f.name)
        if isinstance(v, (Node, Span)) or (isinstance(v, list) and v and all(isinstance(x, Node) for x in v)):
            continue
        out[f.name] = str(v) if isinstance(v, TypeRef) else v
    return out


def to_tree(node: Node) -> dict:
    """Nested plain-data form of a tree: kind, scalar fields, span and children."""
    d = {"kind": node.kind, **_attrs(node), "span": [node.span.line, node.span.col]}
    kids = [to_tree(c) for c in node.children()]
    if kids:
        d["children"] = kids
    return d


def dump(node: Node, depth: int = 0) -> str:
    """Indented one-node-per-line rendering."""
    attrs = " ".join(f"{k}={v!r}" for k, v in _attrs(node).items() if v not in (None, [], ""))
    line = "  " * depth + node.kind + (f" {attrs}" if attrs else "") + f" @{node.span.line}:{node.span.col}\n"
    return line + "".join(dump(c, depth + 1) for c in node.children())

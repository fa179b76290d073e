"""Role assignment from (AST parent kind, child position)."""
from __future__ import annotations

from ..errors import InternalError
from ..frontend import ast as A
from ..frontend.resolve import Occurrence
from .model import Role

# (parent kind, field the occurrence sits in) -> role; the Assign rows also
# depend on the operator and are handled in role_of.
ROLE_TABLE = {
    ("VarDecl", "init"): Role.Initializer,
    ("Binary", "left"): Role.BinaryLeftOperand,
    ("Binary", "right"): Role.BinaryRightOperand,
    ("Unary", "operand"): Role.UnaryOperand,
    ("Call", "target"): Role.InvocationTarget,
    ("Call", "args"): Role.InvocationArgument,
    ("FieldAccess", "target"): Role.FieldTarget,
    ("ArrayAccess", "array"): Role.ArrayTarget,
    ("ArrayAccess", "index"): Role.ArrayIndex,
    ("Cast", "operand"): Role.CastOperand,
    ("New", "args"): Role.NewArgument,
    ("New", "dims"): Role.NewArgument,
    ("Return", "value"): Role.Returned,
    ("If", "cond"): Role.ConditionOperand,
    ("While", "cond"): Role.ConditionOperand,
    ("DoWhile", "cond"): Role.ConditionOperand,
    ("For", "cond"): Role.ConditionOperand,
    ("Foreach", "iterable"): Role.ForeachSourceVar,
    ("Switch", "selector"): Role.SwitchSelector,
    ("SwitchCase", "labels"): Role.CaseLabelVar,
}

DECLARATION_ROLES = {
    "VarDecl": Role.Declared,
    "Param": Role.Parameter,
    "Foreach": Role.ForeachVariable,
}


def _position(parent: A.Node, child: A.Node) -> str:
    for name, value in vars(parent).items():
        if name in ("span", "parent"):
            continue
        if value is child:
            return name
        if isinstance(value, list) and any(v is child for v in value):
            return name
    raise InternalError(f"{child.kind} not found under {parent.kind}")


def _in_for_update(unary: A.Unary) -> bool:
    stmt = unary.parent
    return (isinstance(stmt, A.ExprStmt) and isinstance(stmt.parent, A.For)
            and any(u is stmt for u in stmt.parent.update))


def role_of(occ: Occurrence) -> Role:
    node = occ.node
    if occ.is_declaration:
        return DECLARATION_ROLES[node.kind]
    parent = node.parent
    if parent is None:
        raise InternalError(f"variable {occ.name!r} has no AST parent")
    pos = _position(parent, node)
    if isinstance(parent, A.Assign):
        compound = parent.op != "="
        if pos == "target":
            return Role.CompoundAssigned if compound else Role.Assigned
        return Role.CompoundOperand if compound else Role.Assignement
    if isinstance(parent, A.Unary) and parent.op in ("++", "--") and _in_for_update(parent):
        return Role.ForUpdateOperand
    role = ROLE_TABLE.get((parent.kind, pos))
    if role is None:
        raise InternalError(f"no role for {occ.name!r} under {parent.kind}.{pos}")
    return role


def assign_roles(typed) -> dict:
    """Map every occurrence offset to its Role."""
    return {o.span.start: role_of(o) for o in typed.occurrences}

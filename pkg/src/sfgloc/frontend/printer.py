"""Pretty-printer that emits parseable Java for an AST.

Compound sub-expressions are always parenthesized; the parser drops
parentheses, so re-parsing the output gives a structurally equal tree.
"""
from __future__ import annotations

from . import ast as A

INDENT = "    "


def print_expr(e: A.Expr) -> str:
    if isinstance(e, A.Name):
        return e.id
    if isinstance(e, A.Literal):
        return e.text
    if isinstance(e, A.Binary):
        return f"{_operand(e.left)} {e.op} {_operand(e.right)}"
    if isinstance(e, A.Unary):
        inner = _operand(e.operand)
        if e.prefix:
            # keep "- -x" from fusing into "--x"
            sep = " " if inner[:1] in "+-" else ""
            return f"{e.op}{sep}{inner}"
        return f"{inner}{e.op}"
    if isinstance(e, A.Cast):
        return f"({e.type}) {_operand(e.operand)}"
    if isinstance(e, A.Call):
        args = ", ".join(print_expr(a) for a in e.args)
        if e.target is None:
            return f"{e.name}({args})"
        return f"{_postfix_target(e.target)}.{e.name}({args})"
    if isinstance(e, A.FieldAccess):
        return f"{_postfix_target(e.target)}.{e.name}"
    if isinstance(e, A.ArrayAccess):
        return f"{_postfix_target(e.array)}[{print_expr(e.index)}]"
    if isinstance(e, A.New):
        if e.is_array:
            dims = "".join(f"[{print_expr(d)}]" for d in e.dims) + "[]" * e.extra_dims
            return f"new {e.type.name}{dims}"
        return f"new {e.type.name}({', '.join(print_expr(a) for a in e.args)})"
    raise TypeError(f"not an expression: {e!r}")


def _operand(e):
    s = print_expr(e)
    if isinstance(e, (A.Binary, A.Unary, A.Cast)):
        return f"({s})"
    return s


def _postfix_target(e):
    s = print_expr(e)
    if isinstance(e, (A.Binary, A.Unary, A.Cast, A.New)):
        return f"({s})"
    return s


def _simple(s: A.Stmt) -> str:
    if isinstance(s, A.Assign):
        return f"{print_expr(s.target)} {s.op} {print_expr(s.value)}"
    if isinstance(s, A.ExprStmt):
        return print_expr(s.expr)
    if isinstance(s, A.VarDecl):
        init = f" = {print_expr(s.init)}" if s.init is not None else ""
        return f"{s.type} {s.name}{init}"
    raise TypeError(f"not a simple statement: {s!r}")


def print_stmt(s: A.Stmt, depth: int = 0) -> list[str]:
    pad = INDENT * depth
    if isinstance(s, A.Block):
        lines = [pad + "{"]
        for c in s.stmts:
            lines += print_stmt(c, depth + 1)
        return lines + [pad + "}"]
    if isinstance(s, (A.Assign, A.ExprStmt, A.VarDecl)):
        return [pad + _simple(s) + ";"]
    if isinstance(s, A.If):
        lines = [pad + f"if ({print_expr(s.cond)})"] + _body(s.then, depth)
        if s.orelse is not None:
            lines += [pad + "else"] + _body(s.orelse, depth)
        return lines
    if isinstance(s, A.While):
        return [pad + f"while ({print_expr(s.cond)})"] + _body(s.body, depth)
    if isinstance(s, A.DoWhile):
        return [pad + "do"] + _body(s.body, depth) + [pad + f"while ({print_expr(s.cond)});"]
    if isinstance(s, A.For):
        if s.init and isinstance(s.init[0], A.VarDecl):
            first = s.init[0]
            init = f"{first.type} " + ", ".join(
                d.name + (f" = {print_expr(d.init)}" if d.init is not None else "") for d in s.init)
        else:
            init = ", ".join(_simple(i) for i in s.init)
        cond = print_expr(s.cond) if s.cond is not None else ""
        update = ", ".join(_simple(u) for u in s.update)
        return [pad + f"for ({init}; {cond}; {update})"] + _body(s.body, depth)
    if isinstance(s, A.Foreach):
        return [pad + f"for ({s.var_type} {s.var_name} : {print_expr(s.iterable)})"] + _body(s.body, depth)
    if isinstance(s, A.Switch):
        lines = [pad + f"switch ({print_expr(s.selector)}) {{"]
        for case in s.cases:
            if case.is_default:
                lines.append(pad + INDENT + "default:")
            else:
                lines.append(pad + INDENT + "case " + ", ".join(print_expr(l) for l in case.labels) + ":")
            for c in case.body:
                lines += print_stmt(c, depth + 2)
        return lines + [pad + "}"]
    if isinstance(s, A.Break):
        return [pad + "break;"]
    if isinstance(s, A.Continue):
        return [pad + "continue;"]
    if isinstance(s, A.Return):
        return [pad + ("return;" if s.value is None else f"return {print_expr(s.value)};")]
    raise TypeError(f"not a statement: {s!r}")


def _body(s, depth):
    if isinstance(s, A.Block):
        return print_stmt(s, depth)
    return print_stmt(s, depth + 1)


def print_method(m: A.MethodDecl) -> str:
    mods = "".join(x + " " for x in m.modifiers)
    rtype = "void" if m.return_type is None else str(m.return_type)
    params = ", ".join(f"{p.type} {p.name}" for p in m.params)
    throws = f" throws {', '.join(m.throws)}" if m.throws else ""
    header = f"{mods}{rtype} {m.name}({params}){throws}"
    return "\n".join([header] + print_stmt(m.body)) + "\n"

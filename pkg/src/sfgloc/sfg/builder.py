"""Semantic flow graph construction.

Node ids are assigned in source order, which makes ``build_sfg`` a pure
function of its input down to the numbering.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Optional

from ..frontend import ast as A
from ..frontend.parser import parse_method
from ..frontend.resolve import TypedAst, resolve_types
from .dataflow import data_edges
from .model import CtrlType as C
from .model import EdgeKind, NodeKind, SemanticFlowGraph, SfgEdge, SfgNode
from .roles import assign_roles

_KEYWORD_LEN = {A.If: 2, A.While: 5, A.DoWhile: 2, A.For: 3, A.Foreach: 3, A.Switch: 6}


def _kw(stmt) -> A.Span:
    s = stmt.span
    return A.Span(s.start, s.start + _KEYWORD_LEN[type(stmt)], s.line, s.col)


def _stmts(s) -> list:
    if s is None:
        return []
    return list(s.stmts) if isinstance(s, A.Block) else [s]


@dataclass
class _CNode:
    ctrl_type: C
    anchor: A.Span
    order: int  # source position used for id assignment
    owner: A.Node
    id: int = -1


@dataclass
class ControlStructure:
    """The control nodes of one control statement."""

    stmt: A.Node
    condition: _CNode
    branches: list  # [(_CNode, [stmts])]
    converge: _CNode
    entry: _CNode = None

    @property
    def nodes(self):
        return [self.condition] + [b for b, _ in self.branches] + [self.converge]


def _structure(s) -> ControlStructure:
    kw, end = _kw(s), s.span.end

    def node(ct, anchor, order):
        return _CNode(ct, anchor, order, s)

    if isinstance(s, A.If):
        cond = node(C.IfCondition, kw, s.cond.span.start)
        branches = [(node(C.IfThen, kw, s.then.span.start), _stmts(s.then))]
        if s.orelse is not None:
            branches.append((node(C.IfElse, s.else_span, s.else_span.start), _stmts(s.orelse)))
        return ControlStructure(s, cond, branches, node(C.IfCONVERGE, kw, end), cond)
    if isinstance(s, A.While):
        cond = node(C.WhileCondition, kw, s.cond.span.start)
        branches = [(node(C.WhileBody, kw, s.body.span.start), _stmts(s.body))]
        return ControlStructure(s, cond, branches, node(C.WhileCONVERGE, kw, end), cond)
    if isinstance(s, A.DoWhile):
        body = node(C.DoBody, kw, s.body.span.start)
        cond = node(C.DoCondition, s.while_span, s.cond.span.start)
        return ControlStructure(s, cond, [(body, _stmts(s.body))], node(C.DoCONVERGE, kw, end), body)
    if isinstance(s, A.For):
        upos = s.update_span.start
        cond = node(C.ForCondition, kw, s.cond.span.start if s.cond is not None else upos - 1)
        update = node(C.ForUpdate, kw, upos)
        body = node(C.ForBody, kw, s.body.span.start)
        return ControlStructure(s, cond, [(body, _stmts(s.body)), (update, list(s.update))],
                                node(C.ForCONVERGE, kw, end), cond)
    if isinstance(s, A.Foreach):
        cond = node(C.ForeachSource, kw, s.iterable.span.start)
        branches = [(node(C.ForeachBody, kw, s.body.span.start), _stmts(s.body))]
        return ControlStructure(s, cond, branches, node(C.ForeachCONVERGE, kw, end), cond)
    if isinstance(s, A.Switch):
        cond = node(C.SwitchCondition, kw, s.selector.span.start)
        branches = []
        for case in s.cases:
            case_kw = A.Span(case.span.start, case.span.start + (7 if case.is_default else 4),
                             case.span.line, case.span.col)
            branches.append((node(C.SwitchCase, case_kw, case.span.start), list(case.body)))
        return ControlStructure(s, cond, branches, node(C.SwitchCONVERGE, kw, end), cond)
    raise TypeError(f"not a control statement: {s!r}")


def control_structures(method: A.MethodDecl) -> list:
    return [_structure(n) for n in method.walk() if isinstance(n, A.CONTROL_KINDS)]


def branch_count(stmt) -> int:
    """Number of branches n of a control statement (it owns n + 2 control nodes)."""
    return len(_structure(stmt).branches)


# -- node collection -------------------------------------------------------

@dataclass
class _Collected:
    typed: TypedAst
    structures: list
    nodes: list
    var_id: dict = field(default_factory=dict)  # occurrence offset -> node id


def collect_nodes(typed: TypedAst, roles: Optional[dict] = None) -> _Collected:
    """Variable nodes (one per occurrence) and control nodes (n + 2 per statement)."""
    roles = roles if roles is not None else assign_roles(typed)
    structures = control_structures(typed.method)
    items = []
    for seq, occ in enumerate(typed.occurrences):
        items.append(((occ.span.start, 1, seq), occ))
    seq = 0
    for cs in structures:
        for cn in cs.nodes:
            items.append(((cn.order, 0, seq), cn))
            seq += 1
    items.sort(key=lambda kv: kv[0])
    nodes, var_id = [], {}
    for i, (_, item) in enumerate(items):
        if isinstance(item, _CNode):
            item.id = i
            nodes.append(SfgNode(i, NodeKind.Control, item.anchor, ctrl_type=item.ctrl_type,
                                 owner=item.owner.span))
        else:
            var_id[item.span.start] = i
            nodes.append(SfgNode(i, NodeKind.Variable, item.span, name=item.name,
                                 var_type=item.var_type, role=roles[item.span.start]))
    return _Collected(typed, structures, nodes, var_id)


# -- edges -----------------------------------------------------------------

def build_data_edges(col: _Collected) -> set:
    return {SfgEdge(col.var_id[a], col.var_id[b], EdgeKind.Data) for a, b in data_edges(col.typed)}


def _statement_lists(method: A.MethodDecl):
    """Every ordered statement list in the method: blocks, branch bodies, case bodies."""
    yield method.body.stmts
    for n in method.walk():
        if isinstance(n, A.Block) and n is not method.body:
            yield n.stmts
        elif isinstance(n, A.SwitchCase):
            yield n.body
        elif isinstance(n, (A.If, A.While, A.DoWhile, A.For, A.Foreach)):
            for body in (getattr(n, "then", None), getattr(n, "orelse", None), getattr(n, "body", None)):
                if body is not None and not isinstance(body, A.Block):
                    yield [body]


def build_control_edges(col: _Collected) -> set:
    edges = set()

    def link(a, b):
        edges.add(SfgEdge(a.id, b.id, EdgeKind.Control))

    by_stmt = {id(cs.stmt): cs for cs in col.structures}
    for cs in col.structures:
        s, cond, conv = cs.stmt, cs.condition, cs.converge
        if isinstance(s, A.If):
            for b, _ in cs.branches:
                link(cond, b)
                link(b, conv)
            if s.orelse is None:
                link(cond, conv)
        elif isinstance(s, (A.While, A.Foreach)):
            body = cs.branches[0][0]
            link(cond, body)
            link(body, cond)
            link(cond, conv)
        elif isinstance(s, A.DoWhile):
            body = cs.branches[0][0]
            link(body, cond)
            link(cond, body)
            link(cond, conv)
        elif isinstance(s, A.For):
            (body, _), (update, _) = cs.branches
            link(cond, body)
            link(body, update)
            link(update, cond)
            link(cond, conv)
        elif isinstance(s, A.Switch):
            for i, (case_node, body) in enumerate(cs.branches):
                link(cond, case_node)
                link(case_node, conv)
                falls = not body or not isinstance(body[-1], (A.Break, A.Return, A.Continue))
                if falls and i + 1 < len(cs.branches):
                    link(case_node, cs.branches[i + 1][0])
            if not any(c.is_default for c in s.cases):
                link(cond, conv)

    # nesting: a branch node leads into every control statement it directly contains
    def nest(st, branch):
        if isinstance(st, A.CONTROL_KINDS):
            cs = by_stmt[id(st)]
            if branch is not None:
                link(branch, cs.entry)
            for b, stmts in cs.branches:
                for sub in stmts:
                    nest(sub, b)
        elif isinstance(st, A.Block):
            for sub in st.stmts:
                nest(sub, branch)

    nest(col.typed.method.body, None)

    # sequencing: a construct's convergence leads into the next control sibling
    for stmts in _statement_lists(col.typed.method):
        ctrl = [by_stmt[id(st)] for st in stmts if isinstance(st, A.CONTROL_KINDS)]
        for a, b in zip(ctrl, ctrl[1:]):
            link(a.converge, b.entry)
    return edges


class _Leftmost:
    def __init__(self, col: _Collected):
        self.starts = [o.span.start for o in col.typed.occurrences]
        self.col = col

    def of(self, node: A.Node) -> Optional[int]:
        """Node id of the left-most variable occurrence inside ``node``'s span."""
        s = node.span
        i = bisect.bisect_left(self.starts, s.start)
        if i < len(self.starts) and self.starts[i] < s.end:
            return self.col.var_id[self.starts[i]]
        return None

    def first(self, stmts) -> Optional[int]:
        for st in stmts:
            v = self.of(st)
            if v is not None:
                return v
        return None

    def last(self, stmts) -> Optional[int]:
        return self.first(reversed(stmts))


def _condition_exprs(s):
    if isinstance(s, (A.If, A.While, A.DoWhile, A.For)):
        return [s.cond] if s.cond is not None else []
    if isinstance(s, A.Foreach):
        return [s.iterable]
    if isinstance(s, A.Switch):
        return [s.selector]
    return []


def build_sequential_edges(col: _Collected) -> set:
    edges = set()
    lm = _Leftmost(col)
    by_stmt = {id(cs.stmt): cs for cs in col.structures}
    starts = lm.starts
    for cs in col.structures:
        # (i) condition variables -> condition node
        spans = [e.span for e in _condition_exprs(cs.stmt)]
        if isinstance(cs.stmt, A.Foreach):
            spans.append(cs.stmt.var_span)
        for sp in spans:
            i = bisect.bisect_left(starts, sp.start)
            while i < len(starts) and starts[i] < sp.end:
                edges.add(SfgEdge(col.var_id[starts[i]], cs.condition.id, EdgeKind.Sequential))
                i += 1
        for branch, stmts in cs.branches:
            # (ii) branch -> left-most variable of its first statement
            first = lm.first(stmts)
            if first is not None:
                edges.add(SfgEdge(branch.id, first, EdgeKind.Sequential))
            # (iii) left-most variable of its last statement -> convergence
            last = lm.last(stmts)
            if last is not None:
                edges.add(SfgEdge(last, cs.converge.id, EdgeKind.Sequential))
    # (iv) convergence -> left-most variable of the first following statement
    for stmts in _statement_lists(col.typed.method):
        for k, st in enumerate(stmts):
            if isinstance(st, A.CONTROL_KINDS):
                nxt = lm.first(stmts[k + 1:])
                if nxt is not None:
                    edges.add(SfgEdge(by_stmt[id(st)].converge.id, nxt, EdgeKind.Sequential))
    return edges


def build_sfg(typed, method_id: Optional[str] = None) -> SemanticFlowGraph:
    """Build the graph for a typed method (raw source text is accepted too)."""
    if isinstance(typed, str):
        typed = resolve_types(parse_method(typed))
    elif isinstance(typed, A.MethodDecl):
        typed = resolve_types(typed)
    col = collect_nodes(typed)
    edges = build_data_edges(col) | build_control_edges(col) | build_sequential_edges(col)
    ordered = tuple(sorted(edges, key=lambda e: (e.src, e.dst, e.kind.value)))
    return SemanticFlowGraph(method_id or typed.method.name, tuple(col.nodes), ordered)

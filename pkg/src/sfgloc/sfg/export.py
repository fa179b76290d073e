"""JSON (schema version 1) and Graphviz DOT serialization of graphs."""
from __future__ import annotations

import json

from ..frontend.ast import Span
from ..frontend.resolve import VarType
from .model import CtrlType, EdgeKind, NodeKind, Role, SemanticFlowGraph, SfgEdge, SfgNode

SCHEMA_VERSION = 1


def to_dict(g: SemanticFlowGraph) -> dict:
    nodes = []
    for n in g.nodes:
        d = {"id": n.id, "kind": str(n.kind)}
        if n.is_variable:
            d.update(name=n.name, varType=str(n.var_type), role=str(n.role))
        else:
            d["ctrlType"] = str(n.ctrl_type)
        d["span"] = [n.span.line, n.span.col, n.span.start, n.span.end]
        nodes.append(d)
    edges = [{"from": e.src, "to": e.dst, "kind": str(e.kind)} for e in g.edges]
    return {"version": SCHEMA_VERSION, "methodId": g.method_id, "nodes": nodes, "edges": edges}


def to_json(g: SemanticFlowGraph) -> str:
    """Canonical text form: two-space indent, nodes and edges in id order, trailing newline."""
    return json.dumps(to_dict(g), indent=2) + "\n"


def from_json(text: str) -> SemanticFlowGraph:
    d = json.loads(text)
    if d.get("version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported SFG schema version {d.get('version')!r}")
    nodes = []
    for nd in d["nodes"]:
        line, col, start, end = nd["span"]
        span = Span(start, end, line, col)
        if nd["kind"] == "Variable":
            nodes.append(SfgNode(nd["id"], NodeKind.Variable, span, name=nd["name"],
                                 var_type=VarType(nd["varType"]), role=Role(nd["role"])))
        else:
            nodes.append(SfgNode(nd["id"], NodeKind.Control, span, ctrl_type=CtrlType(nd["ctrlType"])))
    edges = tuple(SfgEdge(e["from"], e["to"], EdgeKind(e["kind"])) for e in d["edges"])
    return SemanticFlowGraph(d["methodId"], tuple(nodes), edges)


_EDGE_STYLE = {EdgeKind.Data: "solid", EdgeKind.Control: "bold", EdgeKind.Sequential: "dashed"}


def to_dot(g: SemanticFlowGraph) -> str:
    lines = [f'digraph "{g.method_id}" {{', "  node [fontname=monospace];"]
    for n in g.nodes:
        if n.is_variable:
            label = f"{n.name}\\n{n.var_type} / {n.role}"
            lines.append(f'  n{n.id} [shape=ellipse, label="{label}"];')
        else:
            lines.append(f'  n{n.id} [shape=box, label="{n.ctrl_type}"];')
    for e in g.edges:
        lines.append(f"  n{e.src} -> n{e.dst} [style={_EDGE_STYLE[e.kind]}];")
    lines.append("}")
    return "\n".join(lines) + "\n"

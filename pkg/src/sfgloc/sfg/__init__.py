"""Semantic flow graph: typed, role-labelled variable and control nodes."""
from .builder import (branch_count, build_control_edges, build_data_edges, build_sequential_edges,
                      build_sfg, collect_nodes, control_structures)
from .export import from_json, to_dot, to_json
from .model import (RESERVED_CTRL_TYPES, ROLE_VOCAB, TYPE_VOCAB, CtrlType, EdgeKind, NodeKind, Role,
                    SemanticFlowGraph, SfgEdge, SfgNode)
from .roles import assign_roles, role_of

__all__ = [
    "CtrlType", "EdgeKind", "NodeKind", "RESERVED_CTRL_TYPES", "ROLE_VOCAB", "Role",
    "SemanticFlowGraph", "SfgEdge", "SfgNode", "TYPE_VOCAB", "assign_roles", "branch_count",
    "build_control_edges", "build_data_edges", "build_sequential_edges", "build_sfg",
    "collect_nodes", "control_structures", "from_json", "role_of", "to_dot", "to_json",
]

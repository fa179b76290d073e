"""Graph data model: node/edge records and the label vocabularies."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from ..errors import InternalError
from ..frontend.ast import Span
from ..frontend.resolve import VarType


class CtrlType(str, enum.Enum):
    IfCondition = "IfCondition"
    IfThen = "IfThen"
    IfElse = "IfElse"
    IfCONVERGE = "IfCONVERGE"
    WhileCondition = "WhileCondition"
    WhileBody = "WhileBody"
    WhileCONVERGE = "WhileCONVERGE"
    DoBody = "DoBody"
    DoCondition = "DoCondition"
    DoCONVERGE = "DoCONVERGE"
    ForCondition = "ForCondition"
    ForBody = "ForBody"
    ForUpdate = "ForUpdate"
    ForCONVERGE = "ForCONVERGE"
    ForeachSource = "ForeachSource"
    ForeachBody = "ForeachBody"
    ForeachCONVERGE = "ForeachCONVERGE"
    SwitchCondition = "SwitchCondition"
    SwitchCase = "SwitchCase"
    SwitchCONVERGE = "SwitchCONVERGE"

    def __str__(self):
        return self.value


# Control-type slots for constructs outside the parsed subset. They never label
# a node but keep the type vocabulary at 20 variable + 35 control types.
RESERVED_CTRL_TYPES = (
    "TryBody", "CatchBody", "FinallyBody", "TryCONVERGE",
    "SynchronizedCondition", "SynchronizedBody", "SynchronizedCONVERGE",
    "TernaryCondition", "TernaryThen", "TernaryElse", "TernaryCONVERGE",
    "LambdaBody",
    "SwitchExprCondition", "SwitchExprCase", "SwitchExprCONVERGE",
)


class Role(str, enum.Enum):
    Assigned = "Assigned"
    Assignement = "Assignement"  # spelling kept as published
    InvocationTarget = "InvocationTarget"
    InvocationArgument = "InvocationArgument"
    BinaryLeftOperand = "BinaryLeftOperand"
    BinaryRightOperand = "BinaryRightOperand"
    UnaryOperand = "UnaryOperand"
    Returned = "Returned"
    ConditionOperand = "ConditionOperand"
    ArrayTarget = "ArrayTarget"
    ArrayIndex = "ArrayIndex"
    FieldTarget = "FieldTarget"
    Declared = "Declared"
    Initializer = "Initializer"
    Parameter = "Parameter"
    CastOperand = "CastOperand"
    NewArgument = "NewArgument"
    ForUpdateOperand = "ForUpdateOperand"
    ForeachVariable = "ForeachVariable"
    ForeachSourceVar = "ForeachSourceVar"
    SwitchSelector = "SwitchSelector"
    CaseLabelVar = "CaseLabelVar"
    CompoundAssigned = "CompoundAssigned"
    CompoundOperand = "CompoundOperand"

    def __str__(self):
        return self.value


TYPE_VOCAB: tuple = tuple(t.value for t in VarType) + tuple(c.value for c in CtrlType) + RESERVED_CTRL_TYPES
ROLE_VOCAB: tuple = tuple(r.value for r in Role)

assert len(TYPE_VOCAB) == 55 and len(set(TYPE_VOCAB)) == 55
assert len(ROLE_VOCAB) == 24


class NodeKind(str, enum.Enum):
    Variable = "Variable"
    Control = "Control"

    def __str__(self):
        return self.value


class EdgeKind(str, enum.Enum):
    Data = "Data"
    Control = "Control"
    Sequential = "Sequential"

    def __str__(self):
        return self.value


EDGE_ORDER = {EdgeKind.Data: 0, EdgeKind.Control: 1, EdgeKind.Sequential: 2}


@dataclass(frozen=True)
class SfgNode:
    id: int
    kind: NodeKind
    span: Span  # the source token the node is identified from
    name: Optional[str] = None
    var_type: Optional[VarType] = None
    role: Optional[Role] = None
    ctrl_type: Optional[CtrlType] = None
    owner: Optional[Span] = field(default=None, compare=False)  # owning statement span for control nodes

    @property
    def is_variable(self):
        return self.kind is NodeKind.Variable

    @property
    def type_label(self) -> str:
        """Label under the type mapping: VarType for variables, CtrlType otherwise."""
        return str(self.var_type if self.is_variable else self.ctrl_type)

    @property
    def symbol(self) -> str:
        return self.name if self.is_variable else str(self.ctrl_type)


@dataclass(frozen=True, order=True)
class SfgEdge:
    src: int
    dst: int
    kind: EdgeKind


@dataclass(frozen=True)
class SemanticFlowGraph:
    method_id: str
    nodes: tuple = ()
    edges: tuple = ()

    def edges_of(self, kind: EdgeKind):
        return [e for e in self.edges if e.kind is kind]

    @property
    def variable_nodes(self):
        return [n for n in self.nodes if n.is_variable]

    @property
    def control_nodes(self):
        return [n for n in self.nodes if not n.is_variable]

    def check(self):
        """Verify the structural invariants; returns self for chaining."""
        def need(ok, msg):
            if not ok:
                raise InternalError(f"{self.method_id}: {msg}")

        ids = {n.id for n in self.nodes}
        need(ids == set(range(len(self.nodes))), "node ids must be dense")
        seen = set()
        for e in self.edges:
            need(e.src in ids and e.dst in ids, f"dangling edge {e}")
            need(e not in seen, f"duplicate edge {e}")
            seen.add(e)
            a, b = self.nodes[e.src], self.nodes[e.dst]
            if e.kind is EdgeKind.Data:
                need(a.is_variable and b.is_variable, f"data edge between non-variables {e}")
            elif e.kind is EdgeKind.Control:
                need(not a.is_variable and not b.is_variable, f"control edge touching a variable {e}")
            else:
                need(a.is_variable != b.is_variable, f"sequential edge within one node kind {e}")
        for n in self.nodes:
            if n.is_variable:
                need(n.var_type is not None and n.role is not None and n.ctrl_type is None, f"bad variable node {n.id}")
            else:
                need(n.role is None and n.ctrl_type is not None, f"bad control node {n.id}")
        return self

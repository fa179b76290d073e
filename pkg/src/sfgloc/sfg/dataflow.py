"""Reaching-definitions analysis producing occurrence-level data-flow edges.

Two edge families come out of the analysis:

* inter-statement: a definition occurrence -> each later read of the same
  variable that it reaches;
* intra-statement: every variable read while computing a value -> the
  occurrence that receives that value (``b -> a`` and ``c -> a`` for
  ``a = m(b, c)``).

The analysis is a forward may-analysis with union at joins; loop heads are
iterated until the state stops growing.
"""
from __future__ import annotations

from ..frontend import ast as A
from ..frontend.resolve import TypedAst


def _join(*states):
    live = [s for s in states if s is not None]
    if not live:
        return None
    out = dict(live[0])
    for s in live[1:]:
        for k, v in s.items():
            out[k] = out.get(k, frozenset()) | v
    return out


class _Loop:
    def __init__(self, is_switch=False):
        self.is_switch = is_switch
        self.breaks = []
        self.continues = []


class ReachingDefinitions:
    def __init__(self, typed: TypedAst):
        self.typed = typed
        self.edges: set = set()  # (src offset, dst offset)
        self.ctx: list[_Loop] = []

    def occ(self, offset):
        return self.typed.occurrence_at(offset)

    # -- expressions -----------------------------------------------------

    def read(self, name: A.Name, state, reads):
        o = self.occ(name.span.start)
        if o is None:  # class qualifier or constant label
            return
        for d in state.get(o.decl, ()):
            self.edges.add((d, o.span.start))
        reads.append(o.span.start)

    def eval(self, e, state, reads):
        """Evaluate ``e`` left to right, recording reads; ++/-- update ``state``."""
        if e is None:
            return
        if isinstance(e, A.Name):
            self.read(e, state, reads)
        elif isinstance(e, A.Unary) and e.op in ("++", "--") and isinstance(e.operand, A.Name):
            self.read(e.operand, state, reads)
            o = self.occ(e.operand.span.start)
            if o is not None:
                state[o.decl] = frozenset([o.span.start])
        else:
            for c in e.children():
                if isinstance(c, A.Expr):
                    self.eval(c, state, reads)

    def flow_into(self, reads, dst):
        for r in reads:
            if r != dst:
                self.edges.add((r, dst))

    # -- statements ------------------------------------------------------

    def exec_list(self, stmts, state):
        for s in stmts:
            state = self.exec(s, state)
        return state

    def exec(self, s, state):
        if state is None:
            return None
        state = dict(state)
        if isinstance(s, A.Block):
            return self.exec_list(s.stmts, state)
        if isinstance(s, A.VarDecl):
            if s.init is not None:
                reads = []
                self.eval(s.init, state, reads)
                o = self.occ(s.name_span.start)
                self.flow_into(reads, o.span.start)
                state[o.decl] = frozenset([o.span.start])
            return state
        if isinstance(s, A.Assign):
            return self.assign(s, state)
        if isinstance(s, A.ExprStmt):
            self.eval(s.expr, state, [])
            return state
        if isinstance(s, A.Return):
            self.eval(s.value, state, [])
            return None
        if isinstance(s, A.Break):
            self.ctx[-1].breaks.append(state)
            return None
        if isinstance(s, A.Continue):
            for c in reversed(self.ctx):
                if not c.is_switch:
                    c.continues.append(state)
                    break
            return None
        if isinstance(s, A.If):
            self.eval(s.cond, state, [])
            then = self.exec(s.then, state)
            other = self.exec(s.orelse, state) if s.orelse is not None else state
            return _join(then, other)
        if isinstance(s, A.While):
            return self.loop(state, cond=s.cond, body=s.body)
        if isinstance(s, A.DoWhile):
            return self.do_loop(s, state)
        if isinstance(s, A.For):
            state = self.exec_list(s.init, state)
            return self.loop(state, cond=s.cond, body=s.body, update=s.update, cond_optional=True)
        if isinstance(s, A.Foreach):
            return self.foreach(s, state)
        if isinstance(s, A.Switch):
            return self.switch(s, state)
        raise TypeError(f"unexpected statement {s!r}")

    def assign(self, s: A.Assign, state):
        target = s.target
        if isinstance(target, A.Name):
            o = self.occ(target.span.start)
            if s.op != "=":
                self.read(target, state, [])
            reads = []
            self.eval(s.value, state, reads)
            self.flow_into(reads, o.span.start)
            state[o.decl] = frozenset([o.span.start])
            return state
        # element or field store: the root variable is read, then weakly redefined
        treads = []
        self.eval(target, state, treads)
        root = target
        while isinstance(root, (A.ArrayAccess, A.FieldAccess)):
            root = root.array if isinstance(root, A.ArrayAccess) else root.target
        vreads = []
        self.eval(s.value, state, vreads)
        ro = self.occ(root.span.start) if isinstance(root, A.Name) else None
        if ro is not None:
            self.flow_into([r for r in treads if r != ro.span.start] + vreads, ro.span.start)
            state[ro.decl] = state.get(ro.decl, frozenset()) | {ro.span.start}
        return state

    def loop(self, state, cond, body, update=(), cond_optional=False):
        entry = state
        head = state
        while True:
            frame = _Loop()
            self.ctx.append(frame)
            at_cond = dict(head)
            self.eval(cond, at_cond, [])
            out = self.exec(body, at_cond)
            self.ctx.pop()
            back = _join(out, *frame.continues)
            if update and back is not None:
                back = self.exec_list(update, back)
            new_head = _join(entry, back)
            if new_head == head:
                break
            head = new_head
        exit_state = at_cond if (cond is not None or not cond_optional) else None
        return _join(exit_state, *frame.breaks)

    def do_loop(self, s: A.DoWhile, state):
        entry = state
        head = state
        while True:
            frame = _Loop()
            self.ctx.append(frame)
            out = self.exec(s.body, head)
            self.ctx.pop()
            at_cond = _join(out, *frame.continues)
            if at_cond is not None:
                at_cond = dict(at_cond)
                self.eval(s.cond, at_cond, [])
            new_head = _join(entry, at_cond)
            if new_head == head:
                break
            head = new_head
        return _join(at_cond, *frame.breaks)

    def foreach(self, s: A.Foreach, state):
        reads = []
        self.eval(s.iterable, state, reads)
        var = self.occ(s.var_span.start)
        self.flow_into(reads, var.span.start)
        entry = state
        head = state
        while True:
            frame = _Loop()
            self.ctx.append(frame)
            inside = dict(head)
            inside[var.decl] = frozenset([var.span.start])
            out = self.exec(s.body, inside)
            self.ctx.pop()
            new_head = _join(entry, out, *frame.continues)
            if new_head == head:
                break
            head = new_head
        return _join(head, *frame.breaks)

    def switch(self, s: A.Switch, state):
        self.eval(s.selector, state, [])
        for case in s.cases:
            for label in case.labels:
                self.eval(label, state, [])
        frame = _Loop(is_switch=True)
        self.ctx.append(frame)
        fall = None
        for case in s.cases:
            fall = self.exec_list(case.body, _join(state, fall))
        self.ctx.pop()
        has_default = any(c.is_default for c in s.cases)
        return _join(fall, *frame.breaks, None if has_default else state)

    def run(self):
        state = {}
        for p in self.typed.method.params:
            o = self.occ(p.name_span.start)
            state[o.decl] = frozenset([o.span.start])
        self.exec(self.typed.method.body, state)
        return self.edges


def data_edges(typed: TypedAst) -> set:
    """Data-flow edges as (source offset, destination offset) pairs."""
    return ReachingDefinitions(typed).run()

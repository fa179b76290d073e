"""Recursive-descent parser for a single Java method declaration.

Anything outside the supported subset raises UnsupportedConstruct instead of
being skipped, so downstream graph construction never sees a partial tree.
"""
from __future__ import annotations

from typing import Optional

from ..errors import ParseError, UnsupportedConstruct
from . import ast as A
from .lexer import Token, TokenStream, tokenize

PRIMITIVES = frozenset("byte short int long float double boolean char".split())
MODIFIERS = frozenset("public private protected static final abstract native strictfp".split())
UNSUPPORTED_STMT_KEYWORDS = {
    "try": "try/catch",
    "catch": "try/catch",
    "finally": "try/catch",
    "throw": "throw",
    "synchronized": "synchronized",
    "class": "local class",
    "interface": "local interface",
    "enum": "local enum",
    "assert": "assert",
    "yield": "yield",
}

BINARY_PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "|": 3,
    "^": 4,
    "&": 5,
    "==": 6, "!=": 6,
    "<": 7, ">": 7, "<=": 7, ">=": 7,
    "<<": 8, ">>": 8, ">>>": 8,
    "+": 9, "-": 9,
    "*": 10, "/": 10, "%": 10,
}
ASSIGN_OPS = frozenset("= += -= *= /= %= &= |= ^= <<= >>= >>>=".split())

_EOF = Token("eof", "", 0, 0, -1, -1)


class Parser:
    def __init__(self, stream: TokenStream):
        self.toks = stream.tokens
        self.pos = 0
        self.source_len = len(stream.source)

    # -- token helpers ---------------------------------------------------

    def peek(self, k=0) -> Token:
        i = self.pos + k
        if i < len(self.toks):
            return self.toks[i]
        last = self.toks[-1] if self.toks else None
        if last is None:
            return _EOF
        return Token("eof", "", last.line, last.col + len(last.text), self.source_len, self.source_len)

    def at(self, text, k=0):
        t = self.peek(k)
        return t.kind != "eof" and t.kind != "literal" and t.text == text

    def next(self) -> Token:
        t = self.peek()
        if t.kind == "eof":
            raise ParseError("unexpected end of input", t.line, t.col)
        self.pos += 1
        return t

    def expect(self, text) -> Token:
        t = self.peek()
        if not self.at(text):
            shown = t.text or "end of input"
            raise ParseError(f"expected {text!r}, found {shown!r}", t.line, t.col)
        self.pos += 1
        return t

    def expect_ident(self) -> Token:
        t = self.peek()
        if t.kind != "identifier":
            if t.kind == "keyword" and t.text in UNSUPPORTED_STMT_KEYWORDS:
                raise UnsupportedConstruct(UNSUPPORTED_STMT_KEYWORDS[t.text], t.line, t.col)
            raise ParseError(f"expected identifier, found {t.text or 'end of input'!r}", t.line, t.col)
        self.pos += 1
        return t

    def prev_end(self):
        return self.toks[self.pos - 1].end

    def span_from(self, tok: Token) -> A.Span:
        return A.Span(tok.start, self.prev_end(), tok.line, tok.col)

    def unsupported(self, what, tok=None):
        tok = tok or self.peek()
        raise UnsupportedConstruct(what, tok.line, tok.col)

    # -- types -----------------------------------------------------------

    def looks_like_type_start(self):
        t = self.peek()
        return t.kind == "identifier" or (t.kind == "keyword" and t.text in PRIMITIVES | {"var"})

    def parse_type(self) -> A.TypeRef:
        first = self.peek()
        if first.kind == "keyword" and first.text in PRIMITIVES | {"var"}:
            self.pos += 1
            name = first.text
        else:
            name = self.expect_ident().text
            while self.at(".") and self.peek(1).kind == "identifier":
                self.pos += 1
                name += "." + self.next().text
        if self.at("<"):
            self.unsupported("generic type arguments")
        dims = 0
        while self.at("[") and self.at("]", 1):
            self.pos += 2
            dims += 1
        return A.TypeRef(name=name, dims=dims, span=self.span_from(first))

    def try_local_decl_type(self) -> Optional[A.TypeRef]:
        """Speculatively read ``Type ident``; restore position on failure."""
        if not self.looks_like_type_start():
            return None
        save = self.pos
        try:
            ty = self.parse_type()
        except ParseError:
            self.pos = save
            return None
        if self.peek().kind == "identifier":
            return ty
        self.pos = save
        return None

    # -- method ----------------------------------------------------------

    def parse_method(self) -> A.MethodDecl:
        start = self.peek()
        if start.kind == "eof":
            raise ParseError("empty input; expected a method declaration", 1, 1)
        modifiers = []
        while self.peek().kind == "keyword" and self.peek().text in MODIFIERS | {"synchronized"}:
            if self.peek().text == "synchronized":
                self.unsupported("synchronized")
            modifiers.append(self.next().text)
        if self.at("<"):
            self.unsupported("generic method")
        if self.at("void"):
            self.pos += 1
            rtype = None
        else:
            rtype = self.parse_type()
        name = self.expect_ident().text
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                pstart = self.peek()
                while self.at("final"):
                    self.pos += 1
                ptype = self.parse_type()
                if self.at("..."):
                    self.unsupported("varargs")
                ptok = self.expect_ident()
                extra = 0
                while self.at("[") and self.at("]", 1):
                    self.pos += 2
                    extra += 1
                if extra:
                    ptype = A.TypeRef(name=ptype.name, dims=ptype.dims + extra, span=ptype.span)
                params.append(A.Param(type=ptype, name=ptok.text, span=self.span_from(pstart),
                                      name_span=_tok_span(ptok)))
                if not self.at(","):
                    break
                self.pos += 1
        self.expect(")")
        throws = []
        if self.at("throws"):
            self.pos += 1
            throws.append(str(self.parse_type()))
            while self.at(","):
                self.pos += 1
                throws.append(str(self.parse_type()))
        if not self.at("{"):
            t = self.peek()
            raise ParseError("expected method body", t.line, t.col)
        body = self.parse_block()
        if self.peek().kind != "eof":
            t = self.peek()
            raise ParseError(f"trailing tokens after method body: {t.text!r}", t.line, t.col)
        return A.MethodDecl(name=name, return_type=rtype, modifiers=modifiers, params=params,
                            throws=throws, body=body, span=self.span_from(start))

    # -- statements ------------------------------------------------------

    def parse_block(self) -> A.Block:
        start = self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                t = self.peek()
                raise ParseError("unterminated block", t.line, t.col)
            stmts.extend(self.parse_block_stmt())
        self.expect("}")
        return A.Block(stmts=stmts, span=self.span_from(start))

    def parse_block_stmt(self) -> list:
        """A block statement; declarations with several declarators expand to a list."""
        t = self.peek()
        if t.kind == "keyword" and t.text in UNSUPPORTED_STMT_KEYWORDS:
            self.unsupported(UNSUPPORTED_STMT_KEYWORDS[t.text])
        if t.kind == "identifier" and self.at(":", 1):
            self.unsupported("labeled statement")
        start = t
        if self.at("final"):
            while self.at("final"):
                self.pos += 1
            ty = self.parse_type()
            decls = self.parse_declarators(ty, start)
            self.expect(";")
            return decls
        ty = self.try_local_decl_type()
        if ty is not None:
            decls = self.parse_declarators(ty, start)
            self.expect(";")
            return decls
        return [self.parse_stmt()]

    def parse_declarators(self, ty: A.TypeRef, start: Token) -> list:
        decls = []
        while True:
            ntok = self.expect_ident()
            extra = 0
            while self.at("[") and self.at("]", 1):
                self.pos += 2
                extra += 1
            dty = ty if not extra else A.TypeRef(name=ty.name, dims=ty.dims + extra, span=ty.span)
            init = None
            if self.at("="):
                self.pos += 1
                if self.at("{"):
                    self.unsupported("array initializer")
                init = self.parse_expr()
            decls.append(A.VarDecl(type=dty, name=ntok.text, init=init,
                                   span=self.span_from(start if not decls else ntok),
                                   name_span=_tok_span(ntok)))
            if not self.at(","):
                return decls
            self.pos += 1

    def parse_stmt(self) -> A.Stmt:
        t = self.peek()
        if t.kind == "keyword" and t.text in UNSUPPORTED_STMT_KEYWORDS:
            self.unsupported(UNSUPPORTED_STMT_KEYWORDS[t.text])
        if t.kind == "identifier" and self.at(":", 1):
            self.unsupported("labeled statement")
        if self.at("{"):
            return self.parse_block()
        if self.at(";"):
            self.pos += 1
            return A.Block(stmts=[], span=self.span_from(t))
        if self.at("if"):
            return self.parse_if()
        if self.at("while"):
            self.pos += 1
            cond = self.parse_paren_expr()
            body = self.parse_stmt()
            return A.While(cond=cond, body=body, span=self.span_from(t))
        if self.at("do"):
            self.pos += 1
            body = self.parse_stmt()
            wtok = self.expect("while")
            cond = self.parse_paren_expr()
            self.expect(";")
            return A.DoWhile(body=body, cond=cond, span=self.span_from(t), while_span=_tok_span(wtok))
        if self.at("for"):
            return self.parse_for()
        if self.at("switch"):
            return self.parse_switch()
        if self.at("break") or self.at("continue"):
            self.pos += 1
            if self.peek().kind == "identifier":
                self.unsupported("labeled " + t.text)
            self.expect(";")
            cls = A.Break if t.text == "break" else A.Continue
            return cls(span=self.span_from(t))
        if self.at("return"):
            self.pos += 1
            value = None if self.at(";") else self.parse_expr()
            self.expect(";")
            return A.Return(value=value, span=self.span_from(t))
        if t.kind == "keyword" and t.text in ("else", "case", "default"):
            raise ParseError(f"unexpected {t.text!r}", t.line, t.col)
        stmt = self.parse_simple_stmt()
        self.expect(";")
        return _respan(stmt, self.span_from(t))

    def parse_simple_stmt(self) -> A.Stmt:
        """Assignment or expression statement, without the trailing ';'."""
        t = self.peek()
        expr = self.parse_expr()
        op = self.peek()
        if op.kind == "operator" and op.text in ASSIGN_OPS:
            if not isinstance(expr, (A.Name, A.FieldAccess, A.ArrayAccess)):
                raise ParseError("invalid assignment target", op.line, op.col)
            self.pos += 1
            value = self.parse_expr()
            return A.Assign(target=expr, op=op.text, value=value, span=self.span_from(t))
        if not (isinstance(expr, (A.Call, A.New)) or
                (isinstance(expr, A.Unary) and expr.op in ("++", "--"))):
            raise ParseError("not a statement", t.line, t.col)
        return A.ExprStmt(expr=expr, span=self.span_from(t))

    def parse_if(self) -> A.If:
        t = self.expect("if")
        cond = self.parse_paren_expr()
        then = self.parse_stmt()
        orelse, else_span = None, A.NO_SPAN
        if self.at("else"):
            etok = self.next()
            else_span = _tok_span(etok)
            orelse = self.parse_stmt()
        return A.If(cond=cond, then=then, orelse=orelse, span=self.span_from(t), else_span=else_span)

    def parse_for(self) -> A.Stmt:
        t = self.expect("for")
        self.expect("(")
        # enhanced for: ( [final] Type ident : expr )
        save = self.pos
        while self.at("final"):
            self.pos += 1
        ty = self.try_local_decl_type()
        if ty is not None and self.peek().kind == "identifier" and self.at(":", 1):
            vtok = self.next()
            self.pos += 1
            iterable = self.parse_expr()
            self.expect(")")
            body = self.parse_stmt()
            return A.Foreach(var_type=ty, var_name=vtok.text, iterable=iterable, body=body,
                             span=self.span_from(t), var_span=_tok_span(vtok))
        self.pos = save
        init = []
        if not self.at(";"):
            istart = self.peek()
            while self.at("final"):
                self.pos += 1
            ty = self.try_local_decl_type()
            if ty is not None:
                init = self.parse_declarators(ty, istart)
            else:
                init = self.parse_stmt_list()
        self.expect(";")
        cond = None if self.at(";") else self.parse_expr()
        utok = self.expect(";")
        update = [] if self.at(")") else self.parse_stmt_list()
        self.expect(")")
        body = self.parse_stmt()
        return A.For(init=init, cond=cond, update=update, body=body, span=self.span_from(t),
                     update_span=A.Span(utok.end, utok.end, utok.line, utok.col + 1))

    def parse_stmt_list(self) -> list:
        out = []
        while True:
            out.append(self.parse_simple_stmt())
            if not self.at(","):
                return out
            self.pos += 1

    def parse_switch(self) -> A.Switch:
        t = self.expect("switch")
        selector = self.parse_paren_expr()
        self.expect("{")
        cases = []
        while not self.at("}"):
            ctok = self.peek()
            labels, is_default = [], False
            if self.at("case"):
                self.pos += 1
                labels.append(self.parse_expr())
                while self.at(","):
                    self.pos += 1
                    labels.append(self.parse_expr())
            elif self.at("default"):
                self.pos += 1
                is_default = True
            else:
                raise ParseError(f"expected 'case' or 'default', found {ctok.text!r}", ctok.line, ctok.col)
            if self.at("->"):
                self.unsupported("arrow-form switch")
            self.expect(":")
            body = []
            while not (self.at("case") or self.at("default") or self.at("}")):
                if self.peek().kind == "eof":
                    e = self.peek()
                    raise ParseError("unterminated switch", e.line, e.col)
                body.extend(self.parse_block_stmt())
            cases.append(A.SwitchCase(labels=labels, is_default=is_default, body=body,
                                      span=self.span_from(ctok)))
        self.expect("}")
        return A.Switch(selector=selector, cases=cases, span=self.span_from(t))

    # -- expressions -----------------------------------------------------

    def parse_paren_expr(self) -> A.Expr:
        self.expect("(")
        e = self.parse_expr()
        self.expect(")")
        return e

    def parse_expr(self) -> A.Expr:
        e = self.parse_binary(1)
        if self.at("?"):
            self.unsupported("conditional expression")
        if self.at("->"):
            self.unsupported("lambda")
        return e

    def parse_binary(self, min_prec) -> A.Expr:
        start = self.peek()
        left = self.parse_unary()
        while True:
            op = self.peek()
            if op.kind == "keyword" and op.text == "instanceof":
                self.unsupported("instanceof")
            prec = BINARY_PRECEDENCE.get(op.text) if op.kind == "operator" else None
            if prec is None or prec < min_prec:
                return left
            self.pos += 1
            right = self.parse_binary(prec + 1)
            left = A.Binary(op=op.text, left=left, right=right, span=self.span_from(start))

    def parse_unary(self) -> A.Expr:
        t = self.peek()
        if t.kind == "operator" and t.text in ("+", "-", "!", "~", "++", "--"):
            self.pos += 1
            operand = self.parse_unary()
            return A.Unary(op=t.text, operand=operand, prefix=True, span=self.span_from(t))
        if self.at("(") and self.is_cast():
            self.pos += 1
            ty = self.parse_type()
            self.expect(")")
            operand = self.parse_unary()
            return A.Cast(type=ty, operand=operand, span=self.span_from(t))
        e = self.parse_postfix()
        while self.peek().kind == "operator" and self.peek().text in ("++", "--"):
            op = self.next()
            e = A.Unary(op=op.text, operand=e, prefix=False, span=self.span_from(t))
        return e

    def is_cast(self) -> bool:
        nxt = self.peek(1)
        if nxt.kind == "keyword" and nxt.text in PRIMITIVES:
            k = 2
            while self.at("[", k) and self.at("]", k + 1):
                k += 2
            return self.at(")", k)
        if nxt.kind != "identifier":
            return False
        k = 2
        while self.at(".", k) and self.peek(k + 1).kind == "identifier":
            k += 2
        while self.at("[", k) and self.at("]", k + 1):
            k += 2
        if not self.at(")", k):
            return False
        after = self.peek(k + 1)
        if after.kind in ("identifier", "literal"):
            return True
        if after.kind == "keyword" and after.text in ("this", "new", "super"):
            return True
        return after.text in ("(", "!", "~")

    def parse_postfix(self) -> A.Expr:
        start = self.peek()
        e = self.parse_primary()
        while True:
            if self.at("."):
                self.pos += 1
                if self.at("<"):
                    self.unsupported("explicit type arguments")
                nt = self.peek()
                if nt.kind == "keyword" and nt.text in ("new", "class", "this", "super"):
                    self.unsupported(f"qualified {nt.text}")
                name = self.expect_ident().text
                if self.at("("):
                    args = self.parse_args()
                    e = A.Call(target=e, name=name, args=args, span=self.span_from(start))
                else:
                    e = A.FieldAccess(target=e, name=name, span=self.span_from(start))
            elif self.at("["):
                self.pos += 1
                idx = self.parse_expr()
                self.expect("]")
                e = A.ArrayAccess(array=e, index=idx, span=self.span_from(start))
            elif self.at("::"):
                self.unsupported("method reference")
            else:
                return e

    def parse_args(self) -> list:
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.parse_expr())
            while self.at(","):
                self.pos += 1
                args.append(self.parse_expr())
        self.expect(")")
        return args

    def parse_primary(self) -> A.Expr:
        t = self.peek()
        if t.kind == "literal":
            self.pos += 1
            return A.Literal(text=t.text, span=self.span_from(t))
        if t.kind == "identifier":
            self.pos += 1
            if self.at("->"):
                self.unsupported("lambda")
            if self.at("("):
                args = self.parse_args()
                return A.Call(target=None, name=t.text, args=args, span=self.span_from(t))
            return A.Name(id=t.text, span=self.span_from(t))
        if self.at("("):
            self.pos += 1
            if self.at(")") or (self.peek().kind == "identifier" and (self.at(",", 1) or
                                                                     (self.at(")", 1) and self.at("->", 2)))):
                self.unsupported("lambda")
            e = self.parse_expr()
            self.expect(")")
            if self.at("->"):
                self.unsupported("lambda")
            return e
        if self.at("this"):
            self.pos += 1
            if self.at("("):
                self.unsupported("constructor call")
            return A.Literal(text="this", span=self.span_from(t))
        if self.at("super"):
            self.unsupported("super")
        if self.at("new"):
            return self.parse_new()
        if t.kind == "keyword" and t.text in PRIMITIVES | {"void"}:
            self.unsupported("class literal")
        if t.kind == "eof":
            raise ParseError("unexpected end of input", t.line, t.col)
        raise ParseError(f"unexpected token {t.text!r}", t.line, t.col)

    def parse_new(self) -> A.New:
        t = self.expect("new")
        first = self.peek()
        if first.kind == "keyword" and first.text in PRIMITIVES:
            self.pos += 1
            name = first.text
        else:
            name = self.expect_ident().text
            while self.at(".") and self.peek(1).kind == "identifier":
                self.pos += 1
                name += "." + self.next().text
        if self.at("<"):
            self.unsupported("generic type arguments")
        ty = A.TypeRef(name=name, dims=0, span=self.span_from(first))
        if self.at("("):
            if name in PRIMITIVES:
                raise ParseError("cannot instantiate a primitive type", first.line, first.col)
            args = self.parse_args()
            if self.at("{"):
                self.unsupported("anonymous class")
            return A.New(type=ty, args=args, span=self.span_from(t))
        dims, extra = [], 0
        while self.at("["):
            self.pos += 1
            if self.at("]"):
                self.pos += 1
                extra += 1
                continue
            if extra:
                u = self.peek()
                raise ParseError("dimension expression after empty dimension", u.line, u.col)
            dims.append(self.parse_expr())
            self.expect("]")
        if self.at("{"):
            self.unsupported("array initializer")
        if not dims:
            u = self.peek()
            raise ParseError("array creation needs a dimension expression", u.line, u.col)
        return A.New(type=ty, dims=dims, extra_dims=extra, span=self.span_from(t))


def _tok_span(t: Token) -> A.Span:
    return A.Span(t.start, t.end, t.line, t.col)


def _respan(node, span):
    if span is not None:
        node.span = span
    return node


def parse_method(tokens) -> A.MethodDecl:
    """Parse one method declaration from a token stream (or raw source text)."""
    if isinstance(tokens, str):
        tokens = tokenize(tokens)
    root = Parser(tokens).parse_method()
    return A.link_parents(root)


def parse_statements(tokens) -> list:
    """Parse a bare sequence of block statements (used for diff fragments)."""
    if isinstance(tokens, str):
        tokens = tokenize(tokens)
    p = Parser(tokens)
    stmts = []
    while p.peek().kind != "eof":
        stmts.extend(p.parse_block_stmt())
    return stmts

"""Java-subset frontend: tokenizer, parser, printer and name/type resolution."""
from .ast import link_parents
from .lexer import Comment, Token, TokenStream, tokenize
from .parser import parse_method, parse_statements
from .printer import print_method
from .resolve import Declaration, Occurrence, TypedAst, VarType, resolve_types, var_type_of

__all__ = [
    "Comment", "Declaration", "Occurrence", "Token", "TokenStream", "TypedAst", "VarType",
    "link_parents", "parse_method", "parse_statements", "print_method", "resolve_types",
    "tokenize", "var_type_of",
]

"""
Recursive-descent parser for the expression language.

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := ('-' | '+') factor | power
    power  := base ('^' factor)?
    base   := number | 'x' | 'y' | 't' | ident '(' expr ')' | '(' expr ')'

'^' is right associative and binds tighter than unary minus, so -x^2 is
-(x^2) and 2^-1 is 0.5. Identifiers are ln, exp, sqrt and the names of a
FunctionRegistry.
"""

import re
from dataclasses import dataclass
from typing import List, Optional

from apps.core.exceptions import ExpressionSyntaxError, UnknownIdentifierError

from .functions import FunctionRegistry
from .nodes import (
    BUILTINS,
    VARIABLES,
    Expression,
    FunctionCall,
    Number,
    Variable,
    binary,
    call_builtin,
    neg,
)

_TOKEN = re.compile(
    r"""
    (?P<space>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    offset: int


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    position = 0
    while position < len(text):
        match = _TOKEN.match(text, position)
        if not match:
            raise ExpressionSyntaxError(
                f"Unexpected character {text[position]!r}", _byte_offset(text, position)
            )
        kind = match.lastgroup or ""
        if kind != "space":
            tokens.append(Token(kind, match.group(), _byte_offset(text, position)))
        position = match.end()
    tokens.append(Token("end", "", _byte_offset(text, len(text))))
    return tokens


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


class Parser:
    def __init__(self, text: str, functions: Optional[FunctionRegistry] = None):
        self.tokens = tokenize(text)
        self.functions = functions or FunctionRegistry()
        self.index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        token = self.current
        self.index += 1
        return token

    def expect(self, text: str) -> Token:
        if self.current.text != text:
            found = self.current.text or "end of input"
            raise ExpressionSyntaxError(
                f"Expected '{text}' but found '{found}'", self.current.offset
            )
        return self.advance()

    def parse(self) -> Expression:
        if self.current.kind == "end":
            raise ExpressionSyntaxError("Empty expression", self.current.offset)
        node = self.expr()
        if self.current.kind != "end":
            raise ExpressionSyntaxError(
                f"Unexpected '{self.current.text}'", self.current.offset
            )
        return node

    def expr(self) -> Expression:
        node = self.term()
        while self.current.text in ("+", "-"):
            op = self.advance().text
            node = binary(op, node, self.term())
        return node

    def term(self) -> Expression:
        node = self.factor()
        while self.current.text in ("*", "/"):
            op = self.advance().text
            node = binary(op, node, self.factor())
        return node

    def factor(self) -> Expression:
        if self.current.text == "-":
            self.advance()
            return neg(self.factor())
        if self.current.text == "+":
            self.advance()
            return self.factor()
        return self.power()

    def power(self) -> Expression:
        base = self.base()
        if self.current.text == "^":
            self.advance()
            return binary("^", base, self.factor())
        return base

    def base(self) -> Expression:
        token = self.current
        if token.kind == "number":
            self.advance()
            return Number(float(token.text))
        if token.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if token.kind == "ident":
            self.advance()
            if token.text in VARIABLES:
                if self.current.text == "(":
                    raise ExpressionSyntaxError(
                        f"'{token.text}' is a variable, not a function", self.current.offset
                    )
                return Variable(token.text)
            if token.text in BUILTINS:
                return call_builtin(token.text, self.argument())
            function = self.functions.get(token.text)
            if function is None:
                raise UnknownIdentifierError(token.text, token.offset)
            return FunctionCall(function, self.argument())
        found = token.text or "end of input"
        raise ExpressionSyntaxError(f"Unexpected '{found}'", token.offset)

    def argument(self) -> Expression:
        self.expect("(")
        node = self.expr()
        self.expect(")")
        return node


def parse(text: str, functions: Optional[FunctionRegistry] = None) -> Expression:
    """Parse text into an Expression, resolving names against ``functions``"""
    return Parser(text, functions).parse()

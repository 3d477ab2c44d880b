"""ASCII text form of expressions: ``c*g[0]*F[1]^-1 - 1/2*u[0]``.

Sited symbols are written ``NAME[INT]``; a bare declared symbol name means
site 0, ``eps`` is the field generator and any other bare name is a
parameter.  Symbol declarations use lines such as ``symbol g free;``.
"""
from __future__ import annotations

import re
from typing import List, Tuple

from .diffalg import DiffExpr, Monomial, SymbolError, SymbolTable
from .scalars import CoeffKey, key_to_text, rational_text, terms_text


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (position {position})")
        self.position = position


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*'*)|(\S))")


def _tokenize(text: str) -> List[Tuple[str, object, int]]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        pos = m.end()
        if m.group(1):
            toks.append(("int", int(m.group(1)), m.start(1)))
        elif m.group(2):
            toks.append(("name", m.group(2), m.start(2)))
        elif m.group(3):
            if m.group(3) not in "+-*/^()[]":
                raise ParseError(f"unexpected character {m.group(3)!r}", m.start(3))
            toks.append(("op", m.group(3), m.start(3)))
    return toks


class _Parser:
    def __init__(self, text: str, table: SymbolTable):
        self.text = text
        self.table = table
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self):
        if self.pos < len(self.toks):
            return self.toks[self.pos]
        return ("end", None, len(self.text))

    def at(self, op: str) -> bool:
        tok = self.peek()
        return tok[0] == "op" and tok[1] == op

    def take(self, kind: str, value=None):
        tok = self.peek()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value if value is not None else kind
            got = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ParseError(f"expected {want!r}, got {got}", tok[2])
        self.pos += 1
        return tok

    def signed_int(self) -> int:
        neg = False
        if self.at("-"):
            self.pos += 1
            neg = True
        elif self.at("+"):
            self.pos += 1
        n = self.take("int")[1]
        return -n if neg else n

    def parse(self) -> DiffExpr:
        if self.peek()[0] == "end":
            raise ParseError("empty expression", 0)
        e = self.expr()
        if self.peek()[0] != "end":
            tok = self.peek()
            raise ParseError(f"unexpected {tok[1]!r}", tok[2])
        return e

    def expr(self) -> DiffExpr:
        neg = False
        if self.at("-") or self.at("+"):
            neg = self.take("op")[1] == "-"
        acc = self.term()
        if neg:
            acc = -acc
        while self.at("+") or self.at("-"):
            op = self.take("op")[1]
            t = self.term()
            acc = acc + t if op == "+" else acc - t
        return acc

    def term(self) -> DiffExpr:
        acc = self.power()
        while self.at("*") or self.at("/"):
            op, pos = self.take("op")[1:]
            rhs = self.power()
            if op == "*":
                acc = acc * rhs
            else:
                if rhs.is_zero():
                    raise ParseError("zero denominator", pos)
                try:
                    acc = acc * rhs.inverse()
                except ZeroDivisionError as exc:
                    raise ParseError(str(exc), pos) from None
        return acc

    def power(self) -> DiffExpr:
        base = self.atom()
        if self.at("^"):
            pos = self.take("op")[2]
            n = self.signed_int()
            try:
                return base ** n
            except ZeroDivisionError as exc:
                raise ParseError(str(exc), pos) from None
        return base

    def atom(self) -> DiffExpr:
        tok = self.peek()
        if tok[0] == "int":
            self.pos += 1
            return DiffExpr.constant(self.table, tok[1])
        if tok[0] == "name":
            self.pos += 1
            name = tok[1]
            if self.at("["):
                self.take("op", "[")
                site = self.signed_int()
                self.take("op", "]")
                if not self.table.resolve(name):
                    raise ParseError(f"undeclared symbol {name!r}", tok[2])
                return self.table.sym(name, site)
            if self.table.resolve(name):
                return self.table.sym(name, 0)
            if name == "eps":
                try:
                    return self.table.eps_expr()
                except ValueError as exc:
                    raise ParseError(str(exc), tok[2]) from None
            if name.endswith("'"):
                raise ParseError(f"undeclared symbol {name!r}", tok[2])
            return self.table.param(name)
        if tok[0] == "op" and tok[1] == "(":
            self.pos += 1
            e = self.expr()
            self.take("op", ")")
            return e
        got = "end of input" if tok[0] == "end" else repr(tok[1])
        raise ParseError(f"unexpected {got}", tok[2])


def parse_expr(text: str, table: SymbolTable) -> DiffExpr:
    """Parse an expression over ``table``; raises :class:`ParseError`."""
    try:
        return _Parser(text, table).parse()
    except SymbolError as exc:
        raise ParseError(str(exc), 0) from None


def factor_order(factor):
    site, sym, _ = factor
    return (abs(site), site < 0, sym)


def monomial_order(mono: Monomial):
    return tuple(factor_order(f) + (f[2],) for f in sorted(mono, key=factor_order))


def format_monomial(mono: Monomial, table: SymbolTable) -> str:
    parts = []
    for site, sym, e in sorted(mono, key=factor_order):
        name = table.symbols[sym].name
        parts.append(f"{name}[{site}]" if e == 1 else f"{name}[{site}]^{e}")
    return "*".join(parts)


def format_expr(e: DiffExpr) -> str:
    """Deterministic text; terms in monomial order, ``parse_expr`` inverts it."""
    if not e.terms:
        return "0"
    grouped = {}
    for (mono, key), v in e.terms.items():
        grouped.setdefault(mono, {})[key] = v
    pieces = []
    for mono in sorted(grouped, key=monomial_order):
        coeff = grouped[mono]
        body = format_monomial(mono, e.table)
        sign, ctext = _coefficient_prefix(coeff)
        if body and ctext:
            piece = f"{ctext}*{body}"
        else:
            piece = body or ctext or "1"
        pieces.append((sign, piece))
    out = ("-" if pieces[0][0] < 0 else "") + pieces[0][1]
    for sign, piece in pieces[1:]:
        out += (" - " if sign < 0 else " + ") + piece
    return out


def _coefficient_prefix(coeff: dict) -> Tuple[int, str]:
    """Split a coefficient into a sign and a text prefix ('' for 1)."""
    if len(coeff) == 1:
        (key, q), = coeff.items()
        sign = -1 if q < 0 else 1
        mag = abs(q)
        body = key_to_text(key)
        if not body:
            return sign, "" if mag == 1 else rational_text(mag)
        return sign, body if mag == 1 else f"{rational_text(mag)}*{body}"
    return 1, f"({terms_text(coeff)})"


def format_key(key: CoeffKey) -> str:
    return key_to_text(key)


def parse_declaration(line: str, table: SymbolTable) -> None:
    """Apply one ``symbol NAME KIND [template];`` line to ``table``."""
    body = line.strip().rstrip(";").strip()
    parts = body.split(None, 3)
    if len(parts) < 3 or parts[0] != "symbol":
        raise ParseError(f"malformed declaration {line!r}", 0)
    name, kind = parts[1], parts[2]
    if kind == "identity":
        if table.identity != name:
            raise ParseError(f"identity symbol is {table.identity!r}", 0)
        return
    template = None
    if kind == "defined":
        if len(parts) < 4:
            raise ParseError(f"defined symbol {name!r} needs a template", 0)
        template = parts[3]
    elif len(parts) > 3:
        raise ParseError(f"unexpected text after {kind!r}", 0)
    try:
        table.declare(name, kind, template)
    except SymbolError as exc:
        raise ParseError(str(exc), 0) from None

"""The difference function algebra: shifted function symbols and their partials.

A monomial is a tuple of ``(site, symbol_id, exponent)`` triples sorted by
``(site, symbol_id)``.  A :class:`DiffExpr` stores a flat map
``(monomial, coeff_key) -> Fraction`` over a :class:`SymbolTable`, which also
owns the eps extension used by every coefficient.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Tuple, Union

from .scalars import ONE_KEY, CoeffKey, Coefficient, EpsSpec, key_product

Monomial = Tuple[Tuple[int, int, int], ...]
TermKey = Tuple[Monomial, CoeffKey]

IDENTITY = "identity"
DEFINED = "defined"
FREE = "free"
SHIFTCONST = "shiftconst"

DEFAULT_TOWER_DEPTH = 4


class TowerDepthError(RuntimeError):
    """A free-derivative tower grew past the configured cap."""


class SymbolError(ValueError):
    pass


@dataclass
class FuncSymbol:
    name: str
    kind: str
    template: Optional["DiffExpr"] = None
    parent: Optional[int] = None
    depth: int = 0

    def declaration(self) -> str:
        if self.kind == DEFINED:
            return f"symbol {self.name} defined {format_template(self.template)};"
        return f"symbol {self.name} {self.kind};"


def _tower_cap() -> int:
    env = os.environ.get("MPVA_TOWER_DEPTH")
    return int(env) if env else DEFAULT_TOWER_DEPTH


class SymbolTable:
    """Append-only registry of function symbols sharing one eps extension.

    The identity symbol ``u`` is always declared first.
    """

    def __init__(self, eps: Union[EpsSpec, str, None] = None, tower_depth: Optional[int] = None,
                 identity: str = "u"):
        self.eps = eps if isinstance(eps, EpsSpec) else EpsSpec.parse(eps)
        self.tower_depth = _tower_cap() if tower_depth is None else tower_depth
        self.symbols: List[FuncSymbol] = []
        self._by_name: Dict[str, int] = {}
        self._deriv: Dict[int, "DiffExpr"] = {}
        self._shifted: Dict[Tuple[int, int], Dict[TermKey, Fraction]] = {}
        self.declare(identity, IDENTITY)

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def index(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise SymbolError(f"undeclared symbol {name!r}") from None

    def __getitem__(self, key: Union[int, str]) -> FuncSymbol:
        if isinstance(key, str):
            key = self.index(key)
        return self.symbols[key]

    @property
    def identity(self) -> str:
        return self.symbols[0].name

    def declare(self, name: str, kind: str, template: Union[None, str, "DiffExpr"] = None,
                parent: Optional[int] = None, depth: int = 0) -> int:
        if name in self._by_name:
            raise SymbolError(f"symbol {name!r} already declared")
        if kind not in (IDENTITY, DEFINED, FREE, SHIFTCONST):
            raise SymbolError(f"unknown symbol kind {kind!r}")
        if kind == IDENTITY and self.symbols:
            raise SymbolError("only one identity symbol is supported")
        idx = len(self.symbols)
        self.symbols.append(FuncSymbol(name, kind, None, parent, depth))
        self._by_name[name] = idx
        if kind == DEFINED:
            try:
                self.symbols[idx].template = self._check_template(name, template)
            except Exception:
                self.symbols.pop()
                del self._by_name[name]
                raise
        return idx

    def _check_template(self, name: str, template) -> "DiffExpr":
        if template is None:
            raise SymbolError(f"defined symbol {name!r} needs a derivative template")
        if isinstance(template, str):
            from .exprtext import parse_expr
            template = parse_expr(template, self)
        if template.table is not self:
            raise SymbolError("template built over another symbol table")
        for mono, _ in template.terms:
            for site, _, _ in mono:
                if site != 0:
                    raise SymbolError(f"template of {name!r} must live at site 0")
        return template

    def free(self, name: str) -> "DiffExpr":
        self.declare(name, FREE)
        return self.sym(name)

    def defined(self, name: str, template: Union[str, "DiffExpr"]) -> "DiffExpr":
        self.declare(name, DEFINED, template)
        return self.sym(name)

    def shiftconst(self, name: str) -> "DiffExpr":
        self.declare(name, SHIFTCONST)
        return self.sym(name)

    def sym(self, name: str, site: int = 0) -> "DiffExpr":
        return DiffExpr(self, {(((site, self.index(name), 1),), ONE_KEY): Fraction(1)})

    def u(self, site: int = 0) -> "DiffExpr":
        return DiffExpr(self, {(((site, 0, 1),), ONE_KEY): Fraction(1)})

    def param(self, name: str) -> "DiffExpr":
        if name == "eps":
            return self.eps_expr()
        return DiffExpr(self, {((), (0, ((name, 1),))): Fraction(1)})

    def eps_expr(self) -> "DiffExpr":
        return DiffExpr.from_coefficient(self, Coefficient.generator(self.eps))

    def const(self, value) -> "DiffExpr":
        return DiffExpr.constant(self, value)

    def zero(self) -> "DiffExpr":
        return DiffExpr(self)

    def derivative(self, idx: int) -> "DiffExpr":
        """The rule derivative of symbol ``idx`` as an expression at site 0."""
        cached = self._deriv.get(idx)
        if cached is not None:
            return cached
        s = self.symbols[idx]
        if s.kind == IDENTITY:
            d = DiffExpr.constant(self, 1)
        elif s.kind == SHIFTCONST:
            d = DiffExpr(self)
        elif s.kind == DEFINED:
            d = s.template
        else:
            if s.depth + 1 > self.tower_depth:
                raise TowerDepthError(
                    f"derivative of {s.name!r} exceeds tower depth {self.tower_depth}")
            child = self.declare(s.name + "'", FREE, parent=idx, depth=s.depth + 1)
            d = DiffExpr(self, {(((0, child, 1),), ONE_KEY): Fraction(1)})
        self._deriv[idx] = d
        return d

    def resolve(self, name: str) -> bool:
        """True if ``name`` is declared, creating free-tower primes such as ``g''`` on demand."""
        if name in self:
            return True
        base = name.rstrip("'")
        if base == name or base not in self or self[base].kind != FREE:
            return False
        idx = self.index(base)
        for _ in range(len(name) - len(base)):
            if self.symbols[idx].kind != FREE:
                return False
            self.derivative(idx)
            idx = self.index(self.symbols[idx].name + "'")
        return True

    def pregenerate(self) -> None:
        """Build every free tower up to the cap (for shared use across threads)."""
        i = 0
        while i < len(self.symbols):
            s = self.symbols[i]
            if s.kind == FREE and s.depth < self.tower_depth:
                self.derivative(i)
            i += 1

    def _shifted_derivative(self, idx: int, site: int) -> Dict[TermKey, Fraction]:
        key = (idx, site)
        out = self._shifted.get(key)
        if out is None:
            out = self.derivative(idx).shift(site).terms
            self._shifted[key] = out
        return out

    def declarations(self) -> List[str]:
        """Header lines for user-declared symbols (free towers are regenerated)."""
        return [s.declaration() for s in self.symbols if s.parent is None]


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    d = {(s, i): e for s, i, e in a}
    for s, i, e in b:
        k = (s, i)
        d[k] = d.get(k, 0) + e
    return tuple(sorted((s, i, e) for (s, i), e in d.items() if e))


def mono_shift(a: Monomial, k: int) -> Monomial:
    return tuple((s + k, i, e) for s, i, e in a)


def format_template(e: "DiffExpr") -> str:
    from .exprtext import format_expr
    return format_expr(e)


class DiffExpr:
    """Immutable sparse polynomial in shifted symbols with exact coefficients."""

    __slots__ = ("table", "terms")

    def __init__(self, table: SymbolTable, terms: Optional[Dict[TermKey, Fraction]] = None):
        self.table = table
        # caller-supplied dicts are trusted to be canonical
        self.terms: Dict[TermKey, Fraction] = terms if terms is not None else {}

    # construction ---------------------------------------------------------
    @classmethod
    def constant(cls, table: SymbolTable, value) -> "DiffExpr":
        if isinstance(value, Coefficient):
            return cls.from_coefficient(table, value)
        value = Fraction(value)
        return cls(table, {((), ONE_KEY): value} if value else {})

    @classmethod
    def from_coefficient(cls, table: SymbolTable, c: Coefficient,
                         mono: Monomial = ()) -> "DiffExpr":
        if c.eps is not table.eps:
            raise ValueError("coefficient built over a different eps extension")
        return cls(table, {(mono, k): v for k, v in c.terms.items()})

    def _coerce(self, other) -> "DiffExpr":
        if isinstance(other, DiffExpr):
            if other.table is not self.table:
                raise ValueError("expressions over different symbol tables")
            return other
        if isinstance(other, (int, Fraction, Coefficient)):
            return DiffExpr.constant(self.table, other)
        return NotImplemented

    # ring operations ------------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if not other.terms:
            return self
        out = dict(self.terms)
        for k, v in other.terms.items():
            s = out.get(k)
            if s is None:
                out[k] = v
            else:
                s += v
                if s:
                    out[k] = s
                else:
                    del out[k]
        return DiffExpr(self.table, out)

    __radd__ = __add__

    def __neg__(self):
        return DiffExpr(self.table, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                return DiffExpr(self.table)
            return DiffExpr(self.table, {k: v * other for k, v in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: Dict[TermKey, Fraction] = {}
        _mul_into(out, self.table.eps, self.terms, other.terms)
        return DiffExpr(self.table, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def inverse(self) -> "DiffExpr":
        """Inverse of a single monomial with a parameter-free coefficient."""
        if len(self.terms) != 1:
            raise ZeroDivisionError("only single-term expressions can be inverted")
        ((mono, key), q), = self.terms.items()
        if key[1]:
            raise ZeroDivisionError("cannot invert a parameter")
        inv_mono = tuple((s, i, -e) for s, i, e in mono)
        c = Coefficient(self.table.eps, {(-key[0], ()): 1 / q})
        return DiffExpr.from_coefficient(self.table, c, inv_mono)

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        out = DiffExpr.constant(self.table, 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction, Coefficient)):
            other = DiffExpr.constant(self.table, other)
        if not isinstance(other, DiffExpr):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        from .exprtext import format_expr
        return f"DiffExpr({format_expr(self)!r})"

    def __str__(self) -> str:
        from .exprtext import format_expr
        return format_expr(self)

    # structure ------------------------------------------------------------
    def monomials(self) -> Dict[Monomial, Coefficient]:
        """Group terms by monomial: the ``Monomial -> Coefficient`` view."""
        grouped: Dict[Monomial, Dict[CoeffKey, Fraction]] = {}
        for (mono, key), v in self.terms.items():
            grouped.setdefault(mono, {})[key] = v
        return {m: Coefficient(self.table.eps, t) for m, t in grouped.items()}

    def coefficient(self, mono: Monomial) -> Coefficient:
        return Coefficient(self.table.eps,
                           {k: v for (m, k), v in self.terms.items() if m == mono})

    def sites(self) -> List[int]:
        """Sorted sites carrying u-dependent factors (shift constants excluded)."""
        syms = self.table.symbols
        out = set()
        for mono, _ in self.terms:
            for s, i, _ in mono:
                if syms[i].kind != SHIFTCONST:
                    out.add(s)
        return sorted(out)

    def all_sites(self) -> List[int]:
        return sorted({s for mono, _ in self.terms for s, _, _ in mono})

    def params(self) -> List[str]:
        return sorted({n for _, (_, ps) in self.terms for n, _ in ps})

    def is_constant(self) -> bool:
        return all(not mono for mono, _ in self.terms)

    def shift(self, k: int) -> "DiffExpr":
        if not k:
            return self
        return DiffExpr(self.table, {(mono_shift(m, k), c): v for (m, c), v in self.terms.items()})

    def dilate(self, n: int) -> "DiffExpr":
        if n < 1:
            raise ValueError("dilation factor must be >= 1")
        if n == 1:
            return self
        return DiffExpr(self.table, {(tuple((s * n, i, e) for s, i, e in m), c): v
                                     for (m, c), v in self.terms.items()})

    def partial(self, n: int) -> "DiffExpr":
        """d/du_n by the Leibniz rule, with each symbol's rule derivative."""
        table = self.table
        syms = table.symbols
        eps = table.eps
        out: Dict[TermKey, Fraction] = {}
        for (mono, ckey), v in self.terms.items():
            for pos, (s, i, e) in enumerate(mono):
                if s != n:
                    continue
                kind = syms[i].kind
                if kind == SHIFTCONST:
                    continue
                if e == 1:
                    rest = mono[:pos] + mono[pos + 1:]
                else:
                    rest = mono[:pos] + ((s, i, e - 1),) + mono[pos + 1:]
                factor = v * e
                if kind == IDENTITY:
                    _acc(out, (rest, ckey), factor)
                    continue
                for (dm, dk), dv in table._shifted_derivative(i, n).items():
                    m2 = mono_mul(rest, dm)
                    if dk == ONE_KEY:
                        _acc(out, (m2, ckey), factor * dv)
                    else:
                        for k2, c2 in key_product(eps, ckey, dk):
                            _acc(out, (m2, k2), factor * dv * c2)
        return DiffExpr(self.table, out)

    def substitute_params(self, values: Dict[str, "DiffExpr"]) -> "DiffExpr":
        """Replace parameters by expressions (e.g. specialize a=1)."""
        out = DiffExpr(self.table)
        for (mono, (e, params)), v in self.terms.items():
            piece = DiffExpr(self.table, {(mono, (e, ())): v})
            for name, p in params:
                if name in values:
                    piece = piece * values[name] ** p
                else:
                    piece = piece * DiffExpr(self.table, {((), (0, ((name, p),))): Fraction(1)})
            out = out + piece
        return out

    def substitute_symbol(self, name: str, replacement: "DiffExpr") -> "DiffExpr":
        """Replace symbol ``name`` (a site-0 template) at every site it occurs."""
        idx = self.table.index(name)
        out: Dict[TermKey, Fraction] = {}
        for (mono, ckey), v in self.terms.items():
            rest = []
            piece = DiffExpr(self.table, {((), ckey): v})
            for s, i, e in mono:
                if i == idx:
                    piece = piece * replacement.shift(s) ** e
                else:
                    rest.append((s, i, e))
            piece = piece * DiffExpr(self.table, {(tuple(rest), ONE_KEY): Fraction(1)})
            for k, c in piece.terms.items():
                _acc(out, k, c)
        return DiffExpr(self.table, out)


def _acc(out: Dict[TermKey, Fraction], key: TermKey, value: Fraction) -> None:
    s = out.get(key)
    if s is None:
        if value:
            out[key] = value
    else:
        s += value
        if s:
            out[key] = s
        else:
            del out[key]


def _mul_into(out: Dict[TermKey, Fraction], eps: EpsSpec,
              a: Dict[TermKey, Fraction], b: Dict[TermKey, Fraction], scale=1) -> None:
    for (m1, k1), v1 in a.items():
        for (m2, k2), v2 in b.items():
            m = mono_mul(m1, m2)
            if k1 == ONE_KEY:
                _acc(out, (m, k2), v1 * v2 * scale)
            elif k2 == ONE_KEY:
                _acc(out, (m, k1), v1 * v2 * scale)
            else:
                for k, c in key_product(eps, k1, k2):
                    _acc(out, (m, k), v1 * v2 * c * scale)


def linear_combination(table: SymbolTable, items: Iterable[Tuple[DiffExpr, DiffExpr]]) -> DiffExpr:
    """Sum of products a*b without intermediate expression objects."""
    out: Dict[TermKey, Fraction] = {}
    for a, b in items:
        _mul_into(out, table.eps, a.terms, b.terms)
    return DiffExpr(table, out)


def shift(e: DiffExpr, k: int) -> DiffExpr:
    return e.shift(k)


def partial(e: DiffExpr, n: int) -> DiffExpr:
    return e.partial(n)


def dilate(e: DiffExpr, n: int) -> DiffExpr:
    return e.dilate(n)

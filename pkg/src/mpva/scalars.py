"""Exact scalars: polynomials in free parameters over Q[eps]/m(eps).

A coefficient monomial is keyed by ``(eps_exp, params)`` where ``params`` is a
tuple of ``(name, exponent)`` pairs sorted by name and ``0 <= eps_exp < deg m``.
Rational parts are :class:`fractions.Fraction`, never floats.
"""
from __future__ import annotations

import re
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Optional, Tuple

CoeffKey = Tuple[int, Tuple[Tuple[str, int], ...]]

ONE_KEY: CoeffKey = (0, ())


class IncompatibleFieldError(ValueError):
    """Operands were built over different eps extensions."""


class EpsSpec:
    """The extension Q[eps]/m(eps), or plain Q when ``min_poly`` is None.

    ``min_poly`` is a tuple of integer coefficients, lowest degree first.
    """

    # eps+1, eps^2+1, eps^2-eps+1, eps^2+eps+1, eps^4+1
    ALLOWED = {
        (1, 1): "eps+1",
        (1, 0, 1): "eps^2+1",
        (1, -1, 1): "eps^2-eps+1",
        (1, 1, 1): "eps^2+eps+1",
        (1, 0, 0, 0, 1): "eps^4+1",
    }

    _cache: Dict[Optional[Tuple[int, ...]], "EpsSpec"] = {}

    def __new__(cls, min_poly: Optional[Iterable[int]] = None):
        key = None if min_poly is None else tuple(int(c) for c in min_poly)
        if key in cls._cache:
            return cls._cache[key]
        if key is not None and key not in cls.ALLOWED:
            raise ValueError(f"minimal polynomial {key} is not in the allowlist")
        self = super().__new__(cls)
        self.min_poly = key
        self.degree = 0 if key is None else len(key) - 1
        self._powers: Dict[int, Tuple[Tuple[int, Fraction], ...]] = {}
        cls._cache[key] = self
        return self

    def __reduce__(self):
        return (EpsSpec, (self.min_poly,))

    @classmethod
    def parse(cls, text: Optional[str]) -> "EpsSpec":
        """Accepts ``none`` or one of the allowlisted polynomials, spaces ignored."""
        if text is None:
            return cls(None)
        t = text.replace(" ", "").replace("**", "^")
        if t in ("", "none"):
            return cls(None)
        for key, name in cls.ALLOWED.items():
            if t == name:
                return cls(key)
        raise ValueError(f"unsupported eps minimal polynomial: {text!r}")

    @property
    def name(self) -> str:
        return "none" if self.min_poly is None else self.ALLOWED[self.min_poly]

    def power(self, e: int) -> Tuple[Tuple[int, Fraction], ...]:
        """eps**e reduced: tuple of (exponent, rational) with 0 <= exponent < degree."""
        if self.min_poly is None:
            raise ValueError("eps used but no minimal polynomial was declared")
        if 0 <= e < self.degree:
            return ((e, Fraction(1)),)
        cached = self._powers.get(e)
        if cached is not None:
            return cached
        d = self.degree
        m = self.min_poly
        if e >= d:
            # eps * eps^(e-1); eps^d = -(m_0 + ... + m_{d-1} eps^{d-1})
            acc: Dict[int, Fraction] = {}
            for ex, c in self.power(e - 1):
                if ex + 1 < d:
                    acc[ex + 1] = acc.get(ex + 1, Fraction(0)) + c
                else:
                    for j in range(d):
                        if m[j]:
                            acc[j] = acc.get(j, Fraction(0)) - c * m[j]
        else:
            # eps^-1 = -(m_1 + m_2 eps + ... + eps^{d-1}) / m_0
            acc = {}
            for ex, c in self.power(e + 1):
                if ex > 0:
                    acc[ex - 1] = acc.get(ex - 1, Fraction(0)) + c
                else:
                    for j in range(1, d + 1):
                        if m[j]:
                            acc[j - 1] = acc.get(j - 1, Fraction(0)) - c * Fraction(m[j], m[0])
        out = tuple(sorted((k, v) for k, v in acc.items() if v))
        self._powers[e] = out
        return out

    def __repr__(self) -> str:
        return f"EpsSpec({self.name!r})"


def merge_params(a: Tuple[Tuple[str, int], ...], b: Tuple[Tuple[str, int], ...]):
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for name, e in b:
        d[name] = d.get(name, 0) + e
    return tuple(sorted((n, e) for n, e in d.items() if e))


def key_product(eps: EpsSpec, k1: CoeffKey, k2: CoeffKey):
    """Product of two coefficient monomials as a list of (key, rational factor)."""
    e = k1[0] + k2[0]
    params = merge_params(k1[1], k2[1])
    if e == 0 or (eps.min_poly is not None and 0 <= e < eps.degree):
        return ((e, params), Fraction(1)),
    return tuple(((ex, params), c) for ex, c in eps.power(e))


def key_to_text(key: CoeffKey) -> str:
    parts = []
    if key[0]:
        parts.append("eps" if key[0] == 1 else f"eps^{key[0]}")
    for name, e in key[1]:
        parts.append(name if e == 1 else f"{name}^{e}")
    return "*".join(parts)


def rational_text(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def terms_text(terms: Mapping[CoeffKey, Fraction]) -> str:
    """Deterministic text of a coefficient: eps/params monomials in sorted order."""
    if not terms:
        return "0"
    out = []
    for key in sorted(terms, key=_key_order):
        q = terms[key]
        body = key_to_text(key)
        mag = abs(q)
        if not body:
            piece = rational_text(mag)
        elif mag == 1:
            piece = body
        else:
            piece = f"{rational_text(mag)}*{body}"
        if not out:
            out.append(("-" if q < 0 else "") + piece)
        else:
            out.append((" - " if q < 0 else " + ") + piece)
    return "".join(out)


def _key_order(key: CoeffKey):
    return (sum(e for _, e in key[1]), key[1], key[0])


class Coefficient:
    """Immutable element of Q[eps]/m(eps)[params]."""

    __slots__ = ("eps", "terms")

    def __init__(self, eps: EpsSpec, terms: Optional[Mapping[CoeffKey, Fraction]] = None):
        self.eps = eps
        self.terms: Dict[CoeffKey, Fraction] = {}
        if terms:
            for k, v in terms.items():
                self._acc(k, Fraction(v))

    def _acc(self, key: CoeffKey, value: Fraction) -> None:
        e = key[0]
        if e and not (self.eps.min_poly is not None and 0 <= e < self.eps.degree):
            for ex, c in self.eps.power(e):
                self._acc((ex, key[1]), value * c)
            return
        v = self.terms.get(key, Fraction(0)) + value
        if v:
            self.terms[key] = v
        else:
            self.terms.pop(key, None)

    # constructors
    @classmethod
    def const(cls, eps: EpsSpec, value) -> "Coefficient":
        return cls(eps, {ONE_KEY: Fraction(value)})

    @classmethod
    def param(cls, eps: EpsSpec, name: str) -> "Coefficient":
        return cls(eps, {(0, ((name, 1),)): Fraction(1)})

    @classmethod
    def generator(cls, eps: EpsSpec) -> "Coefficient":
        return cls(eps, {(1, ()): Fraction(1)})

    def _coerce(self, other) -> "Coefficient":
        if isinstance(other, Coefficient):
            if other.eps is not self.eps:
                raise IncompatibleFieldError(f"{self.eps} vs {other.eps}")
            return other
        if isinstance(other, (int, Fraction)):
            return Coefficient.const(self.eps, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = Coefficient(self.eps, self.terms)
        for k, v in other.terms.items():
            out._acc(k, v)
        return out

    __radd__ = __add__

    def __neg__(self):
        return Coefficient(self.eps, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = Coefficient(self.eps)
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                for k, c in key_product(self.eps, k1, k2):
                    out._acc(k, v1 * v2 * c)
        return out

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            inv = self.inverse()
            return inv ** (-n)
        out = Coefficient.const(self.eps, 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def inverse(self) -> "Coefficient":
        """Inverse of a single eps-monomial times a rational (no parameters)."""
        if len(self.terms) != 1:
            raise ZeroDivisionError(f"cannot invert {self}")
        (key, q), = self.terms.items()
        if key[1]:
            raise ZeroDivisionError(f"cannot invert parameter expression {self}")
        return Coefficient(self.eps, {(-key[0], ()): 1 / q})

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Coefficient.const(self.eps, other)
        if not isinstance(other, Coefficient):
            return NotImplemented
        if other.eps is not self.eps:
            raise IncompatibleFieldError(f"{self.eps} vs {other.eps}")
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __str__(self) -> str:
        return terms_text(self.terms)

    def __repr__(self) -> str:
        return f"Coefficient({str(self)!r}, {self.eps.name})"

    def evaluate(self, values: Mapping[str, complex]) -> complex:
        """Numeric value; ``values`` must bind every parameter and ``eps`` if used."""
        total = 0
        for (e, params), q in self.terms.items():
            term = complex(q) if isinstance(values.get("eps", 0), complex) else float(q)
            if e:
                term = term * values["eps"] ** e
            for name, p in params:
                term = term * values[name] ** p
            total += term
        return total


def coeff_arith(lhs: Coefficient, rhs: Coefficient, op: str):
    """Dispatch ``add``, ``mul``, ``neg`` (of lhs) or ``eq``."""
    if lhs.eps is not rhs.eps:
        raise IncompatibleFieldError(f"{lhs.eps} vs {rhs.eps}")
    if op == "add":
        return lhs + rhs
    if op == "mul":
        return lhs * rhs
    if op == "neg":
        return -lhs
    if op == "eq":
        return lhs == rhs
    raise ValueError(f"unknown op {op!r}")


_COEFF_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(.))")


def parse_coefficient(text: str, eps: EpsSpec) -> Coefficient:
    """Parse ``+ - * / ^`` expressions over integers, parameter names and ``eps``.

    Division is only by nonzero integers or eps powers.
    """
    toks = []
    for m in _COEFF_TOKEN.finditer(text):
        if m.group(0).strip() == "":
            continue
        if m.group(1):
            toks.append(("int", int(m.group(1)), m.start(1)))
        elif m.group(2):
            toks.append(("name", m.group(2), m.start(2)))
        else:
            toks.append(("op", m.group(3), m.start(3)))
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else ("end", None, len(text))

    def take(kind=None, value=None):
        nonlocal pos
        tok = peek()
        if (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            raise ValueError(f"unexpected {tok[1]!r} at position {tok[2]}")
        pos += 1
        return tok

    def expr():
        sign = 1
        if peek()[:2] in (("op", "+"), ("op", "-")):
            sign = -1 if take()[1] == "-" else 1
        acc = term() * sign
        while peek()[:2] in (("op", "+"), ("op", "-")):
            op = take()[1]
            t = term()
            acc = acc + t if op == "+" else acc - t
        return acc

    def term():
        acc = power()
        while peek()[:2] in (("op", "*"), ("op", "/")):
            op = take()[1]
            rhs = power()
            if op == "*":
                acc = acc * rhs
            else:
                if rhs.is_zero():
                    raise ZeroDivisionError(f"zero denominator at position {peek()[2]}")
                acc = acc * rhs.inverse()
        return acc

    def power():
        base = atom()
        if peek()[:2] == ("op", "^"):
            take()
            neg = False
            if peek()[:2] == ("op", "-"):
                take()
                neg = True
            n = take("int")[1]
            return base ** (-n if neg else n)
        return base

    def atom():
        tok = peek()
        if tok[0] == "int":
            take()
            return Coefficient.const(eps, tok[1])
        if tok[0] == "name":
            take()
            if tok[1] == "eps":
                return Coefficient.generator(eps)
            return Coefficient.param(eps, tok[1])
        if tok[:2] == ("op", "("):
            take()
            v = expr()
            take("op", ")")
            return v
        raise ValueError(f"unexpected {tok[1]!r} at position {tok[2]}")

    out = expr()
    if pos != len(toks):
        tok = peek()
        raise ValueError(f"trailing input {tok[1]!r} at position {tok[2]}")
    return out

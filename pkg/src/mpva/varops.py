"""Variational calculus: functionals, variational and Frechet derivatives,
evolutionary vector fields."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

from .diffalg import DiffExpr, _acc
from .exprtext import format_expr


def _normalize_monomial(mono):
    if not mono:
        return mono
    low = min(site for site, _, _ in mono)
    if low == 0:
        return mono
    return tuple((site - low, sym, e) for site, sym, e in mono)


class Functional:
    """Element of V/(S-1)V held as its canonical representative.

    Every sited monomial is shifted so that its lowest site is 0.  Sited
    monomials form free S-orbits, so these representatives are a basis of the
    quotient and equality of functionals is equality of representatives.
    """

    __slots__ = ("expr",)

    def __init__(self, expr: DiffExpr):
        self.expr = expr

    def is_zero(self) -> bool:
        return self.expr.is_zero()

    def __bool__(self):
        return not self.is_zero()

    def __eq__(self, other):
        if isinstance(other, Functional):
            return self.expr == other.expr
        if isinstance(other, DiffExpr):
            return self.expr == to_functional(other).expr
        return NotImplemented

    def __hash__(self):
        return hash(self.expr)

    def __add__(self, other: "Functional") -> "Functional":
        return to_functional(self.expr + other.expr)

    def __neg__(self):
        return Functional(-self.expr)

    def __sub__(self, other: "Functional") -> "Functional":
        return to_functional(self.expr - other.expr)

    def __str__(self):
        return format_expr(self.expr)

    def __repr__(self):
        return f"Functional({format_expr(self.expr)!r})"


def to_functional(e: DiffExpr) -> Functional:
    out: Dict = {}
    for (mono, key), v in e.terms.items():
        _acc(out, (_normalize_monomial(mono), key), v)
    return Functional(DiffExpr(e.table, out))


def variational_derivative(e: DiffExpr) -> DiffExpr:
    """sum_n S^-n (de/du_n)."""
    acc = e.table.zero()
    for n in e.sites():
        acc = acc + e.partial(n).shift(-n)
    return acc


def frechet(e: DiffExpr):
    from .hamops import DiffOperator
    return DiffOperator(e.table, {n: e.partial(n) for n in e.sites()})


def is_closed(xi: DiffExpr):
    """(closed?, D - D*) for the Frechet derivative D of ``xi``."""
    d = frechet(xi)
    residual = d - d.adjoint()
    return residual.is_zero(), residual


def check_exact(h: DiffExpr, xi: DiffExpr) -> bool:
    return (variational_derivative(h) - xi).is_zero()


def apply_evolutionary(P: DiffExpr, f: DiffExpr) -> DiffExpr:
    """X_P(f) = sum_n S^n(P) df/du_n."""
    acc = f.table.zero()
    for n in f.sites():
        acc = acc + P.shift(n) * f.partial(n)
    return acc


def evolutionary_bracket(P: DiffExpr, Q: DiffExpr) -> DiffExpr:
    return apply_evolutionary(P, Q) - apply_evolutionary(Q, P)


def is_integral_of_motion(h: DiffExpr, P: DiffExpr) -> bool:
    return to_functional(variational_derivative(h) * P).is_zero()


@dataclass(frozen=True)
class EvolutionaryField:
    characteristic: DiffExpr

    def __call__(self, f: DiffExpr) -> DiffExpr:
        return apply_evolutionary(self.characteristic, f)

    def commutator(self, other: "EvolutionaryField") -> "EvolutionaryField":
        return EvolutionaryField(evolutionary_bracket(self.characteristic, other.characteristic))

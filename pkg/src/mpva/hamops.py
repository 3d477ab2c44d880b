"""Difference operators sum_k a_k S^k over the function algebra.

Products follow ``S o f = S(f) S``; the adjoint sends ``f S^n`` to
``S^-n(f) S^-n``.  Text form: ``u[0]*u[1]*S^1 - u[0]*u[-1]*S^-1``.
"""
from __future__ import annotations

import re
from fractions import Fraction
from typing import Dict, List, Mapping, Sequence

from .diffalg import DiffExpr, SymbolTable, _mul_into, mono_shift
from .exprtext import ParseError, format_expr, parse_expr
from .lambda_bracket import BracketStructure
from .varops import Functional, frechet, to_functional, variational_derivative


class StructureError(ValueError):
    def __init__(self, message: str, residual=None):
        super().__init__(message)
        self.residual = residual


class DiffOperator:
    __slots__ = ("table", "coeffs")

    def __init__(self, table: SymbolTable, coeffs: Mapping[int, DiffExpr] = None):
        self.table = table
        self.coeffs = {k: v for k, v in sorted((coeffs or {}).items()) if not v.is_zero()}

    @classmethod
    def identity(cls, table: SymbolTable) -> "DiffOperator":
        return cls(table, {0: table.const(1)})

    @classmethod
    def shift_op(cls, table: SymbolTable, k: int = 1) -> "DiffOperator":
        return cls(table, {k: table.const(1)})

    @classmethod
    def scalar(cls, e: DiffExpr) -> "DiffOperator":
        return cls(e.table, {0: e})

    def coefficient(self, k: int) -> DiffExpr:
        return self.coeffs.get(k, self.table.zero())

    def degrees(self) -> List[int]:
        return list(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def _coerce(self, other) -> "DiffOperator":
        if isinstance(other, DiffOperator):
            return other
        if isinstance(other, DiffExpr):
            return DiffOperator.scalar(other)
        return DiffOperator.scalar(DiffExpr.constant(self.table, other))

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out[k] + v if k in out else v
        return DiffOperator(self.table, out)

    __radd__ = __add__

    def __neg__(self):
        return DiffOperator(self.table, {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        return op_mul(self, self._coerce(other))

    def __rmul__(self, other):
        return op_mul(self._coerce(other), self)

    def __eq__(self, other):
        if not isinstance(other, DiffOperator):
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):
        return hash(tuple((k, hash(v)) for k, v in self.coeffs.items()))

    def adjoint(self) -> "DiffOperator":
        return adjoint(self)

    def __call__(self, e: DiffExpr) -> DiffExpr:
        return apply_op(self, e)

    def __str__(self):
        return format_operator(self)

    def __repr__(self):
        return f"DiffOperator({format_operator(self)!r})"


def op_mul(A: DiffOperator, B: DiffOperator) -> DiffOperator:
    """(f S^m)(g S^n) = f S^m(g) S^(m+n)."""
    table = A.table
    acc: Dict[int, Dict] = {}
    for m, f in A.coeffs.items():
        for n, g in B.coeffs.items():
            _mul_into(acc.setdefault(m + n, {}), table.eps, f.terms, g.shift(m).terms)
    return DiffOperator(table, {k: DiffExpr(table, t) for k, t in acc.items()})


def adjoint(A: DiffOperator) -> DiffOperator:
    return DiffOperator(A.table, {-n: f.shift(-n) for n, f in A.coeffs.items()})


def apply_op(A: DiffOperator, e: DiffExpr) -> DiffExpr:
    out: Dict = {}
    for k, f in A.coeffs.items():
        _mul_into(out, A.table.eps, f.terms, e.shift(k).terms)
    return DiffExpr(A.table, out) if out else A.table.zero()


def structure_to_operator(st: BracketStructure) -> DiffOperator:
    return DiffOperator(st.table, st.all_modes())


def operator_to_structure(H: DiffOperator, name: str = "") -> BracketStructure:
    residual = H + adjoint(H)
    if not residual.is_zero():
        raise StructureError(f"operator is not skewadjoint; H + H* = {format_operator(residual)}",
                             residual)
    pos = {k: v for k, v in H.coeffs.items() if k > 0}
    if not pos:
        raise StructureError("zero operator has no bracket structure")
    return BracketStructure.from_modes(pos, name)


def hamiltonian_flow(H: DiffOperator, h: DiffExpr) -> DiffExpr:
    return apply_op(H, variational_derivative(h))


def functional_bracket(H: DiffOperator, f: DiffExpr, g: DiffExpr) -> Functional:
    return to_functional(variational_derivative(g) * apply_op(H, variational_derivative(f)))


def jacobi_operator_form(H: DiffOperator, F: DiffExpr, G: DiffExpr) -> DiffExpr:
    """LHS - RHS of the operator form of the Jacobi identity for a skewadjoint H.

    LHS = H D_G H F + H D*_{HF} G - H D_F H G + H D*_F H G
    RHS = D_{HG} H F - D_{HF} H G
    """
    HF = apply_op(H, F)
    HG = apply_op(H, G)
    DF, DG = frechet(F), frechet(G)
    DHF, DHG = frechet(HF), frechet(HG)
    lhs = apply_op(H, apply_op(DG, HF) + apply_op(adjoint(DHF), G)
                   - apply_op(DF, HG) + apply_op(adjoint(DF), HG))
    rhs = apply_op(DHG, HF) - apply_op(DHF, HG)
    return lhs - rhs


def kernel_probe(P: Mapping[int, int], basis: Sequence[DiffExpr]) -> List[DiffExpr]:
    """Kernel of sum_e P[e] S^e on the shift-closed span of ``basis``.

    The ansatz space is every monomial of ``basis`` shifted by -r..r with r
    the largest |exponent| in P.  A falsification probe only: an empty answer
    says nothing about elements outside the ansatz.
    """
    import sympy

    if not basis:
        return []
    table = basis[0].table
    r = max((abs(e) for e in P), default=0)
    ansatz: List = []
    seen = set()
    for b in basis:
        for key in b.terms:
            mono, ckey = key
            shifts = [0] if not mono else range(-r, r + 1)
            for j in shifts:
                k = (mono_shift(mono, j), ckey)
                if k not in seen:
                    seen.add(k)
                    ansatz.append(k)
    rows: Dict = {}
    for col, (mono, ckey) in enumerate(ansatz):
        for e, p in P.items():
            if p == 0:
                continue
            target = (mono_shift(mono, e), ckey)
            rows.setdefault(target, {})
            rows[target][col] = rows[target].get(col, 0) + p
    M = sympy.zeros(max(len(rows), 1), len(ansatz))
    for i, row in enumerate(rows.values()):
        for col, v in row.items():
            M[i, col] = v
    out = []
    for vec in M.nullspace():
        terms = {}
        for col, v in enumerate(vec):
            if v != 0:
                terms[ansatz[col]] = Fraction(int(v.p), int(v.q))
        out.append(DiffExpr(table, terms))
    return out


def format_operator(A: DiffOperator) -> str:
    if A.is_zero():
        return "0"
    pieces = []
    for k, f in sorted(A.coeffs.items(), key=lambda kv: (abs(kv[0]), kv[0] < 0)):
        text = format_expr(f)
        if " + " in text or " - " in text[1:]:
            text = f"({text})"
            sign = "+"
        elif text.startswith("-"):
            text, sign = text[1:], "-"
        else:
            sign = "+"
        pieces.append((sign, f"{text}*S^{k}"))
    out = ("-" if pieces[0][0] == "-" else "") + pieces[0][1]
    for sign, piece in pieces[1:]:
        out += f" {sign} {piece}"
    return out


_TERM_SPLIT = re.compile(r"\*S\^(-?\d+)")


def parse_operator(text: str, table: SymbolTable) -> DiffOperator:
    """Inverse of :func:`format_operator`; every term ends in ``*S^<int>``."""
    coeffs: Dict[int, DiffExpr] = {}
    start = 0
    chunks = []
    text = text.strip()
    if text == "0":
        return DiffOperator(table)
    for m in _TERM_SPLIT.finditer(text):
        chunk = text[start:m.start()].strip()
        chunks.append((chunk, int(m.group(1)), start))
        start = m.end()
    if text[start:].strip():
        raise ParseError("operator terms must end in *S^<int>", start)
    for chunk, k, at in chunks:
        sign = 1
        if chunk.startswith("+"):
            chunk = chunk[1:].strip()
        elif chunk.startswith("-"):
            chunk, sign = chunk[1:].strip(), -1
        if not chunk:
            raise ParseError("missing coefficient", at)
        try:
            e = parse_expr(chunk, table)
        except ParseError as exc:
            raise ParseError(str(exc), at + exc.position) from None
        e = e if sign > 0 else -e
        coeffs[k] = coeffs[k] + e if k in coeffs else e
    return DiffOperator(table, coeffs)

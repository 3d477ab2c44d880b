"""Lenard-Magri recursion for the order-1/order-2 pair with g F' = F.

The pair is ``K = g (g_1 S - g_{-1} S^-1)`` and the complementary order-2
operator ``H2 = g o (1 + S^-1) o D``.  Each new ``xi_N`` is produced by the
explicit ``A_N -> eta_N -> xi_N`` construction and then checked exactly.
A Lax operator ``L = S + F S^-1`` supplies candidate densities and flows.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .diffalg import DiffExpr, SymbolTable
from .exprtext import format_expr
from .hamops import DiffOperator, adjoint, apply_op, format_operator, op_mul
from .varops import (Functional, apply_evolutionary, check_exact, evolutionary_bracket,
                     is_closed, to_functional)


class ConstructionError(RuntimeError):
    pass


class RecursionBroken(RuntimeError):
    def __init__(self, message: str, step: int, residual: DiffExpr):
        super().__init__(f"step {step}: {message}: {format_expr(residual)}")
        self.step = step
        self.residual = residual


class ConjectureViolation(RuntimeError):
    def __init__(self, message: str, operator: DiffOperator):
        super().__init__(f"{message}: {format_operator(operator)}")
        self.operator = operator


def make_symbols(g: str = "free", F: str = "defined", table: Optional[SymbolTable] = None):
    """Symbol table holding g and F with g F' = F; returns (table, g, F)."""
    table = table or SymbolTable()
    if g == "u":
        gx = table.u()
        ginv = "u[0]^-1"
    elif g == "free":
        gx = table.sym("g") if "g" in table else table.free("g")
        ginv = "g[0]^-1"
    else:
        raise ValueError(f"unknown g realization {g!r}")
    if F == "u":
        if g != "u":
            raise ValueError("F = u satisfies g F' = F only for g = u")
        Fx = table.u()
    elif F == "defined":
        Fx = table.sym("F") if "F" in table else table.defined("F", f"F[0]*{ginv}")
    else:
        raise ValueError(f"unknown F realization {F!r}")
    return table, gx, Fx


def make_pair(g: DiffExpr, F: DiffExpr):
    """(K, H2, D) for the given g and F; H2 is checked against g o (1+S^-1) o D."""
    t = g.table
    K = DiffOperator(t, {1: g * g.shift(1), -1: -g * g.shift(-1)})
    H2 = DiffOperator(t, {
        1: g * g.shift(1) * (F + F.shift(1)),
        2: g * g.shift(2) * F.shift(1),
        -1: -g * g.shift(-1) * (F + F.shift(-1)),
        -2: -g * g.shift(-2) * F.shift(-1),
    })
    S = lambda k: DiffOperator.shift_op(t, k)
    sc = DiffOperator.scalar
    D = (S(2) * sc(F.shift(-1)) + (S(1) - 1) * sc(F) - S(-1) * sc(F.shift(1))) * sc(g)
    factored = sc(g) * (1 + S(-1)) * D
    if factored != H2:
        raise ConstructionError(f"H2 - g(1+S^-1)D = {format_operator(H2 - factored)}")
    for name, op in (("K", K), ("H2", H2)):
        if op + adjoint(op) != DiffOperator(t):
            raise ConstructionError(f"{name} is not skewadjoint")
    return K, H2, D


def reference_xi(F: DiffExpr, g: DiffExpr, j: int) -> DiffExpr:
    """Closed forms of xi_0..xi_3."""
    Fp = F * g ** -1
    S = F.shift
    if j == 0:
        return g ** -1 / 2
    if j == 1:
        return Fp
    if j == 2:
        return Fp * (S(-1) + F + S(1))
    if j == 3:
        return Fp * (S(-1) * (S(-2) + S(-1) + F) + (S(-1) + F) * (F + S(1))
                     + S(1) * (F + S(1) + S(2)))
    raise ValueError("closed forms are tabulated for j <= 3")


def reference_density(F: DiffExpr, g: DiffExpr, j: int) -> DiffExpr:
    t = F.table
    S = F.shift
    if j == 0:
        name = "Phi"
        if name not in t:
            t.defined(name, g ** -1 / 2)
        return t.sym(name)
    if j == 1:
        return F
    if j == 2:
        return F * F / 2 + F * S(1)
    if j == 3:
        return F ** 3 / 3 + F * F * S(1) + F * S(1) ** 2 + F * S(1) * S(2)
    raise ValueError("closed forms are tabulated for j <= 3")


def reference_flow(F: DiffExpr, g: DiffExpr, j: int) -> DiffExpr:
    S = F.shift
    if j == 0:
        return g * (S(1) - S(-1))
    if j == 1:
        return g * (F * S(1) + S(1) ** 2 + S(1) * S(2) - F * S(-1) - S(-1) ** 2 - S(-1) * S(-2))
    raise ValueError("closed forms are tabulated for j <= 1")


@dataclass
class HierarchyState:
    table: SymbolTable
    g: DiffExpr
    F: DiffExpr
    K: DiffOperator
    H2: DiffOperator
    D: DiffOperator
    xis: List[DiffExpr] = field(default_factory=list)
    flows: List[DiffExpr] = field(default_factory=list)
    densities: List[Optional[DiffExpr]] = field(default_factory=list)
    provenance: List[str] = field(default_factory=list)
    ledger: List[Dict[str, bool]] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.xis) - 1

    def to_json(self) -> dict:
        steps = []
        for j, xi in enumerate(self.xis):
            d = self.densities[j] if j < len(self.densities) else None
            steps.append({
                "j": j,
                "xi": format_expr(xi),
                "flow": format_expr(self.flows[j]) if j < len(self.flows) else None,
                "density": format_expr(d) if d is not None else None,
                "density_source": self.provenance[j] if j < len(self.provenance) else None,
                "checks": self.ledger[j] if j < len(self.ledger) else {},
            })
        return {"K": format_operator(self.K), "H2": format_operator(self.H2),
                "D": format_operator(self.D), "steps": steps}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def all_passed(self) -> bool:
        return all(all(v for v in step.values()) for step in self.ledger)


def _a_n(state: HierarchyState, N: int) -> DiffExpr:
    t = state.table
    g = state.g
    xi = state.xis
    acc = t.zero()
    for i in range(1, N):
        acc = acc + xi[i] * xi[N - i].shift(-1)
    acc = -g * g.shift(-1) * acc
    neg = {-k: f for k, f in state.H2.coeffs.items() if k < 0}
    for i in range(0, N):
        j = N - 1 - i
        for k, f in neg.items():
            base = f * xi[i] * xi[j].shift(-k)
            for ell in range(k):
                acc = acc - base.shift(ell)
    return acc


def expr_order(e: DiffExpr) -> int:
    """Largest site carrying a u-dependence; 0 for site-free expressions."""
    return max(e.sites(), default=0)


def lenard_step(state: HierarchyState) -> DiffExpr:
    """Append xi_N for N = len(state.xis) >= 2 after exact checks."""
    N = len(state.xis)
    if N < 2:
        raise ValueError("lenard_step needs xi_0 and xi_1")
    g = state.g
    prev = state.xis[N - 1]
    A = _a_n(state, N)
    h_prev = apply_op(state.H2, prev)
    res = h_prev * g ** -1 / 2 - (A.shift(1) - A)
    if not res.is_zero():
        raise RecursionBroken("H2 xi_(N-1) / 2g != (S-1) A_N", N, res)
    eta = 2 * A.shift(1)
    zeta = apply_op(state.D, prev)
    res = (eta - zeta).shift(1) - (eta + zeta)
    if not res.is_zero():
        raise RecursionBroken("S(eta - zeta) != eta + zeta", N, res)
    xi = (eta - zeta) * g ** -1 / 2
    res = apply_op(state.K, xi) - h_prev
    if not res.is_zero():
        raise RecursionBroken("K xi_N != H2 xi_(N-1)", N, res)
    state.xis.append(xi)
    return xi


def lax_operator(F: DiffExpr) -> DiffOperator:
    return DiffOperator(F.table, {1: F.table.const(1), -1: F})


def _lax_power(F: DiffExpr, n: int) -> DiffOperator:
    L = lax_operator(F)
    out = DiffOperator.identity(F.table)
    for _ in range(n):
        out = op_mul(out, L)
    return out


def lax_residue_density(F: DiffExpr, N: int) -> DiffExpr:
    if N < 1:
        raise ValueError("N >= 1")
    return _lax_power(F, 2 * N).coefficient(0) / (2 * N)


def lax_commutator(F: DiffExpr, N: int) -> DiffOperator:
    L = lax_operator(F)
    P = _lax_power(F, 2 * N + 2)
    plus = DiffOperator(F.table, {k: v for k, v in P.coeffs.items() if k >= 0})
    return op_mul(plus, L) - op_mul(L, plus)


def lax_flow(F: DiffExpr, N: int) -> DiffExpr:
    """S^-1 coefficient of [(L^(2N+2))_+, L], the induced time derivative of F."""
    if N < 0:
        raise ValueError("N >= 0")
    C = lax_commutator(F, N)
    if set(C.coeffs) - {-1}:
        raise ConjectureViolation("commutator has support outside S^-1", C)
    return C.coefficient(-1)


def lax_alignment(state: HierarchyState, N: int) -> Dict[str, bool]:
    """Which hierarchy flow the N-th Lax flow reproduces (on F)."""
    lf = lax_flow(state.F, N)
    out = {}
    for label, j in (("H2 xi_N", N), ("H2 xi_(N+1)", N + 1), ("H2 xi_(N-1)", N - 1)):
        if 0 <= j < len(state.flows):
            out[label] = (apply_evolutionary(state.flows[j], state.F) - lf).is_zero()
    return out


def run_hierarchy(g: DiffExpr, F: DiffExpr, depth: int = 6) -> HierarchyState:
    if depth < 1:
        raise ValueError("depth >= 1")
    K, H2, D = make_pair(g, F)
    st = HierarchyState(g.table, g, F, K, H2, D)
    xi0 = reference_xi(F, g, 0)
    xi1 = reference_xi(F, g, 1)
    if not apply_op(K, xi0).is_zero():
        raise RecursionBroken("K xi_0 != 0", 0, apply_op(K, xi0))
    res = apply_op(K, xi1) - apply_op(H2, xi0)
    if not res.is_zero():
        raise RecursionBroken("K xi_1 != H2 xi_0", 1, res)
    st.xis = [xi0, xi1]
    while len(st.xis) <= depth:
        lenard_step(st)
    st.flows = [apply_op(H2, xi) for xi in st.xis]
    for j, xi in enumerate(st.xis):
        checks: Dict[str, bool] = {}
        checks["lenard"] = (apply_op(K, xi).is_zero() if j == 0
                            else (apply_op(K, xi) - st.flows[j - 1]).is_zero())
        checks["closed"] = is_closed(xi)[0]
        if j <= 3:
            checks["reference_xi"] = (xi - reference_xi(F, g, j)).is_zero()
            density, source = reference_density(F, g, j), "reference"
        else:
            density, source = lax_residue_density(F, j), "lax"
        checks["exact"] = check_exact(density, xi)
        if j >= 2:
            checks["order_growth"] = expr_order(xi) == expr_order(st.xis[j - 1]) + 1
        if j <= 1:
            checks["reference_flow"] = (st.flows[j] - reference_flow(F, g, j)).is_zero()
        st.densities.append(density)
        st.provenance.append(source)
        st.ledger.append(checks)
    return st


def involution_matrix(state: HierarchyState, which: str = "H2",
                      xis: Optional[List[DiffExpr]] = None) -> List[List[Functional]]:
    op = {"H2": state.H2, "K": state.K}[which]
    xis = state.xis if xis is None else xis
    images = [apply_op(op, x) for x in xis]
    return [[to_functional(images[m] * xis[n]) for n in range(len(xis))] for m in range(len(xis))]


def flows_commute(state: HierarchyState, upto: int = 3) -> bool:
    n = min(upto, len(state.flows) - 1)
    for i in range(n + 1):
        for j in range(i + 1, n + 1):
            if not evolutionary_bracket(state.flows[i], state.flows[j]).is_zero():
                return False
    return True

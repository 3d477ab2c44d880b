"""Catalog of multiplicative Poisson brackets on one difference variable.

Each tag builds its modes over a fresh :class:`SymbolTable`.  Linear
combinations carry the indeterminate weights ``b`` (first summand) and ``t``
(second summand) so one verification covers the whole pencil.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .diffalg import DiffExpr, SymbolTable
from .lambda_bracket import BracketStructure, stretch
from .scalars import Coefficient, EpsSpec

TAGS = ("general", "complementary", "type-iii", "type-iv", "type-v", "type-vi",
        "type-vii", "type-viii", "ftv", "order3-scaled", "twisted-order2")

# eps fixed by the tag, or by the order for complementary brackets
_TAG_EPS = {
    "type-iv": "eps+1", "type-v": "eps+1", "type-vi": "eps^2-eps+1",
    "type-vii": "eps^2+eps+1", "ftv": "eps+1", "order3-scaled": "eps^2+1",
}
_COMPLEMENTARY_EPS = {2: "eps+1", 3: "eps^2+1", 4: "eps+1", 5: "eps^4+1"}
_TAG_ORDER = {"type-iv": 4, "type-v": 4, "type-vi": 4, "type-vii": 5, "type-viii": 5,
              "ftv": 2, "order3-scaled": 3, "twisted-order2": 2}


class FamilyError(ValueError):
    pass


@dataclass
class FamilySpec:
    tag: str
    order: Optional[int] = None
    eps: Optional[str] = None
    g: str = "free"           # "free" or "u"
    F: str = "defined"        # "defined" or "u"
    params: Dict[str, str] = field(default_factory=dict)  # rename default parameter names

    def resolved_order(self) -> int:
        if self.tag in _TAG_ORDER:
            if self.order is not None and self.order != _TAG_ORDER[self.tag]:
                raise FamilyError(f"{self.tag} has order {_TAG_ORDER[self.tag]}, not {self.order}")
            return _TAG_ORDER[self.tag]
        if self.order is None:
            if self.tag == "general":
                return 1
            if self.tag in ("complementary", "type-iii"):
                return 2
            raise FamilyError(f"{self.tag} needs --order")
        return self.order

    def resolved_eps(self) -> EpsSpec:
        if self.eps is not None:
            return EpsSpec.parse(self.eps)
        if self.tag in _TAG_EPS:
            return EpsSpec.parse(_TAG_EPS[self.tag])
        if self.tag in ("complementary", "type-iii"):
            n = self.resolved_order()
            if self.tag == "type-iii" and n not in (2, 3):
                raise FamilyError("type-iii combines complementary brackets of order 2 or 3")
            if n not in _COMPLEMENTARY_EPS:
                raise FamilyError(f"complementary brackets are cataloged for orders 2..5, not {n}")
            return EpsSpec.parse(_COMPLEMENTARY_EPS[n])
        return EpsSpec.parse(None)


def _eps_power(eps: EpsSpec, e: int) -> Coefficient:
    return Coefficient.generator(eps) ** e


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise FamilyError(msg)


def _check_eps(tag: str, eps: EpsSpec, order: int) -> None:
    if tag in ("complementary", "type-iii", "type-iv", "type-v", "ftv"):
        n = {"type-iv": 2, "type-v": 2, "ftv": 2}.get(tag, order)
        _require(eps.min_poly is not None and _eps_power(eps, n - 1) == Coefficient.const(eps, -1),
                 f"{tag} needs eps^{n - 1} = -1, got {eps.name}")
    elif tag == "type-vi":
        _require(eps.name == "eps^2-eps+1", "type-vi needs eps^3 = -1 with eps != -1")
    elif tag == "type-vii":
        _require(eps.name == "eps^2+eps+1", "type-vii needs eps^2 + eps + 1 = 0")
    elif tag == "order3-scaled":
        _require(eps.name == "eps^2+1", "order3-scaled needs eps^2 = -1")


class _Builder:
    def __init__(self, spec: FamilySpec, eps: EpsSpec):
        self.spec = spec
        self.table = SymbolTable(eps)
        t = self.table
        self.g = t.u() if spec.g == "u" else t.free("g")
        _require(spec.g in ("free", "u"), f"unknown g realization {spec.g!r}")
        _require(spec.F in ("defined", "u"), f"unknown F realization {spec.F!r}")
        self._ginv = "u[0]^-1" if spec.g == "u" else "g[0]^-1"

    def p(self, name: str) -> DiffExpr:
        return self.table.param(self.spec.params.get(name, name))

    def gg(self, k: int) -> DiffExpr:
        return self.g * self.g.shift(k)

    def rule_symbol(self, name: str, scale: str = "") -> DiffExpr:
        """Symbol with g*X' = scale*X; ``scale`` is expression text or ''."""
        if self.spec.F == "u":
            _require(self.spec.g == "u" and scale in ("", "1"),
                     "F = u realizes only the rule g F' = F with g = u")
            return self.table.u()
        prefix = f"{scale}*" if scale else ""
        return self.table.defined(name, f"{prefix}{name}[0]*{self._ginv}")

    # families

    def general(self, order: int, weights: Optional[List[DiffExpr]] = None) -> Dict[int, DiffExpr]:
        if weights is None:
            weights = [self.p(f"c{j}") for j in range(1, order + 1)]
        return {j: w * self.gg(j) for j, w in zip(range(1, order + 1), weights)}

    def complementary(self, n: int) -> Dict[int, DiffExpr]:
        _require(n >= 2, "complementary brackets need order >= 2")
        t = self.table
        eps = t.eps
        if n == 2:
            Fs = [self.rule_symbol("F")]
        else:
            Fs = [self.rule_symbol(f"F{j}", self._eps_text(j - 1)) for j in range(1, n)]
        low = t.const(1)
        high = t.const(1)
        for i, Fi in enumerate(Fs):
            low = low * Fi.shift(i)
            high = high * Fi.shift(i + 1)
        modes = {}
        if n >= 3:
            modes[n - 2] = self.gg(n - 2) * low
        e1 = DiffExpr.from_coefficient(t, _eps_power(eps, n - 2))
        e2 = DiffExpr.from_coefficient(t, _eps_power(eps, 2 - n))
        modes[n - 1] = self.gg(n - 1) * (e1 * low + e2 * high)
        modes[n] = self.gg(n) * high
        return modes

    def _eps_text(self, e: int) -> str:
        if e == 0:
            return ""
        return "eps" if e == 1 else f"eps^{e}"

    def type_iv_extra(self, F: DiffExpr) -> Dict[int, DiffExpr]:
        S = F.shift
        return {
            2: self.gg(2) * F * S(1) ** -1 * S(2),
            3: self.gg(3) * (F * S(1) ** -1 * S(2) + S(1) * S(2) ** -1 * S(3)),
            4: self.gg(4) * S(1) * S(2) ** -1 * S(3),
        }

    def type_vi(self) -> Dict[int, DiffExpr]:
        t = self.table
        F1 = self.rule_symbol("F1")
        F3 = self.rule_symbol("F3", "eps^2")
        F2 = F1 * F3
        c = self.p("c")
        e2 = t.eps_expr() ** 2
        em2 = t.eps_expr() ** -2
        return {
            1: self.gg(1) * (c * F1 * F3.shift(1) - c * c),
            2: self.gg(2) * (F1 * F2.shift(1) * F3.shift(2)
                             + c * (e2 * F1 * F3.shift(1) + em2 * F1.shift(1) * F3.shift(2))),
            3: self.gg(3) * (e2 * F1 * F2.shift(1) * F3.shift(2)
                             + em2 * F1.shift(1) * F2.shift(2) * F3.shift(3)
                             + c * F1.shift(1) * F3.shift(2)),
            4: self.gg(4) * F1.shift(1) * F2.shift(2) * F3.shift(3),
        }

    def type_vii_extra(self) -> Dict[int, DiffExpr]:
        t = self.table
        F = self.rule_symbol("F", "eps")
        G = self.rule_symbol("G")
        e = t.eps_expr()
        ei = e ** -1
        FG = lambda k: F.shift(k) * G.shift(k + 1)
        return {
            1: self.gg(1) * FG(0),
            2: -self.gg(2) * (e * FG(0) + ei * FG(1)),
            3: self.gg(3) * (ei * FG(0) + FG(1) + e * FG(2)),
            4: -self.gg(4) * (e * FG(1) + ei * FG(2)),
            5: self.gg(5) * FG(2),
        }

    def type_viii(self) -> Dict[int, DiffExpr]:
        F = self.rule_symbol("F")
        c = self.p("c")
        S = F.shift
        return {
            1: self.gg(1) * (F * S(1) + c * (F + S(1)) + c * c),
            2: -self.gg(2) * (F * S(1) + S(1) * S(2) + c * (F + S(1) + S(2)) + c * c),
            3: self.gg(3) * (F * S(1) + S(1) * S(2) + S(2) * S(3) + c * (S(1) + S(2))),
            4: -self.gg(4) * (S(1) * S(2) + S(2) * S(3) + c * S(2)),
            5: self.gg(5) * S(2) * S(3),
        }

    def order3_scaled(self) -> Dict[int, DiffExpr]:
        t = self.table
        a = self.spec.params.get("a", "a")
        F = self.rule_symbol("F", a)
        G = self.rule_symbol("G", f"{a}*eps")
        c = self.p("c")
        e = t.eps_expr()
        return {
            1: self.gg(1) * (F * G.shift(1) + c),
            2: self.gg(2) * (e * F * G.shift(1) + e ** -1 * F.shift(1) * G.shift(2)),
            3: self.gg(3) * F.shift(1) * G.shift(2),
        }

    def twisted(self) -> Dict[int, DiffExpr]:
        _require(self.spec.F == "defined", "the twisted pair needs an abstract F")
        t = self.table
        a = t.shiftconst("a")
        F = t.defined("F", f"a[0]*F[0]*{self._ginv}")
        c = self.p("c")
        ai = a ** -1
        return {
            1: self.gg(1) * (a.shift(-1) * ai * F + a.shift(2) * ai.shift(1) * F.shift(1)
                             + c * ai * ai.shift(1)),
            2: self.gg(2) * F.shift(1),
        }


def _combine(table: SymbolTable, parts: List[Tuple[DiffExpr, Dict[int, DiffExpr]]]) -> Dict[int, DiffExpr]:
    out: Dict[int, DiffExpr] = {}
    for w, modes in parts:
        for k, v in modes.items():
            out[k] = out[k] + w * v if k in out else w * v
    return out


def build_family(spec: FamilySpec) -> BracketStructure:
    if spec.tag not in TAGS:
        raise FamilyError(f"unknown family {spec.tag!r}; known: {', '.join(TAGS)}")
    order = spec.resolved_order()
    eps = spec.resolved_eps()
    _check_eps(spec.tag, eps, order)
    if spec.tag == "ftv":
        spec = FamilySpec(spec.tag, spec.order, spec.eps, "u", "u", spec.params)
    bld = _Builder(spec, eps)
    t = bld.table
    tag = spec.tag
    name = tag
    if tag == "general":
        _require(order >= 1, "general type needs order >= 1")
        modes = bld.general(order)
    elif tag == "complementary":
        modes = bld.complementary(order)
        name = f"complementary-{order}"
    elif tag == "type-iii":
        _require(order in (2, 3), "type-iii combines complementary brackets of order 2 or 3")
        modes = _combine(t, [(bld.p("b"), bld.complementary(order)),
                             (bld.p("t"), bld.general(1, [t.const(1)]))])
        name = f"type-iii-{order}"
    elif tag == "type-iv":
        comp = bld.complementary(2)
        F = t.sym("F") if spec.F == "defined" else t.u()
        modes = _combine(t, [(bld.p("b"), comp), (bld.p("t"), bld.type_iv_extra(F))])
    elif tag == "type-v":
        comp = BracketStructure.from_modes(bld.complementary(2))
        gen = BracketStructure.from_modes(bld.general(1, [t.const(1)]))
        modes = _combine(t, [(bld.p("b"), stretch(comp, 2).modes),
                             (bld.p("t"), stretch(gen, 2).modes)])
    elif tag == "type-vi":
        modes = bld.type_vi()
    elif tag == "type-vii":
        gen = bld.general(2, [t.const(1), t.const(1)])
        modes = _combine(t, [(bld.p("b"), gen), (bld.p("t"), bld.type_vii_extra())])
    elif tag == "type-viii":
        modes = bld.type_viii()
    elif tag == "ftv":
        modes = _combine(t, [(bld.p("b"), bld.general(1, [t.const(1)])),
                             (bld.p("t"), bld.complementary(2))])
    elif tag == "order3-scaled":
        modes = bld.order3_scaled()
    else:
        modes = bld.twisted()
    st = BracketStructure.from_modes(modes, name)
    if st.order != order:
        raise FamilyError(f"{tag}: built order {st.order}, expected {order}")
    return st


def catalog() -> List[FamilySpec]:
    """Every cataloged family with abstract g and F."""
    specs = [FamilySpec("general", n) for n in (1, 2, 3)]
    specs += [FamilySpec("complementary", 2), FamilySpec("complementary", 3),
              FamilySpec("complementary", 4, "eps+1"), FamilySpec("complementary", 4, "eps^2-eps+1"),
              FamilySpec("complementary", 5)]
    specs += [FamilySpec("type-iii", 2), FamilySpec("type-iii", 3)]
    specs += [FamilySpec(tag) for tag in ("type-iv", "type-v", "type-vi", "type-vii", "type-viii",
                                          "ftv", "order3-scaled", "twisted-order2")]
    return specs


def twisted_pair(table: Optional[SymbolTable] = None, g: str = "free"):
    """Operators and seeds of the twisted order-1/order-2 pair.

    Returns ``(K1, H2, xi0, xi1)`` where ``a`` is a shift-dependent constant and
    ``g F' = a F``.  ``H2`` is the order-2 operator without its ``c`` term.
    """
    from .hamops import structure_to_operator

    if table is None:
        table = SymbolTable()
    if "a" not in table:
        table.shiftconst("a")
    gsym = table.u() if g == "u" else (table.sym("g") if "g" in table else table.free("g"))
    ginv = "u[0]^-1" if g == "u" else "g[0]^-1"
    if "F" not in table:
        table.defined("F", f"a[0]*F[0]*{ginv}")
    a = table.sym("a")
    F = table.sym("F")
    ga = gsym * a ** -1
    K1 = structure_to_operator(BracketStructure.from_modes({1: ga * ga.shift(1)}, "twisted-K1"))
    ai = a ** -1
    f1 = gsym * gsym.shift(1) * (a.shift(-1) * ai * F + a.shift(2) * ai.shift(1) * F.shift(1))
    f2 = gsym * gsym.shift(2) * F.shift(1)
    H2 = structure_to_operator(BracketStructure.from_modes({1: f1, 2: f2}, "twisted-H2"))
    xi0 = a * gsym ** -1 / 2
    xi1 = a.shift(1) * a.shift(-1) * table.derivative(table.index("F"))
    return K1, H2, xi0, xi1

"""Multiplicative lambda-brackets on one difference variable.

A bracket is fixed by its modes ``{u_lambda u} = sum_k lambda^k f_k``.  Structures
are kept in skewsymmetry normal form: only ``f_1..f_N`` are stored and
``f_{-k} = -S^{-k} f_k``.  :meth:`BracketStructure.raw` builds a structure with
explicit negative modes, which exists for negative controls.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

from .diffalg import DiffExpr, SymbolTable, _mul_into
from .exprtext import format_expr

LambdaPoly = Dict[int, DiffExpr]
BiLambdaPoly = Dict[Tuple[int, int], DiffExpr]


@dataclass
class BracketStructure:
    order: int
    modes: Dict[int, DiffExpr]
    table: SymbolTable
    name: str = ""
    negative: Optional[Dict[int, DiffExpr]] = None  # raw mode only
    _cache: Dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.modes = {k: v for k, v in self.modes.items() if not v.is_zero()}
        if self.order < 1:
            raise ValueError("order must be >= 1")
        for k in self.modes:
            if not 1 <= k <= self.order:
                raise ValueError(f"mode {k} outside 1..{self.order}")
        if self.order not in self.modes:
            raise ValueError(f"top mode f_{self.order} must be nonzero")

    @classmethod
    def from_modes(cls, modes: Mapping[int, DiffExpr], name: str = "") -> "BracketStructure":
        modes = {k: v for k, v in modes.items() if not v.is_zero()}
        if not modes:
            raise ValueError("a bracket needs at least one nonzero mode")
        table = next(iter(modes.values())).table
        return cls(max(modes), dict(modes), table, name)

    @classmethod
    def raw(cls, modes: Mapping[int, DiffExpr], name: str = "raw") -> "BracketStructure":
        """Structure with every mode given explicitly, skewsymmetric or not."""
        pos = {k: v for k, v in modes.items() if k > 0 and not v.is_zero()}
        neg = {k: v for k, v in modes.items() if k < 0 and not v.is_zero()}
        if modes.get(0) is not None and not modes[0].is_zero():
            raise ValueError("raw structures with a nonzero f_0 are not supported")
        st = cls.from_modes(pos, name)
        st.negative = neg
        return st

    @property
    def eps(self):
        return self.table.eps

    @property
    def is_raw(self) -> bool:
        return self.negative is not None

    def mode(self, k: int) -> DiffExpr:
        if k > 0:
            return self.modes.get(k, self.table.zero())
        if k == 0:
            return self.table.zero()
        if self.negative is not None:
            return self.negative.get(k, self.table.zero())
        f = self.modes.get(-k)
        return self.table.zero() if f is None else -f.shift(k)

    def all_modes(self) -> Dict[int, DiffExpr]:
        out = {}
        for k in range(-self.order, self.order + 1):
            f = self.mode(k)
            if not f.is_zero():
                out[k] = f
        if self.negative is not None:
            out.update({k: v for k, v in self.negative.items() if not v.is_zero()})
        return out

    def lambda_bracket(self) -> LambdaPoly:
        return self.all_modes()

    def scaled(self, c: DiffExpr) -> "BracketStructure":
        return BracketStructure(self.order, {k: c * v for k, v in self.modes.items()},
                                self.table, self.name)

    def __add__(self, other: "BracketStructure") -> "BracketStructure":
        if other.table is not self.table:
            raise ValueError("structures over different symbol tables")
        modes = dict(self.modes)
        for k, v in other.modes.items():
            modes[k] = modes[k] + v if k in modes else v
        return BracketStructure.from_modes(modes, f"{self.name}+{other.name}")

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "eps_min_poly": self.eps.name,
            "symbols": self.table.declarations(),
            "modes": {str(k): format_expr(v) for k, v in sorted(self.all_modes().items())
                      if k > 0 or self.is_raw},
            "name": self.name,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def structure_from_json(data: dict) -> BracketStructure:
    from .exprtext import parse_declaration, parse_expr
    table = SymbolTable(data.get("eps_min_poly", "none"))
    for line in data.get("symbols", []):
        parse_declaration(line, table)
    modes = {int(k): parse_expr(v, table) for k, v in data["modes"].items()}
    name = data.get("name", "")
    if any(k < 0 for k in modes):
        return BracketStructure.raw(modes, name)
    st = BracketStructure.from_modes(modes, name)
    if "order" in data and int(data["order"]) != st.order:
        raise ValueError(f"declared order {data['order']} but top mode is {st.order}")
    return st


def _partials(e: DiffExpr) -> Dict[int, DiffExpr]:
    out = {}
    for n in e.sites():
        d = e.partial(n)
        if not d.is_zero():
            out[n] = d
    return out


def master_bracket(f: DiffExpr, g: DiffExpr, st: BracketStructure) -> LambdaPoly:
    """{f_lambda g} = sum dg/du_n lambda^(n+k-m) S^n(f_k) S^(n+k-m)(df/du_m)."""
    table = st.table
    df = _partials(f)
    dg = _partials(g)
    modes = st.all_modes()
    buckets: Dict[int, Dict] = {}
    for n, dgn in dg.items():
        for k, fk in modes.items():
            skf = fk.shift(n)
            for m, dfm in df.items():
                p = n + k - m
                pair = linear_product(table, dgn, skf)
                out = buckets.setdefault(p, {})
                _mul_into(out, table.eps, pair.terms, dfm.shift(p).terms)
    return _clean({p: DiffExpr(table, t) for p, t in buckets.items()})


def linear_product(table: SymbolTable, a: DiffExpr, b: DiffExpr) -> DiffExpr:
    out: Dict = {}
    _mul_into(out, table.eps, a.terms, b.terms)
    return DiffExpr(table, out)


def _clean(poly: Dict) -> Dict:
    return {k: v for k, v in sorted(poly.items()) if not v.is_zero()}


def lambda_add(a: Mapping, b: Mapping, sign: int = 1) -> Dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = out[k] + v * sign if k in out else v * sign
    return _clean(out)


def skew_residual(st: BracketStructure, f: DiffExpr, g: DiffExpr) -> LambdaPoly:
    """{g_lambda f} + sum_j lambda^-j S^-j(h_j) where {f_lambda g} = sum lambda^j h_j."""
    fg = master_bracket(f, g, st)
    gf = master_bracket(g, f, st)
    moved = {-j: h.shift(-j) for j, h in fg.items()}
    return lambda_add(gf, moved)


def jacobi_residual(st: BracketStructure) -> BiLambdaPoly:
    """LHS - RHS of the Jacobi identity on (u, u, u) as coefficients of lambda^m mu^n."""
    cached = st._cache.get("jacobi")
    if cached is not None:
        return cached
    table = st.table
    modes = st.all_modes()
    parts = {j: _partials(fj) for j, fj in modes.items()}
    acc: Dict[Tuple[int, int], Dict] = {}

    def add(key, a, b, scale):
        _mul_into(acc.setdefault(key, {}), table.eps, a.terms, b.terms, scale)

    for k, fk in modes.items():
        for j, pj in parts.items():
            for i, d in pj.items():
                sfk = fk.shift(i)
                # {u_lambda {u_mu u}} and -{u_mu {u_lambda u}}
                add((i + k, j), sfk, d, 1)
                add((j, i + k), sfk, d, -1)
            # -{{u_lambda u}_{lambda mu} u}
            for i_neg, d in pj.items():
                i = -i_neg
                add((i + k + j, i + k), fk, d.shift(i + k), -1)
    out = {key: DiffExpr(table, t) for key, t in acc.items() if t}
    out = dict(sorted(out.items()))
    st._cache["jacobi"] = out
    return out


def jacobi_coefficient(st: BracketStructure, m: int, n: int) -> DiffExpr:
    return jacobi_residual(st).get((m, n), st.table.zero())


def is_poisson(st: BracketStructure) -> bool:
    return not jacobi_residual(st)


def generator_skew_residual(st: BracketStructure) -> LambdaPoly:
    u = st.table.u()
    return skew_residual(st, u, u)


def site_bracket(st: BracketStructure, m: int, n: int) -> DiffExpr:
    """[u_m, u_n] = S^n f_(m-n)."""
    return st.mode(m - n).shift(n)


def stretch(st: BracketStructure, n: int) -> BracketStructure:
    """Dilate every mode by ``n``; f_j moves to mode n*j."""
    if n < 1:
        raise ValueError("stretch factor must be >= 1")
    modes = {n * k: v.dilate(n) for k, v in st.modes.items()}
    return BracketStructure(st.order * n, modes, st.table, f"{st.name}^({n})" if n > 1 else st.name)


def format_lambda(poly: Mapping[int, DiffExpr], var: str = "lambda") -> str:
    if not poly:
        return "0"
    return " + ".join(f"{var}^{k}*({format_expr(v)})" for k, v in sorted(poly.items()))


def residual_report(res: BiLambdaPoly) -> List[str]:
    return [f"({m},{n}): {format_expr(v)}" for (m, n), v in sorted(res.items())]

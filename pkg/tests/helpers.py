"""Random expression generators shared by the test modules."""
from __future__ import annotations

import random
from typing import Sequence

from mpva.diffalg import DiffExpr, SymbolTable


def random_monomial(rng: random.Random, table: SymbolTable, sites=(-1, 0, 1, 2),
                    symbols: Sequence[str] = ("u",), max_exp: int = 2,
                    allow_negative: bool = False) -> DiffExpr:
    m = table.const(rng.choice([-3, -2, -1, 1, 2, 3]))
    nfac = rng.randint(1, 3)
    for _ in range(nfac):
        name = rng.choice(list(symbols))
        site = rng.choice(list(sites))
        lo = -1 if allow_negative else 1
        exp = rng.choice([e for e in range(lo, max_exp + 1) if e != 0])
        m = m * table.sym(name, site) ** exp
    return m


def random_expr(rng: random.Random, table: SymbolTable, terms: int = 3, **kw) -> DiffExpr:
    e = table.zero()
    for _ in range(rng.randint(1, terms)):
        e = e + random_monomial(rng, table, **kw)
    return e


def mixed_table() -> SymbolTable:
    """u plus a free g and a defined F with g F' = F."""
    t = SymbolTable()
    t.free("g")
    t.defined("F", "F[0]*g[0]^-1")
    return t

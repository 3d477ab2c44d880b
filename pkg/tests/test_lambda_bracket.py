import random

import pytest

from helpers import random_expr
from mpva.diffalg import SymbolTable
from mpva.exprtext import parse_expr
from mpva.families import FamilySpec, build_family, catalog
from mpva.lambda_bracket import (BracketStructure, generator_skew_residual, is_poisson,
                                 jacobi_coefficient, jacobi_residual, master_bracket,
                                 residual_report, site_bracket, skew_residual,
                                 structure_from_json)


def volterra():
    t = SymbolTable()
    return t, BracketStructure.from_modes({1: t.u(0) * t.u(1)}, "volterra")


def random_structure(rng, t, order):
    modes = {k: random_expr(rng, t, terms=2, sites=tuple(range(0, k + 1))) for k in range(1, order)}
    modes[order] = random_expr(rng, t, terms=2, sites=tuple(range(0, order + 1))) + t.u(0) * t.u(order)
    return BracketStructure.from_modes(modes)


def test_volterra_generator_bracket():
    t, st = volterra()
    u = t.u
    assert master_bracket(u(), u(), st) == {1: u(0) * u(1), -1: -u(0) * u(-1)}


def test_square_against_u():
    t, st = volterra()
    u = t.u
    assert master_bracket(u() ** 2, u(), st) == {1: 2 * u(0) * u(1) ** 2, -1: -2 * u(0) * u(-1) ** 2}


def test_constant_bracket_vanishes():
    t, st = volterra()
    assert master_bracket(t.const(5), t.u(), st) == {}
    assert master_bracket(t.u(), t.param("c"), st) == {}


def test_skew_examples():
    t, st = volterra()
    assert skew_residual(st, t.u(), t.u()) == {}
    assert skew_residual(st, t.u(), t.u() ** 2) == {}


def test_symmetric_raw_structure_is_not_skew():
    t = SymbolTable()
    u = t.u
    raw = BracketStructure.raw({1: u(0) * u(1), -1: u(-1) * u(0)})
    res = generator_skew_residual(raw)
    assert res == {1: 2 * u(0) * u(1), -1: 2 * u(0) * u(-1)}


def test_jacobi_examples():
    t, st = volterra()
    assert jacobi_residual(st) == {}
    comp = build_family(FamilySpec("complementary", 2))
    assert is_poisson(comp)
    bad = BracketStructure.from_modes({1: t.u(0) ** 2 * t.u(1)})
    res = jacobi_residual(bad)
    assert res and not res[(1, 2)].is_zero()
    assert any("(1,2)" in line for line in residual_report(res))


def test_order2_coefficient_24():
    t = SymbolTable()
    rng = random.Random(1)
    st = random_structure(rng, t, 2)
    f2 = st.mode(2)
    expected = f2 * f2.partial(0).shift(2) - f2.shift(2) * f2.partial(2)
    assert jacobi_coefficient(st, 2, 4) == expected


def test_coefficients_outside_window_vanish():
    t = SymbolTable()
    rng = random.Random(2)
    for N in (1, 2, 3):
        st = random_structure(rng, t, N)
        for m in range(1, N + 3):
            for n in range(m + 1, m + N + 3):
                if m > N or n > m + N:
                    assert jacobi_coefficient(st, m, n).is_zero(), (N, m, n)


def test_type_iv_top_coefficient():
    st = build_family(FamilySpec("type-iv"))
    assert jacobi_coefficient(st, 4, 8).is_zero()


def test_equation_class_symmetry():
    t = SymbolTable()
    rng = random.Random(3)
    for _ in range(6):
        st = random_structure(rng, t, rng.randint(1, 3))
        res = jacobi_residual(st)
        for (m, n) in res:
            for image in ((n, m), (-n, m - n), (m - n, -n)):
                assert image in res, ((m, n), image)


def test_site_bracket_general():
    st = build_family(FamilySpec("general", 2))
    t = st.table
    g = t.sym
    assert site_bracket(st, 5, 3) == t.param("c2") * g("g", 5) * g("g", 3)
    assert site_bracket(st, 3, 5) == -t.param("c2") * g("g", 3) * g("g", 5)
    assert site_bracket(st, 4, 4).is_zero()


def test_site_bracket_complementary():
    st = build_family(FamilySpec("complementary", 2))
    t = st.table
    assert site_bracket(st, 3, 1) == t.sym("g", 3) * t.sym("g", 1) * t.sym("F", 2)
    assert site_bracket(st, 1, 3) == -t.sym("g", 1) * t.sym("g", 3) * t.sym("F", 2)


@pytest.mark.parametrize("spec", catalog(), ids=lambda s: f"{s.tag}-{s.order}-{s.eps}")
def test_modes_depend_on_sites_zero_to_k(spec):
    st = build_family(spec)
    for k, f in st.modes.items():
        assert set(f.sites()) <= set(range(0, k + 1)), (k, f)


@pytest.mark.parametrize("spec", catalog(), ids=lambda s: f"{s.tag}-{s.order}-{s.eps}")
def test_top_mode_factorizes(spec):
    st = build_family(spec)
    N = st.order
    gname = "g" if "g" in st.table else "u"
    fN = st.modes[N]
    assert len(fN.terms) == 1
    rest = fN * st.table.sym(gname, 0) ** -1 * st.table.sym(gname, N) ** -1
    for (mono, _), _ in rest.terms.items():
        for site, sym, exp in mono:
            assert 0 < site < N
            if st.table.symbols[sym].name == gname:
                assert exp > 0


def test_m1_and_l1_small():
    t = SymbolTable()
    rng = random.Random(4)
    for _ in range(20):
        st = random_structure(rng, t, rng.randint(1, 2))
        a, b, c = (random_expr(rng, t, terms=2, sites=(-1, 0, 1)) for _ in range(3))
        base = master_bracket(a, b, st)
        assert master_bracket(a.shift(1), b, st) == {k - 1: v for k, v in base.items()}
        assert master_bracket(a.shift(1), b.shift(1), st) == {k: v.shift(1) for k, v in base.items()}
        lhs = master_bracket(a, b * c, st)
        rhs = {k: v * c for k, v in base.items()}
        for k, v in master_bracket(a, c, st).items():
            rhs[k] = rhs[k] + v * b if k in rhs else v * b
        assert lhs == {k: v for k, v in rhs.items() if not v.is_zero()}


def test_json_round_trip():
    st = build_family(FamilySpec("complementary", 3))
    back = structure_from_json(st.to_json())
    assert back.order == 3
    assert back.dumps() == st.dumps()
    assert is_poisson(back)


def test_mutated_mode_breaks_jacobi():
    st = build_family(FamilySpec("complementary", 2))
    t = st.table
    modes = dict(st.modes)
    modes[1] = modes[1] + parse_expr("u[0]*u[1]^2", t)
    assert not is_poisson(BracketStructure.from_modes(modes))


def test_invalid_structures():
    t = SymbolTable()
    with pytest.raises(ValueError):
        BracketStructure.from_modes({1: t.zero()})
    with pytest.raises(ValueError):
        BracketStructure.raw({0: t.u(), 1: t.u()})

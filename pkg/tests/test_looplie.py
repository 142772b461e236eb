import random

import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from hitchin_rmatrix.errors import BothForms, WindowTooSmall
from hitchin_rmatrix.jetring import EXACT, Jet, JetSpace, LaurentBlock, mat_from_rationals
from hitchin_rmatrix.looplie import (
    GroupElement, LieData, LoopElement, ad_conjugate, bracket, pair_B,
)

S0 = JetSpace(0)
L2 = LieData(2)
L3 = LieData(3)


def mono(lie, mat, deg, weight=0, punct=0, nump=1, space=S0, order=0):
    return LoopElement.monomial(lie, space, order, nump, punct, mat, deg, weight)


def test_sl2_casimir_oracle():
    # dual-basis oracle: gamma = e(x)f + f(x)e + 1/2 h(x)h
    assert L2.names == ["e", "f", "h"]
    assert L2.casimir() == [[0, 1, 0], [1, 0, 0], [0, 0, mpq(1, 2)]]


@pytest.mark.parametrize("lie", [L2, L3])
def test_dual_basis(lie):
    for a in range(lie.d):
        for b in range(lie.d):
            assert lie.kappa(lie.basis[a], lie.dual[b]) == (1 if a == b else 0)


@pytest.mark.parametrize("lie", [L2, L3])
def test_casimir_symmetric_and_invariant(lie):
    c = lie.casimir()
    d = lie.d
    assert all(c[a][b] == c[b][a] for a in range(d) for b in range(d))
    # [x(x)1 + 1(x)x, gamma] = 0 for every basis x
    for x in range(d):
        ad = lie.ad_matrix([int(i == x) for i in range(d)])
        t = [[sum(ad[p][a] * c[a][q] for a in range(d)) + sum(ad[q][b] * c[p][b] for b in range(d))
              for q in range(d)] for p in range(d)]
        assert all(v == 0 for row in t for v in row)


@pytest.mark.parametrize("lie", [L2, L3])
def test_kappa_invariance_and_jacobi(lie):
    d = lie.d
    e = lambda i: [int(j == i) for j in range(d)]
    for x in range(d):
        for y in range(d):
            for w in range(d):
                bxy = lie.bracket_coords(e(x), e(y))
                bxw = lie.bracket_coords(e(x), e(w))
                lhs = lie.kappa(lie.matrix(bxy), lie.basis[w]) + lie.kappa(lie.basis[y], lie.matrix(bxw))
                assert lhs == 0
                j = [a + b + c for a, b, c in zip(
                    lie.bracket_coords(e(x), lie.bracket_coords(e(y), e(w))),
                    lie.bracket_coords(e(y), lie.bracket_coords(e(w), e(x))),
                    lie.bracket_coords(e(w), lie.bracket_coords(e(x), e(y))))]
                assert all(v == 0 for v in j)


def test_coords_roundtrip():
    v = [mpq(1), mpq(-2), mpq(3, 4), mpq(5), mpq(0), mpq(7), mpq(1, 3), mpq(-1)]
    assert L3.coords(L3.matrix(v)) == v


def test_pairing_examples():
    e, f = L2.element("e"), L2.element("f")
    a = mono(L2, e, 2)
    assert pair_B(a, mono(L2, f, -3, 1)) == 1
    assert pair_B(a, mono(L2, f, -2, 1)) == 0


def test_pairing_window():
    e, f = L2.element("e"), L2.element("f")
    a = LoopElement([LaurentBlock(0, 0, [mat_from_rationals(S0, 0, e)], 1)])
    w = mono(L2, f, -4, 1)
    with pytest.raises(WindowTooSmall):
        pair_B(a, w)


def test_bracket_examples():
    e, f = L2.element("e"), L2.element("f")
    br = bracket(mono(L2, e, 0), mono(L2, f, 0))
    assert br.coeff(0, 0) == mat_from_rationals(S0, 0, [[1, 0], [0, -1]])
    a = mono(L2, e, 1)
    assert bracket(a, a).is_zero_on_window()
    with pytest.raises(BothForms):
        bracket(mono(L2, e, 0, 1), mono(L2, f, 0, 1))


def test_ad_diagonal():
    t = mpq(3)
    g = GroupElement([LaurentBlock(0, 0, [mat_from_rationals(S0, 0, [[t, 0], [0, 1 / t]])], EXACT)],
                     [LaurentBlock(0, 0, [mat_from_rationals(S0, 0, [[1 / t, 0], [0, t]])], EXACT)])
    out = ad_conjugate(g, mono(L2, L2.element("e"), 0))
    assert out.coeff(0, 0) == mat_from_rationals(S0, 0, [[0, t * t], [0, 0]])


def random_group(rng, nump=1):
    g = GroupElement.identity(2, S0, 0, nump)
    for _ in range(3):
        i, j = rng.choice([(0, 1), (1, 0)])
        g = g * GroupElement.elementary(2, S0, 0, nump, rng.randrange(nump), i, j,
                                        rng.randint(-3, 3), rng.randint(-2, 2))
    return g


def random_loop(rng, weight, nump=1):
    el = None
    for _ in range(3):
        m = L2.matrix([mpq(rng.randint(-4, 4)) for _ in range(3)])
        t = mono(L2, m, rng.randint(-3, 3), weight, rng.randrange(nump), nump)
        el = t if el is None else el + t
    return el


def test_ad_invariance_of_pairing():
    rng = random.Random(7)
    for _ in range(10):
        g = random_group(rng, 2)
        a, w = random_loop(rng, 0, 2), random_loop(rng, 1, 2)
        assert pair_B(ad_conjugate(g, a), ad_conjugate(g, w)) == pair_B(a, w)


def test_group_inverse_checked():
    rng = random.Random(3)
    g = random_group(rng)
    GroupElement(g.blocks, g.inv_blocks, check=True)
    assert g.pole_order() > 0
    with pytest.raises(ValueError):
        GroupElement(g.blocks, g.blocks, check=True)


def test_exp_of_nilpotent_jets():
    sp = JetSpace(2)
    order = 2
    u1 = Jet.var(sp, 0, order)
    zero = Jet.zero(sp, order)
    x = LoopElement([LaurentBlock(0, -1, [((zero, u1), (zero, zero))], EXACT)])
    g = GroupElement.exp_nilpotent(x)
    GroupElement(g.blocks, g.inv_blocks, check=True)
    assert g.blocks[0][-1][0][1] == u1

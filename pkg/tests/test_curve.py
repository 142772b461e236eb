import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from hitchin_rmatrix.curve import FORM, FUNCTION, build_curve
from hitchin_rmatrix.errors import BadDegree, GenusTooSmall, LeadingNotSquare, NotSquarefree

D1 = [-1, 0, 0, 0, 0, 1]
D2 = [1, 1, 0, 0, 0, 0, 1]


@pytest.fixture(scope="module")
def c1():
    return build_curve(D1)


@pytest.fixture(scope="module")
def c2():
    return build_curve(D2)


def test_models(c1, c2):
    assert (c1.model, c1.genus, c1.num_punctures) == ("odd", 2, 1)
    assert (c2.model, c2.genus, c2.num_punctures) == ("even", 2, 2)


def test_errors():
    with pytest.raises(NotSquarefree):
        build_curve([0, 0, 1, 0, 0, 1])  # x^2 (x^3 + 1)
    with pytest.raises(GenusTooSmall):
        build_curve([1, 0, 0, 1])
    with pytest.raises(LeadingNotSquare):
        build_curve([1, 1, 0, 0, 0, 0, 2])
    with pytest.raises(BadDegree):
        build_curve([3])


def test_d1_y_expansion(c1):
    # y = z^-5 (1 - z^10/2 - z^20/8 - ...)
    y = c1.y_expansion(0, 20)
    assert y.lo == -5
    assert y[-5] == 1 and y[5] == mpq(-1, 2) and y[15] == mpq(-1, 8)
    assert all(y[d] == 0 for d in range(-4, 5))


@pytest.mark.parametrize("coeffs", [D1, D2, [2, 0, 3, 0, 0, 5], [1, 2, 3, 4, 5, 6, 9]])
def test_curve_equation(coeffs):
    c = build_curve(coeffs)
    for p in range(c.num_punctures):
        assert c.check_equation(p, 30)


def test_odd_non_square_leading():
    c = build_curve([1, 0, 0, 0, 0, 3])
    assert c.lam == mpq(1, 3)
    assert c.check_equation(0, 20)


def test_d1_function_basis(c1):
    basis = c1.outer_basis(FUNCTION, 7)
    orders = [e.pole_orders()[0] for e in basis]
    assert orders == [0, 2, 4, 5, 6, 7]


def test_d2_function_basis_count(c2):
    for p in range(2, 9):
        basis = c2.outer_basis(FUNCTION, p)
        assert len(basis) == 2 * p - 1


def test_d1_holomorphic_forms(c1):
    basis = c1.outer_basis(FORM, 0)
    assert [b.label() for b in basis] == ["(1*1) dx/y", "(1*x) dx/y"]
    assert len(basis) == 2
    assert all(max(e.pole_orders()) <= 0 for e in basis)


@pytest.mark.parametrize("coeffs", [D1, D2, [1, 0, 0, 0, 0, 0, 0, 1]])
def test_riemann_roch(coeffs):
    c = build_curve(coeffs)
    for p in range(c.genus, 12):
        if c.num_punctures * p > 2 * c.genus - 2:
            assert len(c.outer_basis(FUNCTION, p)) == c.riemann_roch_count(FUNCTION, p)
            assert len(c.outer_basis(FORM, p)) == c.riemann_roch_count(FORM, p)


def test_weierstrass_gaps(c1):
    orders = set(e.pole_orders()[0] for e in c1.outer_basis(FUNCTION, 20))
    assert set(range(21)) - orders == {1, 3}


def test_basis_pole_orders_match_expansions(c2):
    for kind in (FUNCTION, FORM):
        for e in c2.outer_basis(kind, 6):
            nominal = c2.basis_pole_order(kind, 1 if e.b else 0, len(e.b or e.a) - 1)
            assert max(e.pole_orders()) == nominal


def test_residue_theorem(c1, c2):
    assert c1.residue_sum(c1.monomial(FORM, 1, 0)) == 0  # dx
    assert c1.residue_sum(c1.monomial(FORM, 0, 2)) == 0  # x^2 dx/y
    assert c2.residue_sum(c2.monomial(FORM, 0, 1)) == 0  # x dx/y
    x2 = c2.monomial(FORM, 0, 2)
    r = [c2.expand(x2, p, -1).residue() for p in range(2)]
    assert r[0] == -r[1] and r[0] != 0


@given(st.lists(st.integers(-5, 5), min_size=4, max_size=4))
@settings(max_examples=20, deadline=None)
def test_residue_theorem_random(cs):
    c = build_curve(D2)
    form = c.monomial(FORM, 0, 0).scale(cs[0])
    for coeff, (yd, i) in zip(cs[1:], [(0, 2), (0, 3), (1, 1)]):
        form = form + c.monomial(FORM, yd, i, coeff)
    assert c.residue_sum(form) == 0


def test_d1_dx_expansion_is_exact(c1):
    dx = c1.expand(c1.monomial(FORM, 1, 0), 0, 10)
    assert dict(dx.items()) == {-3: -2}

import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from hitchin_rmatrix.errors import NotASquare, NotAUnit, PunctureMismatch, WindowTooSmall
from hitchin_rmatrix.jetring import (
    Jet, JetSpace, LaurentBlock, Q, laurent_mul, mat_inverse, mat_mul, mat_identity,
    mat_from_rationals, qstr, residue, series_invert, series_sqrt,
)

S2 = JetSpace(2)
rationals = st.builds(lambda a, b: mpq(a, b), st.integers(-30, 30), st.integers(1, 12))


def jets(order=2, unit=False):
    n = S2.sizes[order]
    head = rationals.filter(lambda v: v != 0) if unit else rationals
    return st.tuples(head, st.lists(rationals, min_size=n - 1, max_size=n - 1)).map(
        lambda hc: Jet(S2, order, [hc[0]] + hc[1]))


def scalar_block(values, lo=0, hi=None, p=1, weight=0):
    hi = lo + len(values) - 1 if hi is None else hi
    return LaurentBlock.from_rationals(p, lo, values, hi, weight)


def test_space_sizes():
    assert S2.sizes[:4] == [1, 3, 6, 10]
    assert JetSpace(2) is S2
    assert JetSpace(0).sizes[3] == 1


def test_qstr_roundtrip():
    for v in [mpq(0), mpq(-3), mpq(7, 12), mpq(-1, 3)]:
        assert Q(qstr(v)) == v
    assert qstr(mpq(4, 2)) == "2"


def test_jet_product_truncates():
    u1 = Jet.var(S2, 0, 2)
    u2 = Jet.var(S2, 1, 2)
    assert (u1 * u2).coefficients() == {(1, 1): 1}
    assert (u1 * u1 * u2).is_zero()


def test_derive_drops_order():
    u1 = Jet.var(S2, 0, 2)
    f = u1 * u1 * 3 + u1 + 2
    d = f.derive(0)
    assert d.order == 1
    assert d == Jet.from_dict(S2, 1, {(0, 0): 1, (1, 0): 6})


@given(jets(), jets(), jets())
@settings(max_examples=40, deadline=None)
def test_jet_ring_axioms(a, b, c):
    assert a * (b + c) == a * b + a * c
    assert (a * b) * c == a * (b * c)
    assert a * b == b * a


@given(jets(unit=True))
@settings(max_examples=40, deadline=None)
def test_jet_inverse(a):
    assert a * a.inverse() == Jet.const(S2, 1, 2)


@given(jets(), jets())
@settings(max_examples=30, deadline=None)
def test_leibniz(a, b):
    for alpha in range(2):
        assert (a * b).derive(alpha) == a.derive(alpha) * b + a * b.derive(alpha)


def test_jet_nonunit_raises():
    with pytest.raises(NotAUnit):
        Jet.var(S2, 0, 2).inverse()


def test_jet_evaluate():
    u1, u2 = Jet.var(S2, 0, 2), Jet.var(S2, 1, 2)
    f = u1 * u2 * 5 + u2 - 1
    assert f.evaluate([2, 3]) == 32


def test_geometric_series_inverse():
    # 1 - z has inverse 1 + z + z^2 + ...
    a = scalar_block([1, -1], hi=6)
    inv = series_invert(a)
    assert [inv.scalar(d) for d in range(7)] == [1] * 7
    assert inv.certified_to == 6


def test_invert_shifted_window():
    # z^-2 (1 + z) on degrees -2..3: inverse known to degree 3 - 2*(-2) = 7
    a = scalar_block([1, 1], lo=-2, hi=3)
    inv = series_invert(a)
    assert inv.lo == 2 and inv.certified_to == 7
    assert [inv.scalar(d) for d in range(2, 8)] == [1, -1, 1, -1, 1, -1]


def test_mul_window_calculus():
    a = scalar_block([1, 2], lo=-1, hi=4)
    b = scalar_block([3], lo=2, hi=5)
    c = laurent_mul(a, b)
    assert c.lo == 1 and c.certified_to == min(4 + 2, 5 - 1)
    assert c.scalar(1) == 3 and c.scalar(2) == 6


def test_puncture_mismatch():
    with pytest.raises(PunctureMismatch):
        laurent_mul(scalar_block([1]), scalar_block([1], p=2))


def test_window_too_small():
    a = scalar_block([1, 2], hi=1)
    with pytest.raises(WindowTooSmall):
        a[2]


@given(st.lists(rationals, min_size=1, max_size=6), st.integers(-3, 3))
@settings(max_examples=40, deadline=None)
def test_inverse_property(values, lo):
    values = [Q(v) for v in values]
    if values[0] == 0:
        values[0] = mpq(1)
    a = scalar_block(values, lo=lo, hi=lo + 8)
    prod = laurent_mul(a, series_invert(a))
    assert prod.lo == 0
    assert prod.scalar(0) == 1
    assert all(prod.scalar(d) == 0 for d in range(1, prod.certified_to + 1))


def test_sqrt_of_binomial():
    # sqrt(1 + 4z) = 1 + 2z - 2z^2 + 4z^3 - 10z^4 + ...
    a = scalar_block([1, 4], hi=5)
    s = series_sqrt(a)
    assert [s.scalar(d) for d in range(6)] == [1, 2, -2, 4, -10, 28]


def test_sqrt_even_valuation_and_scale():
    a = scalar_block([9, 0, 9], lo=-4, hi=3)
    s = series_sqrt(a)
    assert s.lo == -2
    sq = laurent_mul(s, s)
    assert all(sq.scalar(d) == a.scalar(d) for d in range(-4, sq.certified_to + 1))


def test_sqrt_rejects():
    with pytest.raises(NotASquare):
        series_sqrt(scalar_block([2, 1], hi=3))
    with pytest.raises(NotASquare):
        series_sqrt(scalar_block([1], lo=-1, hi=3))


@given(st.lists(rationals, min_size=1, max_size=5), st.integers(1, 6))
@settings(max_examples=30, deadline=None)
def test_sqrt_squares_back(values, root_lead):
    values = [Q(v) for v in values]
    values[0] = mpq(root_lead) ** 2
    a = scalar_block(values, hi=7)
    s = series_sqrt(a)
    sq = laurent_mul(s, s)
    assert all(sq.scalar(d) == a.scalar(d) for d in range(0, sq.certified_to + 1))


def test_sqrt_of_jet_series():
    u1 = Jet.var(S2, 0, 2)
    one = Jet.const(S2, 1, 2)
    a = LaurentBlock(1, 0, [((one,),), ((u1 * 2,),)], 4)
    s = series_sqrt(a)
    sq = laurent_mul(s, s)
    assert sq.equal_on_window(a)


def test_matrix_inverse_and_block_inverse():
    S0 = JetSpace(0)
    m = mat_from_rationals(S0, 0, [[1, 2], [3, 4]])
    assert mat_mul(m, mat_inverse(m)) == mat_identity(S0, 0, 2)
    one = mat_identity(S0, 0, 2)
    nil = mat_from_rationals(S0, 0, [[0, 1], [0, 0]])
    a = LaurentBlock(1, -1, [one, nil], 3)
    prod = laurent_mul(a, series_invert(a))
    assert prod[0] == one
    assert all(prod[d] == mat_from_rationals(S0, 0, [[0, 0], [0, 0]])
               for d in range(1, prod.certified_to + 1))


def test_residue_and_derivative():
    # d/dz of z^-1 + 3 z^2 has zero residue; z^-1 dz has residue 1
    f = scalar_block([1, 0, 0, 3], lo=-1, hi=4)
    df = f.derive_z()
    assert df.weight == 1
    assert residue(df)[0][0] == 0
    assert residue(scalar_block([1], lo=-1, hi=2, weight=1))[0][0] == 1
    with pytest.raises(WindowTooSmall):
        residue(scalar_block([1], lo=-3, hi=-2, weight=1))


def test_json_roundtrip():
    u1 = Jet.var(S2, 0, 2)
    a = LaurentBlock(2, -1, [((u1 + mpq(1, 3),),), ((u1 * u1,),)], 3, weight=1)
    b = LaurentBlock.from_json(a.to_json())
    assert b.equal_on_window(a) and b.certified_to == 3 and b.weight == 1


def test_window_audit_on_random_dags():
    from hitchin_rmatrix.jetring import window_audit
    compared, failures = window_audit(count=10, seed=3)
    assert compared > 0 and failures == []

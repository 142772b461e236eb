import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from hitchin_rmatrix.errors import PoleBoundTooSmall, SingularSystem
from hitchin_rmatrix.jetring import Jet, JetSpace
from hitchin_rmatrix.linalg import (
    JetSystem, inverse, matmul, matvec, nullspace, rank, rref, solve,
)

small = st.integers(-5, 5).map(mpq)


def test_rref_known():
    red, piv = rref([[mpq(1), mpq(2), mpq(3)], [mpq(2), mpq(4), mpq(7)]])
    assert piv == [0, 2]
    assert red == [[1, 2, 0], [0, 0, 1]]


@given(st.lists(st.lists(small, min_size=4, max_size=4), min_size=1, max_size=5))
@settings(max_examples=50, deadline=None)
def test_nullspace_rank_nullity(rows):
    ns = nullspace(rows, 4)
    assert rank(rows) + len(ns) == 4
    for v in ns:
        assert all(x == 0 for x in matvec(rows, v))


@given(st.lists(st.lists(small, min_size=3, max_size=3), min_size=3, max_size=3))
@settings(max_examples=50, deadline=None)
def test_inverse(rows):
    if rank(rows) < 3:
        with pytest.raises(SingularSystem):
            inverse(rows)
        return
    ident = matmul(rows, inverse(rows))
    assert ident == [[int(i == j) for j in range(3)] for i in range(3)]


def test_solve_overdetermined():
    a = [[mpq(1), mpq(0)], [mpq(0), mpq(1)], [mpq(1), mpq(1)]]
    assert solve(a, [[mpq(1)], [mpq(2)], [mpq(3)]]) == [[1], [2]]
    with pytest.raises(PoleBoundTooSmall):
        solve(a, [[mpq(1)], [mpq(2)], [mpq(4)]])
    with pytest.raises(SingularSystem):
        solve([[mpq(1), mpq(1)]], [[mpq(1)]])


def test_jet_system_matches_series_inverse():
    # (1 + u1) x = 1 has x = 1 - u1 + u1^2 at order 2
    sp = JetSpace(1)
    one = Jet.const(sp, 1, 2)
    u = Jet.var(sp, 0, 2)
    sysm = JetSystem([{0: one + u}, {0: (one + u) * 2}], 1, sp, 2)
    (x,), = [sysm.solve([[one], [one * 2]])[0]]
    assert x == one - u + u * u
    with pytest.raises(PoleBoundTooSmall):
        sysm.solve([[one], [one * 3]])


@given(st.lists(small, min_size=12, max_size=12), st.lists(small, min_size=6, max_size=6))
@settings(max_examples=30, deadline=None)
def test_jet_system_property(coeffs, rhs):
    sp = JetSpace(1)
    mk = lambda a, b, c: Jet(sp, 2, [a, b, c])
    a = [[mk(*coeffs[3 * (2 * i + j):3 * (2 * i + j) + 3]) for j in range(2)] for i in range(2)]
    if rank([[x.value for x in row] for row in a]) < 2:
        return
    b = [[mk(*rhs[0:3])], [mk(*rhs[3:6])]]
    x = JetSystem([{0: r[0], 1: r[1]} for r in a], 2, sp, 2).solve(b)
    for i in range(2):
        assert a[i][0] * x[0][0] + a[i][1] * x[1][0] == b[i][0]

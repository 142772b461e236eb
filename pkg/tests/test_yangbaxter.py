import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from hitchin_rmatrix.kernels import KernelSet, perturb_column
from hitchin_rmatrix.yangbaxter import (
    FAIL, INCONCLUSIVE, PASS, IdentityReport, auxiliary_identity_check, dcybe_residual,
    default_window, extended_dcybe_residual, hitchin_weak_identity, lift, r_bracket_lemma_check,
    reproducing_check, series_bracket, szego_check,
)


def test_report_status_logic():
    assert IdentityReport("x", {}).status == INCONCLUSIVE
    assert IdentityReport("x", {}, checked=3).status == PASS
    assert IdentityReport("x", {}, checked=3, uncertified=1).status == INCONCLUSIVE
    assert IdentityReport("x", {}, checked=3, nonzero=[((0,), {})]).status == FAIL
    js = IdentityReport("x", {"lo": 0}, checked=1).to_json()
    assert js["status"] == PASS and js["nonzero_count"] == 0


def test_default_window():
    assert default_window(3) == {"a_lo": -4, "a_hi": 3, "bc_max": 2}


def test_dcybe_and_negative_control(ks1):
    rep = dcybe_residual(ks1)
    assert rep.status == PASS and rep.checked == 48
    control = dcybe_residual(ks1, dynamical=False)
    assert control.status == FAIL


def test_dcybe_uncertified_beyond_columns(chart1):
    small = KernelSet(chart1, 3, Kc=1)
    rep = dcybe_residual(small)
    assert rep.uncertified > 0 and rep.status == INCONCLUSIVE


def test_extended_dcybe(ks1):
    assert extended_dcybe_residual(ks1).status == PASS


def test_auxiliary_identity(ks1):
    assert auxiliary_identity_check(ks1).status == PASS


def test_szego(ks1):
    assert szego_check(ks1).status == PASS


def test_reproducing_kernel(ks1):
    assert reproducing_check(ks1).status == PASS


def test_r_bracket_lemma(ks1):
    assert r_bracket_lemma_check(ks1).status == PASS


@pytest.mark.parametrize("extended", [False, True])
def test_hitchin_weak_identity(ks1, extended):
    assert hitchin_weak_identity(ks1, extended=extended).status == PASS


def test_mutated_column_breaks_dcybe(chart1):
    ks = KernelSet(chart1, 3)
    perturb_column(ks, (0, 1, 0), 0, mpq(1, 7))
    assert dcybe_residual(ks).status == FAIL


coord = st.fractions(min_value=-5, max_value=5, max_denominator=6)
vec = st.lists(coord, min_size=3, max_size=3)
loop = st.dictionaries(st.integers(-2, 2), vec, max_size=3)


def _lift(chart, raw):
    return [{k: [lift(chart, mpq(x)) for x in v] for k, v in raw.items()}]


def _neg(a):
    return [{k: [-x for x in v] for k, v in ai.items()} for ai in a]


def _same(a, b):
    keys = set(a[0]) | set(b[0])
    zero = [None] * 3
    for k in keys:
        u, v = a[0].get(k, zero), b[0].get(k, zero)
        for x, y in zip(u, v):
            if x is None and y is None:
                continue
            if x is None or y is None:
                if not (x if x is not None else y).is_zero():
                    return False
            elif not (x - y).is_zero():
                return False
    return True


@settings(max_examples=25, deadline=None)
@given(loop, loop)
def test_series_bracket_antisymmetric(chart1, a, b):
    lie = chart1.lie
    x, y = _lift(chart1, a), _lift(chart1, b)
    assert _same(series_bracket(lie, x, y, 10), _neg(series_bracket(lie, y, x, 10)))

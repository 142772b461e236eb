import random

import pytest
from gmpy2 import mpq

from hitchin_rmatrix.errors import DepthExceeded, NotInnerOuter
from hitchin_rmatrix.jetring import Jet
from hitchin_rmatrix.kernels import (
    GaugeSpec, KernelSet, contract_x, contract_y, direct_minus, gauge_transform, pair_series,
    project_minus, project_plus, project_plus_dual, random_loop, series_equal, series_sub,
)


def frame(chart, alpha):
    return chart.xi[alpha]


@pytest.fixture(params=["ks1", "ks2"])
def ks(request):
    return request.getfixturevalue(request.param)


def test_column_principal_parts(ks):
    chart = ks.chart
    lie = chart.lie
    d = lie.d
    for i in range(chart.num_punctures):
        for k in range(ks.Kc + 1):
            for a in range(d):
                for ix in range(chart.num_punctures):
                    coords = ks.column_coords(i, k, a, ix, -1)
                    for e, v in coords.items():
                        if e >= 0 or all(x.is_zero() for x in v):
                            continue
                        assert ix == i and e == -k - 1
                        assert [x.value for x in v] == [lie.gram_inv[a][q] for q in range(d)]
                        assert all(x.is_constant() for x in v)


def test_columns_annihilate_frame(ks):
    chart = ks.chart
    for key in [(0, 0, 0), (0, 1, 2), (chart.num_punctures - 1, ks.K, 1)]:
        hi = 2 * ks.pole_xi + 2
        col = [ks.column_coords(*key, ix, hi) for ix in range(chart.num_punctures)]
        for alpha in range(chart.m):
            val = pair_series(chart.lie, frame(chart, alpha), col)
            assert val is None or val.is_zero()


def test_columns_independent_of_pole_bound(ks1):
    wider = KernelSet(ks1.chart, ks1.K, slack=ks1.store.slack + 2)
    assert wider.store.max_pole > ks1.store.max_pole
    for key in [(0, 0, 0), (0, 2, 1), (0, ks1.Kc, 2)]:
        assert series_equal([ks1.column_coords(*key, 0, 6)], [wider.column_coords(*key, 0, 6)],
                            -ks1.Kc - 1, 6)


def test_ensure_keeps_old_columns(chart1):
    small = KernelSet(chart1, 2, Kc=4)
    old = small.column_coords(0, 3, 1, 0, 5)
    small.ensure(7)
    assert small.Kc == 7
    assert series_equal([old], [small.column_coords(0, 3, 1, 0, 5)], -10, 5)


def test_rho_reproduces_frame(ks):
    chart = ks.chart
    hi = ks.K
    for alpha in range(chart.m):
        xi = frame(chart, alpha)
        got = contract_x(ks.rho, chart.lie, xi, hi)
        assert series_equal(got, xi, -ks.pole_xi - 1, hi)


def test_rbar_fixes_frame(ks):
    chart = ks.chart
    for alpha in range(chart.m):
        xi = frame(chart, alpha)
        got = project_minus(ks, xi, ks.K)
        assert series_equal(got, xi, -ks.pole_xi - 1, ks.K)


def test_projection_matches_direct_decomposition(ks):
    chart = ks.chart
    rng = random.Random(5)
    hi = 3
    for _ in range(20):
        a = random_loop(chart, rng, -ks.K, ks.K)
        got = project_minus(ks, a, hi)
        want = direct_minus(chart, a, hi)
        assert series_equal(got, want, -ks.K - 10, hi)


def test_projections_sum_to_identity(ks1):
    chart = ks1.chart
    rng = random.Random(8)
    a = random_loop(chart, rng, -2, 4)
    plus = project_plus(ks1, a, 4)
    minus = project_minus(ks1, a, 4)
    total = series_sub(plus, [{k: [-x for x in v] for k, v in mi.items()} for mi in minus])
    assert series_equal(total, a, -10, 4)


def test_projection_adjointness(ks1):
    # B(Pi_+ a, w) = B(a, Pi_+^* w) for a loop a and a form w
    chart = ks1.chart
    lie = chart.lie
    rng = random.Random(9)
    for _ in range(3):
        a = random_loop(chart, rng, -2, 2)
        w = random_loop(chart, rng, -3, 1)
        left = pair_series(lie, project_plus(ks1, a, 2), w)
        dual = project_plus_dual(ks1, w, 2)
        right = pair_series(lie, a, dual)
        zero = chart.zero
        assert ((left or zero) - (right or zero)).is_zero()


def test_projection_depth_limit(ks1):
    chart = ks1.chart
    deep = [{-ks1.Kc - 3: [chart.one] * chart.lie.d}]
    with pytest.raises(DepthExceeded):
        project_minus(ks1, deep, 0)


def test_contractions_agree_on_symmetric_pairing(ks1):
    # B(a (x) b, r) computed through either slot
    chart = ks1.chart
    lie = chart.lie
    rng = random.Random(12)
    a = random_loop(chart, rng, 0, 2)
    b = random_loop(chart, rng, -3, -1)
    via_y = pair_series(lie, a, contract_y(ks1.r, lie, b, 4))
    via_x = pair_series(lie, b, contract_x(ks1.r, lie, a, 4))
    zero = chart.zero
    assert ((via_y or zero) - (via_x or zero)).is_zero()


# -- gauge transformations ----------------------------------------------------

def test_gauge_identity(ks1):
    chart2, ks2_, rep = gauge_transform(ks1.chart, ks1, GaugeSpec())
    assert rep.passed
    assert chart2.jet_order == ks1.chart.jet_order - 1


def test_gauge_constant_unipotent_coframe(ks1):
    _, _, rep = gauge_transform(ks1.chart, ks1, GaugeSpec(plus=[(0, 1, 0, mpq(2), 0, None)]))
    assert rep.checks["omega"]["mismatches"] == 0 and rep.checks["omega"]["checked"] > 0
    assert rep.passed


def test_gauge_rho_dual_path(ks1):
    # g_+ = exp(u_1 e z): the rho formula matches recomputation exactly
    _, _, rep = gauge_transform(ks1.chart, ks1, GaugeSpec(plus=[(0, 0, 1, mpq(1), 1, 0)]))
    assert rep.checks["rho"]["mismatches"] == 0
    assert rep.passed


def test_gauge_minus_fixes_rho_sign(ks1):
    spec = GaugeSpec(minus=[(1, 0, mpq(1), 0, 1)])
    _, _, rep = gauge_transform(ks1.chart, ks1, spec)
    assert rep.passed and rep.rho_sign == 1
    assert rep.checks["rho"]["other_sign_mismatches"] > 0


@pytest.mark.parametrize("spec", [
    GaugeSpec(plus=[(0, 0, 1, mpq(1), -1, None)]),
    GaugeSpec(minus=[(0, 1, mpq(1), -1, None)]),
    GaugeSpec(plus=[(0, 1, 1, mpq(1), 0, None)]),
])
def test_gauge_rejects_invalid_factors(ks1, spec):
    with pytest.raises(NotInnerOuter):
        gauge_transform(ks1.chart, ks1, spec)


def test_gauge_spec_roundtrip():
    spec = GaugeSpec([(0, 0, 1, mpq(1, 2), 1, 0)], [(1, 0, mpq(-3), 2, None)])
    assert GaugeSpec.from_json(spec.to_json()) == spec

"""The dynamical r-matrix and its relatives as exact two-variable kernels.

Each column ``r_{i,k,a}`` is stored as a global form ``G`` with
``r_{i,k,a} = Ad(sigma^-1) G``; expansions at any puncture are therefore exact
to any demanded degree.  The only hard truncation is the number of columns
``Kc`` (the largest y-degree of ``r`` that is materialized).

A two-variable kernel ``T(x, y)`` with ``x`` at puncture ``ix`` and ``y`` at
puncture ``iy`` is accessed through ``coeff(ix, iy, a, b)``, the ``d x d``
coordinate matrix of the ``x^a y^b`` coefficient (entry ``[p][q]`` multiplies
``I_p (x) I_q``).  ``lo_x``/``lo_y`` give lower bounds on the degrees in each
slot, so every bracket or pairing is a finite sum; ``available`` tells whether
a coefficient is certified.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .chart import (BundleChart, GlobalForm, GlobalFormSystem, OuterSpan, adjoint_coords,
                    apply_matrix_series, conjugated_rows, loop_coords)
from .curve import FORM, FUNCTION
from .errors import DepthExceeded, JetOrderTooLow, NotInnerOuter, PoleBoundTooSmall, WindowTooSmall
from .jetring import EXACT, Jet, LaurentBlock, Q, laurent_mul, qstr
from .linalg import JetSystem
from .looplie import GroupElement, LoopElement, ad_conjugate

INF = 10 ** 9


class ColumnStore:
    """Solved columns with cached expansions in the first variable."""

    def __init__(self, chart, Kc, slack=2, max_slack=32):
        self.chart = chart
        self.Kc = Kc
        lie = chart.lie
        nump = chart.num_punctures
        slack_now = slack
        while True:
            max_pole = Kc + 1 + 2 * chart.pole_order + slack_now
            try:
                system = GlobalFormSystem(chart, max_pole)
                keys = [(i, k, a) for i in range(nump) for k in range(Kc + 1) for a in range(lie.d)]
                rhs = [system.rhs_column(*key) for key in keys]
                rhs += [system.rhs_coframe(al) for al in range(chart.m)]
                forms = system.solve(rhs)
                break
            except PoleBoundTooSmall:
                if slack_now >= max_slack:
                    raise
                slack_now *= 2
        self.slack = slack_now
        self.max_pole = max_pole
        self.system = system
        self.forms = dict(zip(keys, forms[:len(keys)]))
        self.omega_forms = forms[len(keys):]
        self._cache = {}

    @classmethod
    def restore(cls, chart, data):
        """Rebuild a store from :meth:`to_json` output without solving."""
        store = cls.__new__(cls)
        store.chart = chart
        store.Kc = data["Kc"]
        store.slack = data["slack"]
        store.max_pole = data["max_pole"]
        store.system = None
        span = OuterSpan(chart.curve, chart.lie, FORM, store.max_pole)

        def form(coeffs):
            return GlobalForm(span, [Jet.from_json(chart.space, chart.jet_order, c) for c in coeffs])
        store.forms = {tuple(int(t) for t in key.split(",")): form(c)
                       for key, c in data["columns"].items()}
        store.omega_forms = [form(c) for c in data["omega"]]
        store._cache = {}
        return store

    def to_json(self):
        return {"Kc": self.Kc, "slack": self.slack, "max_pole": self.max_pole,
                "columns": {",".join(map(str, k)): [c.to_json() for c in f.coeffs]
                            for k, f in sorted(self.forms.items())},
                "omega": [[c.to_json() for c in f.coeffs] for f in self.omega_forms]}

    def coords(self, key, ix, hi):
        """``{degree: [d jets]}`` of the column at puncture ix, degrees <= hi."""
        ck = (key, ix)
        hit = self._cache.get(ck)
        if hit is None or hit[0] < hi:
            new_hi = max(hi, 2 * hit[0] if hit else hi, 4)
            hit = (new_hi, self.chart.conj_coords(self.forms[key], ix, new_hi))
            self._cache[ck] = hit
        return hit[1]

    def value(self, key, ix, deg):
        return self.coords(key, ix, deg).get(deg)


class Tensor2:
    """Base class for two-variable kernels."""

    d = 0
    order = 0

    def coeff(self, ix, iy, a, b):
        raise NotImplementedError

    def lo_x(self, ix, iy, b):
        raise NotImplementedError

    def lo_y(self, ix, iy, a):
        raise NotImplementedError

    def available(self, ix, iy, a, b):
        return True

    def get(self, ix, iy, a, b):
        """Coefficient or None when zero; raises WindowTooSmall when uncertified."""
        if a < self.lo_x(ix, iy, b) or b < self.lo_y(ix, iy, a):
            return None
        if not self.available(ix, iy, a, b):
            raise WindowTooSmall(f"coefficient ({ix},{iy},{a},{b}) not certified")
        return self.coeff(ix, iy, a, b)

    def __add__(self, other):
        return SumTensor([(1, self), (1, other)])

    def __sub__(self, other):
        return SumTensor([(1, self), (-1, other)])


def _zero_mat(d):
    return None


def _madd(acc, m, sign=1):
    if m is None:
        return acc
    if acc is None:
        return [[x if sign == 1 else -x for x in row] for row in m]
    if sign == 1:
        return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(acc, m)]
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(acc, m)]


class RKernel(Tensor2):
    """``r(x, y) = sum col_{iy,b,q}(x) (x) I_q y^b``; diagonal pole ``gamma x^(-b-1) y^b``."""

    def __init__(self, store: ColumnStore):
        self.store = store
        self.d = store.chart.lie.d
        self.order = store.chart.jet_order
        self.zero = store.chart.zero

    def lo_x(self, ix, iy, b):
        return -b - 1 if ix == iy else 0

    def lo_y(self, ix, iy, a):
        return 0

    def available(self, ix, iy, a, b):
        return b <= self.store.Kc

    def coeff(self, ix, iy, a, b):
        d = self.d
        cols = [self.store.value((iy, b, q), ix, a) for q in range(d)]
        if all(c is None for c in cols):
            return None
        z = self.zero
        return [[(cols[q][p] if cols[q] is not None else z) for q in range(d)] for p in range(d)]


class RbarKernel(Tensor2):
    """``rbar(x, y) = gamma dy/(x - y) - tau(s(y, x))`` expanded for |y| < |x|."""

    def __init__(self, store: ColumnStore):
        self.store = store
        lie = store.chart.lie
        self.d = lie.d
        self.order = store.chart.jet_order
        self.zero = store.chart.zero
        one = store.chart.one
        self.gamma = [[one * v for v in row] for row in lie.casimir()]

    def lo_x(self, ix, iy, b):
        return -b - 1 if ix == iy else 0

    def lo_y(self, ix, iy, a):
        return 0

    def available(self, ix, iy, a, b):
        return a <= self.store.Kc

    def coeff(self, ix, iy, a, b):
        if a < 0:
            if ix == iy and b == -a - 1:
                return self.gamma
            return None
        d = self.d
        cols = [self.store.value((ix, a, q), iy, b) for q in range(d)]
        if all(c is None for c in cols):
            return None
        z = self.zero
        return [[(-cols[p][q] if cols[p] is not None else z) for q in range(d)] for p in range(d)]


class FrameCoframe(Tensor2):
    """``sum_alpha omega_alpha(x) (x) xi_alpha(y)`` or the swapped ``xi (x) omega``."""

    def __init__(self, chart, swapped=False, omega_forms=None):
        self.chart = chart
        self.d = chart.lie.d
        self.order = chart.jet_order
        self.swapped = swapped
        self.forms = omega_forms if omega_forms is not None else chart.omega
        self._cache = {}
        self.xi_lo = [min([min(x[i]) for x in chart.xi if x[i]], default=0)
                      for i in range(chart.num_punctures)]

    def omega(self, alpha, i, deg):
        key = (alpha, i)
        hit = self._cache.get(key)
        if hit is None or hit[0] < deg:
            hi = max(deg, 2 * hit[0] if hit else deg, 4)
            hit = (hi, self.chart.conj_coords(self.forms[alpha], i, hi))
            self._cache[key] = hit
        return hit[1].get(deg)

    def lo_x(self, ix, iy, b):
        return self.xi_lo[ix] if self.swapped else 0

    def lo_y(self, ix, iy, a):
        return 0 if self.swapped else self.xi_lo[iy]

    def coeff(self, ix, iy, a, b):
        acc = None
        d = self.d
        for alpha in range(self.chart.m):
            if self.swapped:
                u = self.chart.xi[alpha][ix].get(a)
                v = self.omega(alpha, iy, b)
            else:
                u = self.omega(alpha, ix, a)
                v = self.chart.xi[alpha][iy].get(b)
            if u is None or v is None:
                continue
            m = [[u[p] * v[q] for q in range(d)] for p in range(d)]
            acc = _madd(acc, m)
        return acc


class SumTensor(Tensor2):
    def __init__(self, terms):
        self.terms = terms
        self.d = terms[0][1].d
        self.order = min(t.order for _, t in terms)

    def lo_x(self, ix, iy, b):
        return min(t.lo_x(ix, iy, b) for _, t in self.terms)

    def lo_y(self, ix, iy, a):
        return min(t.lo_y(ix, iy, a) for _, t in self.terms)

    def available(self, ix, iy, a, b):
        return all(t.available(ix, iy, a, b) for _, t in self.terms
                   if a >= t.lo_x(ix, iy, b) and b >= t.lo_y(ix, iy, a))

    def coeff(self, ix, iy, a, b):
        acc = None
        for sign, t in self.terms:
            acc = _madd(acc, t.get(ix, iy, a, b), sign)
        return acc


class JetDerivative(Tensor2):
    """Coefficientwise d/du_alpha (one jet order lower)."""

    def __init__(self, base: Tensor2, alpha):
        self.base = base
        self.alpha = alpha
        self.d = base.d
        self.order = base.order - 1

    def lo_x(self, ix, iy, b):
        return self.base.lo_x(ix, iy, b)

    def lo_y(self, ix, iy, a):
        return self.base.lo_y(ix, iy, a)

    def available(self, ix, iy, a, b):
        return self.base.available(ix, iy, a, b)

    def coeff(self, ix, iy, a, b):
        m = self.base.coeff(ix, iy, a, b)
        if m is None:
            return None
        return [[x.derive(self.alpha) for x in row] for row in m]


class Covariant(Tensor2):
    """``nabla_alpha = d_alpha + ad(xi_alpha) (x) 1 + 1 (x) ad(xi_alpha)`` on a kernel."""

    def __init__(self, base: Tensor2, chart, alpha):
        self.base = base
        self.chart = chart
        self.alpha = alpha
        self.d = base.d
        self.order = base.order - 1
        self.xi = chart.xi[alpha]
        self.fnz = chart.lie.fnz
        self.xi_lo = [min(x) if x else 0 for x in self.xi]

    def _shifts(self, i, deg):
        return {deg} | {deg - s for s in self.xi[i]}

    def lo_x(self, ix, iy, b):
        low = min(self.base.lo_x(ix, iy, bb) for bb in self._shifts(iy, b))
        return low + min(self.xi_lo[ix], 0)

    def lo_y(self, ix, iy, a):
        low = min(self.base.lo_y(ix, iy, aa) for aa in self._shifts(ix, a))
        return low + min(self.xi_lo[iy], 0)

    def available(self, ix, iy, a, b):
        try:
            self.coeff(ix, iy, a, b)
        except WindowTooSmall:
            return False
        return True

    def coeff(self, ix, iy, a, b):
        lower = self.order
        acc = None
        m = self.base.get(ix, iy, a, b)
        if m is not None:
            acc = [[x.derive(self.alpha) for x in row] for row in m]
        # ad(xi) on slot 1
        for s, v in self.xi[ix].items():
            m = self.base.get(ix, iy, a - s, b)
            if m is None:
                continue
            out = None
            for p, r, t, c in self.fnz:
                if v[p].is_zero():
                    continue
                row = m[r]
                for q in range(self.d):
                    if row[q].is_zero():
                        continue
                    if out is None:
                        out = [[None] * self.d for _ in range(self.d)]
                    val = (v[p] * row[q] * c).truncate(lower)
                    out[t][q] = val if out[t][q] is None else out[t][q] + val
            acc = _madd(acc, _fill(out, self.chart.zero.truncate(lower)))
        # ad(xi) on slot 2
        for s, v in self.xi[iy].items():
            m = self.base.get(ix, iy, a, b - s)
            if m is None:
                continue
            out = None
            for q, r, t, c in self.fnz:
                if v[q].is_zero():
                    continue
                for p in range(self.d):
                    x = m[p][r]
                    if x.is_zero():
                        continue
                    if out is None:
                        out = [[None] * self.d for _ in range(self.d)]
                    val = (v[q] * x * c).truncate(lower)
                    out[p][t] = val if out[p][t] is None else out[p][t] + val
            acc = _madd(acc, _fill(out, self.chart.zero.truncate(lower)))
        return acc


def _fill(out, zero):
    if out is None:
        return None
    return [[zero if x is None else x for x in row] for row in out]


class KernelSet:
    """r, rbar, t, rho, rhobar for a chart, with ``Kc`` materialized columns."""

    def __init__(self, chart, K, Kc=None, slack=2, max_slack=32, store=None):
        """``store`` reuses previously solved columns (see :meth:`ColumnStore.restore`)."""
        self.chart = chart
        self.K = K
        pxi = max([-min(x[i]) for x in chart.xi for i in range(chart.num_punctures) if x[i]] + [0])
        self.pole_xi = pxi
        self.Kc = Kc if Kc is not None else default_column_depth(K, pxi)
        self.slack, self.max_slack = slack, max_slack
        self._install(store or ColumnStore(chart, self.Kc, slack, max_slack))
        self.t = FrameCoframe(chart)
        self.tbar = FrameCoframe(chart, swapped=True)
        self.rho = self.r + self.t
        self.rhobar = self.rbar - self.tbar

    def _install(self, store):
        self.store = store
        self.Kc = store.Kc
        self.r = RKernel(store)
        self.rbar = RbarKernel(store)
        if hasattr(self, "t"):
            self.rho = self.r + self.t
            self.rhobar = self.rbar - self.tbar

    def ensure(self, Kc):
        """Re-solve with at least ``Kc`` columns (the old ones are unchanged)."""
        if Kc > self.Kc:
            self._install(ColumnStore(self.chart, Kc, self.slack, self.max_slack))
        return self

    @property
    def d(self):
        return self.chart.lie.d

    def d_r(self, alpha):
        return JetDerivative(self.r, alpha)

    def nabla_rho(self, alpha):
        return Covariant(self.rho, self.chart, alpha)

    def column(self, i, k, a):
        return self.store.forms[(i, k, a)]

    def column_coords(self, i, k, a, ix, hi):
        return self.store.coords((i, k, a), ix, hi)

    def omega_recomputed(self):
        return self.store.omega_forms

    def config(self):
        return {"K": self.K, "Kc": self.Kc, "pole_bound": self.store.max_pole,
                "slack": self.store.slack, "pole_xi": self.pole_xi}


def default_column_depth(K, pole_xi):
    """Columns needed so the DCYBE window contains x in [-K-1, K], b + c <= K - 1."""
    return max(2 * K, K + pole_xi) + 1


def assemble_kernels(chart, K, **kw):
    return KernelSet(chart, K, **kw)


# -- contractions and projections ------------------------------------------------

def lower(lie, vec):
    """``kappa(., I_q)`` components of a coordinate vector."""
    d = lie.d
    out = []
    for q in range(d):
        acc = None
        for p in range(d):
            g = lie.gram[p][q]
            if g and not vec[p].is_zero():
                t = vec[p] * g
                acc = t if acc is None else acc + t
        out.append(acc)
    return out


def pair_series(lie, a, w):
    """``B(a, w)`` for per-puncture coordinate series (a function, w form)."""
    acc = None
    for ai, wi in zip(a, w):
        for e, va in ai.items():
            vw = wi.get(-1 - e)
            if vw is None:
                continue
            low = lower(lie, vw)
            for p in range(lie.d):
                if low[p] is not None and not va[p].is_zero():
                    t = va[p] * low[p]
                    acc = t if acc is None else acc + t
    return acc


def _check_top(top, i, need):
    if top is not None and top[i] < need:
        raise WindowTooSmall(f"probe known to degree {top[i]}, need {need}")


def contract_y(T: Tensor2, lie, z, hi, top=None):
    """``B(1 (x) z, T)`` as a series in x with degrees <= hi."""
    nump = len(z)
    d = lie.d
    out = [dict() for _ in range(nump)]
    for iy in range(nump):
        if not z[iy]:
            continue
        low = {-1 - s: lower(lie, v) for s, v in z[iy].items()}
        for ix in range(nump):
            e_lo = min(T.lo_x(ix, iy, f) for f in low)
            for e in range(e_lo, hi + 1):
                _check_top(top, iy, -1 - T.lo_y(ix, iy, e))
                acc = None
                for f, lw in low.items():
                    m = T.get(ix, iy, e, f)
                    if m is None:
                        continue
                    for p in range(d):
                        for q in range(d):
                            if lw[q] is None or m[p][q].is_zero():
                                continue
                            if acc is None:
                                acc = [None] * d
                            t = m[p][q] * lw[q]
                            acc[p] = t if acc[p] is None else acc[p] + t
                if acc is not None:
                    _store(out[ix], e, acc)
    return out


def contract_x(T: Tensor2, lie, z, hi, top=None):
    """``B(z (x) 1, T)`` as a series in y with degrees <= hi."""
    nump = len(z)
    d = lie.d
    out = [dict() for _ in range(nump)]
    for ix in range(nump):
        if not z[ix]:
            continue
        low = {-1 - s: lower(lie, v) for s, v in z[ix].items()}
        for iy in range(nump):
            f_lo = min(T.lo_y(ix, iy, e) for e in low)
            for f in range(f_lo, hi + 1):
                _check_top(top, ix, -1 - T.lo_x(ix, iy, f))
                acc = None
                for e, lw in low.items():
                    m = T.get(ix, iy, e, f)
                    if m is None:
                        continue
                    for p in range(d):
                        if lw[p] is None:
                            continue
                        for q in range(d):
                            if m[p][q].is_zero():
                                continue
                            if acc is None:
                                acc = [None] * d
                            t = m[p][q] * lw[p]
                            acc[q] = t if acc[q] is None else acc[q] + t
                if acc is not None:
                    _store(out[iy], f, acc)
    return out


def _store(ser, deg, acc):
    """Add a partial contraction (entries may be None) into ``ser[deg]``."""
    zero = next(x for x in acc if x is not None) * 0
    vec = [zero if x is None else x for x in acc]
    if deg in ser:
        vec = [x + y for x, y in zip(ser[deg], vec)]
    if any(not x.is_zero() for x in vec):
        ser[deg] = vec
    else:
        ser.pop(deg, None)


def series_sub(a, b):
    out = []
    for ai, bi in zip(a, b):
        ser = dict(ai)
        for k, v in bi.items():
            ser[k] = [x - y for x, y in zip(ser[k], v)] if k in ser else [-y for y in v]
        out.append({k: v for k, v in ser.items() if any(not x.is_zero() for x in v)})
    return out


def series_equal(a, b, lo, hi):
    """Equality of coordinate series on degrees lo..hi at every puncture."""
    diff = series_sub(a, b)
    return all(not (lo <= k <= hi) or all(x.is_zero() for x in v) for di in diff for k, v in di.items())


def random_loop(chart, rng, lo, hi, density=0.5):
    """Random coordinate series with rational constant and u-linear jet coefficients."""
    d, m = chart.lie.d, chart.m
    out = []
    for _ in range(chart.num_punctures):
        ser = {}
        for k in range(lo, hi + 1):
            if rng.random() > density:
                continue
            vec = []
            for _ in range(d):
                mapping = {(0,) * m: Q(rng.randint(-5, 5)) / rng.randint(1, 4)}
                e = [0] * m
                e[rng.randrange(m)] = 1
                mapping[tuple(e)] = rng.randint(-3, 3)
                vec.append(Jet.from_dict(chart.space, chart.jet_order, mapping))
            ser[k] = vec
        out.append(ser)
    return out


def _depth(a):
    return max([-min(ai) for ai in a if ai] + [0])


def project_minus(ks, a, hi):
    """``Pi_-(a) = B(1 (x) a, rbar)``: the component along the frame and outer loops."""
    need = _depth(a) - 1
    if need > ks.Kc:
        raise DepthExceeded(f"input pole {need + 1} needs columns beyond {ks.Kc}")
    return contract_y(ks.rbar, ks.chart.lie, a, hi)


def project_plus(ks, a, hi):
    """``Pi_+(a) = a - Pi_-(a)`` on degrees <= hi."""
    trimmed = [{k: v for k, v in ai.items() if k <= hi} for ai in a]
    return series_sub(trimmed, project_minus(ks, a, hi))


def project_plus_dual(ks, w, hi, top=None):
    """``Pi_+^*(w) = B(1 (x) w, r)`` for a form w."""
    return contract_y(ks.r, ks.chart.lie, w, hi, top)


def project_minus_dual(ks, w, hi, top=None):
    """``Pi_-^*(w) = B(w (x) 1, rbar)`` for a form w."""
    return contract_x(ks.rbar, ks.chart.lie, w, hi, top)


class DirectDecomposition:
    """Splits a loop as ``a_+ + sum c_alpha xi_alpha + Ad(sigma^-1) f`` by linear algebra.

    ``f`` ranges over outer functions with pole <= max_pole; this is independent
    of the kernels and serves as an oracle for the projections.
    """

    def __init__(self, chart, max_pole):
        lie, curve = chart.lie, chart.curve
        d = lie.d
        self.chart = chart
        self.span = OuterSpan(curve, lie, FUNCTION, max_pole)
        nfun = self.span.size
        keys, rows = [], []
        for i in range(curve.num_punctures):
            adm = chart.adinv[i]
            lo = min(self.span.lowest_degree(i) + min(adm),
                     min([min(x[i]) for x in chart.xi if x[i]], default=0))
            block = conjugated_rows(self.span, adm, i, lo, -1, d, chart.space, chart.jet_order)
            for k in range(lo, 0):
                for q in range(d):
                    row = dict(block.get((k, q), {}))
                    for alpha, xi in enumerate(chart.xi):
                        v = xi[i].get(k)
                        if v is not None and not v[q].is_zero():
                            row[nfun + alpha] = v[q]
                    keys.append((i, k, q))
                    rows.append(row)
        self.keys = keys
        self.index = {k: n for n, k in enumerate(keys)}
        self.nfun = nfun
        self.system = JetSystem(rows, nfun + chart.m, chart.space, chart.jet_order)

    def solve(self, a):
        """``(c, f)`` with f a GlobalForm over the function span."""
        chart = self.chart
        rhs = [chart.zero] * len(self.keys)
        for i, ai in enumerate(a):
            for k, v in ai.items():
                if k >= 0:
                    continue
                for q in range(chart.lie.d):
                    if v[q].is_zero():
                        continue
                    n = self.index.get((i, k, q))
                    if n is None:
                        raise PoleBoundTooSmall("input pole exceeds the decomposition range")
                    rhs[n] = v[q] + chart.zero
        sol = self.system.solve([[x] for x in rhs])
        coeffs = [sol[c][0] for c in range(self.nfun)]
        c = [sol[self.nfun + al][0] for al in range(chart.m)]
        return c, GlobalForm(self.span, coeffs)

    def minus(self, a, hi):
        """Coordinates of ``Pi_-(a)`` at degrees <= hi."""
        chart = self.chart
        c, f = self.solve(a)
        out = []
        for i in range(chart.num_punctures):
            ser = chart.conj_coords(f, i, hi)
            for alpha, xi in enumerate(chart.xi):
                for k, v in xi[i].items():
                    if k > hi:
                        continue
                    add = [c[alpha] * x for x in v]
                    ser[k] = [x + y for x, y in zip(ser[k], add)] if k in ser else add
            out.append(ser)
        return out


def decompose(chart, a, slack=2, max_slack=32):
    """``(c, f)`` with ``a = a_+ + sum c_alpha xi_alpha + Ad(sigma^-1) f``."""
    depth = _depth(a)
    while True:
        try:
            return DirectDecomposition(chart, depth + 2 * chart.pole_order + slack).solve(a)
        except PoleBoundTooSmall:
            if slack >= max_slack:
                raise
            slack *= 2


def direct_minus(chart, a, hi, slack=2, max_slack=32):
    """Oracle ``Pi_-(a)`` via :class:`DirectDecomposition`, enlarging the pole bound as needed."""
    depth = _depth(a)
    while True:
        try:
            return DirectDecomposition(chart, depth + 2 * chart.pole_order + slack).minus(a, hi)
        except PoleBoundTooSmall:
            if slack >= max_slack:
                raise
            slack *= 2


# -- gauge transformations ---------------------------------------------------

@dataclass
class GaugeSpec:
    """Unipotent factors of ``g_+`` and ``g_-``.

    ``plus``: ``(puncture, i, j, c, k, alpha)`` meaning ``1 + c u_alpha z^k E_ij``
    at one puncture (``alpha`` None for a constant coefficient), ``k >= 0``.
    ``minus``: ``(i, j, c, k, alpha)`` meaning the global ``1 + c u_alpha x^k E_ij``.
    """

    plus: list = field(default_factory=list)
    minus: list = field(default_factory=list)

    def validate(self, num_punctures, n):
        for p, i, j, c, k, alpha in self.plus:
            if k < 0 or i == j or not 0 <= p < num_punctures:
                raise NotInnerOuter(f"g_+ factor {(p, i, j, k)} is not in the positive loop group")
        for i, j, c, k, alpha in self.minus:
            if k < 0 or i == j:
                raise NotInnerOuter(f"g_- factor {(i, j, k)} is not an outer unipotent element")
        pairs = [f[1:3] for f in self.plus] + [f[0:2] for f in self.minus]
        if any(not (0 <= i < n and 0 <= j < n) for i, j in pairs):
            raise NotInnerOuter("matrix index out of range")

    def to_json(self):
        return {"plus": [[p, i, j, qstr(c), k, a] for p, i, j, c, k, a in self.plus],
                "minus": [[i, j, qstr(c), k, a] for i, j, c, k, a in self.minus]}

    @classmethod
    def from_json(cls, data):
        return cls([(p, i, j, Q(c), k, a) for p, i, j, c, k, a in data.get("plus", [])],
                   [(i, j, Q(c), k, a) for i, j, c, k, a in data.get("minus", [])])


def _unipotent(chart, blocks_per_puncture):
    """``1 + X`` with inverse ``1 - X`` (X squares to zero)."""
    lie = chart.lie
    ident = tuple(tuple(chart.one if r == s else chart.zero for s in range(lie.n))
                  for r in range(lie.n))
    out, inv = [], []
    for p, terms in enumerate(blocks_per_puncture):
        one = LaurentBlock(p, 0, [ident], EXACT)
        g, h = one, one
        for deg, mat in terms:
            g = g + LaurentBlock(p, deg, [mat], EXACT)
            h = h - LaurentBlock(p, deg, [mat], EXACT)
        out.append(g)
        inv.append(h)
    return GroupElement(out, inv, check=False)


def _elementary_matrix(chart, i, j, coeff):
    n = chart.lie.n
    return tuple(tuple(coeff if (r, s) == (i, j) else chart.zero for s in range(n))
                 for r in range(n))


def _coefficient(chart, c, alpha):
    if alpha is None:
        return chart.one * Q(c)
    return Jet.var(chart.space, alpha, chart.jet_order, Q(c))


def gauge_plus(chart, spec: GaugeSpec):
    g = GroupElement.identity(chart.lie.n, chart.space, chart.jet_order, chart.num_punctures)
    for p, i, j, c, k, alpha in spec.plus:
        terms = [[] for _ in range(chart.num_punctures)]
        terms[p].append((k, _elementary_matrix(chart, i, j, _coefficient(chart, c, alpha))))
        g = g * _unipotent(chart, terms)
    return g


def gauge_minus(chart, spec: GaugeSpec):
    curve = chart.curve
    g = GroupElement.identity(chart.lie.n, chart.space, chart.jet_order, chart.num_punctures)
    for i, j, c, k, alpha in spec.minus:
        terms = []
        for p in range(chart.num_punctures):
            deg = -curve.x_order * k
            coeff = _coefficient(chart, c, alpha) * (Q(curve.lam) ** k)
            terms.append([(deg, _elementary_matrix(chart, i, j, coeff))])
        g = g * _unipotent(chart, terms)
    return g


class _LazySeries:
    """Per-puncture coordinate series computed on demand with doubling windows."""

    def __init__(self, fn, lows):
        self.fn = fn
        self.lows = lows
        self._cache = {}

    def get(self, i, deg):
        hit = self._cache.get(i)
        if hit is None or hit[0] < deg:
            hi = max(deg, 2 * hit[0] if hit else deg, 4)
            hit = (hi, self.fn(i, hi))
            self._cache[i] = hit
        return hit[1].get(deg)

    def lo(self, i):
        return self.lows[i]

    def coords(self, i, hi):
        self.get(i, hi)
        return {k: v for k, v in self._cache[i][1].items() if k <= hi}


def _fixed_series(coords):
    lows = [min(c) if c else 0 for c in coords]
    return _LazySeries(lambda i, hi: coords[i], lows)


class ProductSum(Tensor2):
    """``sum_alpha U_alpha(x) (x) V_alpha(y)`` for lazy coordinate series."""

    def __init__(self, pairs, d, order):
        self.pairs = pairs
        self.d = d
        self.order = order

    def lo_x(self, ix, iy, b):
        return min([u.lo(ix) for u, _ in self.pairs] + [0])

    def lo_y(self, ix, iy, a):
        return min([v.lo(iy) for _, v in self.pairs] + [0])

    def coeff(self, ix, iy, a, b):
        acc = None
        d = self.d
        for u, v in self.pairs:
            x = u.get(ix, a)
            y = v.get(iy, b)
            if x is None or y is None:
                continue
            acc = _madd(acc, [[x[p] * y[q] for q in range(d)] for p in range(d)])
        return acc


class Conjugated(Tensor2):
    """``(A (x) A) T`` for a per-puncture matrix series A with nonnegative degrees."""

    def __init__(self, base: Tensor2, adm):
        self.base = base
        self.adm = adm
        self.d = base.d
        self.order = base.order

    def lo_x(self, ix, iy, b):
        return min(self.base.lo_x(ix, iy, b - t) for t in self.adm[iy])

    def lo_y(self, ix, iy, a):
        return min(self.base.lo_y(ix, iy, a - s) for s in self.adm[ix])

    def available(self, ix, iy, a, b):
        try:
            self.coeff(ix, iy, a, b)
        except WindowTooSmall:
            return False
        return True

    def coeff(self, ix, iy, a, b):
        d = self.d
        acc = None
        for s, A in self.adm[ix].items():
            for t, B in self.adm[iy].items():
                m = self.base.get(ix, iy, a - s, b - t)
                if m is None:
                    continue
                left = [[_dot(A[p], [m[r][c] for r in range(d)]) for c in range(d)]
                        for p in range(d)]
                acc = _madd(acc, [[_dot(B[q], left[p]) for q in range(d)] for p in range(d)])
        return acc


def _dot(row, col):
    acc = None
    for x, y in zip(row, col):
        if x.is_zero() or y.is_zero():
            continue
        acc = x * y if acc is None else acc + x * y
    return acc if acc is not None else row[0] * 0


@dataclass
class GaugeReport:
    """Dual-path comparison of the transformed chart data."""

    checks: dict
    rho_sign: int
    window: dict

    @property
    def passed(self):
        return all(v["mismatches"] == 0 and v["uncertified"] == 0 and v["checked"] > 0
                   for v in self.checks.values())

    def to_json(self):
        return {"checks": self.checks, "rho_sign": self.rho_sign, "window": self.window,
                "passed": self.passed}


def gauge_transform(chart, ks, gplus: GaugeSpec, gminus: GaugeSpec = None, K=None):
    """Recompute the chart for ``sigma' = g_- sigma g_+`` and compare with the
    transformation formulas.

    ``gplus`` and ``gminus`` may be given as one :class:`GaugeSpec` (``gminus``
    None).  The primed data lives at one jet order lower than the input chart.
    Returns ``(chart', kernels', report)``.
    """
    spec = gplus if gminus is None else GaugeSpec(list(gplus.plus), list(gminus.minus))
    lie = chart.lie
    nump = chart.num_punctures
    spec.validate(nump, lie.n)
    if chart.jet_order < 1:
        raise JetOrderTooLow("gauge comparison needs jets of order >= 1")
    K = ks.K if K is None else K
    order = chart.jet_order - 1
    gp = gauge_plus(chart, spec)
    gm = gauge_minus(chart, spec)
    sigma_new = gm * chart.sigma * gp
    chart2 = BundleChart(chart.curve, lie, chart.spec, jet_order=order, slack=chart.slack,
                         max_slack=chart.max_slack, sigma=sigma_new)
    ks2 = KernelSet(chart2, K, slack=ks.slack, max_slack=ks.max_slack)

    # the pieces of the formulas
    A = adjoint_coords(lie, gp, chart.space, chart.jet_order)
    sig_inv = chart.sigma.inverse()
    m_loops, n_loops = [], []
    for alpha in range(chart.m):
        dm = [laurent_mul(h, db) for h, db in zip(gm.inv_blocks, gm.jet_derive(alpha))]
        m_loops.append(ad_conjugate(sig_inv, LoopElement(dm, 0)))
        dp = [laurent_mul(h, db) for h, db in zip(gp.inv_blocks, gp.jet_derive(alpha))]
        n_loops.append(LoopElement(dp, 0))
    m_ser = [_fixed_series(loop_coords(lie, x)) for x in m_loops]
    n_ser = [_fixed_series(loop_coords(lie, x)) for x in n_loops]

    def omega_series(alpha):
        form = chart.omega[alpha]
        lows = [form.lowest_degree(i) + min(chart.adinv[i]) for i in range(nump)]
        return _LazySeries(lambda i, hi: chart.conj_coords(form, i, hi), lows)

    def conj_series(ser):
        def fn(i, hi):
            return apply_matrix_series(A[i], ser.coords(i, hi), ser.lo(i), hi, lie.d, chart.zero)
        return _LazySeries(fn, [ser.lo(i) + min(A[i]) for i in range(nump)])

    om = [omega_series(al) for al in range(chart.m)]
    a_om = [conj_series(s) for s in om]
    d, J = lie.d, chart.jet_order
    om_m = ProductSum(list(zip(om, m_ser)), d, J)
    aom_n = ProductSum(list(zip(a_om, n_ser)), d, J)

    t_f = SumTensor([(1, Conjugated(ks.t + om_m, A)), (1, aom_n)])
    r_f = SumTensor([(1, Conjugated(ks.r, A)), (-1, aom_n)])
    rho_f = {s: Conjugated(SumTensor([(1, ks.rho), (s, om_m)]), A) for s in (1, -1)}

    xi_f = []
    for alpha in range(chart.m):
        loop = ad_conjugate(gp.inverse(), chart.xi_loops[alpha] + m_loops[alpha]) + n_loops[alpha]
        xi_f.append(loop_coords(lie, loop))

    lo, hi = -K - 1, K
    checks = {}
    checks["xi"] = _compare_series([(xi_f[al], chart2.xi[al]) for al in range(chart.m)],
                                   None, None, order)
    om2 = [[chart2.omega_coords(al, i, hi) for i in range(nump)] for al in range(chart.m)]
    om_f = [[a_om[al].coords(i, hi) for i in range(nump)] for al in range(chart.m)]
    checks["omega"] = _compare_series(list(zip(om_f, om2)), None, hi, order)
    win = {"a_lo": lo, "a_hi": hi, "b_lo": -ks2.pole_xi, "b_hi": hi}
    checks["t"] = _compare_tensor(t_f, ks2.t, nump, win, order)
    checks["r"] = _compare_tensor(r_f, ks2.r, nump, win, order)
    rho_checks = {s: _compare_tensor(rho_f[s], ks2.rho, nump, win, order) for s in (1, -1)}
    sign = 1 if rho_checks[1]["mismatches"] == 0 else -1
    checks["rho"] = rho_checks[sign]
    checks["rho"]["other_sign_mismatches"] = rho_checks[-sign]["mismatches"]
    return chart2, ks2, GaugeReport(checks, sign, win)


def _jets_equal(x, y, order):
    if x is None and y is None:
        return True
    if x is None:
        return y.truncate(order).is_zero()
    if y is None:
        return x.truncate(order).is_zero()
    return (x.truncate(order) - y.truncate(order)).is_zero()


def _compare_series(pairs, lo, hi, order):
    checked = mismatches = 0
    for f, g in pairs:
        for fi, gi in zip(f, g):
            for k in set(fi) | set(gi):
                if (lo is not None and k < lo) or (hi is not None and k > hi):
                    continue
                u, v = fi.get(k), gi.get(k)
                n = len(u if u is not None else v)
                for p in range(n):
                    checked += 1
                    if not _jets_equal(None if u is None else u[p],
                                       None if v is None else v[p], order):
                        mismatches += 1
    return {"checked": checked, "mismatches": mismatches, "uncertified": 0}


def _compare_tensor(f, g, nump, win, order):
    checked = mismatches = uncertified = 0
    for ix in range(nump):
        for iy in range(nump):
            for a in range(win["a_lo"], win["a_hi"] + 1):
                for b in range(win["b_lo"], win["b_hi"] + 1):
                    try:
                        u = f.get(ix, iy, a, b)
                        v = g.get(ix, iy, a, b)
                    except WindowTooSmall:
                        uncertified += 1
                        continue
                    checked += 1
                    if u is None and v is None:
                        continue
                    d = len(u if u is not None else v)
                    ok = all(_jets_equal(None if u is None else u[p][q],
                                         None if v is None else v[p][q], order)
                             for p in range(d) for q in range(d))
                    mismatches += 0 if ok else 1
    return {"checked": checked, "mismatches": mismatches, "uncertified": uncertified}


def perturb_column(ks, key, index, delta):
    """Mutation hook: add ``delta`` to one coefficient of one stored column."""
    store = ks.store
    store.forms[key] = store.forms[key].perturbed(index, delta)
    store._cache.clear()
    return ks

"""The finite punctured Hitchin phase space over a chart.

Phase coordinates are the momenta ``p_alpha = B(xi_alpha, L)`` and the moments
``mu_{i,a} = B(I_a at p_i, L)`` of the Lax form
``L = sum p_alpha omega_alpha + sum mu_{i,a} r_{i,0,a}``.  Functions are
polynomials in these coordinates with jet coefficients (functions of ``u``).
The bracket is canonical on ``T*U`` (``{p_alpha, c(u)} = d_alpha c``) and
Lie-Poisson on each moment factor, ``{mu_a, mu_b} = -f_ab^c mu_c``; the sign is
the one for which the Lax equation and the Hamiltonian identities hold.
"""
from __future__ import annotations

import random
import time
from itertools import combinations_with_replacement

from gmpy2 import mpq

from .errors import DepthExceeded, JetOrderTooLow, WindowTooSmall
from .jetring import HALF, Q, qstr
from .kernels import project_plus
from .linalg import rank
from .yangbaxter import IdentityReport, series_bracket


class PhasePolynomial:
    """Sparse polynomial ``{exponent tuple: Jet}`` in the phase coordinates."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars, terms=None):
        self.nvars = nvars
        self.terms = {k: v for k, v in (terms or {}).items() if not v.is_zero()}

    @classmethod
    def constant(cls, nvars, jet):
        return cls(nvars, {(0,) * nvars: jet})

    @classmethod
    def variable(cls, nvars, index, jet):
        e = [0] * nvars
        e[index] = 1
        return cls(nvars, {tuple(e): jet})

    def is_zero(self):
        return not self.terms

    def degree(self):
        return max((sum(e) for e in self.terms), default=-1)

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return PhasePolynomial(self.nvars, out)

    def __neg__(self):
        return PhasePolynomial(self.nvars, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, PhasePolynomial):
            return PhasePolynomial(self.nvars, {k: v * other for k, v in self.terms.items()})
        out = {}
        for ka, va in self.terms.items():
            for kb, vb in other.terms.items():
                k = tuple(x + y for x, y in zip(ka, kb))
                t = va * vb
                out[k] = out[k] + t if k in out else t
        return PhasePolynomial(self.nvars, out)

    __rmul__ = __mul__

    def partial(self, index):
        """Derivative in the phase coordinate ``index``."""
        out = {}
        for k, v in self.terms.items():
            n = k[index]
            if n == 0:
                continue
            e = list(k)
            e[index] = n - 1
            out[tuple(e)] = v * n
        return PhasePolynomial(self.nvars, out)

    def jet_derive(self, alpha):
        """Derivative of the coefficients in ``u_alpha`` (one jet order lower)."""
        return PhasePolynomial(self.nvars, {k: v.derive(alpha) for k, v in self.terms.items()})

    def truncate(self, order):
        return PhasePolynomial(self.nvars, {k: v.truncate(order) for k, v in self.terms.items()})

    def evaluate(self, point):
        """Jet value at rational phase coordinates ``point``."""
        acc = None
        for k, v in self.terms.items():
            w = mpq(1)
            for x, n in zip(point, k):
                if n:
                    w *= Q(x) ** n
            t = v * w
            acc = t if acc is None else acc + t
        return acc

    def equals(self, other, order):
        return (self - other).truncate(order).is_zero()

    def to_json(self, names):
        """``{monomial: {jet exponent: "p/q"}}`` with readable monomial names."""
        out = {}
        for k, v in sorted(self.terms.items()):
            mon = "*".join(f"{names[i]}^{n}" if n > 1 else names[i]
                           for i, n in enumerate(k) if n) or "1"
            out[mon] = {",".join(map(str, e)): qstr(c) for e, c in sorted(v.coefficients().items())}
        return out


class PhaseSpace:
    """Coordinates, Lax form and Poisson bracket for a kernel set."""

    def __init__(self, ks, hi=None, sign=-1):
        self.ks = ks
        self.sign = sign
        chart = ks.chart
        self.chart = chart
        self.lie = chart.lie
        self.m = chart.m
        self.nump = chart.num_punctures
        d = self.lie.d
        self.nvars = self.m + self.nump * d
        self.names = [f"p{a}" for a in range(self.m)] + [
            f"mu{i}_{a}" for i in range(self.nump) for a in range(d)]
        self.hi = max(ks.K, ks.pole_xi) + 2 if hi is None else hi
        self.lax = LaxForm(self, self.hi)
        self._table = self._generator_brackets()

    def p(self, alpha):
        return PhasePolynomial.variable(self.nvars, alpha, self.chart.one)

    def mu(self, i, a):
        return PhasePolynomial.variable(self.nvars, self.mu_index(i, a), self.chart.one)

    def mu_index(self, i, a):
        return self.m + i * self.lie.d + a

    def zero(self):
        return PhasePolynomial(self.nvars)

    def constant(self, jet):
        return PhasePolynomial.constant(self.nvars, jet)

    # -- brackets ---------------------------------------------------------
    def _generator_brackets(self):
        """``{mu_{i,a}, mu_{i,b}} = sign * f_ab^c mu_{i,c}``; momenta commute with moments."""
        lie = self.lie
        d = lie.d
        table = {}
        for i in range(self.nump):
            for a in range(d):
                for b in range(d):
                    acc = self.zero()
                    for x, y, z, v in lie.fnz:
                        if (x, y) == (a, b):
                            acc = acc + self.mu(i, z) * (v * self.sign)
                    table[(self.mu_index(i, a), self.mu_index(i, b))] = acc
        return table

    def generator_bracket(self, g, h):
        if g == h:
            return self.zero()
        if (g, h) in self._table:
            return self._table[(g, h)]
        if (h, g) in self._table:
            return -self._table[(h, g)]
        return self.zero()

    def bracket(self, F, G):
        """Poisson bracket; the result has one jet order less than the inputs."""
        if self.chart.jet_order < 1:
            raise JetOrderTooLow("the bracket differentiates in u")
        order = self.chart.jet_order - 1
        dF = [F.partial(g) for g in range(self.nvars)]
        dG = [G.partial(g) for g in range(self.nvars)]
        acc = self.zero()
        for g in range(self.nvars):
            if dF[g].is_zero():
                continue
            for h in range(self.nvars):
                if dG[h].is_zero():
                    continue
                gb = self.generator_bracket(g, h)
                if not gb.is_zero():
                    acc = acc + dF[g] * dG[h] * gb
        for alpha in range(self.m):
            if not dF[alpha].is_zero():
                acc = acc + dF[alpha] * G.jet_derive(alpha)
            if not dG[alpha].is_zero():
                acc = acc - F.jet_derive(alpha) * dG[alpha]
        return acc.truncate(order)


def poisson_bracket(space: PhaseSpace, F, G):
    return space.bracket(F, G)


class LaxForm:
    """``L = sum p_alpha omega_alpha + sum mu_{i,a} r_{i,0,a}`` as generator series."""

    def __init__(self, space: PhaseSpace, hi):
        ks, chart = space.ks, space.chart
        self.space = space
        self.hi = hi
        d = chart.lie.d
        nump = chart.num_punctures
        if ks.Kc < 0:
            raise DepthExceeded("no columns available")
        gens = []
        for alpha in range(chart.m):
            gens.append([chart.omega_coords(alpha, i, hi) for i in range(nump)])
        for i in range(nump):
            for a in range(d):
                gens.append([ks.column_coords(i, 0, a, ix, hi) for ix in range(nump)])
        self.gens = [[{k: v for k, v in ser.items() if any(not x.is_zero() for x in v)}
                      for ser in g] for g in gens]

    def coeff(self, i, k):
        """``d`` polynomials: coordinates of the ``z_i^k dz_i`` coefficient of L."""
        if k > self.hi:
            raise WindowTooSmall(f"Lax coefficient {k} beyond {self.hi}")
        sp = self.space
        out = [sp.zero() for _ in range(sp.lie.d)]
        for g, ser in enumerate(self.gens):
            v = ser[i].get(k)
            if v is None:
                continue
            for q in range(sp.lie.d):
                if not v[q].is_zero():
                    out[q] = out[q] + PhasePolynomial.variable(sp.nvars, g, v[q])
        return out

    def pole_orders(self):
        return [-min([min(s[i]) for s in self.gens if s[i]] + [0]) for i in range(self.space.nump)]

    def pair(self, loop):
        """``B(v, L)`` for a loop v given as coordinate series (finite in degree)."""
        sp = self.space
        lie = sp.lie
        acc = sp.zero()
        for i, ser in enumerate(loop):
            for k, v in ser.items():
                if -1 - k < -1:
                    continue
                w = self.coeff(i, -1 - k)
                acc = acc + _kappa(lie, v, w)
        return acc

    def specialize(self, point):
        """Jet coordinate series of L at rational phase coordinates."""
        chart = self.space.chart
        out = []
        for i in range(self.space.nump):
            ser = {}
            for g, s in enumerate(self.gens):
                x = Q(point[g])
                if not x:
                    continue
                for k, v in s[i].items():
                    add = [y * x for y in v]
                    ser[k] = [a + b for a, b in zip(ser[k], add)] if k in ser else add
            out.append(ser)
        return out


def _kappa(lie, v, w):
    """``kappa(v, w)`` for a jet vector v and a vector of polynomials w."""
    acc = None
    for p in range(lie.d):
        if v[p].is_zero():
            continue
        for q in range(lie.d):
            g = lie.gram[p][q]
            if g and not w[q].is_zero():
                t = w[q] * (v[p] * g)
                acc = t if acc is None else acc + t
    return acc if acc is not None else w[0] * 0


def lax_matrix(ks, hi=None):
    return PhaseSpace(ks, hi).lax


# -- Hamiltonians ---------------------------------------------------------------

def quadratic_hamiltonian(space: PhaseSpace, puncture, degree):
    """``1/2`` times the ``z^degree (dz)^2`` coefficient of ``kappa(L, L)`` at a puncture."""
    lax = space.lax
    lie = space.lie
    if degree + 1 > lax.hi:
        raise WindowTooSmall(f"degree {degree} needs Lax coefficients beyond {lax.hi}")
    acc = space.zero()
    for k in range(-1, degree + 2):
        u = lax.coeff(puncture, k)
        v = lax.coeff(puncture, degree - k)
        for p in range(lie.d):
            for q in range(lie.d):
                g = lie.gram[p][q]
                if g and not u[p].is_zero() and not v[q].is_zero():
                    acc = acc + u[p] * v[q] * g
    return acc * HALF


def casimir_hamiltonian(space, puncture):
    return quadratic_hamiltonian(space, puncture, -2)


def gaudin_hamiltonian(space: PhaseSpace, i):
    """``sum_alpha <mu_i, omega_alpha(p_i)> p_alpha + <mu_i (x) mu_i, s(p_i, p_i)>
    + sum_{j != i} <mu_i (x) mu_j, r(p_i, p_j)>`` from kernel values at the punctures."""
    ks, chart = space.ks, space.chart
    d = space.lie.d
    acc = space.zero()
    for alpha in range(space.m):
        w = chart.omega_coords(alpha, i, 0).get(0)
        if w is None:
            continue
        for a in range(d):
            if not w[a].is_zero():
                acc = acc + space.mu(i, a) * space.p(alpha) * w[a]
    for j in range(space.nump):
        m = ks.r.get(i, j, 0, 0)
        if m is None:
            continue
        for a in range(d):
            for b in range(d):
                if not m[a][b].is_zero():
                    acc = acc + space.mu(i, a) * space.mu(j, b) * m[a][b]
    return acc


def hamiltonian_basis(space, degrees=None):
    """``{(i, n): H_{i,n}}`` for n from -2 up to the largest available degree."""
    top = space.lax.hi - 1 if degrees is None else degrees
    return {(i, n): quadratic_hamiltonian(space, i, n)
            for i in range(space.nump) for n in range(-2, top + 1)}


def hamiltonian_rank(space, hams):
    """Rank of the Hamiltonians at the base point, as vectors of monomial coefficients."""
    mons = sorted({k for h in hams.values() for k in h.terms})
    rows = [[h.terms[k].value if k in h.terms else mpq(0) for k in mons] for h in hams.values()]
    return rank(rows)


# -- suites -----------------------------------------------------------------

def commutativity_suite(space, degrees=None, name="commutativity"):
    """``{H, H'} = 0`` for all pairs from the Hamiltonian basis; the ``z^-2``
    coefficient also commutes with every coordinate."""
    t0 = time.perf_counter()
    order = space.chart.jet_order - 1
    hams = hamiltonian_basis(space, degrees)
    rep = IdentityReport(name, {"degrees": [-2, max(n for _, n in hams)],
                                "punctures": space.nump, "jet_order": order})
    keys = sorted(hams)
    for x, y in combinations_with_replacement(keys, 2):
        rep.checked += 1
        br = space.bracket(hams[x], hams[y])
        if not br.truncate(order).is_zero():
            rep.nonzero.append(((*x, *y), br.to_json(space.names)))
    for i in range(space.nump):
        cas = hams[(i, -2)]
        for g in range(space.nvars):
            rep.checked += 1
            coord = PhasePolynomial.variable(space.nvars, g, space.chart.one)
            br = space.bracket(cas, coord)
            if not br.is_zero():
                rep.nonzero.append((("casimir", i, space.names[g]), br.to_json(space.names)))
    rep.notes.append(f"Lie-Poisson sign: {{mu_a, mu_b}} = {'+' if space.sign > 0 else '-'}f_ab^c mu_c")
    rep.seconds = round(time.perf_counter() - t0, 3)
    return rep


def gaudin_extraction_check(space, name="gaudin_extraction"):
    """The puncture Hamiltonian formula equals the ``z^-1`` coefficient extraction."""
    t0 = time.perf_counter()
    order = space.chart.jet_order
    rep = IdentityReport(name, {"punctures": space.nump})
    for i in range(space.nump):
        rep.checked += 1
        diff = gaudin_hamiltonian(space, i) - quadratic_hamiltonian(space, i, -1)
        if not diff.truncate(order).is_zero():
            rep.nonzero.append(((i,), diff.to_json(space.names)))
    rep.seconds = round(time.perf_counter() - t0, 3)
    return rep


def random_phase_points(space, count, seed):
    rng = random.Random(seed)
    return [[mpq(rng.randint(-5, 5), rng.randint(1, 3)) for _ in range(space.nvars)]
            for _ in range(count)]


def lax_pair_check(space, h, points, probe_degrees=None, name="lax_pair"):
    """``{H_h, B(c, L)} = B(c, [Q, L])`` with ``Q = Pi_+ dH(L)`` at rational points.

    ``h = (i, n)`` selects ``H = 1/2 [z_i^n] kappa(L, L)``, whose differential is
    ``dH(L) = z_i^(-n-1) L / dz_i`` at puncture i.  Probes are the constant loops
    ``c = I_a z_j^k`` pairing with the ``z_j^(-1-k)`` coefficient of L.
    """
    t0 = time.perf_counter()
    ks, lie = space.ks, space.lie
    i, n = h
    order = space.chart.jet_order - 1
    hi = space.lax.hi
    shift = -n - 1
    top = min(hi + min(shift, 0), ks.K + 1) - 2
    degrees = list(range(-1, top + 1)) if probe_degrees is None else probe_degrees
    rep = IdentityReport(name, {"h": [i, n], "points": len(points), "probe_degrees": degrees})
    H = quadratic_hamiltonian(space, i, n)
    lhs_polys = {}
    for j in range(space.nump):
        for k in degrees:
            coeffs = space.lax.coeff(j, k)
            for a in range(lie.d):
                lhs_polys[(j, k, a)] = space.bracket(H, _lower_poly(space, coeffs, a))
    for pt in points:
        L = space.lax.specialize(pt)
        dH = [dict() for _ in range(space.nump)]
        dH[i] = {k + shift: v for k, v in L[i].items()}
        top = max(degrees)
        q = project_plus(ks, dH, top + 1)
        br = series_bracket(lie, q, L, top)
        for (j, k, a), poly in lhs_polys.items():
            rep.checked += 1
            left = poly.evaluate(pt)
            v = br[j].get(k)
            right = None
            if v is not None:
                right = _lower_jet(lie, v, a)
            zero = space.chart.zero
            diff = (left if left is not None else zero) - (right if right is not None else zero)
            if not diff.truncate(order).is_zero():
                rep.nonzero.append(((j, k, a, [qstr(x) for x in pt]), str(diff.truncate(order))))
    rep.seconds = round(time.perf_counter() - t0, 3)
    return rep


def _lower_poly(space, coeffs, a):
    """``kappa(I_a, X)`` for a coefficient vector of polynomials."""
    acc = space.zero()
    for q in range(space.lie.d):
        g = space.lie.gram[a][q]
        if g:
            acc = acc + coeffs[q] * g
    return acc


def _lower_jet(lie, v, a):
    acc = None
    for q in range(lie.d):
        g = lie.gram[a][q]
        if g:
            t = v[q] * g
            acc = t if acc is None else acc + t
    return acc

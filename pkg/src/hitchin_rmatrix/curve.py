"""Hyperelliptic curves ``y^2 = f(x)`` with all punctures at infinity.

Odd model (``deg f = 2g+1``): one puncture, local coordinate ``z`` with
``x = lam * z^-2``.  Even model (``deg f = 2g+2``): two punctures with
``x = 1/z`` and ``y = +-z^-(g+1) * (unit)``.  In both models the outer ring
is spanned by ``x^i`` and ``x^i y`` and the outer forms by ``x^i dx/y`` and
``x^i dx``.

Expansions are returned as :class:`Expansion` objects holding rational
coefficients; the Lie layer lifts them into jet-valued blocks as needed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from gmpy2 import mpq

from .errors import BadDegree, GenusTooSmall, LeadingNotSquare, NotSquarefree, WindowTooSmall
from .jetring import ONE, ZERO, Q, rational_sqrt

FUNCTION = "function"
FORM = "form"


# -- univariate rational polynomials, ascending coefficient lists --------------

def poly_trim(p):
    p = list(p)
    while p and not p[-1]:
        p.pop()
    return p


def poly_derivative(p):
    return [p[i] * i for i in range(1, len(p))]


def poly_divmod(a, b):
    a = poly_trim(a)
    b = poly_trim(b)
    q = [ZERO] * max(len(a) - len(b) + 1, 0)
    while len(a) >= len(b) and a:
        c = a[-1] / b[-1]
        k = len(a) - len(b)
        q[k] = c
        for i, bc in enumerate(b):
            a[i + k] -= c * bc
        a = poly_trim(a)
    return q, a


def poly_gcd(a, b):
    a, b = poly_trim(a), poly_trim(b)
    while b:
        _, r = poly_divmod(a, b)
        a, b = b, r
    if a:
        a = [c / a[-1] for c in a]
    return a


def series_mul(a, b, n):
    """Product of two power series (lists from degree 0), truncated to n terms."""
    out = [ZERO] * n
    for i, x in enumerate(a[:n]):
        if x:
            for j, y in enumerate(b[: n - i]):
                if y:
                    out[i + j] += x * y
    return out


def series_inverse(a, n):
    inv0 = ONE / a[0]
    out = [inv0]
    for t in range(1, n):
        acc = ZERO
        for j in range(1, min(t, len(a) - 1) + 1):
            if a[j]:
                acc += a[j] * out[t - j]
        out.append(-acc * inv0)
    return out


def series_sqrt_unit(a, n):
    """Square root of a power series with ``a[0] = 1`` (coefficient recursion)."""
    out = [ONE]
    for t in range(1, n):
        acc = a[t] if t < len(a) else ZERO
        for j in range(1, t):
            acc -= out[j] * out[t - j]
        out.append(acc / 2)
    return out


@dataclass(frozen=True)
class Expansion:
    """Rational Laurent expansion ``sum coeffs[k] z^(lo+k)`` exact up to ``hi``."""

    lo: int
    coeffs: tuple
    hi: int
    weight: int = 0

    def __getitem__(self, d):
        if d > self.hi:
            raise WindowTooSmall(f"degree {d} beyond certified {self.hi}")
        k = d - self.lo
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return ZERO

    def valuation(self):
        for k, c in enumerate(self.coeffs):
            if c and self.lo + k <= self.hi:
                return self.lo + k
        return None

    def residue(self):
        if self.weight != 1:
            raise ValueError("residue of a function")
        return self[-1]

    def items(self):
        for k, c in enumerate(self.coeffs):
            if c and self.lo + k <= self.hi:
                yield self.lo + k, c


@dataclass(frozen=True)
class OuterFunction:
    """``(sum a_i x^i + sum b_i x^i y)`` for functions; times ``dx/y`` for forms."""

    kind: str
    a: tuple
    b: tuple
    curve: "CurveModel" = field(compare=False, repr=False)

    def terms(self):
        for i, c in enumerate(self.a):
            if c:
                yield 0, i, c
        for i, c in enumerate(self.b):
            if c:
                yield 1, i, c

    def pole_orders(self):
        return tuple(self.curve.pole_order(self, p) for p in range(self.curve.num_punctures))

    def expand(self, puncture, hi):
        return self.curve.expand(self, puncture, hi)

    def __add__(self, other):
        n = max(len(self.a), len(other.a))
        m = max(len(self.b), len(other.b))
        a = tuple((self.a[i] if i < len(self.a) else ZERO) + (other.a[i] if i < len(other.a) else ZERO)
                  for i in range(n))
        b = tuple((self.b[i] if i < len(self.b) else ZERO) + (other.b[i] if i < len(other.b) else ZERO)
                  for i in range(m))
        return OuterFunction(self.kind, a, b, self.curve)

    def scale(self, s):
        s = Q(s)
        return OuterFunction(self.kind, tuple(c * s for c in self.a), tuple(c * s for c in self.b),
                             self.curve)

    def label(self):
        parts = []
        for ydeg, i, c in self.terms():
            mono = ("x^%d" % i if i > 1 else ("x" if i == 1 else "")) + ("y" if ydeg else "")
            parts.append(f"{c}*{mono or '1'}")
        body = " + ".join(parts) or "0"
        return body if self.kind == FUNCTION else f"({body}) dx/y"


class CurveModel:
    """A hyperelliptic curve with its punctures at infinity."""

    def __init__(self, coefficients):
        f = poly_trim([Q(c) for c in coefficients])
        self.f = tuple(f)
        deg = len(f) - 1
        if deg < 1:
            raise BadDegree("f must be nonconstant")
        if deg % 2:
            self.model, self.genus = "odd", (deg - 1) // 2
        else:
            self.model, self.genus = "even", (deg - 2) // 2
        if self.genus < 2:
            raise GenusTooSmall(f"genus {self.genus} < 2 (degree {deg})")
        if len(poly_gcd(f, poly_derivative(f))) > 1:
            raise NotSquarefree("f has a repeated root")
        lead = f[-1]
        g = self.genus
        if self.model == "odd":
            self.num_punctures = 1
            # x = lam z^-2 with lam * lead^(..) a square
            self.lam = ONE if rational_sqrt(lead) is not None else ONE / lead
            # z^(4g+2) f(lam z^-2) = sum_k f_k lam^k z^(4g+2-2k), leading lead*lam^(2g+1)
            c = lead * self.lam ** (2 * g + 1)
            self._lead_root = rational_sqrt(c)
            self._unit_poly = [ZERO] * (4 * g + 3)
            for k, fk in enumerate(f):
                self._unit_poly[4 * g + 2 - 2 * k] = fk * self.lam ** k / c
            self.y_shift = 2 * g + 1
            self.signs = (ONE,)
        else:
            root = rational_sqrt(lead)
            if root is None:
                raise LeadingNotSquare(f"leading coefficient {lead} is not a rational square")
            self.num_punctures = 2
            self.lam = ONE
            self._lead_root = root
            self._unit_poly = [ZERO] * (2 * g + 3)
            for k, fk in enumerate(f):
                self._unit_poly[2 * g + 2 - k] = fk / lead
            self.y_shift = g + 1
            self.signs = (ONE, -ONE)
        self._unit = []
        self._unit_inv = []

    # -- local data -------------------------------------------------------
    @property
    def x_order(self):
        """x = lam * z^(-x_order)."""
        return 2 if self.model == "odd" else 1

    def _ensure(self, n):
        if len(self._unit) < n:
            n = max(n, 2 * len(self._unit), 16)
            self._unit = series_sqrt_unit(self._unit_poly, n)
            self._unit_inv = series_inverse(self._unit, n)

    def y_unit(self, puncture, n):
        """Coefficients of ``y * z^y_shift`` at a puncture (n terms)."""
        self._ensure(n)
        s = self.signs[puncture] * self._lead_root
        return [c * s for c in self._unit[:n]]

    def x_expansion(self, puncture, hi):
        d = self.x_order
        return Expansion(-d, (self.lam,), hi)

    def y_expansion(self, puncture, hi):
        n = hi + self.y_shift + 1
        return Expansion(-self.y_shift, tuple(self.y_unit(puncture, max(n, 1))), hi)

    # -- basis ------------------------------------------------------------
    def basis_pole_order(self, kind, ydeg, i):
        g = self.genus
        if self.model == "odd":
            if kind == FUNCTION:
                return 2 * i + ydeg * (2 * g + 1)
            return 2 * i + 2 - 2 * g if ydeg == 0 else 2 * i + 3
        if kind == FUNCTION:
            return i + ydeg * (g + 1)
        return i + 1 - g if ydeg == 0 else i + 2

    def monomial(self, kind, ydeg, i, coeff=ONE):
        a = [ZERO] * (i + 1) if ydeg == 0 else []
        b = [ZERO] * (i + 1) if ydeg == 1 else []
        (a if ydeg == 0 else b)[i] = Q(coeff)
        return OuterFunction(kind, tuple(a), tuple(b), self)

    def outer_basis(self, kind, max_pole):
        """Monomial basis of outer functions (or forms) with pole <= max_pole."""
        out = []
        for ydeg in (0, 1):
            i = 0
            while True:
                p = self.basis_pole_order(kind, ydeg, i)
                if p > max_pole:
                    break
                out.append((p, ydeg, i))
                i += 1
        out.sort()
        return [self.monomial(kind, ydeg, i) for _, ydeg, i in out]

    def outer_basis_orders(self, kind, max_pole):
        return [self.basis_pole_order(kind, 1 if e.b else 0, len(e.b or e.a) - 1)
                for e in self.outer_basis(kind, max_pole)]

    def riemann_roch_count(self, kind, max_pole):
        total = self.num_punctures * max_pole
        if kind == FUNCTION:
            return total - self.genus + 1
        return total + self.genus - 1

    # -- expansions -------------------------------------------------------
    def expand(self, elem: OuterFunction, puncture: int, hi: int) -> Expansion:
        """Exact expansion at a puncture, certified up to degree ``hi``.

        Forms are returned as the coefficient of ``dz``.
        """
        d = self.x_order
        ys = self.y_shift
        lam = self.lam
        if elem.kind == FUNCTION:
            # x^i -> lam^i z^(-d i); x^i y -> lam^i z^(-d i - ys) * U
            shift_a, shift_b = 0, -ys
            series_b = None
        else:
            # dx = -d lam z^(-d-1) dz; dx/y = -d lam z^(ys-d-1) U^-1 dz
            shift_a, shift_b = ys - d - 1, -d - 1
        top = max([d * i for i in range(max(len(elem.a), len(elem.b)))] + [0])
        lo = -top + min(shift_a, shift_b)
        n = hi - lo + 1
        if n <= 0:
            return Expansion(lo, (), hi, 1 if elem.kind == FORM else 0)
        need = n + top + ys + d + 2
        self._ensure(need)
        s = self.signs[puncture] * self._lead_root
        unit = [c * s for c in self._unit[:need]]
        unit_inv = [c / s for c in self._unit_inv[:need]]
        coeffs = [ZERO] * n

        def add(start, scale, series):
            for k, c in enumerate(series):
                deg = start + k
                if deg > hi:
                    break
                if c:
                    coeffs[deg - lo] += scale * c

        if elem.kind == FUNCTION:
            for i, c in enumerate(elem.a):
                if c:
                    add(-d * i, c * lam ** i, [ONE])
            for i, c in enumerate(elem.b):
                if c:
                    add(-d * i - ys, c * lam ** i, unit)
        else:
            dxc = -d * lam
            for i, c in enumerate(elem.a):
                if c:
                    add(-d * i + shift_a, c * lam ** i * dxc, unit_inv)
            for i, c in enumerate(elem.b):
                if c:
                    add(-d * i + shift_b, c * lam ** i * dxc, [ONE])
        return Expansion(lo, tuple(coeffs), hi, 1 if elem.kind == FORM else 0)

    def pole_order(self, elem, puncture):
        hi = 8
        while True:
            e = self.expand(elem, puncture, hi)
            v = e.valuation()
            if v is not None:
                return -v
            if hi > 200:
                return None
            hi *= 2

    def residue_sum(self, form: OuterFunction):
        """Sum of residues of a global form over all punctures (always 0)."""
        return sum((self.expand(form, p, -1).residue() for p in range(self.num_punctures)), ZERO)

    def check_equation(self, puncture, hi):
        """Return True if y^2 = f(x) holds on the degree window ``<= hi``."""
        y = self.y_expansion(puncture, hi + 2 * self.y_shift)
        n = hi + 2 * self.y_shift + 1
        y2 = series_mul(list(y.coeffs), list(y.coeffs), n)  # starts at -2 ys
        d = self.x_order
        fx = {}
        for k, fk in enumerate(self.f):
            if fk:
                fx[-d * k] = fx.get(-d * k, ZERO) + fk * self.lam ** k
        for t in range(n):
            deg = t - 2 * self.y_shift
            if y2[t] != fx.get(deg, ZERO):
                return False
        return True

    def describe(self):
        return {"model": self.model, "genus": self.genus, "punctures": self.num_punctures,
                "lambda": self.lam}


def build_curve(coefficients) -> CurveModel:
    """Curve ``y^2 = f(x)`` from ascending coefficients ``[f_0, f_1, ...]``."""
    return CurveModel(coefficients)

"""Exact scalars: rationals, truncated jets in the dynamical variables, and
per-puncture truncated Laurent series with a certified coefficient window.

A :class:`Jet` is a polynomial in ``u_1..u_m`` truncated above total degree
``order``; the variables are nilpotent, so the ring is local and every jet
with a nonzero constant term is a unit.

A :class:`LaurentBlock` stores the coefficients of a matrix-valued Laurent
series in the local coordinate ``z`` of one puncture for degrees
``lo..certified_to``.  Every stored coefficient equals the coefficient of the
exact object it represents; degrees below ``lo`` are zero and degrees above
``certified_to`` are unknown.
"""
from __future__ import annotations

import random
from fractions import Fraction
from itertools import combinations_with_replacement

from gmpy2 import mpq, is_square, isqrt

from .errors import NotASquare, NotAUnit, PunctureMismatch, WindowTooSmall

ZERO = mpq(0)
ONE = mpq(1)
HALF = mpq(1, 2)
# certified_to value of a Laurent polynomial: every degree is known exactly
EXACT = 10 ** 9


def Q(value) -> mpq:
    """Coerce ints, ``"p/q"`` strings, Fractions and mpqs to ``mpq``."""
    if isinstance(value, str):
        return mpq(value.strip())
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    return mpq(value)


def qstr(value) -> str:
    """Canonical ``"p/q"`` (or ``"p"``) rendering used in every JSON file."""
    value = mpq(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def rational_sqrt(value):
    """Exact square root of a nonnegative rational, or None."""
    value = mpq(value)
    if value < 0:
        return None
    num, den = value.numerator, value.denominator
    if is_square(num) and is_square(den):
        return mpq(isqrt(num), isqrt(den))
    return None


class JetSpace:
    """Monomial bookkeeping for jets in ``m`` variables, shared by all jets."""

    MAX_ORDER = 6
    _cache: dict = {}

    def __new__(cls, m: int):
        space = cls._cache.get(m)
        if space is None:
            space = super().__new__(cls)
            space._build(m)
            cls._cache[m] = space
        return space

    def __getnewargs__(self):
        return (self.m,)

    def _build(self, m):
        self.m = m
        monos = []
        for deg in range(self.MAX_ORDER + 1):
            for combo in combinations_with_replacement(range(m), deg):
                exp = [0] * m
                for var in combo:
                    exp[var] += 1
                monos.append(tuple(exp))
            if m == 0:
                break
        self.monomials = monos
        self.index = {e: i for i, e in enumerate(monos)}
        self.degree = [sum(e) for e in monos]
        self.sizes = []
        for order in range(self.MAX_ORDER + 1):
            self.sizes.append(sum(1 for d in self.degree if d <= order))
        # rows[order][i] = [(j, k)] with mono_i * mono_j = mono_k, deg <= order
        self.rows = []
        for order in range(self.MAX_ORDER + 1):
            n = self.sizes[order]
            table = []
            for i in range(n):
                row = []
                for j in range(n):
                    if self.degree[i] + self.degree[j] <= order:
                        e = tuple(a + b for a, b in zip(monos[i], monos[j]))
                        row.append((j, self.index[e]))
                table.append(row)
            self.rows.append(table)
        # deriv[alpha] = [(src, dst, factor)]
        self.deriv = []
        for alpha in range(m):
            entries = []
            for src, e in enumerate(monos):
                if e[alpha] > 0:
                    d = list(e)
                    d[alpha] -= 1
                    entries.append((src, self.index[tuple(d)], e[alpha]))
            self.deriv.append(entries)

    def __repr__(self):
        return f"JetSpace(m={self.m})"


class Jet:
    """Truncated polynomial in the dynamical variables with rational coefficients."""

    __slots__ = ("space", "order", "c")

    def __init__(self, space: JetSpace, order: int, coeffs):
        self.space = space
        self.order = order
        n = space.sizes[order]
        c = tuple(coeffs)
        if len(c) < n:
            c = c + (ZERO,) * (n - len(c))
        elif len(c) > n:
            c = c[:n]
        self.c = c

    # -- constructors -------------------------------------------------
    @classmethod
    def const(cls, space, value, order):
        return cls(space, order, (Q(value),))

    @classmethod
    def zero(cls, space, order):
        return cls(space, order, ())

    @classmethod
    def var(cls, space, alpha, order, scale=1):
        """The jet ``scale * u_alpha`` (alpha is 0-based)."""
        coeffs = [ZERO] * space.sizes[order]
        if order >= 1:
            e = [0] * space.m
            e[alpha] = 1
            coeffs[space.index[tuple(e)]] = Q(scale)
        return cls(space, order, coeffs)

    @classmethod
    def from_dict(cls, space, order, mapping):
        coeffs = [ZERO] * space.sizes[order]
        for exp, value in mapping.items():
            if sum(exp) <= order:
                coeffs[space.index[tuple(exp)]] = Q(value)
        return cls(space, order, coeffs)

    # -- views --------------------------------------------------------
    def coefficients(self) -> dict:
        """Nonzero coefficients keyed by exponent tuple."""
        mon = self.space.monomials
        return {mon[i]: v for i, v in enumerate(self.c) if v}

    @property
    def value(self) -> mpq:
        """Augmentation: evaluation at the base point u = 0."""
        return self.c[0]

    def is_zero(self) -> bool:
        return not any(self.c)

    def is_constant(self) -> bool:
        return not any(self.c[1:])

    def is_unit(self) -> bool:
        return self.c[0] != 0

    def truncate(self, order):
        if order >= self.order:
            return self
        return Jet(self.space, order, self.c[: self.space.sizes[order]])

    # -- ring operations ----------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        return Jet(self.space, self.order, (Q(other),))

    def __add__(self, other):
        if not isinstance(other, Jet):
            c = list(self.c)
            c[0] = c[0] + Q(other)
            return Jet(self.space, self.order, c)
        order = min(self.order, other.order)
        n = self.space.sizes[order]
        a, b = self.c, other.c
        return Jet(self.space, order, [a[i] + b[i] for i in range(n)])

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, self.order, [-x for x in self.c])

    def __sub__(self, other):
        if not isinstance(other, Jet):
            return self + (-Q(other))
        order = min(self.order, other.order)
        n = self.space.sizes[order]
        a, b = self.c, other.c
        return Jet(self.space, order, [a[i] - b[i] for i in range(n)])

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            s = Q(other)
            return Jet(self.space, self.order, [x * s for x in self.c])
        order = min(self.order, other.order)
        return Jet(self.space, order, jet_mul_raw(self.space, order, self.c, other.c))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            s = ONE / Q(other)
            return Jet(self.space, self.order, [x * s for x in self.c])
        return self * other.inverse()

    def inverse(self):
        """Inverse in the local ring (geometric series in the nilpotent part)."""
        if not self.c[0]:
            raise NotAUnit("jet with zero constant term is not invertible")
        a0 = self.c[0]
        inv0 = ONE / a0
        nil = Jet(self.space, self.order, (ZERO,) + tuple(x * inv0 for x in self.c[1:]))
        result = Jet.const(self.space, ONE, self.order)
        term = Jet.const(self.space, ONE, self.order)
        for _ in range(self.order):
            term = -(term * nil)
            result = result + term
        return result * inv0

    def __pow__(self, k):
        result = Jet.const(self.space, ONE, self.order)
        for _ in range(k):
            result = result * self
        return result

    def derive(self, alpha):
        return jet_derive(self, alpha)

    def evaluate(self, point):
        """Evaluate the truncated polynomial at a rational point."""
        total = ZERO
        for exp, v in zip(self.space.monomials, self.c):
            if v:
                term = v
                for x, e in zip(point, exp):
                    if e:
                        term *= Q(x) ** e
                total += term
        return total

    # -- comparison ---------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, Jet):
            if isinstance(other, (int, mpq, Fraction)):
                return self.is_constant() and self.c[0] == other
            return NotImplemented
        order = min(self.order, other.order)
        n = self.space.sizes[order]
        return self.c[:n] == other.c[:n]

    def __hash__(self):
        return hash((self.order, self.c))

    def __bool__(self):
        return not self.is_zero()

    def __repr__(self):
        if self.is_constant():
            return f"Jet({qstr(self.c[0])})"
        terms = []
        for exp, v in self.coefficients().items():
            mono = "*".join(f"u{a + 1}^{e}" if e > 1 else f"u{a + 1}"
                            for a, e in enumerate(exp) if e)
            terms.append(qstr(v) + ("*" + mono if mono else ""))
        return "Jet(" + " + ".join(terms) + f"; order {self.order})"

    def to_json(self):
        return {",".join(map(str, e)): qstr(v) for e, v in self.coefficients().items()}

    @classmethod
    def from_json(cls, space, order, data):
        mapping = {}
        for key, v in data.items():
            exp = tuple(int(t) for t in key.split(",")) if key else ()
            if not exp:
                exp = (0,) * space.m
            mapping[exp] = v
        return cls.from_dict(space, order, mapping)


def jet_mul_raw(space, order, a, b):
    """Truncated product of two coefficient tuples (hot path)."""
    rows = space.rows[order]
    n = space.sizes[order]
    out = [ZERO] * n
    for i in range(n):
        ai = a[i]
        if ai:
            for j, k in rows[i]:
                bj = b[j]
                if bj:
                    out[k] += ai * bj
    return out


def jet_derive(s: Jet, alpha: int) -> Jet:
    """Formal partial derivative d/du_alpha (0-based); the order drops by one."""
    if s.order == 0:
        raise ValueError("cannot differentiate a jet of order 0")
    space = s.space
    order = s.order - 1
    n = space.sizes[order]
    out = [ZERO] * n
    c = s.c
    for src, dst, factor in space.deriv[alpha]:
        if dst < n and src < len(c) and c[src]:
            out[dst] += c[src] * factor
    return Jet(space, order, out)


# ---------------------------------------------------------------------------
# small matrices of jets (tuples of tuples)


def mat_zero(space, order, n, m=None):
    z = Jet.zero(space, order)
    return tuple(tuple(z for _ in range(m or n)) for _ in range(n))


def mat_identity(space, order, n):
    z = Jet.zero(space, order)
    o = Jet.const(space, 1, order)
    return tuple(tuple(o if i == j else z for j in range(n)) for i in range(n))


def mat_from_rationals(space, order, rows):
    return tuple(tuple(Jet.const(space, v, order) for v in row) for row in rows)


def mat_add(a, b):
    return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_sub(a, b):
    return tuple(tuple(x - y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_neg(a):
    return tuple(tuple(-x for x in row) for row in a)


def mat_scale(a, s):
    return tuple(tuple(x * s for x in row) for row in a)


def mat_mul(a, b):
    n, k, m = len(a), len(b), len(b[0])
    out = []
    for i in range(n):
        row = []
        ai = a[i]
        for j in range(m):
            acc = None
            for t in range(k):
                x = ai[t]
                if x.is_zero():
                    continue
                y = b[t][j]
                if y.is_zero():
                    continue
                acc = x * y if acc is None else acc + x * y
            if acc is None:
                acc = Jet.zero(ai[0].space, min(ai[0].order, b[0][j].order))
            row.append(acc)
        out.append(tuple(row))
    return tuple(out)


def mat_is_zero(a):
    return all(x.is_zero() for row in a for x in row)


def mat_truncate(a, order):
    return tuple(tuple(x.truncate(order) for x in row) for row in a)


def mat_derive(a, alpha):
    return tuple(tuple(jet_derive(x, alpha) for x in row) for row in a)


def mat_order(a):
    return min(x.order for row in a for x in row)


def mat_trace(a):
    acc = a[0][0]
    for i in range(1, len(a)):
        acc = acc + a[i][i]
    return acc


def mat_inverse(a):
    """Inverse over the jet ring by Gauss-Jordan with unit pivots."""
    n = len(a)
    space = a[0][0].space
    order = mat_order(a)
    work = [list(row) + list(r) for row, r in zip(a, mat_identity(space, order, n))]
    for col in range(n):
        piv = next((r for r in range(col, n) if work[r][col].is_unit()), None)
        if piv is None:
            raise NotAUnit("matrix is singular at the base point")
        work[col], work[piv] = work[piv], work[col]
        inv = work[col][col].inverse()
        work[col] = [x * inv for x in work[col]]
        for r in range(n):
            if r != col and not work[r][col].is_zero():
                f = work[r][col]
                work[r] = [x - f * y for x, y in zip(work[r], work[col])]
    return tuple(tuple(row[n:]) for row in work)


# ---------------------------------------------------------------------------


class LaurentBlock:
    """Matrix-valued truncated Laurent series at one puncture.

    ``coeffs[k]`` is the coefficient of ``z**(lo + k)``.  ``weight`` counts
    the ``dz`` factors (0 for functions, 1 for forms, 2 for quadratic
    differentials).
    """

    __slots__ = ("puncture", "lo", "certified_to", "coeffs", "weight", "space", "order", "shape")

    def __init__(self, puncture, lo, coeffs, certified_to, weight=0, *, space=None,
                 order=None, shape=None):
        coeffs = list(coeffs)
        if coeffs:
            space = coeffs[0][0][0].space
            shape = (len(coeffs[0]), len(coeffs[0][0]))
            order = min(mat_order(c) for c in coeffs) if order is None else order
        if space is None or order is None or shape is None:
            raise ValueError("empty LaurentBlock needs space, order and shape")
        if certified_to >= EXACT // 2:
            certified_to = EXACT
            while coeffs and mat_is_zero(coeffs[-1]):
                coeffs.pop()
        self.puncture = puncture
        self.lo = lo
        self.certified_to = certified_to
        self.weight = weight
        self.space = space
        self.order = order
        self.shape = shape
        width = certified_to - lo + 1
        if width < 0:
            width = 0
        if certified_to == EXACT:
            pass
        elif len(coeffs) > width:
            coeffs = coeffs[:width]
        elif len(coeffs) < width:
            coeffs += [mat_zero(space, order, *shape)] * (width - len(coeffs))
        self.coeffs = coeffs

    # -- constructors -------------------------------------------------
    @classmethod
    def from_rationals(cls, puncture, lo, values, certified_to, weight=0, *, space=None, order=0):
        """Scalar (1x1) block from a list of rationals."""
        space = space or JetSpace(0)
        coeffs = [((Jet.const(space, v, order),),) for v in values]
        return cls(puncture, lo, coeffs, certified_to, weight, space=space, order=order,
                   shape=(1, 1))

    @classmethod
    def monomial(cls, puncture, matrix, degree, certified_to, weight=0):
        return cls(puncture, degree, [matrix], certified_to, weight)

    # -- access -------------------------------------------------------
    @property
    def empty(self):
        return self.certified_to < self.lo

    @property
    def exact(self):
        return self.certified_to == EXACT

    @property
    def top(self):
        """Last stored degree (the end of the window for truncated blocks)."""
        return self.lo + len(self.coeffs) - 1

    def __getitem__(self, degree):
        if degree > self.certified_to:
            raise WindowTooSmall(
                f"degree {degree} not certified (window ends at {self.certified_to})")
        if degree < self.lo or degree - self.lo >= len(self.coeffs):
            return mat_zero(self.space, self.order, *self.shape)
        return self.coeffs[degree - self.lo]

    def scalar(self, degree):
        return self[degree][0][0]

    def valuation(self):
        """Lowest degree with a nonzero coefficient inside the window, or None."""
        for k, c in enumerate(self.coeffs):
            if not mat_is_zero(c):
                return self.lo + k
        return None

    def with_window(self, certified_to):
        if certified_to > self.certified_to:
            raise WindowTooSmall("cannot extend a window by truncation")
        return LaurentBlock(self.puncture, self.lo, self.coeffs, certified_to, self.weight,
                            space=self.space, order=self.order, shape=self.shape)

    def truncate_jets(self, order):
        return LaurentBlock(self.puncture, self.lo, [mat_truncate(c, order) for c in self.coeffs],
                            self.certified_to, self.weight, space=self.space,
                            order=min(order, self.order), shape=self.shape)

    # -- arithmetic ---------------------------------------------------
    def _check(self, other):
        if self.puncture != other.puncture:
            raise PunctureMismatch(f"puncture {self.puncture} vs {other.puncture}")

    def __add__(self, other):
        self._check(other)
        lo = min(self.lo, other.lo)
        hi = min(self.certified_to, other.certified_to)
        end = _span_end(hi, self, other)
        coeffs = [mat_add(self[d], other[d]) for d in range(lo, end + 1)]
        return LaurentBlock(self.puncture, lo, coeffs, hi, self.weight, space=self.space,
                            order=min(self.order, other.order), shape=self.shape)

    def __neg__(self):
        return LaurentBlock(self.puncture, self.lo, [mat_neg(c) for c in self.coeffs],
                            self.certified_to, self.weight, space=self.space,
                            order=self.order, shape=self.shape)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s):
        return LaurentBlock(self.puncture, self.lo, [mat_scale(c, s) for c in self.coeffs],
                            self.certified_to, self.weight, space=self.space,
                            order=self.order if not isinstance(s, Jet) else min(self.order, s.order),
                            shape=self.shape)

    def shift(self, k):
        """Multiply by ``z**k``."""
        return LaurentBlock(self.puncture, self.lo + k, self.coeffs, self.certified_to + k,
                            self.weight, space=self.space, order=self.order, shape=self.shape)

    def __mul__(self, other):
        return laurent_mul(self, other)

    def derive_z(self):
        """d/dz of a weight-0 block; the result carries one ``dz``."""
        coeffs = []
        lo = self.lo - 1
        for d in range(lo, _span_end(self.certified_to - 1, self) + 1):
            coeffs.append(mat_scale(self[d + 1], d + 1))
        return LaurentBlock(self.puncture, lo, coeffs, self.certified_to - 1, self.weight + 1,
                            space=self.space, order=self.order, shape=self.shape)

    def jet_derive(self, alpha):
        return LaurentBlock(self.puncture, self.lo, [mat_derive(c, alpha) for c in self.coeffs],
                            self.certified_to, self.weight, space=self.space,
                            order=self.order - 1, shape=self.shape)

    def equal_on_window(self, other):
        """Exact comparison on the common certified window."""
        hi = min(self.certified_to, other.certified_to)
        lo = min(self.lo, other.lo)
        return all(self[d] == other[d] for d in range(lo, _span_end(hi, self, other) + 1))

    # -- serialization ------------------------------------------------
    def to_json(self):
        return {
            "puncture": self.puncture,
            "lo": self.lo,
            "certified_to": self.certified_to,
            "weight": self.weight,
            "order": self.order,
            "m": self.space.m,
            "shape": list(self.shape),
            "coeffs": [[[x.to_json() for x in row] for row in c] for c in self.coeffs],
        }

    @classmethod
    def from_json(cls, data):
        space = JetSpace(data["m"])
        order = data["order"]
        coeffs = [tuple(tuple(Jet.from_json(space, order, x) for x in row) for row in c)
                  for c in data["coeffs"]]
        return cls(data["puncture"], data["lo"], coeffs, data["certified_to"], data["weight"],
                   space=space, order=order, shape=tuple(data["shape"]))

    def __repr__(self):
        return (f"LaurentBlock(p={self.puncture}, lo={self.lo}, "
                f"certified_to={self.certified_to}, weight={self.weight}, shape={self.shape})")


def laurent_mul(a: LaurentBlock, b: LaurentBlock) -> LaurentBlock:
    """Product with window calculus; a 1x1 factor acts as a scalar."""
    a._check(b)
    lo = a.lo + b.lo
    hi = min(a.certified_to + b.lo, b.certified_to + a.lo)
    if a.shape == (1, 1) and b.shape != (1, 1):
        shape = b.shape
        prod = lambda x, y: mat_scale(y, x[0][0])
    elif b.shape == (1, 1) and a.shape != (1, 1):
        shape = a.shape
        prod = lambda x, y: mat_scale(x, y[0][0])
    else:
        shape = (a.shape[0], b.shape[1])
        prod = mat_mul
    order = min(a.order, b.order)
    nz_a = [(d, c) for d, c in zip(range(a.lo, a.certified_to + 1), a.coeffs) if not mat_is_zero(c)]
    nz_b = [(d, c) for d, c in zip(range(b.lo, b.certified_to + 1), b.coeffs) if not mat_is_zero(c)]
    acc = {}
    for da, ca in nz_a:
        if da + b.lo > hi:
            break
        for db, cb in nz_b:
            deg = da + db
            if deg > hi:
                break
            p = prod(ca, cb)
            acc[deg] = p if deg not in acc else mat_add(acc[deg], p)
    zero = mat_zero(a.space, order, *shape)
    end = hi if hi < EXACT // 2 else max(acc, default=lo - 1)
    coeffs = [acc.get(d, zero) for d in range(lo, end + 1)]
    return LaurentBlock(a.puncture, lo, coeffs, hi, a.weight + b.weight, space=a.space,
                        order=order, shape=shape)


def _span_end(hi, *blocks):
    if hi < EXACT // 2:
        return hi
    return max(b.top for b in blocks)


def series_invert(a: LaurentBlock, hi=None) -> LaurentBlock:
    """Inverse of a block whose lowest coefficient is invertible at the base point.

    A Laurent polynomial input needs an explicit window ``hi`` for the input.
    """
    if hi is not None:
        a = a.with_window(hi)
    elif a.exact:
        raise WindowTooSmall("inverting a Laurent polynomial needs an explicit window")
    lo = a.lo
    if a.empty:
        raise WindowTooSmall("cannot invert an empty window")
    lead = a[lo]
    n = a.shape[0]
    if a.shape[0] != a.shape[1]:
        raise NotAUnit("only square blocks can be inverted")
    if n == 1:
        if not lead[0][0].is_unit():
            raise NotAUnit("leading coefficient vanishes at the base point")
        lead_inv = ((lead[0][0].inverse(),),)
    else:
        lead_inv = mat_inverse(lead)
    width = a.certified_to - lo
    out = []
    ident = mat_identity(a.space, a.order, n)
    for t in range(width + 1):
        acc = ident if t == 0 else mat_zero(a.space, a.order, n)
        for j in range(1, t + 1):
            aj = a[lo + j]
            if not mat_is_zero(aj):
                acc = mat_sub(acc, mat_mul(aj, out[t - j]))
        out.append(mat_mul(lead_inv, acc))
    return LaurentBlock(a.puncture, -lo, out, a.certified_to - 2 * lo, -a.weight,
                        space=a.space, order=a.order, shape=a.shape)


def series_sqrt(a: LaurentBlock) -> LaurentBlock:
    """Square root of a scalar block by Newton iteration with precision doubling."""
    if a.shape != (1, 1):
        raise NotASquare("square roots are only defined for scalar blocks")
    v = a.valuation()
    if v is None:
        raise NotASquare("zero (or empty) series has no certified square root")
    if v % 2:
        raise NotASquare(f"odd valuation {v}")
    lead = a.scalar(v)
    root = rational_sqrt(lead.value) if lead.is_constant() else None
    if root is None:
        raise NotASquare(f"leading coefficient {lead!r} is not a rational square")
    width = a.certified_to - v  # relative precision
    unit = LaurentBlock(a.puncture, 0, a.coeffs[v - a.lo:], width,
                        space=a.space, order=a.order, shape=(1, 1))
    s = LaurentBlock(a.puncture, 0, [((Jet.const(a.space, root, a.order),),)], 0,
                     space=a.space, order=a.order, shape=(1, 1))
    prec = 0
    while True:
        prec = min(2 * prec + 1, width)
        s = LaurentBlock(a.puncture, 0, s.coeffs, prec, space=a.space, order=a.order,
                         shape=(1, 1))
        target = unit.with_window(prec)
        s = (s + laurent_mul(target, series_invert(s))).scale(HALF)
        if prec == width:
            # jets may need extra sweeps; stop at the fixed point
            for _ in range(a.order + 1):
                nxt = (s + laurent_mul(target, series_invert(s))).scale(HALF)
                if nxt.equal_on_window(s):
                    break
                s = nxt
            break
    return s.shift(v // 2)


def residue(f: LaurentBlock):
    """Coefficient of ``z**-1 dz`` of a one-form block."""
    if f.weight != 1:
        raise ValueError(f"residue needs a one-form block, got weight {f.weight}")
    if f.certified_to < -1:
        raise WindowTooSmall("degree -1 is not certified")
    return f[-1]


# -- window-calculus audit ----------------------------------------------------------

_AUDIT_OPS = ("add", "sub", "mul", "shift", "derive", "invert", "sqrt", "scale")


def _audit_leaf(rng, space, order):
    """A leaf as a reproducible 'infinite' series: ``(lo, coefficient function)``."""
    lo = rng.randint(-2, 2)
    seed = rng.getrandbits(32)

    def coeff(k):
        r = random.Random(seed * 1000003 + k)
        lead = k == 0
        c = {(0,) * space.m: mpq(r.choice([1, 2, 3, -1, -2]) if lead else r.randint(-4, 4),
                                 r.randint(1, 3))}
        if space.m and order and not lead:
            e = [0] * space.m
            e[r.randrange(space.m)] = 1
            c[tuple(e)] = r.randint(-2, 2)
        return Jet.from_dict(space, order, c)

    return lo, coeff


def random_dag(rng, size):
    """Random expression DAG: leaves then ``(op, i, j, k)`` nodes over earlier ids."""
    leaves = rng.randint(2, 4)
    nodes = []
    for n in range(size):
        nodes.append((rng.choice(_AUDIT_OPS), rng.randrange(leaves + n), rng.randrange(leaves + n),
                      rng.randint(-2, 2)))
    return leaves, nodes


def evaluate_dag(dag, leaves, precision, space, order, plan=None):
    """Evaluate a DAG with every leaf certified ``precision`` degrees past its start.

    ``plan`` records which nodes fell back to their first argument (an operation
    that is undefined on the input); pass the plan of a previous run to replay
    the same branches.  Returns ``(values, plan)``.
    """
    n_leaves, nodes = dag
    replay = plan is not None
    plan = list(plan) if replay else []
    vals = []
    for lo, coeff in leaves[:n_leaves]:
        mats = [((coeff(k),),) for k in range(precision + 1)]
        vals.append(LaurentBlock(0, lo, mats, lo + precision, space=space, order=order,
                                 shape=(1, 1)))
    for n, (op, i, j, k) in enumerate(nodes):
        a, b = vals[i], vals[j]
        if replay and plan[n] is None:
            vals.append(a)
            continue
        try:
            if op == "add":
                v = a + b
            elif op == "sub":
                v = a - b
            elif op == "mul":
                v = laurent_mul(a, b)
            elif op == "shift":
                v = a.shift(k)
            elif op == "derive":
                v = a.derive_z()
                v = LaurentBlock(0, v.lo, v.coeffs, v.certified_to, 0, space=space,
                                 order=order, shape=(1, 1))
            elif op == "scale":
                v = a.scale(mpq(k or 1, 3))
            elif op == "invert":
                v = series_invert(a)
                v = LaurentBlock(0, v.lo, v.coeffs, v.certified_to, 0, space=space,
                                 order=order, shape=(1, 1))
            else:
                v = series_sqrt(laurent_mul(a, a))
        except (NotAUnit, NotASquare, WindowTooSmall) as exc:
            if replay:
                raise WindowTooSmall(f"node {n} failed only at higher precision: {exc}")
            v = None
        if not replay:
            plan.append(None if v is None else op)
        vals.append(a if v is None else v)
    return vals, plan


def window_audit(count=50, size=8, seed=0, extra=10, m=1, order=1):
    """Soundness of the window calculus on random DAGs.

    Every node is evaluated with leaf precision N and N + extra; each coefficient
    certified at precision N must agree with the higher-precision value.
    Returns ``(coefficients compared, list of failures)``.
    """
    rng = random.Random(seed)
    space = JetSpace(m)
    compared, failures = 0, []
    for t in range(count):
        dag = random_dag(rng, size)
        leaves = [_audit_leaf(rng, space, order) for _ in range(dag[0])]
        prec = rng.randint(3, 8)
        low, plan = evaluate_dag(dag, leaves, prec, space, order)
        try:
            high, _ = evaluate_dag(dag, leaves, prec + extra, space, order, plan)
        except WindowTooSmall as exc:
            failures.append((t, None, str(exc)))
            continue
        for n, (a, b) in enumerate(zip(low, high)):
            if a.empty:
                continue
            if b.certified_to < a.certified_to:
                failures.append((t, n, "window shrank"))
                continue
            for d in range(min(a.lo, b.lo), a.certified_to + 1):
                compared += 1
                if a[d] != b[d]:
                    failures.append((t, n, d))
    return compared, failures

"""sl_n data, loop and form elements, group elements and the residue pairing.

The trace form ``kappa(X, Y) = tr(XY)`` is used together with a rational basis
``I_a`` and its dual ``I^a``; the Casimir is ``gamma = sum_a I_a (x) I^a``.
Loop and form elements carry one matrix-valued :class:`LaurentBlock` per
puncture.
"""
from __future__ import annotations

from math import factorial

from gmpy2 import mpq

from .errors import BothForms, PunctureMismatch, WindowTooSmall
from .jetring import (
    EXACT, ONE, ZERO, Jet, JetSpace, LaurentBlock, Q, laurent_mul, mat_add, mat_from_rationals,
    mat_identity, mat_is_zero, mat_mul, mat_zero,
)
from .linalg import inverse


def _rmat_mul(a, b):
    n = len(a)
    return [[sum((a[i][t] * b[t][j] for t in range(n)), ZERO) for j in range(n)] for i in range(n)]


def _rmat_sub(a, b):
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


class LieData:
    """Rational basis data for sl_n with the trace form."""

    def __init__(self, n: int = 2):
        if n < 2:
            raise ValueError("n must be at least 2")
        self.n = n
        basis, names = [], []
        offdiag = [(i, j) for i in range(n) for j in range(i + 1, n)]
        for i, j in offdiag:
            basis.append(self._unit(i, j))
            names.append("e" if n == 2 else f"E{i + 1}{j + 1}")
        for i, j in offdiag:
            basis.append(self._unit(j, i))
            names.append("f" if n == 2 else f"E{j + 1}{i + 1}")
        for k in range(n - 1):
            h = self._unit(k, k)
            h[k + 1][k + 1] = -ONE
            basis.append(h)
            names.append("h" if n == 2 else f"H{k + 1}")
        self.basis = basis
        self.names = names
        self.d = len(basis)
        self._offdiag = [(i, j) for i, j in offdiag] + [(j, i) for i, j in offdiag]
        self.gram = [[self.kappa(a, b) for b in basis] for a in basis]
        self.gram_inv = inverse(self.gram)
        self.dual = [self.matrix(row) for row in self.gram_inv]
        # [I_a, I_b] = sum_c struct[a][b][c] I_c
        self.struct = [[self.coords(_rmat_sub(_rmat_mul(x, y), _rmat_mul(y, x))) for y in basis]
                       for x in basis]
        self.fnz = [(a, b, c, v) for a in range(self.d) for b in range(self.d)
                    for c, v in enumerate(self.struct[a][b]) if v]

    def _unit(self, i, j):
        m = [[ZERO] * self.n for _ in range(self.n)]
        m[i][j] = ONE
        return m

    def kappa(self, x, y):
        n = len(x)
        acc = None
        for i in range(n):
            for t in range(n):
                a, b = x[i][t], y[t][i]
                if _nz(a) and _nz(b):
                    acc = a * b if acc is None else acc + a * b
        return ZERO if acc is None else acc

    def coords(self, m):
        """Coordinates of a traceless matrix (rational or jet entries) in the basis."""
        out = [m[i][j] for i, j in self._offdiag]
        acc = None
        for k in range(self.n - 1):
            acc = m[k][k] if acc is None else acc + m[k][k]
            out.append(acc)
        return out

    def matrix(self, vec):
        """Matrix of a coordinate vector (entries rational or jets)."""
        n = self.n
        sample = next((v for v in vec if isinstance(v, Jet)), None)
        zero = Jet.zero(sample.space, sample.order) if sample is not None else ZERO
        m = [[zero] * n for _ in range(n)]
        for (i, j), v in zip(self._offdiag, vec):
            m[i][j] = v
        hs = vec[len(self._offdiag):]
        for k, v in enumerate(hs):
            m[k][k] = m[k][k] + v
            m[k + 1][k + 1] = m[k + 1][k + 1] - v
        return m

    def casimir(self):
        """``gamma`` as a coefficient matrix: gamma = sum_ab C[a][b] I_a (x) I_b."""
        return [row[:] for row in self.gram_inv]

    def bracket_coords(self, x, y):
        """Coordinates of [x, y] from coordinates (rationals or jets)."""
        out = [None] * self.d
        for a, b, c, v in self.fnz:
            xa, yb = x[a], y[b]
            if _nz(xa) and _nz(yb):
                t = xa * yb * v
                out[c] = t if out[c] is None else out[c] + t
        return [ZERO if o is None else o for o in out]

    def ad_matrix(self, x):
        """Matrix of ad x in the basis: column b is [x, I_b]."""
        d = self.d
        cols = []
        for b in range(d):
            e = [ZERO] * d
            e[b] = ONE
            cols.append(self.bracket_coords(x, e))
        return [[cols[b][c] for b in range(d)] for c in range(d)]

    def element(self, name):
        return self.basis[self.names.index(name)]


def _nz(v):
    if isinstance(v, Jet):
        return not v.is_zero()
    return bool(v)


# ---------------------------------------------------------------------------


class LoopElement:
    """Lie-algebra valued series, one matrix block per puncture.

    ``weight`` is 0 for loop (function) elements and 1 for form elements.
    """

    def __init__(self, blocks, weight=None):
        self.blocks = list(blocks)
        w = {b.weight for b in self.blocks}
        if len(w) > 1:
            raise ValueError("inconsistent weights")
        self.weight = w.pop() if weight is None else weight

    @property
    def num_punctures(self):
        return len(self.blocks)

    @classmethod
    def monomial(cls, lie, space, order, num_punctures, puncture, matrix, degree,
                 weight=0):
        """``matrix * z_puncture^degree`` (times dz if weight 1), zero elsewhere."""
        mat = _lift(space, order, matrix)
        blocks = []
        for p in range(num_punctures):
            if p == puncture:
                blocks.append(LaurentBlock(p, degree, [mat], EXACT, weight))
            else:
                blocks.append(LaurentBlock(p, 0, [], EXACT, weight, space=space, order=order,
                                           shape=(lie.n, lie.n)))
        return cls(blocks, weight)

    @classmethod
    def constant(cls, lie, space, order, num_punctures, matrix):
        mat = _lift(space, order, matrix)
        return cls([LaurentBlock(p, 0, [mat], EXACT) for p in range(num_punctures)], 0)

    def _zip(self, other):
        if self.num_punctures != other.num_punctures:
            raise PunctureMismatch("different puncture sets")
        return zip(self.blocks, other.blocks)

    def __add__(self, other):
        return LoopElement([a + b for a, b in self._zip(other)], self.weight)

    def __sub__(self, other):
        return LoopElement([a - b for a, b in self._zip(other)], self.weight)

    def __neg__(self):
        return LoopElement([-a for a in self.blocks], self.weight)

    def scale(self, s):
        return LoopElement([a.scale(s) for a in self.blocks], self.weight)

    def shift(self, k):
        return LoopElement([a.shift(k) for a in self.blocks], self.weight)

    def jet_derive(self, alpha):
        return LoopElement([a.jet_derive(alpha) for a in self.blocks], self.weight)

    def with_window(self, hi):
        return LoopElement([a.with_window(min(hi, a.certified_to)) for a in self.blocks],
                           self.weight)

    def coeff(self, puncture, degree):
        return self.blocks[puncture][degree]

    def equal_on_window(self, other):
        return all(a.equal_on_window(b) for a, b in self._zip(other))

    def is_zero_on_window(self):
        return all(mat_is_zero(c) for b in self.blocks for c in b.coeffs)

    def certified_to(self):
        return min(b.certified_to for b in self.blocks)

    def __repr__(self):
        return f"LoopElement(weight={self.weight}, blocks={self.blocks})"


def _lift(space, order, matrix):
    return tuple(tuple(v if isinstance(v, Jet) else Jet.const(space, v, order) for v in row)
                 for row in matrix)


def bracket(a: LoopElement, b: LoopElement) -> LoopElement:
    """Pointwise commutator; at most one argument may be a form."""
    if a.weight and b.weight:
        raise BothForms("cannot bracket two forms")
    blocks = []
    for x, y in a._zip(b):
        blocks.append(laurent_mul(x, y) - laurent_mul(y, x))
    return LoopElement(blocks, a.weight + b.weight)


def pair_B(a: LoopElement, w: LoopElement):
    """Residue pairing: sum over punctures of res tr(a w)."""
    if a.weight + w.weight != 1:
        raise ValueError("pairing needs one loop and one form element")
    total = None
    for x, y in a._zip(w):
        lo_x, lo_y = x.lo, y.lo
        top = -1 - lo_y
        if top >= lo_x and (x.certified_to < top or y.certified_to < -1 - lo_x):
            raise WindowTooSmall("degree -1 of the pairing is not certified")
        for k in range(lo_x, top + 1):
            xm, ym = x[k], y[-1 - k]
            if mat_is_zero(xm) or mat_is_zero(ym):
                continue
            n = len(xm)
            for i in range(n):
                for t in range(n):
                    p, q = xm[i][t], ym[t][i]
                    if not p.is_zero() and not q.is_zero():
                        total = p * q if total is None else total + p * q
    if total is None:
        sp = a.blocks[0].space
        return Jet.zero(sp, min(a.blocks[0].order, w.blocks[0].order))
    return total


class GroupElement:
    """Matrix loop with an exact inverse, one block per puncture."""

    def __init__(self, blocks, inv_blocks, check=True):
        self.blocks = list(blocks)
        self.inv_blocks = list(inv_blocks)
        if check:
            for g, h in zip(self.blocks, self.inv_blocks):
                prod = laurent_mul(g, h)
                n = g.shape[0]
                ident = mat_identity(g.space, prod.order, n)
                for d in range(prod.lo, prod.top + 1 if prod.exact else prod.certified_to + 1):
                    want = ident if d == 0 else mat_zero(g.space, prod.order, n)
                    if prod[d] != want:
                        raise ValueError("inverse does not match")

    @property
    def num_punctures(self):
        return len(self.blocks)

    @classmethod
    def identity(cls, n, space, order, num_punctures):
        ident = mat_identity(space, order, n)
        blocks = [LaurentBlock(p, 0, [ident], EXACT) for p in range(num_punctures)]
        return cls(blocks, list(blocks), check=False)

    @classmethod
    def elementary(cls, n, space, order, num_punctures, puncture, i, j, c, k):
        """``1 + c z^k E_ij`` at one puncture (i != j), identity elsewhere."""
        ident = mat_identity(space, order, n)
        out, inv = [], []
        for p in range(num_punctures):
            if p != puncture or c == 0:
                out.append(LaurentBlock(p, 0, [ident], EXACT))
                inv.append(LaurentBlock(p, 0, [ident], EXACT))
                continue
            e = [[ZERO] * n for _ in range(n)]
            e[i][j] = Q(c)
            em = mat_from_rationals(space, order, e)
            ne = mat_from_rationals(space, order, [[-v for v in row] for row in e])
            one = LaurentBlock(p, 0, [ident], EXACT)
            out.append(one + LaurentBlock(p, k, [em], EXACT))
            inv.append(one + LaurentBlock(p, k, [ne], EXACT))
        return cls(out, inv, check=False)

    @classmethod
    def exp_nilpotent(cls, x: LoopElement):
        """exp(x) for x whose coefficients lie in the augmentation ideal of the jets."""
        return cls(_exp_blocks(x.blocks, 1), _exp_blocks(x.blocks, -1), check=False)

    def __mul__(self, other):
        blocks = [laurent_mul(a, b) for a, b in zip(self.blocks, other.blocks)]
        inv = [laurent_mul(b, a) for a, b in zip(self.inv_blocks, other.inv_blocks)]
        return GroupElement(blocks, inv, check=False)

    def inverse(self):
        return GroupElement(self.inv_blocks, self.blocks, check=False)

    def jet_derive(self, alpha):
        """Blockwise d/du_alpha of the group element (a matrix loop, not a group element)."""
        return [b.jet_derive(alpha) for b in self.blocks]

    def truncate_jets(self, order):
        return GroupElement([b.truncate_jets(order) for b in self.blocks],
                            [b.truncate_jets(order) for b in self.inv_blocks], check=False)

    def pole_order(self):
        return max(max(-b.lo, 0) for b in self.blocks + self.inv_blocks)

    def base_point(self):
        return self.truncate_jets(0)


def _exp_blocks(blocks, sign):
    out = []
    for b in blocks:
        order = b.order
        n = b.shape[0]
        ident = LaurentBlock(b.puncture, 0, [mat_identity(b.space, order, n)], EXACT)
        x = b if sign > 0 else -b
        term = ident
        total = ident
        for t in range(1, order + 1):
            term = laurent_mul(term, x).scale(mpq(1, t))
            total = total + term
        out.append(total)
    return out


def ad_conjugate(g: GroupElement, a: LoopElement) -> LoopElement:
    """``g a g^-1`` with window calculus."""
    blocks = [laurent_mul(laurent_mul(x, y), z) for x, y, z in zip(g.blocks, a.blocks, g.inv_blocks)]
    return LoopElement(blocks, a.weight)

"""Exact linear algebra over the rationals and over the jet ring.

Matrices are lists of rows of ``mpq``.  Elimination is plain Gauss-Jordan;
the systems in this package have at most a few hundred unknowns, which is
well within reach of exact rational arithmetic.
"""
from __future__ import annotations

from gmpy2 import mpq

from .errors import PoleBoundTooSmall, SingularSystem
from .jetring import ZERO, ONE, Jet, jet_mul_raw


def rref(rows, ncols=None):
    """Reduced row echelon form.  Returns ``(reduced_rows, pivot_columns)``."""
    work = [list(r) for r in rows]
    if ncols is None:
        ncols = len(work[0]) if work else 0
    pivots = []
    r = 0
    for c in range(ncols):
        piv = None
        for i in range(r, len(work)):
            if work[i][c]:
                piv = i
                break
        if piv is None:
            continue
        work[r], work[piv] = work[piv], work[r]
        prow = work[r]
        inv = ONE / prow[c]
        if inv != 1:
            prow = [x * inv for x in prow]
            work[r] = prow
        nz = [j for j in range(c, len(prow)) if prow[j]]
        for i in range(len(work)):
            if i != r:
                f = work[i][c]
                if f:
                    row = work[i]
                    for j in nz:
                        row[j] -= f * prow[j]
        pivots.append(c)
        r += 1
        if r == len(work):
            break
    return work[:r], pivots


def rank(rows, ncols=None):
    return len(rref(rows, ncols)[1])


def nullspace(rows, ncols):
    """Basis of ``{x : rows @ x = 0}`` as a list of vectors."""
    red, pivots = rref(rows, ncols)
    free = [c for c in range(ncols) if c not in set(pivots)]
    basis = []
    for f in free:
        v = [ZERO] * ncols
        v[f] = ONE
        for row, p in zip(red, pivots):
            v[p] = -row[f]
        basis.append(v)
    return basis


def row_space_basis(rows, ncols):
    return rref(rows, ncols)[0]


def independent_rows(rows, ncols):
    """Indices of a maximal set of linearly independent rows, greedily in order."""
    transposed = [[rows[i][j] for i in range(len(rows))] for j in range(ncols)]
    return rref(transposed, len(rows))[1]


def inverse(matrix):
    n = len(matrix)
    aug = [list(row) + [ONE if i == j else ZERO for j in range(n)] for i, row in enumerate(matrix)]
    red, pivots = rref(aug, n)
    if pivots != list(range(n)):
        raise SingularSystem("matrix is singular")
    return [row[n:] for row in red]


def matmul(a, b):
    if not a:
        return []
    m = len(b[0]) if b else 0
    out = []
    for row in a:
        acc = [ZERO] * m
        for t, x in enumerate(row):
            if x:
                for j, y in enumerate(b[t]):
                    if y:
                        acc[j] += x * y
        out.append(acc)
    return out


def matvec(a, v):
    return [sum((x * y for x, y in zip(row, v) if x and y), ZERO) for row in a]


def solve(a, b):
    """Solve ``a @ x = b`` (``b`` a list of right-hand-side columns as rows x k).

    Raises SingularSystem if the solution is not unique and
    PoleBoundTooSmall if the system is inconsistent.
    """
    ncols = len(a[0])
    k = len(b[0]) if b else 0
    aug = [list(ra) + list(rb) for ra, rb in zip(a, b)]
    red, pivots = rref(aug, ncols + k)
    if any(p >= ncols for p in pivots):
        raise PoleBoundTooSmall("inconsistent linear system")
    if len(pivots) < ncols:
        raise SingularSystem(f"rank {len(pivots)} < {ncols}")
    return [row[ncols:] for row in red[:ncols]]


class JetSystem:
    """A linear system whose coefficients are jets, solved layer by layer.

    ``rows`` is a list of sparse rows ``{column: Jet}``.  The order-0 matrix
    must have full column rank; a square invertible block of it is chosen once
    and reused for every jet layer and every right-hand side.
    """

    def __init__(self, rows, ncols, space, order):
        self.rows = rows
        self.ncols = ncols
        self.space = space
        self.order = order
        nmono = space.sizes[order]
        # layers[mu] = list of sparse rows {col: mpq}
        self.layers = [[{} for _ in rows] for _ in range(nmono)]
        for r, row in enumerate(rows):
            for col, jet in row.items():
                for mu, v in enumerate(jet.c[:nmono]):
                    if v:
                        self.layers[mu][r][col] = v
        base = [[row.get(c, ZERO) for c in range(ncols)] for row in self.layers[0]]
        self.base = base
        sel = independent_rows(base, ncols) if base else []
        if len(sel) < ncols:
            raise SingularSystem(f"order-0 system has rank {len(sel)} < {ncols} unknowns")
        self.sel = sel
        self.inv = inverse([base[i] for i in sel])

    def _apply(self, mu, x):
        """A_mu @ x for x a dense list of rhs-vectors per column."""
        out = []
        for row in self.layers[mu]:
            acc = None
            for col, v in row.items():
                xv = x[col]
                acc = [v * t for t in xv] if acc is None else [a + v * t for a, t in zip(acc, xv)]
            out.append(acc)
        return out

    def solve(self, rhs, verify=True):
        """Solve for many right-hand sides.

        ``rhs`` is a list (one per equation row) of lists (one per rhs) of
        Jets.  Returns ``x[col][rhs]`` as Jets.  Raises PoleBoundTooSmall when
        some equation is not satisfied exactly.
        """
        space, order = self.space, self.order
        nmono = space.sizes[order]
        nrhs = len(rhs[0]) if rhs else 0
        nrows = len(self.rows)
        rows_tab = space.rows[order]
        # b[mu][row][k]
        b = [[[rhs[r][k].c[mu] if mu < len(rhs[r][k].c) else ZERO for k in range(nrhs)]
              for r in range(nrows)] for mu in range(nmono)]
        xs = []  # xs[omega][col][k]
        residual_ok = True
        for omega in range(nmono):
            cur = [list(rb) for rb in b[omega]]
            for mu in range(1, nmono):
                if not any(self.layers[mu]):
                    continue
                for nu, kk in rows_tab[mu]:
                    if kk == omega and nu < omega:
                        prod = self._apply(mu, xs[nu])
                        for r in range(nrows):
                            if prod[r] is not None:
                                cur[r] = [a - p for a, p in zip(cur[r], prod[r])]
            sel_rhs = [cur[i] for i in self.sel]
            x = matmul(self.inv, sel_rhs)
            xs.append(x)
            if verify:
                prod = self._apply(0, x)
                for r in range(nrows):
                    got = prod[r] if prod[r] is not None else [ZERO] * nrhs
                    if got != cur[r]:
                        residual_ok = False
                        break
            if not residual_ok:
                raise PoleBoundTooSmall("jet system is inconsistent; enlarge the pole bound")
        return [[Jet(space, order, [xs[w][c][k] for w in range(nmono)]) for k in range(nrhs)]
                for c in range(self.ncols)]

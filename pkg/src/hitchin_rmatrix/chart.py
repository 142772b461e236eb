"""Charts on the moduli of bundles: the family ``sigma(u)``, its frame and coframe.

``sigma(u) = sigma0 * exp(sum_alpha u_alpha eta_alpha)`` is a Laurent-polynomial
loop with jet coefficients.  Everything the verifiers need from it is computed
in Lie-algebra coordinates:

* ``adinv[i][s]``: the coordinate matrix of ``Ad(sigma^-1)`` in degree ``s`` at
  puncture ``i`` (column ``p`` holds ``sigma^-1 I_p sigma``);
* ``xi[alpha][i][s]``: coordinates of ``sigma^-1 d_alpha sigma``;
* ``omega``: global forms whose ``Ad(sigma^-1)`` image is holomorphic and dual
  to the frame under the residue pairing.

Coordinate series are dicts ``degree -> list of d jets``; all of them are
Laurent polynomials, so no truncation is involved at this layer.
"""
from __future__ import annotations

import hashlib
import json
import random
from math import factorial
from dataclasses import dataclass, field

from gmpy2 import mpq

from .curve import FORM, FUNCTION, CurveModel
from .errors import DualityFailure, NotTransversal, PoleBoundTooSmall, SearchExhausted, SingularSystem
from .jetring import EXACT, ONE, ZERO, Jet, JetSpace, LaurentBlock, Q, laurent_mul, qstr
from .linalg import JetSystem, nullspace, rank, rref
from .looplie import GroupElement, LieData, LoopElement, bracket


# -- coordinate series helpers -----------------------------------------------

def loop_coords(lie, loop: LoopElement):
    """Per puncture ``{degree: [d jets]}`` of a Lie-valued loop (Laurent polynomial)."""
    out = []
    for b in loop.blocks:
        ser = {}
        for k, c in enumerate(b.coeffs):
            if any(not x.is_zero() for row in c for x in row):
                ser[b.lo + k] = lie.coords(c)
        out.append(ser)
    return out


def adjoint_coords(lie, g: GroupElement, space, order):
    """Per puncture ``{s: d x d}`` with column p = coords of ``g^-1 I_p g``."""
    nump = g.num_punctures
    cols = []
    for p in range(lie.d):
        x = LoopElement.constant(lie, space, order, nump, lie.basis[p])
        conj = [_mul3(gi, xb, gb) for gi, xb, gb in zip(g.inv_blocks, x.blocks, g.blocks)]
        cols.append(loop_coords(lie, LoopElement(conj, 0)))
    out = []
    zero = Jet.zero(space, order)
    for i in range(nump):
        degs = sorted(set().union(*(cols[p][i].keys() for p in range(lie.d))))
        ser = {}
        for s in degs:
            ser[s] = [[cols[p][i].get(s, [zero] * lie.d)[q] for p in range(lie.d)]
                      for q in range(lie.d)]
        out.append(ser)
    return out


def _mul3(a, b, c):
    return laurent_mul(laurent_mul(a, b), c)


def truncate_series(ser, order):
    return [{s: [x.truncate(order) for x in v] for s, v in p.items()} for p in ser]


def truncate_matrix_series(ser, order):
    return [{s: [[x.truncate(order) for x in row] for row in m] for s, m in p.items()} for p in ser]


def apply_matrix_series(adm, vec_series, lo, hi, d, zero):
    """``(A * v)[k] = sum_s A[s] v[k-s]`` for k in lo..hi (one puncture)."""
    out = {}
    for k in range(lo, hi + 1):
        acc = None
        for s, mat in adm.items():
            v = vec_series.get(k - s)
            if v is None:
                continue
            for q in range(d):
                row = mat[q]
                for p in range(d):
                    a, x = row[p], v[p]
                    if a.is_zero() or x.is_zero():
                        continue
                    if acc is None:
                        acc = [zero] * d
                    acc[q] = acc[q] + a * x
        if acc is not None:
            out[k] = acc
    return out


# -- specs ----------------------------------------------------------------

@dataclass
class ChartSpec:
    """Reproducible description of a chart.

    ``sigma0``: factors ``(puncture, i, j, c, k)`` meaning ``1 + c z^k E_ij``.
    ``eta``: one entry per coordinate, a list of terms ``(puncture, degree, coords)``.
    """

    sigma0: list
    eta: list
    seed: int | None = None

    def to_json(self):
        return {
            "sigma0": [[p, i, j, qstr(c), k] for p, i, j, c, k in self.sigma0],
            "eta": [[[p, k, [qstr(v) for v in vec]] for p, k, vec in terms] for terms in self.eta],
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, data):
        return cls([(p, i, j, Q(c), k) for p, i, j, c, k in data["sigma0"]],
                   [[(p, k, [Q(v) for v in vec]) for p, k, vec in terms] for terms in data["eta"]],
                   data.get("seed"))


def default_eta(lie, curve):
    """Elementary modes ``I_a z^-k`` (k = 1..g-1) at the first puncture."""
    out = []
    for k in range(1, curve.genus):
        for a in range(lie.d):
            vec = [ZERO] * lie.d
            vec[a] = ONE
            out.append([(0, -k, vec)])
    return out


def random_eta(lie, curve, rng):
    m = (curve.genus - 1) * lie.d
    out = []
    for _ in range(m):
        terms = []
        for _ in range(2):
            vec = [mpq(rng.randint(-3, 3)) for _ in range(lie.d)]
            terms.append((rng.randrange(curve.num_punctures), -rng.randint(1, curve.genus), vec))
        out.append(terms)
    return out


def sigma0_element(lie, spec, nump, space, order):
    g = GroupElement.identity(lie.n, space, order, nump)
    for p, i, j, c, k in spec:
        g = g * GroupElement.elementary(lie.n, space, order, nump, p, i, j, c, k)
    return g


def eta_loop(lie, terms, nump, space, order, scale=None):
    """The loop ``sum terms`` with every coefficient multiplied by the jet ``scale``."""
    blocks = []
    for i in range(nump):
        acc = LaurentBlock(i, 0, [], EXACT, space=space, order=order, shape=(lie.n, lie.n))
        for p, k, vec in terms:
            if p != i:
                continue
            mat = lie.matrix([Jet.const(space, v, order) for v in vec])
            if scale is not None:
                mat = [[x * scale for x in row] for row in mat]
            acc = acc + LaurentBlock(i, k, [tuple(tuple(r) for r in mat)], EXACT)
        blocks.append(acc)
    return LoopElement(blocks, 0)


def build_sigma(lie, curve, spec: ChartSpec, space, order):
    """``sigma0 * exp(sum u_alpha eta_alpha)`` with jets of the given order."""
    nump = curve.num_punctures
    s0 = sigma0_element(lie, spec.sigma0, nump, space, order)
    x = None
    for alpha, terms in enumerate(spec.eta):
        t = eta_loop(lie, terms, nump, space, order, Jet.var(space, alpha, order))
        x = t if x is None else x + t
    if x is None:
        return s0
    return s0 * GroupElement.exp_nilpotent(x)


def frame_loops(lie, curve, spec, space, order):
    """``xi_alpha = sigma^-1 d_alpha sigma`` via the derivative of the exponential.

    With ``sigma = sigma0 exp(X)`` and ``X = sum u_alpha eta_alpha``,
    ``xi_alpha = sum_k (-1)^k / (k+1)! ad_X^k(eta_alpha)``; the sum stops at
    ``k = order`` because ``X`` has no constant jet term.
    """
    nump = curve.num_punctures
    x = None
    for alpha, terms in enumerate(spec.eta):
        t = eta_loop(lie, terms, nump, space, order, Jet.var(space, alpha, order))
        x = t if x is None else x + t
    out = []
    for terms in spec.eta:
        term = eta_loop(lie, terms, nump, space, order)
        total = term
        for k in range(1, order + 1):
            term = bracket(x, term)
            total = total + term.scale(mpq((-1) ** k, factorial(k + 1)))
        out.append(total)
    return out


def maurer_cartan(g: GroupElement, m):
    """``g^-1 d_alpha g`` for every coordinate (one jet order lower than g)."""
    out = []
    for alpha in range(m):
        blocks = [laurent_mul(h, db) for h, db in zip(g.inv_blocks, g.jet_derive(alpha))]
        out.append(LoopElement(blocks, 0))
    return out


# -- the Omega^- / O^- linear maps ------------------------------------------

class OuterSpan:
    """A finite span ``g (x) (basis)`` of outer functions or forms.

    Unknown ``j * d + p`` is the coefficient of ``I_p * basis[j]``.
    """

    def __init__(self, curve: CurveModel, lie: LieData, kind, max_pole):
        self.curve = curve
        self.lie = lie
        self.kind = kind
        self.max_pole = max_pole
        self.basis = curve.outer_basis(kind, max_pole)
        self.size = len(self.basis) * lie.d
        self._cache = {}

    def expansion(self, j, puncture, hi):
        key = (j, puncture)
        e = self._cache.get(key)
        if e is None or e.hi < hi:
            e = self.curve.expand(self.basis[j], puncture, max(hi, 8))
            self._cache[key] = e
        return e

    def lowest_degree(self, puncture):
        return min(self.expansion(j, puncture, 0).lo for j in range(len(self.basis))) if self.basis else 0


def conjugated_rows(span: OuterSpan, adm, puncture, lo, hi, d, space, order):
    """Rows of the map ``coeffs -> coeffs of Ad(sigma^-1) G`` at degrees lo..hi.

    Returns ``{(k, q): {unknown: Jet}}``.
    """
    rows = {}
    nb = len(span.basis)
    smax = max(adm) if adm else 0
    for j in range(nb):
        e = span.expansion(j, puncture, hi - min(adm, default=0))
        for t, c in e.items():
            for s, mat in adm.items():
                k = t + s
                if k < lo or k > hi:
                    continue
                for q in range(d):
                    row = rows.setdefault((k, q), {})
                    mrow = mat[q]
                    for p in range(d):
                        a = mrow[p]
                        if a.is_zero():
                            continue
                        col = j * d + p
                        v = a * c
                        row[col] = row[col] + v if col in row else v
    return rows


# -- certificate -------------------------------------------------------------

@dataclass
class Certificate:
    depth: int
    h0_nullity: int
    principal_depth: int
    complement_dim: int
    spans_complement: bool
    system_rank: int = 0
    system_unknowns: int = 0
    passed: bool = False
    notes: list = field(default_factory=list)

    def to_json(self):
        return {k: getattr(self, k) for k in (
            "depth", "h0_nullity", "principal_depth", "complement_dim", "spans_complement",
            "system_rank", "system_unknowns", "passed", "notes")}


def _rational_rows(rows):
    return {key: {c: v.value for c, v in row.items() if v.value} for key, row in rows.items()}


def certify_sigma0(curve, lie, s0: GroupElement, xi0, depth=None, max_depth_extra=8):
    """Exact transversality checks for the base loop ``sigma0``.

    ``xi0`` are the frame coordinates at the base point (per alpha, per
    puncture ``{degree: [d rationals or jets]}``).
    """
    m = (curve.genus - 1) * lie.d
    d = lie.d
    nump = curve.num_punctures
    space = s0.blocks[0].space
    adm = [{s: [[x.truncate(0) for x in row] for row in mat] for s, mat in ser.items()}
           for ser in adjoint_coords(lie, s0.truncate_jets(0), space, 0)]
    psigma = s0.pole_order()
    if depth is None:
        depth = max(2 * curve.genus - 1, 2 * psigma)
    # (i) sections of Ad: b in g (x) O^- with Ad(sigma0^-1) b holomorphic
    span = OuterSpan(curve, lie, FUNCTION, depth)
    rows = []
    for i in range(nump):
        lo = span.lowest_degree(i) + min(adm[i])
        r = _rational_rows(conjugated_rows(span, adm[i], i, lo, -1, d, space, 0))
        rows.extend(r.values())
    dense = [[row.get(c, ZERO) for c in range(span.size)] for row in rows]
    h0 = span.size - (rank(dense, span.size) if dense else 0)
    cert = Certificate(depth, h0, 0, 0, False)
    if h0:
        cert.notes.append(f"{h0} global sections of the adjoint bundle up to pole {depth}")
        return cert
    # (ii) complement of L+ + Ad(sigma0^-1) L- in the principal parts
    base_n = max(2 * curve.genus - 1, 2 * psigma) + 2 * psigma
    width = None
    for n_pp in range(base_n, base_n + max_depth_extra + 1):
        span = OuterSpan(curve, lie, FUNCTION, n_pp + 2 * psigma)
        deep, shallow = [], []
        for i in range(nump):
            lo = span.lowest_degree(i) + min(adm[i])
            r = _rational_rows(conjugated_rows(span, adm[i], i, lo, -1, d, space, 0))
            for k in range(lo, -n_pp):
                for q in range(d):
                    row = r.get((k, q), {})
                    deep.append([row.get(c, ZERO) for c in range(span.size)])
            for k in range(-n_pp, 0):
                for q in range(d):
                    row = r.get((k, q), {})
                    shallow.append([row.get(c, ZERO) for c in range(span.size)])
        width = len(shallow)
        basis = nullspace(deep, span.size) if deep else _identity(span.size)
        image = [[sum((row[c] * v[c] for c in range(span.size) if row[c] and v[c]), ZERO)
                  for row in shallow] for v in basis]
        codim = width - (rank(image, width) if image else 0)
        if codim == m:
            break
    cert.principal_depth = n_pp
    cert.complement_dim = codim
    if codim != m:
        cert.notes.append(f"complement dimension {codim} != {m}")
        return cert
    # principal parts of xi(u0) in the (puncture, degree, q) order of the shallow rows
    xi_rows = []
    for a in range(m):
        vec = []
        for i in range(nump):
            ser = xi0[a][i]
            for k in range(-n_pp, 0):
                v = ser.get(k)
                for q in range(d):
                    x = ZERO if v is None else v[q]
                    vec.append(x.value if isinstance(x, Jet) else Q(x))
        xi_rows.append(vec)
    cert.spans_complement = rank(image + xi_rows, width) == width
    if not cert.spans_complement:
        cert.notes.append("frame does not span the complement")
        return cert
    cert.passed = True
    return cert


def _identity(n):
    return [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]


# -- global forms ---------------------------------------------------------------

class GlobalForm:
    """``sum_{j,p} coeffs[j*d + p] I_p psi_j`` with psi_j outer basis forms."""

    def __init__(self, span: OuterSpan, coeffs):
        self.span = span
        self.coeffs = list(coeffs)

    def coords(self, puncture, hi):
        """Direct expansion ``{degree: [d jets]}`` up to degree ``hi``."""
        d = self.span.lie.d
        out = {}
        for j in range(len(self.span.basis)):
            cj = self.coeffs[j * d:(j + 1) * d]
            if all(c.is_zero() for c in cj):
                continue
            for t, v in self.span.expansion(j, puncture, hi).items():
                if t > hi:
                    break
                acc = out.get(t)
                add = [c * v for c in cj]
                out[t] = add if acc is None else [a + b for a, b in zip(acc, add)]
        return out

    def lowest_degree(self, puncture):
        return self.span.lowest_degree(puncture)

    def perturbed(self, index, delta):
        c = list(self.coeffs)
        c[index] = c[index] + delta
        return GlobalForm(self.span, c)

    def to_json(self):
        return {"kind": self.span.kind, "max_pole": self.span.max_pole,
                "coeffs": [c.to_json() for c in self.coeffs]}


class GlobalFormSystem:
    """Linear system for global forms ``G`` in ``g (x) Omega^-`` (pole <= P).

    Equations: every negative-degree coefficient of ``Ad(sigma^-1) G`` at every
    puncture equals a prescribed value, and the pairings with the frame
    ``B(xi_beta, Ad(sigma^-1) G)`` equal prescribed values.
    """

    def __init__(self, chart, max_pole):
        curve, lie = chart.curve, chart.lie
        d = lie.d
        self.chart = chart
        self.span = OuterSpan(curve, lie, FORM, max_pole)
        self.lo = []
        keys = []
        rows = []
        full = []
        for i in range(curve.num_punctures):
            adm = chart.adinv[i]
            lo = self.span.lowest_degree(i) + min(adm)
            top = -1
            for xi in chart.xi:
                if xi[i]:
                    top = max(top, -1 - min(xi[i]))
            r = conjugated_rows(self.span, adm, i, lo, top, d, chart.space, chart.jet_order)
            full.append(r)
            self.lo.append(lo)
            for k in range(lo, 0):
                for q in range(d):
                    keys.append((i, k, q))
                    rows.append(r.get((k, q), {}))
        self.pole_rows = len(rows)
        self.keys = keys
        # frame pairings
        gram = lie.gram
        for xi in chart.xi:
            row = {}
            for i in range(curve.num_punctures):
                for e, vec in xi[i].items():
                    low = [None] * d
                    for q in range(d):
                        acc = None
                        for qq in range(d):
                            if gram[qq][q] and not vec[qq].is_zero():
                                t = vec[qq] * gram[qq][q]
                                acc = t if acc is None else acc + t
                        low[q] = acc
                    for q in range(d):
                        if low[q] is None:
                            continue
                        src = full[i].get((-1 - e, q))
                        if not src:
                            continue
                        for col, v in src.items():
                            t = low[q] * v
                            row[col] = row[col] + t if col in row else t
            rows.append(row)
        self.index = {k: n for n, k in enumerate(keys)}
        self.system = JetSystem(rows, self.span.size, chart.space, chart.jet_order)
        self.nrows = len(rows)

    def rhs_column(self, puncture, k, a):
        """Right-hand side for singular part ``I^a z^(-k-1)`` and zero frame pairings."""
        lie = self.chart.lie
        z = self.chart.zero
        rhs = [z] * self.nrows
        for q in range(lie.d):
            v = lie.gram_inv[a][q]
            if v:
                key = (puncture, -k - 1, q)
                if key not in self.index:
                    raise PoleBoundTooSmall("prescribed pole is deeper than the pole bound")
                rhs[self.index[key]] = self.chart.one * v
        return rhs

    def rhs_coframe(self, alpha):
        rhs = [self.chart.zero] * self.nrows
        rhs[self.pole_rows + alpha] = self.chart.one
        return rhs

    def solve(self, rhs_list):
        if not rhs_list:
            return []
        rhs = [[col[r] for col in rhs_list] for r in range(self.nrows)]
        sol = self.system.solve(rhs)
        return [GlobalForm(self.span, [sol[c][k] for c in range(self.span.size)])
                for k in range(len(rhs_list))]


# -- the chart ------------------------------------------------------------------

class BundleChart:
    """``sigma(u)`` together with frame, coframe and certificate."""

    def __init__(self, curve, lie, spec: ChartSpec, jet_order=2, slack=2, max_slack=16,
                 certificate=None, sigma=None):
        """With ``sigma`` given (a group element with jets of order jet_order + 1)
        the chart uses it instead of the ChartSpec family and computes the frame
        as ``sigma^-1 d sigma`` directly."""
        self.curve = curve
        self.lie = lie
        self.spec = spec
        self.m = (curve.genus - 1) * lie.d
        if len(spec.eta) != self.m:
            raise ValueError(f"need {self.m} modes, got {len(spec.eta)}")
        self.jet_order = jet_order
        self.space = JetSpace(self.m)
        self.zero = Jet.zero(self.space, jet_order)
        self.one = Jet.const(self.space, 1, jet_order)
        nump = curve.num_punctures
        if sigma is None:
            self.sigma = build_sigma(lie, curve, spec, self.space, jet_order)
            self.sigma0 = sigma0_element(lie, spec.sigma0, nump, self.space, jet_order)
            self.xi_loops = frame_loops(lie, curve, spec, self.space, jet_order)
        else:
            self.xi_loops = maurer_cartan(sigma, self.m)
            self.sigma = sigma.truncate_jets(jet_order)
            self.sigma0 = self.sigma.truncate_jets(0)
        self.pole_order = self.sigma.pole_order()
        self.xi = [loop_coords(lie, x) for x in self.xi_loops]
        self.adinv = adjoint_coords(lie, self.sigma, self.space, jet_order)
        self.ad = adjoint_coords(lie, self.sigma.inverse(), self.space, jet_order)
        if certificate is None:
            xi0 = [[{k: [x.truncate(0) for x in v] for k, v in ser.items()} for ser in xi]
                   for xi in self.xi]
            certificate = certify_sigma0(curve, lie, self.sigma0.truncate_jets(0), xi0)
        self.certificate = certificate
        if certificate.h0_nullity:
            raise NotTransversal(f"H0 deficiency {certificate.h0_nullity}")
        if not certificate.passed:
            raise NotTransversal("; ".join(certificate.notes) or "certificate failed")
        self.slack = slack
        self.max_slack = max_slack
        self.omega = self.solve_global_forms()

    def form_system(self, max_pole):
        return GlobalFormSystem(self, max_pole)

    def solve_global_forms(self):
        slack = self.slack
        while True:
            try:
                system = self.form_system(2 * self.pole_order + slack)
                forms = system.solve([system.rhs_coframe(a) for a in range(self.m)])
            except PoleBoundTooSmall:
                if slack >= self.max_slack:
                    raise
                slack *= 2
                continue
            except SingularSystem as exc:
                raise DualityFailure(str(exc)) from exc
            self.certificate.system_rank = system.span.size
            self.certificate.system_unknowns = system.span.size
            return forms

    # -- derived views ------------------------------------------------------
    @property
    def num_punctures(self):
        return self.curve.num_punctures

    def conj_coords(self, form: GlobalForm, puncture, hi):
        """Coordinates of ``Ad(sigma^-1) G`` at a puncture for degrees <= hi."""
        adm = self.adinv[puncture]
        smin = min(adm)
        g = form.coords(puncture, hi - smin)
        lo = form.lowest_degree(puncture) + smin
        return apply_matrix_series(adm, g, lo, hi, self.lie.d, self.zero)

    def omega_coords(self, alpha, puncture, hi):
        return self.conj_coords(self.omega[alpha], puncture, hi)

    def pair_series(self, a, b, puncture):
        """Residue at a puncture of ``kappa(a, b)`` for coordinate series a (loop), b (form)."""
        gram = self.lie.gram
        d = self.lie.d
        acc = self.zero
        for e, va in a.items():
            vb = b.get(-1 - e)
            if vb is None:
                continue
            for p in range(d):
                if va[p].is_zero():
                    continue
                for q in range(d):
                    if gram[p][q] and not vb[q].is_zero():
                        acc = acc + va[p] * vb[q] * gram[p][q]
        return acc

    def duality_matrix(self):
        """``B(xi_alpha, omega_beta)`` computed from expansions."""
        out = []
        for a in range(self.m):
            row = []
            for b in range(self.m):
                acc = self.zero
                for i in range(self.num_punctures):
                    xa = self.xi[a][i]
                    hi = -1 - min(xa) if xa else -1
                    acc = acc + self.pair_series(xa, self.omega_coords(b, i, hi), i)
                row.append(acc)
            out.append(row)
        return out

    def flatness_residuals(self):
        """``d_a xi_b - d_b xi_a + [xi_a, xi_b]`` for all pairs (should vanish)."""
        out = []
        for a in range(self.m):
            for b in range(a + 1, self.m):
                t = (self.xi_loops[b].jet_derive(a) - self.xi_loops[a].jet_derive(b)
                     + bracket(self.xi_loops[a], self.xi_loops[b]))
                out.append(((a, b), t))
        return out

    def fingerprint(self):
        blob = json.dumps(self.spec.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_json(self):
        return {"spec": self.spec.to_json(), "jet_order": self.jet_order, "m": self.m,
                "pole_order": self.pole_order, "certificate": self.certificate.to_json(),
                "omega": [w.to_json() for w in self.omega]}


def _mul2(a, b):
    return laurent_mul(a, b)


def build_chart(curve, lie, spec, jet_order=2, **kw):
    return BundleChart(curve, lie, spec, jet_order, **kw)


def search_chart(curve, lie, seed=0, attempts=50, jet_order=2, eta_retries=4, log=None, **kw):
    """First certificate-passing chart among seeded random candidates."""
    rng = random.Random(seed)
    nump = curve.num_punctures
    space0 = JetSpace(0)
    n = lie.n
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    for attempt in range(attempts):
        factors = []
        for _ in range(2):
            i, j = rng.choice(pairs)
            factors.append((rng.randrange(nump), i, j, mpq(rng.choice([-3, -2, -1, 1, 2, 3])),
                            rng.randint(-2, 2)))
        s0 = sigma0_element(lie, factors, nump, space0, 0)
        etas = [default_eta(lie, curve)] + [random_eta(lie, curve, rng) for _ in range(eta_retries)]
        for eta in etas:
            xi0 = [loop_coords(lie, eta_loop(lie, t, nump, space0, 0)) for t in eta]
            cert = certify_sigma0(curve, lie, s0, xi0)
            if log is not None:
                log.append({"attempt": attempt, "passed": cert.passed, "notes": cert.notes})
            if cert.h0_nullity or cert.complement_dim != (curve.genus - 1) * lie.d:
                break
            if cert.passed:
                spec = ChartSpec(factors, eta, seed)
                return BundleChart(curve, lie, spec, jet_order, certificate=cert, **kw)
    raise SearchExhausted(f"no certified chart in {attempts} attempts")

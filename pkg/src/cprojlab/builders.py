"""Constructors for the explicit local normal forms.

Two layers:

* quotient-level compatible pairs ``(h, L)`` on a real chart ``U``: block
  diagonal in separating coordinates, one block per non-constant eigenvalue.
  Real blocks carry ``eps * Delta_i dx_i^2`` with a polynomial eigenvalue
  ``rho_i(x_i)``; complex-conjugate pairs carry the holomorphic version
  ``-(1/4)(Delta_i dz_i^2 + c.c.)``; eigenvalue-coordinate blocks carry
  ``Delta_i / F_i drho_i^2`` for a profile ``F_i``; Jordan blocks of size
  2 and 3 carry the nilpotent normal forms driven by a function F(rho).

* Kahler charts on ``V x U x S`` built from a quotient pair plus flat
  constant-eigenvalue factors: the fibered metric
  ``sum H_ij theta_i theta_j + h + g_c(chi_L(A_c) . , .)`` with
  ``theta_i = dt_i + alpha_i``, and the hermitian endomorphism acting by
  ``A K_i = mu_i K_1 - K_{i+1}`` on the Killing directions.  Two
  independent construction routes are provided: the 'jacobian' route
  assembles the Killing block from the Jacobi matrix P of the symmetric
  functions mu, the 'explicit' route uses the closed component formulas
  (Gram matrix H_ij, coframe action of J).  The two must agree and the
  tests hold them to that.

Mobility-two charts additionally carry a vector field ``v`` with
``L_v A = A(Id - A)`` and ``L_v g = -gA - (sum rho_i + C) g``; its
components off the eigenvalue leaf are reconstructed by a least-squares
solve over samples and certified by the reported fit residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .jets import (
    Jet, jstack, jet_einsum, jet_inv, jet_matmul, jet_transpose, polyval,
)
from .geometry import Box, lie_endo, lie_metric

__all__ = [
    "Real1D", "Complex2D", "RealRho", "Jordan2", "Jordan3",
    "PowerProfile", "CompatiblePairSpec", "ConstantBlock",
    "BuilderError", "QuotientPair", "KahlerChart", "ChartFields",
    "QPFields", "ProjectiveMobilityChart",
    "build_quotient_pair", "lift_pair", "lift_nonconstant",
    "lift_with_constant_block", "build_main_example", "build_mobility2",
    "build_mobility2_projective", "mobility_spec", "mobility_rhs",
    "solve_jordan_odes", "JordanOdeSolution", "jordan_pair_spec",
    "esp_jets",
]

EIGEN_GAP = 1e-6  # samples with closer eigenvalues count as non-regular


class BuilderError(ValueError):
    pass


# ---------------------------------------------------------------------------
# eigenvalue profiles and block specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerProfile:
    """F(t) = a (1-t)^(-C) t^expo on (0, 1)."""

    a: float
    C: float
    expo: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.a * (1.0 - t) ** (-self.C) * t ** self.expo

    def jet(self, t: Jet) -> Jet:
        return ((1.0 - t) ** (-self.C)) * (t ** self.expo) * self.a


@dataclass(frozen=True)
class Real1D:
    """One real non-constant eigenvalue rho(x) on its own coordinate."""

    eps: int
    rho: tuple            # polynomial coefficients, lowest degree first
    window: tuple         # (lo, hi) for the coordinate

    ncoord = 1
    nroots = 1

    def rho_jet(self, x: Jet) -> Jet:
        return polyval(self.rho, x)

    def drho_jet(self, x: Jet) -> Jet:
        return polyval([k * c for k, c in enumerate(self.rho)][1:], x)


@dataclass(frozen=True)
class Complex2D:
    """A complex-conjugate eigenvalue pair rho(z), z = x + i y."""

    rho: tuple            # polynomial coefficients of z, lowest first
    window: tuple         # ((xlo, xhi), (ylo, yhi)); keep y away from 0

    ncoord = 2
    nroots = 2

    def rho_jet(self, z: Jet) -> Jet:
        return polyval(self.rho, z)

    def drho_jet(self, z: Jet) -> Jet:
        return polyval([k * c for k, c in enumerate(self.rho)][1:], z)


@dataclass(frozen=True)
class RealRho:
    """A real eigenvalue used directly as the coordinate, with profile F."""

    F: PowerProfile
    window: tuple         # (lo, hi) for rho itself

    ncoord = 1
    nroots = 1


@dataclass(frozen=True)
class Jordan2:
    """2x2 nilpotent block in coordinates (x, rho); needs F + x != 0."""

    F: "JordanOdeSolution"
    window: tuple         # ((xlo, xhi), (rlo, rhi))

    ncoord = 2
    nroots = 2


@dataclass(frozen=True)
class Jordan3:
    """3x3 nilpotent block in coordinates (x1, x2, rho); F + 2 x2 != 0."""

    F: "JordanOdeSolution"
    window: tuple

    ncoord = 3
    nroots = 3


@dataclass(frozen=True)
class CompatiblePairSpec:
    blocks: tuple
    name: str = "pair"

    def window(self) -> Box:
        lo, hi = [], []
        for b in self.blocks:
            w = b.window
            if isinstance(w[0], (tuple, list)):
                for wi in w:
                    lo.append(wi[0]); hi.append(wi[1])
            else:
                lo.append(w[0]); hi.append(w[1])
        return Box(np.array(lo), np.array(hi))


@dataclass(frozen=True)
class ConstantBlock:
    """Flat Kahler factor carrying A = c * Id."""

    c: float
    dim: int                      # real dimension, even
    signature: tuple = ()         # one sign per complex line; default +1

    def __post_init__(self):
        if self.dim % 2:
            raise BuilderError("constant block dimension must be even")
        sig = self.signature or (1,) * (self.dim // 2)
        if len(sig) != self.dim // 2:
            raise BuilderError("signature length must be dim/2")
        object.__setattr__(self, "signature", tuple(sig))

    def matrices(self):
        k = self.dim
        g = np.zeros((k, k))
        w = np.zeros((k, k))
        J = np.zeros((k, k))
        for p, s in enumerate(self.signature):
            i = 2 * p
            g[i, i] = g[i + 1, i + 1] = s
            J[i + 1, i] = 1.0
            J[i, i + 1] = -1.0
            w[i, i + 1] = s
            w[i + 1, i] = -s
        return g, w, J


def _const_matrices(cb):
    if not cb:
        z = np.zeros((0, 0))
        return z, z, z, z, np.zeros(0)
    n = sum(b.dim for b in cb)
    G = np.zeros((n, n)); W = np.zeros((n, n)); JJ = np.zeros((n, n))
    eigs = []
    i = 0
    for blk in cb:
        g, w, J = blk.matrices()
        k = blk.dim
        G[i:i + k, i:i + k] = g
        W[i:i + k, i:i + k] = w
        JJ[i:i + k, i:i + k] = J
        eigs.append(np.full(k, blk.c))
        i += k
    return G, W, JJ, np.diag(np.concatenate(eigs)), np.concatenate(eigs)


# ---------------------------------------------------------------------------
# symmetric-function helpers
# ---------------------------------------------------------------------------

def esp_jets(vals, dim, order, upto=None):
    """Elementary symmetric polynomials e_0..e_upto of a list of jets."""
    n = len(vals)
    if upto is None:
        upto = n
    shape = vals[0].c[0].shape if vals else ()
    e = [Jet.const(np.ones(shape), dim, order)]
    e += [Jet.const(np.zeros(shape), dim, order) for _ in range(upto)]
    for v in vals:
        for k in range(min(upto, n), 0, -1):
            e[k] = e[k] + v * e[k - 1]
    return e


def _zero(dim, order, shape):
    return Jet.const(np.zeros(shape), dim, order)


def _const(val, dim, order, shape):
    return Jet.const(np.full(shape, val), dim, order)


# ---------------------------------------------------------------------------
# quotient pairs
# ---------------------------------------------------------------------------

@dataclass
class QPFields:
    h: Jet
    L: Jet
    rhos: list            # one jet per distinct block root
    mults: list           # algebraic multiplicity of each entry of rhos
    mus: list             # mu_0..mu_ell jets of the full root system
    v: Jet | None = None  # projective field, where the blocks define one


class QuotientPair:
    """Compatible pair (h, L) on a product of eigenvalue blocks."""

    def __init__(self, spec: CompatiblePairSpec):
        self.spec = spec
        self.blocks = spec.blocks
        self.window = spec.window()
        self.dim = sum(b.ncoord for b in self.blocks)
        self.ell = sum(b.nroots for b in self.blocks)
        offs = np.cumsum([0] + [b.ncoord for b in self.blocks])
        self.offsets = [int(o) for o in offs[:-1]]
        self.validate()

    def root_value_sets(self, density=400):
        """Dense value set of each root over its own block window.

        The blocks separate variables, so pairwise range distances decide
        eigenvalue separation on the whole window exactly (up to sampling
        resolution of the smooth 1-d / 2-d value maps)."""
        sets = []
        for b in self.blocks:
            if isinstance(b, Real1D):
                x = np.linspace(*b.window, density)
                sets.append([np.polynomial.polynomial.polyval(x, b.rho)])
            elif isinstance(b, RealRho):
                sets.append([np.linspace(*b.window, density)])
            elif isinstance(b, Complex2D):
                (xl, xh), (yl, yh) = b.window
                k = int(np.sqrt(density)) + 1
                X, Y = np.meshgrid(np.linspace(xl, xh, k),
                                   np.linspace(yl, yh, k))
                z = (X + 1j * Y).ravel()
                vals = np.polynomial.polynomial.polyval(z, b.rho)
                sets.append([vals, np.conj(vals)])
            elif isinstance(b, Jordan2):
                sets.append([np.linspace(*b.window[1], density)])
            elif isinstance(b, Jordan3):
                sets.append([np.linspace(*b.window[2], density)])
        out = []
        for s in sets:
            out.extend(s)
        return out

    def validate(self, margin: float = 0.01):
        sets = self.root_value_sets()
        for i in range(len(sets)):
            for j in range(i + 1, len(sets)):
                dist = np.min(np.abs(sets[i][:, None] - sets[j][None, :]))
                if dist < margin:
                    raise BuilderError(
                        f"eigenvalue collision (range distance {dist:.2e} "
                        f"< {margin:g}) between roots {i} and {j} of spec "
                        f"'{self.spec.name}'")
        for b, off in zip(self.blocks, self.offsets):
            if isinstance(b, Jordan2):
                x = np.linspace(*b.window[0], 64)
                r = np.linspace(*b.window[1], 64)
                fx = b.F(r)[None, :] + x[:, None]
                if fx.min() <= margin and fx.max() >= -margin:
                    raise BuilderError("F + x vanishes inside the window")
            if isinstance(b, Jordan3):
                x2 = np.linspace(*b.window[1], 64)
                r = np.linspace(*b.window[2], 64)
                fx = b.F(r)[None, :] + 2 * x2[:, None]
                if fx.min() <= margin and fx.max() >= -margin:
                    raise BuilderError(
                        "F + 2 x2 vanishes inside the window")

    def block_data(self, pts, order, dim=None, offset=0):
        """Seed every block and return (kind, rho, extra, block, off) rows."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        dim = dim if dim is not None else self.dim
        seed = lambda i: Jet.seed(offset + i, pts[:, i], dim, order)
        rows = []
        for b, off in zip(self.blocks, self.offsets):
            if isinstance(b, Real1D):
                x = seed(off)
                rows.append(("real", b.rho_jet(x), b.drho_jet(x), b, off))
            elif isinstance(b, RealRho):
                rows.append(("rho", seed(off), None, b, off))
            elif isinstance(b, Complex2D):
                z = seed(off) + 1j * seed(off + 1)
                rows.append(("complex", b.rho_jet(z), b.drho_jet(z), b, off))
            elif isinstance(b, Jordan2):
                rows.append(("jordan2", seed(off + 1), seed(off), b, off))
            elif isinstance(b, Jordan3):
                rows.append(("jordan3", seed(off + 2),
                             (seed(off), seed(off + 1)), b, off))
            else:
                raise BuilderError(f"unknown block {b!r}")
        return rows

    def eval(self, pts, order=2, ambient_dim=None, offset=0) -> QPFields:
        """Jet-valued (h, L) at sample points.

        ``ambient_dim``/``offset`` embed the quotient coordinates into a
        larger chart (the Kahler lifts put the Killing coordinates first).
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = pts.shape[0]
        dim = ambient_dim if ambient_dim is not None else self.dim
        rows = self.block_data(pts, order, dim=dim, offset=offset)

        rhos, mults = [], []
        for kind, r, *_ in rows:
            if kind == "complex":
                rhos.extend([r, r.conj()]); mults.extend([1, 1])
            elif kind == "jordan2":
                rhos.append(r); mults.append(2)
            elif kind == "jordan3":
                rhos.append(r); mults.append(3)
            else:
                rhos.append(r); mults.append(1)

        all_roots = []
        for r, m in zip(rhos, mults):
            all_roots.extend([r] * m)
        mus = esp_jets(all_roots, dim, order)
        mus = [m.real for m in mus]

        def delta(r):
            acc = _const(1.0 + 0.0j, dim, order, (n,))
            for rr in all_roots:
                if rr is not r:
                    acc = acc * (r - rr)
            return acc

        hc = [[_zero(dim, order, (n,)) for _ in range(self.dim)]
              for _ in range(self.dim)]
        Lc = [[_zero(dim, order, (n,)) for _ in range(self.dim)]
              for _ in range(self.dim)]

        for kind, r, extra, b, off in rows:
            if kind == "real":
                hc[off][off] = b.eps * delta(r).real
                Lc[off][off] = r
            elif kind == "rho":
                hc[off][off] = delta(r).real / b.F.jet(r)
                Lc[off][off] = r
            elif kind == "complex":
                dt = delta(r)
                hc[off][off] = (-0.5) * dt.real
                hc[off + 1][off + 1] = 0.5 * dt.real
                hc[off][off + 1] = hc[off + 1][off] = 0.5 * dt.imag
                a, bb = r.real, r.imag
                Lc[off][off] = a
                Lc[off][off + 1] = -bb
                Lc[off + 1][off] = bb
                Lc[off + 1][off + 1] = a
            elif kind == "jordan2":
                x = extra
                fpx = b.F.f_jet(r) + x
                d0 = delta(r).real
                d1 = _prod_deriv(r, all_roots, 1, dim, order, (n,))
                # h = h1(Delta_1(L_1) . , .) in coordinates (x, rho)
                hc[off][off + 1] = hc[off + 1][off] = fpx * d0
                hc[off + 1][off + 1] = d1 * fpx * fpx
                Lc[off][off] = r
                Lc[off][off + 1] = fpx
                Lc[off + 1][off + 1] = r
            elif kind == "jordan3":
                x1, x2 = extra
                f2x = b.F.f_jet(r) + 2.0 * x2
                d0 = delta(r).real
                d1 = _prod_deriv(r, all_roots, 1, dim, order, (n,))
                d2 = _prod_deriv(r, all_roots, 2, dim, order, (n,))
                one = _const(1.0, dim, order, (n,))
                h1 = [[_zero(dim, order, (n,)) for _ in range(3)]
                      for _ in range(3)]
                h1[0][2] = h1[2][0] = f2x
                h1[1][1] = one
                h1[1][2] = h1[2][1] = x1
                h1[2][2] = x1 * x1
                # Delta_1(L_1) = d0 + d1 N + (d2/2) N^2 with N nilpotent
                D = [[_zero(dim, order, (n,)) for _ in range(3)]
                     for _ in range(3)]
                for i in range(3):
                    D[i][i] = d0
                D[0][1] = d1 * one
                D[0][2] = d1 * x1 + 0.5 * d2 * f2x
                D[1][2] = d1 * f2x
                for i in range(3):
                    for j in range(3):
                        acc = _zero(dim, order, (n,))
                        for k in range(3):
                            acc = acc + h1[k][j] * D[k][i]
                        hc[off + i][off + j] = acc
                for i in range(3):
                    Lc[off + i][off + i] = r
                Lc[off][off + 1] = one
                Lc[off][off + 2] = x1
                Lc[off + 1][off + 2] = f2x

        v = self._block_v(rows, dim, order, n) \
            if any(isinstance(b, (Jordan2, Jordan3)) for b in self.blocks) \
            else None
        return QPFields(h=jstack(hc), L=jstack(Lc), rhos=rhos, mults=mults,
                        mus=mus, v=v)

    def _block_v(self, rows, dim, order, n):
        """The projective field of the split equations on Jordan specs."""
        comps = [_zero(dim, order, (n,)) for _ in range(self.dim)]
        for kind, r, extra, b, off in rows:
            if kind == "jordan2":
                sol = b.F
                G1 = sol.g1_jet(r)
                G = (0.5 * ((sol.n2 - 1.0) * r - 1.0 - sol.C - sol.n2)
                     * extra + G1)
                comps[off] = G
                comps[off + 1] = r * (1.0 - r)
            elif kind == "jordan3":
                x1, x2 = extra
                sol = b.F
                G = (-0.5 * (sol.C + sol.n2 + 2.0 - sol.n2 * r) * x1
                     + 0.5 * sol.n2 * x2 + sol.g1_jet(r))
                H = (-0.5 * (sol.C + sol.n2 + (4.0 - sol.n2) * r) * x2
                     + sol.h1_jet(r))
                comps[off] = G
                comps[off + 1] = H
                comps[off + 2] = r * (1.0 - r)
            elif kind == "rho":
                comps[off] = r * (1.0 - r)
        return jstack(comps)

    def regular_mask(self, pts, gap: float = EIGEN_GAP):
        f = self.eval(pts, order=0)
        return _gap_mask([r.c[0] for r in f.rhos], [], gap)


def _prod_deriv(r, all_roots, k, dim, order, shape):
    """k-th derivative at t = rho of prod over the other roots (t - rho_j)."""
    others = [rr for rr in all_roots if rr is not r]
    total = _zero(dim, order, shape)
    if k == 1:
        for skip in range(len(others)):
            acc = _const(1.0 + 0.0j, dim, order, shape)
            for j, rr in enumerate(others):
                if j != skip:
                    acc = acc * (r - rr)
            total = total + acc.real
    elif k == 2:
        for s1 in range(len(others)):
            for s2 in range(len(others)):
                if s1 == s2:
                    continue
                acc = _const(1.0 + 0.0j, dim, order, shape)
                for j, rr in enumerate(others):
                    if j not in (s1, s2):
                        acc = acc * (r - rr)
                total = total + acc.real
    else:
        raise BuilderError("only first and second product derivatives")
    return total


def _gap_mask(roots, consts, gap, n=None):
    if not roots:
        return np.ones(0 if n is None else n, dtype=bool)
    vals = [np.asarray(r) for r in roots] + \
           [np.full_like(np.asarray(np.real(roots[0])), c) for c in consts]
    ok = np.ones(np.asarray(np.real(vals[0])).shape, dtype=bool)
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            ok &= np.abs(vals[i] - vals[j]) >= gap
    return ok


def build_quotient_pair(spec: CompatiblePairSpec) -> QuotientPair:
    return QuotientPair(spec)


# ---------------------------------------------------------------------------
# Kahler charts
# ---------------------------------------------------------------------------

@dataclass
class ChartFields:
    g: Jet
    omega: Jet | None
    J: Jet | None
    A: Jet
    rhos: list
    mus: list
    v: Jet | None = None
    qp: QPFields | None = None


class KahlerChart:
    """Kahler structure on coordinates (t_1..t_ell, U, y)."""

    def __init__(self, qp: QuotientPair, cb=(), route="explicit",
                 t_window=(-1.0, 1.0), y_window=(-0.8, 0.8), name=""):
        for b in qp.blocks:
            if isinstance(b, (Jordan2, Jordan3)):
                raise BuilderError(
                    "Jordan blocks do not lift to a Kahler chart")
        self.qp = qp
        self.cb = tuple(cb)
        self.route = route
        self.name = name or f"{qp.spec.name}-lift"
        self.ell = qp.ell
        self.udim = qp.dim
        self.ydim = sum(b.dim for b in self.cb)
        self.dim = self.ell + self.udim + self.ydim
        self.t_sl = slice(0, self.ell)
        self.u_sl = slice(self.ell, self.ell + self.udim)
        self.y_sl = slice(self.ell + self.udim, self.dim)
        (self._gc, self._wc, self._Jc, self._Ac,
         self._ceigs) = _const_matrices(self.cb)
        self.const_eigs = [(b.c, b.dim // 2) for b in self.cb]
        lo = np.concatenate([np.full(self.ell, t_window[0]), qp.window.lo,
                             np.full(self.ydim, y_window[0])])
        hi = np.concatenate([np.full(self.ell, t_window[1]), qp.window.hi,
                             np.full(self.ydim, y_window[1])])
        self.window = Box(lo, hi)
        self._check_const_separation()
        self.v_coeffs = None
        self.meta = {}

    def _check_const_separation(self, margin=0.01):
        if not self.cb:
            return
        for vals in self.qp.root_value_sets():
            for c, _ in self.const_eigs:
                dist = float(np.min(np.abs(vals - c)))
                if dist < margin:
                    raise BuilderError(
                        f"constant eigenvalue {c} meets a non-constant "
                        f"eigenvalue range (distance {dist:.2e}) inside "
                        f"the window")

    # -- shared assembly pieces ----------------------------------------

    def _alpha(self, pts, order):
        """Primitive 1-forms of the constant-factor curvature forms.

        alpha_i = (1/2)(-1)^i ((A_c^(ell-i))^T w_c)_pq y^p dy^q, returned
        as the (ell, ydim) matrix jet alpha[i, q]; linear in y, so exact.
        """
        if self.ydim == 0:
            return None
        n = pts.shape[0]
        y = [Jet.seed(self.y_sl.start + q, pts[:, self.y_sl.start + q],
                      self.dim, order) for q in range(self.ydim)]
        rows = []
        for i in range(1, self.ell + 1):
            B = 0.5 * (-1.0) ** i * (
                np.linalg.matrix_power(self._Ac, self.ell - i).T @ self._wc)
            row = []
            for q in range(self.ydim):
                acc = _zero(self.dim, order, (n,))
                for p in range(self.ydim):
                    if B[p, q] != 0.0:
                        acc = acc + B[p, q] * y[p]
                row.append(acc)
            rows.append(row)
        return jstack(rows)

    def _chi_weights(self, rhos, mults, order):
        """chi_L(c_gamma) per constant factor, as real jets."""
        out = []
        for c, _m in self.const_eigs:
            acc = None
            for r, m in zip(rhos, mults):
                f = (c - r) ** m
                acc = f if acc is None else acc * f
            out.append(acc.real)
        return out

    def _tblock(self, mus, n, order):
        """A on the Killing directions: A K_i = mu_i K_1 - K_{i+1}."""
        rows = []
        for j in range(self.ell):
            row = []
            for a in range(self.ell):
                if j == 0:
                    row.append(mus[a + 1])
                elif j == a + 1:
                    row.append(_const(-1.0, self.dim, order, (n,)))
                else:
                    row.append(_zero(self.dim, order, (n,)))
            rows.append(row)
        return jstack(rows)

    # -- evaluation ------------------------------------------------------

    def eval(self, pts, order=2) -> ChartFields:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.route == "jacobian":
            return self._eval_jacobian(pts, order)
        return self._eval_explicit(pts, order)

    def _eval_jacobian(self, pts, order):
        if order > 2:
            raise BuilderError("the Jacobian route supports order <= 2 "
                               "(one order is spent on P)")
        n = pts.shape[0]
        d, ell = self.dim, self.ell
        qpf = self.qp.eval(pts[:, self.u_sl], order=order + 1,
                           ambient_dim=d, offset=ell)
        h = qpf.h.truncate(order)
        L = qpf.L.truncate(order)
        P = jstack([[qpf.mus[a + 1].partial(ell + i) for i in range(ell)]
                    for a in range(ell)])
        Pinv = jet_inv(P)
        hinv = jet_inv(h)
        H = jet_matmul(P, jet_matmul(hinv, jet_transpose(P)))
        T = jet_transpose(jet_matmul(P, jet_matmul(L, Pinv)))
        mus = [m.truncate(order) for m in qpf.mus]
        # omega(x_u, t_i) = d_u mu_i, exact at this order from the higher mu
        dmu_u = [[qpf.mus[i + 1].partial(ell + u) for u in range(self.udim)]
                 for i in range(ell)]
        rhos = [Jet(d, order, r.c[:order + 1]) for r in qpf.rhos]
        return self._assemble(pts, n, order, h, L, rhos, qpf.mults,
                              mus, H, T, dmu_u, qpf=qpf, jexplicit=None)

    def _eval_explicit(self, pts, order):
        n = pts.shape[0]
        d, ell = self.dim, self.ell
        qpf = self.qp.eval(pts[:, self.u_sl], order=order,
                           ambient_dim=d, offset=ell)
        rhos, mults, mus = qpf.rhos, qpf.mults, qpf.mus
        rows = self.qp.block_data(pts[:, self.u_sl], order, dim=d,
                                  offset=ell)

        all_roots = []
        for r, m in zip(rhos, mults):
            all_roots.extend([r] * m)

        # contributions per root: kind, rho jet, weight jet, offset, extras
        contrib = []
        for (kind, r0, extra, b, off), r in zip(rows, rhos):
            muh = _esp_excluding(r, all_roots, d, order, ell)
            dt = _delta(r, all_roots, d, order, (n,))
            if kind == "real":
                contrib.append(("real", r, extra, off, b.eps, dt.real, muh))
            elif kind == "rho":
                contrib.append(("rho", r, b.F.jet(r), off, None, dt.real,
                                muh))
            elif kind == "complex":
                contrib.append(("complex", r, extra, off, None, dt, muh))
            else:
                raise BuilderError("unsupported block for a Kahler chart")

        # Gram matrix H_ij of the Killing fields
        Hc = [[_zero(d, order, (n,)) for _ in range(ell)]
              for _ in range(ell)]
        for kind, r, dr, off, eps, Del, muh in contrib:
            if kind == "real":
                q = eps * dr * dr / Del
            elif kind == "rho":
                q = dr / Del              # dr slot carries F(rho)
            else:
                q = dr * dr / Del
            for i in range(ell):
                for j in range(i, ell):
                    t = muh[i] * muh[j] * q
                    if kind == "complex":
                        t = ((-4.0) * (t + t.conj())).real
                    add = t
                    Hc[i][j] = Hc[i][j] + add
                    if i != j:
                        Hc[j][i] = Hc[j][i] + add
        H = jstack(Hc)
        T = self._tblock(mus, n, order)

        # d_u mu_i without losing jet order
        dmu_u = [[_zero(d, order, (n,)) for _ in range(self.udim)]
                 for _ in range(ell)]
        for kind, r, dr, off, eps, Del, muh in contrib:
            for i in range(ell):
                if kind == "real":
                    dmu_u[i][off] = dmu_u[i][off] + muh[i] * dr
                elif kind == "rho":
                    dmu_u[i][off] = dmu_u[i][off] + muh[i]
                else:
                    c = muh[i] * dr
                    dmu_u[i][off] = dmu_u[i][off] + (c + c.conj()).real
                    ic = 1j * c
                    dmu_u[i][off + 1] = dmu_u[i][off + 1] + \
                        (ic + ic.conj()).real
        return self._assemble(pts, n, order, qpf.h, qpf.L, rhos, mults,
                              mus, H, T, dmu_u, qpf=qpf,
                              jexplicit=contrib)

    def _assemble(self, pts, n, order, h, L, rhos, mults, mus, H, T, dmu_u,
                  qpf=None, jexplicit=None):
        d, ell, udim, ydim = self.dim, self.ell, self.udim, self.ydim
        alpha = self._alpha(pts, order)
        chiw = self._chi_weights(rhos, mults, order) if ydim else []
        ci = _const_coord_index(self.cb)

        gcells = [[_zero(d, order, (n,)) for _ in range(d)]
                  for _ in range(d)]
        wcells = [[_zero(d, order, (n,)) for _ in range(d)]
                  for _ in range(d)]
        acells = [[_zero(d, order, (n,)) for _ in range(d)]
                  for _ in range(d)]

        def gx(jet, i, j):
            return Jet(d, order, [c[:, i, j] for c in jet.c])

        yoff = ell + udim
        for i in range(ell):
            for j in range(ell):
                gcells[i][j] = gx(H, i, j)
        for i in range(udim):
            for j in range(udim):
                gcells[ell + i][ell + j] = gx(h, i, j)
        if ydim:
            Halpha = jet_einsum("nij,njq->niq", H, alpha)
            for i in range(ell):
                for q in range(ydim):
                    gcells[i][yoff + q] = gx(Halpha, i, q)
                    gcells[yoff + q][i] = gx(Halpha, i, q)
            aHa = jet_einsum("niq,nip->nqp", Halpha, alpha)
            for p in range(ydim):
                for q in range(ydim):
                    cell = gx(aHa, p, q)
                    if self._gc[p, q] != 0.0:
                        cell = cell + chiw[ci[p]] * self._gc[p, q]
                    gcells[yoff + p][yoff + q] = cell

        for i in range(ell):
            for u in range(udim):
                wcells[ell + u][i] = dmu_u[i][u]
                wcells[i][ell + u] = -dmu_u[i][u]
        if ydim:
            for u in range(udim):
                for q in range(ydim):
                    acc = _zero(d, order, (n,))
                    for i in range(ell):
                        acc = acc + dmu_u[i][u] * gx(alpha, i, q)
                    wcells[ell + u][yoff + q] = acc
                    wcells[yoff + q][ell + u] = -acc
            for p in range(ydim):
                for q in range(ydim):
                    if self._wc[p, q] != 0.0:
                        wcells[yoff + p][yoff + q] = \
                            chiw[ci[p]] * self._wc[p, q]

        for i in range(ell):
            for j in range(ell):
                acells[i][j] = gx(T, i, j)
        for i in range(udim):
            for j in range(udim):
                acells[ell + i][ell + j] = gx(L, i, j)
        if ydim:
            for p in range(ydim):
                for q in range(ydim):
                    if self._Ac[p, q] != 0.0:
                        acells[yoff + p][yoff + q] = _const(
                            self._Ac[p, q], d, order, (n,))
            Talpha = jet_einsum("nib,nbq->niq", T, alpha)
            for i in range(ell):
                for q in range(ydim):
                    acells[i][yoff + q] = (gx(Talpha, i, q)
                                           - gx(alpha, i, q)
                                           * self._ceigs[q])

        g = jstack(gcells)
        w = jstack(wcells)
        A = jstack(acells)

        if jexplicit is not None:
            J = self._assemble_J(n, order, jexplicit, alpha)
        else:
            ginv = jet_inv(g)
            J = jet_einsum("nac,nbc->nab", ginv, w)

        v = self._eval_v(pts, order) if self.v_coeffs is not None else None
        return ChartFields(g=g, omega=w, J=J, A=A, rhos=rhos, mus=mus,
                           v=v, qp=qpf)

    def _assemble_J(self, n, order, contrib, alpha):
        """J from the coframe action: rows over the dual frame
        {d/dt_i, d/du, d/dy_q - sum alpha_iq d/dt_i}."""
        d, ell, udim, ydim = self.dim, self.ell, self.udim, self.ydim
        yoff = ell + udim

        def ax(i, q):
            return Jet(d, order, [c[:, i, q] for c in alpha.c])

        theta_J = [[_zero(d, order, (n,)) for _ in range(d)]
                   for _ in range(ell)]
        du_J = [[_zero(d, order, (n,)) for _ in range(d)]
                for _ in range(udim)]

        for kind, r, dr, off, eps, Del, muh in contrib:
            if kind == "complex":
                base = 4.0 * dr / Del
                for j in range(ell):
                    coef = base * muh[j]
                    du_J[off][j] = du_J[off][j] + coef.real
                    du_J[off + 1][j] = du_J[off + 1][j] + coef.imag
                    for q in range(ydim):
                        t = coef * ax(j, q)
                        du_J[off][yoff + q] = du_J[off][yoff + q] + t.real
                        du_J[off + 1][yoff + q] = \
                            du_J[off + 1][yoff + q] + t.imag
            else:
                if kind == "real":
                    base = -(eps * dr) / Del
                else:                      # rho coordinate; dr carries F
                    base = -(dr / Del)
                for j in range(ell):
                    coef = base * muh[j]
                    du_J[off][j] = du_J[off][j] + coef
                    for q in range(ydim):
                        du_J[off][yoff + q] = (du_J[off][yoff + q]
                                               + coef * ax(j, q))

        for i in range(1, ell + 1):
            sgn = (-1.0) ** i
            for kind, r, dr, off, eps, Del, muh in contrib:
                if kind == "complex":
                    c = (sgn / 4.0) * (r ** (ell - i)) / dr
                    theta_J[i - 1][ell + off] = \
                        theta_J[i - 1][ell + off] + 2.0 * c.real
                    theta_J[i - 1][ell + off + 1] = \
                        theta_J[i - 1][ell + off + 1] - 2.0 * c.imag
                elif kind == "real":
                    theta_J[i - 1][ell + off] = (theta_J[i - 1][ell + off]
                                                 - sgn * eps
                                                 * (r ** (ell - i)) / dr)
                else:
                    theta_J[i - 1][ell + off] = (theta_J[i - 1][ell + off]
                                                 - sgn * (r ** (ell - i))
                                                 / dr)

        Jc = [[_zero(d, order, (n,)) for _ in range(d)] for _ in range(d)]
        for i in range(ell):
            for b in range(d):
                Jc[i][b] = theta_J[i][b]
        for u in range(udim):
            for b in range(d):
                Jc[ell + u][b] = du_J[u][b]
        if ydim:
            for q in range(ydim):
                for p in range(ydim):
                    if self._Jc[q, p] != 0.0:
                        Jc[yoff + q][yoff + p] = _const(
                            self._Jc[q, p], d, order, (n,))
            for i in range(ell):
                for p in range(ydim):
                    acc = Jc[i][yoff + p]
                    for q in range(ydim):
                        if self._Jc[q, p] != 0.0:
                            acc = acc - ax(i, q) * self._Jc[q, p]
                    Jc[i][yoff + p] = acc
        return jstack(Jc)

    # -- mobility vector field -------------------------------------------

    def v_basis(self, pts, order):
        """Polynomial candidates for the off-leaf part of v."""
        n = pts.shape[0]
        d, ell, ydim = self.dim, self.ell, self.ydim
        names, fields = [], []
        t = [Jet.seed(i, pts[:, i], d, order) for i in range(ell)]
        y = [Jet.seed(self.y_sl.start + q, pts[:, self.y_sl.start + q],
                      d, order) for q in range(ydim)]

        def unit(i, comp):
            cells = [_zero(d, order, (n,)) for _ in range(d)]
            cells[i] = comp
            return jstack(cells)

        one = _const(1.0, d, order, (n,))
        for j in range(ell):
            names.append(f"1->t{j}")
            fields.append(unit(j, one))
            for k in range(ell):
                names.append(f"t{k}->t{j}")
                fields.append(unit(j, t[k]))
            for q in range(ydim):
                names.append(f"y{q}->t{j}")
                fields.append(unit(j, y[q]))
        for p in range(ydim):
            qi = self.y_sl.start + p
            names.append(f"1->y{p}")
            fields.append(unit(qi, one))
            for q in range(ydim):
                names.append(f"y{q}->y{p}")
                fields.append(unit(qi, y[q]))
        return names, fields

    def leaf_v(self, pts, order):
        """sum_i rho_i (1 - rho_i) d/drho_i on eigenvalue coordinates."""
        n = pts.shape[0]
        d = self.dim
        comps = [_zero(d, order, (n,)) for _ in range(d)]
        for b, off in zip(self.qp.blocks, self.qp.offsets):
            if not isinstance(b, RealRho):
                raise BuilderError(
                    "mobility charts use eigenvalue coordinates")
            r = Jet.seed(self.ell + off, pts[:, self.ell + off], d, order)
            comps[self.ell + off] = r * (1.0 - r)
        return jstack(comps)

    def _eval_v(self, pts, order):
        names, fields = self.v_basis(pts, order)
        v = self.leaf_v(pts, order)
        for c, f in zip(self.v_coeffs, fields):
            if c != 0.0:
                v = v + c * f
        return v

    def v_field(self, pts, order=1) -> Jet:
        """The vector field alone (no tensor assembly)."""
        if self.v_coeffs is None:
            raise BuilderError("chart carries no fitted vector field")
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self._eval_v(pts, order)


def _delta(r, all_roots, dim, order, shape):
    acc = _const(1.0 + 0.0j, dim, order, shape)
    for rr in all_roots:
        if rr is not r:
            acc = acc * (r - rr)
    return acc


def _esp_excluding(r, all_roots, dim, order, upto):
    others = [rr for rr in all_roots if rr is not r]
    return esp_jets(others, dim, order, upto=max(upto - 1, 0))


def _const_coord_index(cb):
    out = []
    for k, b in enumerate(cb):
        out.extend([k] * b.dim)
    return out


# ---------------------------------------------------------------------------
# public builder entry points
# ---------------------------------------------------------------------------

def lift_pair(qp: QuotientPair, cb=(), route="jacobian", **kw) -> KahlerChart:
    return KahlerChart(qp, cb=cb, route=route, **kw)


def lift_nonconstant(qp: QuotientPair, **kw) -> KahlerChart:
    return lift_pair(qp, cb=(), **kw)


def lift_with_constant_block(qp: QuotientPair, cb, **kw) -> KahlerChart:
    return lift_pair(qp, cb=cb, **kw)


def build_main_example(spec: CompatiblePairSpec, cb=(), **kw) -> KahlerChart:
    qp = build_quotient_pair(spec)
    return KahlerChart(qp, cb=cb, route="explicit", **kw)


def mobility_spec(ell, a, C, windows=None, name="mobility2"):
    if np.isscalar(a):
        a = [a] * ell
    if windows is None:
        if ell == 1:
            windows = [(0.2, 0.8)]
        elif ell == 2:
            windows = [(0.15, 0.4), (0.55, 0.9)]
        else:
            windows = [(0.08 + 0.84 * k / ell + 0.02,
                        0.08 + 0.84 * (k + 1) / ell - 0.02)
                       for k in range(ell)]
    blocks = tuple(RealRho(PowerProfile(a[k], C, 1.0 + ell + C), windows[k])
                   for k in range(ell))
    return CompatiblePairSpec(blocks=blocks, name=name)


def build_mobility2(ell, a, C, cb=(), fit_v=True, windows=None,
                    fit_samples=200, fit_seed=7, fit_tol=1e-7,
                    **kw) -> KahlerChart:
    """Mobility-two Kahler chart with its canonical vector field.

    Profiles are F_i(t) = a_i (1-t)^(-C) t^(1+ell+C); v restricts to
    sum rho_i (1-rho_i) d/drho_i on the leaf and the remaining components
    are reconstructed by least squares, residual-certified.
    """
    spec = mobility_spec(ell, a, C, windows)
    qp = build_quotient_pair(spec)
    chart = KahlerChart(qp, cb=cb, route="explicit", **kw)
    chart.meta.update({
        "C": C, "ell": ell,
        "m0": sum(b.dim // 2 for b in cb if b.c == 0.0),
        "m1": sum(b.dim // 2 for b in cb if b.c == 1.0)})
    if fit_v:
        resid = fit_mobility_field(chart, n_samples=fit_samples,
                                   seed=fit_seed)
        chart.meta["v_fit_residual"] = resid
        if resid > fit_tol:
            raise BuilderError(
                f"mobility field reconstruction failed: residual "
                f"{resid:.3e} > {fit_tol:.1e}")
    return chart


def mobility_rhs(flds: ChartFields, C):
    """Values of the right-hand sides of the canonical Lie equations."""
    g, A = flds.g, flds.A
    sum_rho = None
    for r in flds.rhos:
        rr = r.real
        sum_rho = rr if sum_rho is None else sum_rho + rr
    gA = np.einsum("nac,ncb->nab", g.c[0], A.c[0])
    rhs_g = -gA - (sum_rho.c[0] + C)[:, None, None] * g.c[0]
    rhs_A = A.c[0] - np.einsum("nac,ncb->nab", A.c[0], A.c[0])
    return rhs_g, rhs_A


def _fit_field(chart, C, n_samples, seed):
    rng = np.random.default_rng(seed)
    pts = chart.window.random(n_samples, rng)
    flds = chart.eval(pts, order=1)
    rhs_g, rhs_A = mobility_rhs(flds, C)
    v0 = chart.leaf_v(pts, 1)
    tg = rhs_g - lie_metric(flds.g, v0)
    tA = rhs_A - lie_endo(flds.A, v0)
    target = np.concatenate([tg.reshape(len(pts), -1),
                             tA.reshape(len(pts), -1)], axis=1).ravel()
    names, fields = chart.v_basis(pts, 1)
    cols = [np.concatenate(
        [lie_metric(flds.g, f).reshape(len(pts), -1),
         lie_endo(flds.A, f).reshape(len(pts), -1)], axis=1).ravel()
        for f in fields]
    M = np.stack(cols, axis=1)
    coeffs, *_ = np.linalg.lstsq(M, target, rcond=None)
    resid = (np.max(np.abs(M @ coeffs - target))
             / (1.0 + np.max(np.abs(target))))
    chart.v_coeffs = coeffs
    chart.meta["v_basis_names"] = names
    return float(resid)


def fit_mobility_field(chart: KahlerChart, n_samples=200, seed=7):
    return _fit_field(chart, chart.meta["C"], n_samples, seed)


# ---------------------------------------------------------------------------
# projective mobility chart (rho, y): no Killing directions
# ---------------------------------------------------------------------------

class ProjectiveMobilityChart:
    """(rho, y) chart with g = F^{-1} drho^2 + g_c((A_c - rho) . , .).

    The constant factor is a plain pseudo-Euclidean metric with one real
    dimension per constant eigenvalue, as in the projective variant of
    the volume statement.
    """

    def __init__(self, C, B=None, a=None, m0=1, m1=1, signature=None,
                 rho_window=(0.2, 0.8), y_window=(-0.8, 0.8)):
        self.C = C
        self.m0, self.m1 = m0, m1
        self.ydim = m0 + m1
        self.dim = 1 + self.ydim
        if a is None:
            a = -4.0 * (B if B is not None else 1.0)
        self.B = -a / 4.0
        # the full-chart profile for one non-constant eigenvalue; at C = -1
        # this is the a (1-rho) rho of the final normal form
        self.F = PowerProfile(a, C, 2.0 + C)
        self.ceigs = np.concatenate([np.zeros(m0), np.ones(m1)])
        self.gc = np.diag(signature if signature is not None
                          else np.ones(self.ydim))
        lo = np.concatenate([[rho_window[0]],
                             np.full(self.ydim, y_window[0])])
        hi = np.concatenate([[rho_window[1]],
                             np.full(self.ydim, y_window[1])])
        self.window = Box(lo, hi)
        self.v_coeffs = None
        self.meta = {"C": C, "m0": m0, "m1": m1}
        self.ell = 1

    def eval(self, pts, order=2) -> ChartFields:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = pts.shape[0]
        d = self.dim
        r = Jet.seed(0, pts[:, 0], d, order)
        gcells = [[_zero(d, order, (n,)) for _ in range(d)]
                  for _ in range(d)]
        acells = [[_zero(d, order, (n,)) for _ in range(d)]
                  for _ in range(d)]
        gcells[0][0] = 1.0 / self.F.jet(r)
        acells[0][0] = r
        for p in range(self.ydim):
            for q in range(self.ydim):
                if self.gc[p, q] != 0.0:
                    gcells[1 + p][1 + q] = (self.ceigs[p] - r) \
                        * self.gc[p, q]
            acells[1 + p][1 + p] = _const(self.ceigs[p], d, order, (n,))
        g = jstack(gcells)
        A = jstack(acells)
        v = self._v(pts, order) if self.v_coeffs is not None else None
        return ChartFields(g=g, omega=None, J=None, A=A,
                           rhos=[r], mus=esp_jets([r], d, order), v=v)

    def v_basis(self, pts, order):
        n = pts.shape[0]
        d = self.dim
        y = [Jet.seed(1 + q, pts[:, 1 + q], d, order)
             for q in range(self.ydim)]
        names, fields = [], []

        def unit(i, comp):
            cells = [_zero(d, order, (n,)) for _ in range(d)]
            cells[i] = comp
            return jstack(cells)

        one = _const(1.0, d, order, (n,))
        for p in range(self.ydim):
            names.append(f"1->y{p}")
            fields.append(unit(1 + p, one))
            for q in range(self.ydim):
                names.append(f"y{q}->y{p}")
                fields.append(unit(1 + p, y[q]))
        return names, fields

    def leaf_v(self, pts, order):
        n = pts.shape[0]
        d = self.dim
        r = Jet.seed(0, pts[:, 0], d, order)
        comps = [_zero(d, order, (n,)) for _ in range(d)]
        comps[0] = r * (1.0 - r)
        return jstack(comps)

    def _v(self, pts, order):
        names, fields = self.v_basis(pts, order)
        v = self.leaf_v(pts, order)
        for c, f in zip(self.v_coeffs, fields):
            if c != 0.0:
                v = v + c * f
        return v

    def v_field(self, pts, order=1) -> Jet:
        if self.v_coeffs is None:
            raise BuilderError("chart carries no fitted vector field")
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self._v(pts, order)


def build_mobility2_projective(C, m0=1, m1=1, B=1.0, signature=None,
                               fit_samples=200, fit_seed=3, fit_tol=1e-7,
                               **kw) -> ProjectiveMobilityChart:
    chart = ProjectiveMobilityChart(C, B=B, m0=m0, m1=m1,
                                    signature=signature, **kw)
    resid = _fit_field(chart, C, fit_samples, fit_seed)
    if resid > fit_tol:
        raise BuilderError(
            f"projective mobility field fit failed: {resid:.2e}")
    chart.meta["v_fit_residual"] = resid
    return chart


# ---------------------------------------------------------------------------
# Jordan-block ODE systems
# ---------------------------------------------------------------------------

class JordanOdeSolution:
    """Dense solution of the nilpotent-block ODE systems.

    kind '1x1':  F' = F ((n2 + C + 2) - (n2 + 2) rho) / (rho (1 - rho))
    kind '2x2':  F' = ((1/2)((n2-1) rho - 1 - C - n2) F - G1) / (rho(1-rho))
                 G1' = (1/2)(n2 - 1) F
    kind '3x3':  F' = -((1/2)(C + n2 + (4 - n2) rho) F + 2 H1) / (rho(1-rho))
                 H1' = (1/2)(n2 - 2) F - G1,   G1' = 0

    The systems are linear with coefficients singular at 0 and 1, so the
    interval must stay strictly inside (0, 1).
    """

    NSTATE = {"1x1": 1, "2x2": 2, "3x3": 3}

    def __init__(self, kind, n2, C, init, interval, rtol=1e-12, atol=1e-14):
        if kind not in self.NSTATE:
            raise BuilderError(f"unknown Jordan ODE kind {kind!r}")
        lo, hi = interval
        if not (0.0 < lo < hi < 1.0):
            raise BuilderError("the eigenvalue interval must stay strictly "
                               "inside (0, 1)")
        self.kind, self.n2, self.C = kind, float(n2), float(C)
        self.interval = (float(lo), float(hi))
        y0 = np.atleast_1d(np.asarray(init, dtype=float))
        if y0.size != self.NSTATE[kind]:
            raise BuilderError("initial state size does not match the kind")
        mid = 0.5 * (lo + hi)
        sols = []
        for b in (lo, hi):
            s = solve_ivp(self._rhs, (mid, b), y0, method="DOP853",
                          rtol=rtol, atol=atol, dense_output=True)
            if not s.success:
                raise BuilderError(f"ODE solve failed: {s.message}")
            sols.append(s.sol)
        self._left, self._right = sols
        self._mid = mid

    def _matrix_values(self, t):
        w = t * (1.0 - t)
        n2, C = self.n2, self.C
        if self.kind == "1x1":
            return np.array([[((n2 + C + 2.0) - (n2 + 2.0) * t) / w]])
        if self.kind == "2x2":
            return np.array([
                [0.5 * ((n2 - 1.0) * t - 1.0 - C - n2) / w, -1.0 / w],
                [0.5 * (n2 - 1.0), 0.0]])
        return np.array([
            [-0.5 * (C + n2 + (4.0 - n2) * t) / w, -2.0 / w, 0.0],
            [0.5 * (n2 - 2.0), 0.0, -1.0],
            [0.0, 0.0, 0.0]])

    def _matrix_jets(self, rho: Jet):
        w = rho * (1.0 - rho)
        n2, C = self.n2, self.C
        zero = Jet.const(np.zeros_like(rho.c[0]), rho.dim, rho.order)
        cj = lambda v: Jet.const(np.full_like(rho.c[0], v), rho.dim,
                                 rho.order)
        if self.kind == "1x1":
            return [[((n2 + C + 2.0) - (n2 + 2.0) * rho) / w]]
        if self.kind == "2x2":
            return [[(0.5 * ((n2 - 1.0) * rho - 1.0 - C - n2)) / w,
                     -1.0 / w],
                    [cj(0.5 * (n2 - 1.0)), zero]]
        return [[(-0.5 * (C + n2 + (4.0 - n2) * rho)) / w, -2.0 / w, zero],
                [cj(0.5 * (n2 - 2.0)), zero, cj(-1.0)],
                [zero, zero, zero]]

    def _rhs(self, t, y):
        return self._matrix_values(t) @ y

    def values(self, rho):
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        out = np.empty((self.NSTATE[self.kind], rho.size))
        left = rho <= self._mid
        if left.any():
            out[:, left] = self._left(rho[left])
        if (~left).any():
            out[:, ~left] = self._right(rho[~left])
        return out

    def __call__(self, rho):
        return self.values(rho)[0].reshape(np.shape(rho))

    def taylor(self, rho0, order=3):
        """Derivative tables [u, u', ..., u^(order)] of the state."""
        rho0 = np.atleast_1d(np.asarray(rho0, dtype=float)).ravel()
        u = self.values(rho0)
        rj = Jet.seed(0, rho0, 1, max(order - 1, 0))
        M = self._matrix_jets(rj)
        Mk = [np.array([[np.asarray(c.c[k]).reshape(rho0.size)
                         for c in row] for row in M])
              for k in range(order)]
        ders = [u]
        for k in range(1, order + 1):
            acc = np.zeros_like(u)
            for j in range(k):
                acc += (math.comb(k - 1, j)
                        * np.einsum("abn,bn->an", Mk[j], ders[k - 1 - j]))
            ders.append(acc)
        return ders

    def _state_jet(self, rho: Jet, row: int) -> Jet:
        ders = self.taylor(rho.c[0].ravel(), order=rho.order)
        table = [d[row].reshape(rho.c[0].shape) for d in ders]
        return rho.compose1(table)

    def f_jet(self, rho: Jet) -> Jet:
        return self._state_jet(rho, 0)

    def g1_jet(self, rho: Jet) -> Jet:
        if self.kind == "1x1":
            raise BuilderError("no G1 component in the 1x1 system")
        return self._state_jet(rho, 1 if self.kind == "2x2" else 2)

    def h1_jet(self, rho: Jet) -> Jet:
        if self.kind != "3x3":
            raise BuilderError("H1 exists only in the 3x3 system")
        return self._state_jet(rho, 1)

    def fprime(self, rho):
        shape = np.shape(rho)
        t = self.taylor(np.ravel(np.asarray(rho, dtype=float)), order=1)
        return t[1][0].reshape(shape)

    def defect(self, n_intervals=240, n_gauss=12) -> float:
        """Integral-form residual per unit length on the dense output."""
        lo, hi = self.interval
        edges = np.linspace(lo, hi, n_intervals + 1)
        x, wq = np.polynomial.legendre.leggauss(n_gauss)
        scale = 1.0 + float(np.max(np.abs(self.values(
            np.linspace(lo, hi, 64)))))
        worst = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            nodes = mid + half * x
            vals = self.values(nodes)
            rhs = np.stack([self._rhs(t, vals[:, i])
                            for i, t in enumerate(nodes)], axis=1)
            integral = half * (rhs * wq).sum(axis=1)
            jump = (self.values(np.array([b]))[:, 0]
                    - self.values(np.array([a]))[:, 0])
            worst = max(worst,
                        float(np.max(np.abs(jump - integral))) / (b - a)
                        / scale)
        return worst

    def g1_constancy(self, n_check=400) -> float:
        if self.kind != "3x3":
            return 0.0
        g1 = self.values(np.linspace(*self.interval, n_check))[2]
        return float(np.max(np.abs(g1 - g1[0])))


def solve_jordan_odes(kind, n2, C, init, interval, **kw) -> JordanOdeSolution:
    return JordanOdeSolution(kind, n2, C, init, interval, **kw)


def jordan_pair_spec(kind, sol, extra_windows=(), extra_a=(),
                     x_window=(-0.4, 0.4), rho1_window=None, name="jordan"):
    """Quotient spec with a leading Jordan block glued to eigenvalue
    coordinates; the separation factors (rho_i - rho_1)^2 resp. ^3 come
    out of the multiplicity bookkeeping.  ``rho1_window`` restricts the
    block eigenvalue inside the solved interval so it stays disjoint
    from the extra eigenvalue windows."""
    rw = rho1_window if rho1_window is not None else sol.interval
    if not (sol.interval[0] <= rw[0] < rw[1] <= sol.interval[1]):
        raise BuilderError("rho1 window must sit inside the solved "
                           "interval")
    if kind == "2x2":
        blocks = [Jordan2(sol, (x_window, rw))]
        size = 2
    elif kind == "3x3":
        blocks = [Jordan3(sol, (x_window, x_window, rw))]
        size = 3
    else:
        raise BuilderError("kind must be '2x2' or '3x3'")
    nd = 1 + len(extra_windows)       # number of distinct eigenvalues
    for w, a in zip(extra_windows, extra_a):
        blocks.append(RealRho(PowerProfile(a, sol.C, nd + size + sol.C), w))
    return CompatiblePairSpec(blocks=tuple(blocks), name=name)

"""Curvature operator on skew-hermitian endomorphisms and its spectrum.

The wedge ``u ^_J v = u^b (x) v - v^b (x) u + (Ju)^b (x) Jv - (Jv)^b (x) Ju``
spans the space u(g, J) of skew-hermitian endomorphisms; the curvature
operator acts on it through R(u, v) = (1/4) R(u ^_J v).  For a compatible
endomorphism A the operator satisfies the commutator identity
``[R(X), A] = 4 [X, nabla La]``, nabla La is a polynomial p(A), and the
spectrum of R contains ``(p(l_i) - p(l_j)) / (l_i - l_j)`` for distinct
eigenvalues and ``p'(l_i)`` at Jordan blocks.  This module assembles the
operator numerically, fits p, and compares predicted against numeric
spectra; it also carries the two-eigenvalue curvature scalar

    lambda = ((r1 - r2)(F'(r1) + F'(r2)) + 2(F(r2) - F(r1))) / (4 (r1-r2)^3)

with its collision limit F'''(x) / 24, and the third-order equation
``nabla^3 alpha = B (2 (dalpha (x) g)(X,Y,Z) + sym)`` for alpha = tr L.
"""

from __future__ import annotations

import numpy as np

from .jets import Jet, jet_trace
from .geometry import (
    christoffel, cov_deriv_vector, gradient, max_abs, metric_inverse,
    riemann, third_cov_scalar,
)
from .report import CheckEntry, ResidualReport

__all__ = [
    "wedge_J", "skew_hermitian_residuals", "unitary_basis",
    "curvature_operator_matrix", "nabla_lambda_endo",
    "ricci_identity_check", "fit_nabla_lambda_poly", "r0_operator",
    "predicted_eigenvalues", "compare_with_numeric", "lambda_two_eigen",
    "fppp_limit_check", "third_order_residual", "jordan_alpha_invariant",
    "real_wedge", "real_nabla_lambda_endo", "real_ricci_identity_check",
    "real_curvature_operator_matrix", "fit_real_poly",
]


# ---------------------------------------------------------------------------
# wedges and the unitary algebra
# ---------------------------------------------------------------------------

def wedge_J(u, v, gv, Jv):
    """u ^_J v at samples; u, v: (n, d), gv: (n, d, d), Jv: (n, d, d)."""
    ub = np.einsum("nab,na->nb", gv, u)
    vb = np.einsum("nab,na->nb", gv, v)
    Ju = np.einsum("nab,nb->na", Jv, u)
    Jv_ = np.einsum("nab,nb->na", Jv, v)
    Jub = np.einsum("nab,na->nb", gv, Ju)
    Jvb = np.einsum("nab,na->nb", gv, Jv_)
    # matrix M^a_b of u^b (x) v - v^b (x) u + (Ju)^b (x) Jv - (Jv)^b (x) Ju
    return (np.einsum("na,nb->nab", v, ub) - np.einsum("na,nb->nab", u, vb)
            + np.einsum("na,nb->nab", Jv_, Jub)
            - np.einsum("na,nb->nab", Ju, Jvb))


def skew_hermitian_residuals(X, gv, Jv):
    """Membership defects of X in u(g, J): [X, J] and g-antisymmetry."""
    comm = np.einsum("nab,nbc->nac", X, Jv) - np.einsum(
        "nab,nbc->nac", Jv, X)
    gX = np.einsum("nca,ncb->nab", gv, X)
    skew = gX + np.swapaxes(gX, -1, -2)
    s = 1.0 + max_abs(X)
    return max_abs(comm) / s, max_abs(skew) / s


def unitary_basis(gv, Jv, tol=1e-8):
    """An orthonormalized basis of u(g, J) from coordinate wedges.

    Works at a single sample: gv, Jv are (d, d).  Returns (k, d, d) basis
    matrices and the wedge list used.
    """
    d = gv.shape[-1]
    g1, J1 = gv[None], Jv[None]
    wedges = []
    for a in range(d):
        for b in range(a + 1, d):
            u = np.zeros((1, d)); u[0, a] = 1.0
            v = np.zeros((1, d)); v[0, b] = 1.0
            wedges.append(((a, b), wedge_J(u, v, g1, J1)[0]))
    mats = np.stack([w for _, w in wedges])
    flat = mats.reshape(len(wedges), -1)
    q, r = np.linalg.qr(flat.T)
    keep = np.abs(np.diag(r)) > tol * max(1.0, np.abs(r).max())
    basis = q.T[keep].reshape(-1, d, d)
    return basis, wedges


def curvature_operator_matrix(flds, sample=0):
    """Matrix of the curvature operator on u(g, J) at one sample.

    Normalized so that the wedge u ^_J v maps to the plain curvature
    endomorphism R(u, v); equivalently, the returned operator R satisfies
    [R(X), A] = [X, nabla La], which is the normalization the closed-form
    eigenvalue predictions refer to.  Arbitrary X are expanded over the
    coordinate-wedge span by least squares (exact on u(g, J)).
    """
    g, J = flds.g, flds.J
    gv = g.c[0][sample]
    Jv = J.c[0][sample]
    gam = christoffel(g)
    Rc = riemann(gam)[sample]            # R^d_cab
    basis, wedges = unitary_basis(gv, Jv)
    k = basis.shape[0]
    wmats = np.stack([w for _, w in wedges])
    wflat = wmats.reshape(len(wedges), -1).T           # (d^2, nw)
    rw = np.stack([Rc[:, :, a, b] for (a, b), _ in wedges])
    Rmat = np.zeros((k, k))
    for j in range(k):
        coef, *_ = np.linalg.lstsq(wflat, basis[j].ravel(), rcond=None)
        RX = np.einsum("w,wab->ab", coef, rw)
        # expand R(X) over the basis (orthonormal rows in the flat metric)
        Rmat[:, j] = basis.reshape(k, -1) @ RX.ravel()
    return Rmat, basis


def apply_curvature(flds, X, sample=0):
    """R(X) for a skew-hermitian X at one sample, same normalization as
    curvature_operator_matrix."""
    g, J = flds.g, flds.J
    gv = g.c[0][sample]
    Jv = J.c[0][sample]
    gam = christoffel(g)
    Rc = riemann(gam)[sample]
    _, wedges = unitary_basis(gv, Jv)
    wmats = np.stack([w for _, w in wedges])
    wflat = wmats.reshape(len(wedges), -1).T
    rw = np.stack([Rc[:, :, a, b] for (a, b), _ in wedges])
    coef, *_ = np.linalg.lstsq(wflat, X.ravel(), rcond=None)
    return np.einsum("w,wab->ab", coef, rw)


# ---------------------------------------------------------------------------
# nabla Lambda and the commutator identity
# ---------------------------------------------------------------------------

def nabla_lambda_endo(flds):
    """(nabla La)^b_a values, La = (1/4) grad tr A; shape (n, b, a)."""
    g = flds.g
    ginv = metric_inverse(g)
    lam = gradient(jet_trace(flds.A), ginv) * 0.25
    gam = christoffel(g)
    nl = cov_deriv_vector(lam, gam.truncate(lam.order))  # (n, a, b)
    return np.swapaxes(nl, -1, -2)


def ricci_identity_check(flds, tol=1e-6, samples=None) -> ResidualReport:
    """[R(X), A] = 4 [X, nabla La] over the spanning wedge set."""
    g, J, A = flds.g, flds.J, flds.A
    n = g.c[0].shape[0]
    gam = christoffel(g)
    Rc = riemann(gam)
    NL = nabla_lambda_endo(flds)
    Av = A.c[0]
    gv, Jv = g.c[0], J.c[0]
    d = gv.shape[-1]
    idx = range(n) if samples is None else samples
    worst = 0.0
    for a in range(d):
        for b in range(a + 1, d):
            u = np.zeros((n, d)); u[:, a] = 1.0
            v = np.zeros((n, d)); v[:, b] = 1.0
            X = wedge_J(u, v, gv, Jv)
            RX = 4.0 * Rc[:, :, :, a, b]
            lhs = np.einsum("nab,nbc->nac", RX, Av) \
                - np.einsum("nab,nbc->nac", Av, RX)
            rhs = 4.0 * (np.einsum("nab,nbc->nac", X, NL)
                         - np.einsum("nab,nbc->nac", NL, X))
            worst = max(worst, max_abs(lhs - rhs)
                        / (1.0 + max_abs(RX, Av, NL, X)))
    rep = ResidualReport(title="ricci-identity")
    rep.add(CheckEntry("ricci_identity", "[R(X),A]=4[X,nablaLambda]",
                       worst, tol, samples=n))
    return rep


def fit_nabla_lambda_poly(flds, sample=0, tol=1e-8, comm_tol=1e-8,
                          max_degree=None):
    """Minimal-degree real polynomial with nabla La = p(A) at one sample.

    Raises when the two endomorphisms fail to commute; flags an
    ill-conditioned fit through the returned residual.
    """
    Av = flds.A.c[0][sample]
    NL = nabla_lambda_endo(flds)[sample]
    comm = Av @ NL - NL @ Av
    if max_abs(comm) / (1.0 + max_abs(Av, NL)) > comm_tol:
        raise ValueError("nabla Lambda does not commute with A at the "
                         "sample; no polynomial expression exists")
    d = Av.shape[-1]
    eigs = np.linalg.eigvals(Av)
    distinct = _cluster(eigs)
    cap = max_degree if max_degree is not None else \
        len(distinct) + (d - len(set(np.round(eigs, 8)))) // 1
    cap = min(max(cap, 1), d)
    powers = [np.eye(d)]
    for _ in range(cap):
        powers.append(powers[-1] @ Av)
    target = NL.ravel()
    for deg in range(cap + 1):
        M = np.stack([p.ravel() for p in powers[: deg + 1]], axis=1)
        coef, *_ = np.linalg.lstsq(M, target, rcond=None)
        resid = max_abs(M @ coef - target) / (1.0 + max_abs(NL))
        if resid <= tol:
            return np.asarray(coef), resid
    return np.asarray(coef), resid


def _cluster(vals, gap=1e-6):
    out = []
    for v in np.atleast_1d(vals):
        if not any(abs(v - w) < gap for w in out):
            out.append(v)
    return out


def r0_operator(coeffs, A):
    """The special solution R0(X) = sum_k a_k sum_{p+q=k-1} A^p X A^q."""
    d = A.shape[-1]
    powers = [np.eye(d)]
    for _ in range(len(coeffs)):
        powers.append(powers[-1] @ A)

    def op(X):
        out = np.zeros_like(X)
        for k, a in enumerate(coeffs):
            if k == 0:
                continue
            for p in range(k):
                out = out + a * powers[p] @ X @ powers[k - 1 - p]
        return out

    return op


def predicted_eigenvalues(coeffs, eig_pairs=(), jordan_eigs=()):
    """Spectral predictions from the polynomial p.

    ``eig_pairs``: (l_i, l_j) distinct pairs -> (p(l_i)-p(l_j))/(l_i-l_j);
    ``jordan_eigs``: eigenvalues with a nontrivial block -> p'(l).
    """
    p = np.polynomial.Polynomial(coeffs)
    dp = p.deriv()
    out = [("pair", li, lj, (p(li) - p(lj)) / (li - lj))
           for li, lj in eig_pairs]
    out += [("jordan", l, None, dp(l)) for l in jordan_eigs]
    return out


def compare_with_numeric(flds, sample=0, tol=1e-5, eig_pairs=None,
                         jordan_eigs=()) -> ResidualReport:
    """Predicted curvature-operator eigenvalues against the assembled
    spectrum at one sample."""
    coeffs, fit_res = fit_nabla_lambda_poly(flds, sample)
    Av = flds.A.c[0][sample]
    if eig_pairs is None:
        eigs = _cluster(np.linalg.eigvals(Av))
        eigs = sorted([e.real for e in eigs if abs(e.imag) < 1e-9])
        eig_pairs = [(a, b) for i, a in enumerate(eigs)
                     for b in eigs[i + 1:]]
    preds = predicted_eigenvalues(coeffs, eig_pairs, jordan_eigs)
    Rmat, _ = curvature_operator_matrix(flds, sample)
    spec = np.linalg.eigvals(Rmat)
    rep = ResidualReport(title="curvature-spectrum")
    for kind, li, lj, val in preds:
        dist = float(np.min(np.abs(spec - val)))
        label = f"{kind}({li:.4g},{lj:.4g})" if lj is not None \
            else f"{kind}({li:.4g})"
        rep.add(CheckEntry(f"spectrum_{label}",
                           "predicted eig in spec(R)",
                           dist / (1.0 + abs(val)), tol, samples=1,
                           note=f"fit_residual={fit_res:.2e}"))
    return rep


# ---------------------------------------------------------------------------
# real (projective) counterparts: wedges without J
# ---------------------------------------------------------------------------

def real_wedge(u, v, hv):
    """u ^ v = u^b (x) v - v^b (x) u at samples, matrices M^a_b."""
    ub = np.einsum("nab,na->nb", hv, u)
    vb = np.einsum("nab,na->nb", hv, v)
    return np.einsum("na,nb->nab", v, ub) - np.einsum("na,nb->nab", u, vb)


def real_nabla_lambda_endo(h, L):
    """(nabla La)^b_a for the projective pair, La = (1/2) grad tr L."""
    ginv = metric_inverse(h.truncate(max(h.order - 1, 0)))
    lam = gradient(jet_trace(L), ginv) * 0.5
    gam = christoffel(h)
    return np.swapaxes(cov_deriv_vector(lam, gam.truncate(lam.order)),
                       -1, -2)


def real_ricci_identity_check(h, L, tol=1e-6) -> ResidualReport:
    """[R(u, v), L] = [u ^ v, nabla La] over coordinate pairs."""
    n, d = h.c[0].shape[0], h.c[0].shape[-1]
    gam = christoffel(h)
    Rc = riemann(gam)
    NL = real_nabla_lambda_endo(h, L)
    hv, Lv = h.c[0], L.c[0]
    worst = 0.0
    for a in range(d):
        for b in range(a + 1, d):
            u = np.zeros((n, d)); u[:, a] = 1.0
            v = np.zeros((n, d)); v[:, b] = 1.0
            X = real_wedge(u, v, hv)
            RX = Rc[:, :, :, a, b]
            lhs = np.einsum("nab,nbc->nac", RX, Lv) \
                - np.einsum("nab,nbc->nac", Lv, RX)
            rhs = np.einsum("nab,nbc->nac", X, NL) \
                - np.einsum("nab,nbc->nac", NL, X)
            worst = max(worst, max_abs(lhs - rhs)
                        / (1.0 + max_abs(RX, Lv, NL, X)))
    rep = ResidualReport(title="real-ricci-identity")
    rep.add(CheckEntry("real_ricci_identity",
                       "[R(u,v),L]=[u^v,nablaLambda]", worst, tol,
                       samples=n))
    return rep


def real_curvature_operator_matrix(h, sample=0):
    """Matrix of the curvature operator on the real wedge span at one
    sample, normalized by [R(X), L] = [X, nabla La]."""
    hv = h.c[0][sample]
    d = hv.shape[-1]
    gam = christoffel(h)
    Rc = riemann(gam)[sample]
    wedges, rws = [], []
    for a in range(d):
        for b in range(a + 1, d):
            u = np.zeros((1, d)); u[0, a] = 1.0
            v = np.zeros((1, d)); v[0, b] = 1.0
            wedges.append(real_wedge(u, v, hv[None])[0])
            rws.append(Rc[:, :, a, b])
    W = np.stack([w.ravel() for w in wedges], axis=1)
    rws = np.stack(rws)
    k = len(wedges)
    Rmat = np.zeros((k, k))
    for j in range(k):
        RX = rws[j]
        coef, *_ = np.linalg.lstsq(W, RX.ravel(), rcond=None)
        Rmat[:, j] = coef
    return Rmat


def fit_real_poly(h, L, sample=0, tol=1e-8, max_degree=None):
    """Minimal-degree polynomial with nabla La = p(L) at one sample."""
    Lv = L.c[0][sample]
    NL = real_nabla_lambda_endo(h, L)[sample]
    d = Lv.shape[-1]
    cap = min(max_degree if max_degree is not None else d, d)
    powers = [np.eye(d)]
    for _ in range(cap):
        powers.append(powers[-1] @ Lv)
    target = NL.ravel()
    for deg in range(cap + 1):
        M = np.stack([p.ravel() for p in powers[: deg + 1]], axis=1)
        coef, *_ = np.linalg.lstsq(M, target, rcond=None)
        resid = max_abs(M @ coef - target) / (1.0 + max_abs(NL))
        if resid <= tol:
            return np.asarray(coef), resid
    return np.asarray(coef), resid


# ---------------------------------------------------------------------------
# the two-eigenvalue curvature scalar and its collision limit
# ---------------------------------------------------------------------------

def lambda_two_eigen(profile, r1, r2):
    """lambda(r1, r2) from the profile F (needs F and F')."""
    shape = np.broadcast(np.asarray(r1), np.asarray(r2)).shape
    r1 = np.atleast_1d(np.asarray(r1, dtype=float))
    r2 = np.atleast_1d(np.asarray(r2, dtype=float))
    F1, dF1 = _f_and_fp(profile, r1)
    F2, dF2 = _f_and_fp(profile, r2)
    out = ((r1 - r2) * (dF1 + dF2) + 2.0 * (F2 - F1)) \
        / (4.0 * (r1 - r2) ** 3)
    return out.reshape(shape) if shape else float(out[0])


def _f_and_fp(profile, t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if hasattr(profile, "jet"):
        j = profile.jet(Jet.seed(0, t, 1, 1))
        return j.c[0], j.c[1][..., 0]
    if hasattr(profile, "f_jet"):
        j = profile.f_jet(Jet.seed(0, t, 1, 1))
        return j.c[0], j.c[1][..., 0]
    raise TypeError("profile must expose jet() or f_jet()")


def fppp_limit_check(profile, x, delta=1e-2, tol=1e-3) -> ResidualReport:
    """Richardson-extrapolated collision limit of lambda against
    F'''(x)/24 computed by jets."""
    lam = lambda dd: float(lambda_two_eigen(profile, x + dd, x - dd))
    l1, l2 = lam(delta), lam(delta / 2.0)
    richardson = (4.0 * l2 - l1) / 3.0
    if hasattr(profile, "jet"):
        j = profile.jet(Jet.seed(0, np.array([x]), 1, 3))
    else:
        j = profile.f_jet(Jet.seed(0, np.array([x]), 1, 3))
    target = float(j.c[3][0, 0, 0, 0]) / 24.0
    rep = ResidualReport(title="collision-limit")
    rep.add(CheckEntry("fppp_limit", "lim lambda = F'''/24",
                       abs(richardson - target) / (1.0 + abs(target)),
                       tol, samples=2,
                       note=f"target={target:.6g}"))
    return rep


# ---------------------------------------------------------------------------
# third-order equation for alpha = tr L
# ---------------------------------------------------------------------------

def third_order_residual(h: Jet, L: Jet, B, tol=1e-5) -> ResidualReport:
    """nabla^3 alpha(X,Y,Z) = B (2 dalpha(X) g(Y,Z) + dalpha(Y) g(X,Z)
    + dalpha(Z) g(X,Y)), alpha = tr L; needs order-3 jets of h and L."""
    n = h.c[0].shape[0]
    alpha = jet_trace(L)
    gam = christoffel(h)
    n3 = third_cov_scalar(alpha, gam)          # (n, x, a, b)
    da = alpha.c[1]
    gv = h.c[0]
    rhs = B * (2.0 * np.einsum("nx,nab->nxab", da, gv)
               + np.einsum("na,nxb->nxab", da, gv)
               + np.einsum("nb,nxa->nxab", da, gv))
    worst = max_abs(n3 - rhs) / (1.0 + max_abs(n3, rhs))
    rep = ResidualReport(title="third-order")
    rep.add(CheckEntry("third_order", "nabla^3(tr L) = B * sym(dalpha x g)",
                       worst, tol, samples=n))
    return rep


# ---------------------------------------------------------------------------
# Jordan-block invariant
# ---------------------------------------------------------------------------

def jordan_alpha_invariant(hv, Lv, rho):
    """The off-diagonal invariant of a nilpotent block.

    size 2: vol_h(e2, (L - rho) e2); size 3: the cube root of
    vol_h(e3, (L - rho) e3, (L - rho)^2 e3).  ``hv, Lv`` are single-sample
    matrices in a canonical basis (e_k = coordinate frame).
    """
    d = hv.shape[-1]
    N = Lv - rho * np.eye(d)
    dens = np.sqrt(abs(np.linalg.det(hv)))
    if d == 2:
        e2 = np.array([0.0, 1.0])
        cols = np.stack([e2, N @ e2], axis=1)
        return dens * np.linalg.det(cols)
    if d == 3:
        e3 = np.array([0.0, 0.0, 1.0])
        cols = np.stack([e3, N @ e3, N @ N @ e3], axis=1)
        val = dens * np.linalg.det(cols)
        return np.sign(val) * abs(val) ** (1.0 / 3.0)
    raise ValueError("block size must be 2 or 3")

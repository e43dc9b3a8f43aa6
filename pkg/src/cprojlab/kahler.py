"""Kahler certification and the two compatibility residuals.

``check_kahler`` certifies a candidate structure (J^2 = -Id, hermitian
metric, omega = g(J.,.), closed omega, parallel J).  ``cproj_residual``
measures the defining linear equation of a c-compatible endomorphism,

    nabla_X A = X^b (x) La + La^b (x) X + (JX)^b (x) J La + (J La)^b (x) JX,
    La = (1/4) grad tr A,

and ``proj_residual`` its projective counterpart with two terms and
La = (1/2) grad tr L.  Partner metrics, the hamiltonian Killing check on
the complex determinant, and the connection-difference identity between a
metric and its partner complete the module.

All checks sample a grid, normalize max-abs residuals by the input scale,
and report per-check entries; eigenvalue-based checks exclude samples
whose spectral gaps fall under the regularity threshold.
"""

from __future__ import annotations

import numpy as np

from .jets import Jet, jet_det, jet_einsum, jet_inv, jet_matmul, \
    jet_trace, tensor_partial
from .geometry import (
    christoffel, cov_deriv_endo, ext_deriv_two_form,
    gradient, hessian_cov, lie_metric, max_abs, metric_inverse,
)
from .report import CheckEntry, ResidualReport
from .builders import EIGEN_GAP, _gap_mask

__all__ = [
    "KahlerError", "check_kahler", "cproj_residual", "proj_residual",
    "partner_metric", "recover_endo", "hamiltonian_killing_check",
    "connection_difference_check", "complex_char_poly", "complex_det",
    "nonconstant_factor", "lambda_field",
]


class KahlerError(ValueError):
    pass


# ---------------------------------------------------------------------------
# structure checks
# ---------------------------------------------------------------------------

def check_kahler(flds, tol=1e-6, anchor_prefix="") -> ResidualReport:
    """Residuals of the Kahler axioms for jet fields (g order>=1, J, w)."""
    g, J, w = flds.g, flds.J, flds.omega
    n = g.c[0].shape[0]
    rep = ResidualReport(title="kahler")
    scale = 1.0 + max_abs(g.c[0], J.c[0], w.c[0])

    J2 = np.einsum("nab,nbc->nac", J.c[0], J.c[0])
    eye = np.eye(J.c[0].shape[-1])[None]
    rep.add(CheckEntry("J_squared", "J^2+Id", max_abs(J2 + eye) / scale,
                       tol, samples=n))

    gJJ = np.einsum("ncd,nca,ndb->nab", g.c[0], J.c[0], J.c[0])
    rep.add(CheckEntry("hermitian_metric", "g(J.,J.)-g",
                       max_abs(gJJ - g.c[0]) / scale, tol, samples=n))

    omJ = np.einsum("ncb,nca->nab", g.c[0], J.c[0])
    rep.add(CheckEntry("omega_def", "omega-g(J.,.)",
                       max_abs(w.c[0] - omJ) / scale, tol, samples=n))

    rep.add(CheckEntry("domega", "d(omega)",
                       max_abs(ext_deriv_two_form(w)) / scale, tol,
                       samples=n))

    gam = christoffel(g)
    rep.add(CheckEntry("parallel_J", "nabla(J)",
                       max_abs(cov_deriv_endo(J, gam)) / scale, tol,
                       samples=n))
    return rep


def _lambda_vec(flds, weight):
    """La = weight * grad tr(endo) as a vector jet (order reduced)."""
    trA = jet_trace(flds.A if hasattr(flds, "A") else flds)
    ginv = metric_inverse(flds.g.truncate(max(flds.g.order - 1, 0)))
    return gradient(trA.truncate(ginv.order + 1), ginv)  * weight


def cproj_residual(flds, tol=1e-6) -> ResidualReport:
    """Defect of the c-compatibility equation over all basis directions."""
    g, J, A = flds.g, flds.J, flds.A
    n, d = g.c[0].shape[0], g.c[0].shape[-1]
    gam = christoffel(g)
    nA = cov_deriv_endo(A, gam)            # (n, a, b, c)
    lam = _lambda_vec(flds, 0.25)
    lv = lam.c[0]
    gv, Jv, Av = g.c[0], J.c[0], A.c[0]
    lflat = np.einsum("ncb,nb->nc", gv, lv)
    Jlam = np.einsum("nab,nb->na", Jv, lv)
    Jlflat = np.einsum("ncb,nb->nc", gv, Jlam)
    eye = np.eye(d)[None]
    rhs = (np.einsum("nac,nb->nabc", gv, lv)
           + np.einsum("nc,ab->nabc", lflat, np.eye(d))
           + np.einsum("ndc,nda,nb->nabc", gv, Jv, Jlam)
           + np.einsum("nc,nba->nabc", Jlflat, Jv))
    resid = nA - rhs
    scale = 1.0 + max_abs(Av, gv, lv)
    rep = ResidualReport(title="cproj")
    rep.add(CheckEntry("cproj_compat", "nabla_A=4-term(Lambda)",
                       max_abs(resid) / scale, tol, samples=n))
    return rep


def proj_residual(h: Jet, L: Jet, tol=1e-6, selfadj_tol=1e-8
                  ) -> ResidualReport:
    """Defect of the projective compatibility equation for (h, L)."""
    n, d = h.c[0].shape[0], h.c[0].shape[-1]
    hL = np.einsum("nac,ncb->nab", h.c[0], L.c[0])
    sa = max_abs(hL - np.swapaxes(hL, -1, -2)) / (1.0 + max_abs(hL))
    if sa > selfadj_tol:
        worst = int(np.argmax(np.max(
            np.abs(hL - np.swapaxes(hL, -1, -2)), axis=(-1, -2))))
        raise KahlerError(
            f"L is not h-selfadjoint: residual {sa:.3e} worst at sample "
            f"{worst}")
    gam = christoffel(h)
    nL = cov_deriv_endo(L, gam)
    trL = jet_trace(L)
    lam = gradient(trL, metric_inverse(h)) * 0.5
    lv = lam.c[0]
    lflat = np.einsum("ncb,nb->nc", h.c[0], lv)
    rhs = (np.einsum("nac,nb->nabc", h.c[0], lv)
           + np.einsum("nc,ab->nabc", lflat, np.eye(d)))
    scale = 1.0 + max_abs(L.c[0], h.c[0], lv)
    rep = ResidualReport(title="proj")
    rep.add(CheckEntry("proj_compat", "nabla_L=2-term(Lambda)",
                       max_abs(nL - rhs) / scale, tol, samples=n))
    return rep


# ---------------------------------------------------------------------------
# partner metrics
# ---------------------------------------------------------------------------

def shift_endo(A: Jet, c0: float) -> Jet:
    """A + c0 * Id, which solves the same compatibility equation."""
    if c0 == 0.0:
        return A
    coeffs = [c.copy() for c in A.c]
    d = A.c[0].shape[-1]
    coeffs[0] = coeffs[0] + c0 * np.eye(d)[None]
    return Jet(A.dim, A.order, coeffs)


def spectrum_safe_shift(flds, margin=0.05) -> float:
    """A shift c0 with the spectrum of A + c0 Id away from zero."""
    vals = [np.abs(r.c[0]) for r in flds.rhos]
    eigs = np.linalg.eigvals(flds.A.c[0])
    low = float(np.min(np.abs(eigs)))
    if low > margin:
        return 0.0
    return 1.0 + float(np.max(np.abs(eigs)))


def partner_metric(g: Jet, A: Jet) -> Jet:
    """ghat = (det A)^(-1/2) g(A^{-1} . , .)."""
    detA = jet_det(A)
    if np.any(detA.c[0] <= 0.0):
        bad = np.nonzero(detA.c[0] <= 0.0)[0][:4]
        raise KahlerError(f"det A not positive at samples {bad.tolist()}")
    Ainv = jet_inv(A)
    gAinv = jet_einsum("ncb,nca->nab", g, Ainv)
    return jet_einsum("nab,n->nab", gAinv, detA ** (-0.5))


def recover_endo(g: Jet, ghat: Jet) -> Jet:
    """A = (det ghat / det g)^(1/(2(n+1))) ghat^{-1} g, n = complex dim."""
    d = g.c[0].shape[-1]
    ncx = d // 2
    ratio = jet_det(ghat) / jet_det(g)
    if np.any(ratio.c[0] <= 0.0):
        raise KahlerError("determinant ratio not positive")
    factor = ratio ** (1.0 / (2.0 * (ncx + 1)))
    Ainv_g = jet_einsum("nab,nbc->nac", jet_inv(ghat), g)
    return jet_einsum("nac,n->nac", Ainv_g, factor)


# ---------------------------------------------------------------------------
# complex determinant and characteristic polynomial via Newton sums
# ---------------------------------------------------------------------------

def complex_char_poly(A: Jet, J: Jet):
    """Coefficients e_0..e_n of det_C(t Id - A) = sum (-1)^k e_k t^(n-k).

    The complex trace of a J-commuting endomorphism is
    tr_C M = (tr M - i tr(J M)) / 2; Newton's identities turn the power
    sums of A into the (complex jet) coefficients.
    """
    d = A.c[0].shape[-1]
    ncx = d // 2
    Ak = A
    ps = []
    for k in range(1, ncx + 1):
        tr = jet_trace(Ak)
        trJ = jet_trace(jet_matmul(J, Ak))
        ps.append((tr - 1j * trJ) * 0.5)
        if k < ncx:
            Ak = jet_matmul(Ak, A)
    e = [Jet.const(np.ones(A.c[0].shape[0], dtype=complex), A.dim, A.order)]
    for k in range(1, ncx + 1):
        acc = None
        for i in range(1, k + 1):
            term = e[k - i] * ps[i - 1] * ((-1.0) ** (i - 1))
            acc = term if acc is None else acc + term
        e.append(acc * (1.0 / k))
    return e


def complex_det(A: Jet, J: Jet) -> Jet:
    """det_C A as a real jet (smooth, sign included)."""
    e = complex_char_poly(A, J)
    det = e[-1]
    return det.real


def nonconstant_factor(A: Jet, J: Jet, constant_eigs, root_tol=1e-6):
    """Divide det_C(t Id - A) by the declared constant-eigenvalue factor.

    ``constant_eigs`` is a list of (c, multiplicity) with complex
    multiplicities.  Returns the mu_i jets (elementary symmetric functions
    of the non-constant eigenvalues) and the worst division remainder.
    """
    e = complex_char_poly(A, J)
    ncx = len(e) - 1
    # coefficients of t^(n-k) are (-1)^k e_k; synthetic division by (t - c)
    coeffs = [e[k] * ((-1.0) ** k) for k in range(ncx + 1)]
    scale = 1.0 + max(max_abs(c.c[0]) for c in coeffs)
    worst = 0.0
    for c, mult in constant_eigs:
        for _ in range(mult):
            out = [coeffs[0]]
            for k in range(1, len(coeffs)):
                out.append(coeffs[k] + out[-1] * c)
            rem = out.pop()
            worst = max(worst, max_abs(rem.c[0]) / scale)
            coeffs = out
    if worst > root_tol:
        raise KahlerError(
            f"a declared constant eigenvalue is not a root of the complex "
            f"characteristic polynomial (remainder {worst:.3e})")
    mus = []
    for k, cf in enumerate(coeffs):
        mu = cf * ((-1.0) ** k)
        imag = max_abs(mu.c[0].imag)
        if imag > root_tol:
            raise KahlerError(f"mu_{k} has imaginary part {imag:.3e}")
        mus.append(mu.real)
    return mus, worst


# ---------------------------------------------------------------------------
# hamiltonian Killing check and connection difference
# ---------------------------------------------------------------------------

def hamiltonian_killing_check(flds, tol=1e-6, comm_tol=1e-8
                              ) -> ResidualReport:
    """det_C A generates a Killing field: hermitian Hessian + L_K g."""
    g, J, A = flds.g, flds.J, flds.A
    n = g.c[0].shape[0]
    comm = np.einsum("nab,nbc->nac", A.c[0], J.c[0]) \
        - np.einsum("nab,nbc->nac", J.c[0], A.c[0])
    cres = max_abs(comm) / (1.0 + max_abs(A.c[0]))
    if cres > comm_tol:
        raise KahlerError(f"[A, J] residual {cres:.3e} above tolerance")
    f = complex_det(A, J)
    gam = christoffel(flds.g)
    hess = hessian_cov(f, gam).c[0]
    Jv = J.c[0]
    herm = np.einsum("nca,ncd,ndb->nab", Jv, hess, Jv) - hess
    scale = 1.0 + max_abs(hess)
    rep = ResidualReport(title="hamiltonian-killing")
    rep.add(CheckEntry("det_hessian_hermitian", "herm(nabla^2 detC A)",
                       max_abs(herm) / scale, tol, samples=n))
    K = jet_einsum("nab,nb->na", J.truncate(f.order - 1),
                   gradient(f, metric_inverse(g)))
    lg = lie_metric(g.truncate(K.order), K)
    rep.add(CheckEntry("killing_detC", "L_K g, K=J grad detC A",
                       max_abs(lg) / (1.0 + max_abs(g.c[0], K.c[0])), tol,
                       samples=n))
    return rep


def connection_difference_check(g: Jet, ghat: Jet, J: Jet, tol=1e-6
                                ) -> ResidualReport:
    """Gamma-hat minus Gamma against the rank-one hermitian expression
    built from Phi = d phi, phi = ln(det ghat / det g) / (4(n+1))."""
    d = g.c[0].shape[-1]
    ncx = d // 2
    n = g.c[0].shape[0]
    ratio = jet_det(ghat) / jet_det(g)
    if np.any(ratio.c[0] <= 0.0):
        raise KahlerError("determinant ratio not positive; phi undefined")
    phi = ratio.log() * (1.0 / (4.0 * (ncx + 1)))
    Phi = tensor_partial(phi).c[0]                      # (n, a)
    gam = christoffel(g).c[0]
    gamhat = christoffel(ghat).c[0]
    Jv = J.c[0]
    eye = np.eye(d)
    PhiJ = np.einsum("nd,nda->na", Phi, Jv)
    T = (np.einsum("na,cb->ncab", Phi, eye)
         + np.einsum("nb,ca->ncab", Phi, eye)
         - np.einsum("na,ncb->ncab", PhiJ, Jv)
         - np.einsum("nb,nca->ncab", PhiJ, Jv))
    resid = (gamhat - gam) - T
    scale = 1.0 + max_abs(gam, gamhat)
    rep = ResidualReport(title="connection-difference")
    rep.add(CheckEntry("connection_difference", "Gammahat-Gamma=T(Phi)",
                       max_abs(resid) / scale, tol, samples=n))
    return rep


# ---------------------------------------------------------------------------
# eigenvector property and eigenvalue of the gradient
# ---------------------------------------------------------------------------

def eigenvector_gradient_residual(flds, tol=1e-7) -> ResidualReport:
    """(A - rho) grad rho = 0 and (A - rho) J grad rho = 0 at regular
    samples, for each simple non-constant eigenvalue field rho."""
    g, J, A = flds.g, flds.J, flds.A
    ginv = metric_inverse(g)
    n = g.c[0].shape[0]
    consts = []
    rep = ResidualReport(title="eigenvector-gradient")
    vals = [r.c[0] for r in flds.rhos]
    mask = _gap_mask(vals, consts, EIGEN_GAP)
    excluded = int((~mask).sum())
    worst = 0.0
    for r in flds.rhos:
        if np.iscomplexobj(r.c[0]):
            continue          # complex pairs are exercised via mu fields
        rr = r
        grad = gradient(rr, ginv).c[0]
        Av = A.c[0]
        res = np.einsum("nab,nb->na", Av, grad) - rr.c[0][:, None] * grad
        Jgrad = np.einsum("nab,nb->na", J.c[0], grad)
        res2 = np.einsum("nab,nb->na", Av, Jgrad) \
            - rr.c[0][:, None] * Jgrad
        m = mask
        s = 1.0 + max_abs(grad[m], Av[m])
        worst = max(worst, max_abs(res[m]) / s, max_abs(res2[m]) / s)
    rep.add(CheckEntry("eigenvector_gradients", "(A-rho)grad rho",
                       worst, tol, samples=n, excluded=excluded))
    return rep


def lambda_field(flds) -> Jet:
    """La = (1/4) grad tr A as a vector jet."""
    return _lambda_vec(flds, 0.25)


# ---------------------------------------------------------------------------
# quotient-pair duality identities
# ---------------------------------------------------------------------------

def commuting_gradients_residual(qpf, tol=1e-7) -> ResidualReport:
    """[grad mu_i, grad mu_j] = 0 for the symmetric functions of the
    eigenvalues of a compatible pair (order >= 2 jets required)."""
    from .geometry import lie_bracket
    h = qpf.h
    ginv = metric_inverse(h)
    grads = [gradient(mu, ginv) for mu in qpf.mus[1:]]
    n = h.c[0].shape[0]
    worst = 0.0
    for i, u in enumerate(grads):
        for v in grads[i + 1:]:
            worst = max(worst, max_abs(lie_bracket(u, v))
                        / ((1.0 + max_abs(u.c[0]))
                           * (1.0 + max_abs(v.c[0]))))
    rep = ResidualReport(title="commuting-gradients")
    rep.add(CheckEntry("commuting_gradients", "[grad mu_i, grad mu_j]",
                       worst, tol, samples=n))
    return rep


def mu_hat_duality_residual(qpf, tol=1e-7) -> ResidualReport:
    """(1/det L)(d mu_i o L^{-1}) = -d muhat_{ell+1-i}, where muhat_k is
    the k-th symmetric function of the reciprocal eigenvalues,
    muhat_k = mu_{ell-k} / mu_ell."""
    h, L = qpf.h, qpf.L
    n = h.c[0].shape[0]
    ell = len(qpf.mus) - 1
    detL = jet_det(L)
    if np.any(np.abs(detL.c[0]) < 1e-12):
        raise KahlerError("det L vanishes at a sample")
    Linv = jet_inv(L)
    worst = 0.0
    inv_det = 1.0 / detL
    for i in range(1, ell + 1):
        dmu = tensor_partial(qpf.mus[i])            # (n, a)
        lhs = jet_einsum("na,nab->nb", dmu, Linv.truncate(dmu.order))
        lhs = jet_einsum("nb,n->nb", lhs, inv_det.truncate(dmu.order))
        muhat = qpf.mus[i - 1] / detL               # muhat_{ell+1-i}
        rhs = tensor_partial(muhat)
        worst = max(worst, max_abs(lhs.c[0] + rhs.c[0])
                    / (1.0 + max_abs(lhs.c[0], rhs.c[0])))
    rep = ResidualReport(title="mu-hat-duality")
    rep.add(CheckEntry("mu_hat_duality",
                       "d mu_i o L^{-1} / det L = -d muhat_{l+1-i}",
                       worst, tol, samples=n))
    return rep

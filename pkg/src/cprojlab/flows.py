"""ODE-level dynamics on constructed charts.

Geodesics and their complex-line generalization gamma'' = alpha gamma' +
beta J gamma' integrate with an adaptive Runge-Kutta solver and terminate
on window exit; planarity of a trajectory with respect to a second metric
is measured by projecting the acceleration off span{velocity, J velocity}.
Eigenvalue transport along the canonical mobility field follows the
logistic law; the scalar flows rho' = rho^2 + 1, rho(1-rho), rho^2 trace
circles in the complex plane whose fit closes the phase-portrait checks.
Volume response of the leaf metric under the off-leaf part of v and the
divergence scans of the curvature formulas complete the module.

Integrator contract: the ``tol`` argument bounds the local error and the
solver is driven quadratically harder than requested (internal tolerance
tol^2), so halving ``tol`` cuts the endpoint error by about four.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .geometry import christoffel, lie_endo, lie_metric, max_abs
from .report import CheckEntry, ResidualReport
from .curvspec import lambda_two_eigen

__all__ = [
    "FlowError", "Trajectory", "integrate_jplanar", "integrate_geodesic",
    "jplanarity_residual", "eigenvalue_flow", "circle_fit", "fixed_points",
    "logistic", "lie_residual_suite", "transport_check",
    "volume_coefficient", "blowup_scan", "tail_exponent", "flow_point",
]

_INTERNAL_FLOOR = 1e-13


class FlowError(ValueError):
    pass


@dataclass
class Trajectory:
    t: np.ndarray          # (m,)
    x: np.ndarray          # (m, d) positions
    v: np.ndarray          # (m, d) velocities (empty for scalar flows)
    acc: np.ndarray | None = None   # (m, d) accelerations gamma''
    exited: bool = False
    exit_time: float | None = None


def _solver_tols(tol):
    it = max(tol * tol, _INTERNAL_FLOOR)
    return it, it


def integrate_jplanar(chart, x0, v0, alpha=None, beta=None, T=1.0,
                      tol=1e-8, n_out=200) -> Trajectory:
    """Integrate gamma'' + Gamma(gamma', gamma') = alpha gamma' +
    beta J gamma', clipped to the chart window.

    ``alpha``/``beta`` are scalar functions of the curve parameter (or
    None for a plain geodesic)."""
    d = chart.dim
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if not chart.window.contains(x0[None])[0]:
        raise FlowError("start point outside the chart window")

    def rhs(t, y):
        x, v = y[:d], y[d:]
        fl = chart.eval(x[None], order=1)
        gam = christoffel(fl.g).c[0][0]
        acc = -np.einsum("cab,a,b->c", gam, v, v)
        if alpha is not None:
            acc = acc + alpha(t) * v
        if beta is not None:
            Jv = fl.J.c[0][0]
            acc = acc + beta(t) * (Jv @ v)
        return np.concatenate([v, acc])

    def exit_event(t, y):
        x = y[:d]
        lo = np.min(np.minimum(x - chart.window.lo,
                               chart.window.hi - x))
        return lo

    exit_event.terminal = True
    exit_event.direction = -1.0

    rtol, atol = _solver_tols(tol)
    sol = solve_ivp(rhs, (0.0, T), np.concatenate([x0, v0]),
                    method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True, events=exit_event)
    if not sol.success:
        raise FlowError(f"integration failed: {sol.message}")
    t_end = sol.t[-1]
    ts = np.linspace(0.0, t_end, n_out)
    ys = sol.sol(ts)
    xs, vs = ys[:d].T, ys[d:].T
    # exact accelerations from the equation of motion, batch evaluated
    fl = chart.eval(xs, order=1)
    gam = christoffel(fl.g).c[0]
    acc = -np.einsum("ncab,na,nb->nc", gam, vs, vs)
    if alpha is not None:
        acc = acc + np.array([alpha(t) for t in ts])[:, None] * vs
    if beta is not None:
        Jv = np.einsum("nab,nb->na", fl.J.c[0], vs)
        acc = acc + np.array([beta(t) for t in ts])[:, None] * Jv
    exited = len(sol.t_events[0]) > 0
    return Trajectory(t=ts, x=xs, v=vs, acc=acc, exited=exited,
                      exit_time=float(sol.t_events[0][0]) if exited
                      else None)


def integrate_geodesic(chart, x0, v0, T=1.0, tol=1e-8, n_out=200):
    return integrate_jplanar(chart, x0, v0, None, None, T, tol, n_out)


def jplanarity_residual(traj: Trajectory, chart, metric="g",
                        span_margin=1e-8) -> float:
    """Max over trajectory samples of the covariant acceleration
    component orthogonal to span{velocity, J velocity}.

    ``metric`` selects whose connection measures the acceleration: the
    chart metric 'g' or its 'partner'.  The trajectory must carry its
    coordinate accelerations gamma''."""
    from .kahler import partner_metric

    if traj.acc is None:
        raise FlowError("trajectory carries no acceleration data")
    fl = chart.eval(traj.x, order=1)
    g = fl.g if metric == "g" else partner_metric(fl.g, fl.A)
    gam = christoffel(g).c[0]
    gv = g.c[0]
    Jv = fl.J.c[0]
    v = traj.v
    acc = traj.acc + np.einsum("ncab,na,nb->nc", gam, v, v)
    Jv_v = np.einsum("nab,nb->na", Jv, v)
    span = np.stack([v, Jv_v], axis=1)                  # (n, 2, d)
    gram = np.einsum("nia,nab,njb->nij", span, gv, span)
    det = np.abs(np.linalg.det(gram))
    ok = det / (1.0 + max_abs(gram)) ** 2 >= span_margin
    if not ok.any():
        raise FlowError("velocity span degenerate along the trajectory")
    ginv = np.linalg.inv(gram[ok])
    coef = np.einsum("nij,nab,njb,na->ni", ginv, gv[ok], span[ok], acc[ok])
    proj = np.einsum("ni,nia->na", coef, span[ok])
    return max_abs(acc[ok] - proj) / (1.0 + max_abs(acc[ok]))


# ---------------------------------------------------------------------------
# scalar eigenvalue flows
# ---------------------------------------------------------------------------

_ODES = {
    "rho^2+1": lambda r: r * r + 1.0,
    "rho(1-rho)": lambda r: r * (1.0 - r),
    "rho^2": lambda r: r * r,
}

_FIXED_POINTS = {
    "rho^2+1": (1j, -1j),
    "rho(1-rho)": (0.0, 1.0),
    "rho^2": (0.0,),
}


def fixed_points(ode: str):
    return _FIXED_POINTS[ode]


def eigenvalue_flow(ode: str, rho0, T, tol=1e-10, n_out=400,
                    blowup=1e6) -> Trajectory:
    """Complex trajectory of the scalar flow; reports finite-time escape."""
    f = _ODES[ode]

    def rhs(t, y):
        r = y[0] + 1j * y[1]
        dr = f(r)
        return [dr.real, dr.imag]

    def escape(t, y):
        return blowup - np.hypot(y[0], y[1])

    escape.terminal = True
    escape.direction = -1.0
    rtol, atol = _solver_tols(tol)
    r0 = complex(rho0)
    sol = solve_ivp(rhs, (0.0, T), [r0.real, r0.imag], method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True, events=escape)
    t_end = sol.t[-1]
    ts = np.linspace(0.0, t_end, n_out)
    ys = sol.sol(ts)
    exited = len(sol.t_events[0]) > 0
    return Trajectory(t=ts, x=(ys[0] + 1j * ys[1])[:, None],
                      v=np.empty((n_out, 0)), exited=exited,
                      exit_time=float(sol.t_events[0][0]) if exited
                      else None)


def circle_fit(z):
    """Least-squares circle through complex points: (center, radius,
    max radial deviation)."""
    z = np.asarray(z).ravel()
    x, y = z.real, z.imag
    M = np.stack([2 * x, 2 * y, np.ones_like(x)], axis=1)
    b = x * x + y * y
    (cx, cy, c0), *_ = np.linalg.lstsq(M, b, rcond=None)
    r = np.sqrt(c0 + cx * cx + cy * cy)
    resid = np.max(np.abs(np.abs(z - (cx + 1j * cy)) - r))
    return complex(cx, cy), float(r), float(resid)


def logistic(rho0, t):
    """Closed form of rho' = rho(1-rho)."""
    t = np.asarray(t, dtype=float)
    e = np.exp(t)
    return rho0 * e / (1.0 - rho0 + rho0 * e)


# ---------------------------------------------------------------------------
# Lie-derivative residual suite along (c-)projective fields
# ---------------------------------------------------------------------------

def lie_residual_suite(chart, grid_pts=None, coeffs=None, tol=1e-6,
                       n_random=80, seed=11) -> ResidualReport:
    """Residuals of L_v A and L_v g against their canonical right sides.

    Default is the canonical mobility form L_v A = A(Id - A),
    L_v g = -gA - (sum rho_i + C) g; passing ``coeffs`` = (alpha, beta,
    gamma, delta) switches to the general quadratic form
    L_v A = -beta A^2 + (delta - alpha) A + gamma Id with the matching
    trace-weighted metric equation.
    """
    from .builders import mobility_rhs
    if grid_pts is None:
        rng = np.random.default_rng(seed)
        grid_pts = chart.window.random(n_random, rng)
    fl = chart.eval(grid_pts, order=1)
    if fl.v is None:
        raise FlowError("chart carries no vector field")
    n = grid_pts.shape[0]
    if coeffs is None:
        rhs_g, rhs_A = mobility_rhs(fl, chart.meta["C"])
    else:
        al, be, ga, de = coeffs
        Av = fl.A.c[0]
        d = Av.shape[-1]
        ncx = d // 2
        A2 = np.einsum("nab,nbc->nac", Av, Av)
        rhs_A = -be * A2 + (de - al) * Av + ga * np.eye(d)[None]
        trA = np.trace(Av, axis1=-2, axis2=-1)
        rhs_g = ((-0.5 * be * trA - (ncx + 1) * al)[:, None, None]
                 * fl.g.c[0]
                 - be * np.einsum("nac,ncb->nab", fl.g.c[0], Av))
    lg = lie_metric(fl.g, fl.v)
    lA = lie_endo(fl.A, fl.v)
    rep = ResidualReport(title="lie-residuals")
    rep.add(CheckEntry("lie_v_metric", "L_v g = canonical RHS",
                       max_abs(lg - rhs_g) / (1.0 + max_abs(rhs_g)),
                       tol, samples=n))
    rep.add(CheckEntry("lie_v_endo", "L_v A = canonical RHS",
                       max_abs(lA - rhs_A) / (1.0 + max_abs(rhs_A)),
                       tol, samples=n))
    return rep


def flow_point(chart, x0, T, tol=1e-10, n_out=120) -> Trajectory:
    """Integral curve of the chart's vector field v."""
    if chart.v_coeffs is None:
        raise FlowError("chart carries no vector field")

    def rhs(t, y):
        return chart.v_field(y[None], order=0).c[0][0]

    rtol, atol = _solver_tols(tol)
    sol = solve_ivp(rhs, (0.0, T), np.asarray(x0, dtype=float),
                    method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True)
    if not sol.success:
        raise FlowError(sol.message)
    ts = np.linspace(0.0, T, n_out)
    ys = sol.sol(ts).T
    return Trajectory(t=ts, x=ys, v=np.empty((n_out, 0)))


def transport_check(chart, x0=None, t_span=(-3.0, 3.0), tol=1e-6,
                    n_check=60) -> ResidualReport:
    """Eigenvalue transport along v against the logistic closed form."""
    if x0 is None:
        x0 = chart.window.center()
    rho_idx = chart.ell if hasattr(chart, "t_sl") else 0
    rho0 = float(x0[rho_idx])
    worst = 0.0
    for T in (t_span[1], t_span[0]):
        traj = flow_point(chart, x0, T, n_out=n_check)
        rho_t = traj.x[:, rho_idx]
        expect = logistic(rho0, traj.t)
        worst = max(worst, float(np.max(np.abs(rho_t - expect))))
    rep = ResidualReport(title="transport")
    rep.add(CheckEntry("eigenvalue_transport", "rho(t) logistic",
                       worst, tol, samples=2 * n_check))
    return rep


# ---------------------------------------------------------------------------
# volume response of the leaf metric
# ---------------------------------------------------------------------------

def volume_coefficient(chart, grid_pts=None, n_random=40, seed=5,
                       tol=1e-5, decomp_tol=1e-8) -> ResidualReport:
    """Measured f = (1/2) tr(g2^{-1} L_{v2} g2) on the leaves orthogonal
    to the eigenvalue direction, against the predicted constant.

    Works on mobility charts with one non-constant eigenvalue: the leaf
    coordinates are everything except the rho coordinate; v2 is the
    projection of v onto them.
    """
    if getattr(chart, "ell", None) != 1:
        raise FlowError("volume coefficient needs one non-constant "
                        "eigenvalue")
    if grid_pts is None:
        rng = np.random.default_rng(seed)
        grid_pts = chart.window.random(n_random, rng)
    fl = chart.eval(grid_pts, order=1)
    if fl.v is None:
        raise FlowError("chart carries no vector field")
    d = chart.dim
    kahler = hasattr(chart, "t_sl")
    rho_idx = chart.ell if kahler else 0
    leaf = [i for i in range(d) if i != rho_idx]
    C = chart.meta["C"]
    m0, m1 = chart.meta["m0"], chart.meta["m1"]
    if kahler:
        predicted = (-C - 1.0) * (m0 + m1 + 1.0)
    else:
        predicted = 0.5 * (-C - 1.0) * (m0 + m1)

    # v must preserve the leaf distribution: v^rho depends on rho only
    vrho_leafgrad = fl.v.c[1][:, rho_idx, :][:, leaf]
    if max_abs(vrho_leafgrad) > decomp_tol:
        raise FlowError("v does not preserve the leaf foliation")

    g2 = fl.g.c[0][np.ix_(range(len(grid_pts)), leaf, leaf)]
    dg2 = fl.g.c[1][np.ix_(range(len(grid_pts)), leaf, leaf, leaf)]
    v2 = fl.v.c[0][:, leaf]
    dv2 = fl.v.c[1][np.ix_(range(len(grid_pts)), leaf, leaf)]
    lg2 = (np.einsum("nabc,nc->nab", dg2, v2)
           + np.einsum("ncb,nca->nab", g2, dv2)
           + np.einsum("nac,ncb->nab", g2, dv2))
    f = 0.5 * np.einsum("nab,nba->n", np.linalg.inv(g2), lg2)
    rep = ResidualReport(title="volume-coefficient")
    rep.add(CheckEntry("volume_coefficient",
                       "L_{v2} vol = const * vol",
                       float(np.max(np.abs(f - predicted))), tol,
                       samples=len(grid_pts),
                       note=f"predicted={predicted:.6g}"))
    return rep


# ---------------------------------------------------------------------------
# divergence scans
# ---------------------------------------------------------------------------

def tail_exponent(s, y, tail=8):
    """Least-squares slope of log|y| against log s on the last points."""
    s = np.asarray(s, dtype=float)[-tail:]
    y = np.abs(np.asarray(y, dtype=float))[-tail:]
    if np.any(y == 0.0):
        raise FlowError("zero values in the divergence tail")
    return float(np.polyfit(np.log(s), np.log(y), 1)[0])


def jordan2_fprime(sol, x, rho1, extra_rhos=(), extra_profiles=()):
    """The curvature eigenvalue of a 2x2 nilpotent block instance:

    f'(r1) = -F'(r1) / ((F(r1)+x)^3 prod (r1 - r_i))
             + sum_i F_i(r_i) / (4 (r_i - r1)^4 prod_{j != 1,i}(r_i - r_j))
    """
    F = sol(rho1)
    dF = sol.fprime(rho1)
    denom = np.prod([rho1 - r for r in extra_rhos]) if extra_rhos else 1.0
    out = -dF / ((F + x) ** 3 * denom)
    for i, (ri, prof) in enumerate(zip(extra_rhos, extra_profiles)):
        rest = np.prod([ri - rj for j, rj in enumerate(extra_rhos)
                        if j != i]) if len(extra_rhos) > 1 else 1.0
        out = out + prof(ri) / (4.0 * (ri - rho1) ** 4 * rest)
    return out


def jordan3_fprime(sol, x2, rho1, extra_rhos=(), extra_profiles=()):
    F = sol(rho1)
    denom = np.prod([rho1 - r for r in extra_rhos]) if extra_rhos else 1.0
    out = -3.0 / (4.0 * (F + 2.0 * x2) ** 2 * denom)
    for i, (ri, prof) in enumerate(zip(extra_rhos, extra_profiles)):
        rest = np.prod([ri - rj for j, rj in enumerate(extra_rhos)
                        if j != i]) if len(extra_rhos) > 1 else 1.0
        out = out + prof(ri) / (4.0 * (ri - rho1) ** 5 * rest)
    return out


def blowup_scan(kind, path, tol_exponent=0.1, **kw):
    """Evaluate a curvature quantity along a parameter path approaching
    a singular locus; certify divergence by a tail-ratio exponent.

    kind 'jordan2': kw needs sol, rho1, (extra_rhos, extra_profiles);
        path is the sequence of offsets s with x = -F(rho1) + s.
    kind 'jordan3': same, with x2 = (-F(rho1) + s) / 2.
    kind 'ell2': kw needs profile; path is the sequence of scales s with
        (r1, r2) = (s, 2 s) (corner 0) or 1 - (2 s, s) (corner 1,
        kw corner=1).
    Returns (values, exponent estimate or None for bounded scans).
    """
    path = np.asarray(path, dtype=float)
    if kind == "jordan2":
        sol, rho1 = kw["sol"], kw["rho1"]
        x = -sol(rho1) + path
        vals = jordan2_fprime(sol, x, rho1, kw.get("extra_rhos", ()),
                              kw.get("extra_profiles", ()))
    elif kind == "jordan3":
        sol, rho1 = kw["sol"], kw["rho1"]
        x2 = (-sol(rho1) + path) / 2.0
        vals = jordan3_fprime(sol, x2, rho1, kw.get("extra_rhos", ()),
                              kw.get("extra_profiles", ()))
    elif kind == "ell2":
        prof = kw["profile"]
        if kw.get("corner", 0) == 1:
            vals = np.array([lambda_two_eigen(prof, 1 - 2 * s, 1 - s)
                             for s in path]).ravel()
        else:
            vals = np.array([lambda_two_eigen(prof, s, 2 * s)
                             for s in path]).ravel()
    else:
        raise FlowError(f"unknown scan kind {kind!r}")
    return np.asarray(vals, dtype=float)

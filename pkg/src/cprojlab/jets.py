"""Truncated multivariate Taylor arithmetic, orders 0 through 3.

A ``Jet`` carries the value and the partial-derivative arrays of a scalar
quantity at a batch of chart points: ``c[0]`` is the value, ``c[1]`` the
gradient, ``c[2]`` the Hessian and ``c[3]`` the fully symmetric third-order
coefficient array.  Arithmetic propagates the coefficients exactly through
products, quotients and elementary functions, so every derivative a chart
computation needs (metric derivatives up to third order, derivatives of
eigenvalue functions, of ``F(t) = a (1-t)^{-C} t^{p}`` profiles, ...) comes
out exact to truncation order rather than from finite differencing.

Layout: each coefficient array has shape ``batch + (dim,)*k`` with the
derivative axes trailing.  The batch is normally ``(N,)`` for N sample
points; ``jstack`` extends it with component axes so a whole tensor field
evaluated on a grid is a single Jet of batch shape ``(N, i, j, ...)``.
Complex dtype is supported (holomorphic eigenvalue blocks need it).

Jets are immutable values and every operation is pure.
"""

from __future__ import annotations

import itertools

import numpy as np

__all__ = [
    "Jet",
    "JetError",
    "JetDomainError",
    "MAX_ORDER",
    "polyval",
    "jstack",
    "jet_einsum",
    "jet_map",
    "tensor_partial",
    "jet_matmul",
    "jet_matvec",
    "jet_trace",
    "jet_transpose",
    "jet_inv",
    "jet_det",
]

MAX_ORDER = 3

# letters reserved for derivative axes inside einsum specs
_DAX = "xyz"


class JetError(ValueError):
    pass


class JetDomainError(JetError):
    """Input left the domain of an elementary function (div by zero, log of
    a non-positive value, ...)."""


def _as_array(v):
    a = np.asarray(v)
    if a.dtype.kind in "iu":
        a = a.astype(np.float64)
    return a


class Jet:
    __slots__ = ("dim", "order", "c")

    def __init__(self, dim: int, order: int, coeffs):
        if not (0 <= order <= MAX_ORDER):
            raise JetError(f"order must be in 0..{MAX_ORDER}, got {order}")
        if dim < 1:
            raise JetError(f"dim must be >= 1, got {dim}")
        if len(coeffs) != order + 1:
            raise JetError("coefficient count does not match order")
        self.dim = dim
        self.order = order
        self.c = tuple(_as_array(a) for a in coeffs)

    # -- constructors -------------------------------------------------

    @classmethod
    def seed(cls, index: int, value, dim: int, order: int) -> "Jet":
        """Jet of the coordinate function x_index at the given value(s)."""
        if not (0 <= index < dim):
            raise JetError(f"seed index {index} out of range for dim {dim}")
        v = _as_array(value)
        coeffs = [v]
        if order >= 1:
            g = np.zeros(v.shape + (dim,), dtype=v.dtype)
            g[..., index] = 1.0
            coeffs.append(g)
        for k in range(2, order + 1):
            coeffs.append(np.zeros(v.shape + (dim,) * k, dtype=v.dtype))
        return cls(dim, order, coeffs)

    @classmethod
    def const(cls, value, dim: int, order: int) -> "Jet":
        v = _as_array(value)
        coeffs = [v] + [
            np.zeros(v.shape + (dim,) * k, dtype=v.dtype)
            for k in range(1, order + 1)
        ]
        return cls(dim, order, coeffs)

    # -- accessors -----------------------------------------------------

    @property
    def value(self):
        return self.c[0]

    @property
    def grad(self):
        if self.order < 1:
            raise JetError("jet carries no gradient (order 0)")
        return self.c[1]

    @property
    def hess(self):
        if self.order < 2:
            raise JetError("jet carries no Hessian (order < 2)")
        return self.c[2]

    @property
    def third(self):
        if self.order < 3:
            raise JetError("jet carries no third-order data (order < 3)")
        return self.c[3]

    def partial(self, index: int) -> "Jet":
        """Jet of the partial derivative d/dx_index, one order lower."""
        if self.order < 1:
            raise JetError("cannot take a partial of an order-0 jet")
        if not (0 <= index < self.dim):
            raise JetError(f"partial index {index} out of range")
        coeffs = [np.take(self.c[k + 1], index, axis=-1)
                  for k in range(self.order)]
        return Jet(self.dim, self.order - 1, coeffs)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetError("cannot raise the order of a jet")
        return Jet(self.dim, order, self.c[: order + 1])

    # -- arithmetic ----------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.dim != self.dim or other.order != self.order:
                raise JetError(
                    f"jet mismatch: dim/order ({self.dim},{self.order}) vs "
                    f"({other.dim},{other.order})"
                )
            return other
        return Jet.const(other, self.dim, self.order)

    def __add__(self, other):
        o = self._coerce(other)
        return Jet(self.dim, self.order,
                   [a + b for a, b in zip(self.c, o.c)])

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return Jet(self.dim, self.order,
                   [a - b for a, b in zip(self.c, o.c)])

    def __rsub__(self, other):
        o = self._coerce(other)
        return Jet(self.dim, self.order,
                   [b - a for a, b in zip(self.c, o.c)])

    def __neg__(self):
        return Jet(self.dim, self.order, [-a for a in self.c])

    def __mul__(self, other):
        o = self._coerce(other)
        u, v = self.c, o.c
        out = [u[0] * v[0]]
        if self.order >= 1:
            out.append(u[1] * v[0][..., None] + u[0][..., None] * v[1])
        if self.order >= 2:
            t = u[1][..., :, None] * v[1][..., None, :]
            out.append(
                u[2] * v[0][..., None, None]
                + u[0][..., None, None] * v[2]
                + t + np.swapaxes(t, -1, -2)
            )
        if self.order >= 3:
            t21 = u[2][..., :, :, None] * v[1][..., None, None, :]
            t12 = u[1][..., :, None, None] * v[2][..., None, :, :]
            out.append(
                u[3] * v[0][..., None, None, None]
                + u[0][..., None, None, None] * v[3]
                + t21 + np.swapaxes(t21, -1, -2) + np.swapaxes(t21, -1, -3)
                + t12 + np.swapaxes(t12, -3, -2) + np.swapaxes(t12, -3, -1)
            )
        return Jet(self.dim, self.order, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        return self * o._reciprocal()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        return o * self._reciprocal()

    def compose1(self, table) -> "Jet":
        """Compose with a univariate function given by its derivative values.

        ``table[k]`` holds the k-th derivative of the outer function
        evaluated at ``self.value`` (broadcastable arrays); the chain rule
        through order 3 does the rest.
        """
        if len(table) < self.order + 1:
            raise JetError("derivative table too short for jet order")
        T = [np.asarray(t) for t in table]
        u = self.c
        b = np.broadcast_shapes(T[0].shape, u[0].shape)
        out = [np.broadcast_to(T[0], b).copy()]
        if self.order >= 1:
            out.append(T[1][..., None] * u[1])
        if self.order >= 2:
            out.append(
                T[2][..., None, None] * u[1][..., :, None] * u[1][..., None, :]
                + T[1][..., None, None] * u[2]
            )
        if self.order >= 3:
            uuu = (u[1][..., :, None, None]
                   * u[1][..., None, :, None]
                   * u[1][..., None, None, :])
            t = u[2][..., :, :, None] * u[1][..., None, None, :]
            sym21 = t + np.swapaxes(t, -1, -2) + np.swapaxes(t, -1, -3)
            out.append(
                T[3][..., None, None, None] * uuu
                + T[2][..., None, None, None] * sym21
                + T[1][..., None, None, None] * u[3]
            )
        return Jet(self.dim, self.order, out)

    def _reciprocal(self) -> "Jet":
        v = self.c[0]
        if np.any(np.abs(v) == 0.0):
            raise JetDomainError("division by a jet with zero value")
        inv = 1.0 / v
        return self.compose1([inv, -inv ** 2, 2 * inv ** 3, -6 * inv ** 4]
                             [: self.order + 1])

    def __pow__(self, p):
        if isinstance(p, Jet):
            raise JetError("jet ** jet is not supported")
        if float(p) == int(p) and abs(int(p)) <= 8:
            # integer powers stay valid for negative and complex values
            n = int(p)
            if n == 0:
                return Jet.const(np.ones_like(self.c[0]), self.dim, self.order)
            base = self if n > 0 else self._reciprocal()
            out = base
            for _ in range(abs(n) - 1):
                out = out * base
            return out
        v = self.c[0]
        if np.iscomplexobj(v) or np.any(v <= 0.0):
            raise JetDomainError(
                f"non-integer power {p} of a non-positive or complex value")
        table = [v ** p,
                 p * v ** (p - 1),
                 p * (p - 1) * v ** (p - 2),
                 p * (p - 1) * (p - 2) * v ** (p - 3)]
        return self.compose1(table[: self.order + 1])

    def exp(self):
        e = np.exp(self.c[0])
        return self.compose1([e, e, e, e][: self.order + 1])

    def log(self):
        v = self.c[0]
        if np.iscomplexobj(v) or np.any(v <= 0.0):
            raise JetDomainError("log of a non-positive or complex value")
        return self.compose1([np.log(v), 1 / v, -1 / v ** 2, 2 / v ** 3]
                             [: self.order + 1])

    def sqrt(self):
        return self ** 0.5

    def sin(self):
        s, cc = np.sin(self.c[0]), np.cos(self.c[0])
        return self.compose1([s, cc, -s, -cc][: self.order + 1])

    def cos(self):
        s, cc = np.sin(self.c[0]), np.cos(self.c[0])
        return self.compose1([cc, -s, -cc, s][: self.order + 1])

    # -- complex helpers -----------------------------------------------

    def conj(self):
        return Jet(self.dim, self.order, [np.conj(a) for a in self.c])

    @property
    def real(self):
        return Jet(self.dim, self.order, [np.real(a) for a in self.c])

    @property
    def imag(self):
        return Jet(self.dim, self.order, [np.imag(a) for a in self.c])

    def __repr__(self):
        return (f"Jet(dim={self.dim}, order={self.order}, "
                f"batch={self.c[0].shape}, value~{np.ravel(self.c[0])[:1]})")


def polyval(coeffs, x: Jet) -> Jet:
    """Evaluate a polynomial with coefficients listed lowest degree first."""
    if len(coeffs) == 0:
        return Jet.const(np.zeros_like(x.c[0]), x.dim, x.order)
    acc = Jet.const(np.broadcast_to(np.asarray(coeffs[-1]), x.c[0].shape),
                    x.dim, x.order)
    for a in reversed(coeffs[:-1]):
        acc = acc * x + a
    return acc


# ---------------------------------------------------------------------------
# stacked tensor jets: batch shape (N, *components) with trailing deriv axes
# ---------------------------------------------------------------------------

def jstack(cells) -> Jet:
    """Stack a (nested) rectangular list of scalar Jets into one tensor jet.

    Input jets must share dim, order and a 1-d point batch ``(N,)``; the
    result has batch shape ``(N, *nesting_shape)``.
    """
    shape = []
    probe = cells
    while isinstance(probe, (list, tuple)):
        shape.append(len(probe))
        probe = probe[0]
    flat = []

    def _flatten(x):
        if isinstance(x, (list, tuple)):
            for y in x:
                _flatten(y)
        else:
            flat.append(x)

    _flatten(cells)
    j0 = flat[0]
    n = j0.c[0].shape[0]
    coeffs = []
    for k in range(j0.order + 1):
        arrs = [np.broadcast_to(j.c[k], (n,) + (j0.dim,) * k) for j in flat]
        s = np.stack(arrs)  # (prod(shape), N, *deriv)
        s = s.reshape(tuple(shape) + (n,) + (j0.dim,) * k)
        s = np.moveaxis(s, len(shape), 0)  # batch first
        coeffs.append(s)
    return Jet(j0.dim, j0.order, coeffs)


def jet_map(sub: str, a: Jet) -> Jet:
    """Apply a linear einsum reshuffle (transpose, trace, ...) per coefficient.

    ``sub`` addresses only the batch and component axes; derivative axes are
    appended automatically.
    """
    ins, out = sub.split("->")
    coeffs = []
    for k in range(a.order + 1):
        d = _DAX[:k]
        coeffs.append(np.einsum(f"{ins}{d}->{out}{d}", a.c[k]))
    return Jet(a.dim, a.order, coeffs)


def jet_einsum(sub: str, a: Jet, b: Jet) -> Jet:
    """Two-operand einsum with the Leibniz rule over derivative orders.

    ``sub`` is an ordinary einsum spec over batch/component axes, e.g.
    ``'nij,njk->nik'``; derivative axes are distributed over both operands
    in all symmetric ways, which is exact because the coefficient blocks
    are symmetric.
    """
    if a.dim != b.dim or a.order != b.order:
        raise JetError("jet_einsum operands must share dim and order")
    ins, out = sub.split("->")
    sa, sb = ins.split(",")
    order = a.order
    coeffs = []
    for k in range(order + 1):
        letters = _DAX[:k]
        total = None
        for i in range(k + 1):
            j = k - i
            for pick in itertools.combinations(range(k), i):
                la = "".join(letters[p] for p in pick)
                lb = "".join(letters[p] for p in range(k) if p not in pick)
                term = np.einsum(f"{sa}{la},{sb}{lb}->{out}{letters}",
                                 a.c[i], b.c[j])
                total = term if total is None else total + term
        coeffs.append(total)
    return Jet(a.dim, order, coeffs)


def tensor_partial(t: Jet) -> Jet:
    """Coordinate derivative of a stacked tensor jet.

    The derivative index becomes the last component axis; the order drops
    by one.
    """
    if t.order < 1:
        raise JetError("cannot differentiate an order-0 tensor jet")
    return Jet(t.dim, t.order - 1, list(t.c[1:]))


def jet_matmul(a: Jet, b: Jet) -> Jet:
    return jet_einsum("nij,njk->nik", a, b)


def jet_matvec(a: Jet, v: Jet) -> Jet:
    return jet_einsum("nij,nj->ni", a, v)


def jet_trace(a: Jet) -> Jet:
    return jet_map("nii->n", a)


def jet_transpose(a: Jet) -> Jet:
    return jet_map("nij->nji", a)


def _bmm(*mats):
    out = mats[0]
    for m in mats[1:]:
        out = np.einsum("n...ij,n...jk->n...ik", out, m)
    return out


def jet_inv(m: Jet) -> Jet:
    """Inverse of a batched square-matrix jet ``(N, n, n)``.

    Propagates derivatives analytically from the pointwise inverse, so LAPACK
    handles pivoting and the jet layer stays division-free.
    """
    m0 = m.c[0]
    g0 = np.linalg.inv(m0)
    coeffs = [g0]
    if m.order >= 1:
        # d_a G = -G (d_a M) G ; derivative axis moved behind components
        m1 = np.moveaxis(m.c[1], -1, 1)  # (N,a,i,j)
        g1 = -_bmm(g0[:, None], m1, g0[:, None])  # (N,a,i,j)
        coeffs.append(np.moveaxis(g1, 1, -1))
    if m.order >= 2:
        m2 = np.moveaxis(m.c[2], (-2, -1), (1, 2))  # (N,a,b,i,j)
        Gb = g1[:, None, :]        # (N,1,b,i,j)
        M1a = m1[:, :, None]
        g0e = g0[:, None, None]
        g2 = -( _bmm(Gb, M1a, g0e) + _bmm(g0e, m2, g0e) + _bmm(g0e, M1a, Gb) )
        coeffs.append(np.moveaxis(g2, (1, 2), (-2, -1)))
    if m.order >= 3:
        m3 = np.moveaxis(m.c[3], (-3, -2, -1), (1, 2, 3))  # (N,a,b,c,i,j)
        A, B, C = 1, 2, 3
        e = lambda arr, *axes: np.expand_dims(arr, axis=axes)
        G0 = g0[:, None, None, None]
        G1b = e(g1, A, C); G1c = e(g1, A, B)
        M1a = e(m1, B, C)
        M2ab = e(m2, C); M2ac = e(m2, B)
        G2bc = e(g2, A)
        g3 = -(
            _bmm(G2bc, M1a, G0) + _bmm(G1b, M2ac, G0) + _bmm(G1b, M1a, G1c)
            + _bmm(G1c, M2ab, G0) + _bmm(G0, m3, G0) + _bmm(G0, M2ab, G1c)
            + _bmm(G1c, M1a, G1b) + _bmm(G0, M2ac, G1b) + _bmm(G0, M1a, G2bc)
        )
        coeffs.append(np.moveaxis(g3, (1, 2, 3), (-3, -2, -1)))
    return Jet(m.dim, m.order, coeffs)


def jet_det(m: Jet) -> Jet:
    """Determinant of a batched square-matrix jet, any metric signature.

    Uses d log|det| = tr(M^{-1} dM); the value itself keeps its sign from
    the pointwise LAPACK determinant.
    """
    det0 = np.linalg.det(m.c[0])
    if np.any(np.abs(det0) == 0.0):
        raise JetDomainError("determinant vanished at a sample")
    if m.order == 0:
        return Jet(m.dim, 0, [det0])
    g = jet_inv(m.truncate(m.order - 1)) if m.order >= 1 else None
    g0 = g.c[0]
    m1 = np.moveaxis(m.c[1], -1, 1)
    l1 = np.einsum("nij,naji->na", g0, m1)
    coeffs = [np.zeros_like(det0), l1]
    if m.order >= 2:
        g1 = np.moveaxis(g.c[1], -1, 1)
        m2 = np.moveaxis(m.c[2], (-2, -1), (1, 2))
        l2 = (np.einsum("nbij,naji->nab", g1, m1)
              + np.einsum("nij,nabji->nab", g0, m2))
        coeffs.append(l2)
    if m.order >= 3:
        g2 = np.moveaxis(g.c[2], (-2, -1), (1, 2))
        m3 = np.moveaxis(m.c[3], (-3, -2, -1), (1, 2, 3))
        l3 = (np.einsum("nbcij,naji->nabc", g2, m1)
              + np.einsum("nbij,nacji->nabc", g1, m2)
              + np.einsum("ncij,nabji->nabc", g1, m2)
              + np.einsum("nij,nabcji->nabc", g0, m3))
        coeffs.append(l3)
    s = Jet(m.dim, m.order, coeffs)
    return s.exp() * det0

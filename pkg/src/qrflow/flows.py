"""Right-hand sides of the coordinate ODEs and the progressive updates of
the working coefficient block.

Every function here is pure and operates on the working block for one
column, i.e. the trailing submatrix of the coefficient matrix after the
updates of all earlier columns have been applied.  Reflector updates use
inner products and rank-one/rank-two corrections only; rotator updates
exploit the ordered-product structure so one update costs O(m^2) for a
block of size m.
"""

import math

import numpy as np

from . import _kernels, linalg
from .errors import DimensionMismatch, DivisionHazard
from .frames import GivensFrames, HouseholderFrames


def rhs_u(col_state, awork):
    """Time derivative of the raw reflector state [u; rho], rho = sigma*||x||.

    The drive term couples u and rho through the symmetric part of the
    block and divides by rho, which is the structural weakness of these
    coordinates; |rho| < 1e-30 raises DivisionHazard.
    """
    u = col_state[:-1]
    rho = float(col_state[-1])
    if abs(rho) < 1e-30:
        raise DivisionHazard("u-coordinates: |rho| underflow")
    a = awork
    au = a @ u
    asu0 = 0.5 * (au[0] + float(u @ a[:, 0]))
    uasu = float(u @ au)  # u^T A_s u = u^T A u
    a00 = float(a[0, 0])
    du = au + rho * a[:, 0]
    du[0] -= 2.0 * asu0 + rho * a00 + uasu / rho
    drho = 2.0 * asu0 + a00 * rho + uasu / rho
    out = np.empty(col_state.size)
    out[:-1] = du
    out[-1] = drho
    return out


def rhs_v(v, awork):
    """Time derivative of the unit reflector vector v.

    Built as a skew generator acting on v, so the result is orthogonal to v
    up to roundoff (the flow stays on the unit sphere).  Divides by the
    leading component; |v[0]| < 1e-8 raises DivisionHazard and the caller
    must reimbed first.
    """
    v1 = float(v[0])
    if abs(v1) < 1e-8:
        raise DivisionHazard("v-coordinates: leading component too small")
    if v.size == 1:
        return np.zeros(1)
    a = awork
    vh = v[1:]
    ah1 = a[1:, 0]
    a11 = float(a[0, 0])
    av = a[1:, 1:] @ vh
    p1 = float(ah1 @ vh)
    p2 = float(a[0, 1:] @ vh)
    s1 = float(vh @ av)
    # generator collapses to F v^T - v F^T with F = [f1; g]: the drive
    # vector g carries the column dynamics, f1 the quadratic form of the
    # symmetric part (f1 equals the c-coefficient of the expanded form,
    # the tail weight b equals v1*g)
    t2c = 2.0 * v1 * v1 - 1.0
    f1 = -a11 * v1 - p1 + 2.0 * v1 * (a11 * v1 * v1 + v1 * (p1 + p2) + s1)
    g = (t2c / (2.0 * v1)) * ah1 + av
    nv2 = v1 * v1 + float(vh @ vh)
    vf = v1 * f1 + float(vh @ g)
    out = np.empty(v.size)
    out[0] = nv2 * f1 - vf * v1
    out[1:] = nv2 * g - vf * vh
    return out


def rhs_w(what, awork):
    """Time derivative of the trailing part of w = [1; what_tail].

    Input is the full w (leading entry exactly 1); output has length
    len(w) - 1.  The only division is by w^T w >= 1, so these coordinates
    have no breakdown hazard.
    """
    w = what
    if w.size == 1:
        return np.zeros(0)
    a = awork
    wh = w[1:]
    ah1 = a[1:, 0]
    aw = a @ w
    waw = float(w @ aw)
    wtw = 1.0 + float(wh @ wh)
    # aw[1:] = ah1 + (trailing block) @ wh, so the block matvec is free
    return (float(a[0, 0]) + float(wh @ ah1) - 2.0 * waw / wtw) * wh \
        - (0.5 * wtw) * ah1 + aw[1:]


def rhs_theta(angles, pi, awork):
    """Angle rates for one column's ordered rotator product G.

    The drive terms are the first column of G^T A G, formed by applying the
    rotators to vectors (G is never built); the triangular system of
    cosine products is then back-solved.  Any divisor product smaller than
    1e-8 in magnitude raises DivisionHazard.
    """
    q = angles.size
    if q == 0:
        return np.zeros(0)
    m = awork.shape[0]
    if _kernels.HAVE_NUMBA:
        out = np.empty(q)
        bad = _kernels.theta_rhs_fill(
            np.ascontiguousarray(awork), np.ascontiguousarray(angles),
            np.ascontiguousarray(pi[1:]), out,
        )
        if bad:
            raise DivisionHazard(
                "theta-coordinates: cosine product underflow"
            )
        return out
    ang = angles.tolist()
    pl = pi[1:].tolist() if not isinstance(pi, list) else pi[1:]
    cs = [0.0] * q
    sn = [0.0] * q
    z = [0.0] * m
    z0 = 1.0
    for k in range(q - 1, -1, -1):
        c = math.cos(ang[k])
        s = math.sin(ang[k])
        cs[k] = c
        sn[k] = s
        z[pl[k]] = s * z0
        z0 = c * z0
    z[0] = z0
    y = (awork @ z).tolist()
    y0 = y[0]
    alpha = [0.0] * q
    for k in range(q):
        j = pl[k]
        yj = y[j]
        c = cs[k]
        s = sn[k]
        alpha[k] = c * yj - s * y0
        y0 = c * y0 + s * yj
    run = 1.0
    for k in range(q - 1, -1, -1):
        if abs(run) < 1e-8:
            raise DivisionHazard(
                "theta-coordinates: cosine product underflow"
            )
        alpha[k] = alpha[k] / run
        run *= cs[k]
    return np.array(alpha)


def reflector_conjugate_with_rate(awork, vec, rate):
    """Full block P A P - P dP/dt for P = I - 2 vec vec^T / vec^T vec.

    dP/dt comes from differentiating the projector vec vec^T / vec^T vec
    with the supplied rate, which collapses P dP/dt to the rank-2 skew
    term (2/q)(vec rate^T - rate vec^T).
    """
    a = awork
    q = float(vec @ vec)
    b2 = 2.0 / q
    av = a @ vec
    va = vec @ a
    vav = float(vec @ av)
    left = b2 * (va + rate) - (4.0 * vav / (q * q)) * vec
    right = b2 * (av - rate)
    return a - np.outer(vec, left) - np.outer(right, vec)


def givens_conjugate_with_rate(awork, angles, angle_rates, pi):
    """Full block G^T A G - G^T dG/dt for the ordered rotator product G.

    G is assembled densely from the prefix-product structure; the rate term
    G^T dG/dt equals U - U^T where row pi[k+1] of U is the k-th rate times
    the suffix-transposed image of e1.
    """
    a = awork
    q = len(angles)
    if q == 0:
        return np.array(a, dtype=float, copy=True)
    m = a.shape[0]
    cs = np.cos(angles)
    sn = np.sin(angles)
    partners = pi[1:]
    g = linalg.rotations_matrix(cs, sn, partners, m)
    out = g.T @ (a @ g)
    u = np.zeros((m, m))
    w = np.zeros(m)
    w[0] = 1.0
    for k in range(q - 1, -1, -1):
        j = partners[k]
        np.multiply(w, angle_rates[k], out=u[j])
        w *= cs[k]
        w[j] -= sn[k]
    out -= u
    out += u.T
    return out


def reflector_conjugate_with_rate_many(blocks, vecs, rates):
    """Batched reflector_conjugate_with_rate: blocks (s, m, m), vecs and
    rates (s, m), one slot per stage abscissa."""
    q = np.einsum("sm,sm->s", vecs, vecs)
    av = np.matmul(blocks, vecs[:, :, None])[:, :, 0]
    va = np.matmul(vecs[:, None, :], blocks)[:, 0, :]
    vav = np.einsum("sm,sm->s", vecs, av)
    b2 = (2.0 / q)[:, None]
    left = b2 * (va + rates) - (4.0 * vav / (q * q))[:, None] * vecs
    right = b2 * (av - rates)
    return blocks - vecs[:, :, None] * left[:, None, :] \
        - right[:, :, None] * vecs[:, None, :]


def givens_matrices_many(cs, sn, partners, m):
    """Batched dense rotator products: cs, sn (s, q) -> (s, m, m)."""
    s = cs.shape[0]
    g = np.zeros((s, m, m))
    if _kernels.HAVE_NUMBA:
        _kernels.gmat_fill_many(g, cs, sn, np.ascontiguousarray(partners))
        return g
    z = np.zeros((s, m))
    z[:, 0] = 1.0
    for k in range(cs.shape[1]):
        j = partners[k]
        g[:, :, j] = -sn[:, k][:, None] * z
        g[:, j, j] = cs[:, k]
        z *= cs[:, k][:, None]
        z[:, j] = sn[:, k]
    g[:, :, 0] = z
    return g


def givens_conjugate_with_rate_many(blocks, angles, rates, pi):
    """Batched givens_conjugate_with_rate: blocks (s, m, m), angles and
    rates (s, q)."""
    qn = angles.shape[1]
    if qn == 0:
        return blocks.copy()
    s, m = blocks.shape[0], blocks.shape[1]
    cs = np.cos(angles)
    sn = np.sin(angles)
    partners = pi[1:]
    g = givens_matrices_many(cs, sn, partners, m)
    out = np.matmul(g.transpose(0, 2, 1), np.matmul(blocks, g))
    u = np.zeros((s, m, m))
    if _kernels.HAVE_NUMBA:
        _kernels.uskew_fill_many(
            u, cs, sn, np.ascontiguousarray(rates),
            np.ascontiguousarray(partners),
        )
    else:
        w = np.zeros((s, m))
        w[:, 0] = 1.0
        for k in range(qn - 1, -1, -1):
            j = partners[k]
            np.multiply(w, rates[:, k][:, None], out=u[:, j, :])
            w *= cs[:, k][:, None]
            w[:, j] -= sn[:, k]
    out -= u
    out += u.transpose(0, 2, 1)
    return out


def update_A_householder(awork, col_value, col_derivative, variant):
    """Working block for the next column: (P A P - P dP/dt) minus its first
    row and column.  col_value/col_derivative are one column's coordinates
    and their time derivative at the same abscissa (u-variant states carry
    rho in the last slot; it does not enter the reflector)."""
    if variant == "u":
        vec = col_value[:-1]
        rate = col_derivative[:-1]
    elif variant in ("v", "w"):
        vec = col_value
        rate = col_derivative
    else:
        raise ValueError(f"unknown Householder variant {variant!r}")
    if vec.size != awork.shape[0]:
        raise DimensionMismatch("coordinate length must match block size")
    return reflector_conjugate_with_rate(awork, vec, rate)[1:, 1:]


def update_A_givens(awork, angles, angle_rates, pi):
    """Working block for the next column: (G^T A G - G^T dG/dt) minus its
    first row and column."""
    if len(pi) != awork.shape[0]:
        raise DimensionMismatch("index array length must match block size")
    return givens_conjugate_with_rate(awork, angles, angle_rates, pi)[1:, 1:]


def rhs_qrflow(q, a):
    """Right-hand side of the direct matrix flow for Q.

    dQ/dt = A Q - Q Q^T A Q + Q S with S the skew completion of the
    strictly lower part of Q^T A Q; costs O(n^2 p).
    """
    aq = a @ q
    b = q.T @ aq
    low = np.tril(b, -1)
    s = low - low.T
    return aq - q @ (b - s)


def transformed_diag(frames, a, rates=None):
    """Leading diagonal entries of the transformed matrix Q^T A Q - Q^T dQ/dt.

    Entry i is the (1,1) entry of the i-th working block after the updates
    of columns 1..i-1; the column's own rate never contributes to its
    diagonal entry (the rate term is skew), so each entry is a quadratic
    form of the block with the column's leading transformed direction.
    rates supplies the coordinate derivatives consumed by the updates
    (zeros when omitted).
    """
    p = frames.p
    work = np.asarray(a, dtype=float)
    d = np.empty(p)
    is_theta = isinstance(frames, GivensFrames)
    for i in range(p):
        m = work.shape[0]
        if is_theta:
            ang = frames.angles[i]
            if ang.size:
                z = linalg.rotations_apply_e1(
                    np.cos(ang), np.sin(ang), frames.orders[i][1:], m
                )
            else:
                z = np.zeros(m)
                z[0] = 1.0
        else:
            z = linalg.reflector_first_column(frames.reflector_vector(i))
        d[i] = float(z @ (work @ z))
        if i < p - 1:
            if is_theta:
                ang = frames.angles[i]
                rate = rates[i] if rates is not None else np.zeros(ang.size)
                work = givens_conjugate_with_rate(
                    work, ang, rate, frames.orders[i]
                )[1:, 1:]
            else:
                val = frames.coords[i]
                rate = rates[i] if rates is not None else np.zeros(val.size)
                work = update_A_householder(work, val, rate, frames.variant)
    return d

"""Tight loops behind the rotator arithmetic.

The ordered rotator products touch two slots per factor, which is loop
code, not vector code; these kernels are jitted when numba is available
and fall back to the numpy formulations otherwise.  Results agree to
roundoff with the fallback paths (same arithmetic, same order).
"""

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def gmat_fill(g, cs, sn, partners):
    """Fill g with the dense ordered rotator product (single matrix)."""
    m = g.shape[0]
    q = cs.shape[0]
    z = np.zeros(m)
    z[0] = 1.0
    for k in range(q):
        j = partners[k]
        s = sn[k]
        c = cs[k]
        for r in range(m):
            g[r, j] = -s * z[r]
        g[j, j] = c
        for r in range(m):
            z[r] *= c
        z[j] = s
    for r in range(m):
        g[r, 0] = z[r]


@njit(cache=True)
def gmat_fill_many(g, cs, sn, partners):
    """Batched gmat_fill: g (s, m, m), cs/sn (s, q)."""
    for b in range(g.shape[0]):
        gmat_fill(g[b], cs[b], sn[b], partners)


@njit(cache=True)
def uskew_fill_many(u, cs, sn, rates, partners):
    """Rows of the rate term of the rotator-product update, batched.

    Row partners[k] of u[b] gets rates[b, k] times the suffix-transposed
    image of e1; the update's rate contribution is u - u^T.
    """
    nb, m = u.shape[0], u.shape[1]
    q = partners.shape[0]
    for b in range(nb):
        w = np.zeros(m)
        w[0] = 1.0
        for k in range(q - 1, -1, -1):
            j = partners[k]
            r = rates[b, k]
            for c_ in range(m):
                u[b, j, c_] = r * w[c_]
            c = cs[b, k]
            for c_ in range(m):
                w[c_] *= c
            w[j] = -sn[b, k]


@njit(cache=True)
def theta_rhs_fill(awork, ang, partners, out):
    """Angle rates for one rotator column; returns 1 on divisor underflow."""
    q = ang.shape[0]
    m = awork.shape[0]
    cs = np.empty(q)
    sn = np.empty(q)
    z = np.zeros(m)
    z0 = 1.0
    for k in range(q - 1, -1, -1):
        c = math.cos(ang[k])
        s = math.sin(ang[k])
        cs[k] = c
        sn[k] = s
        z[partners[k]] = s * z0
        z0 = c * z0
    z[0] = z0
    y = awork @ z
    y0 = y[0]
    for k in range(q):
        j = partners[k]
        yj = y[j]
        out[k] = cs[k] * yj - sn[k] * y0
        y0 = cs[k] * y0 + sn[k] * yj
    run = 1.0
    for k in range(q - 1, -1, -1):
        if abs(run) < 1e-8:
            return 1
        out[k] = out[k] / run
        run *= cs[k]
    return 0


def warmup():
    """Force compilation (or cache load) of all kernels."""
    if not HAVE_NUMBA:
        return
    g = np.zeros((2, 2))
    cs = np.ones(1)
    sn = np.zeros(1)
    partners = np.ones(1, dtype=np.int64)
    gmat_fill(g, cs, sn, partners)
    gmat_fill_many(np.zeros((1, 2, 2)), np.ones((1, 1)), np.zeros((1, 1)),
                   partners)
    uskew_fill_many(np.zeros((1, 2, 2)), np.ones((1, 1)), np.zeros((1, 1)),
                    np.zeros((1, 1)), partners)
    theta_rhs_fill(np.zeros((2, 2)), np.zeros(1), partners, np.zeros(1))

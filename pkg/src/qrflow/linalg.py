"""Dense real kernels: Householder reflectors, plane rotators, and modified
Gram-Schmidt orthonormalization.

A reflector with vector v acts as P = I - 2 v v^T / (v^T v).  P is never
formed: every application is one inner product plus one rank-1 update, so a
reflector costs O(dim * cols).  Rotators act in the (1, j) coordinate plane
and touch exactly two rows or columns.
"""

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, RankDeficient, ZeroColumn


def householder_vector_from(x, sign_rule="textbook"):
    """Reflector vector u and sign sigma with (I - 2uu^T/u^Tu) x = sigma*||x||*e1.

    The sign follows the cancellation-free textbook rule: sigma = -1 when the
    first component of x is >= 0, else +1, so |u[0]| = ||x|| + |x[0]| and the
    subtraction in u[0] never cancels.

    Raises ZeroColumn when ||x|| = 0.
    """
    if sign_rule != "textbook":
        raise ValueError(f"unknown sign rule {sign_rule!r}")
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DimensionMismatch("x must be a nonempty vector")
    nx = float(np.linalg.norm(x))
    if nx == 0.0:
        raise ZeroColumn("cannot reflect a zero column")
    sigma = -1.0 if x[0] >= 0.0 else 1.0
    u = x.copy()
    u[0] -= sigma * nx
    return u, sigma


def apply_reflector(u_or_w, variant, m, side="left"):
    """Apply P = I - 2 vv^T/v^Tv built from a u-, v-, or w-scaled vector.

    The variant only selects which scaling precondition is checked: a
    w-vector must have first entry exactly 1, a v-vector unit norm to 1e-8.
    Returns P @ m (side="left") or m @ P (side="right") without forming P.
    """
    vec = np.asarray(u_or_w, dtype=float)
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch("m must be a matrix")
    if variant == "w":
        if vec[0] != 1.0:
            raise ValueError("w-vector must have first entry exactly 1")
    elif variant == "v":
        if abs(np.linalg.norm(vec) - 1.0) > 1e-8:
            raise ValueError("v-vector must have unit norm")
    elif variant != "u":
        raise ValueError(f"unknown reflector variant {variant!r}")
    beta = 2.0 / float(vec @ vec)
    if side == "left":
        if m.shape[0] != vec.size:
            raise DimensionMismatch("vector length must match row count")
        return m - np.outer(vec, beta * (vec @ m))
    if side == "right":
        if m.shape[1] != vec.size:
            raise DimensionMismatch("vector length must match column count")
        return m - np.outer(m @ vec, beta * vec)
    raise ValueError(f"unknown side {side!r}")


def apply_rotator(theta, j, m, side="left"):
    """Apply the plane rotation G(theta) acting in coordinates (1, j).

    j is the 1-based partner index, 2 <= j <= acted dimension.  G has
    entries c at (1,1) and (j,j), -s at (1,j), +s at (j,1).  Sides:
    "left" is G @ m, "leftT" is G^T @ m, "right" is m @ G.
    """
    m = np.array(m, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch("m must be a matrix")
    dim = m.shape[0] if side in ("left", "leftT") else m.shape[1]
    if not 2 <= j <= dim:
        raise DimensionMismatch(f"rotator index {j} outside 2..{dim}")
    c = float(np.cos(theta))
    s = float(np.sin(theta))
    k = j - 1
    if side == "left":
        r0 = c * m[0] - s * m[k]
        rk = s * m[0] + c * m[k]
        m[0], m[k] = r0, rk
    elif side == "leftT":
        r0 = c * m[0] + s * m[k]
        rk = -s * m[0] + c * m[k]
        m[0], m[k] = r0, rk
    elif side == "right":
        c0 = c * m[:, 0] + s * m[:, k]
        ck = -s * m[:, 0] + c * m[:, k]
        m[:, 0], m[:, k] = c0, ck
    else:
        raise ValueError(f"unknown side {side!r}")
    return m


def mgs_orthonormalize(m):
    """Orthonormalize the columns of m by modified Gram-Schmidt.

    Columns are processed in order and each is orthogonalized against the
    already-finished columns one at a time (modified, not classical).
    Raises RankDeficient when a column norm falls below 1e-14 * ||m||_F.
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch("m must be a matrix")
    n, p = a.shape
    if p > n:
        raise DimensionMismatch("more columns than rows")
    scale = float(np.linalg.norm(a))
    for j in range(p):
        col = a[:, j]
        for i in range(j):
            col -= (a[:, i] @ col) * a[:, i]
        nrm = float(np.linalg.norm(col))
        if nrm < 1e-14 * scale:
            raise RankDeficient(f"column {j + 1} is numerically dependent")
        a[:, j] = col / nrm
    return a


# Internal helpers used by the hot paths.  They skip validation and work on
# raw float arrays.

def reflect_block(vec, block):
    """P @ block for the reflector built from vec (block: len(vec) x cols)."""
    return block - np.outer(vec, (2.0 / (vec @ vec)) * (vec @ block))


def reflector_first_column(vec):
    """First column of I - 2 vec vec^T / vec^T vec, i.e. P @ e1."""
    z = (-2.0 * vec[0] / (vec @ vec)) * vec
    z[0] += 1.0
    return z


def rotations_apply_e1(cos_t, sin_t, partners, m):
    """z = G e1 for G = R(partners[0]) R(partners[1]) ... applied to e1.

    Each R(j) rotates the (0, j) plane; partners are 0-based and distinct,
    so only two scalar slots change per factor.
    """
    z = np.zeros(m)
    z0 = 1.0
    for k in range(len(partners) - 1, -1, -1):
        z[partners[k]] = sin_t[k] * z0
        z0 = cos_t[k] * z0
    z[0] = z0
    return z


def rotations_apply_transpose(cos_t, sin_t, partners, y):
    """In-place y <- G^T y, applying the factors of G in reverse."""
    y0 = y[0]
    for k in range(len(partners)):
        j = partners[k]
        yj = y[j]
        c = cos_t[k]
        s = sin_t[k]
        y[j] = c * yj - s * y0
        y0 = c * y0 + s * yj
    y[0] = y0
    return y


def rotations_matrix(cos_t, sin_t, partners, m):
    """Dense G = R(partners[0]) ... R(partners[-1]), each in plane (0, j).

    Uses the prefix-product structure of the ordered factors: G e_j only
    involves the partial product of factors applied before plane j.
    """
    g = np.zeros((m, m))
    if _kernels.HAVE_NUMBA:
        _kernels.gmat_fill(
            g, np.asarray(cos_t, dtype=float), np.asarray(sin_t, dtype=float),
            np.asarray(partners, dtype=np.int64),
        )
        return g
    z = np.zeros(m)
    z[0] = 1.0
    for k in range(len(partners)):
        j = partners[k]
        np.multiply(z, -sin_t[k], out=g[:, j])
        g[j, j] = cos_t[k]
        z *= cos_t[k]
        z[j] = sin_t[k]
    g[:, 0] = z
    return g

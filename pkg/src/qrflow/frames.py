"""Factored coordinate charts for the orthonormal factor Q.

Q is kept as a product of elementary orthogonal transforms, one block per
column: Householder reflectors parametrized by u-, v-, or w-scaled vectors
plus a sign per column, or ordered products of plane rotators parametrized
by angles.  A chart is only a local parametrization; when its health test
fails the chart is exchanged for a fresh one representing the same Q
("reimbedding"), tracked entirely through the transforms without ever
reconstructing the underlying fundamental solution.

Sign conventions.  form_q returns the factor with positive R-diagonal: for
Householder charts each column is scaled by its sign, which makes
reimbedding an exact column-preserving chart change for both families.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import (
    DegenerateProbe,
    DegenerateReflector,
    DimensionMismatch,
    ZeroColumn,
)


@dataclass
class HouseholderFrames:
    """Reflector coordinates, one vector per column.

    coords[i] has length n-i for variants v and w (w stores the leading
    exact 1), and length n-i+1 for the u-variant, whose last slot carries
    rho_i = sigma_i * ||x_i|| as extra ODE state.
    """

    variant: str
    n: int
    p: int
    coords: list
    sigma: np.ndarray

    def with_coords(self, coords):
        return HouseholderFrames(self.variant, self.n, self.p, coords, self.sigma)

    def reflector_vector(self, i):
        c = self.coords[i]
        return c[:-1] if self.variant == "u" else c


@dataclass
class GivensFrames:
    """Rotator coordinates: per column an index array pi (0-based, pi[0]=0,
    largest-entry-first form) and the angles in application order."""

    n: int
    p: int
    angles: list
    orders: list

    def with_angles(self, angles):
        return GivensFrames(self.n, self.p, angles, self.orders)


@dataclass
class ReimbedWorkspace:
    """Inspection record of one reimbedding pass: the shrinking orthogonal
    accumulators K, the probe vectors, and the sign bookkeeping."""

    ks: list = field(default_factory=list)
    probes: list = field(default_factory=list)
    sigma_old: list = field(default_factory=list)
    sigma_new: list = field(default_factory=list)
    rebuilt: list = field(default_factory=list)


def init_householder(x0, variant):
    """Triangularize x0 by reflectors and return the chart it produces.

    Signs follow the textbook rule of householder_vector_from; v-vectors
    come out unit norm, w-vectors with leading entry exactly 1.
    """
    if variant not in ("u", "v", "w"):
        raise ValueError(f"unknown Householder variant {variant!r}")
    x = np.array(x0, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch("x0 must be a matrix")
    n, p = x.shape
    if p > n:
        raise DimensionMismatch("x0 must have at most as many columns as rows")
    coords = []
    sigma = np.empty(p)
    for i in range(p):
        try:
            u, s = linalg.householder_vector_from(x[i:, i])
        except ZeroColumn as exc:
            raise ZeroColumn(f"column {i + 1} of x0 is zero", column=i) from exc
        rho = s * float(np.linalg.norm(x[i:, i]))
        if variant == "u":
            coords.append(np.append(u, rho))
        elif variant == "v":
            coords.append(u / np.linalg.norm(u))
        else:
            w = u / u[0]
            w[0] = 1.0
            coords.append(w)
        sigma[i] = s
        x[i:, i:] = linalg.reflect_block(u, x[i:, i:])
    return HouseholderFrames(variant, n, p, coords, sigma)


def _column_rotations(y):
    """Largest-entry-first rotator order and angles taking y to ||y|| e1.

    Every partial product keeps a positive first component, so each angle is
    atan2 of (partner entry, current leading entry).
    """
    m = y.size
    if m == 1:
        return np.zeros(0), np.array([0])
    l = 1 + int(np.argmax(np.abs(y[1:])))
    order = np.array([0, l] + [j for j in range(1, m) if j != l])
    angles = np.empty(m - 1)
    y0 = float(y[0])
    for k in range(m - 1):
        j = order[k + 1]
        yj = float(y[j])
        angles[k] = math.atan2(yj, y0)
        y0 = math.hypot(y0, yj)
    return angles, order


def init_givens(x0):
    """Triangularize x0 by ordered plane rotators and return the chart.

    For each column the first rotator annihilates the largest entry below
    the diagonal; sign ambiguities are resolved by keeping the leading
    component positive, so the triangular factor has positive diagonal.
    """
    x = np.array(x0, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch("x0 must be a matrix")
    n, p = x.shape
    if p > n:
        raise DimensionMismatch("x0 must have at most as many columns as rows")
    angles = []
    orders = []
    for i in range(p):
        col = x[i:, i]
        if float(np.linalg.norm(col)) == 0.0:
            raise ZeroColumn(f"column {i + 1} of x0 is zero", column=i)
        ang, order = _column_rotations(col)
        angles.append(ang)
        orders.append(order)
        if ang.size:
            g = linalg.rotations_matrix(np.cos(ang), np.sin(ang), order[1:], n - i)
            x[i:, i:] = g.T @ x[i:, i:]
    return GivensFrames(n, p, angles, orders)


def frame_health(frames):
    """Per-column chart soundness test; True means the chart is safe to keep.

    Householder v: leading squared component dominates the rest;
    u: the reconstructed leading entry of x has the sign the current sigma
    assumes; w: squared tail mass at most 1.  Givens: every leading cosine
    product dominates the corresponding squared sine, which bounds the
    divisors of the angle equations away from zero.
    """
    if isinstance(frames, HouseholderFrames):
        out = np.empty(frames.p, dtype=bool)
        for i in range(frames.p):
            c = frames.coords[i]
            if frames.variant == "v":
                out[i] = c[0] * c[0] >= float(c[1:] @ c[1:])
            elif frames.variant == "w":
                out[i] = 1.0 - float(c[1:] @ c[1:]) >= 0.0
            else:
                u0 = c[0]
                rho = c[-1]
                s = frames.sigma[i]
                out[i] = s * (u0 + s * abs(rho)) < 0.0
        return out
    out = np.empty(frames.p, dtype=bool)
    for i in range(frames.p):
        a = frames.angles[i]
        if a.size <= 1:
            out[i] = True
            continue
        c2 = np.cos(a) ** 2
        s2 = np.sin(a) ** 2
        ok = True
        run = 1.0
        for k in range(1, a.size):
            run *= c2[k]
            if run < s2[k]:
                ok = False
                break
        out[i] = ok
    return out


def reimbed_householder(frames, at=0.0, force=False, workspace=None):
    """Exchange unhealthy Householder charts for fresh ones at a mesh point.

    Columns are kept verbatim while the accumulated chart change is still
    the identity and their health test passes; from the first rebuilt
    column onward every chart is rebuilt through the orthogonal
    accumulators K, choosing each new sign from the sign of the probe's
    leading entry.  The represented Q is unchanged column by column.
    """
    health = frame_health(frames)
    if not force and bool(health.all()):
        return frames
    n, p = frames.n, frames.p
    variant = frames.variant
    new_coords = []
    new_sigma = frames.sigma.copy()
    k_mat = None
    for i in range(p):
        m = n - i
        if k_mat is None and health[i] and not force:
            new_coords.append(frames.coords[i])
            if workspace is not None:
                workspace.rebuilt.append(False)
                workspace.ks.append(None)
                workspace.probes.append(None)
            continue
        vec_old = frames.reflector_vector(i)
        z = linalg.reflector_first_column(vec_old)
        y = z if k_mat is None else k_mat @ z
        ny = float(np.linalg.norm(y))
        if not np.isfinite(ny) or ny < 1e-8:
            raise DegenerateReflector(
                f"column {i + 1}: probe vector is numerically zero",
                column=i, t=at,
            )
        s_old = float(frames.sigma[i])
        s_new = -1.0 if s_old * y[0] >= 0.0 else 1.0
        d = s_old * y
        d[0] -= s_new
        v_new = d / np.linalg.norm(d)
        if (v_new[0] >= 0.0) != (vec_old[0] >= 0.0):
            v_new = -v_new
        if variant == "u":
            nx = abs(float(frames.coords[i][-1]))
            u_new = (-2.0 * s_new * nx * v_new[0]) * v_new
            new_coords.append(np.append(u_new, s_new * nx))
        elif variant == "v":
            new_coords.append(v_new)
        else:
            w_new = v_new / v_new[0]
            w_new[0] = 1.0
            new_coords.append(w_new)
        new_sigma[i] = s_new
        if i < p - 1:
            base = np.eye(m) if k_mat is None else k_mat
            t = base - np.outer(
                base @ vec_old, (2.0 / (vec_old @ vec_old)) * vec_old
            )
            t = linalg.reflect_block(v_new, t)
            k_mat = np.ascontiguousarray(t[1:, 1:])
        if workspace is not None:
            workspace.rebuilt.append(True)
            workspace.ks.append(None if i >= p - 1 else k_mat.copy())
            workspace.probes.append(y)
            workspace.sigma_old.append(s_old)
            workspace.sigma_new.append(s_new)
    return HouseholderFrames(variant, n, p, new_coords, new_sigma)


def reimbed_givens(frames, at=0.0, force=False, workspace=None):
    """Exchange unhealthy rotator charts for fresh ones at a mesh point.

    The probe for column i is the accumulated image of the old chart's
    leading column; a fresh largest-entry-first order and fresh angles are
    drawn from it, and the accumulators K are threaded through all rebuilt
    columns.  The represented Q is unchanged column by column.
    """
    health = frame_health(frames)
    if not force and bool(health.all()):
        return frames
    n, p = frames.n, frames.p
    new_angles = []
    new_orders = []
    k_mat = None
    for i in range(p):
        m = n - i
        if k_mat is None and health[i] and not force:
            new_angles.append(frames.angles[i])
            new_orders.append(frames.orders[i])
            if workspace is not None:
                workspace.rebuilt.append(False)
                workspace.ks.append(None)
                workspace.probes.append(None)
            continue
        ang = frames.angles[i]
        order = frames.orders[i]
        cs = np.cos(ang)
        sn = np.sin(ang)
        z = linalg.rotations_apply_e1(cs, sn, order[1:], m)
        probe = z if k_mat is None else k_mat @ z
        nw = float(np.linalg.norm(probe))
        if not np.isfinite(nw) or abs(nw - 1.0) > 1e-8:
            raise DegenerateProbe(
                f"column {i + 1}: probe norm {nw!r} is not 1",
                column=i, t=at,
            )
        ang_new, order_new = _column_rotations(probe)
        new_angles.append(ang_new)
        new_orders.append(order_new)
        if i < p - 1:
            base = np.eye(m) if k_mat is None else k_mat
            g_old = linalg.rotations_matrix(cs, sn, order[1:], m)
            g_new = linalg.rotations_matrix(
                np.cos(ang_new), np.sin(ang_new), order_new[1:], m
            )
            t = g_new.T @ (base @ g_old)
            k_mat = np.ascontiguousarray(t[1:, 1:])
        if workspace is not None:
            workspace.rebuilt.append(True)
            workspace.ks.append(None if i >= p - 1 else k_mat.copy())
            workspace.probes.append(probe)
    return GivensFrames(n, p, new_angles, new_orders)


def reimbed(frames, at=0.0, force=False, workspace=None):
    if isinstance(frames, HouseholderFrames):
        return reimbed_householder(frames, at=at, force=force, workspace=workspace)
    return reimbed_givens(frames, at=at, force=force, workspace=workspace)


def form_q(frames, cols=None):
    """Assemble the leading columns of the represented orthonormal factor.

    Orthonormality is structural: whatever the coordinate values, the
    output is a product of exact reflector/rotator applications to an
    orthonormal seed.  Householder columns are scaled by their signs so
    the result is the positive-R-diagonal factor, matching the rotator
    convention.
    """
    if cols is None:
        cols = frames.p
    if cols > frames.p:
        raise DimensionMismatch(f"cols={cols} exceeds p={frames.p}")
    n = frames.n
    q = np.zeros((n, cols))
    if isinstance(frames, HouseholderFrames):
        for i in range(cols):
            q[i, i] = frames.sigma[i]
        for i in range(cols - 1, -1, -1):
            vec = frames.reflector_vector(i)
            q[i:, i:] = linalg.reflect_block(vec, q[i:, i:])
        return q
    for i in range(cols):
        q[i, i] = 1.0
    for i in range(cols - 1, -1, -1):
        ang = frames.angles[i]
        if ang.size:
            g = linalg.rotations_matrix(
                np.cos(ang), np.sin(ang), frames.orders[i][1:], n - i
            )
            q[i:, i:] = g @ q[i:, i:]
    return q

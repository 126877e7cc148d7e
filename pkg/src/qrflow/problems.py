"""Built-in benchmark problems and the factor-error metric.

Each problem bundles a coefficient-matrix provider A(t), the initial data
X0 whose orthonormal factor is tracked, the integration interval used in
the benchmarks, and, when available, a closed-form factor for error
measurement and a reference for the transformed diagonal.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch
from .linalg import mgs_orthonormalize


@dataclass
class ProblemSpec:
    label: str
    n: int
    p: int
    t0: float
    tf: float
    coeff: Callable[[float], np.ndarray]
    x0: np.ndarray
    exact_q: Optional[Callable[[float], np.ndarray]] = None
    diag_reference: Optional[Callable[[float], np.ndarray]] = None
    seed: Optional[int] = None


def q_error(qc, qe):
    """Largest columnwise deviation between two factors, sign-insensitive.

    Column signs depend on the triangularization convention, so each column
    is compared against both orientations: max_j min(||qc_j - qe_j||_inf,
    ||qc_j + qe_j||_inf).
    """
    qc = np.asarray(qc, dtype=float)
    qe = np.asarray(qe, dtype=float)
    if qc.shape != qe.shape:
        raise DimensionMismatch(f"shape {qc.shape} vs {qe.shape}")
    diff = np.abs(qc - qe).max(axis=0)
    summ = np.abs(qc + qe).max(axis=0)
    return float(np.minimum(diff, summ).max())


def example1(alpha=100.0, beta=100.0):
    """Exponentially dichotomic, fast rotating 2x2 problem on [0, 10].

    The fundamental solution is a rotation at rate alpha times
    diag(exp(beta t), -exp(-beta t)), so the factor spins quickly while the
    triangular part splits exponentially.
    """
    a, b = float(alpha), float(beta)

    def coeff(t):
        c2 = math.cos(2.0 * a * t)
        s2 = math.sin(2.0 * a * t)
        return np.array([
            [b * c2, -a + b * s2],
            [a + b * s2, -b * c2],
        ])

    def exact_q(t):
        c = math.cos(a * t)
        s = math.sin(a * t)
        return np.array([[c, s], [s, -c]])

    return ProblemSpec("example1", 2, 2, 0.0, 10.0, coeff, np.eye(2), exact_q)


def example2(alpha=100.0):
    """Slow rotation driven by a stiff scalar phase, on [0, 10].

    A(t) = alpha (phase(t) - sin t) J with J the 2x2 skew generator; the
    factor is the rotation by the phase itself.
    """
    a = float(alpha)
    c0 = a / (1.0 + a * a)

    def phase(t):
        return c0 * (math.exp(-a * t) + a * math.sin(t) - math.cos(t))

    def coeff(t):
        f = a * (phase(t) - math.sin(t))
        return np.array([[0.0, f], [-f, 0.0]])

    def exact_q(t):
        th = phase(t)
        c = math.cos(th)
        s = math.sin(th)
        return np.array([[c, -s], [s, c]])

    return ProblemSpec("example2", 2, 2, 0.0, 10.0, coeff, np.eye(2), exact_q)


def example3(epsilon=1e-2):
    """Stiff 4x4 coefficient matrix from a two-point boundary value problem
    with boundary and interior layers, on [-1, 1].  No closed-form factor."""
    e = float(epsilon)

    def coeff(t):
        return np.array([
            [0.0, 0.0, 1.0, 0.0],
            [t / (2.0 * e), 0.0, 1.0, 0.5],
            [1.0 / e, 0.0, 0.0, 0.0],
            [0.0, 1.0 / e, 1.0 / e, -t / (2.0 * e)],
        ])

    return ProblemSpec("example3", 4, 4, -1.0, 1.0, coeff, np.eye(4))


def _rot2(gamma, t):
    c = math.cos(gamma * t)
    s = math.sin(gamma * t)
    return np.array([[c, s], [-s, c]])


def _rot2_dt(gamma, t):
    c = math.cos(gamma * t)
    s = math.sin(gamma * t)
    return gamma * np.array([[-s, c], [-c, -s]])


def example4(alpha=1.0, beta=math.sqrt(2.0)):
    """4x4 problem with a known rotating factor, on [0, 100].

    A(t) = Q D Q^T + Qdot Q^T where D = diag(1, cos t, -1/(2 sqrt(t+1)), -10)
    and Q(t) is a product of two commuting-block rotations; the transformed
    diagonal equals D exactly along the true factor.
    """
    a, b = float(alpha), float(beta)

    def d_diag(t):
        return np.array([1.0, math.cos(t), -0.5 / math.sqrt(t + 1.0), -10.0])

    def q_of(t):
        b1 = np.eye(4)
        b1[1:3, 1:3] = _rot2(b, t)
        b2 = np.zeros((4, 4))
        b2[:2, :2] = _rot2(a, t)
        b2[2:, 2:] = _rot2(a, t)
        return b1 @ b2

    def qdot_of(t):
        b1 = np.eye(4)
        b1[1:3, 1:3] = _rot2(b, t)
        db1 = np.zeros((4, 4))
        db1[1:3, 1:3] = _rot2_dt(b, t)
        b2 = np.zeros((4, 4))
        b2[:2, :2] = _rot2(a, t)
        b2[2:, 2:] = _rot2(a, t)
        db2 = np.zeros((4, 4))
        db2[:2, :2] = _rot2_dt(a, t)
        db2[2:, 2:] = _rot2_dt(a, t)
        return db1 @ b2 + b1 @ db2

    def coeff(t):
        q = q_of(t)
        return (q * d_diag(t)) @ q.T + qdot_of(t) @ q.T

    return ProblemSpec(
        "example4", 4, 4, 0.0, 100.0, coeff, np.eye(4),
        exact_q=q_of, diag_reference=d_diag,
    )


def example5(random_q0=False, seed=None):
    """Diagonal 4x4 coefficient matrix on [0, 100].

    With the identity start the factor is constant; a seeded random
    orthonormal start exercises the reordering of the transformed diagonal
    toward decreasing growth rates, whose reference ordering is
    diag(1, cos t, -1/(2 sqrt(t+1)), -10).
    """

    def coeff(t):
        return np.diag([-0.5 / math.sqrt(t + 1.0), -10.0, math.cos(t), 1.0])

    def diag_reference(t):
        return np.array([1.0, math.cos(t), -0.5 / math.sqrt(t + 1.0), -10.0])

    if random_q0:
        rng = np.random.default_rng(seed)
        x0 = mgs_orthonormalize(rng.uniform(-1.0, 1.0, size=(4, 4)))
    else:
        x0 = np.eye(4)
    return ProblemSpec(
        "example5", 4, 4, 0.0, 100.0, coeff, x0,
        diag_reference=diag_reference, seed=seed,
    )


def frank_matrix(n):
    """Upper Hessenberg Frank matrix: row i holds n-j+1 for j >= i (1-based),
    n-i+1 on the subdiagonal, zeros below."""
    a = np.zeros((n, n))
    for i in range(n):
        a[i, i:] = np.arange(n - i, 0, -1)
        if i > 0:
            a[i, i - 1] = float(n - i)
    return a


# Real parts of the 13 leading eigenvalues of the 25x25 Frank matrix, to the
# four digits used as benchmark references.
FRANK25_LEADING_REAL = np.array([
    77.9837, 60.5984, 47.7777, 37.5667, 29.2021, 22.2856, 16.5772,
    11.9193, 8.2006, 5.3359, 3.2479, 1.8495, 1.1841,
])


def example6(n=25, p=13):
    """Constant Frank-matrix flow on [0, 100].

    The transformed diagonal converges to the real parts of the p leading
    eigenvalues (isospectral behaviour); the 25x25 references are stored to
    four digits, other sizes fall back to a dense eigensolve.
    """
    n = int(n)
    p = int(p)
    if not 1 <= p <= n:
        raise DimensionMismatch(f"need 1 <= p <= n, got n={n} p={p}")
    a = frank_matrix(n)
    if n == 25 and p <= FRANK25_LEADING_REAL.size:
        ref = FRANK25_LEADING_REAL[:p].copy()
    else:
        ref = np.sort(np.linalg.eigvals(a).real)[::-1][:p]

    def coeff(t):
        return a.copy()

    def diag_reference(t):
        return ref

    x0 = np.zeros((n, p))
    x0[:p, :p] = np.eye(p)
    return ProblemSpec(
        "example6", n, p, 0.0, 100.0, coeff, x0, diag_reference=diag_reference,
    )


def zero_problem(n=2, p=2):
    """A(t) = 0 smoke problem: the factor never moves."""

    def coeff(t):
        return np.zeros((n, n))

    def exact_q(t):
        q = np.zeros((n, p))
        q[:p, :p] = np.eye(p)
        return q

    x0 = np.zeros((n, p))
    x0[:p, :p] = np.eye(p)
    return ProblemSpec("zero", n, p, 0.0, 1.0, coeff, x0, exact_q=exact_q)

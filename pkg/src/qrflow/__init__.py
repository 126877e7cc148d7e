"""Orthonormal integrators for QR flows on the Stiefel manifold.

The orthonormal factor of a fundamental solution is evolved in factored
coordinates (Householder u/v/w vectors or ordered Givens angles) with
chart health checks and reimbedding, stepped column by column with
embedded explicit Runge-Kutta pairs and early step rejection.
"""

from .errors import (
    ConfigError,
    DegenerateProbe,
    DegenerateReflector,
    DimensionMismatch,
    DivisionHazard,
    IntegrationFailure,
    NonFiniteState,
    QRFlowError,
    RankDeficient,
    StepsizeUnderflow,
    ZeroColumn,
)
from .frames import (
    GivensFrames,
    HouseholderFrames,
    ReimbedWorkspace,
    form_q,
    frame_health,
    init_givens,
    init_householder,
    reimbed,
    reimbed_givens,
    reimbed_householder,
)
from .integrate import (
    DP5,
    RK38,
    PAIRS,
    ButcherPair,
    IntegrationConfig,
    IntegrationResult,
    LyapunovAccumulator,
    RunStats,
    StepRecord,
    attempt_step,
    controller_next_h,
    integrate,
    integrate_projected,
    lyapunov_accumulate,
    make_frames,
    step_column,
)
from .linalg import (
    apply_reflector,
    apply_rotator,
    householder_vector_from,
    mgs_orthonormalize,
)
from .problems import (
    FRANK25_LEADING_REAL,
    ProblemSpec,
    example1,
    example2,
    example3,
    example4,
    example5,
    example6,
    frank_matrix,
    q_error,
    zero_problem,
)
from .flows import (
    rhs_qrflow,
    rhs_theta,
    rhs_u,
    rhs_v,
    rhs_w,
    transformed_diag,
    update_A_givens,
    update_A_householder,
)

__all__ = [name for name in dir() if not name.startswith("_")]

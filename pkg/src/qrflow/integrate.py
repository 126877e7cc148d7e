"""Embedded Runge-Kutta pairs and the column-sequential drivers.

One integration step advances the columns of the factored Q in order; the
working coefficient block for column i at every stage abscissa is produced
from the stage values and stage rates of columns 1..i-1, so the updates
cost no extra right-hand-side evaluations.  In adaptive mode the scaled
error of each column is tested as soon as the column finishes, and the
step is rejected without ever touching the remaining columns.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import flows, linalg
from .errors import (
    ConfigError,
    DivisionHazard,
    NonFiniteState,
    StepsizeUnderflow,
    ZeroColumn,
)
from .frames import (
    GivensFrames,
    HouseholderFrames,
    form_q,
    frame_health,
    init_givens,
    init_householder,
    reimbed,
)
from .problems import q_error

SAFETY = 0.8
GROWTH_CAP = 4.0
SHRINK_FLOOR = 0.1

METHODS = ("u", "v", "w", "theta", "projected")


@dataclass(frozen=True)
class ButcherPair:
    """Explicit embedded pair: abscissas c, strictly lower coefficient rows,
    propagating weights b of order q+1, embedded weights bhat of order q.

    Both built-in pairs carry one extra stage at c=1 whose row equals b,
    used only by the embedded estimate (first-same-as-last layout)."""

    name: str
    c: tuple
    a: tuple
    b: tuple
    bhat: tuple
    orders: tuple

    def __post_init__(self):
        s = len(self.c)
        if not (len(self.a) == len(self.b) == len(self.bhat) == s):
            raise ConfigError("inconsistent tableau sizes")
        for i, row in enumerate(self.a):
            if len(row) > i:
                raise ConfigError("coefficient matrix must be strictly lower")
            if abs(sum(row) - self.c[i]) > 1e-12:
                raise ConfigError(f"row {i} sum does not match abscissa")
        if abs(sum(self.b) - 1.0) > 1e-12 or abs(sum(self.bhat) - 1.0) > 1e-12:
            raise ConfigError("weights must sum to 1")
        object.__setattr__(self, "a_arrs",
                           tuple(np.asarray(row) for row in self.a))
        object.__setattr__(self, "b_arr", np.asarray(self.b))
        object.__setattr__(self, "d_arr",
                           np.asarray(self.b) - np.asarray(self.bhat))

    @property
    def stages(self):
        return len(self.c)

    @property
    def error_order(self):
        return self.orders[1]


RK38 = ButcherPair(
    "rk38",
    c=(0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0),
    a=(
        (),
        (1.0 / 3.0,),
        (-1.0 / 3.0, 1.0),
        (1.0, -1.0, 1.0),
        (1.0 / 8.0, 3.0 / 8.0, 3.0 / 8.0, 1.0 / 8.0),
    ),
    b=(1.0 / 8.0, 3.0 / 8.0, 3.0 / 8.0, 1.0 / 8.0, 0.0),
    bhat=(1.0 / 12.0, 1.0 / 2.0, 1.0 / 4.0, 0.0, 1.0 / 6.0),
    orders=(4, 3),
)

DP5 = ButcherPair(
    "dp5",
    c=(0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0),
    a=(
        (),
        (1.0 / 5.0,),
        (3.0 / 40.0, 9.0 / 40.0),
        (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
        (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0,
         -212.0 / 729.0),
        (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
         -5103.0 / 18656.0),
        (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0,
         -2187.0 / 6784.0, 11.0 / 84.0),
    ),
    b=(35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
       11.0 / 84.0, 0.0),
    bhat=(5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0,
          -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0),
    orders=(5, 4),
)

PAIRS = {"rk38": RK38, "dp5": DP5}


@dataclass
class IntegrationConfig:
    method: str = "theta"
    pair: str = "dp5"
    mode: str = "adaptive"
    h: Optional[float] = None
    tol: Optional[float] = None
    t0: Optional[float] = None
    tf: Optional[float] = None
    safety: float = SAFETY
    growth_cap: float = GROWTH_CAP
    shrink_floor: float = SHRINK_FLOOR
    h_min: Optional[float] = None

    def resolve(self, problem):
        """Fill interval defaults from the problem and check consistency."""
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.mode not in ("fixed", "adaptive"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        pair = self.pair if isinstance(self.pair, ButcherPair) else \
            PAIRS.get(self.pair)
        if pair is None:
            raise ConfigError(f"unknown pair {self.pair!r}")
        if self.mode == "fixed":
            if self.h is None or self.tol is not None:
                raise ConfigError("fixed mode takes h and no tol")
            if not self.h > 0:
                raise ConfigError("h must be positive")
        else:
            if self.tol is None or self.h is not None:
                raise ConfigError("adaptive mode takes tol and no h")
            if not self.tol > 0:
                raise ConfigError("tol must be positive")
        t0 = problem.t0 if self.t0 is None else float(self.t0)
        tf = problem.tf if self.tf is None else float(self.tf)
        if not t0 < tf:
            raise ConfigError(f"need t0 < tf, got [{t0}, {tf}]")
        return pair, t0, tf


@dataclass
class RunStats:
    """Counters of one run: reimbeddings, rejections (total and by column),
    accepted steps, right-hand-side evaluations by column, wall seconds,
    and the factor error at tf when an exact factor is known."""

    err: Optional[float] = None
    reimb: int = 0
    rejs: int = 0
    rejs_per_column: np.ndarray = None
    nsteps: int = 0
    wall: float = 0.0
    rhs_evals: np.ndarray = None
    seed: Optional[int] = None


@dataclass
class StepRecord:
    """Data handed to the step hook after each accepted step."""

    t: float
    h: float
    frames: object
    errs: Optional[np.ndarray]
    stage_diags: Optional[np.ndarray]
    mesh_diag: Optional[np.ndarray]
    stage_coords: Optional[list] = None


@dataclass
class StepOutcome:
    accepted: bool
    frames: object = None
    errs: Optional[np.ndarray] = None
    failed_col: Optional[int] = None
    hazard: bool = False
    stage_diags: Optional[np.ndarray] = None
    stage_coords: Optional[list] = None


def _column_rhs(method, y, block, order):
    if method == "theta":
        return flows.rhs_theta(y, order, block)
    if method == "u":
        return flows.rhs_u(y, block)
    if method == "v":
        return flows.rhs_v(y, block)
    out = np.empty(y.size)
    out[0] = 0.0
    out[1:] = flows.rhs_w(y, block)
    return out


def _is_static(method, y):
    # trailing 1x1 blocks: no angle state / a fixed scalar reflector
    if method == "theta":
        return y.size == 0
    return method in ("v", "w") and y.size == 1


def _unit_column(method, y, order, m):
    if method == "theta":
        if y.size == 0:
            z = np.zeros(m)
            z[0] = 1.0
            return z
        return linalg.rotations_apply_e1(np.cos(y), np.sin(y), order[1:], m)
    vec = y[:-1] if method == "u" else y
    return linalg.reflector_first_column(vec)


def step_column(frames, col, stage_blocks, t, h, pair, n_stages=None,
                stats=None):
    """Advance one column over [t, t+h] with the explicit pair.

    stage_blocks[s] must be the working block for this column at abscissa
    t + c_s h, already updated by all earlier columns.  Returns (new
    coordinates, stage values, stage rates, delta) where delta is the
    difference between the propagated and embedded solutions (None when
    the embedded estimate was not evaluated).
    """
    if isinstance(frames, GivensFrames):
        method = "theta"
        order = frames.orders[col]
        y0 = frames.angles[col]
    else:
        method = frames.variant
        order = None
        y0 = frames.coords[col]
    ns = pair.stages if n_stages is None else n_stages
    if _is_static(method, y0):
        return y0, [y0] * ns, None, np.zeros(y0.size)
    a_rows = pair.a_arrs
    values = []
    karr = np.empty((ns, y0.size))
    for s in range(ns):
        if s == 0:
            ys = y0
        else:
            ys = y0 + h * (a_rows[s] @ karr[:s])
        if stats is not None:
            stats.rhs_evals[col] += 1
        karr[s] = _column_rhs(method, ys, stage_blocks[s], order)
        values.append(ys)
    y1 = y0 + h * (pair.b_arr[:ns] @ karr)
    delta = None
    if ns == pair.stages:
        delta = h * (pair.d_arr @ karr)
    return y1, values, karr, delta


def attempt_step(frames, coeff, t, h, pair, tol=None, mode="adaptive",
                 stats=None, want_diag=False, keep_stage_coords=False):
    """Try one step for all columns in order, rejecting early.

    In adaptive mode the scaled error e_i = max |delta| / (tol (1 + |y|))
    is evaluated right after column i; e_i > 1 rejects the step without
    evaluating anything for columns i+1..p.  A DivisionHazard inside a
    stage is converted to a rejection flagged as hazard.  On success the
    post-step normalization (v renormalization, angle wrapping) is applied.
    """
    adaptive = mode == "adaptive"
    if adaptive and (tol is None or not tol > 0):
        raise ConfigError("adaptive stepping needs a positive tol")
    is_theta = isinstance(frames, GivensFrames)
    method = "theta" if is_theta else frames.variant
    p = frames.p
    n = frames.n
    ns = pair.stages if (adaptive or want_diag) else pair.stages - 1
    blocks = np.empty((ns, n, n))
    seen = {}
    for s in range(ns):
        cs = pair.c[s]
        if cs in seen:
            blocks[s] = blocks[seen[cs]]
        else:
            seen[cs] = s
            blocks[s] = coeff(t + cs * h)
    errs = np.zeros(p)
    new_coords = []
    diags = np.empty((ns, p)) if want_diag else None
    kept = [] if keep_stage_coords else None
    # overflowing trajectories (the u-instability) produce non-finite stage
    # values that the error test converts into rejections; keep them silent
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for i in range(p):
            order = frames.orders[i] if is_theta else None
            try:
                y1, values, rates, delta = step_column(
                    frames, i, blocks, t, h, pair, n_stages=ns, stats=stats
                )
            except DivisionHazard:
                if not adaptive:
                    raise
                return StepOutcome(False, failed_col=i, hazard=True,
                                   errs=errs)
            if adaptive:
                y0 = frames.angles[i] if is_theta else frames.coords[i]
                if delta is None or delta.size == 0:
                    err = 0.0
                else:
                    # mixed absolute/relative scale tol*(1+max(|y0|,|y1|))
                    err = float(np.max(np.abs(delta) / (
                        tol * (1.0 + np.maximum(np.abs(y0), np.abs(y1)))
                    )))
                errs[i] = err
                if not err <= 1.0:
                    return StepOutcome(False, failed_col=i, errs=errs)
            new_coords.append(y1)
            if keep_stage_coords:
                kept.append(values)
            if want_diag:
                m = blocks.shape[1]
                for s in range(ns):
                    z = _unit_column(method, values[s], order, m)
                    diags[s, i] = float(z @ (blocks[s] @ z))
            if i < p - 1:
                vals = np.stack(values)
                if is_theta:
                    full = flows.givens_conjugate_with_rate_many(
                        blocks, vals, rates, order
                    )
                elif method == "u":
                    full = flows.reflector_conjugate_with_rate_many(
                        blocks, vals[:, :-1], rates[:, :-1]
                    )
                else:
                    full = flows.reflector_conjugate_with_rate_many(
                        blocks, vals, rates
                    )
                blocks = np.ascontiguousarray(full[:, 1:, 1:])
    if is_theta:
        wrapped = [
            np.arctan2(np.sin(a), np.cos(a)) if a.size else a
            for a in new_coords
        ]
        new_frames = frames.with_angles(wrapped)
    elif frames.variant == "v":
        new_frames = frames.with_coords(
            [c / np.linalg.norm(c) for c in new_coords]
        )
    else:
        new_frames = frames.with_coords(new_coords)
    return StepOutcome(
        True, frames=new_frames, errs=errs if adaptive else None,
        stage_diags=diags, stage_coords=kept,
    )


def controller_next_h(h, err, q, accepted, safety=SAFETY,
                      growth_cap=GROWTH_CAP, shrink_floor=SHRINK_FLOOR):
    """Next step size from the TOL-scaled error (accept threshold 1).

    h * clamp(safety * err^(-1/(q+1)), shrink_floor, cap) with cap the
    growth cap after an accepted step and 1 after a rejection (the step
    never grows out of a rejection).  Non-finite or zero errors map to the
    appropriate clamp end.
    """
    if accepted:
        cap = growth_cap
        fac = growth_cap if (not math.isfinite(err) or err <= 0.0) \
            else safety * err ** (-1.0 / (q + 1))
    else:
        cap = 1.0
        fac = shrink_floor if (not math.isfinite(err) or err <= 0.0) \
            else safety * err ** (-1.0 / (q + 1))
    return h * min(cap, max(shrink_floor, fac))


def make_frames(problem, method):
    if method == "theta":
        return init_givens(problem.x0)
    return init_householder(problem.x0, method)


@dataclass
class IntegrationResult:
    frames: object
    stats: RunStats
    q: np.ndarray = None


def integrate(problem, config, step_hook=None, keep_stage_coords=False):
    """Drive one factored-coordinate run from t0 to tf.

    Loop per mesh point: chart health check and reimbedding if needed
    (counting each failed column), then step attempts with the controller
    until acceptance, then the post-step hook.  The final step is clipped
    to land exactly on tf.  Raises StepsizeUnderflow / NonFiniteState /
    ZeroColumn with (t, column) context on failure.
    """
    if config.method == "projected":
        return integrate_projected(problem, config, step_hook=step_hook)
    pair, t0, tf = config.resolve(problem)
    p = problem.p
    stats = RunStats(
        rejs_per_column=np.zeros(p, dtype=int),
        rhs_evals=np.zeros(p, dtype=int),
        seed=problem.seed,
    )
    wall0 = time.perf_counter()
    try:
        frames = make_frames(problem, config.method)
    except ZeroColumn as exc:
        exc.t = t0
        raise
    span = tf - t0
    h_min = 1e-14 * span if config.h_min is None else config.h_min
    q_est = pair.error_order
    adaptive = config.mode == "adaptive"
    if adaptive:
        h = min(config.tol ** (1.0 / (q_est + 1)), 0.5 * span)
    else:
        h = config.h
    want_diag = step_hook is not None
    t = t0
    while tf - t > 1e-12 * span:
        health = frame_health(frames)
        nbad = int(frames.p - health.sum())
        if nbad:
            stats.reimb += nbad
            frames = reimbed(frames, at=t)
        h_step = min(h, tf - t)
        while True:
            outcome = attempt_step(
                frames, problem.coeff, t, h_step, pair,
                tol=config.tol, mode=config.mode, stats=stats,
                want_diag=want_diag, keep_stage_coords=keep_stage_coords,
            )
            if outcome.accepted:
                break
            fc = outcome.failed_col
            stats.rejs += 1
            stats.rejs_per_column[fc] += 1
            if outcome.hazard:
                h_step = 0.5 * h_step
            else:
                h_step = controller_next_h(
                    h_step, float(outcome.errs[fc]), q_est, accepted=False,
                    safety=config.safety, growth_cap=config.growth_cap,
                    shrink_floor=config.shrink_floor,
                )
            if h_step < h_min:
                raise StepsizeUnderflow(
                    f"step size {h_step:.3e} below floor {h_min:.3e}",
                    t=t, column=fc,
                )
        t = t + h_step
        frames = outcome.frames
        stats.nsteps += 1
        if adaptive:
            h = controller_next_h(
                h_step, float(np.max(outcome.errs)), q_est, accepted=True,
                safety=config.safety, growth_cap=config.growth_cap,
                shrink_floor=config.shrink_floor,
            )
        else:
            h = config.h
            coords = frames.angles if isinstance(frames, GivensFrames) \
                else frames.coords
            for i, c in enumerate(coords):
                if c.size and not np.isfinite(c).all():
                    raise NonFiniteState(
                        "coordinates overflowed", t=t, column=i
                    )
        if step_hook is not None:
            mesh = outcome.stage_diags[-1] if outcome.stage_diags is not None \
                else None
            step_hook(StepRecord(
                t=t, h=h_step, frames=frames, errs=outcome.errs,
                stage_diags=outcome.stage_diags, mesh_diag=mesh,
                stage_coords=outcome.stage_coords,
            ))
    stats.wall = time.perf_counter() - wall0
    qf = form_q(frames)
    if problem.exact_q is not None:
        stats.err = q_error(qf, problem.exact_q(tf))
    return IntegrationResult(frames=frames, stats=stats, q=qf)


def integrate_projected(problem, config, step_hook=None):
    """Direct integration of the matrix flow with per-step reorthonormalization.

    The error is controlled on the unprojected solution (one projection per
    accepted step, by modified Gram-Schmidt).  The transformed-diagonal
    samples handed to the hook are the quadratic forms q_i^T A q_i of the
    projected factor at the mesh point.
    """
    pair, t0, tf = config.resolve(problem)
    stats = RunStats(
        rejs_per_column=np.zeros(1, dtype=int),
        rhs_evals=np.zeros(1, dtype=int),
        seed=problem.seed,
    )
    wall0 = time.perf_counter()
    y = linalg.mgs_orthonormalize(problem.x0)
    span = tf - t0
    h_min = 1e-14 * span if config.h_min is None else config.h_min
    q_est = pair.error_order
    adaptive = config.mode == "adaptive"
    if adaptive:
        h = min(config.tol ** (1.0 / (q_est + 1)), 0.5 * span)
    else:
        h = config.h
    ns_all = pair.stages
    t = t0
    while tf - t > 1e-12 * span:
        h_step = min(h, tf - t)
        while True:
            ns = ns_all if adaptive else ns_all - 1
            rates = []
            for s in range(ns):
                if s == 0:
                    ys = y
                else:
                    row = pair.a[s]
                    acc = None
                    for j in range(s):
                        aj = row[j]
                        if aj != 0.0:
                            acc = aj * rates[j] if acc is None \
                                else acc + aj * rates[j]
                    ys = y if acc is None else y + h_step * acc
                stats.rhs_evals[0] += 1
                rates.append(flows.rhs_qrflow(
                    ys, np.asarray(problem.coeff(t + pair.c[s] * h_step),
                                   dtype=float)
                ))
            acc = None
            for s in range(ns):
                bs = pair.b[s]
                if bs != 0.0:
                    acc = bs * rates[s] if acc is None else acc + bs * rates[s]
            y1 = y + h_step * acc
            err = 0.0
            if adaptive:
                acc = None
                for s in range(ns):
                    ds = pair.b[s] - pair.bhat[s]
                    if ds != 0.0:
                        acc = ds * rates[s] if acc is None \
                            else acc + ds * rates[s]
                delta = h_step * acc
                err = float(np.max(np.abs(delta) / (
                    config.tol * (1.0 + np.maximum(np.abs(y), np.abs(y1)))
                )))
                if not err <= 1.0:
                    stats.rejs += 1
                    stats.rejs_per_column[0] += 1
                    h_step = controller_next_h(
                        h_step, err, q_est, accepted=False,
                        safety=config.safety, growth_cap=config.growth_cap,
                        shrink_floor=config.shrink_floor,
                    )
                    if h_step < h_min:
                        raise StepsizeUnderflow(
                            f"step size {h_step:.3e} below floor",
                            t=t, column=0,
                        )
                    continue
            break
        y = linalg.mgs_orthonormalize(y1)
        t = t + h_step
        stats.nsteps += 1
        if adaptive:
            h = controller_next_h(
                h_step, err, q_est, accepted=True,
                safety=config.safety, growth_cap=config.growth_cap,
                shrink_floor=config.shrink_floor,
            )
        else:
            h = config.h
            if not np.isfinite(y).all():
                raise NonFiniteState("solution overflowed", t=t, column=0)
        if step_hook is not None:
            a_end = np.asarray(problem.coeff(t), dtype=float)
            mesh = (y * (a_end @ y)).sum(axis=0)
            step_hook(StepRecord(
                t=t, h=h_step, frames=y,
                errs=np.array([err]) if adaptive else None,
                stage_diags=None, mesh_diag=mesh,
            ))
    stats.wall = time.perf_counter() - wall0
    if problem.exact_q is not None:
        stats.err = q_error(y, problem.exact_q(tf))
    return IntegrationResult(frames=y, stats=stats, q=y)


class LyapunovAccumulator:
    """Weighted quadrature of the transformed diagonal along a run.

    Consumes step records whose stage_diags sample diag at the stage
    abscissas; the propagating weights b make the quadrature consistent
    with the pair's order.  exponents(t) returns the running averages."""

    def __init__(self, pair, t0):
        self.b = np.asarray(pair.b)
        self.t0 = t0
        self.t = t0
        self._sum = None

    def update(self, record):
        contrib = record.h * (self.b @ record.stage_diags)
        self._sum = contrib if self._sum is None else self._sum + contrib
        self.t = record.t

    def exponents(self, t=None):
        horizon = (self.t if t is None else t) - self.t0
        if self._sum is None or horizon <= 0.0:
            raise ConfigError("no accumulated steps")
        return self._sum / horizon


def lyapunov_accumulate(records, pair, t0, tf=None):
    """Running exponents from a finished stream of step records."""
    acc = LyapunovAccumulator(pair, t0)
    for rec in records:
        acc.update(rec)
    return acc.exponents(tf)

"""Two-phase HGM integration of the ball probability.

On ``(r0, switch]`` the standard-monomial vector F is integrated with the raw
Pfaffian system; at ``switch`` the state is gauged to Q and integrated out to
the requested radius. The integral of f rides along as an extra ODE
component, so the quadrature inherits the step-size control.

All magnitudes live in split-exponent form: a float mantissa vector plus a
log-scale. Rescaling is by powers of two, which is exact in floating point,
and the error norm is scale-equivariant, so results do not depend on
``rescale_high``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ._dop853 import KIND_F, KIND_Q, Stats, Stepper, pack_params
from .model import ModelParams, NaturalParams, surface_area, to_natural
from .pfaffian import HgmState, RescaledState, gauge_exponent, gauge_F_to_Q, gauge_Q_to_F, recover_f
from .series import leading_initial_state

__all__ = [
    "SolveOptions",
    "BallProbResult",
    "TracePoint",
    "solve_ball_probability",
    "solve_f_trace",
    "rescale",
]


@dataclass(frozen=True)
class SolveOptions:
    """Options for the HGM driver.

    ``tail_radius`` is the far radius used for the complementary tail when
    ``p >= 0.5``; ``None`` means ``max(40, 2 R)``. The tail integration stops
    earlier once the remaining mass is negligible.
    """

    r0: float = 1e-6
    switch_radius: float = 1.0
    rel_tol: float = 1e-6
    abs_tol: float = 1e-6
    rescale_high: float = 1e100
    max_steps: int = 10_000_000
    checkpoint_radii: tuple = ()
    tail_radius: float | None = None
    record_trace: bool = False

    def __post_init__(self):
        object.__setattr__(self, "checkpoint_radii", tuple(float(c) for c in self.checkpoint_radii))
        if not 0 < self.r0 < self.switch_radius:
            raise ValueError("need 0 < r0 < switch_radius")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.rescale_high > 1:
            raise ValueError("rescale_high must exceed 1")
        if any(c < self.r0 for c in self.checkpoint_radii):
            raise ValueError("checkpoint radii must be >= r0")
        if list(self.checkpoint_radii) != sorted(self.checkpoint_radii):
            raise ValueError("checkpoint radii must be sorted")


@dataclass(frozen=True)
class TracePoint:
    """Snapshot of the solution at radius ``r``.

    ``state`` is always in F form, so ``exp(state.log_scale) * state.vec`` are
    the 2d partial derivatives ordered (tau..., lambda...) in sorted
    coordinates.
    """

    r: float
    f_mantissa: float
    f_log_scale: float
    state: HgmState
    G: float

    @property
    def log_f(self) -> float:
        return math.log(self.f_mantissa) + self.f_log_scale


@dataclass(frozen=True)
class BallProbResult:
    p: float
    one_minus_p: float
    checkpoints: tuple = ()
    f_trace: tuple = ()
    Q_final: RescaledState | HgmState | None = None
    stats: dict = field(default_factory=dict)


def rescale(state, ledger_shift: float):
    """Move ``ledger_shift`` out of the mantissas into the log-scale."""
    f = math.exp(-ledger_shift)
    return replace(
        state,
        vec=state.vec * f,
        integral_mantissa=state.integral_mantissa * f,
        log_scale=state.log_scale + ledger_shift,
    )


def _max_gauge(np_: NaturalParams, a: float, b: float) -> float:
    # g is a concave parabola; its maximum over [a, b]
    lam1, t1 = np_.lam[0], abs(np_.tau[0])
    vertex = t1 / (-2.0 * lam1)
    r = min(max(vertex, a), b)
    return gauge_exponent(np_, r)


def rhs_params(np_: NaturalParams, offsets) -> np.ndarray:
    """Packed coefficient vector consumed by the compiled right-hand sides."""
    return pack_params(np_.lam, np_.tau, np.asarray(offsets, dtype=float))


class _Run:
    """One HGM integration, advanced radius by radius.

    Internally the stepper holds ``y = [mantissa vector, integral(s)]`` and a
    log-scale ``L``. In the F phase the vector is ``w`` with
    ``F = exp(L) r^{d+1} w`` and each integral is ``exp(L) r^d y_j``; in the Q
    phase ``Q = exp(L) q`` and integral ``j`` is ``exp(L + offset_j) y_j``.
    """

    def __init__(self, np_: NaturalParams, opts: SolveOptions, r_end: float):
        self.np = np_
        self.opts = opts
        self.r_end = r_end
        self.stats = Stats()
        self.trace = []
        d = np_.d
        self.phase = "F"
        self.offsets = [0.0]
        # mass on [0, r0] from the leading term: S r0^d / d
        y0 = np.concatenate([leading_initial_state(np_, opts.r0), [surface_area(d) / d]])
        self.stepper = self._stepper(opts.r0, y0, 0.0)

    def _stepper(self, r, y, log_scale, h=None):
        o = self.opts
        if self.phase == "F":
            kind, prm = KIND_F, rhs_params(self.np, np.zeros(len(self.offsets)))
        else:
            kind, prm = KIND_Q, rhs_params(self.np, self.offsets)
        return Stepper(
            kind, prm, r, y, rtol=o.rel_tol, atol=o.abs_tol,
            rescale_high=o.rescale_high, max_steps=o.max_steps, stats=self.stats, h=h,
            log_scale=log_scale,
        )

    @property
    def r(self) -> float:
        return self.stepper.t

    def _log_weight(self, j: int) -> float:
        st = self.stepper
        if self.phase == "F":
            return st.log_scale + self.np.d * math.log(st.t)
        return st.log_scale + self.offsets[j]

    def _log_component(self, j: int) -> float:
        m = self.stepper.y[2 * self.np.d + j]
        return math.log(m) + self._log_weight(j) if m > 0 else -math.inf

    def log_integral(self) -> float:
        return self._log_component(0)

    def log_tail(self) -> float:
        return self._log_component(1)

    @property
    def state(self) -> HgmState | RescaledState:
        st = self.stepper
        d = self.np.d
        vec = st.y[: 2 * d].copy()
        c = float(st.y[2 * d])
        if self.phase == "F":
            lr = math.log(st.t)
            return HgmState(vec, st.log_scale + (d + 1) * lr, c, -lr)
        return RescaledState(vec, st.log_scale, c, self.offsets[0])

    def _switch(self):
        np_ = self.np
        st = self.stepper
        rs = st.t
        d = np_.d
        q = gauge_F_to_Q(np_, rs, self.state)
        lr = math.log(rs)
        new_offsets = []
        ints = []
        for j, m in enumerate(st.y[2 * d :]):
            lo = rs if j == 0 else max(rs, self._tail_start)
            off = _max_gauge(np_, lo, max(lo, self.r_end))
            # exp(L + d log rs) m == exp(L_Q + off) m'
            ints.append(m * math.exp(st.log_scale + d * lr - q.log_scale - off))
            new_offsets.append(off)
        self.phase = "Q"
        self.offsets = new_offsets
        self.stepper = self._stepper(rs, np.concatenate([q.vec, ints]), q.log_scale, h=st.h)

    def advance(self, r_target: float, after_step=None) -> bool:
        """Integrate to ``r_target``; returns False if stopped early by the callback."""
        sw = self.opts.switch_radius
        if r_target <= self.r:
            return True
        if self.phase == "F":
            done = self._advance_stepper(min(r_target, sw), after_step)
            if not done or r_target <= sw:
                return done
            self._switch()
        return self._advance_stepper(r_target, after_step)

    def _advance_stepper(self, r_target, after_step):
        if not self.opts.record_trace:
            return self.stepper.advance_to(r_target, after_step)
        trace = self.trace

        def cb(st):
            m, ls = self.f_value()
            trace.append((st.t, math.log(m) + ls if m > 0 else -math.inf))
            return bool(after_step(st)) if after_step is not None else False

        return self.stepper.advance_to(r_target, cb)

    def start_tail(self):
        """Begin a second integral accumulator at the current radius."""
        st = self.stepper
        self._tail_start = st.t
        if self.phase == "F":
            self.offsets = self.offsets[:1] + [0.0]
        else:
            self.offsets = self.offsets[:1] + [_max_gauge(self.np, st.t, max(st.t, self.r_end))]
        y = np.concatenate([st.y[: 2 * self.np.d + 1], [0.0]])
        self.stepper = self._stepper(st.t, y, st.log_scale, h=st.h)

    def f_value(self):
        return recover_f(self.np, self.r, self.state)

    def G(self) -> float:
        return math.exp(min(self.np.prefactor_log + self.log_integral(), 700.0))

    def snapshot(self) -> TracePoint:
        s = self.state
        if isinstance(s, RescaledState):
            s = gauge_Q_to_F(self.np, self.r, s)
        m, ls = self.f_value()
        return TracePoint(r=self.r, f_mantissa=m, f_log_scale=ls, state=s, G=self.G())


def _stops(opts: SolveOptions, extra) -> list:
    return sorted({float(x) for x in (*opts.checkpoint_radii, *extra)})


def _tail_stop(run: _Run):
    """Early-exit test for the tail: remaining mass below rel_tol * 1e-3 of the tail."""
    np_ = run.np
    lam1, at1 = np_.lam[0], abs(np_.tau[0])
    thresh = 1e-3 * run.opts.rel_tol

    def cb(st):
        r = st.t
        slope = 2.0 * r * lam1 + at1
        if slope >= 0:
            return False
        d = np_.d
        y = st.y
        if run.phase == "F":
            return False
        fq = y[d] + y[d + 1 : 2 * d].sum() / (r * r)
        integrand = math.exp(r * r * lam1 + r * at1 - run.offsets[1]) * fq
        t = y[2 * d + 1]
        return t > 0 and integrand / (-slope) <= thresh * t

    return cb


def solve_ball_probability(params: ModelParams, R: float, opts: SolveOptions | None = None) -> BallProbResult:
    """Ball probability ``G(R) = P(||X|| <= R)`` by the holonomic gradient method."""
    opts = opts or SolveOptions()
    if not R >= opts.r0:
        raise ValueError(f"R must be >= r0={opts.r0}")
    t_start = time.perf_counter()
    np_ = to_natural(params)
    stops = [s for s in _stops(opts, [R]) if s <= R] + [s for s in _stops(opts, []) if s > R]
    r_far = opts.tail_radius if opts.tail_radius is not None else max(40.0, 2.0 * R)
    r_far = max(r_far, R)
    run = _Run(np_, opts, r_end=max(stops[-1], r_far))
    checkpoints = []
    p = None
    for s in stops:
        run.advance(s)
        checkpoints.append((s, run.G()))
        if s == R:
            p = run.G()
    log_IR = None
    one_minus_p = None
    if p < 0.5:
        one_minus_p = 1.0 - p
    elif stops[-1] > R:
        # beyond-R checkpoints already moved the state; rerun for the tail
        one_minus_p = _complementary_tail(np_, opts, R, r_far)
    else:
        log_IR = run.log_integral()
        run.start_tail()
        if r_far > R:
            run.advance(r_far, _tail_stop(run))
        one_minus_p = _tail_fraction(log_IR, run.log_tail())
    elapsed = time.perf_counter() - t_start
    stats = run.stats.as_dict()
    stats["wall_time_s"] = elapsed
    return BallProbResult(
        p=p,
        one_minus_p=one_minus_p,
        checkpoints=tuple(checkpoints),
        f_trace=tuple(run.trace),
        Q_final=run.state,
        stats=stats,
    )


def _tail_fraction(log_head: float, log_tail: float) -> float:
    if log_tail == -math.inf:
        return 0.0
    return math.exp(log_tail - np.logaddexp(log_head, log_tail))


def _complementary_tail(np_, opts, R, r_far):
    run = _Run(np_, replace(opts, checkpoint_radii=()), r_end=r_far)
    run.advance(R)
    log_IR = run.log_integral()
    run.start_tail()
    if r_far > R:
        run.advance(r_far, _tail_stop(run))
    return _tail_fraction(log_IR, run.log_tail())


def solve_f_trace(params: ModelParams, radii, opts: SolveOptions | None = None) -> list:
    """Integrate once and return a :class:`TracePoint` at each radius."""
    opts = opts or SolveOptions()
    radii = [float(r) for r in radii]
    if radii != sorted(radii):
        raise ValueError("radii must be sorted")
    if radii and radii[0] < opts.r0:
        raise ValueError("radii must be >= r0")
    np_ = to_natural(params)
    run = _Run(np_, opts, r_end=radii[-1] if radii else opts.r0)
    out = []
    for r in radii:
        run.advance(r)
        out.append(run.snapshot())
    return out


def log_prefactor_and_integral(np_: NaturalParams, opts: SolveOptions, R: float) -> tuple[float, float]:
    """(prefactor_log, log of the integral of f over [0, R]); for diagnostics."""
    run = _Run(np_, opts, r_end=R)
    run.advance(R)
    return np_.prefactor_log, run.log_integral()


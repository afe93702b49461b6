"""Explicit embedded Runge-Kutta 8(5,3) stepper (Dormand-Prince DOP853).

The tableau is taken from SciPy; the driver is ours because the HGM solver
needs control SciPy's ``DOP853`` class does not give: exact landing on stop
radii, in-place power-of-two rescaling of the state between steps, and an
error norm whose absolute part is relative to the size of the state so that
the step sequence does not depend on the rescaling.

The stage loop and the two right-hand sides are compiled with numba; the
right-hand side is selected by an integer ``kind`` (``KIND_F`` or ``KIND_Q``)
and reads its coefficients from a packed parameter vector
``prm = [d, n_int, lambda_1..d, tau_1..d, offset_1..n_int]``.
"""

from __future__ import annotations

import math

import numba
import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _coef

from .errors import OverflowUnrecoverable, StepBudgetExceeded, StepUnderflow

N_STAGES = _coef.N_STAGES
A = np.ascontiguousarray(_coef.A[:N_STAGES, :N_STAGES])
B = np.ascontiguousarray(_coef.B)
C = np.ascontiguousarray(_coef.C[:N_STAGES])
E3 = np.ascontiguousarray(_coef.E3)
E5 = np.ascontiguousarray(_coef.E5)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -1.0 / 8.0
LN2 = math.log(2.0)
# cap on h * max|y'| / max|y|; the embedded error estimate under-reports
# when the state changes by a large factor within one step
GROWTH_CAP = 0.5

KIND_F = 0
KIND_Q = 1


def pack_params(lam, tau, offsets) -> np.ndarray:
    d = len(lam)
    return np.concatenate([[d, len(offsets)], lam, tau, offsets]).astype(float)


@numba.njit(cache=True)
def rhs_F(r, y, prm, out):
    # w = r^{-(d+1)} F; integrals carried as r^{-d} times their value
    d = int(prm[0])
    nint = int(prm[1])
    r2 = r * r
    sb = 0.0
    for i in range(d):
        sb += y[d + i]
    k = d + 1.0
    for i in range(d):
        lam = prm[2 + i]
        tau = prm[2 + d + i]
        diag = 2.0 * lam * r2 + 1.0 - k
        a = y[i]
        b = y[d + i]
        out[i] = (diag * a + tau * sb) / r
        out[d + i] = (r2 * tau * a + diag * b + sb) / r
    for j in range(nint):
        out[2 * d + j] = (sb - d * y[2 * d + j]) / r


@numba.njit(cache=True)
def rhs_Q(r, y, prm, out):
    # slots 0 and d are written out so that 2 r lambda_1 cancels symbolically
    d = int(prm[0])
    nint = int(prm[1])
    lam1 = prm[2]
    t1 = prm[2 + d]
    at1 = abs(t1)
    r2 = r * r
    rest = 0.0
    for i in range(1, d):
        rest += y[d + i]
    sb_r = (r2 * y[d] + rest) / r
    base = 1.0 / r - at1
    for i in range(1, d):
        tau = prm[2 + d + i]
        diag = 2.0 * (prm[2 + i] - lam1) * r + base
        a = y[i]
        b = y[d + i]
        out[i] = diag * a + tau * sb_r
        out[d + i] = r * tau * a + diag * b + sb_r
    out[0] = t1 * (y[d] + rest / r2) - at1 * y[0]
    out[d] = t1 * y[0] - at1 * y[d] + rest / (r2 * r)
    fq = y[d] + rest / r2
    g = r2 * lam1 + r * at1
    for j in range(nint):
        out[2 * d + j] = math.exp(g - prm[2 + 2 * d + j]) * fq


@numba.njit(cache=True)
def _rhs(kind, r, y, prm, out):
    if kind == 0:
        rhs_F(r, y, prm, out)
    else:
        rhs_Q(r, y, prm, out)


@numba.njit(cache=True)
def eval_rhs(kind, r, y, prm):
    out = np.empty(y.size)
    _rhs(kind, r, y, prm, out)
    return out


@numba.njit(cache=True)
def _stages(kind, prm, t, y, h, K, A, B, C):
    """Fill K[1:] and return y_new; K[0] must hold f(t, y) on entry."""
    # row-wise accumulation keeps K accesses contiguous and skips zero coefficients
    n = y.size
    ns = A.shape[0]
    ytmp = np.empty(n)
    for s in range(1, ns):
        ytmp[:] = y
        for j in range(s):
            a = h * A[s, j]
            if a != 0.0:
                for i in range(n):
                    ytmp[i] += a * K[j, i]
        _rhs(kind, t + C[s] * h, ytmp, prm, K[s])
    y_new = y.copy()
    for j in range(ns):
        b = h * B[j]
        if b != 0.0:
            for i in range(n):
                y_new[i] += b * K[j, i]
    _rhs(kind, t + h, y_new, prm, K[ns])
    return y_new


@numba.njit(cache=True)
def _error_norm(K, y, y_new, h, nvec, atol, rtol, E5, E3):
    n = y.size
    err5 = np.zeros(n)
    err3 = np.zeros(n)
    for j in range(K.shape[0]):
        c5 = E5[j]
        c3 = E3[j]
        for i in range(n):
            k = K[j, i]
            err5[i] += c5 * k
            err3[i] += c3 * k
    vmax = 0.0
    for i in range(nvec):
        m = max(abs(y[i]), abs(y_new[i]))
        if m > vmax:
            vmax = m
    e5 = 0.0
    e3 = 0.0
    cnt = 0
    for i in range(n):
        m = max(abs(y[i]), abs(y_new[i]))
        if i < nvec:
            sc = atol * vmax + rtol * m
        else:
            sc = (atol + rtol) * m
        if sc <= 0.0:
            continue
        a5 = err5[i] / sc
        a3 = err3[i] / sc
        e5 += a5 * a5
        e3 += a3 * a3
        cnt += 1
    if e5 == 0.0 and e3 == 0.0:
        return 0.0
    return abs(h) * e5 / math.sqrt((e5 + 0.01 * e3) * cnt)


class Stats:
    __slots__ = ("steps", "rejected", "rescales", "nfev")

    def __init__(self):
        self.steps = 0
        self.rejected = 0
        self.rescales = 0
        self.nfev = 0

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__slots__}


class Stepper:
    """Adaptive DOP853 for the linear homogeneous HGM systems.

    The first ``nvec`` components form the ODE state proper and share one
    mixed tolerance ``atol * max|y_vec| + rtol * |y_i|``. The remaining
    components are running integrals controlled purely relatively. Linearity
    is what allows rescaling ``y`` (and the cached derivative) by ``2**-k``
    between steps; the shift is accumulated in ``log_scale``.
    """

    def __init__(self, kind, prm, t, y, *, rtol, atol, rescale_high, max_steps, stats,
                 h=None, log_scale=0.0):
        self.kind = kind
        self.prm = np.ascontiguousarray(prm, dtype=float)
        self.t = float(t)
        self.y = np.array(y, dtype=float)
        self.nvec = 2 * int(self.prm[0])
        self.rtol = rtol
        self.atol = atol
        self.rescale_high = rescale_high
        self.rescale_low = 1.0 / rescale_high
        self.max_steps = max_steps
        self.stats = stats
        self.log_scale = log_scale
        self.K = np.empty((N_STAGES + 1, self.y.size))
        self.f = self.fun(self.t, self.y)
        self.h = h if h is not None else self._initial_step()
        self.step_rejected = False
        self._rescale()

    def fun(self, t, y):
        self.stats.nfev += 1
        return eval_rhs(self.kind, t, y, self.prm)

    def _rms(self, x, y):
        nv = self.nvec
        mag = np.abs(y)
        sc = np.empty_like(mag)
        sc[:nv] = self.atol * mag[:nv].max() + self.rtol * mag[:nv]
        sc[nv:] = (self.atol + self.rtol) * mag[nv:]
        mask = sc > 0
        z = x[mask] / sc[mask]
        return math.sqrt(float(z @ z) / max(z.size, 1))

    def _initial_step(self):
        with np.errstate(over="ignore", invalid="ignore"):
            return self._initial_step_estimate()

    def _initial_step_estimate(self):
        # Hairer, Norsett & Wanner, Solving ODEs I, sec. II.4
        t, y, f = self.t, self.y, self.f
        d0 = self._rms(y, y)
        d1 = self._rms(f, y)
        if d0 < 1e-5 or d1 < 1e-5:
            h0 = 1e-6 * max(abs(t), 1e-300)
        else:
            h0 = 0.01 * d0 / d1
        f1 = self.fun(t + h0, y + h0 * f)
        d2 = self._rms(f1 - f, y) / h0
        m = max(d1, d2)
        if m <= 1e-15:
            h1 = max(1e-6 * abs(t), h0 * 1e-3)
        else:
            h1 = (0.01 / m) ** (1.0 / 8.0)
        h = min(100.0 * h0, h1)
        # inf/inf in the norms (absurdly small tolerances) must not give nan
        return h if math.isfinite(h) and h > 0.0 else 0.0

    def _rescale(self):
        if not np.all(np.isfinite(self.y)):
            raise OverflowUnrecoverable("non-finite state", self.t)
        m = float(np.max(np.abs(self.y[: self.nvec])))
        if m == 0.0:
            raise OverflowUnrecoverable("state collapsed to zero", self.t)
        if m > self.rescale_high or m < self.rescale_low:
            k = math.frexp(m)[1]
            self.y = np.ldexp(self.y, -k)
            self.f = np.ldexp(self.f, -k)
            self.log_scale += k * LN2
            if not math.isfinite(self.log_scale):
                raise OverflowUnrecoverable("log-scale overflow", self.t)
            self.stats.rescales += 1

    def _growth_limit(self):
        nv = self.nvec
        rate = float(np.max(np.abs(self.f[:nv]))) / float(np.max(np.abs(self.y[:nv])))
        return GROWTH_CAP / rate if rate > 0.0 else math.inf

    def advance_to(self, t_end, after_step=None):
        """Step until ``t == t_end`` exactly.

        ``after_step(stepper)`` is called after every accepted step and may
        return True to stop early, in which case False is returned.
        """
        K = self.K
        stats = self.stats
        eps10 = 10.0 * np.finfo(float).eps
        while self.t < t_end:
            t, y = self.t, self.y
            h_min = eps10 * abs(t)
            h_abs = min(self.h, self._growth_limit())
            if not h_abs >= h_min:
                raise StepUnderflow(f"step size {h_abs:.3g} below floor", t)
            while True:
                h = h_abs
                last = t + h >= t_end - h_min
                if last:
                    h = t_end - t
                K[0] = self.f
                y_new = _stages(self.kind, self.prm, t, y, h, K, A, B, C)
                stats.nfev += N_STAGES
                err = _error_norm(K, y, y_new, h, self.nvec, self.atol, self.rtol, E5, E3)
                if err < 1.0:
                    if err == 0.0:
                        factor = MAX_FACTOR
                    else:
                        factor = min(MAX_FACTOR, SAFETY * err**ERROR_EXPONENT)
                    if self.step_rejected:
                        factor = min(1.0, factor)
                    self.step_rejected = False
                    # a step clipped to land on t_end keeps the unclipped proposal
                    self.h = h_abs if (last and h < h_abs) else h * factor
                    break
                h_abs *= max(MIN_FACTOR, SAFETY * err**ERROR_EXPONENT)
                self.step_rejected = True
                stats.rejected += 1
                if not h_abs >= h_min:
                    raise StepUnderflow(f"step size {h_abs:.3g} below floor", t)
            self.t = t_end if last else t + h
            self.y = y_new
            self.f = K[N_STAGES].copy()
            stats.steps += 1
            if stats.steps > self.max_steps:
                raise StepBudgetExceeded(f"more than {self.max_steps} steps", self.t)
            self._rescale()
            if after_step is not None and after_step(self):
                return False
        return True

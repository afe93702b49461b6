"""Pfaffian system in r for the standard monomials of the Fisher-Bingham integral.

State ordering everywhere is ``(d f/d tau_1..d, d f/d lambda_1..d)``.

Two representations are used:

* ``HgmState`` holds ``F`` itself as ``exp(log_scale) * vec``; it is used on
  ``(r0, switch]`` where ``dF/dr = P_r F``.
* ``RescaledState`` holds ``Q = exp(-g(r)) D F`` with
  ``g(r) = r^2 lambda_1 + r |tau_1|`` and
  ``D = diag(1/r, 1, ..., 1, 1/r^2, 1, ..., 1)``. Its components tend to
  finite limits as r grows. ``g`` is kept out of the mantissa entirely.

Both carry the running integral of f in their own mantissa,
``int f = exp(log_scale + integral_log_offset) * integral_mantissa``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularRadius
from .model import NaturalParams

__all__ = [
    "HgmState",
    "RescaledState",
    "apply_P",
    "apply_Q_rhs",
    "pfaffian_matrix",
    "gauge_exponent",
    "gauge_F_to_Q",
    "gauge_Q_to_F",
    "recover_f",
]


@dataclass(frozen=True)
class HgmState:
    vec: np.ndarray
    log_scale: float = 0.0
    integral_mantissa: float = 0.0
    integral_log_offset: float = 0.0

    def values(self) -> np.ndarray:
        """``F`` as plain floats (may under/overflow for extreme ledgers)."""
        return np.exp(self.log_scale) * self.vec

    def integral(self) -> float:
        return float(np.exp(self.log_scale + self.integral_log_offset) * self.integral_mantissa)


@dataclass(frozen=True)
class RescaledState:
    vec: np.ndarray
    log_scale: float = 0.0
    integral_mantissa: float = 0.0
    integral_log_offset: float = 0.0

    def integral(self) -> float:
        return float(np.exp(self.log_scale + self.integral_log_offset) * self.integral_mantissa)


def _check_radius(r: float) -> None:
    if r == 0:
        raise SingularRadius("r = 0 is a singular point of the Pfaffian system")
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r!r}")


def apply_P(np_: NaturalParams, r: float, v: np.ndarray) -> np.ndarray:
    """``P_r v`` in O(d) using the diagonal plus rank-one block structure."""
    _check_radius(r)
    d = np_.d
    lam, tau = np_.lam, np_.tau
    a, b = v[:d], v[d:]
    diag = 2.0 * r * r * lam + 1.0
    sb = b.sum()
    out = np.empty(2 * d)
    out[:d] = (diag * a + tau * sb) / r
    # lower-right block: (2 r^2 lambda_i + 2) on the diagonal, 1 elsewhere
    out[d:] = (r * r * tau * a + diag * b + sb) / r
    return out


def pfaffian_matrix(np_: NaturalParams, r: float) -> np.ndarray:
    """Dense ``P_r`` assembled entry by entry; O(d^2), for testing."""
    _check_radius(r)
    d = np_.d
    lam, tau = np_.lam, np_.tau
    P = np.zeros((2 * d, 2 * d))
    for i in range(d):
        for j in range(2 * d):
            rp = (2 * lam[i] * r * r + 1) * (i == j)
            rp += sum(tau[i] * (j == k + d) for k in range(d))
            P[i, j] = rp / r
            rp = tau[i] * r * r * (i == j) + (2 * lam[i] * r * r + 2) * (j == i + d)
            rp += sum(1.0 * (j == k + d) for k in range(d) if k != i)
            P[i + d, j] = rp / r
    return P


def gauge_exponent(np_: NaturalParams, r: float) -> float:
    """``g(r) = r^2 lambda_1 + r |tau_1|``."""
    return r * r * np_.lam[0] + r * abs(np_.tau[0])


def apply_Q_rhs(np_: NaturalParams, r: float, q: np.ndarray) -> np.ndarray:
    """Right-hand side of the ODE for the rescaled vector Q."""
    _check_radius(r)
    d = np_.d
    u = np.array(q, dtype=float)
    u[0] *= r
    u[d] *= r * r
    out = apply_P(np_, r, u)
    out[0] /= r
    out[d] /= r * r
    out[0] -= q[0] / r
    out[d] -= 2.0 * q[d] / r
    out -= (2.0 * r * np_.lam[0] + abs(np_.tau[0])) * q
    return out


def _gauge_diag(d: int, r: float) -> np.ndarray:
    g = np.ones(2 * d)
    g[0] = 1.0 / r
    g[d] = 1.0 / (r * r)
    return g


def gauge_F_to_Q(np_: NaturalParams, r: float, s: HgmState, integral_log_offset: float | None = None) -> RescaledState:
    """Change representation at radius r from F to Q.

    ``integral_log_offset`` selects the log-scale of the integral mantissa in
    the new representation; by default it is chosen so the mantissa is
    unchanged.
    """
    _check_radius(r)
    g = gauge_exponent(np_, r)
    log_scale = s.log_scale - g
    total_log = s.log_scale + s.integral_log_offset
    if integral_log_offset is None:
        integral_log_offset = total_log - log_scale
        c = s.integral_mantissa
    else:
        c = s.integral_mantissa * np.exp(total_log - log_scale - integral_log_offset)
    return RescaledState(
        vec=s.vec * _gauge_diag(np_.d, r),
        log_scale=log_scale,
        integral_mantissa=c,
        integral_log_offset=integral_log_offset,
    )


def gauge_Q_to_F(np_: NaturalParams, r: float, q: RescaledState, integral_log_offset: float | None = None) -> HgmState:
    """Inverse of :func:`gauge_F_to_Q`."""
    _check_radius(r)
    g = gauge_exponent(np_, r)
    log_scale = q.log_scale + g
    total_log = q.log_scale + q.integral_log_offset
    if integral_log_offset is None:
        integral_log_offset = total_log - log_scale
        c = q.integral_mantissa
    else:
        c = q.integral_mantissa * np.exp(total_log - log_scale - integral_log_offset)
    return HgmState(
        vec=q.vec / _gauge_diag(np_.d, r),
        log_scale=log_scale,
        integral_mantissa=c,
        integral_log_offset=integral_log_offset,
    )


def recover_f(np_: NaturalParams, r: float, s: HgmState | RescaledState) -> tuple[float, float]:
    """f = r^{-2} sum_i d f/d lambda_i, as ``(mantissa, log_scale)``."""
    _check_radius(r)
    d = np_.d
    if isinstance(s, RescaledState):
        # slot d holds r^{-2} d f/d lambda_1
        m = s.vec[d] + s.vec[d + 1 :].sum() / (r * r)
        return float(m), float(s.log_scale + gauge_exponent(np_, r))
    return float(s.vec[d:].sum() / (r * r)), float(s.log_scale)


"""Power series of the Fisher-Bingham integral near r = 0.

With ``x_i = lambda_i r^2`` and ``y_i = tau_i r`` the series reads

    f = r^{d-1} S_{d-1} sum_n w_n E_n,
    w_n = (d-2)!! / (d-2+2n)!!,
    E_n = sum_{|k| = n} prod_i a_i(k_i),
    a_i(k) = (2k-1)!! sum_{a+b=k} x_i^a y_i^{2b} / (a! (2b)!).

E_n is the degree-n coefficient of the product of the per-coordinate
polynomials ``A_i(z) = sum_k a_i(k) z^k``, so the whole multi-index sum is a
chain of truncated polynomial products. Gradients come from replacing one
factor by its derivative (leave-one-out products).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NoConvergence
from .model import NaturalParams, surface_area

__all__ = [
    "SeriesOptions",
    "leading_initial_state",
    "series_f_and_gradient",
    "series_scaled",
    "log_double_factorial",
]


@dataclass(frozen=True)
class SeriesOptions:
    max_total_degree: int = 30
    rel_tol: float = 1e-13

    def __post_init__(self):
        if self.max_total_degree < 0:
            raise ValueError("max_total_degree must be >= 0")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")


def log_double_factorial(n: int) -> float:
    """log(n!!) for integer n >= -1, with (-1)!! = 0!! = 1."""
    if n < -1:
        raise ValueError("double factorial defined here for n >= -1")
    if n <= 0:
        return 0.0
    if n % 2 == 0:
        k = n // 2
        return k * math.log(2.0) + math.lgamma(k + 1)
    k = (n + 1) // 2
    return math.lgamma(2 * k + 1) - k * math.log(2.0) - math.lgamma(k + 1)


@lru_cache(maxsize=64)
def _coordinate_table(nmax: int):
    # log of (2k-1)!! / (a! (2b)!) for a + b = k <= nmax, indexed [a, b]
    t = np.full((nmax + 1, nmax + 1), -np.inf)
    for a in range(nmax + 1):
        for b in range(nmax + 1 - a):
            t[a, b] = log_double_factorial(2 * (a + b) - 1) - math.lgamma(a + 1) - math.lgamma(2 * b + 1)
    return np.exp(t)


@lru_cache(maxsize=64)
def _shell_weights(d: int, nmax: int) -> np.ndarray:
    ld = log_double_factorial(d - 2)
    return np.array([math.exp(ld - log_double_factorial(d - 2 + 2 * n)) for n in range(nmax + 1)])


def _coordinate_polys(x: float, y: float, nmax: int):
    """Coefficients of A(z), dA/dx and dA/dy up to degree nmax."""
    c = _coordinate_table(nmax)
    a = np.arange(nmax + 1)
    xp = x ** a
    y2p = (y * y) ** a
    poly = np.zeros(nmax + 1)
    dx = np.zeros(nmax + 1)
    dy = np.zeros(nmax + 1)
    for k in range(nmax + 1):
        ai = a[: k + 1]
        bi = k - ai
        coef = c[ai, bi]
        poly[k] = np.sum(coef * xp[ai] * y2p[bi])
        # x^{a-1} and y^{2b-1}; the a = 0 / b = 0 terms carry a zero factor
        dx[k] = np.sum(coef[1:] * ai[1:] * xp[ai[1:] - 1] * y2p[bi[1:]])
        bpos = bi > 0
        dy[k] = np.sum(coef[bpos] * 2 * bi[bpos] * xp[ai[bpos]] * y * y2p[bi[bpos] - 1])
    return poly, dx, dy


def _mul(p: np.ndarray, q: np.ndarray, nmax: int) -> np.ndarray:
    return np.convolve(p, q)[: nmax + 1]


def _shells(np_: NaturalParams, r: float, nmax: int):
    """Per-degree contributions to (f, d/dtau, d/dlambda), all without r^{d-1} S."""
    d = np_.d
    polys, dxs, dys = [], [], []
    for lam, tau in zip(np_.lam, np_.tau):
        p, px, py = _coordinate_polys(lam * r * r, tau * r, nmax)
        polys.append(p)
        dxs.append(px)
        dys.append(py)
    one = np.zeros(nmax + 1)
    one[0] = 1.0
    prefix = [one]
    for p in polys:
        prefix.append(_mul(prefix[-1], p, nmax))
    suffix = [one]
    for p in reversed(polys):
        suffix.append(_mul(suffix[-1], p, nmax))
    suffix.reverse()
    w = _shell_weights(d, nmax)
    f_sh = w * prefix[-1]
    dtau = np.empty((d, nmax + 1))
    dlam = np.empty((d, nmax + 1))
    for i in range(d):
        rest = _mul(prefix[i], suffix[i + 1], nmax)
        # chain rule: d/dtau = r d/dy, d/dlambda = r^2 d/dx
        dtau[i] = w * _mul(dys[i], rest, nmax) * r
        dlam[i] = w * _mul(dxs[i], rest, nmax) * (r * r)
    return f_sh, dtau, dlam


def series_scaled(np_: NaturalParams, r: float, opts: SeriesOptions | None = None):
    """Truncated series in mantissa form.

    Returns ``(g, grad)`` with ``f = r^{d-1} S_{d-1} g`` and
    ``F = r^{d-1} S_{d-1} grad``; ``grad`` is ordered (d/dtau..., d/dlambda...).
    """
    opts = opts or SeriesOptions()
    if not r > 0:
        raise ValueError("series evaluated only for r > 0")
    nmax = opts.max_total_degree
    f_sh, dtau, dlam = _shells(np_, float(r), nmax)
    shells = np.vstack([f_sh[None, :], dtau, dlam])
    partial = np.cumsum(shells, axis=1)
    for n in range(nmax + 1):
        last = np.abs(shells[:, n])
        tot = np.abs(partial[:, n])
        ok = (last <= opts.rel_tol * tot) | ((last == 0) & (tot == 0))
        # the n = 0 shell is the whole sum so far; require one genuine correction shell
        if n >= 1 and np.all(ok):
            return partial[0, n], partial[1:, n].copy()
    raise NoConvergence(
        f"series did not reach rel_tol={opts.rel_tol:g} within total degree {nmax} at r={r:g}"
    )


def series_f_and_gradient(np_: NaturalParams, r: float, opts: SeriesOptions | None = None):
    """f and its 2d first partials from the series, as plain floats."""
    g, grad = series_scaled(np_, r, opts)
    pre = r ** (np_.d - 1) * surface_area(np_.d)
    return pre * g, pre * grad


def leading_initial_state(np_: NaturalParams, r0: float) -> np.ndarray:
    """Leading-order ``r0^{-(d+1)} F`` for the start of the integration.

    The lowest-order terms are ``d f/d tau_i ~ S r^{d+1} tau_i / d`` and
    ``d f/d lambda_i ~ S r^{d+1} / d``; relative error is O(r0^2). The caller
    carries ``(d+1) log r0`` in its log-scale.
    """
    d = np_.d
    s = surface_area(d) / d
    return np.concatenate([s * np_.tau, np.full(d, s)])

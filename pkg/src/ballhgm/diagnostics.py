"""Ratios of HGM values to their large-radius asymptotics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GroupSeparationTooSmall
from .integrator import SolveOptions, solve_f_trace
from .laplace import asymptotic_eval
from .model import ModelParams, to_natural

__all__ = ["RatioRow", "laplace_ratios"]


@dataclass(frozen=True)
class RatioRow:
    """HGM / asymptotic at one radius, components in the caller's order.

    ``error`` holds the exception name when the asymptotics are undefined;
    the ratio arrays are then all NaN.
    """

    r: float
    f: float
    dtau: np.ndarray
    dlambda: np.ndarray
    branch: str = ""
    error: str = ""


def _ratio(hgm_mantissa, log_scale, asym_ratio, log_f):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.asarray(hgm_mantissa) / np.asarray(asym_ratio) * math.exp(log_scale - log_f)
    return np.where(np.asarray(asym_ratio) == 0.0, np.nan, out)


def laplace_ratios(params: ModelParams, radii, opts: SolveOptions | None = None, tie_tol: float = 1e-8) -> list[RatioRow]:
    """One HGM run through ``radii``; each point compared with the asymptotics."""
    np_ = to_natural(params)
    d = np_.d
    rows = []
    for pt in solve_f_trace(params, sorted(radii), opts):
        try:
            a = asymptotic_eval(np_, pt.r, tie_tol)
        except GroupSeparationTooSmall:
            nan = np.full(d, np.nan)
            rows.append(RatioRow(pt.r, math.nan, nan, nan.copy(), error="GroupSeparationTooSmall"))
            continue
        vec, L = pt.state.vec, pt.state.log_scale
        rt = _ratio(vec[:d], L, a.dtau, a.log_f)
        rl = _ratio(vec[d:], L, a.dlambda, a.log_f)
        rows.append(
            RatioRow(
                r=pt.r,
                f=math.exp(pt.log_f - a.log_f),
                dtau=np_.to_user_order(rt),
                dlambda=np_.to_user_order(rl),
                branch=a.branch,
            )
        )
    return rows

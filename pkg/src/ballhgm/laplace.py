"""Large-radius Laplace asymptotics of the Fisher-Bingham integral.

For large r the integral over the sphere concentrates where the coordinates
with the largest ``lambda`` dominate. With ``m`` the multiplicity of the top
``lambda`` there are three regimes:

``simple``
    ``m = 1``. Mass sits near the two poles ``t_1 = +-r``; both are kept, so
    the ``tau_1`` factor is ``exp(r tau_1) + exp(-r tau_1)``.
``degenerate_tau_zero``
    ``m > 1`` and the top group has no drift; the top block contributes a full
    ``(m-1)``-sphere of radius r.
``degenerate_tau_nonzero``
    ``m > 1`` and ``gamma = ||tau_{1..m}|| > 0``; the mass sits around the
    direction of the drift within the top block.

Derivatives are returned as ratios to f, which cancels the large common
factor and is what a convergence diagnostic compares against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GroupSeparationTooSmall
from .model import NaturalParams, log_surface_area

__all__ = ["LaplaceEval", "classify", "asymptotic_eval", "SIMPLE", "TAU_ZERO", "TAU_NONZERO"]

SIMPLE = "simple"
TAU_ZERO = "degenerate_tau_zero"
TAU_NONZERO = "degenerate_tau_nonzero"


@dataclass(frozen=True)
class LaplaceEval:
    """Asymptotic f and derivative ratios at one radius (sorted coordinates).

    Attributes
    ----------
    m : int
        Multiplicity of the largest ``lambda``.
    branch : str
        One of ``simple``, ``degenerate_tau_zero``, ``degenerate_tau_nonzero``.
    gamma : float
        ``|tau_1|`` for the simple branch, otherwise the norm of the top-group
        drift.
    log_f : float
        Natural log of the asymptotic f.
    dtau, dlambda : ndarray
        ``(d f / d tau_j) / f`` and ``(d f / d lambda_j) / f``.
    """

    m: int
    branch: str
    gamma: float
    log_f: float
    dtau: np.ndarray
    dlambda: np.ndarray

    def log_abs_dtau(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.dtau)) + self.log_f

    def log_abs_dlambda(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.dlambda)) + self.log_f


def classify(np_: NaturalParams, tie_tol: float = 1e-8) -> tuple[int, str]:
    """Multiplicity of the top ``lambda`` and the asymptotic branch."""
    lam, tau = np_.lam, np_.tau
    m = int(np.count_nonzero(lam[0] - lam <= tie_tol))
    if m == 1:
        return 1, SIMPLE
    if np.max(np.abs(tau[:m])) <= tie_tol:
        return m, TAU_ZERO
    return m, TAU_NONZERO


def asymptotic_eval(np_: NaturalParams, r: float, tie_tol: float = 1e-8) -> LaplaceEval:
    """Leading-order asymptotics of f and its first partials at radius ``r``.

    Raises
    ------
    GroupSeparationTooSmall
        If ``lambda_m - lambda_{m+1} <= tie_tol``, i.e. a chain of near-ties
        leaves the top group without a clean boundary.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    lam, tau, d = np_.lam, np_.tau, np_.d
    m, branch = classify(np_, tie_tol)
    lam1 = lam[0]
    if m < d:
        gap = lam[m - 1] - lam[m]
        if gap <= tie_tol:
            raise GroupSeparationTooSmall(f"lambda gap {gap:.3g} <= tie_tol {tie_tol:.3g}")

    # coordinates outside the top group: Gaussian in the tangent directions
    sep = lam1 - lam[m:]
    t_out = tau[m:]
    log_out = float(np.sum(t_out**2 / (4.0 * sep)) - 0.5 * np.sum(np.log(sep)))
    dtau = np.empty(d)
    dlam = np.empty(d)
    dtau[m:] = t_out / (2.0 * sep)
    dlam[m:] = (t_out / (2.0 * sep)) ** 2 + 1.0 / (2.0 * sep)

    log_r = math.log(r)
    if branch == SIMPLE:
        t1 = tau[0]
        a = r * abs(t1)
        gamma = abs(t1)
        log_f = 0.5 * (d - 1) * math.log(math.pi) + a + math.log1p(math.exp(-2.0 * a)) + r * r * lam1 + log_out
        dtau[0] = r * math.tanh(r * t1)
        dlam[0] = r * r
    elif branch == TAU_ZERO:
        gamma = 0.0
        log_f = (m - 1) * log_r + log_surface_area(m) + r * r * lam1 + 0.5 * (d - m) * math.log(math.pi) + log_out
        dtau[:m] = 0.0
        dlam[:m] = r * r / m
    else:
        top = tau[:m]
        gamma = float(np.sqrt(np.sum(top**2)))
        log_f = (
            r * r * lam1
            + r * gamma
            + 0.5 * (m - 1) * math.log(2.0 * r / gamma)
            + 0.5 * (d - 1) * math.log(math.pi)
            + log_out
        )
        zero = np.abs(top) <= tie_tol
        dtau[:m] = np.where(zero, 0.0, r * top / gamma)
        dlam[:m] = np.where(zero, r / gamma, (r * top / gamma) ** 2)
    return LaplaceEval(m=m, branch=branch, gamma=gamma, log_f=log_f, dtau=dtau, dlambda=dlam)

"""Model parameters and the change of variables to Fisher-Bingham form.

The ball probability of ``X ~ N(mu, diag(sigma2))`` is written in terms of
``lambda_i = -1/(2 sigma_i^2)`` and ``tau_i = mu_i / sigma_i^2``. Coordinates
are reordered so that ``lambda_1`` is the largest, which is the coordinate
singled out by the large-radius gauge and by the Laplace asymptotics.

A non-diagonal covariance can be handled by the caller: rotate into the
eigenbasis of Sigma (``w, V = eigh(Sigma)``; use ``sigma2 = w`` and
``mu = V.T @ mu``). The norm of X is invariant under that rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFinite, NonPositiveVariance

__all__ = ["ModelParams", "NaturalParams", "to_natural", "surface_area", "log_surface_area"]


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ModelParams:
    """Diagonal normal model: variances ``sigma2`` and means ``mu``."""

    sigma2: np.ndarray
    mu: np.ndarray

    def __init__(self, sigma2, mu=None):
        s = np.atleast_1d(np.asarray(sigma2, dtype=float))
        m = np.zeros_like(s) if mu is None else np.atleast_1d(np.asarray(mu, dtype=float))
        if s.ndim != 1 or s.size == 0:
            raise ValueError("sigma2 must be a non-empty 1-d sequence")
        if m.shape != s.shape:
            raise ValueError(f"mu has {m.size} entries, expected {s.size}")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(m))):
            raise NonFinite("sigma2 and mu must be finite")
        if np.any(s <= 0):
            raise NonPositiveVariance("every variance must be strictly positive")
        object.__setattr__(self, "sigma2", _frozen(s))
        object.__setattr__(self, "mu", _frozen(m))

    @property
    def d(self) -> int:
        return int(self.sigma2.size)


@dataclass(frozen=True)
class NaturalParams:
    """Sorted Fisher-Bingham parameters.

    Attributes
    ----------
    lam, tau : ndarray
        Parameters in sorted order, ``0 > lam[0] >= lam[1] >= ...``.
    perm : tuple of int
        ``perm[k]`` is the user index of sorted coordinate ``k``.
    prefactor_log : float
        log of ``prod(sqrt(-lam)) * pi**(-d/2) * exp(sum(tau**2 / lam) / 4)``.
    """

    lam: np.ndarray
    tau: np.ndarray
    perm: tuple
    prefactor_log: float = field(default=math.nan)

    def __post_init__(self):
        object.__setattr__(self, "lam", _frozen(self.lam))
        object.__setattr__(self, "tau", _frozen(self.tau))
        object.__setattr__(self, "perm", tuple(int(p) for p in self.perm))
        if math.isnan(self.prefactor_log):
            object.__setattr__(self, "prefactor_log", _prefactor_log(self.lam, self.tau))

    @property
    def d(self) -> int:
        return int(self.lam.size)

    @classmethod
    def from_arrays(cls, lam, tau) -> "NaturalParams":
        """Build directly from (lambda, tau), sorting as :func:`to_natural` does."""
        lam = np.asarray(lam, dtype=float)
        tau = np.asarray(tau, dtype=float)
        order = _sort_order(lam, tau)
        return cls(lam[order], tau[order], tuple(order))

    def to_user_order(self, values) -> np.ndarray:
        """Map a length-d array in sorted order back to the user's ordering."""
        values = np.asarray(values)
        out = np.empty_like(values)
        out[list(self.perm)] = values
        return out

    def to_model(self) -> ModelParams:
        lam = self.to_user_order(self.lam)
        tau = self.to_user_order(self.tau)
        sigma2 = -0.5 / lam
        return ModelParams(sigma2, tau * sigma2)


def _sort_order(lam: np.ndarray, tau: np.ndarray) -> list:
    return sorted(range(lam.size), key=lambda i: (-lam[i], -abs(tau[i]), i))


def _prefactor_log(lam: np.ndarray, tau: np.ndarray) -> float:
    d = lam.size
    if np.any(lam >= 0):
        return math.nan
    return float(
        0.5 * np.sum(np.log(-lam)) - 0.5 * d * math.log(math.pi) + 0.25 * np.sum(tau**2 / lam)
    )


def to_natural(params: ModelParams) -> NaturalParams:
    """Convert (sigma2, mu) to sorted (lambda, tau) and the log prefactor."""
    lam = -0.5 / params.sigma2
    tau = params.mu / params.sigma2
    order = _sort_order(lam, tau)
    return NaturalParams(lam[order], tau[order], tuple(order))


def log_surface_area(d: int) -> float:
    """log of the area of the unit sphere in R^d."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return math.log(2.0) + 0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d)


def surface_area(d: int) -> float:
    """Area of the unit sphere ``S^{d-1}``: ``2 pi^{d/2} / Gamma(d/2)``."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d <= 300:
        return 2.0 * math.pi ** (0.5 * d) / math.gamma(0.5 * d)
    return math.exp(log_surface_area(d))

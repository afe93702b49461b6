"""Independent reference values used to check the HGM solver.

Monte Carlo
    Draws come from NumPy's ``Generator(PCG64(seed))`` and its
    ``standard_normal`` (ziggurat) sampler, in chunks of ``CHUNK`` vectors.
    The stream is fully determined by the seed, the chunk size and the order
    of calls, so a fixed seed reproduces the estimate bit for bit.
Sphere quadrature
    Composite Gauss-Legendre on the angular parameterisation of the sphere,
    doubling the panel count until two successive values agree.
Closed forms
    Isotropic standard normal (chi distribution) and the pairwise repeated
    variances ``1/(2k)`` whose ball probability factorises into
    ``(1 - exp(-r^2))^n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence
from .model import ModelParams, NaturalParams, log_surface_area

__all__ = [
    "McOptions",
    "mc_ball_probability",
    "quad_fisher_bingham",
    "chi_closed_form",
    "exp_product_closed_form",
]

CHUNK = 1 << 20
QUAD_NODES = 20


@dataclass(frozen=True)
class McOptions:
    n_samples: int = 10_000_000
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if int(self.n_samples) < 1:
            raise ValueError("n_samples must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


def mc_ball_probability(params: ModelParams, R: float, opts: McOptions | None = None) -> tuple[float, float]:
    """Monte Carlo estimate of ``P(||X|| <= R)`` and its standard error.

    With ``antithetic`` the draws come in pairs ``mu +- sigma z``. The two
    indicators of a pair are correlated, so the standard error is then taken
    from the spread of the pair averages rather than the binomial formula.
    """
    opts = opts or McOptions()
    if not R > 0:
        raise ValueError("R must be positive")
    rng = np.random.Generator(np.random.PCG64(int(opts.seed)))
    sd = np.sqrt(params.sigma2)
    mu = params.mu
    r2 = R * R
    d = params.d
    if not opts.antithetic:
        n = int(opts.n_samples)
        hits = 0
        left = n
        while left:
            k = min(left, CHUNK)
            x = rng.standard_normal((k, d)) * sd + mu
            hits += int(np.count_nonzero(np.einsum("ij,ij->i", x, x) <= r2))
            left -= k
        p = hits / n
        return p, math.sqrt(p * (1.0 - p) / n)

    pairs = (int(opts.n_samples) + 1) // 2
    s1 = 0.0
    s2 = 0.0
    left = pairs
    while left:
        k = min(left, CHUNK)
        z = rng.standard_normal((k, d)) * sd
        xp = mu + z
        xm = mu - z
        a = (np.einsum("ij,ij->i", xp, xp) <= r2).astype(float)
        a += np.einsum("ij,ij->i", xm, xm) <= r2
        a *= 0.5
        s1 += float(a.sum())
        s2 += float(a @ a)
        left -= k
    p = s1 / pairs
    var = max(s2 / pairs - p * p, 0.0)
    return p, math.sqrt(var / pairs)


def _panels(a: float, b: float, n_panels: int):
    x, w = np.polynomial.legendre.leggauss(QUAD_NODES)
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x).ravel()
    weights = (half[:, None] * w).ravel()
    return nodes, weights


def _log_sum(log_terms: np.ndarray, weights: np.ndarray) -> float:
    top = float(np.max(log_terms))
    return top + math.log(float(np.sum(weights * np.exp(log_terms - top))))


def quad_fisher_bingham(np_: NaturalParams, r: float, *, rel_tol: float = 1e-10, max_doublings: int = 10) -> float:
    """f(r) by direct quadrature over the radius-``r`` sphere, for ``d <= 3``.

    Raises
    ------
    NoConvergence
        If successive panel doublings still differ by more than ``rel_tol``.
    """
    d = np_.d
    lam, tau = np_.lam, np_.tau
    if d > 3:
        raise ValueError("sphere quadrature is only provided for d <= 3")
    if not r > 0:
        raise ValueError("r must be positive")
    if d == 1:
        return math.exp(lam[0] * r * r) * 2.0 * math.cosh(tau[0] * r)

    def log_value(n_panels):
        if d == 2:
            th, w = _panels(0.0, 2.0 * math.pi, n_panels)
            c, s = np.cos(th), np.sin(th)
            e = r * r * (lam[0] * c * c + lam[1] * s * s) + r * (tau[0] * c + tau[1] * s)
            return math.log(r) + _log_sum(e, w)
        th, wt = _panels(0.0, math.pi, n_panels)
        ph, wp = _panels(0.0, 2.0 * math.pi, n_panels)
        ct, st = np.cos(th)[:, None], np.sin(th)[:, None]
        cp, sp = np.cos(ph)[None, :], np.sin(ph)[None, :]
        x, y, z = ct, st * cp, st * sp
        e = r * r * (lam[0] * x * x + lam[1] * y * y + lam[2] * z * z) + r * (tau[0] * x + tau[1] * y + tau[2] * z)
        w = (wt * np.sin(th))[:, None] * wp[None, :]
        return 2.0 * math.log(r) + _log_sum(e, w)

    n = 1
    prev = log_value(n)
    for _ in range(max_doublings):
        n *= 2
        cur = log_value(n)
        if abs(math.expm1(cur - prev)) <= rel_tol:
            return math.exp(cur)
        prev = cur
    raise NoConvergence(f"sphere quadrature did not reach rel_tol={rel_tol:g} with {n} panels")


def chi_closed_form(d: int, r: float) -> float:
    """f(r) for ``sigma2 = 1``, ``mu = 0``: ``S_d r^{d-1} exp(-r^2/2)``."""
    if d < 1 or not r > 0:
        raise ValueError("need d >= 1 and r > 0")
    return math.exp(log_surface_area(d) + (d - 1) * math.log(r) - 0.5 * r * r)


def exp_product_closed_form(n: int, r: float) -> float:
    """Ball probability for variances ``1/(2k)``, each repeated twice, ``k = 1..n``."""
    if n < 1 or not r > 0:
        raise ValueError("need n >= 1 and r > 0")
    return math.exp(n * math.log(-math.expm1(-r * r)))

"""Parameter families used for benchmarks and reference comparisons.

Weights are formed with :class:`fractions.Fraction` and converted to float at
the end, so e.g. ``hirotsu1`` at ``d = 10`` gives exactly ``11/2`` for the
first variance.
"""

from __future__ import annotations

from fractions import Fraction

from .model import ModelParams

__all__ = ["FAMILIES", "CLOSED_FORM_FAMILIES", "MU_PATTERNS", "family_params", "family_sigma2", "family_mu"]

FAMILIES = ("hirotsu1", "hirotsu2", "anderson-darling", "chi", "exp-product")
CLOSED_FORM_FAMILIES = ("chi", "exp-product")
MU_PATTERNS = ("zero", "ramp")


def family_sigma2(name: str, d: int) -> list[Fraction]:
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if name == "hirotsu1":
        return [Fraction(d + 1, k * (k + 1)) for k in range(1, d + 1)]
    if name == "hirotsu2":
        return [Fraction(2 * (d + 2) * (d + 3), k * (k + 1) * (k + 2) * (k + 3)) for k in range(1, d + 1)]
    if name == "anderson-darling":
        # the infinite sum truncated at d terms
        return [Fraction(1, k * (k + 1)) for k in range(1, d + 1)]
    if name == "chi":
        return [Fraction(1)] * d
    if name == "exp-product":
        if d % 2:
            raise ValueError("exp-product needs an even dimension")
        return [Fraction(1, 2 * k) for k in range(1, d // 2 + 1) for _ in range(2)]
    raise ValueError(f"unknown family {name!r}; choose from {', '.join(FAMILIES)}")


def family_mu(pattern: str, d: int) -> list[Fraction]:
    """``zero`` or ``ramp`` = (0, 0.01, ..., 0.01 (d-1))."""
    if pattern == "zero":
        return [Fraction(0)] * d
    if pattern == "ramp":
        return [Fraction(k, 100) for k in range(d)]
    raise ValueError(f"unknown mean pattern {pattern!r}; choose from {', '.join(MU_PATTERNS)}")


def family_params(name: str, d: int, mu_pattern: str = "zero") -> ModelParams:
    s2 = family_sigma2(name, d)
    mu = family_mu(mu_pattern, d)
    return ModelParams([float(x) for x in s2], [float(x) for x in mu])

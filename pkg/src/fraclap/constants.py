"""Closed-form coefficients of the fractional Laplacian in two dimensions.

``c_alpha``   coefficient of the free-space singularity, ``-c_alpha |x|^(2 alpha - 2)``
``C_alpha``   normalisation of the hypersingular kernel ``|x - y|^(-2 - 2 alpha)``
``chi_alpha`` far-field constant of the exterior problem for a unit disk
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import gamma

from .errors import DomainError

ALPHA_MIN = 0.05
ALPHA_MAX = 0.95


@dataclass(frozen=True)
class AlphaParams:
    alpha: float
    c_alpha: float
    C_alpha: float
    chi_alpha: float

    @property
    def beta(self) -> float:
        """Half the kernel exponent, ``1 + alpha``."""
        return 1.0 + self.alpha

    def leading_capacity(self, eps: float) -> float:
        """``c_alpha * chi_alpha * eps^(2 alpha - 2)``, the dominant term of the GMFPT."""
        return self.c_alpha * self.chi_alpha * eps ** (2.0 * self.alpha - 2.0)


def free_space_coefficient(alpha: float) -> float:
    return gamma(1.0 - alpha) / (4.0**alpha * math.pi * gamma(alpha))


def kernel_normalisation(alpha: float) -> float:
    return 4.0**alpha * gamma(1.0 + alpha) / (math.pi * abs(gamma(-alpha)))


def disk_constant(alpha: float) -> float:
    t = (1.0 - alpha) * math.pi
    return t / math.sin(t)


def make_alpha_params(alpha: float, *, allow_extreme: bool = False) -> AlphaParams:
    """Evaluate the alpha-dependent constants.

    Parameters
    ----------
    alpha : float
        Levy index, strictly inside (0, 1).
    allow_extreme : bool
        By default alpha is restricted to ``[0.05, 0.95]`` where the gamma
        factors and the singular quadratures stay well conditioned.

    Raises
    ------
    DomainError
        If alpha is outside the admissible interval.
    """
    alpha = float(alpha)
    lo, hi = (0.0, 1.0) if allow_extreme else (ALPHA_MIN, ALPHA_MAX)
    inside = (lo < alpha < hi) if allow_extreme else (lo <= alpha <= hi)
    if not inside or not math.isfinite(alpha):
        bounds = "(0, 1)" if allow_extreme else f"[{ALPHA_MIN}, {ALPHA_MAX}] (pass allow_extreme=True for (0, 1))"
        raise DomainError(f"alpha={alpha!r} outside admissible interval {bounds}")
    return AlphaParams(
        alpha=alpha,
        c_alpha=free_space_coefficient(alpha),
        C_alpha=kernel_normalisation(alpha),
        chi_alpha=disk_constant(alpha),
    )

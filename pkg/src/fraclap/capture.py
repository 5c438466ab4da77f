"""Matched-asymptotics GMFPT for circular targets of radius ``kappa_i * eps``."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .constants import AlphaParams
from .errors import ConfigurationError, RegimeError
from .targets import RegimeWarning, Role, Target, TargetSet  # noqa: F401  re-exported


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class InteractionMatrix:
    """Symmetrised Green's interaction matrix and ``K^-1 = diag(kappa^(2 - 2 alpha))``."""

    g: np.ndarray
    k_inv: np.ndarray
    asymmetry: float = 0.0

    @property
    def size(self) -> int:
        return self.g.shape[0]


GreensProvider = Callable[[np.ndarray], tuple]
"""Maps a source point to ``(R(x0; x0), evaluate)`` where ``evaluate(points)`` returns ``G(points; x0)``."""


def build_interaction(targets: TargetSet, provider: GreensProvider, alpha: float) -> InteractionMatrix:
    """Interaction matrix with ``R(x_i; x_i)`` on the diagonal and ``G(x_i; x_j)`` off it.

    One Green's function solve per target.  The raw matrix is symmetrised and
    the relative asymmetry is recorded.
    """
    N = targets.size
    centers = targets.centers
    g = np.empty((N, N))
    for j in range(N):
        R, evaluate = provider(centers[j])
        g[j, j] = R
        others = [i for i in range(N) if i != j]
        if others:
            g[others, j] = evaluate(centers[others])
    scale = np.max(np.abs(g)) or 1.0
    asym = float(np.max(np.abs(g - g.T)) / scale)
    if asym > 1e-2:
        warnings.warn(f"interaction matrix asymmetry {asym:.2e} exceeds 1e-2", RegimeWarning, stacklevel=2)
    log.info("interaction matrix asymmetry %.3e", asym)
    k_inv = np.diag(targets.kappas ** (2.0 - 2.0 * alpha))
    return InteractionMatrix(0.5 * (g + g.T), k_inv, asym)


def check_size(targets: TargetSet, im: InteractionMatrix) -> None:
    if im.size != targets.size:
        raise ConfigurationError(f"interaction matrix is {im.size}x{im.size} but there are {targets.size} targets")


def capacity_matrix(targets: TargetSet, im: InteractionMatrix, params: AlphaParams) -> np.ndarray:
    """``c chi eps^(2 alpha - 2) K - G``."""
    check_size(targets, im)
    K = np.diag(1.0 / np.diag(im.k_inv))
    return params.leading_capacity(targets.eps) * K - im.g


def check_eps_validity(targets: TargetSet, im: InteractionMatrix, params: AlphaParams) -> bool:
    lead = params.leading_capacity(targets.eps)
    ok = lead >= 5.0 * np.max(np.abs(im.g))
    if not ok:
        warnings.warn(
            f"leading term {lead:.3g} is below 5 max|G| = {5 * np.max(np.abs(im.g)):.3g}; eps may be too large",
            RegimeWarning,
            stacklevel=3,
        )
    return bool(ok)


def _solve_capacity(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > 1e12:
        raise RegimeError(f"capacity matrix is singular (condition {cond:.2e}); eps is too large")
    return np.linalg.solve(M, rhs)


def gmfpt_full(targets: TargetSet, im: InteractionMatrix, params: AlphaParams):
    """GMFPT from the full linear system.

    Returns
    -------
    ubar : float
    s : ndarray
        Source strengths, summing to ``c_alpha``.
    """
    check_eps_validity(targets, im, params)
    e = np.ones(im.size)
    y = _solve_capacity(capacity_matrix(targets, im, params), e)
    ubar = 1.0 / float(e @ y)
    s = params.c_alpha * ubar * y
    if abs(s.sum() - params.c_alpha) > 1e-10 * params.c_alpha:
        raise RegimeError(f"source strengths sum to {s.sum()!r}, expected {params.c_alpha!r}")
    return ubar, s


def gmfpt_two_term(targets: TargetSet, im: InteractionMatrix, params: AlphaParams) -> float:
    check_size(targets, im)
    e = np.ones(im.size)
    kie = im.k_inv @ e
    denom = float(e @ kie)
    return params.leading_capacity(targets.eps) / denom - float(kie @ im.g @ kie) / denom**2


class GreensBank:
    """Green's function solves on a fixed operator, cached per source point.

    Calling the bank with a source point returns ``(R(x0; x0), G(.; x0))``, which is
    the provider protocol expected by :func:`build_interaction`.
    """

    def __init__(self, op, *, cutoff_factory=None):
        self.op = op
        self.cutoff_factory = cutoff_factory
        self._fields: dict = {}

    def field(self, x0):
        from .greens import CutoffSpec, solve_r_tilde

        key = tuple(np.round(np.asarray(x0, dtype=float), 14))
        f = self._fields.get(key)
        if f is None:
            cutoff = self.cutoff_factory(x0) if self.cutoff_factory else CutoffSpec.default(x0)
            f = self._fields[key] = solve_r_tilde(self.op, x0, cutoff)
        return f

    def __call__(self, x0):
        from .greens import regular_part

        f = self.field(x0)
        R, _ = regular_part(f)
        return R, f.G

    def evaluator(self, targets: TargetSet):
        """``(points, i) -> G(points; x_i)`` for the targets in ``targets``."""
        centers = targets.centers

        def evaluate(points, i):
            return self.field(centers[i]).G(points)

        return evaluate

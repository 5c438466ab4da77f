"""Splitting probability: reach the desired target before any obstacle."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .capture import (
    InteractionMatrix,
    RegimeWarning,
    Role,
    Target,
    TargetSet,
    _solve_capacity,
    capacity_matrix,
    check_eps_validity,
    check_size,
)
from .constants import AlphaParams
from .errors import ConfigurationError, RegimeError

log = logging.getLogger(__name__)

BOUND_SLACK = 1e-3


@dataclass(frozen=True)
class SplitResult:
    """Splitting-probability solution.

    ``evaluate`` maps ``(points, source_index)`` to ``G(points; x_source)`` and is
    needed only for :func:`split_field`.
    """

    vbar: float
    s: np.ndarray
    targets: TargetSet
    params: AlphaParams
    evaluate: Optional[Callable] = None


def shield_targets(eps: float, *, center=(0.5, 0.5), count: int = 5, ring: float = 7.0, kappa: float = 1.0):
    """Desired target at ``center`` ringed by ``count`` obstacles at distance ``ring * eps``.

    The first obstacle sits straight above the centre.
    """
    theta = np.pi / 2 + 2 * np.pi * np.arange(count) / count
    cx, cy = center
    out = [Target((cx, cy), kappa, Role.DESIRED)]
    out += [Target((cx + ring * eps * np.cos(t), cy + ring * eps * np.sin(t)), kappa, Role.OBSTACLE) for t in theta]
    return out


def check_roles(targets: TargetSet) -> None:
    desired = [i for i, t in enumerate(targets.targets) if t.role is Role.DESIRED]
    if len(desired) != 1:
        raise ConfigurationError(f"exactly one desired target is required, found {len(desired)}")
    if desired[0] != 0:
        raise ConfigurationError(f"the desired target must be at index 0, found at {desired[0]}")


def _check_probability(v: float) -> float:
    if v < -BOUND_SLACK or v > 1 + BOUND_SLACK:
        raise RegimeError(f"splitting probability {v:.6g} lies outside [0, 1]; eps is too large")
    if v < 0 or v > 1:
        warnings.warn(f"splitting probability {v:.6g} slightly outside [0, 1]", RegimeWarning, stacklevel=3)
    return v


def split_full(targets: TargetSet, im: InteractionMatrix, params: AlphaParams, evaluate=None) -> SplitResult:
    """Splitting probability from the full linear system.

    The source strengths solve ``M s = c (vbar e - e1)`` with ``M = c chi eps^(2a-2) K - G``
    and sum to zero.
    """
    check_roles(targets)
    check_eps_validity(targets, im, params)
    n = im.size
    e = np.ones(n)
    e1 = np.zeros(n)
    e1[0] = 1.0
    M = capacity_matrix(targets, im, params)
    y = _solve_capacity(M, np.column_stack([e, e1]))
    vbar = float(e @ y[:, 1]) / float(e @ y[:, 0])
    s = params.c_alpha * (vbar * y[:, 0] - y[:, 1])
    scale = params.c_alpha * np.abs(y).max()
    if abs(s.sum()) > 1e-10 * scale:
        raise RegimeError(f"source strengths sum to {s.sum():.3e}, expected zero")
    return SplitResult(_check_probability(vbar), s, targets, params, evaluate)


def split_two_term(targets: TargetSet, im: InteractionMatrix, params: AlphaParams) -> float:
    check_roles(targets)
    check_size(targets, im)
    n = im.size
    e = np.ones(n)
    e1 = np.zeros(n)
    e1[0] = 1.0
    kie = im.k_inv @ e
    total = float(e @ kie)
    first = float(kie[0])
    w = im.g @ (total * (im.k_inv @ e1) - first * kie)
    corr = float(kie @ w) / (params.leading_capacity(targets.eps) * total**2)
    return first / total + corr


def split_field(result: SplitResult, x) -> np.ndarray:
    """Pointwise splitting probability, clamped to ``[0, 1]``.

    Points inside a target disk take the boundary value (1 desired, 0 obstacle).
    """
    if result.evaluate is None:
        raise ConfigurationError("split result carries no Green's function evaluator")
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    targets = result.targets
    inside = np.full(len(pts), -1)
    for i, (c, r) in enumerate(zip(targets.centers, targets.radii())):
        d = np.abs(pts - c)
        if targets.boundary.value == "periodic":
            d = np.minimum(d, 1.0 - d)
        inside[(np.hypot(d[:, 0], d[:, 1]) < r) & (inside < 0)] = i
    out = np.empty(len(pts))
    free = inside < 0
    out[inside == 0] = 1.0
    out[inside > 0] = 0.0
    if free.any():
        v = np.full(free.sum(), result.vbar)
        for i, si in enumerate(result.s):
            v += si / result.params.c_alpha * result.evaluate(pts[free], i)
        lo, hi = v.min(), v.max()
        if lo < 0 or hi > 1:
            log.info("clamping splitting field: pre-clamp range [%.6g, %.6g]", lo, hi)
        out[free] = np.clip(v, 0.0, 1.0)
    return out if np.ndim(x) > 1 else out[0]

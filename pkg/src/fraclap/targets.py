"""Absorbing targets: circular disks of radius ``kappa * eps``."""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, RegimeError
from .lattice import BoundaryKind

SEPARATION_FACTOR = 10.0
KAPPA_RANGE = (0.1, 10.0)


class RegimeWarning(UserWarning):
    """Inputs are outside the regime where the expansion is expected to be accurate."""


class Role(enum.Enum):
    DESIRED = "desired"
    OBSTACLE = "obstacle"
    TARGET = "target"


@dataclass(frozen=True)
class Target:
    center: tuple
    kappa: float = 1.0
    role: Role = Role.TARGET

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) != 2 or not all(math.isfinite(v) for v in c):
            raise DomainError(f"target centre must be a finite point in R^2, got {self.center!r}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "role", Role(self.role))
        if not KAPPA_RANGE[0] <= self.kappa <= KAPPA_RANGE[1]:
            raise DomainError(f"kappa={self.kappa} outside [{KAPPA_RANGE[0]}, {KAPPA_RANGE[1]}]")


@dataclass(frozen=True)
class TargetSet:
    """Targets sharing the scale ``eps``.

    Overlapping disks, or disks reaching a reflecting wall, raise
    :class:`RegimeError`.  Separations below ``separation_factor * eps * max(kappa)``
    only warn, since the reference configurations sit at 2 to 8 radii.
    """

    eps: float
    targets: tuple
    boundary: BoundaryKind
    separation_factor: float = SEPARATION_FACTOR
    warnings_issued: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "boundary", BoundaryKind.parse(self.boundary))
        object.__setattr__(self, "targets", tuple(t if isinstance(t, Target) else Target(**t) for t in self.targets))
        if not 0.0 < self.eps < 0.5:
            raise DomainError(f"eps must lie in (0, 0.5), got {self.eps}")
        if not self.targets:
            raise ConfigurationError("at least one target is required")
        issued = []
        for t in self.targets:
            x = np.array(t.center)
            if np.any(x <= 0.0) or np.any(x >= 1.0):
                raise DomainError(f"target centre {t.center} must lie strictly inside the unit square")
        scale = self.eps * max(t.kappa for t in self.targets)
        limit = self.separation_factor * scale
        for i, a in enumerate(self.targets):
            if self.boundary is BoundaryKind.NEUMANN:
                d = min(a.center[0], a.center[1], 1 - a.center[0], 1 - a.center[1])
                if d <= a.kappa * self.eps:
                    raise RegimeError(f"target {i} at {a.center} overlaps the reflecting boundary")
                if d < limit:
                    issued.append(f"target {i} is {d / scale:.2f} radii from the boundary (< {self.separation_factor:g})")
            for j in range(i + 1, len(self.targets)):
                b = self.targets[j]
                d = self.separation(i, j)
                if d <= (a.kappa + b.kappa) * self.eps:
                    raise RegimeError(f"targets {i} and {j} overlap; the well-separated assumption fails")
                if d < limit:
                    issued.append(f"targets {i} and {j} are {d / scale:.2f} radii apart (< {self.separation_factor:g})")
        for msg in issued:
            warnings.warn(msg + "; the well-separated assumption is marginal", RegimeWarning, stacklevel=3)
        object.__setattr__(self, "warnings_issued", tuple(issued))

    def separation(self, i: int, j: int) -> float:
        d = np.abs(np.subtract(self.targets[i].center, self.targets[j].center))
        if self.boundary is BoundaryKind.PERIODIC:
            d = np.minimum(d, 1.0 - d)
        return float(np.hypot(*d))

    @property
    def size(self) -> int:
        return len(self.targets)

    @property
    def centers(self) -> np.ndarray:
        return np.array([t.center for t in self.targets])

    @property
    def kappas(self) -> np.ndarray:
        return np.array([t.kappa for t in self.targets])

    def radii(self) -> np.ndarray:
        return self.eps * self.kappas

    def with_eps(self, eps: float) -> "TargetSet":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            return TargetSet(eps, self.targets, self.boundary, self.separation_factor)

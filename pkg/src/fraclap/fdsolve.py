"""Dense finite-difference oracle for the narrow-capture and splitting problems.

Works directly on the assembled operator and never touches the asymptotic
pipeline.  Nodes inside a target disk are fixed.  The free block ``A_ff`` is
symmetric negative definite whenever at least one node is fixed, so the
reduced system is solved by Cholesky.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.linalg import LinAlgError
from scipy.linalg import cho_factor, cho_solve, lu_factor, lu_solve

from .errors import ConfigurationError, ResolutionError, SolverError
from .lattice import BoundaryKind
from .operator import OperatorMatrix
from .targets import Role, TargetSet

log = logging.getLogger(__name__)

MIN_NODES = 5
BOUND_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class DirichletMask:
    """``fixed[p]`` marks node ``p`` as lying inside a target; ``values[p]`` is its boundary value."""

    fixed: np.ndarray
    values: np.ndarray
    owner: np.ndarray

    @property
    def free(self) -> np.ndarray:
        return ~self.fixed

    def counts(self) -> np.ndarray:
        return np.bincount(self.owner[self.owner >= 0], minlength=int(self.owner.max()) + 1)


def build_mask(op: OperatorMatrix, targets: TargetSet, values=None, *, min_nodes: int = MIN_NODES) -> DirichletMask:
    """Rasterise the target disks: a node is fixed iff its centre is strictly inside a disk.

    Raises
    ------
    ResolutionError
        If some disk contains fewer than ``min_nodes`` nodes.
    """
    nodes = op.grid.nodes()
    N = len(nodes)
    values = np.zeros(targets.size) if values is None else np.asarray(values, dtype=float)
    owner = np.full(N, -1)
    for i, (c, r) in enumerate(zip(targets.centers, targets.radii())):
        d = np.abs(nodes - c)
        if op.boundary is BoundaryKind.PERIODIC:
            d = np.minimum(d, 1.0 - d)
        inside = np.hypot(d[:, 0], d[:, 1]) < r
        count = int(inside.sum())
        if count < min_nodes:
            raise ResolutionError(
                f"target {i} (radius {r:.4g}) covers {count} grid nodes at n={op.grid.n}; at least {min_nodes} are needed"
            )
        owner[inside & (owner < 0)] = i
    fixed = owner >= 0
    vals = np.where(fixed, values[np.maximum(owner, 0)], 0.0)
    return DirichletMask(fixed, vals, owner)


def _factor(M: np.ndarray):
    try:
        return cho_solve, cho_factor(M, overwrite_a=True, check_finite=False)
    except LinAlgError:
        log.warning("reduced system is not positive definite; falling back to LU")
    try:
        return lu_solve, lu_factor(M, overwrite_a=True, check_finite=False)
    except (LinAlgError, ValueError) as exc:
        raise SolverError(f"reduced system is singular: {exc}") from exc


def _solve_reduced(op: OperatorMatrix, mask: DirichletMask, rhs_free: np.ndarray) -> np.ndarray:
    free = np.flatnonzero(mask.free)
    if len(free) == op.grid.size:
        raise SolverError("no fixed nodes; the capture problem is singular")
    M = np.negative(op.entries[np.ix_(free, free)])
    solve, factor = _factor(M)
    out = mask.values.copy()
    out[free] = solve(factor, -rhs_free, check_finite=False)
    return out


def solve_mfpt(op: OperatorMatrix, targets: TargetSet, *, min_nodes: int = MIN_NODES):
    """Mean first passage time on the grid.

    Solves ``A u = -1`` on free nodes with ``u = 0`` inside the targets.

    Returns
    -------
    u : ndarray
        Nodal field, zero inside targets.
    ubar : float
        Average of ``u`` over the unit square.
    """
    mask = build_mask(op, targets, min_nodes=min_nodes)
    u = _solve_reduced(op, mask, -np.ones(int(mask.free.sum())))
    if u.min() < -BOUND_TOL * max(1.0, u.max()):
        raise SolverError(f"maximum principle violated: min u = {u.min():.3e}")
    return u, float(u.mean())


def solve_split(op: OperatorMatrix, targets: TargetSet, *, min_nodes: int = MIN_NODES):
    """Splitting probability on the grid.

    Fixed value 1 inside the desired target (index 0), 0 inside obstacles,
    ``A v = 0`` on free nodes.

    Returns
    -------
    v : ndarray
    vbar : float
        Average of ``v`` over the unit square.
    """
    roles = [t.role for t in targets.targets]
    if roles.count(Role.DESIRED) != 1 or roles[0] is not Role.DESIRED:
        raise ConfigurationError("exactly one desired target is required, at index 0")
    values = np.zeros(targets.size)
    values[0] = 1.0
    mask = build_mask(op, targets, values, min_nodes=min_nodes)
    free = np.flatnonzero(mask.free)
    fixed = np.flatnonzero(mask.fixed)
    coupling = op.entries[np.ix_(free, fixed)] @ mask.values[fixed]
    v = _solve_reduced(op, mask, -coupling)
    if v.min() < -BOUND_TOL or v.max() > 1.0 + BOUND_TOL:
        raise SolverError(f"maximum principle violated: v in [{v.min():.3e}, {v.max():.3e}]")
    return v, float(v.mean())


def write_field_csv(op: OperatorMatrix, values: np.ndarray, path, name: str, header=()) -> None:
    nodes = op.grid.nodes()
    with open(path, "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write(f"x1,x2,{name}\n")
        for (a, b), v in zip(nodes, values):
            fh.write(f"{a:.15g},{b:.15g},{v:.15g}\n")

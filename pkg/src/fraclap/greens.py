"""Source-neutral Green's function by singularity subtraction.

The Green's function is split as ``G = chi u0 + R~``.  Here ``u0`` is the
free-space fundamental solution, ``chi`` is a smooth radial cutoff, and ``R~``
is a smooth remainder.  ``R~`` solves ``A R~ = -1 - sum_m rho_m`` with
``int R~ = -int chi u0``, where ``rho_m`` is the fractional Laplacian of the
``m``-th image of ``chi u0`` with the delta removed.

Every ``rho_m`` is the same radial function ``rho(D)`` of the distance ``D`` to
the image centre.  The profile obeys the scaling law
``rho_{lambda r}(D) = lambda^-2 rho_r(D / lambda)``, so it is built once per
``(alpha, r0 / r1)`` with ``r1 = 1``:

* ``D <= D_split``: ``rho(D) = (-Delta)^alpha [(1 - chi) u0]``.  The argument
  is smooth, and its symmetrised principal-value integral is evaluated in polar
  coordinates about the evaluation point.  The result is stored as piecewise
  Chebyshev interpolants.
* ``D > D_split``: the angular integral about the image centre is a
  hypergeometric function of ``(r / D)^2``.  Expanding it gives a convergent
  moment series in ``D^-2``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import gammaln, roots_jacobi, roots_legendre

from .constants import AlphaParams, make_alpha_params
from .errors import ConfigurationError, DomainError, ResolutionError, SingularityError, SolverError
from .lattice import BoundaryKind, ImageMap, image_point, image_points, image_tail_many
from .operator import GridSpec, OperatorMatrix

log = logging.getLogger(__name__)

SPLIT_RATIO = 1.25  # symmetric form below D_split = 1.25 r1, moment series above
SERIES_TOL = 1e-15


# --- cutoff -------------------------------------------------------------------

def smooth_step(t):
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        g0 = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        g1 = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return g0 / (g0 + g1)


@dataclass(frozen=True)
class CutoffSpec:
    r0: float
    r1: float

    def __post_init__(self):
        if not (0.0 < self.r0 < self.r1) or not math.isfinite(self.r1):
            raise ConfigurationError(f"cutoff radii must satisfy 0 < r0 < r1, got r0={self.r0}, r1={self.r1}")

    @property
    def ratio(self) -> float:
        return self.r0 / self.r1

    def profile(self, r):
        """``chi`` as a function of the radius: 1 on ``[0, r0]``, 0 beyond ``r1``."""
        return smooth_step((self.r1 - np.asarray(r, dtype=float)) / (self.r1 - self.r0))

    @classmethod
    def default(cls, x0, *, r1: float | None = None, r0: float | None = None, fraction: float = 0.9):
        """``r1 = fraction * dist(x0, boundary)``, ``r0 = r1 / 2`` unless given."""
        d = boundary_distance(x0)
        if r1 is None:
            r1 = fraction * d
        if r0 is None:
            r0 = 0.5 * r1
        return cls(float(r0), float(r1))

    def check_inside(self, x0) -> None:
        d = boundary_distance(x0)
        if self.r1 >= d:
            raise ConfigurationError(
                f"cutoff support radius r1={self.r1:.6g} reaches the boundary (distance {d:.6g} from x0)"
            )


def boundary_distance(x0) -> float:
    x0 = _as_point(x0)
    return float(min(x0[0], x0[1], 1.0 - x0[0], 1.0 - x0[1]))


def _as_point(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (2,) or not np.all(np.isfinite(x)):
        raise DomainError(f"expected a point in R^2, got {x!r}")
    return x


def _check_interior(x0) -> np.ndarray:
    x0 = _as_point(x0)
    if np.any(x0 <= 0.0) or np.any(x0 >= 1.0):
        raise DomainError(f"source {x0.tolist()} must lie strictly inside the unit square")
    return x0


def free_space_u0(x, x0, alpha: float) -> float:
    """``-c_alpha |x - x0|^(2 alpha - 2)``."""
    r = float(np.linalg.norm(_as_point(x) - _as_point(x0)))
    if r == 0.0:
        raise SingularityError("free-space Green's function is singular at x = x0")
    return -make_alpha_params(alpha, allow_extreme=True).c_alpha * r ** (2.0 * alpha - 2.0)


# --- radial source profile ----------------------------------------------------

def _gl_panels(edges, q):
    x, w = roots_legendre(q)
    a, b = edges[:-1, None], edges[1:, None]
    return ((a + b) / 2 + (b - a) / 2 * x).ravel(), ((b - a) / 2 * w).ravel()


class RadialSource:
    """``rho(D)`` for the unit cutoff ``r1 = 1``, ``r0 = ratio``.

    Call :meth:`__call__` with a physical ``r1`` to apply the scaling law.
    """

    def __init__(self, params: AlphaParams, ratio: float, *, angular: int = 96, panels: int = 24, order: int = 20):
        if not 0.0 < ratio < 1.0:
            raise ConfigurationError(f"r0/r1 must lie in (0, 1), got {ratio}")
        self.params = params
        self.ratio = ratio
        self.cutoff = CutoffSpec(ratio, 1.0)
        self._angular, self._panels, self._order = angular, panels, order
        self.d_split = SPLIT_RATIO
        self.mu = self._moments()
        self._series_coef = self._series_coefficients()
        self._pieces = self._build_interpolant()

    # moments mu_k = int_0^1 chi(r) r^(2 alpha - 1 + 2k) dr
    def _moments(self):
        a = self.params.alpha
        nterms = int(math.ceil(math.log(SERIES_TOL) / math.log((1.0 / self.d_split) ** 2))) + 4
        k = np.arange(nterms)
        inner = self.ratio ** (2 * a + 2 * k) / (2 * a + 2 * k)
        r, w = _gl_panels(np.linspace(self.ratio, 1.0, 17), 24)
        outer = (self.cutoff.profile(r)[None, :] * r[None, :] ** (2 * a - 1 + 2 * k[:, None])) @ w
        return inner + outer

    def _series_coefficients(self):
        b = self.params.beta
        k = np.arange(len(self.mu))
        poch_ratio = np.exp(gammaln(b + k) - gammaln(b) - gammaln(k + 1.0))
        Q = -2.0 * math.pi * self.params.c_alpha * self.mu
        return self.params.C_alpha * poch_ratio**2 * Q

    def moment(self, k: int, r1: float = 1.0) -> float:
        """``Q_2k = int chi u0 |y|^2k dy`` for a cutoff of outer radius ``r1``."""
        return -2.0 * math.pi * self.params.c_alpha * self.mu[k] * r1 ** (2 * self.params.alpha + 2 * k)

    def _series(self, D):
        u = 1.0 / (D * D)
        acc = np.zeros_like(D)
        for c in self._series_coef[::-1]:
            acc = acc * u + c
        return acc * u**self.params.beta

    def _w(self, r):
        out = np.zeros_like(r)
        m = r > self.ratio
        rm = r[m]
        out[m] = -(1.0 - self.cutoff.profile(rm)) * self.params.c_alpha * rm ** (2 * self.params.alpha - 2)
        return out

    def symmetric(self, D: float) -> float:
        """``(-Delta)^alpha [(1 - chi) u0]`` at distance ``D`` by symmetrised polar quadrature."""
        a = self.params.alpha
        c = self.params.c_alpha
        J, q = self._angular, self._order
        phi = np.arange(J + 1) * (np.pi / (2 * J))
        wphi = np.full(J + 1, np.pi / (2 * J))
        wphi[[0, -1]] *= 0.5
        cp, sp = np.cos(phi)[:, None], np.sin(phi)[:, None]
        T = D + 1.0
        width = 2.0 * (1.0 - self.ratio) / self._panels
        t1 = min(width, T)
        xj, wj = roots_jacobi(q, 0.0, 1.0 - 2 * a)
        tj = t1 * (1 + xj) / 2
        wj = wj * (t1 / 2) ** (2 - 2 * a)
        nmid = max(1, int(math.ceil((T - t1) / width)))
        tm, wm = _gl_panels(np.linspace(t1, T, nmid + 1), q)
        wD = self._w(np.array([D]))[0]

        def bracket(t):
            rp = np.hypot(D + t * cp, t * sp)
            rm = np.hypot(D - t * cp, t * sp)
            return wD - 0.5 * (self._w(rp) + self._w(rm))

        inner = (bracket(tj) / tj**2) @ wj + (bracket(tm) * tm ** (-1 - 2 * a)) @ wm
        xs, ws = roots_legendre(32)
        s = (xs + 1) / 2
        t = T / s
        u0 = lambda r: -c * r ** (2 * a - 2)
        far = (-0.5 * (u0(np.hypot(D + t * cp, t * sp)) + u0(np.hypot(D - t * cp, t * sp))) * t ** (-1 - 2 * a) * T / s**2) @ (ws / 2)
        radial = inner + far + wD * T ** (-2 * a) / (2 * a)
        return float(4.0 * self.params.C_alpha * (radial @ wphi))

    def _build_interpolant(self, deg: int = 24, tol: float = 1e-9):
        f = np.vectorize(self.symmetric)
        scale = abs(self.symmetric(0.5 * (self.ratio + 1.0))) + abs(self.symmetric(1.0))
        pieces = []
        edges = np.linspace(0.0, self.d_split, 9)
        stack = [(edges[i], edges[i + 1]) for i in range(len(edges) - 2, -1, -1)]
        while stack:
            lo, hi = stack.pop()
            coef = cheb.chebinterpolate(lambda s: f(lo + (hi - lo) * (s + 1) / 2), deg)
            if np.max(np.abs(coef[-3:])) > tol * scale and hi - lo > self.d_split / 128:
                mid = 0.5 * (lo + hi)
                stack.extend([(mid, hi), (lo, mid)])
                continue
            pieces.append((lo, hi, coef))
        pieces.sort(key=lambda p: p[0])
        return pieces

    def unit(self, D) -> np.ndarray:
        """Profile for ``r1 = 1``."""
        D = np.asarray(D, dtype=float)
        out = np.empty_like(D)
        far = D > self.d_split
        if np.any(far):
            out[far] = self._series(D[far])
        near = ~far
        if np.any(near):
            Dn = D[near]
            vals = np.empty_like(Dn)
            starts = np.array([p[0] for p in self._pieces])
            idx = np.clip(np.searchsorted(starts, Dn, side="right") - 1, 0, len(starts) - 1)
            for i, (lo, hi, coef) in enumerate(self._pieces):
                sel = idx == i
                if np.any(sel):
                    vals[sel] = cheb.chebval(2 * (Dn[sel] - lo) / (hi - lo) - 1, coef)
            out[near] = vals
        return out

    def __call__(self, D, r1: float = 1.0) -> np.ndarray:
        return self.unit(np.asarray(D, dtype=float) / r1) / (r1 * r1)


@lru_cache(maxsize=32)
def _radial_source(alpha: float, ratio: float) -> RadialSource:
    return RadialSource(make_alpha_params(alpha, allow_extreme=True), ratio)


def radial_source(alpha: float, cutoff: CutoffSpec) -> RadialSource:
    return _radial_source(float(alpha), round(cutoff.ratio, 12))


def rho_m(m, x, x0, cutoff: CutoffSpec, alpha: float, *, boundary) -> float:
    """Source term of the image ``m != 0`` of the cutoff singularity, evaluated at ``x``."""
    imap = ImageMap(boundary, max(abs(int(m[0])), abs(int(m[1])), 1))
    if int(m[0]) == 0 and int(m[1]) == 0:
        raise DomainError("rho_m needs a nonzero image index; use rho_0 for m = (0, 0)")
    x0 = _check_interior(x0)
    cutoff.check_inside(x0)
    centre = image_point(imap, m, x0)
    D = float(np.linalg.norm(_as_point(x) - centre))
    return float(radial_source(alpha, cutoff)(np.array([D]), cutoff.r1)[0])


def rho_0(x, x0, cutoff: CutoffSpec, alpha: float) -> float:
    """Source term of the cutoff singularity itself, finite at ``x = x0``."""
    x0 = _check_interior(x0)
    D = float(np.linalg.norm(_as_point(x) - x0))
    return float(radial_source(alpha, cutoff)(np.array([D]), cutoff.r1)[0])


def source_sum(points, imap: ImageMap, x0, cutoff: CutoffSpec, alpha: float, *, tail: bool = True) -> np.ndarray:
    """``sum_{|m| <= m_max} rho_m`` at ``points`` (shape ``(P, 2)``), plus the far-image estimate."""
    prof = radial_source(alpha, cutoff)
    centres = image_points(imap, x0)
    pts = np.asarray(points, dtype=float)
    total = np.zeros(len(pts))
    for c in centres:
        total += prof(np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1]), cutoff.r1)
    if tail:
        p = prof.params
        q0, q2 = prof.moment(0, cutoff.r1), prof.moment(1, cutoff.r1)
        total += p.C_alpha * (
            q0 * image_tail_many(imap, pts, x0, 2.0 + 2.0 * p.alpha)
            + p.beta**2 * q2 * image_tail_many(imap, pts, x0, 4.0 + 2.0 * p.alpha)
        )
    return total


# --- linear solve ---------------------------------------------------------------

class _ShiftedCholesky:
    """Factor of ``-(A - kappa e e^T)``, which is positive definite because ``A`` is
    negative semidefinite with null space the constants."""

    def __init__(self, op: OperatorMatrix):
        N = op.grid.size
        diag = -np.diag(op.entries)
        self.kappa = float(diag.mean()) / N
        M = -op.entries.copy()
        M += self.kappa
        try:
            self.factor = cho_factor(M, lower=False, overwrite_a=True, check_finite=False)
        except LinAlgError as exc:
            raise SolverError(f"shifted operator is not positive definite: {exc}") from exc

    def solve(self, rhs, total: float) -> np.ndarray:
        """Solve ``A u = rhs`` (``rhs`` orthogonal to constants) with ``sum u = total``."""
        b = -(rhs - self.kappa * total)
        return cho_solve(self.factor, b, check_finite=False)


_FACTOR_CACHE: dict = {}


def clear_cache() -> None:
    """Drop the cached factorisation (it is as large as the operator)."""
    _FACTOR_CACHE.clear()


def constrained_solver(op: OperatorMatrix) -> _ShiftedCholesky:
    key = (id(op), op.key())
    solver = _FACTOR_CACHE.get(key)
    if solver is None:
        _FACTOR_CACHE.clear()
        solver = _FACTOR_CACHE[key] = _ShiftedCholesky(op)
    return solver


@dataclass(frozen=True, eq=False)
class GreensField:
    grid: GridSpec
    boundary: BoundaryKind
    alpha: float
    x0: np.ndarray
    cutoff: CutoffSpec
    m_max: int
    r_tilde: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    rhs_mean: float = 0.0
    singular_mass: float = 0.0

    def r_tilde_grid(self) -> np.ndarray:
        n = self.grid.n
        return self.r_tilde.reshape(n, n)

    def singular_part(self, x) -> np.ndarray:
        """``chi(x - x0) u0(x - x0)`` at points ``x`` of shape ``(P, 2)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.hypot(x[:, 0] - self.x0[0], x[:, 1] - self.x0[1])
        c = make_alpha_params(self.alpha, allow_extreme=True).c_alpha
        out = np.zeros(len(r))
        inside = r < self.cutoff.r1
        with np.errstate(divide="ignore"):
            out[inside] = -c * self.cutoff.profile(r[inside]) * r[inside] ** (2 * self.alpha - 2)
        return out

    def interpolate_r_tilde(self, x) -> np.ndarray:
        return self._interp(np.atleast_2d(np.asarray(x, dtype=float)))

    @cached_property
    def _interp(self) -> RegularGridInterpolator:
        return _interpolator(self)

    def G(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if np.any(np.hypot(x[:, 0] - self.x0[0], x[:, 1] - self.x0[1]) == 0.0):
            raise SingularityError("Green's function is singular at the source")
        return self.singular_part(x) + self.interpolate_r_tilde(x)

    def G_nodes(self) -> np.ndarray:
        """``G`` at every node, NaN at the node nearest the source."""
        nodes = self.grid.nodes()
        g = self.singular_part(nodes) + self.r_tilde
        g[self.grid.nearest_index(self.x0)] = np.nan
        return g


def _interpolator(field: GreensField) -> RegularGridInterpolator:
    n, h = field.grid.n, field.grid.h
    mode = "wrap" if field.boundary is BoundaryKind.PERIODIC else "symmetric"
    padded = np.pad(field.r_tilde_grid(), 3, mode=mode)
    axis = (np.arange(-3, n + 3) + 0.5) * h
    return RegularGridInterpolator((axis, axis), padded, method="cubic")


def solve_r_tilde(op: OperatorMatrix, x0, cutoff: CutoffSpec | None = None, *, tail: bool | None = None) -> GreensField:
    """Solve for the smooth remainder of the Green's function with source ``x0``.

    Parameters
    ----------
    op : OperatorMatrix
    x0 : point strictly inside the unit square
    cutoff : CutoffSpec, optional
        Defaults to :meth:`CutoffSpec.default`.
    tail : bool, optional
        Add the far-image estimate to the source sum.  Follows ``op.tail`` by default.
    """
    x0 = _check_interior(x0)
    cutoff = cutoff or CutoffSpec.default(x0)
    cutoff.check_inside(x0)
    tail = op.tail if tail is None else tail
    params = make_alpha_params(op.alpha, allow_extreme=True)
    grid = op.grid
    imap = ImageMap(op.boundary, op.m_max)
    rhs = -1.0 - source_sum(grid.nodes(), imap, x0, cutoff, op.alpha, tail=tail)
    h2 = grid.h**2
    mean = float(h2 * rhs.sum())
    log.debug("rhs quadrature mean before projection: %.3e", mean)
    rhs = rhs - rhs.mean()
    q0 = radial_source(op.alpha, cutoff).moment(0, cutoff.r1)
    r_tilde = constrained_solver(op).solve(rhs, -q0 / h2)
    return GreensField(grid, op.boundary, params.alpha, x0, cutoff, op.m_max, r_tilde, rhs, mean, q0)


def reconstruct_G(field: GreensField, x) -> float:
    return float(field.G(_as_point(x))[0])


def regular_part(field: GreensField, *, radius: float | None = None):
    """Regular part ``R(x0; x0)`` and its gradient.

    Fits a quadratic to ``R~`` at the nodes within ``radius`` of the source
    (default ``min(r0, 3.5 h)``), where ``R~`` coincides with the regular part.

    Raises
    ------
    ResolutionError
        If ``r0 < 2 h``, so that too few nodes lie on the cutoff plateau.
    """
    h = field.grid.h
    if field.cutoff.r0 < 2.0 * h:
        raise ResolutionError(f"cutoff plateau r0={field.cutoff.r0:.4g} is narrower than two grid spacings (h={h:.4g})")
    radius = radius or min(field.cutoff.r0, 3.5 * h)
    nodes = field.grid.nodes()
    d = nodes - field.x0
    sel = np.hypot(d[:, 0], d[:, 1]) <= radius
    if sel.sum() < 6:
        raise ResolutionError("too few nodes near the source to fit the regular part")
    dx, dy = d[sel, 0], d[sel, 1]
    V = np.column_stack([np.ones_like(dx), dx, dy, dx * dx, dx * dy, dy * dy])
    coef, *_ = np.linalg.lstsq(V, field.r_tilde[sel], rcond=None)
    return float(coef[0]), np.array([coef[1], coef[2]])


def greens_function(op: OperatorMatrix, x0, cutoff: CutoffSpec | None = None) -> GreensField:
    return solve_r_tilde(op, x0, cutoff)


# --- export -------------------------------------------------------------------

def write_field_csv(field: GreensField, path, header=()) -> None:
    """Nodal dump ``x1,x2,r_tilde,rhs,G``; ``G`` is blank at the node nearest the source."""
    nodes = field.grid.nodes()
    g = field.G_nodes()
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2", "r_tilde", "rhs", "G"])
        for (x1, x2), rt, b, gv in zip(nodes, field.r_tilde, field.rhs, g):
            w.writerow([f"{x1:.15g}", f"{x2:.15g}", f"{rt:.15g}", f"{b:.15g}", "" if np.isnan(gv) else f"{gv:.15g}"])


def field_summary(field: GreensField) -> dict:
    R, grad = regular_part(field)
    return {
        "alpha": field.alpha,
        "boundary": field.boundary.value,
        "x0": [float(v) for v in field.x0],
        "r0": field.cutoff.r0,
        "r1": field.cutoff.r1,
        "m_max": field.m_max,
        "n": field.grid.n,
        "R": R,
        "gradR": [float(v) for v in grad],
        "rhs_mean": field.rhs_mean,
    }


def write_field_summary(field: GreensField, path, extra=None) -> None:
    with open(path, "w") as fh:
        json.dump({**(extra or {}), **field_summary(field)}, fh, indent=2)
        fh.write("\n")

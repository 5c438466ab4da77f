"""Image lattices of the unit square and lattice sums of the jump kernel.

Periodic images are translates ``y + m``.  Reflective (Neumann) images are
obtained by successive specular reflections of ``y`` across the grid lines
``x_k = integer``; the image for ``m`` lies in the unit cell whose lower-left
vertex is ``m``.

Lattice sums are truncated at ``|m|_inf <= m_max``.  The omitted far field can
be estimated by replacing the sum over the remaining cells by an integral over
the exterior of the box they leave uncovered (see :func:`image_tail`).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import betainc

from .errors import DomainError

COINCIDENCE_TOL = 1e-14


class BoundaryKind(enum.Enum):
    PERIODIC = "periodic"
    NEUMANN = "neumann"

    @classmethod
    def parse(cls, value) -> "BoundaryKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise DomainError(f"unknown boundary kind {value!r}; expected 'periodic' or 'neumann'") from None


@dataclass(frozen=True)
class ImageMap:
    boundary: BoundaryKind
    m_max: int = 6

    def __post_init__(self):
        object.__setattr__(self, "boundary", BoundaryKind.parse(self.boundary))
        if int(self.m_max) != self.m_max or self.m_max < 0:
            raise DomainError(f"m_max must be a nonnegative integer, got {self.m_max!r}")
        object.__setattr__(self, "m_max", int(self.m_max))

    def offsets(self) -> np.ndarray:
        """All integer pairs with ``|m|_inf <= m_max``, shape ``(K, 2)``."""
        r = np.arange(-self.m_max, self.m_max + 1)
        m1, m2 = np.meshgrid(r, r, indexing="ij")
        return np.stack([m1.ravel(), m2.ravel()], axis=1)


def _check_in_square(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != 2:
        raise DomainError(f"expected a point in R^2, got shape {y.shape}")
    if np.any(y < 0.0) or np.any(y > 1.0) or not np.all(np.isfinite(y)):
        raise DomainError(f"point {y.tolist()} lies outside the closed unit square")
    return y


def reflect_coordinate(m: int, t: float) -> float:
    """Reflect ``t`` across the lines ``1, 2, ..., m`` (m > 0) or ``0, -1, ..., m + 1`` (m < 0)."""
    p = t
    if m > 0:
        for k in range(1, m + 1):
            p = 2 * k - p
    else:
        for k in range(0, m, -1):
            p = 2 * k - p
    return p


def image_point(imap: ImageMap, m, y) -> np.ndarray:
    y = _check_in_square(y)
    m1, m2 = (int(v) for v in m)
    if imap.boundary is BoundaryKind.PERIODIC:
        return np.array([y[0] + m1, y[1] + m2])
    return np.array([reflect_coordinate(m1, y[0]), reflect_coordinate(m2, y[1])])


def neumann_image_closed_form(m, y) -> np.ndarray:
    """Closed-form reflective image ``m + mod(m, 2) + (-1)^m y`` componentwise."""
    m = np.asarray(m)
    y = np.asarray(y, dtype=float)
    return m + np.mod(m, 2) + np.where(m % 2 == 0, 1.0, -1.0) * y


def image_points(imap: ImageMap, y) -> np.ndarray:
    """Images of ``y`` for every ``|m|_inf <= m_max``, shape ``(K, 2)``, ordered as :meth:`ImageMap.offsets`."""
    y = _check_in_square(y)
    m = imap.offsets()
    if imap.boundary is BoundaryKind.PERIODIC:
        return y[None, :] + m
    return neumann_image_closed_form(m, y[None, :])


def image_sum_kernel(imap: ImageMap, x, y, alpha: float, *, tail: bool = False) -> float:
    """Truncated image sum ``sum_m |T_m(y) - x|^(-2 - 2 alpha)``.

    Terms whose image coincides with ``x`` are dropped.  With ``tail=True`` the
    continuum estimate of the omitted ``|m|_inf > m_max`` terms is added.
    """
    x = _check_in_square(x)
    pts = image_points(imap, y)
    if imap.boundary is BoundaryKind.PERIODIC:
        # centre the window on the nearest copy so the sum depends on y - x mod 1 only
        pts = pts - np.round(pts[len(pts) // 2] - x)
    d = np.linalg.norm(pts - x[None, :], axis=1)
    d = d[d >= COINCIDENCE_TOL]
    total = float(np.sum(d ** (-2.0 - 2.0 * alpha)))
    if tail:
        total += image_tail(imap, x, y, 2.0 + 2.0 * alpha)
    return total


# --- far-field tail ---------------------------------------------------------

def _quadrant_exterior(p, q, nu):
    # int over {z1 > 0, z2 > 0} minus [0, p] x [0, q] of |z|^(-2 - nu) dz
    a = 0.5 * (nu + 1.0)
    r2 = p * p + q * q
    half_beta = 0.5 * beta_fn(0.5, a)
    return half_beta / nu * (p ** -nu * betainc(0.5, a, q * q / r2) + q ** -nu * betainc(0.5, a, p * p / r2))


def exterior_box_integral(lo1, hi1, lo2, hi2, nu):
    """``int_{R^2 \\ B} |z|^(-2 - nu) dz`` for the box ``B = [lo1, hi1] x [lo2, hi2]`` around the origin.

    Broadcasts over its array arguments.  Requires ``lo < 0 < hi`` and ``nu > 0``.
    """
    lo1, hi1, lo2, hi2 = (np.asarray(v, dtype=float) for v in (lo1, hi1, lo2, hi2))
    if np.any(lo1 >= 0) or np.any(lo2 >= 0) or np.any(hi1 <= 0) or np.any(hi2 <= 0):
        raise DomainError("box must strictly contain the origin")
    return (
        _quadrant_exterior(hi1, hi2, nu)
        + _quadrant_exterior(-lo1, hi2, nu)
        + _quadrant_exterior(-lo1, -lo2, nu)
        + _quadrant_exterior(hi1, -lo2, nu)
    )


def _cell_sum(lo1, hi1, lo2, hi2, nu, area):
    # midpoint rule on cells of the given area: sum ~ (int f - area/24 int lap f) / area,
    # with lap |z|^(-2 - nu) = (2 + nu)^2 |z|^(-4 - nu)
    first = exterior_box_integral(lo1, hi1, lo2, hi2, nu)
    second = exterior_box_integral(lo1, hi1, lo2, hi2, nu + 2.0)
    return (first - area / 24.0 * (2.0 + nu) ** 2 * second) / area


def _wrap(d):
    return d - np.round(d)


def _even_k_range(M):
    # m = 2k even in [-M, M]
    return -(M // 2), M // 2


def _odd_k_range(M):
    # m = 2k + 1 odd in [-M, M]
    return -((M + 1) // 2), (M - 1) // 2


def _tail_boxes_1d(boundary: BoundaryKind, M: int, xc, yc):
    """Per-coordinate (weight, lo, hi) boxes, one per sublattice, relative to ``x``."""
    if boundary is BoundaryKind.PERIODIC:
        d = _wrap(yc - xc)
        return [(1.0, d - M - 0.5, d + M + 0.5)]
    d = yc - xc
    s = yc + xc
    k0, k1 = _even_k_range(M)
    j0, j1 = _odd_k_range(M)
    # each reflective sublattice has spacing 2 (cells of side 2, density 1/2 per coordinate)
    return [(0.5, 2 * k0 + d - 1.0, 2 * k1 + d + 1.0), (0.5, 2 * j0 + 1.0 - s, 2 * j1 + 3.0 - s)]


def image_tail(imap: ImageMap, x, y, exponent: float) -> float:
    """Continuum estimate of ``sum_{|m|_inf > m_max} |T_m(y) - x|^(-exponent)``.

    Each omitted image is the centre of a lattice cell; the sum is replaced by
    the integral over the union of those cells (the exterior of the box covered
    by the retained ones) plus the second-order midpoint correction.
    """
    if imap.m_max < 1:
        raise DomainError("tail estimate needs m_max >= 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nu = exponent - 2.0
    b1 = _tail_boxes_1d(imap.boundary, imap.m_max, x[0], y[0])
    b2 = _tail_boxes_1d(imap.boundary, imap.m_max, x[1], y[1])
    total = 0.0
    for w1, lo1, hi1 in b1:
        for w2, lo2, hi2 in b2:
            total += _cell_sum(lo1, hi1, lo2, hi2, nu, 1.0 / (w1 * w2))
    return float(total)


def image_tail_many(imap: ImageMap, x: np.ndarray, y, exponent: float) -> np.ndarray:
    """Vectorised :func:`image_tail` over points ``x`` of shape ``(P, 2)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nu = exponent - 2.0
    b1 = _tail_boxes_1d(imap.boundary, imap.m_max, x[:, 0], y[0])
    b2 = _tail_boxes_1d(imap.boundary, imap.m_max, x[:, 1], y[1])
    total = np.zeros(len(x))
    for w1, lo1, hi1 in b1:
        for w2, lo2, hi2 in b2:
            total += _cell_sum(lo1, hi1, lo2, hi2, nu, 1.0 / (w1 * w2))
    return total


# --- tables for grid assembly -------------------------------------------------

@dataclass(frozen=True)
class KernelTables:
    """Image sums between cell-centred nodes, indexed by node differences and sums.

    For nodes ``i, j`` along one axis (``x_i = (i + 1/2) h``) the image offsets
    depend either on ``j - i`` (translations, even reflections) or on
    ``i + j`` (odd reflections).  ``tables[(f1, f2)]`` holds the kernel summed
    over all images of family ``f1`` in the first coordinate and ``f2`` in the
    second; ``"diff"`` tables are indexed by ``j - i + n - 1`` and ``"sum"``
    tables by ``i + j``.
    """

    n: int
    tables: dict

    def row(self, i1: int, i2: int) -> np.ndarray:
        """Kernel from node ``(i1, i2)`` to every node, shape ``(n, n)``."""
        n = self.n
        sl = {
            1: {"diff": slice(n - 1 - i1, 2 * n - 1 - i1), "sum": slice(i1, i1 + n)},
            2: {"diff": slice(n - 1 - i2, 2 * n - 1 - i2), "sum": slice(i2, i2 + n)},
        }
        out = None
        for (f1, f2), t in self.tables.items():
            block = t[sl[1][f1], sl[2][f2]]
            out = block.copy() if out is None else out + block
        return out


def _families_1d(boundary: BoundaryKind, n: int, M: int):
    h = 1.0 / n
    m = np.arange(-M, M + 1)
    diff = np.arange(-(n - 1), n) * h
    if boundary is BoundaryKind.PERIODIC:
        wrapped = _wrap(diff)
        return {"diff": (wrapped[:, None] + m[None, :], diff)}
    s = (np.arange(0, 2 * n - 1) + 1) * h
    even, odd = m[m % 2 == 0], m[m % 2 != 0]
    fams = {"diff": (diff[:, None] + even[None, :], diff)}
    if odd.size:
        fams["sum"] = (odd[None, :] + 1.0 - s[:, None], s)
    return fams


def _pair_sum(o1, o2, exponent):
    out = np.zeros((o1.shape[0], o2.shape[0]))
    sq2 = o2 * o2
    for k in range(o1.shape[1]):
        r2 = (o1[:, k] ** 2)[:, None, None] + sq2[None, :, :]
        with np.errstate(divide="ignore"):
            t = r2 ** (-0.5 * exponent)
        t[r2 < COINCIDENCE_TOL**2] = 0.0
        out += t.sum(axis=2)
    return out


def kernel_tables(imap: ImageMap, n: int, alpha: float, *, tail: bool = True) -> KernelTables:
    """Build :class:`KernelTables` for an ``n x n`` cell-centred grid."""
    exponent = 2.0 + 2.0 * alpha
    fams = _families_1d(imap.boundary, n, imap.m_max)
    tables = {}
    for f1, (o1, c1) in fams.items():
        for f2, (o2, c2) in fams.items():
            tables[(f1, f2)] = _pair_sum(o1, o2, exponent)
    if tail:
        if imap.m_max < 1:
            raise DomainError("tail correction needs m_max >= 1")
        for (f1, f2), t in tables.items():
            t += _tail_table(imap, n, f1, f2, exponent)
    return KernelTables(n=n, tables=tables)


def _tail_table(imap, n, f1, f2, exponent):
    h = 1.0 / n
    M = imap.m_max
    nu = exponent - 2.0
    if imap.boundary is BoundaryKind.PERIODIC:
        d = _wrap(np.arange(-(n - 1), n) * h)
        lo, hi = d - M - 0.5, d + M + 0.5
        return _cell_sum(lo[:, None], hi[:, None], lo[None, :], hi[None, :], nu, 1.0)

    def box(f):
        if f == "diff":
            d = np.arange(-(n - 1), n) * h
            k0, k1 = _even_k_range(M)
            return 2 * k0 + d - 1.0, 2 * k1 + d + 1.0
        s = (np.arange(0, 2 * n - 1) + 1) * h
        j0, j1 = _odd_k_range(M)
        return 2 * j0 + 1.0 - s, 2 * j1 + 3.0 - s

    lo1, hi1 = box(f1)
    lo2, hi2 = box(f2)
    return _cell_sum(lo1[:, None], hi1[:, None], lo2[None, :], hi2[None, :], nu, 4.0)


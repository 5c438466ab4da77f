"""Dense discretisation of the fractional Laplacian on a cell-centred grid.

Entry ``(p, q)`` for ``p != q`` is ``C_alpha h^2`` times the image-summed
kernel between nodes ``p`` and ``q``; the diagonal is minus the off-diagonal
row sum, so constants lie in the null space and the matrix is symmetric.

By default the image sum is augmented with a continuum estimate of the images
beyond ``m_max`` (:func:`fraclap.lattice.image_tail`).  Without it the
truncation error of the image sum is ``O(m_max^(-2 alpha))``, which dominates
the discretisation error at moderate ``n``.

Two schemes are available.  ``"lattice"`` is the plain Riemann sum with zero
self-weight.  Its consistency error for smooth ``f`` is
``C_alpha Z(2 alpha) / 4 * h^(2 - 2 alpha) * Laplacian f``, where ``Z`` is the
Epstein zeta function of the square lattice.  ``"corrected"`` subtracts that
term with the 5-point Laplacian.  The result is still symmetric, has zero row
sums and nonnegative off-diagonal entries, and its error is ``O(h^2)``.
"""
from __future__ import annotations

import hashlib
import logging
import os
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
import numpy as np

from .constants import AlphaParams, make_alpha_params
from .errors import DomainError, ResourceError
from .lattice import BoundaryKind, ImageMap, kernel_tables

SCHEMES = ("lattice", "corrected")

log = logging.getLogger(__name__)

DEFAULT_MEMORY_CAP = 4 * 1024**3
MAGIC = b"FLAP"
DUMP_VERSION = 1
_HEADER = struct.Struct("<4sIIBdI")
HEADER_SIZE = 32
_BOUNDARY_CODE = {BoundaryKind.PERIODIC: 0, BoundaryKind.NEUMANN: 1}


@dataclass(frozen=True)
class GridSpec:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"grid size must be an integer >= 2, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def size(self) -> int:
        return self.n * self.n

    def axis(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(n*n, 2)``, flattened row-major in ``(i1, i2)``."""
        t = self.axis()
        x1, x2 = np.meshgrid(t, t, indexing="ij")
        return np.stack([x1.ravel(), x2.ravel()], axis=1)

    def nearest_index(self, x) -> int:
        i = np.clip(np.floor(np.asarray(x, dtype=float) * self.n).astype(int), 0, self.n - 1)
        return int(i[0] * self.n + i[1])


def dense_bytes(n: int) -> int:
    return n**4 * 8


def max_grid_size(memory_cap: int = DEFAULT_MEMORY_CAP) -> int:
    return int((memory_cap / 8) ** 0.25)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    grid: GridSpec
    boundary: BoundaryKind
    alpha: float
    m_max: int
    entries: np.ndarray = field(repr=False)
    tail: bool = True
    scheme: str = "lattice"

    @property
    def params(self) -> AlphaParams:
        return make_alpha_params(self.alpha, allow_extreme=True)

    def key(self) -> tuple:
        return (self.grid.n, self.boundary.value, self.alpha, self.m_max, self.tail, self.scheme)


def epstein_zeta_square(s: float) -> float:
    """Analytically continued ``sum_{j != 0} |j|^-s`` over the square lattice, ``4 zeta(s/2) beta(s/2)``."""
    return 4.0 * float(mpmath.zeta(s / 2.0) * mpmath.dirichlet(s / 2.0, [0, 1, 0, -1]))


def correction_weight(alpha: float, h: float) -> float:
    """Coefficient of the 5-point Laplacian added by the corrected scheme."""
    params = make_alpha_params(alpha, allow_extreme=True)
    return -params.C_alpha * epstein_zeta_square(2.0 * alpha) / 4.0 * h ** (2.0 - 2.0 * alpha)


def _add_laplacian(A: np.ndarray, n: int, boundary: BoundaryKind, weight: float) -> None:
    # weight / h^2 on each neighbour; a reflected neighbour equals the node itself and drops out
    idx = np.arange(n * n).reshape(n, n)
    c = weight * n * n
    for axis in (0, 1):
        for step in (1, -1):
            nb = np.roll(idx, -step, axis=axis)
            valid = np.ones((n, n), dtype=bool)
            if boundary is BoundaryKind.NEUMANN:
                edge = [slice(None), slice(None)]
                edge[axis] = -1 if step == 1 else 0
                valid[tuple(edge)] = False
            p, q = idx[valid], nb[valid]
            np.add.at(A, (p, q), c)
            np.add.at(A, (p, p), -c)


def structure_defects(entries: np.ndarray, block: int = 1024) -> tuple[float, float]:
    """Symmetry defect and largest row sum, both relative to ``max |A|``."""
    scale = float(np.max(np.abs(np.diag(entries)))) or 1.0
    N = entries.shape[0]
    asym = 0.0
    for a in range(0, N, block):
        for b in range(a, N, block):
            d = np.abs(entries[a:a + block, b:b + block] - entries[b:b + block, a:a + block].T).max()
            asym = max(asym, float(d))
    rows = float(np.abs(entries.sum(axis=1)).max())
    return asym / scale, rows / scale


def _check_invariants(entries: np.ndarray) -> None:
    asym, rows = structure_defects(entries)
    if asym > 1e-12:
        raise AssertionError(f"assembled operator not symmetric: relative defect {asym:.3e}")
    if rows > 1e-10:
        raise AssertionError(f"assembled operator row sums not zero: relative defect {rows:.3e}")


def assemble(
    grid: GridSpec,
    boundary,
    alpha: float,
    m_max: int = 6,
    *,
    tail: bool = True,
    scheme: str = "lattice",
    memory_cap: int = DEFAULT_MEMORY_CAP,
    check: bool = True,
    allow_extreme: bool = False,
) -> OperatorMatrix:
    """Assemble the dense operator.

    Parameters
    ----------
    grid : GridSpec
    boundary : BoundaryKind or str
    alpha : float
    m_max : int
        Image truncation radius ``|m|_inf <= m_max``.
    tail : bool
        Add the continuum estimate of the omitted images.
    scheme : {"lattice", "corrected"}
        ``"corrected"`` removes the leading consistency error.
    memory_cap : int
        Refuse to allocate more than this many bytes.

    Raises
    ------
    ResourceError
        If the ``n^4 * 8`` byte matrix exceeds ``memory_cap``.
    """
    boundary = BoundaryKind.parse(boundary)
    if scheme not in SCHEMES:
        raise DomainError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    params = make_alpha_params(alpha, allow_extreme=allow_extreme)
    need = dense_bytes(grid.n)
    if need > memory_cap:
        raise ResourceError(
            f"dense operator for n={grid.n} needs {need / 2**30:.2f} GiB, cap is {memory_cap / 2**30:.2f} GiB "
            f"(largest n under the cap: {max_grid_size(memory_cap)})"
        )
    cached = _load_cached(grid, boundary, params.alpha, m_max, tail, scheme)
    if cached is not None:
        return cached

    imap = ImageMap(boundary, m_max)
    n, h = grid.n, grid.h
    tables = kernel_tables(imap, n, params.alpha, tail=tail)
    N = grid.size
    A = np.empty((N, N))
    w = params.C_alpha * h * h
    for i1 in range(n):
        for i2 in range(n):
            p = i1 * n + i2
            row = tables.row(i1, i2).ravel()
            row *= w
            row[p] = 0.0
            row[p] = -row.sum()
            A[p] = row
    if scheme == "corrected":
        _add_laplacian(A, n, boundary, correction_weight(params.alpha, h))
    if check:
        _check_invariants(A)
    op = OperatorMatrix(grid, boundary, params.alpha, m_max, A, tail, scheme)
    _store_cached(op)
    return op


def apply(op: OperatorMatrix, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.ndim == 2:
        f = f.ravel()
    if f.shape != (op.grid.size,):
        raise DomainError(f"field has {f.size} values, operator expects {op.grid.size}")
    return op.entries @ f


def eigenmode(grid: GridSpec, boundary, k: int, l: int):
    """Grid samples of an eigenfunction and its eigenvalue ``|lambda|`` of the Laplacian."""
    boundary = BoundaryKind.parse(boundary)
    if k == 0 and l == 0:
        raise DomainError("mode (0, 0) is the constant null mode")
    x = grid.nodes()
    w = np.pi if boundary is BoundaryKind.NEUMANN else 2.0 * np.pi
    phi = np.cos(k * w * x[:, 0]) * np.cos(l * w * x[:, 1])
    return phi, w * w * (k * k + l * l)


def spectral_residual(op: OperatorMatrix, k: int, l: int) -> float:
    """Relative residual ``|A phi + |lambda|^alpha phi| / ||lambda|^alpha phi|`` for mode ``(k, l)``."""
    phi, lam = eigenmode(op.grid, op.boundary, k, l)
    target = lam**op.alpha * phi
    return float(np.linalg.norm(apply(op, phi) + target) / np.linalg.norm(target))


# --- binary dump --------------------------------------------------------------

def dump(op: OperatorMatrix, path) -> None:
    """Write the matrix as little-endian float64 after a 32-byte header."""
    header = _HEADER.pack(MAGIC, DUMP_VERSION, op.grid.n, _BOUNDARY_CODE[op.boundary], op.alpha, op.m_max)
    with open(path, "wb") as fh:
        fh.write(header.ljust(HEADER_SIZE, b"\0"))
        np.ascontiguousarray(op.entries, dtype="<f8").tofile(fh)


def load(path, *, tail: bool = True, scheme: str = "lattice") -> OperatorMatrix:
    """Read a dump written by :func:`dump`.  The header does not record ``tail`` or ``scheme``."""
    with open(path, "rb") as fh:
        raw = fh.read(HEADER_SIZE)
        if len(raw) != HEADER_SIZE:
            raise DomainError(f"{path}: truncated header")
        magic, version, n, code, alpha, m_max = _HEADER.unpack(raw[: _HEADER.size])
        if magic != MAGIC or version != DUMP_VERSION:
            raise DomainError(f"{path}: not an operator dump (magic {magic!r}, version {version})")
        boundary = {v: k for k, v in _BOUNDARY_CODE.items()}.get(code)
        if boundary is None:
            raise DomainError(f"{path}: unknown boundary code {code}")
        N = n * n
        entries = np.fromfile(fh, dtype="<f8", count=N * N)
    if entries.size != N * N:
        raise DomainError(f"{path}: expected {N * N} entries, found {entries.size}")
    return OperatorMatrix(GridSpec(n), boundary, alpha, m_max, entries.reshape(N, N).astype(float, copy=False), tail, scheme)


# --- caching ------------------------------------------------------------------

_MEMORY_CACHE: "OrderedDict[tuple, OperatorMatrix]" = OrderedDict()
_MEMORY_CACHE_BYTES = 3 * 1024**3


def clear_cache() -> None:
    _MEMORY_CACHE.clear()


def _cache_file(key) -> Path | None:
    root = os.environ.get("FRACLAP_CACHE_DIR")
    if not root:
        return None
    digest = hashlib.sha256(repr(key).encode()).hexdigest()[:16]
    return Path(root) / f"operator-{key[1]}-n{key[0]}-{digest}.bin"


def _load_cached(grid, boundary, alpha, m_max, tail, scheme):
    key = (grid.n, boundary.value, alpha, m_max, tail, scheme)
    if key in _MEMORY_CACHE:
        _MEMORY_CACHE.move_to_end(key)
        return _MEMORY_CACHE[key]
    path = _cache_file(key)
    if path is not None and path.exists():
        try:
            op = load(path, tail=tail, scheme=scheme)
        except (DomainError, OSError) as exc:
            log.warning("ignoring unreadable operator cache %s: %s", path, exc)
            return None
        if op.key() == key:
            log.info("loaded operator from %s", path)
            _remember(op)
            return op
    return None


def _remember(op):
    _MEMORY_CACHE[op.key()] = op
    while sum(o.entries.nbytes for o in _MEMORY_CACHE.values()) > _MEMORY_CACHE_BYTES and len(_MEMORY_CACHE) > 1:
        _MEMORY_CACHE.popitem(last=False)


def _store_cached(op):
    _remember(op)
    path = _cache_file(op.key())
    if path is not None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            dump(op, tmp)
            tmp.replace(path)
        except OSError as exc:
            log.warning("could not write operator cache %s: %s", path, exc)

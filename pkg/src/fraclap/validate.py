"""Invariant probes run by ``fraclap validate``."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from . import operator as op_mod
from .greens import CutoffSpec, regular_part, solve_r_tilde
from .operator import GridSpec, assemble, spectral_residual

log = logging.getLogger(__name__)

MODES = ((1, 0), (1, 1), (2, 1))
SYMMETRY_TOL = 1e-12
ROW_SUM_TOL = 1e-10
RECIPROCITY_TOL = 1e-2
TRUNCATION_TOL = 1e-2
RECIPROCITY_PAIR = ((0.3, 0.4), (0.7, 0.55))
TRUNCATION_SOURCE = (0.35, 0.4)


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""

    def __post_init__(self):
        self.passed, self.value, self.limit = bool(self.passed), float(self.value), float(self.limit)


def check_structure(entries: np.ndarray) -> list[Check]:
    asym, rows = op_mod.structure_defects(entries)
    return [
        Check("symmetry", asym <= SYMMETRY_TOL, asym, SYMMETRY_TOL, "max|A - A^T| / max|A|"),
        Check("row_sums", rows <= ROW_SUM_TOL, rows, ROW_SUM_TOL, "max|A 1| / max|A|"),
    ]


def check_spectral(boundary, alpha: float, n: int, m_max: int) -> list[Check]:
    """Residuals of low modes must shrink from ``n / 2`` to ``n`` (lattice scheme)."""
    coarse = assemble(GridSpec(n // 2), boundary, alpha, m_max)
    fine = assemble(GridSpec(n), boundary, alpha, m_max)
    out = []
    for k, l in MODES:
        rc, rf = spectral_residual(coarse, k, l), spectral_residual(fine, k, l)
        out.append(Check(f"spectral_{k}{l}", rf < rc, rf, rc, f"residual n={n // 2}: {rc:.4g}, n={n}: {rf:.4g}"))
    return out


def check_reciprocity(op) -> Check:
    a, b = RECIPROCITY_PAIR
    gab = float(solve_r_tilde(op, b).G(np.array([a]))[0])
    gba = float(solve_r_tilde(op, a).G(np.array([b]))[0])
    rel = abs(gab - gba) / max(abs(gab), abs(gba))
    return Check("reciprocity", rel <= RECIPROCITY_TOL, rel, RECIPROCITY_TOL, f"G(a;b)={gab:.6g}, G(b;a)={gba:.6g}")


def check_truncation(boundary, alpha: float, n: int, m_max: int, scheme: str) -> Check:
    x0 = TRUNCATION_SOURCE
    cutoff = CutoffSpec.default(x0)
    vals = []
    for m in (m_max, m_max + 2):
        op = assemble(GridSpec(n), boundary, alpha, m, scheme=scheme)
        vals.append(regular_part(solve_r_tilde(op, x0, cutoff))[0])
    rel = abs(vals[1] - vals[0]) / abs(vals[0])
    return Check(
        "truncation", rel <= TRUNCATION_TOL, rel, TRUNCATION_TOL, f"R at m_max={m_max}: {vals[0]:.6g}, {m_max + 2}: {vals[1]:.6g}"
    )


def run_checks(
    boundary,
    alpha: float,
    n: int,
    m_max: int = 6,
    scheme: str = "lattice",
    *,
    perturb: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> list[Check]:
    """Run every probe; ``perturb`` edits a copy of the matrix before the structure checks."""
    op = assemble(GridSpec(n), boundary, alpha, m_max, scheme=scheme)
    entries = op.entries if perturb is None else perturb(op.entries.copy())
    checks = check_structure(entries)
    checks += check_spectral(boundary, alpha, n, m_max)
    checks.append(check_reciprocity(op))
    checks.append(check_truncation(boundary, alpha, n, m_max, scheme))
    for c in checks:
        log.info("%-14s %s value=%.3e limit=%.3e %s", c.name, "ok" if c.passed else "FAIL", c.value, c.limit, c.detail)
    return checks


def report(checks: list[Check]) -> dict:
    return {"passed": all(c.passed for c in checks), "checks": [asdict(c) for c in checks]}

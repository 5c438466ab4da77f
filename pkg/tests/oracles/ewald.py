"""Ewald-summed Green's functions of the fractional Laplacian on the unit torus.

Independent of the package: lattice sums split with incomplete gamma functions.
The Neumann regular part follows from four torus Green's functions on the
doubled square.
"""
import math

import numpy as np
from scipy.special import gamma, gammaincc

TAU = math.pi
K = 7


def _torus_sum(x, alpha, regularise=False):
    r = np.arange(-K, K + 1)
    k1, k2 = (v.ravel() for v in np.meshgrid(r, r, indexing="ij"))
    k2n = k1**2 + k2**2
    nz = k2n > 0
    recip = np.sum(
        np.cos(2 * np.pi * (k1[nz] * x[0] + k2[nz] * x[1])) * k2n[nz] ** (-alpha) * gammaincc(alpha, TAU * k2n[nz])
    )
    d2 = (x[0] + k1) ** 2 + (x[1] + k2) ** 2
    keep = d2 > 0
    A = np.pi**2 * d2[keep]
    real = np.pi * np.sum(A ** (alpha - 1) * gammaincc(1 - alpha, A / TAU) * gamma(1 - alpha)) - TAU**alpha / alpha
    if regularise and not keep.all():
        real -= np.pi * TAU ** (alpha - 1) / (1 - alpha)
    return recip + real / gamma(alpha)


def torus_green(x, alpha):
    """Source-neutral Green's function on the unit torus, source at the origin."""
    return -((2 * np.pi) ** (-2 * alpha)) * _torus_sum(np.asarray(x, dtype=float), alpha)


def torus_regular(alpha):
    """Regular part at the source: the limit of ``G + c |x|^(2 alpha - 2)``."""
    return -((2 * np.pi) ** (-2 * alpha)) * _torus_sum(np.zeros(2), alpha, regularise=True)


def neumann_regular(x0, alpha):
    """Regular part ``R(x0; x0)`` on the reflecting unit square."""
    x0 = np.asarray(x0, dtype=float)
    return 4 ** (alpha - 1) * (
        torus_regular(alpha) + torus_green((x0[0], 0.0), alpha) + torus_green((0.0, x0[1]), alpha) + torus_green(x0, alpha)
    )


def neumann_green(x, x0, alpha):
    x, x0 = np.asarray(x, dtype=float), np.asarray(x0, dtype=float)
    total = 0.0
    for s1 in (1, -1):
        for s2 in (1, -1):
            total += torus_green(((x[0] - s1 * x0[0]) / 2, (x[1] - s2 * x0[1]) / 2), alpha)
    return 4 ** (alpha - 1) * total


def neumann_regular_gradient(x0, alpha, step=1e-6):
    """Gradient in the observation point of the three image terms at ``x = x0``."""
    x0 = np.asarray(x0, dtype=float)

    def images(x):
        return 4 ** (alpha - 1) * (
            torus_green(((x[0] + x0[0]) / 2, (x[1] - x0[1]) / 2), alpha)
            + torus_green(((x[0] - x0[0]) / 2, (x[1] + x0[1]) / 2), alpha)
            + torus_green(((x[0] + x0[0]) / 2, (x[1] + x0[1]) / 2), alpha)
        )

    return np.array([(images(x0 + step * e) - images(x0 - step * e)) / (2 * step) for e in np.eye(2)])

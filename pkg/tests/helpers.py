"""Synthetic Green's providers for exercising the linear algebra without a grid solve."""
import numpy as np

from fraclap.constants import make_alpha_params


def free_space_provider(alpha, R=0.6):
    """Translation- and rotation-invariant ``G = -c |x - y|^(2a - 2) + R``."""
    c = make_alpha_params(alpha).c_alpha

    def provider(x0):
        def evaluate(points):
            d = np.hypot(*(np.atleast_2d(points) - x0).T)
            return -c * d ** (2 * alpha - 2) + R

        return R, evaluate

    return provider


def zero_provider(x0):
    return 0.0, lambda points: np.zeros(len(np.atleast_2d(points)))


def constant_provider(value):
    def provider(x0):
        return value, lambda points: np.full(len(np.atleast_2d(points)), value)

    return provider

"""Green's functions of the fractional Laplacian on the unit square and narrow-capture asymptotics."""

__version__ = "0.1.0"

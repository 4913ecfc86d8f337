"""Desk-scale numerical laboratory for variances of Hecke eigenvalues and the
divisor function in arithmetic progressions, the Voronoi summation formula and
its Bessel/Mellin transform machinery, and shifted-convolution main terms."""

__version__ = "0.1.0"

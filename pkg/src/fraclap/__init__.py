"""Dirichlet problems for the fractional Laplacian on intervals, half-lines and balls.

Modules
-------
stable_kernel
    Rotationally symmetric alpha-stable transition densities.
domain_geom
    Domains, boundary distance, regularized distance and graded grids.
fraclap_op
    Principal-value evaluation and the discrete Dirichlet operator.
killed_mc
    Monte Carlo for the stable process killed on leaving the domain.
dirichlet_solve
    Elliptic and parabolic solvers, Green matrices and heat kernels.
weighted_norms
    Weighted Lebesgue, Sobolev, Besov and Hoelder norms with divergence flags.
verify_harness
    Verification sweeps and report emission behind the ``fraclap`` CLI.
"""

__version__ = "0.1.0"

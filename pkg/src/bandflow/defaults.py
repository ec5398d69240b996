"""Single table of numerical defaults.

Every tolerance, grid rule and window used by the verification pipeline
lives here so that runs are reproducible verbatim.  The CLI and the test
suite read these values; nothing re-defines them locally.
"""

DEFAULTS = {
    # polynomial root handling
    "root_cluster_tol": 1e-7,       # merge roots closer than this (double band edges)
    "complex_root_tol": 1e-9,       # |Im| below this (relative) counts as real
    # Vandermonde / separable-system solves
    "node_gap_tol": 1e-9,           # pairwise-distinct threshold for q nodes
    "condition_limit": 1e12,        # reject solves with larger condition estimate
    # separated-flow integration
    "ode_rtol": 1e-10,
    "ode_atol": 1e-12,
    "ode_max_step": 0.01,           # keeps the dense-output interpolant tight
    "collision_tol": 1e-8,          # halt when coordinates approach this closely
    "trajectory_dx": 1e-3,          # default uniform sampling step
    # Cartesian sphere integrator
    "cartesian_step": 1e-3,         # fixed RK4 step with tangent projection
    # finite differences (uniform grids, interior points)
    "stencil_order": 4,
    # bracket-free reflection fallback
    "turning_refine_tol": 1e-12,
    "turning_kick": 1e-9,           # coordinate offset used to leave a turning point
    # commutation checks
    "poisson_step": 1e-4,
    # identity checks in the spectral parameter
    "mu_grid_rule": "2N+4 Chebyshev points on [r_1 - 1, r_{2N+1} + 1]",
    # spectral classification
    "edge_tol": 1e-3,               # margin around roots marked indeterminate
    "monodromy_rtol": 1e-11,
    "monodromy_atol": 1e-13,
    "growth_window": 200.0,         # x-length for growth-exponent estimation
    "growth_renorm_dx": 1.0,        # renormalise the fundamental solution this often
    "growth_band_threshold": 1e-3,  # exponents below this are flagged as in-band
    # Cartesian oracle convention constant (see systems.KAPPA and its test)
    "kappa": 1.0,
}

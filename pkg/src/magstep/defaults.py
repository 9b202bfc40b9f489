"""Central table of numerical defaults.

Every grid size, tolerance and truncation length used by the library and
the command line lives here so that runs are reproducible from a config
file alone.
"""

DEFAULTS = {
    # 1-D fiber problem
    "fiber_n": 4001,            # grid nodes on [-L, L]
    "fiber_L_scale": 12.0,      # L = scale / sqrt(min(1, |b1|, |b2|))
    "eig_tol": 1e-10,           # absolute eigenvalue tolerance
    "xi_tol": 1e-8,             # tolerance on the band minimizer
    "xi_scan": (-3.0, 3.0),     # coarse bracket scan for the minimizer
    "xi_scan_n": 121,
    "dphi0_mismatch": 1e-4,     # relative to max|phi|
    "weber_T": 12.0,            # shooting start, in magnetic lengths
    # moments
    "moment_tol": 1e-7,
    # trial state
    "eta_plateau": 1.0,
    "quad_order": 40,           # Gauss-Legendre nodes per panel
    # 2-D operators
    "mesh_h": 0.1,
    "r_trunc_min": 20.0,
    "ellipse_axes": (4.0, 2.0),
    "eig_rtol": 1e-9,
    "gap_factor": 10.0,         # eigen-gap / residual needed for simplicity
    "seed": 0,
}

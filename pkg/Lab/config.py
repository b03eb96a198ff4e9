# Constructive-QFT lab: settings for python3 main.py
# Change values here; every module and the CLI read tolerances, orders and limits from this file.

# LINEAR ALGEBRA
SYMMETRY_TOL = 1e-12           # |a_ij - a_ji| <= SYMMETRY_TOL * max|a| counts as symmetric
PSD_TOL = 1e-10                # min eigenvalue >= -PSD_TOL * ||C|| counts as PSD
POWER_TOL = 1e-12              # power iteration stops when the Rayleigh quotient moves less than this (relative)
POWER_MAX_ITER = 100_000       # power iteration cap before ConvergenceError
POWER_SQUARINGS = 6            # repeated squarings of the normalized matrix before iterating

# RANDOM NUMBERS
DEFAULT_SEED = 20240611        # used when neither --seed nor the config provides one
MC_BATCH = 50_000              # samples drawn per batch (keeps memory flat for 1e6-sample runs)
DEFAULT_OUTPUT_DIR = "reports"   # report directory when neither --out nor LAB_OUTPUT_DIR is set

# QUADRATURE
CHAIN_ORDER = 200              # Gauss-Hermite nodes for chain transfer operators
CHAIN_HALF_WIDTH_FREE = 12.0   # grid half-width when P is constant (kernel only decays through (x-y)^2)
CHAIN_TAIL_ACTION = 60.0       # half-width chosen where P(x) - min P first reaches this value
CHAIN_MAX_HALF_WIDTH = 12.0    # cap so that corner kernel entries stay above the underflow limit
HERMITE_MAX_ORDER = 300        # largest Gauss-Hermite order (weights e^{t^2} overflow beyond this)

# CHAIN
FREE_ENERGY_CHECK_N = 4096     # n used when comparing (1/n) log Z(n) with log lambda0
MIXING_K_MAX = 50              # mixing table length
GIBBS_MAX_SITES = 64           # insertions allowed in one gibbs_expectation call

# LATTICE
MC_SIGMA = 3.0                 # Monte-Carlo agreement means |estimate - exact| <= MC_SIGMA * stderr
BAYES_POINTS = 1000            # random evaluation points for bayes_check
TADPOLE_SPACINGS = [1 / 8, 1 / 16, 1 / 32, 1 / 64]   # spacings for the log-divergence fit (unit torus)
TADPOLE_MIN_R2 = 0.99
TADPOLE_BETA = 1.0 / (2.0 * 3.141592653589793)       # expected log(1/a) slope in 2D
TADPOLE_BETA_REL_TOL = 0.25

# WICK
MAX_MATCHING_ORDER = 16        # isserlis / diagram enumeration refuse longer index lists
GENERATING_TERMS = 40          # terms in the Hermite generating-function check

# P(PHI)_2
ESS_WARN_FRACTION = 0.01       # warn when ESS / n_samples drops below this
PARTITION_SAMPLES = 100_000    # default n_samples for partition_mc
MOLLIFIER_SAMPLES = 10_000     # default MC samples for mollifier_compare

# SEGAL
SEGAL_ORDER = 32               # Gauss-Hermite nodes per transverse mode for interacting slabs
SEGAL_FREE_ORDER = 48          # nodes per mode for free one-site slabs used in exact checks
MAX_TRANSVERSE = 4             # largest n_transverse for tensor quadrature
MAX_AMPLITUDE_POINTS = 4096    # boundary grid points (order ** n_transverse) per amplitude
MAX_INTERIOR_DIM = 8           # n_layers * n_transverse for interacting interior quadrature
MAX_INTERACTING_WORK = 20_000_000   # grid_points^2 * interior_points for one interacting build
AMPLITUDE_LOG_FLOOR = -700.0   # log of the smallest amplitude entry relative to the largest
AMPLITUDE_POINTS = 1000        # random boundary points for amplitude_density_check

# ZETA
ZETA_T_SPLIT = 0.1             # default Mellin split point
ZETA_TAYLOR_TERMS = 24         # Taylor terms of e^{-m^2 t} kept in small-t expansions
ZETA_TAIL_EXPONENT = 40.0      # eigenvalues with t_split * lambda above this are dropped (e^-40 tail)
ZETA_QUAD_EPSABS = 1e-14
FREDHOLM_MAX_TERMS = 100_000   # terms summed for callable trace-class families
POISSON_TERMS = 12             # image terms kept in theta-function tails

# TOLERANCES (per check; the CLI --tolerance-scale multiplies all of them)
TOLERANCES = {
    "sym_eigen": 1e-9,
    "cholesky": 1e-10,
    "schur": 1e-10,
    "power_pair": 1e-8,
    "benchmark_limit": 1e-4,
    "chapman_kolmogorov": 1e-8,
    "trace_three_ways": 1e-8,
    "free_energy_limit": 1e-6,
    "gibbs": 1e-8,
    "mixing": 1e-10,
    "bfk": 1e-10,
    "dn_inverse": 1e-9,
    "markov": 1e-10,
    "bayes": 1e-8,
    "rp": 1e-10,
    "quad_perturb": 1e-10,
    "trace_law": 1e-9,
    "decouple": 1e-10,
    "compose_free": 1e-8,
    "compose_interacting": 1e-3,
    "trace_free": 1e-6,
    "adjoint": 1e-10,
    "amplitude_density": 1e-8,
    "factorization": 1e-10,
    "circle_det": 1e-6,
    "t_split": 1e-7,
    "bfk_torus": 1e-4,
    "zeta_omega0": 1e-6,
    "rn_det": 1e-5,
    "fredholm": 1e-10,
    "dn_energy": 1e-10,
}

# PRESETS
# Built-in experiment configs for --preset. Keys follow the JSON config schema in experiment_config.py.
PRESETS = {
    "gaussian-benchmark": {
        "subcommand": "chain",
        "chain": {"polynomial": [0.0, 0.0, 2.0], "benchmark_mass": 1.0, "order": 200,
                  "n_list": [1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048]},
    },
    "quartic": {
        "subcommand": "chain",
        "chain": {"polynomial": [0.0, 0.0, 0.0, 0.0, 1.0], "order": 120,
                  "n_list": [1, 2, 4, 8, 16, 32, 64]},
    },
    "torus-suite": {
        "subcommand": "lattice",
        "lattice": {"graph": {"type": "torus", "n1": 16, "n2": 16, "spacing": 1.0}, "mass": 1.0},
    },
    "quartic-torus": {
        "subcommand": "pphi2",
        "pphi2": {"graph": {"type": "torus", "n1": 6, "n2": 6, "spacing": 1.0}, "mass": 1.0,
                  "polynomial": [0.0, 0.0, 0.0, 0.0, 0.1]},
    },
    "two-site-slab": {
        "subcommand": "segal",
        "segal": {"n_transverse": 2, "n_layers": 1, "spacing": 1.0, "mass": 1.0},
    },
    "bfk-torus": {
        "subcommand": "zeta",
        "zeta": {"mass": 1.0, "circumference": 6.283185307179586, "height": 1.0},
    },
}

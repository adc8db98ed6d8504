"""
Configuration module for SDP Code Bounds.
Holds library defaults for solving, certification and reporting.
Runs are configured through the run-configuration document and flags only.
"""


class Config:
    """Application configuration class."""

    # Solver Settings
    SOLVER_TOL_GAP = 1e-9
    SOLVER_TOL_FEAS = 1e-9
    SOLVER_MAX_ITER = 200
    SOLVER_STEP_FRACTION = 0.98
    SOLVER_INITIAL_SCALE = 10.0
    SOLVER_DIVERGENCE_LIMIT = 1e12
    SOLVER_MAX_BLOCK_DIMENSION = 200
    SOLVER_EQUALITY_MODE = "native"  # native | relaxed

    # Moment Settings
    MOMENT_RANK_TOL = 1e-8
    MOMENT_CLAMP_WINDOW = 1e-6
    MOMENT_PSD_TOL = 1e-8

    # Certification Settings
    CERTIFY_MAX_DENOMINATOR = 10 ** 6
    CERTIFY_DENOMINATOR_GROWTH = 100
    CERTIFY_MAX_DENOMINATOR_CAP = 10 ** 12

    # LP Settings
    LP_GRID_POINTS = 1001
    LP_REFINEMENT_ROUNDS = 20
    HEMISPHERE_LP_DEGREE = 13

    # One-sided kissing table
    TABLE_DIMENSIONS = (3, 4, 5, 6, 7, 8, 9)
    TABLE_ORDER = 6
    # The cell-partitioned instances at m=6 need about 220 rows of blocks
    TABLE_MAX_BLOCK_DIMENSION = 400
    MAX_PARALLEL_SOLVES = 4

    # Logging
    LOG_LEVEL = "INFO"

    @classmethod
    def validate(cls):
        """Validate configuration defaults."""
        problems = []
        if not 0 < cls.SOLVER_STEP_FRACTION < 1:
            problems.append("SOLVER_STEP_FRACTION must lie in (0, 1)")
        for name in ("SOLVER_TOL_GAP", "SOLVER_TOL_FEAS", "MOMENT_RANK_TOL"):
            if getattr(cls, name) <= 0:
                problems.append(f"{name} must be positive")
        if cls.SOLVER_MAX_ITER < 1 or cls.MAX_PARALLEL_SOLVES < 1:
            problems.append("SOLVER_MAX_ITER and MAX_PARALLEL_SOLVES must be at least 1")
        if cls.SOLVER_EQUALITY_MODE not in ("native", "relaxed"):
            problems.append("SOLVER_EQUALITY_MODE must be 'native' or 'relaxed'")
        if cls.LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            problems.append(f"Unknown LOG_LEVEL: {cls.LOG_LEVEL}")

        if problems:
            raise ValueError(
                f"Invalid configuration: {'; '.join(problems)}"
            )

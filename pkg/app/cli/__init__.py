# Command-line front end for SDP Code Bounds
from app.cli.commands import (
    EXIT_CERTIFICATION,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_VALIDATION,
    run,
    run_from_path,
    run_one_sided_table,
)

__all__ = [
    "EXIT_OK",
    "EXIT_VALIDATION",
    "EXIT_SOLVER",
    "EXIT_CERTIFICATION",
    "run",
    "run_from_path",
    "run_one_sided_table",
]

from .serialization import (
    ZSTD,
    csv_bytes,
    dumps_json,
    loads_json,
    read_artifact,
    sha256_hex,
    write_artifact,
)
from .solvers import Reduction, build_reduction, maximize_quadratic, solve_linear

__all__ = [
    # Sérialisation
    "ZSTD",
    "csv_bytes",
    "dumps_json",
    "loads_json",
    "read_artifact",
    "sha256_hex",
    "write_artifact",
    # Algèbre linéaire
    "Reduction",
    "build_reduction",
    "maximize_quadratic",
    "solve_linear",
]

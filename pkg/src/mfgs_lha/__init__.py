"""Local harmonic approximation to the mean force Gibbs state of a particle
in a one dimensional potential coupled to an Ohmic bosonic bath."""

__version__ = "0.1.0"

from .bath import BathContext, SpectralDensity, SpectralKind, TailPolicy  # noqa: E402
from .errors import (  # noqa: E402
    ConfigError,
    ConvergenceError,
    DomainError,
    LhaError,
    NoBarrierError,
    NumericError,
    StabilityError,
    UndefinedRelativeError,
)
from .lha_core import GridPolicy, LhaDensity, SeriesConfig, Stability, assemble_density  # noqa: E402
from .potential import PROTON_MASS, proton_potential  # noqa: E402

__all__ = [
    "__version__",
    "BathContext",
    "SpectralDensity",
    "SpectralKind",
    "TailPolicy",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "LhaError",
    "NoBarrierError",
    "NumericError",
    "StabilityError",
    "UndefinedRelativeError",
    "GridPolicy",
    "LhaDensity",
    "SeriesConfig",
    "Stability",
    "assemble_density",
    "PROTON_MASS",
    "proton_potential",
]

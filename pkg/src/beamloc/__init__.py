"""Edge localization from time-resolved particle-beam scans.

SE counts under a finite-width beam follow a two-component Poisson mixture;
this package evaluates that model, its Fisher information, simulates line
scans and estimates sub-pixel edge positions.
"""

__version__ = "0.1.0"

from .distributions import MixtureParams, SeriesControl  # noqa: E402
from .estimators import EdgeEstimate, EstimationContext, interpolation_edge, mle_edge, mmle_edge  # noqa: E402
from .fisher import FiValue, fi_scan_gamma, optimal_beam_width  # noqa: E402
from .geometry import ScanGeometry  # noqa: E402
from .kernels import BACKEND  # noqa: E402
from .mc import McReport, SweepSpec, run_sweep  # noqa: E402
from .sim import BeamConfig, EdgeSample, TRMScan, simulate_trm  # noqa: E402

__all__ = [
    "BACKEND",
    "BeamConfig",
    "EdgeEstimate",
    "EdgeSample",
    "EstimationContext",
    "FiValue",
    "McReport",
    "MixtureParams",
    "ScanGeometry",
    "SeriesControl",
    "SweepSpec",
    "TRMScan",
    "fi_scan_gamma",
    "interpolation_edge",
    "mle_edge",
    "mmle_edge",
    "optimal_beam_width",
    "run_sweep",
    "simulate_trm",
]

"""loopwind: winding index laws of Brownian loops and bridges on fibrations."""

__version__ = "0.1.0"

from .errors import (DomainError, InsufficientStatisticsError, LoopwindError, NumericError,
                     SimulationError, UnsupportedGeometryError, WindowTooNarrowError)
from .geometry import BridgeSpec, Geometry
from .quadrature import NumericResult, Tolerance
from .laws import (IndexDistribution, bridge_cf, conditional_cf, fiber_density, index_distribution,
                   limit_cf, mu_convolution_check)
from .closed_forms import (ads_fiber_density, ads_joint_density, ch1_fiber_density_integral,
                           ch1_longtime_index, planar_index, planar_index_distribution,
                           sl2_loop_index, sl2_weight)
from .montecarlo import (EmpiricalIndexDistribution, PathSample, SimConfig, estimate_conditional_cf,
                         estimate_index_distribution, simulate_radial, simulate_winding_pair)

__all__ = [
    "__version__",
    "LoopwindError", "DomainError", "NumericError", "WindowTooNarrowError",
    "UnsupportedGeometryError", "SimulationError", "InsufficientStatisticsError",
    "Geometry", "BridgeSpec", "NumericResult", "Tolerance",
    "IndexDistribution", "conditional_cf", "fiber_density", "index_distribution", "bridge_cf",
    "limit_cf", "mu_convolution_check",
    "planar_index", "planar_index_distribution", "sl2_weight", "sl2_loop_index",
    "ch1_fiber_density_integral", "ch1_longtime_index", "ads_joint_density", "ads_fiber_density",
    "SimConfig", "PathSample", "EmpiricalIndexDistribution", "simulate_radial",
    "simulate_winding_pair", "estimate_conditional_cf", "estimate_index_distribution",
]

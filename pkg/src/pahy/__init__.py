"""Pre-averaged Hayashi-Yoshida estimation of integrated covariance from noisy tick data."""

from .estimator import PreAveragedHY, check_panel
from .exceptions import BoundaryWarning, DomainError, NumericalError, ValidationError
from .grids import Panel, TickSeries, build_panel, empirical_time_transform, read_ticks_csv, write_ticks_csv
from .hy import CovEstimate, hy_matrix, hy_naive_oracle
from .inference import confidence_region, optimal_theta, parametric_variance, standardize, unstack, vec_stack
from .kernel import get_kernel, kappa_constants, kernel_constants, psi_overlap
from .preavg import preaverage, window_size
from .variance import VarianceTensor, noise_cov, spot_vol, var_plugin, var_subsample, var_univariate

__version__ = "0.1.0"

__all__ = [
    "BoundaryWarning",
    "CovEstimate",
    "DomainError",
    "NumericalError",
    "Panel",
    "PreAveragedHY",
    "TickSeries",
    "ValidationError",
    "VarianceTensor",
    "build_panel",
    "check_panel",
    "confidence_region",
    "empirical_time_transform",
    "get_kernel",
    "hy_matrix",
    "hy_naive_oracle",
    "kappa_constants",
    "kernel_constants",
    "noise_cov",
    "optimal_theta",
    "parametric_variance",
    "preaverage",
    "psi_overlap",
    "read_ticks_csv",
    "spot_vol",
    "standardize",
    "unstack",
    "var_plugin",
    "var_subsample",
    "var_univariate",
    "vec_stack",
    "window_size",
    "write_ticks_csv",
]

"""Quasi-static limits of scalar conservation laws on [0, 1].

Modules
-------
flux        admissible concave fluxes and their algebra
quasistatic exact quasi-static entropy solutions and boundary paths
hyperbolic  Godunov scheme for the time-rescaled problem
viscous     IMEX viscous runs and stationary viscous profiles
analysis    entropy, boundary, Young-measure and weak-star diagnostics
harness     configs, sweeps, rate fits and the command line
"""

from .flux import FluxModel, make_concave_flux, make_sine_flux, make_traffic_flux
from .hyperbolic import CellField, GridSpec, Trajectory

__all__ = ["FluxModel", "make_concave_flux", "make_sine_flux", "make_traffic_flux",
           "CellField", "GridSpec", "Trajectory"]
__version__ = "0.1.0"

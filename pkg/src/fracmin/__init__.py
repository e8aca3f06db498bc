"""Nonlocal (fractional-perimeter) minimal surfaces on uniform grids.

Modules
-------
grid        lattices, cell sets and phase fields with exterior data
sets        analytic sets used as exterior data and for rasterization
kernel      exact cell-pair weights of the Riesz kernel
energy      interaction energies and the localized fractional perimeter
mincut      exact minimizers by minimum cut, local search, certificates
curvature   nonlocal mean curvature and regularity checks
flow        fractional threshold dynamics
extension   weighted harmonic extension and the monotone functional Phi
cli         batch front end (``fracmin``)
"""

from .grid import FREE, IN, OUT, CellSet, Grid, GridError, PhaseField
from .kernel import FractionalOrder, KernelTable, build_table
from .energy import EnergyReport, fft_cut_energy, interaction, local_energy, scalar_energy
from .mincut import CapacityError, assemble, certify_minimizer, local_search, solve_exact
from .curvature import nl_mean_curvature, viscosity_sign_check
from .flow import build_flow_kernel, mbo_step, run_flow
from .extension import ExtensionField, PhiCurve, cone_energy, extend, phi, product_consistency, weighted_energy

__version__ = "0.1.0"

__all__ = [
    "FREE", "IN", "OUT", "CellSet", "Grid", "GridError", "PhaseField",
    "FractionalOrder", "KernelTable", "build_table",
    "EnergyReport", "fft_cut_energy", "interaction", "local_energy", "scalar_energy",
    "CapacityError", "assemble", "certify_minimizer", "local_search", "solve_exact",
    "nl_mean_curvature", "viscosity_sign_check",
    "build_flow_kernel", "mbo_step", "run_flow",
    "ExtensionField", "PhiCurve", "cone_energy", "extend", "phi", "product_consistency", "weighted_energy",
]

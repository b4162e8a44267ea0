"""Homogenized orbital-free DFT fields: unit cells, Green's functions, defect energies."""

__version__ = "0.1.0"

from .errors import (ConsistencyError, ConvergenceError, FieldQCError, InputError,  # noqa: E402
                     RegimeError)
from .homogenized import Regime, build_model, green_phi, green_u  # noqa: E402
from .unitcell import UnitCellSpec, cell_moments, solve_unit_cell  # noqa: E402
from .defectcell import SphericalDefect, energy_es, energy_es_infinite, solve_coefficients  # noqa: E402
from .elastic import ElasticSpec, energy_el, solve_thetas  # noqa: E402
from .kernelfit import KernelSamples, eval_fit, fit_partial_fractions  # noqa: E402

__all__ = [
    "ConsistencyError", "ConvergenceError", "FieldQCError", "InputError", "RegimeError",
    "Regime", "build_model", "green_phi", "green_u",
    "UnitCellSpec", "cell_moments", "solve_unit_cell",
    "SphericalDefect", "energy_es", "energy_es_infinite", "solve_coefficients",
    "ElasticSpec", "energy_el", "solve_thetas",
    "KernelSamples", "eval_fit", "fit_partial_fractions",
]

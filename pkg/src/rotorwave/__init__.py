"""Wave packets scattering off rotating potentials in two dimensions."""

__version__ = "0.1.0"

from .grid import Grid, PhysParams, WaveField, inner, make_grid, mass, norm
from .potentials import (
    AnisotropicProduct,
    Blade,
    DipolePeaks,
    GaussianBump,
    PotentialSpec,
    PowerLaw,
    SectorOscillation,
    Zero,
)
from .spectral import GuardError, rotate, shear
from .observables import apply_H0, apply_J, expectations, op_norm_probe
from .states import GaussianProfile, BumpProfile, make_packet_D0, make_packet_impact, make_domain_sequence
from .propagator import EvolveConfig, evolve, frame_transfer, monodromy, propagate
from .scattering import WaveOpConfig, blade_experiment, scattering_operator, wave_operator
from .conditions import check_condition, check_condition_regularized

__all__ = [
    "AnisotropicProduct", "Blade", "BumpProfile", "DipolePeaks", "EvolveConfig", "GaussianBump",
    "GaussianProfile", "Grid", "GuardError", "PhysParams", "PotentialSpec", "PowerLaw",
    "SectorOscillation", "WaveField", "WaveOpConfig", "Zero", "apply_H0", "apply_J",
    "blade_experiment", "check_condition", "check_condition_regularized", "evolve", "expectations",
    "frame_transfer", "inner", "make_domain_sequence", "make_grid", "make_packet_D0",
    "make_packet_impact", "mass", "monodromy", "norm", "op_norm_probe", "propagate", "rotate",
    "scattering_operator", "shear", "wave_operator",
]

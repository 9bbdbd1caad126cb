"""Gradient-damage rods: rescaled 3D energy, its 1D limit, and numerical checks of the reduction."""

from .energy import EnergyBreakdown, energy_1d, energy_3d, grad_energy_1d, grad_energy_3d
from .fields import (AdmissibilityError, DiagnosticsRecord, Field1D, Field3D, embed_1d, embed_uniaxial,
                     linear_1d, slice_average, strain, test_field, theorem2_diagnostics)
from .material import (ConstitutiveLaw, MaterialParams, ParameterError, at1_threshold_strain,
                       derived_moduli, eval_damage_energy, eval_degradation, verify_uniaxial_identity)
from .mesh import CylinderMesh, IntervalMesh, MeshError, build_cylinder, build_interval
from .recovery import Mollifier, build_recovery, k_of_delta, kinked_profile, limsup_check, mollify_strain
from .solver import SolveReport, SolverConfig, alternate_minimize, solve_alpha, solve_u
from .study import (HomogeneousOracle, Prop1Remainders, StudyConfig, StudyRecord, gamma_sweep,
                    homogeneous_oracle, prop1_remainders)

__all__ = [
    "AdmissibilityError",
    "ConstitutiveLaw",
    "CylinderMesh",
    "DiagnosticsRecord",
    "EnergyBreakdown",
    "Field1D",
    "Field3D",
    "HomogeneousOracle",
    "IntervalMesh",
    "MaterialParams",
    "MeshError",
    "Mollifier",
    "ParameterError",
    "Prop1Remainders",
    "SolveReport",
    "SolverConfig",
    "StudyConfig",
    "StudyRecord",
    "alternate_minimize",
    "at1_threshold_strain",
    "build_cylinder",
    "build_interval",
    "build_recovery",
    "derived_moduli",
    "embed_1d",
    "embed_uniaxial",
    "energy_1d",
    "energy_3d",
    "eval_damage_energy",
    "eval_degradation",
    "gamma_sweep",
    "grad_energy_1d",
    "grad_energy_3d",
    "homogeneous_oracle",
    "k_of_delta",
    "kinked_profile",
    "limsup_check",
    "linear_1d",
    "mollify_strain",
    "prop1_remainders",
    "slice_average",
    "solve_alpha",
    "solve_u",
    "strain",
    "test_field",
    "theorem2_diagnostics",
    "verify_uniaxial_identity",
]

__version__ = "0.1.0"

"""Time-dimension reduction and quasi-reversibility for recovering the
initial electric field of Maxwell's equations from boundary data."""
from .basis import BasisSet, TimeGrid, project_samples, stiffness, synthesize, weighted_gram
from .data import BoundaryRecord, ModeData, NoiseSpec, add_noise, load_record, project_record, save_record
from .errors import MaxwellTDRError
from .fields import Grid3, MediumFields, VectorGrid
from .forward import ForwardConfig, simulate
from .inverse import QRConfig, QRProblem, SolveReport, cg_solve, invert, reconstruct_initial
from .phantoms import reference_medium, phantom, phantom_regions, region_peak_error

__version__ = "0.1.0"

__all__ = [
    "BasisSet",
    "TimeGrid",
    "project_samples",
    "stiffness",
    "synthesize",
    "weighted_gram",
    "BoundaryRecord",
    "ModeData",
    "NoiseSpec",
    "add_noise",
    "load_record",
    "project_record",
    "save_record",
    "MaxwellTDRError",
    "Grid3",
    "MediumFields",
    "VectorGrid",
    "ForwardConfig",
    "simulate",
    "QRConfig",
    "QRProblem",
    "SolveReport",
    "cg_solve",
    "invert",
    "reconstruct_initial",
    "reference_medium",
    "phantom",
    "phantom_regions",
    "region_peak_error",
]

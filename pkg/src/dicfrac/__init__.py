"""Fracture analysis of DIC displacement fields.

Converts measured 2D / stereo displacement grids into J-integral values and
mixed-mode stress intensity factors by solving an embedded finite element
boundary value problem and evaluating equivalent-domain and interaction
integrals.
"""

__version__ = "0.1.0"

from .field import DisplacementField, MaskRegion, load_field, write_field
from .material import EffectiveConstants, Material, RambergOsgood
from .mesh import CrackDefinition, SeamMesh
from .pipeline import AnalysisOptions, AnalysisResult, analyze_field
from .synth import SyntheticSpec, add_noise, generate_williams_field

__all__ = [
    "AnalysisOptions",
    "AnalysisResult",
    "CrackDefinition",
    "DisplacementField",
    "EffectiveConstants",
    "Material",
    "MaskRegion",
    "RambergOsgood",
    "SeamMesh",
    "SyntheticSpec",
    "add_noise",
    "analyze_field",
    "generate_williams_field",
    "load_field",
    "write_field",
    "__version__",
]

"""torusdyn: reversible mixed-dynamics toolkit for the coupled-rotator torus map."""

from .backend import backend_name
from .flow import (
    CLOUD_SETTINGS,
    DEFAULT_SETTINGS,
    SCAN_SETTINGS,
    FlowError,
    IntegratorSettings,
    advance,
    advance_with_variational,
)
from .model import (
    Angles3,
    ModelError,
    Params,
    ReducedPoint3,
    TorusPoint2,
    divergence_reduced,
    from_reduced,
    involution_r,
    involution_r3,
    sigma,
    symmetry_s,
    to_reduced,
    vf_original,
    vf_reduced,
)

__version__ = "0.1.0"

__all__ = [
    "Angles3",
    "CLOUD_SETTINGS",
    "DEFAULT_SETTINGS",
    "FlowError",
    "IntegratorSettings",
    "ModelError",
    "Params",
    "ReducedPoint3",
    "SCAN_SETTINGS",
    "TorusPoint2",
    "advance",
    "advance_with_variational",
    "backend_name",
    "divergence_reduced",
    "from_reduced",
    "involution_r",
    "involution_r3",
    "sigma",
    "symmetry_s",
    "to_reduced",
    "vf_original",
    "vf_reduced",
    "__version__",
]

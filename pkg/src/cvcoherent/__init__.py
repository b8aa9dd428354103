"""Gaussian simulation of coherent continuous-variable communication protocols."""

__version__ = "0.1.0"

from .gaussian import (  # noqa: E402
    Circuit,
    GaussianState,
    PhysicsError,
    SymplecticOp,
    apply,
    new_coherent,
    new_squeezed,
    new_tmsv,
    new_vacuum,
    tensor,
)
from .conat import ConatChannelSpec, ConatReport, apply_mq_conat, apply_pq_conat, verify_conat  # noqa: E402
from .protocols import (  # noqa: E402
    ProtocolOutcome,
    ResourceSpec,
    alternate_coherent_teleport,
    coherent_superdense,
    coherent_teleport,
    compose_superdense_via_teleport,
    compose_teleport_via_superdense,
    iterate_composition,
    standard_bk_teleport,
)
from .analysis import correlation_report, fidelity_from_error_vars, fidelity_lower_bound  # noqa: E402

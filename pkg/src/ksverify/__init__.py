"""Exact, certified checks of the Peres 33-ray Kochen-Specker argument and
the free-will reduction built on it."""

__version__ = "0.1.0"

from .exact import ExactScalar, ExactVector3, Ray, canonicalize, dot, rotate45, scalar_arith, vec  # noqa: E402
from .config import (  # noqa: E402
    Configuration,
    SymmetryElement,
    build_configuration,
    build_peres_configuration,
    perturbation_check,
    quadruple_count,
    symmetry_group,
    white_cube_axes,
)
from .solver import (  # noqa: E402
    ColoringConstraints,
    UnsatCertificate,
    build_constraints,
    propagate,
    search_101,
    verify_certificate,
)
from .fwt import derandomize, fwt_reduction_check  # noqa: E402
from .quantum import joint_distribution, sample_run, singlet_state, squared_spin, verify_spin_axiom  # noqa: E402

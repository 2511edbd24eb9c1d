"""Mass-spring chains with perfect transfer and fractional revival.

The chains are engineered from para-Racah polynomials: the squared normal
frequencies form a quadratic bi-lattice, which makes a momentum pulse on the
first mass reappear, whole, on the last one.
"""

from .chains import (
    ChainSpec,
    build_chain,
    build_deformed,
    build_fixed_fixed,
    build_free_free,
    chain_to_jacobi,
    jacobi_to_chain_free_free,
)
from .dynamics import (
    State,
    Trajectory,
    analytic_trajectory,
    conservation_report,
    evolve_analytic,
    integrate_ode,
    mirror_reversal_check,
    pulse,
    verify_fractional_revival,
    verify_perfect_transfer,
)
from .exceptions import *  # noqa: F401,F403
from .spectral import (
    BiLatticeSpectrum,
    Boundary,
    ChainParams,
    EigenBasis,
    JacobiSpec,
    deform_jacobi,
    deformed_eigenbasis,
    eigenbasis,
    para_racah_jacobi,
    spectral_surgery,
    spectrum,
)

__version__ = "0.1.0"

__all__ = [
    "BiLatticeSpectrum",
    "Boundary",
    "ChainParams",
    "ChainSpec",
    "EigenBasis",
    "JacobiSpec",
    "State",
    "Trajectory",
    "analytic_trajectory",
    "build_chain",
    "build_deformed",
    "build_fixed_fixed",
    "build_free_free",
    "chain_to_jacobi",
    "conservation_report",
    "deform_jacobi",
    "deformed_eigenbasis",
    "eigenbasis",
    "evolve_analytic",
    "integrate_ode",
    "jacobi_to_chain_free_free",
    "mirror_reversal_check",
    "para_racah_jacobi",
    "pulse",
    "spectral_surgery",
    "spectrum",
    "verify_fractional_revival",
    "verify_perfect_transfer",
]

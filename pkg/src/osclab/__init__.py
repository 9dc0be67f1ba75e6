"""osclab: a numerical laboratory for cubic-phase oscillatory multipliers.

Modules
-------
bumps
    Smooth dyadic cutoff functions and partition-of-unity identities.
phase_geometry
    Closed-form critical-point geometry of the cubic phase, with
    finite-difference oracles for every derived quantity.
quadrature
    Adaptive oscillatory quadrature for multiplier symbols, stationary-phase
    reference values, and sublevel-set measure estimation.
grid_ops
    Discrete torus transforms, multiplier application, kernel synthesis,
    and parabolic averaging operators.
decay
    Decay-rate experiments: regime classification, log-log slope fits, and
    the verification drivers behind the command line interface.
"""

from .bumps import (
    BumpSpec,
    amplitude_a,
    beta,
    beta0,
    beta_tilde,
    dyadic_partition_sum,
    smoothstep,
)

__version__ = "0.1.0"

__all__ = [
    "BumpSpec",
    "smoothstep",
    "beta0",
    "beta",
    "beta_tilde",
    "amplitude_a",
    "dyadic_partition_sum",
    "__version__",
]

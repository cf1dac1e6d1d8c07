"""Simultaneous Pade-Faber approximation and system-pole experiments."""

from .analysis import (
    Declaration,
    InverseVerdict,
    RateReport,
    SystemMetadata,
    declared_metadata,
    fit_geometric_rate,
    poly_roots,
    polynomial_independence,
    run_direct_experiment,
    run_incomplete_experiment,
    run_inverse_experiment,
    sup_error_on_compact,
    system_poles_rational,
)
from .approximant import (
    Normalization,
    PadeFaberResult,
    QuadratureSettings,
    denominator_matrix,
    evaluate_approximant,
    incomplete_pade_faber,
    numerator,
    simultaneous_pade_faber,
    solve_denominator,
    solve_range,
)
from .conformal import Disk, Ellipse, LaurentMap, Segment, capacity, level, phi, psi, sample_level_curve
from .faber import estimate_rho0, faber_coefficients, faber_partial_sum, faber_polynomials
from .funcsys import FunctionSystem, MeromorphicFunction, MultiIndex, evaluate, parse_function_expression
from .poly import ComplexPoly

__version__ = "0.1.0"

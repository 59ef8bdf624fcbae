"""Executable moment problems in countably many variables.

Polynomials in ``x1, x2, ...``, cylinder measures given by consistent
finite-dimensional marginals, Gaussian moment functionals, and finite
positivity / Carleman diagnostics.
"""

from .fraction_algebra import (
    BoundedPair,
    FracElement,
    bound_certificate,
    bounded_coordinate,
    bounded_transform,
    frac_add,
    frac_eval,
    frac_mul,
    inverse_one_plus_square,
    parse_frac,
)
from .gaussian import (
    Constant,
    CovarianceSpec,
    CustomTail,
    Geometric,
    GaussianCylinderMeasure,
    PowerLaw,
    Verdict,
    classify_sigma_additivity,
    fourier,
    gaussian_marginal,
    sample,
    wick_enumerate,
    wick_moment,
    wick_recursive,
)
from .measures import (
    Box,
    CylinderSet,
    Interval,
    Probability,
    ProjectiveFamily,
    WeightedSeminorm,
    chebyshev_bound,
    check_axioms,
    check_consistency,
    check_normalization,
    continuity_witness,
    cyl_prob,
    tail_probability,
)
from .moments import (
    AtomicMeasure,
    CarlemanReport,
    GaussianFunctional,
    MomentMatrix,
    TableFunctional,
    carleman_report,
    eval_functional,
    moment_matrix,
    psd_check,
    quadrature_1d,
    verify_representation,
)
from .poly import Monomial, Poly, degree, evaluate, parse_poly, support

__version__ = "0.1.0"

"""Multiplicative ergodic theorem estimators for cocycles in finite tracial algebras."""

from .algebra import (
    Abelian,
    AlgebraElement,
    Factor,
    TracialAlgebra,
    functional_calculus,
    hermitian_eig,
    l2_norm,
    log_abs,
    polar_decompose,
    trace,
)
from .batteries import SUITES, SuiteResult, property_battery
from .cone import PositivePoint, dP, exp_point, geodesic, midpoint
from .config import ExperimentConfig
from .dynamics import (
    Bernoulli,
    CocycleSystem,
    Odometer,
    Rotation,
    build_counterexample_cocycle,
    constant_cocycle,
    diagonal_function_cocycle,
    evaluate_cocycle,
    iid_cocycle,
)
from .errors import (
    ConditioningError,
    ConfigurationError,
    DomainError,
    NcmetError,
    StructuralError,
    UsageError,
)
from .met import (
    METEstimate,
    OseledetsFlag,
    determinant_convergence,
    drift_series,
    estimate_met,
    invariance_check,
    limit_growth,
    oseledets_flag,
    raw_growth,
    smooth_growth,
)
from .presets import preset, preset_names
from .products import CocycleProduct
from .runner import Report, run
from .spectral import SpectralMeasure, fk_determinant, spectral_measure

__version__ = "0.1.0"

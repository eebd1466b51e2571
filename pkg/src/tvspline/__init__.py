"""Periodic spline reconstruction from low-frequency Fourier samples.

Two solvers for the same variational reconstruction problem: a grid-based
B-spline discretization solved by ADMM, and a gridless conditional-gradient
method over zero-mean measures.  An experiment harness and CLI reproduce the
reference numerical studies.
"""

from .fourier import (
    DIRAC_STREAM_COEFF,
    TWO_PI,
    MeasurementVector,
    PeriodicSpline,
    TrigPolynomial,
    ZeroMeanMeasure,
    apply_adjoint,
    green_closed_form,
    green_eval,
    measure,
    measure_atoms,
    spline_eval,
    spline_profile,
    tv_norm,
)
from .bspline import (
    GridSpec,
    InnovationVector,
    SplineCoefficients,
    SystemMatrix,
    bspline_eval,
    bspline_fourier_coeff,
    d_filter,
    extract_knots,
    innovation,
    merge_knots,
    synthesize,
)
from .admm import AdmmParams, AdmmResult, objective, prox_l1, solution_measurement, solve_discrete
from .frankwolfe import (
    FwParams,
    FwState,
    certificate,
    extremize,
    fully_corrective_refit,
    fw_solve,
    greedy_step,
)
from .experiments import (
    ExperimentConfig,
    TrialRecord,
    add_noise,
    convergence_study,
    fit_convergence_slope,
    generate_ground_truth,
    linf_error,
    lowpass_baseline,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

"""Queue-length distributions of the two-class non-preemptive M/M/c priority queue."""

from ._backend import BACKEND
from .asymptotics import asymptote_convergence_report, lo_tail_asymptote, tail_asymptote
from .chebyshev import ab_polynomials, alpha_beta, joint_via_convolution
from .model import (
    DerivedConstants,
    ModelParams,
    ParameterError,
    agg_exact,
    condition_decomposition,
    derive_constants,
    empty_system_probability,
    hi_marginal_exact,
    no_wait_probability,
    scaled_upper_incomplete_gamma,
    xhi_exact,
)
from .oracle import ctmc_oracle
from .pmf import JointPmf, PmfVector
from .quadratic import convolve, joint_qr, lambda_taylor, lo_marginal_qr
from .rintegral import (
    backwards_recurrence_diagnostic,
    d_cumulative,
    joint_ri,
    limiting_r_integral,
    lo_marginal_ri,
    p_polynomial_table,
    r_hat_table,
    xlo_ri,
)
from .simulation import monte_carlo
from .validation import (
    MopReport,
    aggregation_test,
    mop,
    nn_test,
    quadratic_test,
    run_battery,
    xhi_test,
    xlo_test,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DerivedConstants",
    "JointPmf",
    "ModelParams",
    "MopReport",
    "ParameterError",
    "PmfVector",
    "ab_polynomials",
    "agg_exact",
    "aggregation_test",
    "alpha_beta",
    "asymptote_convergence_report",
    "backwards_recurrence_diagnostic",
    "condition_decomposition",
    "convolve",
    "ctmc_oracle",
    "d_cumulative",
    "derive_constants",
    "empty_system_probability",
    "hi_marginal_exact",
    "joint_qr",
    "joint_ri",
    "joint_via_convolution",
    "lambda_taylor",
    "limiting_r_integral",
    "lo_marginal_qr",
    "lo_marginal_ri",
    "lo_tail_asymptote",
    "monte_carlo",
    "mop",
    "nn_test",
    "no_wait_probability",
    "p_polynomial_table",
    "quadratic_test",
    "r_hat_table",
    "run_battery",
    "scaled_upper_incomplete_gamma",
    "tail_asymptote",
    "xhi_exact",
    "xhi_test",
    "xlo_ri",
    "xlo_test",
]

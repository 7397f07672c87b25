"""Histogram density estimation from locally privatised data.

Library layout:

* :mod:`ldphist.partition` -- cubic partitions, active cells, schedule checks
* :mod:`ldphist.densities` -- evaluable/samplable true densities incl. the
  sign-perturbed lower-bound family
* :mod:`ldphist.mechanism` -- Laplace indicator privatisation and the LDP
  certificate
* :mod:`ldphist.estimator` -- aggregation and the private / empirical /
  mean-noise histograms
* :mod:`ldphist.metrics` -- L1 / TV / KL / Hellinger machinery
* :mod:`ldphist.lowerbound` -- two-point lower-bound construction and its
  divergence-bound verification
* :mod:`ldphist.harness` -- experiment configs, rate studies, CLI
* :mod:`ldphist.backends` -- compiled vs pure-python aggregation kernels
"""

from .densities import (
    DensityModel,
    HypothesisTheta,
    builtin_models,
    f0_build,
    ftheta_build,
    g0_eval,
    g0_integral,
    g_eval,
    lipschitz_probe,
    sample,
    tau,
)
from .errors import CellBudgetError, ConfigurationError
from .estimator import (
    CellCounts,
    EmpiricalHistogram,
    PrivateHistogram,
    aggregate,
    empirical_histogram,
    laplace_cdf,
    mean_noise_estimator,
    mu_tilde,
    private_histogram,
)
from .mechanism import (
    PrivacyParams,
    PrivatizedRecord,
    ldp_log_ratio,
    privatize,
    privatize_stream,
    sample_unit_laplace,
    sigma_for_alpha,
)
from .metrics import (
    IntegralResult,
    QuadratureSpec,
    hellinger_affinity_1d,
    integrate_box,
    kl_1d_numeric,
    l1_distance,
    tv_distance,
)
from .partition import (
    ActiveCells,
    PartitionSpec,
    ScheduleSpec,
    active_cells,
    locate,
    locate_many,
    validate_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "ActiveCells",
    "CellBudgetError",
    "CellCounts",
    "ConfigurationError",
    "DensityModel",
    "EmpiricalHistogram",
    "HypothesisTheta",
    "IntegralResult",
    "PartitionSpec",
    "PrivacyParams",
    "PrivateHistogram",
    "PrivatizedRecord",
    "QuadratureSpec",
    "ScheduleSpec",
    "aggregate",
    "active_cells",
    "builtin_models",
    "empirical_histogram",
    "f0_build",
    "ftheta_build",
    "g0_eval",
    "g0_integral",
    "g_eval",
    "hellinger_affinity_1d",
    "integrate_box",
    "kl_1d_numeric",
    "l1_distance",
    "laplace_cdf",
    "ldp_log_ratio",
    "lipschitz_probe",
    "locate",
    "locate_many",
    "mean_noise_estimator",
    "mu_tilde",
    "privatize",
    "privatize_stream",
    "private_histogram",
    "sample",
    "sample_unit_laplace",
    "sigma_for_alpha",
    "tau",
    "tv_distance",
    "validate_schedule",
]

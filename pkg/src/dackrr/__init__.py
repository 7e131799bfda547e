"""Divide-and-conquer kernel ridge regression with bootstrap L2 confidence bands."""

from dackrr.band import (
    BandResult,
    BootstrapConfig,
    QuadratureGrid,
    Scheme,
    bootstrap_band,
    covers,
    empirical_grid,
    l2_norm_on_grid,
    uniform_grid,
)
from dackrr.dac import (
    AveragedModel,
    FitConfig,
    PartitionPlan,
    admissible_partition_range,
    default_rho,
    eval_matrix,
    fit_averaged,
    make_partition,
)
from dackrr.errors import DackrrError, InputError, NumericError, ParameterError, ParseError
from dackrr.kernel import (
    EigendecayReport,
    KernelFamily,
    KernelSpec,
    effective_dimension,
    kernel_matrix,
    kernel_value,
    nystrom_eigendecay,
)
from dackrr.krr import LocalEstimate, fit_local, predict
from dackrr.simulate import CoverageReport, SimConfig, run_coverage, simulate_data, wilson_interval

__version__ = "0.1.0"

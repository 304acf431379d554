"""Learning difference-based causal models from multivariate time series.

The pipeline discovers each variable's latent derivative chain, learns the
within-slice causal pattern under difference-model constraints, and
classifies whether manipulating equilibrated variables is safe.  Simulators
and a benchmark harness cover damped oscillators (single and coupled) and
random linear-Gaussian systems.
"""

from .citest import (CiQuery, Decision, DegenerateConditioning, FisherZTester,
                     OracleTester, ci_test, d_separation, partial_correlation)
from .differencing import TwoSliceDataset, build_two_slice, difference
from .emc import (EmcEntry, EmcReport, emc_report, feedback_empty,
                  is_contemporaneous_ancestor, is_self_regulating)
from .evaluate import (BenchmarkResult, BenchmarkSpec, EvalReport, baseline_pc,
                       compare, run_benchmark)
from .model import (Dbcm, Edge, LinearEquation, PatternGraph, Role,
                    TimeSeriesDataset, VariableId, validate_dbcm,
                    validate_pattern)
from .primes import DetectionConfig, DetectionResult, detect_primes
from .simulate import (CoupledShoParams, ShoParams, coupled_sho_model,
                       random_dbcm, sample_dbcm, sho_model,
                       simulate_band_driven_channels, simulate_coupled_sho,
                       simulate_sho, spectral_radius)
from .spectral import band_power_series
from .structure import (dbcm_pattern, learn_dbcm, learn_skeleton, orient)

__version__ = "0.1.0"

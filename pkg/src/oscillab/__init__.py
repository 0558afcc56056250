"""oscillab: a spectral laboratory for second-order hyperbolic equations
with time-oscillating, space-rough coefficients.

The package measures how much Sobolev regularity solutions lose as the
coefficient oscillation and spatial roughness vary, using frequency-local
corrected energies evaluated on pseudo-spectral solutions.
"""

from .coefficients import (CoefficientField, SamplingPlan, check_ellipticity,
                           check_oscillation_bounds, estimate_space_modulus,
                           make_family)
from .energy import (BlockEnergySample, EnergyLedger, LossCurve, block_energy,
                     block_fields, fit_beta, fit_loss, total_energy)
from .harness import (CheckResult, ConfigError, ExperimentConfig, RunReport,
                      check_theorem, coeff_audit, lp_selftest, run, sweep)
from .lp import (BoundSymbol, DyadicDecomposition, SpectralField,
                 SymbolEvaluator, alpha_symbol, dyadic_sobolev_norm,
                 find_gamma0, get_decomposition, make_trials, paraproduct,
                 sobolev_norm)
from .regularize import (PhiFunction, RegularizedCoefficient, blend,
                         block_eps, cutoff_theta, f_weight, mollify_time,
                         phi, truncate_time)
from .solver import (ModeState, ModeTrajectory, WaveState, advance, cfl_dt,
                     mode_amplification, rhs, solve_mode, step)

__version__ = "0.1.0"

"""Jump-diffusion CIR process toolkit."""
__version__ = "0.1.0"

from .bessel import BesselParams, bessel_chf, bessel_moment, bessel_pdf, bessel_sample, moment_bound_scan
from .chf import (ModelParams, cir_chf, invert_density, jcir_chf, psi, stationary_chf, transition_cdf,
                  z_exponent)
from .ergo import StationaryLaw, TestFn, decay_fit, moment_estimate, stationary_law, sup_moment_scan, time_average
from .levy import CompoundPoisson, GammaDensity, ParetoTail, Restricted, Zero
from .lyapunov import DivergentTailError, Log, PowerKappa, check_log_drift, check_power_drift
from .rng import MCEstimate, RandomStream
from .sim import Path, Scheme, euler_path, jcir_exact_oneshot, jcir_exact_path, sample_marginal, sample_paths

__all__ = [
    "BesselParams", "bessel_chf", "bessel_moment", "bessel_pdf", "bessel_sample", "moment_bound_scan",
    "ModelParams", "cir_chf", "invert_density", "jcir_chf", "psi", "stationary_chf", "transition_cdf",
    "z_exponent", "StationaryLaw", "TestFn", "decay_fit", "moment_estimate", "stationary_law",
    "sup_moment_scan", "time_average", "CompoundPoisson", "GammaDensity", "ParetoTail", "Restricted", "Zero",
    "DivergentTailError", "Log", "PowerKappa", "check_log_drift", "check_power_drift", "MCEstimate",
    "RandomStream", "Path", "Scheme", "euler_path", "jcir_exact_oneshot", "jcir_exact_path",
    "sample_marginal", "sample_paths",
]

"""Particle simulation of McKean-Vlasov SDEs: Euler and Picard schemes,
semimartingale drivers, Wasserstein-2 tools and stability diagnostics."""

__version__ = "0.1.0"

from .exceptions import BlowUpError, EvaluationError, InvalidArgument, MVLabError
from .core import (
    Lipschitz,
    Model,
    Osgood,
    StateVector,
    TimePartition,
    UniformlyContinuous,
    build_uniform_partition,
    check_growth,
    check_lipschitz,
    phi_floor,
)
from .measure import EmpiricalMeasure, integrate, w2_exact_1d, w2_sliced, w2_to_dirac0
from .drivers import (
    DriverPath,
    NoiseStream,
    aggregate_to_coarse,
    brownian_increments,
    perturbed_driver,
    read_driver,
    write_driver,
)
from .schemes import ParticleEnsemble, euler_particle_system, euler_semimartingale, picard_iterate
from .models import get_model, list_models, mean_field_ou, mckean_kernel, osgood_drift, osgood_kappa, ou_moments, pure_diffusion
from .diagnostics import (
    fit_rate,
    increment_bound_check,
    moment_check,
    stability_coefficients,
    stability_driver,
    stability_initial,
    sup_sq_error,
)

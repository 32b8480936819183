"""Graphon-weighted mean-field particle systems: simulation and diagnostics."""

__version__ = "0.1.0"

from .dynamics import (DiffusionSpec, DriftSpec, LinearInteraction, RateBounds,
                       certify_dissipativity, custom_drift, ergodicity_bound,
                       linear_drift, lln_rate, mean_reverting_drift)
from .engine import (BrownianPath, InitialLaw, IntegratorConfig, ParticleState,
                     drift_eval, ensemble_run, integrate, step_euler)
from .graphon import (EdgeWeights, Graphon, StepKernel, check_lipschitz,
                      cut_norm, l_infty_to_l1_norm, sample_edges,
                      step_difference)
from .measures import (EmpiricalMeasure, MixtureLaw, concentration_check,
                       moments, w1_empirical_1d, w2_assignment,
                       w2_empirical_1d, w2_empirical_vs_mixture_1d,
                       w2_gaussian_1d)
from .oracle import (MomentField, averaged_law, integrate_moments,
                     label_continuity_check, solve_stationary)

__all__ = [name for name in dir() if not name.startswith("_")]

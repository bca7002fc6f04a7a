"""Particle-level Monte Carlo of relay chains."""

from .engine import (ENGINES, ErrorEstimate, TrialResult, estimate_error, run_trial,
                     simulate_errors, trial_rng)
from .particles import ParticleStore, brownian_step, release, sample_count

__all__ = ["ENGINES", "ErrorEstimate", "ParticleStore", "TrialResult", "brownian_step",
           "estimate_error", "release", "run_trial", "sample_count", "simulate_errors", "trial_rng"]

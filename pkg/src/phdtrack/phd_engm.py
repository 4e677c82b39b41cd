"""Ensemble Gaussian-mixture form of the intensity recursion.

The posterior intensity lives as a uniformly weighted particle cloud.
Prediction turns propagated survivors and fresh birth particles into two
kernel density estimates, draws a combined sample from the pair, and
rebuilds a single KDE whose components share one bandwidth-scaled
covariance.  The update is the same bank-of-EKFs corrector the plain
Gaussian-mixture filter uses; sampling from the corrected mixture then
restores the uniform cloud, so mixture growth never compounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models as _models
from .gaussmix import (
    GaussianMixture,
    floor_covariance,
    kde_from_particles,
    sample_mixture,
    sample_two_mixtures,
    silverman_bandwidth,
)
from .phd_gm import _ekf_phd_update
from .phd_smc import ParticleSet, cluster_extract

UNIFORMITY_TOL = 1e-12


@dataclass(frozen=True)
class EngmPhdState:
    """Posterior carried between steps: a uniformly weighted particle cloud."""

    particles: ParticleSet
    particle_count: int

    def __post_init__(self):
        if len(self.particles) != self.particle_count:
            raise ValueError(
                f"state holds {len(self.particles)} particles, expected {self.particle_count}")
        w = self.particles.weights
        if len(w) and w.max() - w.min() > UNIFORMITY_TOL * max(w.max(), 1.0):
            raise ValueError("particle weights must be uniform")


def engm_predict(state: EngmPhdState, models: "_models.Models",
                 rng: np.random.Generator) -> GaussianMixture:
    """Predicted intensity as a single shared-covariance KDE.

    Survivors are propagated with process noise and wrapped in a KDE of
    mass p_survive * N; birth particles get their own KDE of the birth
    mass.  A combined draw of (previous count + birth count) samples from
    the two estimates is then re-wrapped into one KDE carrying the summed
    mass.  With no birth material the survivor KDE is returned directly.
    """
    motion = models.motion
    cloud = state.particles
    n_hat = cloud.mass
    survivors = _models.propagate_state(cloud.states, motion.dt)
    survivors = survivors + _models.sample_psd_noise(motion.process_noise, len(cloud), rng)
    surviving_mass = models.detection.p_survive * n_hat
    birth_mass = models.birth.mass_per_step
    if models.birth.count_per_step == 0 or birth_mass <= 0.0:
        return kde_from_particles(survivors, surviving_mass)
    if surviving_mass <= 0.0:
        birth_states = _models.sample_birth_states(models.birth, rng)
        return kde_from_particles(birth_states, birth_mass)
    survivor_kde = kde_from_particles(survivors, surviving_mass)
    birth_states = _models.sample_birth_states(models.birth, rng)
    birth_kde = kde_from_particles(birth_states, birth_mass)
    combined_count = len(cloud) + models.birth.count_per_step
    combined = sample_two_mixtures(survivor_kde, birth_kde, combined_count, rng)
    return kde_from_particles(combined, surviving_mass + birth_mass)


def engm_update(prior: GaussianMixture, scan: "_models.MeasurementScan",
                models: "_models.Models") -> GaussianMixture:
    """Bank-of-EKFs correction of the KDE prior; see gm_update for the layout."""
    return _ekf_phd_update(prior, scan, models)


def engm_resample(posterior: GaussianMixture, count: int,
                  rng: np.random.Generator) -> EngmPhdState:
    """Draw `count` particles from the corrected mixture, uniform weights mass/count."""
    mass = posterior.mass
    if mass <= 0:
        raise ValueError("cannot resample a mixture with zero mass")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    states = sample_mixture(posterior, count, rng)
    return EngmPhdState(ParticleSet(states, np.full(count, mass / count)), count)


def engm_extract(state: EngmPhdState,
                 rng: np.random.Generator) -> tuple[int, np.ndarray]:
    """Cardinality and k-means state estimates from the posterior cloud."""
    return cluster_extract(state.particles, rng)


def engmf_step(states: np.ndarray, scan: "_models.MeasurementScan",
               models: "_models.Models", rng: np.random.Generator) -> np.ndarray:
    """One step of the plain single-target ensemble Gaussian-mixture filter.

    Reference recursion for the degenerate configuration (one target that
    always survives and is always detected, no clutter, no births): the
    cloud is propagated, wrapped in a KDE with the unscaled Silverman
    bandwidth, corrected against the scan's single measurement with
    normalized weights, and resampled back to the same size.  Written as
    its own straight-line path, deliberately separate from the intensity
    recursion, so the two can be compared against each other.
    """
    if len(scan) != 1:
        raise ValueError("the reference recursion expects exactly one measurement")
    states = np.asarray(states, dtype=float)
    j, n = states.shape
    motion = models.motion
    meas = models.measurement
    prop = _models.propagate_state(states, motion.dt)
    prop = prop + _models.sample_psd_noise(motion.process_noise, j, rng)
    prior_cov = floor_covariance(silverman_bandwidth(n, j) * np.atleast_2d(np.cov(prop.T, ddof=1)))
    z = scan.values[0]
    r = np.asarray(meas.noise_cov, dtype=float)
    z_dim = r.shape[0]
    weights = np.empty(j)
    means = np.empty((j, n))
    covs = np.empty((j, n, n))
    for i in range(j):
        h = meas.jacobian(prop[i])
        s = h @ prior_cov @ h.T + r
        s = 0.5 * (s + s.T)
        gain = prior_cov @ h.T @ np.linalg.inv(s)
        innov = z - meas.measure(prop[i])
        innov[meas.angular] = _models.wrap_angle(innov[meas.angular])
        means[i] = prop[i] + gain @ innov
        updated = prior_cov - gain @ h @ prior_cov
        covs[i] = floor_covariance(0.5 * (updated + updated.T))
        chol = np.linalg.cholesky(s)
        white = np.linalg.solve(chol, innov)
        weights[i] = np.exp(-0.5 * (white @ white + z_dim * np.log(2.0 * np.pi))
                            - np.log(np.diag(chol)).sum())
    total = weights.sum()
    if total <= 0:
        raise np.linalg.LinAlgError("all posterior weights vanished in the reference step")
    posterior = GaussianMixture(weights / total, means, covs)
    return sample_mixture(posterior, j, rng)

"""Particle (sequential Monte Carlo) form of the intensity recursion.

The intensity is a weighted particle cloud whose total weight is the
expected target count.  Prediction is a bootstrap step: survivors are
propagated through the motion model with process noise and reweighted by
the survival probability, then birth particles are appended.  The update
reweights particles only; resampling restores the fixed particle budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models as _models


@dataclass(frozen=True)
class ParticleSet:
    """Weighted particles: states (J, n), weights (J,) >= 0.  Mass = sum of weights."""

    states: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "weights", weights)
        if states.ndim != 2 or weights.ndim != 1 or states.shape[0] != weights.shape[0]:
            raise ValueError(
                f"states {states.shape} and weights {weights.shape} must share one length")
        if states.shape[0]:
            if not np.all(np.isfinite(states)):
                raise ValueError("particle states must be finite")
            if not np.all(np.isfinite(weights)) or np.any(weights < 0):
                raise ValueError("particle weights must be finite and >= 0")

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))


def smc_predict(posterior: ParticleSet, models: "_models.Models",
                rng: np.random.Generator) -> ParticleSet:
    """Bootstrap prediction: propagated survivors followed by birth particles.

    Survivor weights are scaled by the survival probability; birth
    particles are drawn from the birth Gaussian with weight_each apiece,
    so the predicted mass is p_survive * mass + birth mass.
    """
    motion = models.motion
    survivors = _models.propagate_state(posterior.states, motion.dt)
    survivors = survivors + _models.sample_psd_noise(motion.process_noise, len(posterior), rng)
    birth_states = _models.sample_birth_states(models.birth, rng)
    states = np.concatenate([survivors, birth_states])
    weights = np.concatenate([
        models.detection.p_survive * posterior.weights,
        np.full(birth_states.shape[0], models.birth.weight_each),
    ])
    return ParticleSet(states, weights)


def _scan_log_likelihoods(states: np.ndarray, scan: "_models.MeasurementScan",
                          measurement) -> np.ndarray:
    """log N(z; h(x), R) for every particle/measurement pair, shape (J, M)."""
    z = scan.values
    eta = measurement.measure(states)
    innov = z[None, :, :] - eta[:, None, :]
    ang = measurement.angular
    if np.any(ang):
        innov[:, :, ang] = _models.wrap_angle(innov[:, :, ang])
    r = measurement.noise_cov
    solved = np.linalg.solve(r, innov.reshape(-1, r.shape[0]).T).T.reshape(innov.shape)
    quad = np.einsum("jmi,jmi->jm", innov, solved)
    _, log_det = np.linalg.slogdet(r)
    return -0.5 * (quad + r.shape[0] * np.log(2.0 * np.pi) + log_det)


def smc_update(predicted: ParticleSet, scan: "_models.MeasurementScan",
               models: "_models.Models") -> ParticleSet:
    """Reweight particles against one scan; states are untouched.

    Each particle keeps (1 - p_detect) of its weight and gains, per
    measurement, its share of that measurement's unit of evidence,
    normalized against clutter intensity plus the cloud's total
    likelihood.  A measurement that no particle (and no clutter) can
    explain contributes nothing rather than dividing by zero.
    """
    p_d = models.detection.p_detect
    kappa = models.clutter.kappa
    w = predicted.weights
    out = (1.0 - p_d) * w
    if len(scan) and len(predicted):
        like = np.exp(_scan_log_likelihoods(predicted.states, scan, models.measurement))
        contrib = p_d * w[:, None] * like
        denom = kappa + contrib.sum(axis=0)
        ok = denom > 0.0
        if np.any(ok):
            out = out + (contrib[:, ok] / denom[ok]).sum(axis=1)
    return ParticleSet(predicted.states, out)


def smc_resample(updated: ParticleSet, count: int, rng: np.random.Generator,
                 method: str = "multinomial") -> ParticleSet:
    """Resample down/up to `count` particles with uniform weights mass/count.

    Multinomial by default; systematic resampling is available behind the
    method switch.  Zero total mass is an error: the caller decides how to
    restart (the scenario runner skips resampling and lets the next
    prediction's births reseed the cloud).
    """
    mass = updated.mass
    if mass <= 0:
        raise ValueError("cannot resample a particle set with zero mass")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    probs = updated.weights / mass
    if method == "multinomial":
        idx = rng.choice(len(updated), size=count, p=probs)
    elif method == "systematic":
        positions = (rng.random() + np.arange(count)) / count
        idx = np.searchsorted(np.cumsum(probs), positions, side="left")
        idx = np.minimum(idx, len(updated) - 1)
    else:
        raise ValueError(f"unknown resampling method: {method!r}")
    return ParticleSet(updated.states[idx], np.full(count, mass / count))


def _kmeans_seed(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: spread initial centers by squared-distance sampling."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[j:] = points[rng.integers(n, size=k - j)]
            break
        centers[j] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def kmeans_cluster(points: np.ndarray, k: int, rng: np.random.Generator,
                   restarts: int = 5, iters: int = 20) -> np.ndarray:
    """Cluster points into k centers; best of `restarts` seeded Lloyd runs."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if k >= n:
        return points.copy()
    best_centers = None
    best_score = np.inf
    for _ in range(restarts):
        centers = _kmeans_seed(points, k, rng)
        assign = None
        for _ in range(iters):
            d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
            new_assign = d2.argmin(axis=1)
            for j in range(k):
                sel = new_assign == j
                if np.any(sel):
                    centers[j] = points[sel].mean(axis=0)
                else:
                    # revive an empty cluster at the worst-fit point
                    worst = d2[np.arange(n), new_assign].argmax()
                    centers[j] = points[worst]
                    new_assign[worst] = j
            if assign is not None and np.array_equal(assign, new_assign):
                break
            assign = new_assign
        score = np.sum((points - centers[assign]) ** 2)
        if score < best_score:
            best_score = score
            best_centers = centers.copy()
    return best_centers


def cluster_extract(particles: ParticleSet,
                    rng: np.random.Generator) -> tuple[int, np.ndarray]:
    """State estimates from a uniformly weighted cloud.

    The cardinality estimate is the total mass rounded half-up; that many
    k-means cluster centers are returned as the state estimates.  Zero
    estimated targets yields an empty state array.
    """
    n_hat = int(np.floor(particles.mass + 0.5))
    if n_hat <= 0 or len(particles) == 0:
        return max(n_hat, 0), np.zeros((0, particles.dim if len(particles) else 0))
    k = min(n_hat, len(particles))
    return n_hat, kmeans_cluster(particles.states, k, rng)

"""Weighted Gaussian mixtures for intensity functions.

A multi-target intensity is carried either as a weighted Gaussian mixture
or as a weighted particle cloud.  This module owns the mixture side:
construction (including kernel density estimates over particle clouds with
a Silverman bandwidth), mass accounting, density evaluation, and the two
sampling routines used to rebuild a mixture from draws.

Total mixture mass is the expected target count, so weights are free to
sum to any nonnegative value; nothing here normalizes unless a routine
says so explicitly (sampling normalizes an internal copy only).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Covariance hygiene: tolerance for symmetry checks, the most negative
# eigenvalue accepted as "PSD up to roundoff", and the floor scale used
# to push near-singular matrices away from the factorization boundary.
SYMMETRY_TOL = 1e-10
EIG_TOL = -1e-10
FLOOR_SCALE = 1e-9


def floor_covariance(cov: np.ndarray) -> np.ndarray:
    """Return cov, inflated by eps*I when its smallest eigenvalue is below eps.

    eps = FLOOR_SCALE * (1 + trace(cov)/n) scales with the matrix so that
    large covariances are floored proportionally.  Well-conditioned input
    is returned unchanged (same object, no copy).
    """
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0]
    eps = FLOOR_SCALE * (1.0 + np.trace(cov) / n)
    if np.linalg.eigvalsh(cov)[0] < eps:
        return cov + eps * np.eye(n)
    return cov


def floor_covariances(covs: np.ndarray) -> np.ndarray:
    """Batched floor_covariance over an array of shape (J, n, n)."""
    covs = np.asarray(covs, dtype=float)
    if covs.shape[0] == 0:
        return covs
    n = covs.shape[-1]
    eps = FLOOR_SCALE * (1.0 + np.trace(covs, axis1=-2, axis2=-1) / n)
    min_eig = np.linalg.eigvalsh(covs)[..., 0]
    mask = min_eig < eps
    if np.any(mask):
        covs = covs.copy()
        covs[mask] += eps[mask, None, None] * np.eye(n)
    return covs


@dataclass(frozen=True)
class GaussianComponent:
    """One weighted Gaussian: nonnegative weight, mean (n,), covariance (n, n)."""

    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ValueError(f"component weight must be finite and >= 0, got {self.weight}")
        if mean.ndim != 1:
            raise ValueError(f"mean must be a vector, got shape {mean.shape}")
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise ValueError(f"cov shape {cov.shape} does not match mean dimension {n}")
        if np.abs(cov - cov.T).max(initial=0.0) > SYMMETRY_TOL:
            raise ValueError("cov is not symmetric")
        if np.linalg.eigvalsh(cov)[0] < EIG_TOL:
            raise ValueError("cov has an eigenvalue below the PSD tolerance")


@dataclass(frozen=True)
class GaussianMixture:
    """Ordered Gaussian mixture, array-backed.

    weights: (J,), means: (J, n), covs: (J, n, n).  May be empty (J = 0),
    in which case the mass is zero.  Component order is part of the value:
    operations that do not explicitly sort preserve it.
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        m = np.asarray(self.means, dtype=float)
        p = np.asarray(self.covs, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "covs", p)
        if w.ndim != 1 or m.ndim != 2 or p.ndim != 3:
            raise ValueError("expected weights (J,), means (J, n), covs (J, n, n)")
        j, n = m.shape
        if w.shape != (j,) or p.shape != (j, n, n):
            raise ValueError(
                f"inconsistent mixture shapes: weights {w.shape}, means {m.shape}, covs {p.shape}"
            )
        if j == 0:
            return
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and >= 0")
        if not np.all(np.isfinite(m)):
            raise ValueError("means must be finite")
        if np.abs(p - np.swapaxes(p, -1, -2)).max() > SYMMETRY_TOL:
            raise ValueError("covariances must be symmetric")
        if np.linalg.eigvalsh(p)[..., 0].min() < EIG_TOL:
            raise ValueError("a covariance has an eigenvalue below the PSD tolerance")

    def __len__(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def component(self, i: int) -> GaussianComponent:
        return GaussianComponent(float(self.weights[i]), self.means[i], self.covs[i])

    @property
    def components(self) -> list[GaussianComponent]:
        return [self.component(i) for i in range(len(self))]

    @classmethod
    def from_components(cls, components) -> "GaussianMixture":
        components = list(components)
        if not components:
            raise ValueError("cannot infer dimension from an empty component list; use empty(dim)")
        n = components[0].mean.shape[0]
        return cls(
            np.array([c.weight for c in components], dtype=float),
            np.array([c.mean for c in components], dtype=float),
            np.array([c.cov for c in components], dtype=float).reshape(len(components), n, n),
        )

    @classmethod
    def empty(cls, dim: int) -> "GaussianMixture":
        return cls(np.zeros(0), np.zeros((0, dim)), np.zeros((0, dim, dim)))


def mixture_mass(mixture: GaussianMixture) -> float:
    """Total mass (sum of weights); zero for the empty mixture."""
    return mixture.mass


def silverman_bandwidth(dim: int, count: int) -> float:
    """Silverman rule-of-thumb bandwidth scaling for a Gaussian kernel.

    Returns (4 / (dim + 2))**(2 / (dim + 4)) * count**(-2 / (dim + 4)),
    the scalar multiplying the sample covariance in a kernel density
    estimate.  Decreases monotonically in count for fixed dim.
    """
    if dim < 1 or count < 1:
        raise ValueError(f"need dim >= 1 and count >= 1, got dim={dim}, count={count}")
    return float((4.0 / (dim + 2)) ** (2.0 / (dim + 4)) * count ** (-2.0 / (dim + 4)))


def kde_from_particles(states: np.ndarray, mass: float) -> GaussianMixture:
    """Kernel density estimate of an intensity from equally weighted particles.

    Each of the J rows of `states` becomes one Gaussian component with
    weight mass/J.  All components share a single covariance
    (beta/mass) * SampleCov(states), with beta the Silverman bandwidth for
    (dim, J) and the sample covariance taken with the unbiased J - 1
    denominator.  For J = 1, or whenever the sample covariance is too
    close to singular, the covariance floor is applied.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or states.shape[0] < 1:
        raise ValueError(f"states must be (J, n) with J >= 1, got shape {states.shape}")
    if not np.isfinite(mass) or mass <= 0:
        raise ValueError(f"mass must be finite and > 0, got {mass}")
    j, n = states.shape
    beta = silverman_bandwidth(n, j)
    if j == 1:
        base = np.zeros((n, n))
    else:
        base = np.atleast_2d(np.cov(states.T, ddof=1))
    shared = floor_covariance((beta / mass) * base)
    return GaussianMixture(
        np.full(j, mass / j),
        states.copy(),
        np.broadcast_to(shared, (j, n, n)).copy(),
    )


def eval_gaussian(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    """Multivariate normal density N(x; mean, cov).

    The covariance is floored first, so the density is always defined;
    near-singular covariances can still push the value to inf, which is
    returned rather than raised.
    """
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    if x.shape != mean.shape or x.ndim != 1:
        raise ValueError(f"x {x.shape} and mean {mean.shape} must be matching vectors")
    cov = floor_covariance(np.asarray(cov, dtype=float))
    n = x.shape[0]
    d = x - mean
    quad = float(d @ np.linalg.solve(cov, d))
    log_det = float(np.log(np.linalg.det(cov)))
    return float(np.exp(-0.5 * (quad + n * np.log(2.0 * np.pi) + log_det)))


def cumulative_select(weights: np.ndarray, u: float) -> int:
    """Index of the first component whose cumulative normalized weight reaches u.

    Weights are normalized on an internal copy; the input is untouched.
    Returns the smallest index l with sum(w[0..l]) >= u.  If roundoff in
    the cumulative sum leaves u beyond the final entry, the last index is
    returned.
    """
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        raise ValueError("cannot select from a mixture with zero mass")
    cum = np.cumsum(w / total)
    return int(min(np.searchsorted(cum, u, side="left"), len(w) - 1))


def sample_mixture(mixture: GaussianMixture, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `count` i.i.d. samples from a Gaussian mixture.

    Per sample: draw u ~ U(0, 1), pick the component by cumulative_select
    over the (internally normalized) weights, then draw from that
    component's Gaussian via a Cholesky factor.  Returns (count, dim).
    Components with zero weight are never selected.  A factorization
    failure is an error, not a silent repair.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    n = mixture.dim
    if count == 0:
        return np.zeros((0, n))
    total = mixture.mass
    if total <= 0:
        raise ValueError("cannot sample from a mixture with zero mass")
    cum = np.cumsum(mixture.weights / total)
    us = rng.random(count)
    idx = np.minimum(np.searchsorted(cum, us, side="left"), len(mixture) - 1)
    z = rng.standard_normal((count, n))
    used = np.unique(idx)
    try:
        chols = np.linalg.cholesky(mixture.covs[used])
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "component covariance is not positive definite; apply the covariance floor upstream"
        ) from exc
    lookup = np.empty(len(mixture), dtype=int)
    lookup[used] = np.arange(used.size)
    scale = chols[lookup[idx]]
    return mixture.means[idx] + np.einsum("kij,kj->ki", scale, z)


def sample_two_mixtures(
    first: GaussianMixture,
    second: GaussianMixture,
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw `count` samples from the union intensity of two mixtures.

    With W1 and W2 the two masses, each sample picks the first mixture when
    u < W1 / (W1 + W2) and the second otherwise, then samples within the
    chosen mixture.  Neither mixture is normalized against the other
    beyond this mass split.  Either mixture may be empty as long as the
    combined mass is positive; an empty side is simply never chosen.
    """
    if first.dim != second.dim:
        raise ValueError(f"dimension mismatch: {first.dim} vs {second.dim}")
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    w1 = first.mass
    w2 = second.mass
    if w1 + w2 <= 0:
        raise ValueError("combined mass must be > 0")
    if count == 0:
        return np.zeros((0, first.dim))
    pick_first = rng.random(count) < w1 / (w1 + w2)
    out = np.empty((count, first.dim))
    n1 = int(pick_first.sum())
    if n1 > 0:
        out[pick_first] = sample_mixture(first, n1, rng)
    if count - n1 > 0:
        out[~pick_first] = sample_mixture(second, count - n1, rng)
    return out

"""Two-target radar scenario: truth, scans, filter runs, Monte Carlo.

Truth is deterministic constant-velocity motion with no process noise.
Each filtering step k = 1..K generates one scan at the truth positions
(detections thinned by p_detect, Gaussian measurement noise, Poisson
clutter), runs one filter recursion, extracts state estimates, and scores
them with OSPA on positions.

Randomness is split into two child streams per run, one for scans and one
for the filter, both derived from the run seed.  All filters therefore
see byte-identical scans for the same seed, which pairs the comparison,
and run r of a Monte Carlo uses seed + r.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import models as _models
from .gaussmix import GaussianMixture
from .metrics import OspaParams, ospa
from .phd_engm import EngmPhdState, engm_extract, engm_predict, engm_resample, engm_update
from .phd_gm import GmPhdConfig, gm_extract, gm_predict, gm_update, prune_merge_cap
from .phd_smc import ParticleSet, cluster_extract, smc_predict, smc_resample, smc_update

FILTER_KINDS = ("gm", "smc", "engm")

_SCAN_STREAM = 0
_FILTER_STREAM = 1


def _default_targets() -> np.ndarray:
    return np.array([
        [50.0, 50.0, 50.0, 0.5, 0.5, 2.0],
        [100.0, 100.0, 50.0, -0.5, -0.5, 2.0],
    ])


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one experiment."""

    initial_targets: np.ndarray = field(default_factory=_default_targets)
    t_start: float = 0.0
    t_end: float = 100.0
    dt: float = 1.0
    models: _models.Models = field(default_factory=_models.Models)
    filter_kind: str = "engm"
    gm: GmPhdConfig = field(default_factory=GmPhdConfig)
    budget: int = 250
    init_weight: float = 1e-16
    resample_method: str = "multinomial"
    ospa: OspaParams = field(default_factory=OspaParams)
    seed: int = 0
    runs: int = 25

    def __post_init__(self):
        object.__setattr__(self, "initial_targets",
                           np.atleast_2d(np.asarray(self.initial_targets, dtype=float)))
        if self.filter_kind not in FILTER_KINDS:
            raise ValueError(f"filter_kind must be one of {FILTER_KINDS}, got {self.filter_kind!r}")
        if self.t_end < self.t_start or self.dt <= 0:
            raise ValueError("need t_end >= t_start and dt > 0")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))


@dataclass
class StepRecord:
    """Everything recorded about one filtering step."""

    k: int
    truth: np.ndarray
    extracted: np.ndarray
    n_true: int
    n_hat: int
    ospa_total: float
    ospa_loc: float
    ospa_card: float
    n_components: int
    wall_time: float


@dataclass
class RunRecord:
    """One Monte Carlo run: its seed, its steps, and any failure."""

    run: int
    seed: int
    filter_kind: str
    steps: list
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


class FilterNumericalError(RuntimeError):
    """A filter recursion failed; carries the 1-based step index."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"numerical failure at step {step}: {cause}")
        self.step = step


def simulate_truth(config: ScenarioConfig) -> np.ndarray:
    """Noise-free target states at every sample time, shape (K + 1, T, 6)."""
    x0 = config.initial_targets
    steps = config.n_steps
    out = np.empty((steps + 1, x0.shape[0], x0.shape[1]))
    for k in range(steps + 1):
        t = k * config.dt
        out[k, :, :3] = x0[:, :3] + t * x0[:, 3:]
        out[k, :, 3:] = x0[:, 3:]
    return out


def generate_scan(truth_states: np.ndarray, models: "_models.Models",
                  rng: np.random.Generator) -> _models.MeasurementScan:
    """One scan: thinned noisy detections plus clutter, in shuffled order."""
    meas = models.measurement
    rows = []
    for x in np.atleast_2d(truth_states):
        if rng.random() < models.detection.p_detect:
            z = meas.measure(x) + meas.sigmas * rng.standard_normal(meas.dim)
            z[meas.angular] = _models.wrap_angle(z[meas.angular])
            rows.append(z)
    detections = np.array(rows).reshape(len(rows), meas.dim)
    clutter = _models.sample_clutter(models.clutter, rng, meas)
    combined = np.concatenate([detections, clutter])
    return _models.MeasurementScan(combined[rng.permutation(len(combined))])


class _GmStepper:
    def __init__(self, config: ScenarioConfig, rng: np.random.Generator):
        self.config = config
        dim = config.initial_targets.shape[1]
        self.mixture = GaussianMixture(
            np.array([config.init_weight]),
            np.zeros((1, dim)),
            np.eye(dim)[None, :, :],
        )

    def step(self, scan, rng):
        cfg = self.config
        predicted = gm_predict(self.mixture, cfg.models, rng)
        corrected = gm_update(predicted, scan, cfg.models)
        self.mixture = prune_merge_cap(corrected, cfg.gm)
        n_hat, states = gm_extract(self.mixture, cfg.gm)
        return n_hat, states, len(self.mixture)


class _SmcStepper:
    def __init__(self, config: ScenarioConfig, rng: np.random.Generator):
        self.config = config
        dim = config.initial_targets.shape[1]
        states = rng.standard_normal((config.budget, dim))
        self.particles = ParticleSet(states, np.full(config.budget,
                                                     config.init_weight / config.budget))

    def step(self, scan, rng):
        cfg = self.config
        predicted = smc_predict(self.particles, cfg.models, rng)
        corrected = smc_update(predicted, scan, cfg.models)
        if corrected.mass > 0:
            self.particles = smc_resample(corrected, cfg.budget, rng, cfg.resample_method)
        else:
            # dark filter: keep the zero-mass cloud and let births reseed it
            self.particles = corrected
        n_hat, states = cluster_extract(self.particles, rng)
        return n_hat, states, len(self.particles)


class _EngmStepper:
    def __init__(self, config: ScenarioConfig, rng: np.random.Generator):
        self.config = config
        dim = config.initial_targets.shape[1]
        states = rng.standard_normal((config.budget, dim))
        cloud = ParticleSet(states, np.full(config.budget,
                                            config.init_weight / config.budget))
        self.state = EngmPhdState(cloud, config.budget)

    def step(self, scan, rng):
        cfg = self.config
        predicted = engm_predict(self.state, cfg.models, rng)
        corrected = engm_update(predicted, scan, cfg.models)
        self.state = engm_resample(corrected, cfg.budget, rng)
        n_hat, states = engm_extract(self.state, rng)
        return n_hat, states, self.state.particle_count


_STEPPERS = {"gm": _GmStepper, "smc": _SmcStepper, "engm": _EngmStepper}


def run_filter(config: ScenarioConfig) -> list[StepRecord]:
    """One full filtering run; returns a record per step k = 1..K.

    Numerical failures abort the run with the failing step index attached.
    """
    rng_scan = np.random.default_rng(np.random.SeedSequence([config.seed, _SCAN_STREAM]))
    rng_filter = np.random.default_rng(np.random.SeedSequence([config.seed, _FILTER_STREAM]))
    truth = simulate_truth(config)
    stepper = _STEPPERS[config.filter_kind](config, rng_filter)
    records = []
    for k in range(1, config.n_steps + 1):
        scan = generate_scan(truth[k], config.models, rng_scan)
        started = time.perf_counter()
        try:
            n_hat, extracted, n_components = stepper.step(scan, rng_filter)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            raise FilterNumericalError(k, exc) from exc
        elapsed = time.perf_counter() - started
        total, loc, card = ospa(extracted[:, :3] if extracted.size else extracted,
                                truth[k][:, :3], config.ospa)
        records.append(StepRecord(
            k=k,
            truth=truth[k],
            extracted=extracted,
            n_true=truth[k].shape[0],
            n_hat=n_hat,
            ospa_total=total,
            ospa_loc=loc,
            ospa_card=card,
            n_components=n_components,
            wall_time=elapsed,
        ))
    return records


@dataclass
class MonteCarloSummary:
    """Per-step means over successful runs, plus an efficiency roll-up."""

    filter_kind: str
    ks: np.ndarray
    mean_ospa: np.ndarray
    mean_ospa_loc: np.ndarray
    mean_ospa_card: np.ndarray
    mean_n_hat: np.ndarray
    mean_n_components: np.ndarray
    mean_wall_time: np.ndarray
    runs: int
    failures: int
    total_wall_time: float

    def mean_over(self, values: np.ndarray, k_lo: int, k_hi: int) -> float:
        """Mean of a per-step series over the inclusive step window [k_lo, k_hi]."""
        sel = (self.ks >= k_lo) & (self.ks <= k_hi)
        return float(values[sel].mean())


def _run_one(config: ScenarioConfig, run_index: int) -> RunRecord:
    run_config = replace(config, seed=config.seed + run_index)
    try:
        steps = run_filter(run_config)
        return RunRecord(run_index, run_config.seed, config.filter_kind, steps)
    except FilterNumericalError as exc:
        return RunRecord(run_index, run_config.seed, config.filter_kind, [], error=str(exc))


def run_monte_carlo(config: ScenarioConfig, n_runs: int | None = None,
                    threads: int = 1) -> tuple[MonteCarloSummary, list[RunRecord]]:
    """Repeat run_filter over n_runs seeds and average the step records.

    Failed runs are kept in the returned records with their error message
    but excluded from every mean.  Results do not depend on threads; runs
    are independent and merged in run order.
    """
    n_runs = config.runs if n_runs is None else n_runs
    started = time.perf_counter()
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_run_one, [config] * n_runs, range(n_runs)))
    else:
        records = [_run_one(config, r) for r in range(n_runs)]
    total_wall = time.perf_counter() - started
    good = [r for r in records if not r.failed]
    ks = np.arange(1, config.n_steps + 1)
    if good:
        def per_step(attr):
            return np.array([[getattr(s, attr) for s in r.steps] for r in good]).mean(axis=0)

        summary = MonteCarloSummary(
            filter_kind=config.filter_kind,
            ks=ks,
            mean_ospa=per_step("ospa_total"),
            mean_ospa_loc=per_step("ospa_loc"),
            mean_ospa_card=per_step("ospa_card"),
            mean_n_hat=per_step("n_hat"),
            mean_n_components=per_step("n_components"),
            mean_wall_time=per_step("wall_time"),
            runs=n_runs,
            failures=len(records) - len(good),
            total_wall_time=total_wall,
        )
    else:
        nan = np.full(ks.shape, np.nan)
        summary = MonteCarloSummary(config.filter_kind, ks, nan, nan, nan, nan, nan, nan,
                                    n_runs, n_runs, total_wall)
    return summary, records

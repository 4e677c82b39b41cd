"""Command-line front end: run experiments, compare filters, validate, emit config.

Subcommands:
  run          one filter over a Monte Carlo batch, records to CSV
  compare      all three filters on identical scans (paired seeds)
  validate     built-in invariant and oracle self-checks
  emit-config  write the default configuration file

Configuration is a flat INI file with one section per model; every value
defaults to the reference two-target radar scenario, so an empty file (or
no file) reproduces it.  Angles in the file are degrees; everything
internal is radians.  Flags beat environment variables (PHDTRACK_FILTER,
PHDTRACK_RUNS, PHDTRACK_SEED, PHDTRACK_CONFIG, PHDTRACK_OUT_DIR,
PHDTRACK_THREADS), which beat the file.

Exit codes: 0 success, 1 configuration or usage error, 2 numerical
failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import models as _models
from .metrics import OspaParams
from .phd_gm import GmPhdConfig
from .scenario import FILTER_KINDS, MonteCarloSummary, RunRecord, ScenarioConfig, run_monte_carlo

ENV_PREFIX = "PHDTRACK_"

RECORD_HEADER = "run,filter,k,n_true,n_hat,ospa,ospa_loc,ospa_card,n_components,wall_ms"
STATE_HEADER = "run,filter,k,target_slot,rx,ry,rz,vx,vy,vz"
SUMMARY_HEADER = ("filter,k,mean_ospa,mean_ospa_loc,mean_ospa_card,"
                  "mean_n_hat,mean_n_components,mean_wall_ms")
EFFICIENCY_HEADER = "filter,mean_components,total_seconds"


class ConfigError(Exception):
    """Bad configuration value; the message names the section and key."""


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _fmt_vector(values) -> str:
    return ", ".join(_fmt(float(v)) for v in values)


@dataclass
class FileConfig:
    """Exact mirror of the configuration file, in file units (degrees)."""

    filter: str = "engm"
    runs: int = 25
    seed: int = 0
    t_start: float = 0.0
    t_end: float = 100.0
    dt: float = 1.0
    budget: int = 250
    init_weight: float = 1e-16
    resample: str = "multinomial"
    targets: list = field(default_factory=lambda: [
        [50.0, 50.0, 50.0, 0.5, 0.5, 2.0],
        [100.0, 100.0, 50.0, -0.5, -0.5, 2.0],
    ])
    sigma_accel: float = 0.05
    sigma_range: float = 1.0
    sigma_azimuth_deg: float = 0.5
    sigma_elevation_deg: float = 0.5
    birth_mean: list = field(default_factory=lambda: [75.0, 75.0, 150.0, 0.0, 0.0, 0.0])
    birth_sigma: list = field(default_factory=lambda: [50.0, 50.0, 50.0, 5.0, 5.0, 5.0])
    birth_count: int = 10
    birth_weight: float = 0.01
    clutter_rate: float = 10.0
    x_min: float = 0.0
    x_max: float = 200.0
    y_min: float = 0.0
    y_max: float = 200.0
    z_min: float = 0.0
    z_max: float = 400.0
    density: float = 6.25e-8
    kappa_override: float | None = None
    p_detect: float = 0.98
    p_survive: float = 0.99
    prune_threshold: float = 1e-5
    merge_threshold: float = 4.0
    max_components: int = 250
    extraction: str = "top-n"
    extraction_threshold: float = 0.5
    ospa_cutoff: float = 100.0
    ospa_order: float = 2.0

    def to_scenario(self) -> ScenarioConfig:
        models = _models.Models(
            motion=_models.MotionModel(
                dt=self.dt,
                process_noise=_models.dwna_process_noise(self.dt, self.sigma_accel),
            ),
            measurement=_models.RadarMeasurementModel(
                sigma_range=self.sigma_range,
                sigma_azimuth=float(np.deg2rad(self.sigma_azimuth_deg)),
                sigma_elevation=float(np.deg2rad(self.sigma_elevation_deg)),
            ),
            birth=_models.BirthModel(
                mean=np.asarray(self.birth_mean, dtype=float),
                cov=np.diag(np.asarray(self.birth_sigma, dtype=float) ** 2),
                count_per_step=self.birth_count,
                weight_each=self.birth_weight,
            ),
            clutter=_models.ClutterModel(
                rate=self.clutter_rate,
                region=np.array([[self.x_min, self.x_max],
                                 [self.y_min, self.y_max],
                                 [self.z_min, self.z_max]]),
                density=self.density,
                kappa_override=self.kappa_override,
            ),
            detection=_models.DetectionSurvival(self.p_detect, self.p_survive),
        )
        return ScenarioConfig(
            initial_targets=np.asarray(self.targets, dtype=float),
            t_start=self.t_start,
            t_end=self.t_end,
            dt=self.dt,
            models=models,
            filter_kind=self.filter,
            gm=GmPhdConfig(self.prune_threshold, self.merge_threshold,
                           self.max_components, self.extraction, self.extraction_threshold),
            budget=self.budget,
            init_weight=self.init_weight,
            resample_method=self.resample,
            ospa=OspaParams(self.ospa_cutoff, self.ospa_order),
            seed=self.seed,
            runs=self.runs,
        )


def emit_config_text(cfg: FileConfig) -> str:
    """Canonical configuration text; parse followed by emit is the identity."""
    lines = []

    def section(name, pairs):
        lines.append(f"[{name}]")
        for key, value in pairs:
            lines.append(f"{key} = {value}")
        lines.append("")

    section("scenario", [
        ("filter", cfg.filter),
        ("runs", cfg.runs),
        ("seed", cfg.seed),
        ("t_start", _fmt(cfg.t_start)),
        ("t_end", _fmt(cfg.t_end)),
        ("dt", _fmt(cfg.dt)),
        ("budget", cfg.budget),
        ("init_weight", _fmt(cfg.init_weight)),
        ("resample", cfg.resample),
    ])
    section("targets", [
        (f"target_{i + 1}", _fmt_vector(t)) for i, t in enumerate(cfg.targets)
    ])
    section("motion", [("sigma_accel", _fmt(cfg.sigma_accel))])
    section("measurement", [
        ("sigma_range", _fmt(cfg.sigma_range)),
        ("sigma_azimuth_deg", _fmt(cfg.sigma_azimuth_deg)),
        ("sigma_elevation_deg", _fmt(cfg.sigma_elevation_deg)),
    ])
    section("birth", [
        ("mean", _fmt_vector(cfg.birth_mean)),
        ("sigma", _fmt_vector(cfg.birth_sigma)),
        ("count", cfg.birth_count),
        ("weight", _fmt(cfg.birth_weight)),
    ])
    section("clutter", [
        ("rate", _fmt(cfg.clutter_rate)),
        ("x_min", _fmt(cfg.x_min)),
        ("x_max", _fmt(cfg.x_max)),
        ("y_min", _fmt(cfg.y_min)),
        ("y_max", _fmt(cfg.y_max)),
        ("z_min", _fmt(cfg.z_min)),
        ("z_max", _fmt(cfg.z_max)),
        ("density", _fmt(cfg.density)),
        ("kappa_override", "" if cfg.kappa_override is None else _fmt(cfg.kappa_override)),
    ])
    section("detection", [
        ("p_detect", _fmt(cfg.p_detect)),
        ("p_survive", _fmt(cfg.p_survive)),
    ])
    section("gm", [
        ("prune_threshold", _fmt(cfg.prune_threshold)),
        ("merge_threshold", _fmt(cfg.merge_threshold)),
        ("max_components", cfg.max_components),
        ("extraction", cfg.extraction),
        ("extraction_threshold", _fmt(cfg.extraction_threshold)),
    ])
    section("ospa", [
        ("cutoff", _fmt(cfg.ospa_cutoff)),
        ("order", _fmt(cfg.ospa_order)),
    ])
    return "\n".join(lines)


_CASTS = {
    "scenario": {
        "filter": ("filter", str), "runs": ("runs", int), "seed": ("seed", int),
        "t_start": ("t_start", float), "t_end": ("t_end", float), "dt": ("dt", float),
        "budget": ("budget", int), "init_weight": ("init_weight", float),
        "resample": ("resample", str),
    },
    "motion": {"sigma_accel": ("sigma_accel", float)},
    "measurement": {
        "sigma_range": ("sigma_range", float),
        "sigma_azimuth_deg": ("sigma_azimuth_deg", float),
        "sigma_elevation_deg": ("sigma_elevation_deg", float),
    },
    "birth": {
        "mean": ("birth_mean", "vector"), "sigma": ("birth_sigma", "vector"),
        "count": ("birth_count", int), "weight": ("birth_weight", float),
    },
    "clutter": {
        "rate": ("clutter_rate", float),
        "x_min": ("x_min", float), "x_max": ("x_max", float),
        "y_min": ("y_min", float), "y_max": ("y_max", float),
        "z_min": ("z_min", float), "z_max": ("z_max", float),
        "density": ("density", float),
        "kappa_override": ("kappa_override", "optional-float"),
    },
    "detection": {"p_detect": ("p_detect", float), "p_survive": ("p_survive", float)},
    "gm": {
        "prune_threshold": ("prune_threshold", float),
        "merge_threshold": ("merge_threshold", float),
        "max_components": ("max_components", int),
        "extraction": ("extraction", str),
        "extraction_threshold": ("extraction_threshold", float),
    },
    "ospa": {"cutoff": ("ospa_cutoff", float), "order": ("ospa_order", float)},
}


def _parse_vector(text: str) -> list:
    return [float(part) for part in text.split(",")]


def parse_config_text(text: str) -> FileConfig:
    """Parse configuration text; unknown sections or keys are errors."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    cfg = FileConfig()
    for section in parser.sections():
        if section == "targets":
            targets = []
            keys = sorted(parser["targets"], key=lambda k: k.lower())
            for key in keys:
                if not key.startswith("target_"):
                    raise ConfigError(f"targets.{key}: expected keys named target_<i>")
                try:
                    targets.append(_parse_vector(parser["targets"][key]))
                except ValueError as exc:
                    raise ConfigError(f"targets.{key}: {exc}") from exc
            if targets:
                if len({len(t) for t in targets}) != 1:
                    raise ConfigError("targets: all targets need the same dimension")
                cfg.targets = targets
            continue
        if section not in _CASTS:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _CASTS[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            attr, cast = _CASTS[section][key]
            raw = parser[section][key]
            try:
                if cast == "vector":
                    value = _parse_vector(raw)
                elif cast == "optional-float":
                    value = None if raw.strip() == "" else float(raw)
                elif cast is str:
                    value = raw.strip()
                else:
                    value = cast(raw)
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}: {exc}") from exc
            setattr(cfg, attr, value)
    if cfg.filter not in FILTER_KINDS:
        raise ConfigError(f"scenario.filter: must be one of {'/'.join(FILTER_KINDS)}")
    return cfg


def load_file_config(path: str | None) -> FileConfig:
    if path is None:
        return FileConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc


def _records_csv(records: list, kind: str) -> str:
    lines = [RECORD_HEADER]
    for rec in records:
        for s in rec.steps:
            lines.append(",".join([
                str(rec.run), kind, str(s.k), str(s.n_true), str(s.n_hat),
                repr(s.ospa_total), repr(s.ospa_loc), repr(s.ospa_card),
                str(s.n_components), f"{s.wall_time * 1e3:.3f}",
            ]))
    return "\n".join(lines) + "\n"


def _states_csv(records: list, kind: str) -> str:
    lines = [STATE_HEADER]
    for rec in records:
        for s in rec.steps:
            for slot, x in enumerate(s.extracted):
                lines.append(",".join(
                    [str(rec.run), kind, str(s.k), str(slot)] + [repr(float(v)) for v in x]))
    return "\n".join(lines) + "\n"


def _summary_rows(summary: MonteCarloSummary) -> list:
    rows = []
    for i, k in enumerate(summary.ks):
        rows.append(",".join([
            summary.filter_kind, str(int(k)),
            repr(float(summary.mean_ospa[i])), repr(float(summary.mean_ospa_loc[i])),
            repr(float(summary.mean_ospa_card[i])), repr(float(summary.mean_n_hat[i])),
            repr(float(summary.mean_n_components[i])),
            f"{float(summary.mean_wall_time[i]) * 1e3:.3f}",
        ]))
    return rows


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_outputs(out_dir: str, results: dict, config: ScenarioConfig):
    os.makedirs(out_dir, exist_ok=True)
    summary_lines = [SUMMARY_HEADER]
    efficiency_lines = [EFFICIENCY_HEADER]
    failures = {}
    for kind, (summary, records) in results.items():
        _write(os.path.join(out_dir, f"records_{kind}.csv"), _records_csv(records, kind))
        _write(os.path.join(out_dir, f"states_{kind}.csv"), _states_csv(records, kind))
        summary_lines.extend(_summary_rows(summary))
        efficiency_lines.append(",".join([
            kind,
            repr(float(np.nanmean(summary.mean_n_components))),
            f"{summary.total_wall_time:.3f}",
        ]))
        failures[kind] = summary.failures
    _write(os.path.join(out_dir, "summary.csv"), "\n".join(summary_lines) + "\n")
    _write(os.path.join(out_dir, "efficiency.csv"), "\n".join(efficiency_lines) + "\n")
    meta = {
        "seed": config.seed,
        "runs": config.runs,
        "steps": config.n_steps,
        "filters": sorted(results),
        "failures": failures,
        "seeding": "run r uses seed seed+r; scans come from a dedicated stream per run, "
                   "so all filters see identical scans and comparisons are paired",
    }
    _write(os.path.join(out_dir, "meta.json"), json.dumps(meta, indent=2, sort_keys=True) + "\n")


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors, matching the config-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _env(name: str) -> str | None:
    return os.environ.get(ENV_PREFIX + name)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phdtrack", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_filter: bool):
        if with_filter:
            p.add_argument("--filter", choices=FILTER_KINDS, default=None,
                           help="which recursion to run")
        p.add_argument("--runs", type=int, default=None, help="Monte Carlo run count")
        p.add_argument("--seed", type=int, default=None, help="master seed; run r uses seed+r")
        p.add_argument("--config", default=None, help="configuration file path")
        p.add_argument("--out-dir", default=None, help="output directory (default: results)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes for runs (default: available cores)")

    common(sub.add_parser("run", help="run one filter and write record CSVs"), True)
    common(sub.add_parser("compare", help="run gm, smc, and engm on identical scans"), False)
    sub.add_parser("validate", help="run the built-in self-checks")
    emit = sub.add_parser("emit-config", help="write the default configuration file")
    emit.add_argument("path", nargs="?", default="scenario.ini")
    return parser


def _resolve(args) -> tuple[ScenarioConfig, str, int]:
    config_path = args.config or _env("CONFIG")
    file_cfg = load_file_config(config_path)
    scenario = file_cfg.to_scenario()
    filter_kind = getattr(args, "filter", None) or _env("FILTER")
    if filter_kind is not None:
        if filter_kind not in FILTER_KINDS:
            raise ConfigError(f"filter: must be one of {'/'.join(FILTER_KINDS)}")
        scenario = replace(scenario, filter_kind=filter_kind)
    for name, attr in (("RUNS", "runs"), ("SEED", "seed")):
        value = getattr(args, attr, None)
        if value is None and _env(name) is not None:
            try:
                value = int(_env(name))
            except ValueError as exc:
                raise ConfigError(f"{ENV_PREFIX}{name}: {exc}") from exc
        if value is not None:
            scenario = replace(scenario, **{attr: value})
    out_dir = args.out_dir or _env("OUT_DIR") or "results"
    threads = args.threads
    if threads is None and _env("THREADS") is not None:
        try:
            threads = int(_env("THREADS"))
        except ValueError as exc:
            raise ConfigError(f"{ENV_PREFIX}THREADS: {exc}") from exc
    if threads is None:
        threads = os.cpu_count() or 1
    if threads < 1:
        raise ConfigError("threads: must be >= 1")
    return scenario, out_dir, threads


def _cmd_run(args) -> int:
    scenario, out_dir, threads = _resolve(args)
    summary, records = run_monte_carlo(scenario, threads=threads)
    if summary.failures == summary.runs:
        print("all runs failed; see stderr", file=sys.stderr)
        for rec in records:
            print(f"run {rec.run} (seed {rec.seed}): {rec.error}", file=sys.stderr)
        return 2
    _write_outputs(out_dir, {scenario.filter_kind: (summary, records)}, scenario)
    window = summary.mean_ospa[summary.ks >= min(10, summary.ks[-1])]
    print(f"{scenario.filter_kind}: {summary.runs - summary.failures}/{summary.runs} runs ok, "
          f"mean position error {np.nanmean(window):.2f} over the settled window, "
          f"outputs in {out_dir}/")
    return 0


def _cmd_compare(args) -> int:
    scenario, out_dir, threads = _resolve(args)
    results = {}
    any_ok = False
    for kind in FILTER_KINDS:
        one = replace(scenario, filter_kind=kind)
        summary, records = run_monte_carlo(one, threads=threads)
        results[kind] = (summary, records)
        any_ok = any_ok or summary.failures < summary.runs
        print(f"{kind}: {summary.runs - summary.failures}/{summary.runs} runs ok, "
              f"{summary.total_wall_time:.1f}s")
    if not any_ok:
        print("all runs of every filter failed", file=sys.stderr)
        return 2
    _write_outputs(out_dir, results, scenario)
    print(f"outputs in {out_dir}/")
    return 0


def _cmd_emit_config(args) -> int:
    _write(args.path, emit_config_text(FileConfig()))
    print(f"wrote {args.path}")
    return 0


# ---------------------------------------------------------------------------
# validate: a fast, self-contained invariant and oracle sweep.

def _check_bandwidth():
    from .gaussmix import silverman_bandwidth
    value = silverman_bandwidth(6, 250)
    assert abs(value - 0.28854) <= 1e-4, value
    assert silverman_bandwidth(2, 1) == 1.0
    return f"silverman(6, 250) = {value:.5f}"


def _check_kde():
    from .gaussmix import kde_from_particles
    rng = np.random.default_rng(11)
    cloud = rng.standard_normal((40, 3))
    mix = kde_from_particles(cloud, 2.5)
    assert abs(mix.mass - 2.5) <= 1e-12 * 2.5
    assert all(np.array_equal(c, mix.covs[0]) for c in mix.covs)
    one_d = kde_from_particles(np.array([[0.0], [2.0]]), 1.0)
    assert abs(one_d.covs[0][0, 0] - 1.7006) <= 1e-3
    return "mass conserved, one shared covariance"


def _check_selection():
    from .gaussmix import GaussianMixture, cumulative_select, sample_mixture
    weights = np.array([0.5, 0.3, 0.2])
    picks = [cumulative_select(weights, u) for u in (0.2, 0.7, 1.0)]
    assert picks == [0, 1, 2], picks
    mix = GaussianMixture(weights, np.zeros((3, 2)), np.broadcast_to(np.eye(2), (3, 2, 2)).copy())
    a = sample_mixture(mix, 50, np.random.default_rng(3))
    b = sample_mixture(mix, 50, np.random.default_rng(3))
    assert np.array_equal(a, b)
    return "cumulative rule and seeded determinism hold"


def _check_density():
    from .gaussmix import eval_gaussian
    xs = np.linspace(-10.0, 10.0, 10001)
    vals = [eval_gaussian(np.array([x]), np.array([0.3]), np.array([[1.7]])) for x in xs]
    integral = np.trapezoid(vals, xs)
    assert abs(integral - 1.0) <= 1e-6, integral
    return f"1-D density integrates to {integral:.8f}"


def _check_integrator():
    from .models import propagate_state, transition_matrix
    rng = np.random.default_rng(5)
    x = rng.standard_normal((20, 6)) * 50
    direct = x @ transition_matrix(0.7).T
    assert np.abs(propagate_state(x, 0.7) - direct).max() <= 1e-10
    return "fixed-step integrator matches the closed form"


def _check_jacobian():
    from .models import RadarMeasurementModel
    meas = RadarMeasurementModel()
    rng = np.random.default_rng(7)
    states = rng.uniform(20.0, 200.0, size=(200, 6))
    jac = meas.jacobian(states)
    for d in range(3):
        h = 1e-6 * (1.0 + np.abs(states[:, d]))
        hi = states.copy(); hi[:, d] += h
        lo = states.copy(); lo[:, d] -= h
        fd = (meas.measure(hi) - meas.measure(lo)) / (2 * h[:, None])
        assert np.abs(fd - jac[:, :, d]).max() <= 1e-5
    return "analytic radar jacobian matches finite differences"


def _check_clutter():
    from .models import ClutterModel
    model = ClutterModel()
    volume = float(np.prod(model.region[:, 1] - model.region[:, 0]))
    assert abs(model.density * volume - 1.0) <= 1e-12
    assert abs(model.kappa - 6.25e-7) <= 1e-20
    return f"clutter intensity {model.kappa:.3e}"


def _check_assignment():
    from itertools import permutations
    from .metrics import assignment_min_cost
    rng = np.random.default_rng(13)
    for size in range(2, 6):
        for _ in range(20):
            cost = rng.random((size, size))
            _, total = assignment_min_cost(cost)
            brute = min(sum(cost[i, p[i]] for i in range(size))
                        for p in permutations(range(size)))
            assert abs(total - brute) <= 1e-12
    return "assignment equals brute force up to size 5"


def _check_ospa():
    from .metrics import OspaParams, ospa
    params = OspaParams(100.0, 2.0)
    total, loc, card = ospa(np.array([[0.0, 0.0, 0.0]]), np.array([[3.0, 4.0, 0.0]]), params)
    assert abs(total - 5.0) <= 1e-9 and abs(card) <= 1e-12
    total, _, _ = ospa(np.zeros((0, 3)), np.array([[1.0, 2.0, 3.0]]), params)
    assert abs(total - 100.0) <= 1e-9
    total, _, _ = ospa(np.array([[0.0, 0.0, 0.0]]),
                       np.array([[0.0, 0.0, 0.0], [500.0, 500.0, 500.0]]), params)
    assert abs(total - 100.0 / np.sqrt(2.0)) <= 1e-9
    assert ospa(np.zeros((0, 3)), np.zeros((0, 3)), params) == (0.0, 0.0, 0.0)
    return "cutoff and decomposition examples hold"


def _check_gm_ledger():
    from .gaussmix import GaussianMixture
    from .phd_gm import gm_predict, gm_update, prune_merge_cap
    from .scenario import ScenarioConfig, generate_scan, simulate_truth
    config = ScenarioConfig(filter_kind="gm", t_end=10.0)
    truth = simulate_truth(config)
    rng = np.random.default_rng(17)
    mix = GaussianMixture(np.array([config.init_weight]), np.zeros((1, 6)),
                          np.eye(6)[None, :, :])
    p_s = config.models.detection.p_survive
    birth_mass = config.models.birth.mass_per_step
    for k in range(1, 11):
        predicted = gm_predict(mix, config.models, rng)
        expect = p_s * mix.mass + birth_mass
        assert abs(predicted.mass - expect) <= 1e-12 * max(expect, 1.0)
        mix = prune_merge_cap(gm_update(predicted, generate_scan(truth[k], config.models, rng),
                                        config.models), config.gm)
    return "predicted mass = p_survive * mass + birth mass, 10 steps"


def _check_particle_ledgers():
    from .phd_smc import ParticleSet, smc_resample
    from .gaussmix import GaussianMixture, mixture_mass
    from .phd_engm import engm_resample
    rng = np.random.default_rng(19)
    cloud = ParticleSet(rng.standard_normal((120, 6)), rng.random(120))
    resampled = smc_resample(cloud, 250, rng)
    assert abs(resampled.mass - cloud.mass) <= 1e-12 * cloud.mass
    weights = rng.random(40)
    mix = GaussianMixture(weights, rng.standard_normal((40, 6)),
                          np.broadcast_to(np.eye(6), (40, 6, 6)).copy())
    state = engm_resample(mix, 250, rng)
    assert abs(state.particles.mass - mixture_mass(mix)) <= 1e-12 * mixture_mass(mix)
    assert state.particles.weights.max() == state.particles.weights.min()
    return "resampling conserves mass with uniform weights"


def _check_reduction():
    from .phd_engm import EngmPhdState, engm_predict, engm_resample, engm_update, engmf_step
    from .phd_smc import ParticleSet
    from .models import MeasurementScan, Models, ClutterModel, DetectionSurvival, BirthModel
    from .scenario import ScenarioConfig, simulate_truth, generate_scan
    models = Models(
        birth=BirthModel(count_per_step=0, weight_each=0.0),
        clutter=ClutterModel(rate=0.0, kappa_override=0.0),
        detection=DetectionSurvival(p_detect=1.0, p_survive=1.0),
    )
    config = ScenarioConfig(initial_targets=np.array([[50.0, 50.0, 50.0, 0.5, 0.5, 2.0]]),
                            models=models, t_end=10.0, seed=23)
    truth = simulate_truth(config)
    scan_rng = np.random.default_rng(29)
    scans = [generate_scan(truth[k], models, scan_rng) for k in range(1, 11)]
    j = 50
    init = np.array([50.0, 50.0, 50.0, 0.5, 0.5, 2.0]) + np.random.default_rng(31).standard_normal((j, 6))
    rng_a = np.random.default_rng(37)
    rng_b = np.random.default_rng(37)
    state = EngmPhdState(ParticleSet(init.copy(), np.full(j, 1.0 / j)), j)
    reference = init.copy()
    for scan in scans:
        prior = engm_predict(state, models, rng_a)
        state = engm_resample(engm_update(prior, scan, models), j, rng_a)
        reference = engmf_step(reference, scan, models, rng_b)
        err = np.abs(state.particles.states - reference).max()
        assert err <= 1e-9 * max(1.0, np.abs(reference).max()), err
    return "intensity recursion collapses to the single-target reference"


def _check_determinism():
    from .scenario import ScenarioConfig, run_filter
    config = ScenarioConfig(t_end=5.0, seed=7)
    a = run_filter(config)
    b = run_filter(config)
    same = all(np.array_equal(x.extracted, y.extracted) and x.n_hat == y.n_hat
               and x.ospa_total == y.ospa_total for x, y in zip(a, b))
    assert same
    return "identical seeds give identical runs"


_CHECKS = [
    ("bandwidth", _check_bandwidth),
    ("kde", _check_kde),
    ("selection", _check_selection),
    ("density", _check_density),
    ("integrator", _check_integrator),
    ("jacobian", _check_jacobian),
    ("clutter", _check_clutter),
    ("assignment", _check_assignment),
    ("ospa", _check_ospa),
    ("gm-ledger", _check_gm_ledger),
    ("particle-ledgers", _check_particle_ledgers),
    ("reduction", _check_reduction),
    ("determinism", _check_determinism),
]


def _cmd_validate(_args) -> int:
    failures = 0
    for name, check in _CHECKS:
        try:
            detail = check()
            print(f"ok   {name}: {detail}")
        except Exception as exc:  # report every failed check, then exit nonzero
            failures += 1
            print(f"FAIL {name}: {exc!r}")
    if failures:
        print(f"{failures} of {len(_CHECKS)} checks failed")
        return 2
    print(f"all {len(_CHECKS)} checks passed")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "emit-config":
            return _cmd_emit_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())

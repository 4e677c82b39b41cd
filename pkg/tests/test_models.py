"""Motion, measurement, birth, clutter, and detection models."""

import numpy as np
import pytest

from phdtrack.models import (
    BirthModel,
    ClutterModel,
    DetectionSurvival,
    LinearMeasurementModel,
    MeasurementScan,
    Models,
    MotionModel,
    RadarMeasurementModel,
    cv_derivative,
    dwna_process_noise,
    propagate_state,
    rk8_step,
    sample_births,
    sample_birth_states,
    sample_clutter,
    sample_psd_noise,
    transition_matrix,
    wrap_angle,
)


# ---------------------------------------------------------------------------
# integrator and motion


def test_propagate_matches_closed_form():
    x = np.array([10.0, -5.0, 2.0, 1.5, 0.25, -3.0])
    for dt in (0.1, 1.0, 2.5):
        expected = x.copy()
        expected[:3] += dt * x[3:]
        assert propagate_state(x, dt) == pytest.approx(expected, abs=1e-10)


def test_propagate_batched():
    rng = np.random.default_rng(0)
    xs = rng.standard_normal((30, 6)) * 50.0
    out = propagate_state(xs, 1.0)
    expected = xs.copy()
    expected[:, :3] += xs[:, 3:]
    assert out == pytest.approx(expected, abs=1e-9)


def test_rk8_exponential_decay():
    # dx/dt = -x has solution e^(-dt); a single high-order step should be
    # accurate to discretization error (dt^9) which is ~1e-9 at dt = 0.5
    out = rk8_step(lambda x: -x, np.array([1.0]), 0.5)
    assert out[0] == pytest.approx(np.exp(-0.5), abs=1e-10)


def test_rk8_order_of_convergence():
    # halving the step of an 8th-order method should shrink the local error
    # by roughly 2^9; accept anything far beyond 2nd order
    def deriv(x):
        return np.array([x[1], -x[0]])  # harmonic oscillator

    x0 = np.array([1.0, 0.0])

    def err(dt):
        out = rk8_step(deriv, x0, dt)
        return abs(out[0] - np.cos(dt)) + abs(out[1] + np.sin(dt))

    e1, e2 = err(1.0), err(0.5)
    assert e2 < e1 / 2 ** 6


def test_cv_derivative_layout():
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    d = cv_derivative(x)
    assert d == pytest.approx([4.0, 5.0, 6.0, 0.0, 0.0, 0.0])


def test_transition_matrix_agrees_with_integrator():
    f = transition_matrix(2.0)
    x = np.array([1.0, -2.0, 3.0, 0.5, 0.25, -1.0])
    assert f @ x == pytest.approx(propagate_state(x, 2.0), abs=1e-10)


def test_dwna_process_noise_structure():
    q = dwna_process_noise(1.0, 0.05)
    assert q.shape == (6, 6)
    assert q == pytest.approx(q.T)
    # rank 3: driven by 3 acceleration components
    assert np.linalg.matrix_rank(q, tol=1e-12) == 3
    assert q[0, 0] == pytest.approx(0.05 ** 2 / 4.0)
    assert q[3, 3] == pytest.approx(0.05 ** 2)
    assert q[0, 3] == pytest.approx(0.05 ** 2 / 2.0)
    assert np.all(dwna_process_noise(1.0, 0.0) == 0.0)


def test_sample_psd_noise_zero_cov_consumes_stream():
    # a zero covariance must consume as many draws as a nonzero one so
    # downstream call sequences stay aligned
    rng_a = np.random.default_rng(9)
    rng_b = np.random.default_rng(9)
    out = sample_psd_noise(np.zeros((6, 6)), 4, rng_a)
    assert np.all(out == 0.0)
    sample_psd_noise(np.eye(6), 4, rng_b)
    assert rng_a.random() == rng_b.random()


def test_sample_psd_noise_covariance():
    rng = np.random.default_rng(17)
    q = dwna_process_noise(1.0, 1.0)
    draws = sample_psd_noise(q, 40000, rng)
    assert draws.mean(axis=0) == pytest.approx(np.zeros(6), abs=0.05)
    assert np.cov(draws.T, ddof=1) == pytest.approx(q, abs=0.05)


def test_motion_model_validation():
    with pytest.raises(ValueError):
        MotionModel(dt=0.0)
    with pytest.raises(ValueError):
        MotionModel(process_noise=np.eye(3))


# ---------------------------------------------------------------------------
# angles and radar geometry


def test_wrap_angle_principal_interval():
    assert wrap_angle(np.pi + 0.1) == pytest.approx(-np.pi + 0.1)
    assert wrap_angle(-np.pi - 0.1) == pytest.approx(np.pi - 0.1)
    assert wrap_angle(0.3) == pytest.approx(0.3)
    assert wrap_angle(2 * np.pi) == pytest.approx(0.0, abs=1e-12)
    many = wrap_angle(np.linspace(-20.0, 20.0, 101))
    assert np.all(many > -np.pi - 1e-12)
    assert np.all(many <= np.pi + 1e-12)


def test_radar_measure_hand_values():
    meas = RadarMeasurementModel()
    z = meas.measure(np.array([3.0, 4.0, 0.0, 9.0, 9.0, 9.0]))
    assert z == pytest.approx([5.0, np.arctan2(4.0, 3.0), 0.0])
    z = meas.measure(np.array([0.0, 1.0, 1.0, 0.0, 0.0, 0.0]))
    assert z == pytest.approx([np.sqrt(2.0), np.pi / 2.0, np.pi / 4.0])
    with pytest.raises(ValueError):
        meas.measure(np.zeros(6))


def test_radar_defaults():
    meas = RadarMeasurementModel()
    assert meas.dim == 3
    assert meas.sigmas == pytest.approx([1.0, np.deg2rad(0.5), np.deg2rad(0.5)])
    assert meas.noise_cov == pytest.approx(np.diag(meas.sigmas ** 2))
    assert list(meas.angular) == [False, True, False]
    with pytest.raises(ValueError):
        RadarMeasurementModel(sigma_range=0.0)


def test_radar_jacobian_against_finite_differences():
    meas = RadarMeasurementModel()
    rng = np.random.default_rng(31)
    eps = 1e-6
    for _ in range(100):
        x = rng.uniform([20.0, 20.0, 20.0, -3, -3, -3], [200.0, 200.0, 400.0, 3, 3, 3])
        h = meas.jacobian(x)
        fd = np.zeros((3, 6))
        for j in range(3):  # velocity columns are identically zero
            bump = np.zeros(6)
            bump[j] = eps
            fd[:, j] = (meas.measure(x + bump) - meas.measure(x - bump)) / (2 * eps)
        assert h[:, :3] == pytest.approx(fd[:, :3], rel=1e-5, abs=1e-8)
        assert np.all(h[:, 3:] == 0.0)


def test_radar_jacobian_batched_and_singular():
    meas = RadarMeasurementModel()
    xs = np.array([[3.0, 4.0, 1.0, 0, 0, 0], [10.0, 0.0, 5.0, 0, 0, 0]])
    hs = meas.jacobian(xs)
    assert hs.shape == (2, 3, 6)
    assert hs[0] == pytest.approx(meas.jacobian(xs[0]))
    with pytest.raises(ValueError):
        meas.jacobian(np.array([0.0, 0.0, 5.0, 0, 0, 0]))
    ok = meas.linearizable(np.array([[0.0, 0.0, 5.0, 0, 0, 0], [1.0, 0.0, 0.0, 0, 0, 0]]))
    assert list(ok) == [False, True]


def test_linear_measurement_model():
    h = np.hstack([np.eye(3), np.zeros((3, 3))])
    model = LinearMeasurementModel(h, 0.25 * np.eye(3))
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    assert model.measure(x) == pytest.approx([1.0, 2.0, 3.0])
    assert model.jacobian(x) == pytest.approx(h)
    assert model.dim == 3
    assert not model.angular.any()
    assert model.sigmas == pytest.approx([0.5, 0.5, 0.5])
    assert model.linearizable(np.zeros((4, 6))).all()
    with pytest.raises(ValueError):
        LinearMeasurementModel(h, np.eye(2))


# ---------------------------------------------------------------------------
# birth, clutter, detection


def test_birth_model_mass():
    birth = BirthModel()
    assert birth.count_per_step == 10
    assert birth.weight_each == pytest.approx(0.01)
    assert birth.mass_per_step == pytest.approx(0.1)
    assert BirthModel(count_per_step=0).mass_per_step == 0.0
    with pytest.raises(ValueError):
        BirthModel(weight_each=-0.5)


def test_sample_birth_states_moments():
    birth = BirthModel()
    rng = np.random.default_rng(4)
    draws = np.concatenate([sample_birth_states(birth, rng) for _ in range(3000)])
    assert draws.shape == (30000, 6)
    assert draws.mean(axis=0) == pytest.approx(birth.mean, abs=1.5)
    std = draws.std(axis=0, ddof=1)
    assert std == pytest.approx(np.sqrt(np.diag(birth.cov)), rel=0.05)


def test_sample_births_both_kinds():
    birth = BirthModel()
    particles = sample_births(birth, np.random.default_rng(1), kind="particles")
    assert len(particles) == 10
    assert particles.mass == pytest.approx(0.1, rel=1e-12)
    mixture = sample_births(birth, np.random.default_rng(1), kind="gaussian-components")
    assert len(mixture) == 10
    assert mixture.mass == pytest.approx(0.1, rel=1e-12)
    assert mixture.covs[3] == pytest.approx(birth.cov)
    # same rng seed, same sampled means
    assert mixture.means == pytest.approx(particles.states)
    with pytest.raises(ValueError):
        sample_births(birth, np.random.default_rng(1), kind="bogus")


def test_clutter_model_kappa():
    clutter = ClutterModel()
    assert clutter.rate == 10.0
    assert clutter.kappa == pytest.approx(6.25e-7, rel=1e-12)
    assert ClutterModel(kappa_override=1e-3).kappa == 1e-3
    with pytest.raises(ValueError):
        ClutterModel(rate=-1.0)
    with pytest.raises(ValueError):
        # density must be the reciprocal of the box volume
        ClutterModel(density=1e-6)
    region = np.array([[0.0, 10.0], [0.0, 10.0], [0.0, 10.0]])
    assert ClutterModel(rate=5.0, region=region, density=1e-3).kappa == pytest.approx(5e-3)


def test_sample_clutter_geometry_and_rate():
    clutter = ClutterModel()
    meas = RadarMeasurementModel()
    rng = np.random.default_rng(8)
    counts = []
    for _ in range(300):
        scan = sample_clutter(clutter, rng, meas)
        counts.append(len(scan))
        if len(scan):
            # inside the box the range is bounded by the far corner
            assert np.all(scan[:, 0] <= np.linalg.norm([200.0, 200.0, 400.0]))
            assert np.all(scan[:, 0] > 0.0)
            # box x, y, z >= 0 puts azimuth in [0, pi/2] and elevation in [0, pi/2]
            assert np.all(scan[:, 1] >= 0.0)
            assert np.all(scan[:, 1] <= np.pi / 2 + 1e-12)
            assert np.all(scan[:, 2] >= 0.0)
    mean_count = np.mean(counts)
    # Poisson(10) over 300 trials: standard error ~ 0.18
    assert abs(mean_count - 10.0) < 1.0
    assert len(sample_clutter(ClutterModel(rate=0.0), rng, meas)) == 0


def test_detection_survival_defaults_and_validation():
    ds = DetectionSurvival()
    assert ds.p_detect == pytest.approx(0.98)
    assert ds.p_survive == pytest.approx(0.99)
    with pytest.raises(ValueError):
        DetectionSurvival(p_detect=1.5)
    with pytest.raises(ValueError):
        DetectionSurvival(p_survive=-0.1)


def test_scan_container():
    scan = MeasurementScan(np.zeros((4, 3)))
    assert len(scan) == 4
    assert len(MeasurementScan(np.zeros((0, 3)))) == 0


def test_models_bundle_defaults():
    models = Models()
    assert isinstance(models.measurement, RadarMeasurementModel)
    assert models.birth.mass_per_step == pytest.approx(0.1)
    assert models.clutter.kappa == pytest.approx(6.25e-7)
    assert models.spawn.total_weight == 0.0
    assert models.motion.dt == 1.0

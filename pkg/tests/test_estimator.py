import warnings

import numpy as np
import pytest

from ctsid.diagnostics import derivative_stack_columns
from ctsid.errors import ImproperTransferFunction, NearSingularNormalMatrix, SingularRegression
from ctsid.estimator import (
    EstimatorConfig,
    ModelOrder,
    build_instrument_srivc,
    build_instrument_srivc_c,
    build_regressor_srivc,
    build_regressor_srivc_c,
    filtered_output,
    initialize,
    iv_step,
    pack,
    param_names,
    srivc,
    srivc_c,
    unpack,
)
from ctsid.lti import Hold, TransferFunction, filter_samples, freq_response
from ctsid.polynomial import Polynomial, is_stable, sylvester
from ctsid.signals import (
    IrregularUniform,
    Multisine,
    NoiseModel,
    Regular,
    SampledSignal,
    generate_dataset,
    generate_grid,
    rng_stream,
    sample,
)

ORDER = ModelOrder(2, 0)
THETA_STAR = np.array([0.7, 0.25, 1.25])
A_STAR = Polynomial([1.0, 0.7, 0.25])
B_STAR = Polynomial([1.25])


def noiseless(true_system, ms, kind, N, seed=0):
    grid = generate_grid(kind, N, rng=np.random.default_rng(seed))
    _, y = generate_dataset(true_system, ms, grid, NoiseModel(0.0))
    return grid, y


def test_model_order_validation():
    with pytest.raises(ValueError):
        ModelOrder(1, 2)
    with pytest.raises(ValueError):
        ModelOrder(0, 0)
    assert ModelOrder(2, 1).n_params == 4


def test_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        EstimatorConfig(max_iter=0)
    assert EstimatorConfig(input_hold="zoh").input_hold is Hold.ZOH


def test_pack_unpack_round_trip():
    assert param_names(ORDER) == ["a1", "a2", "b0"]
    np.testing.assert_allclose(pack(A_STAR, B_STAR, ORDER), THETA_STAR)
    # normalisation to unit constant term
    np.testing.assert_allclose(pack(A_STAR * 4, B_STAR * 4, ORDER), THETA_STAR)
    A, B = unpack(THETA_STAR, ORDER)
    assert A == A_STAR and B == B_STAR
    with pytest.raises(ValueError):
        unpack([1.0, 2.0], ORDER)


def test_iv_step_identity_system():
    theta0 = np.array([0.3, -1.2, 2.5])
    I = np.eye(3)
    theta, cond = iv_step(I, I, theta0)
    np.testing.assert_allclose(theta, theta0)
    assert cond == pytest.approx(1.0)


def test_iv_step_near_singular():
    phi = np.ones((10, 2))
    with pytest.raises(NearSingularNormalMatrix):
        iv_step(phi, phi, np.ones(10))


def test_iv_step_shape_checks():
    with pytest.raises(ValueError):
        iv_step(np.ones((5, 2)), np.ones((5, 3)), np.ones(5))


def test_regressor_zero_signals():
    t = 0.1 * np.arange(50)
    z = SampledSignal(t, np.zeros_like(t))
    phi = build_regressor_srivc(Polynomial([1.0, 1.0]), z, z, EstimatorConfig(), ModelOrder(1, 0))
    assert phi.shape == (50, 2) and np.all(phi == 0)


def test_regressor_step_column_zoh():
    t = 0.1 * np.arange(60)
    u = SampledSignal(t, np.ones_like(t))
    y = SampledSignal(t, np.zeros_like(t))
    cfg = EstimatorConfig(input_hold=Hold.ZOH)
    phi = build_regressor_srivc(Polynomial([1.0, 1.0]), u, y, cfg, ModelOrder(1, 0))
    np.testing.assert_allclose(phi[:, 1], 1 - np.exp(-t), atol=1e-13)


def test_instrument_zero_input():
    t = 0.1 * np.arange(50)
    z = SampledSignal(t, np.zeros_like(t))
    phi_hat = build_instrument_srivc(A_STAR, B_STAR, z, EstimatorConfig(), ORDER)
    assert phi_hat.shape == (50, 3) and np.all(phi_hat == 0)
    assert np.all(build_instrument_srivc_c(A_STAR, B_STAR, Multisine(0.0), t, ORDER) == 0)


def test_instrument_matches_regressor_at_truth_up_to_transient(true_system, three_sines):
    # at the true model both y-columns are the filtered noiseless output; what is
    # left is the start-up transient plus an O(h^2) interpolation error
    late = []
    for h in (0.01, 0.005):
        grid = generate_grid(Regular(h), int(80 / h))
        _, y = generate_dataset(true_system, three_sines, grid, NoiseModel(0.0))
        u = sample(three_sines, grid.times)
        cfg = EstimatorConfig()
        phi = build_regressor_srivc(A_STAR, u, y, cfg, ORDER)
        phi_hat = build_instrument_srivc(A_STAR, B_STAR, u, cfg, ORDER)
        diff = np.abs(phi_hat - phi)
        assert diff[grid.times < 1].max() > 1e-1
        late.append(diff[grid.times > 40].max())
    assert late[0] < 5e-4
    assert 3.5 < late[0] / late[1] < 4.5


def test_exact_u_column_offset_only():
    ms = Multisine(2.5)
    t = np.linspace(0, 3, 10)
    y = SampledSignal(t, np.zeros_like(t))
    phi = build_regressor_srivc_c(A_STAR, ms, y, EstimatorConfig(), ORDER)
    np.testing.assert_allclose(phi[:, 2], 2.5)


def test_exact_u_column_matches_complex_oracle(three_sines):
    t = np.linspace(0, 40, 300)
    y = SampledSignal(t, np.zeros_like(t))
    col = build_regressor_srivc_c(A_STAR, three_sines, y, EstimatorConfig(), ORDER)[:, 2]
    H = 1.0 / (1 + 0.7 * 1j * three_sines.frequencies + 0.25 * (1j * three_sines.frequencies) ** 2)
    ref = np.zeros_like(t)
    for Hk, w in zip(H, three_sines.frequencies):
        ref += np.imag(Hk * np.exp(1j * w * t))
    np.testing.assert_allclose(col, ref, atol=1e-13)


def test_exact_columns_grid_agnostic(three_sines):
    t = np.cumsum(np.random.default_rng(4).uniform(0.05, 0.6, 100))
    a = build_instrument_srivc_c(A_STAR, B_STAR, three_sines, t, ORDER)
    b = build_instrument_srivc_c(A_STAR, B_STAR, three_sines, t[::-1], ORDER)[::-1]
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("n,m", [(2, 0), (2, 1), (3, 1), (3, 3)])
def test_instrument_sylvester_identity(n, m):
    rng = np.random.default_rng(10 * n + m)
    A = Polynomial(np.concatenate([[1.0], rng.uniform(0.3, 1.0, n)]))
    while not is_stable(A):
        A = Polynomial(np.concatenate([[1.0], rng.uniform(0.3, 1.0, n)]))
    B = Polynomial(rng.uniform(0.5, 1.5, m + 1))
    ms = Multisine(0.8, [1.0, 0.5, 0.7], [0.5, 1.3, 2.9], [0.1, 0.2, 0.3])
    t = np.linspace(0, 30, 200)
    order = ModelOrder(n, m)
    S = np.asarray(sylvester(-B, A, n, m))
    stack = derivative_stack_columns(A * A, ms, n + m + 1, t)
    np.testing.assert_allclose(build_instrument_srivc_c(A, B, ms, t, order), stack @ S.T, atol=1e-10)


def test_filtered_output_is_filter_samples(true_system):
    t = 0.3 * np.arange(100)
    y = SampledSignal(t, np.sin(t))
    ref = filter_samples(TransferFunction(Polynomial([1.0]), A_STAR), y).values
    np.testing.assert_allclose(filtered_output(A_STAR, y), ref, rtol=1e-12, atol=1e-15)


# --- fixed points --------------------------------------------------------------


@pytest.mark.parametrize("h", [0.06, 0.3, 0.6])
def test_srivc_c_truth_is_fixed_point(true_system, three_sines, h):
    grid, y = noiseless(true_system, three_sines, Regular(h), 800)
    res = srivc_c(three_sines, y, ORDER, THETA_STAR, EstimatorConfig(max_iter=1))
    np.testing.assert_allclose(res.theta, THETA_STAR, atol=1e-8)


@pytest.mark.parametrize("hold", [Hold.ZOH, Hold.FOH])
def test_srivc_truth_is_fixed_point_for_hold_data(true_system, three_sines, hold):
    # output produced by exactly filtering the hold-reconstructed input
    t = 0.3 * np.arange(800)
    u = sample(three_sines, t)
    y = filter_samples(true_system, u, hold)
    res = srivc(u, y, ORDER, THETA_STAR, EstimatorConfig(max_iter=1, input_hold=hold))
    np.testing.assert_allclose(res.theta, THETA_STAR, atol=1e-8)


def test_srivc_recovers_truth_from_zoh_data(true_system, three_sines):
    t = 0.2 * np.arange(1000)
    u = sample(three_sines, t)
    y = filter_samples(true_system, u, Hold.ZOH)
    cfg = EstimatorConfig(epsilon=1e-12, input_hold=Hold.ZOH)
    theta1 = initialize(u, y, ORDER, cutoff=three_sines.max_frequency, cfg=cfg)
    res = srivc(u, y, ORDER, theta1, cfg)
    assert res.converged
    np.testing.assert_allclose(res.theta, THETA_STAR, atol=1e-6)


def test_srivc_c_noiseless_recovery_irregular(true_system, three_sines):
    grid, y = noiseless(true_system, three_sines, IrregularUniform(0.05, 0.6), 600, seed=3)
    cfg = EstimatorConfig(epsilon=1e-12)
    theta1 = initialize(sample(three_sines, grid.times), y, ORDER, cutoff=three_sines.max_frequency)
    res = srivc_c(three_sines, y, ORDER, theta1, cfg)
    assert res.converged
    np.testing.assert_allclose(res.theta, THETA_STAR, atol=1e-6)


def test_srivc_is_biased_on_coarse_multisine_grid(true_system, three_sines):
    grid, y = noiseless(true_system, three_sines, Regular(0.6), 2000)
    u = sample(three_sines, grid.times)
    theta1 = initialize(u, y, ORDER, cutoff=three_sines.max_frequency)
    res = srivc(u, y, ORDER, theta1)
    # deterministic interpolation bias, below truth for a1 and above for b0
    assert res.theta[0] < 0.69 and res.theta[2] > 1.27


def test_max_iter_one_records_single_step(true_system, three_sines):
    grid, y = noiseless(true_system, three_sines, Regular(0.3), 300)
    res = srivc_c(three_sines, y, ORDER, [0.5, 0.2, 1.0], EstimatorConfig(max_iter=1))
    assert res.n_iterations == 1
    assert not res.converged


def test_history_models_are_stable(true_system, three_sines):
    grid = generate_grid(Regular(0.3), 500)
    _, y = generate_dataset(true_system, three_sines, grid, NoiseModel(0.1), rng=np.random.default_rng(0))
    # start from an unstable guess; it is reflected before the first step
    res = srivc_c(three_sines, y, ORDER, [-0.7, 0.25, 1.0])
    for rec in res.iterations:
        A, _ = unpack(rec.theta, ORDER)
        assert is_stable(A)
        assert rec.relative_step >= 0
    assert is_stable(res.final_model.den)
    report = res.report()
    assert report.startswith("converged = ")
    assert len(report.splitlines()) == 5 + res.n_iterations


def test_degenerate_initial_denominator():
    t = 0.1 * np.arange(100)
    y = SampledSignal(t, np.sin(t))
    with pytest.raises(ImproperTransferFunction):
        srivc_c(Multisine(1.0, [1.0], [1.0], [0.0]), y, ORDER, [0.7, 0.0, 1.0])


def test_offset_only_input_is_singular(true_system):
    ms = Multisine(1.0)
    grid = generate_grid(Regular(0.3), 500)
    _, y = generate_dataset(true_system, ms, grid, NoiseModel(0.0))
    with pytest.raises(NearSingularNormalMatrix):
        srivc_c(ms, y, ORDER, [0.5, 0.2, 1.0])


def test_time_shift_invariance(true_system, three_sines):
    grid = generate_grid(Regular(0.3), 1000)
    _, y = generate_dataset(true_system, three_sines, grid, NoiseModel(0.1), rng=np.random.default_rng(5))
    c = 17.3
    shifted_ms = three_sines.time_shifted(-c)
    y_shift = SampledSignal(y.times + c, y.values)
    cfg = EstimatorConfig(epsilon=1e-12)
    a = srivc_c(three_sines, y, ORDER, [0.6, 0.3, 1.1], cfg)
    b = srivc_c(shifted_ms, y_shift, ORDER, [0.6, 0.3, 1.1], cfg)
    np.testing.assert_allclose(a.theta, b.theta, atol=1e-8)


def test_noisy_runs_converge(true_system, three_sines):
    # 95% of seeded noisy runs must stop on the relative-step rule within 50 iterations
    converged = 0
    runs = 100
    for r in range(runs):
        rng = rng_stream(99, r)
        grid = generate_grid(Regular(0.3), 2000, rng=rng)
        _, y = generate_dataset(true_system, three_sines, grid, NoiseModel(0.1), rng=rng)
        theta1 = initialize(sample(three_sines, grid.times), y, ORDER, cutoff=three_sines.max_frequency)
        converged += srivc_c(three_sines, y, ORDER, theta1).converged
    assert converged >= 0.95 * runs


# --- initialisation ------------------------------------------------------------


def test_initialize_first_order():
    tf = TransferFunction(Polynomial([1.0]), Polynomial([1.0, 1.0]))
    ms = Multisine.from_sines([1.0, 1.0], [0.3, 1.7])
    grid = generate_grid(Regular(0.01), 5000)
    _, y = generate_dataset(tf, ms, grid, NoiseModel(0.0))
    theta = initialize(sample(ms, grid.times), y, ModelOrder(1, 0), cutoff=1.0)
    np.testing.assert_allclose(theta, [1.0, 1.0], rtol=0.05)


def test_initialize_zero_output(three_sines):
    t = 0.3 * np.arange(200)
    theta = initialize(sample(three_sines, t), SampledSignal(t, np.zeros_like(t)), ORDER)
    assert theta[2] == 0.0


def test_initialize_reference_setup_stable(true_system, three_sines):
    grid = generate_grid(Regular(0.3), 2000)
    _, y = generate_dataset(true_system, three_sines, grid, NoiseModel(0.1), rng=np.random.default_rng(1))
    theta = initialize(sample(three_sines, grid.times), y, ORDER)
    A, _ = unpack(theta, ORDER)
    assert is_stable(A)
    A_ms, _ = unpack(initialize(three_sines, y, ORDER), ORDER)
    assert is_stable(A_ms)


def test_initialize_needs_samples(three_sines):
    t = 0.3 * np.arange(10)
    with pytest.raises(ValueError):
        initialize(sample(three_sines, t), sample(three_sines, t), ORDER)


def test_initialize_singular_regression():
    t = 0.3 * np.arange(200)
    u = SampledSignal(t, np.ones_like(t))
    y = SampledSignal(t, np.ones_like(t))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(SingularRegression):
            initialize(u, y, ModelOrder(2, 1), cfg=EstimatorConfig(condition_limit=1e6))


def test_freq_response_of_final_model(true_system, three_sines):
    grid, y = noiseless(true_system, three_sines, Regular(0.2), 1000)
    res = srivc_c(three_sines, y, ORDER, [0.6, 0.3, 1.1], EstimatorConfig(epsilon=1e-12))
    w = np.array([0.1, 1.0, 3.0])
    np.testing.assert_allclose(freq_response(res.final_model, w), freq_response(true_system, w), rtol=1e-8)

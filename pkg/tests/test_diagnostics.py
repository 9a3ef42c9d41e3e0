import csv
import warnings

import numpy as np
import pytest

from ctsid.diagnostics import (
    DerivativeStack,
    EmpiricalMoment,
    analytic_average_power,
    derivative_stack_columns,
    empirical_average_power,
    empirical_psi,
    normal_matrix_condition_sweep,
    phi_star_matrix,
    phi_star_min_eig,
    write_condition_sweep,
    write_moment,
)
from ctsid.errors import AssumptionA3Violated, PoleOnGrid, ResonantGrid
from ctsid.estimator import ModelOrder
from ctsid.lti import TransferFunction, freq_response, unity
from ctsid.polynomial import Polynomial
from ctsid.signals import Multisine, NoiseModel, Regular, derivative, generate_grid, rng_stream

ORDER = ModelOrder(2, 0)
A_STAR = Polynomial([1.0, 0.7, 0.25])


def with_offset(ms, offset=1.0):
    return Multisine(offset, ms.amplitudes, ms.frequencies, ms.phases)


def test_derivative_stack_ordering(three_sines):
    stack = DerivativeStack(three_sines, 3)
    t = np.linspace(0, 5, 7)
    np.testing.assert_allclose(stack.entry(1)(t), derivative(three_sines, 2)(t))
    np.testing.assert_allclose(stack.entry(3)(t), three_sines(t))
    assert len(list(stack)) == 3
    with pytest.raises(IndexError):
        stack.entry(4)


def test_derivative_stack_columns_offset():
    ms = Multisine(2.0)
    cols = derivative_stack_columns(Polynomial([4.0, 1.0]), ms, 2, [0.0, 1.0])
    np.testing.assert_allclose(cols, [[0.0, 0.5], [0.0, 0.5]])


def test_derivative_stack_pole_on_grid():
    with pytest.raises(PoleOnGrid):
        derivative_stack_columns(Polynomial([1.0, 0.0, 1.0]), Multisine(0.0, [1.0], [1.0], [0.0]), 2, [0.0])


def test_z_scores():
    m = EmpiricalMoment(np.array([0.0, 1.0, -2.0]), 10, np.array([0.0, 0.5, 0.0]))
    np.testing.assert_array_equal(m.z_scores(), [0.0, 2.0, np.inf])


def test_psi_zero_noise(three_sines):
    grid = generate_grid(Regular(0.3), 1000)
    mom = empirical_psi(A_STAR, three_sines, NoiseModel(0.0), grid, ORDER)
    assert mom.value.shape == (3, 3)
    assert np.all(mom.value == 0)


def test_psi_zero_input():
    grid = generate_grid(Regular(0.3), 1000)
    mom = empirical_psi(A_STAR, Multisine(0.0), NoiseModel(0.1), grid, ORDER, rng=np.random.default_rng(0))
    assert np.all(mom.value == 0)


def test_psi_structure(three_sines):
    grid = generate_grid(Regular(0.3), 2000)
    mom = empirical_psi(A_STAR, three_sines, NoiseModel(0.1), grid, ModelOrder(2, 1), rng=np.random.default_rng(0))
    # noise enters only the first n slots of v_f
    assert mom.value.shape == (4, 4)
    assert np.all(mom.value[:, 2:] == 0)
    assert np.all(mom.stderr_estimate >= 0)


def test_psi_single_seed_within_four_stderr(three_sines):
    grid = generate_grid(Regular(0.3), 100_000)
    mom = empirical_psi(A_STAR, three_sines, NoiseModel(0.1), grid, ORDER, rng=rng_stream(0, 0))
    assert np.all(mom.z_scores()[:, :2] < 4)


def test_psi_shrinks_like_inverse_sqrt_n(three_sines):
    ratios = []
    for s in range(20):
        out = []
        for N in (10_000, 40_000):
            grid = generate_grid(Regular(0.3), N)
            mom = empirical_psi(A_STAR, three_sines, NoiseModel(0.1), grid, ORDER, rng=rng_stream(7, s, N))
            out.append(np.max(np.abs(mom.value)))
        ratios.append(out[1] / out[0])
    assert 0.3 <= np.mean(ratios) <= 0.8


def test_analytic_power_simple_cases(true_system, three_sines):
    assert analytic_average_power(unity(), Multisine(3.0)) == pytest.approx(9.0)
    assert analytic_average_power(unity(), Multisine(0.0, [2.0], [1.0], [0.3])) == pytest.approx(2.0)
    H = freq_response(true_system, three_sines.frequencies)
    assert analytic_average_power(true_system, three_sines) == pytest.approx(0.5 * np.sum(np.abs(H) ** 2), rel=1e-14)


def test_empirical_power_constant():
    grid = generate_grid(Regular(0.3), 100)
    mom = empirical_average_power(unity(), Multisine(1.7), grid)
    assert mom.value == pytest.approx(1.7**2, rel=1e-15)


def test_empirical_power_unity_filter(three_sines):
    grid = generate_grid(Regular(0.3), 100_000)
    exact = analytic_average_power(unity(), three_sines)
    assert abs(empirical_average_power(unity(), three_sines, grid).value - exact) < 0.01 * exact


def _cosine_sum_bound(ms: Multisine, h: float) -> float:
    # |(1/N) sum_k cos(f k h + c)| <= 1/(N |sin(f h / 2)|); expand the square
    a, w = ms.amplitudes, ms.frequencies
    total = abs(ms.offset) * 2 * np.sum(a / np.abs(np.sin(w * h / 2)))
    for j in range(w.size):
        for l in range(w.size):
            total += 0.5 * a[j] * a[l] / abs(np.sin((w[j] + w[l]) * h / 2))
            if j != l:
                total += 0.5 * a[j] * a[l] / abs(np.sin((w[j] - w[l]) * h / 2))
    return total


@pytest.mark.parametrize("N", [1000, 2000, 4000, 8000])
def test_empirical_power_error_is_order_one_over_n(three_sines, N):
    ms = with_offset(three_sines, 0.5)
    exact = analytic_average_power(unity(), ms)
    grid = generate_grid(Regular(0.3), N)
    err = abs(empirical_average_power(unity(), ms, grid).value - exact)
    assert err <= _cosine_sum_bound(ms, 0.3) / N


def test_resonant_grid_warning():
    ms = Multisine(0.0, [1.0], [np.pi], [0.0])
    with pytest.warns(ResonantGrid):
        empirical_average_power(unity(), ms, generate_grid(Regular(2.0), 100))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        empirical_average_power(unity(), ms, generate_grid(Regular(0.3), 100))


def test_phi_star_positive_definite(true_system, three_sines):
    assert phi_star_min_eig(true_system, with_offset(three_sines), ORDER) > 0


def test_phi_star_requires_rich_input(true_system, three_sines):
    with pytest.raises(AssumptionA3Violated):
        phi_star_matrix(true_system, three_sines, ORDER)


def test_phi_star_rank_deficient_without_excitation(true_system):
    ms = Multisine(0.0, [1.0], [1.0], [0.2])
    P = phi_star_matrix(true_system, ms, ModelOrder(2, 1), check_assumptions=False)
    assert phi_star_min_eig(true_system, ms, ModelOrder(2, 1), check_assumptions=False) < 1e-10 * np.trace(P)


def test_phi_star_scales_quadratically(true_system, three_sines):
    ms = with_offset(three_sines)
    base = phi_star_min_eig(true_system, ms, ORDER)
    assert phi_star_min_eig(true_system, ms.scaled(3.0), ORDER) == pytest.approx(9 * base, rel=1e-9)


def test_phi_star_quadratic_form_identity(true_system, three_sines):
    ms = with_offset(three_sines, 0.8)
    P = phi_star_matrix(true_system, ms, ORDER)
    A2 = A_STAR * A_STAR
    rng = np.random.default_rng(3)
    for _ in range(20):
        z = rng.normal(size=3)
        # stack entry i carries p^(size - i); B_z has ascending coefficients z[::-1]
        Bz = TransferFunction(Polynomial(z[::-1]), A2)
        assert z @ P @ z == pytest.approx(analytic_average_power(Bz, ms), rel=1e-8)


def test_phi_star_matches_long_time_average(true_system, three_sines):
    ms = with_offset(three_sines, 0.6)
    P = phi_star_matrix(true_system, ms, ORDER)
    t = np.cumsum(np.random.default_rng(0).uniform(0.05, 0.6, 200_000))
    cols = derivative_stack_columns(A_STAR * A_STAR, ms, 3, t)
    np.testing.assert_allclose(cols.T @ cols / t.size, P, atol=5e-3 * np.trace(P))


def test_condition_sweep_finite(true_system, three_sines):
    rows = normal_matrix_condition_sweep(true_system, three_sines, ORDER, [0.06, 0.2, 0.6], N=2000)
    assert [h for h, _ in rows] == [0.06, 0.2, 0.6]
    assert all(np.isfinite(c) and c < 1e10 for _, c in rows)


def test_condition_sweep_offset_only(true_system):
    rows = normal_matrix_condition_sweep(true_system, Multisine(1.0), ORDER, [0.3], N=500)
    assert rows[0][1] > 1e12


def test_condition_sweep_smooth_in_h(true_system, three_sines):
    hs = [0.6, 0.3, 0.15, 0.075]
    conds = [c for _, c in normal_matrix_condition_sweep(true_system, three_sines, ORDER, hs, N=2000)]
    for a, b in zip(conds, conds[1:]):
        assert 1 / 100 < b / a < 100


def test_csv_writers(tmp_path, three_sines):
    p = tmp_path / "sweep.csv"
    write_condition_sweep(p, [(0.1, 12.5), (0.2, 13.0)])
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["h", "condition"] and float(rows[2][1]) == 13.0
    grid = generate_grid(Regular(0.3), 500)
    mom = empirical_psi(A_STAR, three_sines, NoiseModel(0.1), grid, ORDER, rng=np.random.default_rng(0))
    q = tmp_path / "psi.csv"
    write_moment(q, mom)
    rows = list(csv.reader(q.open()))
    assert rows[0] == ["entry_i", "entry_j", "value", "stderr"]
    assert len(rows) == 10
    assert float(rows[1][2]) == mom.value[0, 0]

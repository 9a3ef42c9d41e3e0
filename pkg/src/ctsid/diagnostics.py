"""Numerical checks of the quantities behind the consistency of the exact-input estimator.

* :func:`empirical_psi` - sample cross-moment between the exactly filtered
  input derivative stack and hold-filtered noise; it should vanish.
* :func:`analytic_average_power` / :func:`empirical_average_power` - the
  closed-form time average of a squared filtered multisine and its sampled
  counterpart.
* :func:`phi_star_matrix` / :func:`phi_star_min_eig` - the input moment
  matrix assembled from cosine-product averages; positive definite when the
  input has enough sinusoids.
* :func:`normal_matrix_condition_sweep` - conditioning of the noiseless
  normal matrix at the true parameters across sampling periods.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import AssumptionA3Violated, PoleOnGrid, ResonantGrid
from .estimator import EstimatorConfig, ModelOrder, build_instrument_srivc_c, build_regressor_srivc_c
from .lti import Hold, TransferFunction, filter_bank, freq_response
from .polynomial import Polynomial, eval_at
from .signals import (
    Multisine,
    NoiseModel,
    Regular,
    SampledSignal,
    SamplingGrid,
    derivative,
    eval_filtered,
    filter_multisine,
    generate_dataset,
    generate_grid,
)

__all__ = [
    "DerivativeStack",
    "EmpiricalMoment",
    "derivative_stack_columns",
    "empirical_psi",
    "analytic_average_power",
    "empirical_average_power",
    "phi_star_matrix",
    "phi_star_min_eig",
    "normal_matrix_condition_sweep",
    "write_condition_sweep",
    "write_moment",
]


@dataclass(frozen=True)
class DerivativeStack:
    """``[d^(depth-1) u, ..., d u, u]``, highest derivative first."""

    base: Multisine
    depth: int

    def entry(self, i: int) -> Multisine:
        """1-based entry ``i``: derivative of order ``depth - i``."""
        if not 1 <= i <= self.depth:
            raise IndexError(i)
        return derivative(self.base, self.depth - i)

    def __iter__(self):
        return (self.entry(i) for i in range(1, self.depth + 1))


@dataclass(frozen=True)
class EmpiricalMoment:
    value: np.ndarray
    N: int
    stderr_estimate: np.ndarray

    def z_scores(self) -> np.ndarray:
        """``|value| / stderr``; entries with zero stderr and zero value give 0."""
        v = np.abs(np.asarray(self.value, dtype=float))
        se = np.asarray(self.stderr_estimate, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, v / se, np.where(v == 0, 0.0, np.inf))
        return z


def _batch_stats(samples: np.ndarray, n_batches: int):
    """Mean over axis 0 and a batch-means standard error."""
    N = samples.shape[0]
    mean = samples.mean(axis=0)
    n_batches = max(2, min(n_batches, N // 2))
    edges = np.linspace(0, N, n_batches + 1).astype(int)
    bm = np.array([samples[a:b].mean(axis=0) for a, b in zip(edges[:-1], edges[1:])])
    return mean, bm.std(axis=0, ddof=1) / np.sqrt(n_batches)


def derivative_stack_columns(den: Polynomial, ms: Multisine, depth: int, times) -> np.ndarray:
    """Exact ``[p^(depth-1) u / den, ..., u / den]`` sampled at ``times``."""
    s = 1j * ms.frequencies
    Dw = eval_at(den, s)
    if np.any(np.abs(Dw) < 1e-300):
        raise PoleOnGrid("filter pole at an excitation frequency")
    powers = np.arange(depth - 1, -1, -1)
    resp = np.array([s**k / Dw for k in powers]).reshape(depth, -1)
    dc = np.where(powers == 0, 1.0 / float(eval_at(den, 0.0)), 0.0)
    return eval_filtered(ms, resp, dc, times)


def empirical_psi(
    Aj,
    u_ct: Multisine,
    noise: NoiseModel,
    grid: SamplingGrid,
    order: ModelOrder,
    hold=Hold.FOH,
    rng: np.random.Generator | None = None,
    n_batches: int = 40,
) -> EmpiricalMoment:
    """Sample average of ``[u_du / A_j^2]_{t_k} v_f(t_k)^T``.

    ``v_f`` carries the noise filtered by ``p**i / A_j`` (``i = 1..n``) in its
    first ``n`` slots and zeros in the remaining ``m + 1``.
    """
    Aj = Polynomial(Aj) if not isinstance(Aj, Polynomial) else Aj
    t = grid.times
    size = order.n_params
    stack = derivative_stack_columns(Aj * Aj, u_ct, size, t)
    v = noise.sample(t.size, rng) if noise.variance > 0 else np.zeros(t.size)
    vf = np.zeros((t.size, size))
    vf[:, : order.n] = filter_bank(Aj, SampledSignal(t, v), hold)[:, 1 : order.n + 1]
    prod = stack[:, :, None] * vf[:, None, :]
    mean, se = _batch_stats(prod, n_batches)
    return EmpiricalMoment(mean, t.size, se)


def analytic_average_power(filter: TransferFunction, ms: Multisine) -> float:
    """Time-average of the squared steady-state filter output: ``(H(0) a0)^2 + sum a_l^2 |H(i w_l)|^2 / 2``."""
    y = filter_multisine(filter, ms)
    return float(y.offset**2 + 0.5 * np.sum(y.amplitudes**2))


def _check_resonance(ms: Multisine, h: float):
    w = ms.frequencies
    freqs = [w]
    if w.size:
        i, j = np.triu_indices(w.size)
        freqs.append(w[i] + w[j])
        i, j = np.triu_indices(w.size, k=1)
        freqs.append(np.abs(w[i] - w[j]))
    f = np.concatenate(freqs)
    if np.any(np.abs(np.sin(f * h / 2)) < 1e-6):
        warnings.warn("regular grid is resonant with the excitation; time averages are biased", ResonantGrid, stacklevel=3)


def empirical_average_power(filter: TransferFunction, ms: Multisine, grid: SamplingGrid, n_batches: int = 40) -> EmpiricalMoment:
    """Mean of the squared steady-state filter output over the grid instants."""
    if isinstance(grid.kind, Regular):
        _check_resonance(ms, grid.kind.h)
    x = filter_multisine(filter, ms).eval(grid.times)
    mean, se = _batch_stats(x[:, None] ** 2, n_batches)
    return EmpiricalMoment(float(mean[0]), grid.times.size, float(se[0]))


def _check_a3(ms: Multisine, order: ModelOrder):
    m_u = int(np.count_nonzero(ms.amplitudes > 0))
    if 2 * m_u < order.n + order.m or ms.offset == 0:
        raise AssumptionA3Violated(
            f"input has {m_u} sinusoids and offset {ms.offset}; need at least {(order.n + order.m) / 2} and a nonzero offset"
        )


def phi_star_matrix(system: TransferFunction, ms: Multisine, order: ModelOrder, check_assumptions: bool = True) -> np.ndarray:
    """Closed-form time-average moment matrix of the input derivative stack filtered by ``1/A*^2``."""
    if check_assumptions:
        _check_a3(ms, order)
    A = system.den / system.den.coeffs[0]
    A2 = A * A
    size = order.n_params
    powers = np.arange(size - 1, -1, -1)
    s = 1j * ms.frequencies
    inv_A2 = freq_response(TransferFunction(Polynomial([1.0]), A2), ms.frequencies)
    H = np.array([s**k * inv_A2 for k in powers]).reshape(size, -1)
    dc = np.where(powers == 0, 1.0 / float(eval_at(A2, 0.0)), 0.0) * ms.offset
    Hw = H * ms.amplitudes
    return np.outer(dc, dc) + 0.5 * (Hw @ Hw.conj().T).real


def phi_star_min_eig(system: TransferFunction, ms: Multisine, order: ModelOrder, check_assumptions: bool = True) -> float:
    """Smallest eigenvalue of :func:`phi_star_matrix`."""
    P = phi_star_matrix(system, ms, order, check_assumptions)
    return float(np.linalg.eigvalsh(0.5 * (P + P.T))[0])


def normal_matrix_condition_sweep(
    system: TransferFunction,
    ms: Multisine,
    order: ModelOrder,
    h_list,
    N: int = 2000,
    cfg: EstimatorConfig = EstimatorConfig(),
):
    """Condition number of ``(1/N) sum phi_hat phi^T`` at the true parameters, per sampling period."""
    A = system.den / system.den.coeffs[0]
    B = system.num / system.den.coeffs[0]
    out = []
    for h in h_list:
        grid = generate_grid(Regular(float(h)), N)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            _, y = generate_dataset(system, ms, grid, NoiseModel(0.0))
        phi = build_regressor_srivc_c(A, ms, y, cfg, order)
        phi_hat = build_instrument_srivc_c(A, B, ms, grid.times, order)
        M = phi_hat.T @ phi / N
        cond = float(np.linalg.cond(M)) if np.all(np.isfinite(M)) else np.inf
        out.append((float(h), cond))
    return out


def write_condition_sweep(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["h", "condition"])
        for h, c in rows:
            w.writerow([f"{h:.17g}", f"{c:.17g}"])


def write_moment(path, moment: EmpiricalMoment) -> None:
    value = np.atleast_2d(moment.value)
    se = np.atleast_2d(moment.stderr_estimate)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["entry_i", "entry_j", "value", "stderr"])
        for i in range(value.shape[0]):
            for j in range(value.shape[1]):
                w.writerow([i + 1, j + 1, f"{value[i, j]:.17g}", f"{se[i, j]:.17g}"])

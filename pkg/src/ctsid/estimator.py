"""Refined instrumental-variable estimators for continuous-time transfer functions.

Two estimators share one iteration loop:

* :func:`srivc` filters the sampled input and output through hold-based
  reconstructions of the adaptive prefilters ``p**i / A_j(p)``.
* :func:`srivc_c` uses exact knowledge of a multisine input: every
  input-side regressor and instrument entry is the steady-state response of
  the corresponding filter, evaluated at the sample instants. Only the output
  is still filtered through a hold reconstruction.

The parameter vector is ``theta = [a_1..a_n, b_0..b_m]`` for the model
``B(p)/A(p)`` with ``A(0) = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ImproperTransferFunction, NearSingularNormalMatrix, PoleOnGrid, SingularRegression
from .lti import Hold, TransferFunction, filter_bank
from .polynomial import Polynomial, eval_at, is_stable, reflect_unstable
from .signals import Multisine, SampledSignal, eval_filtered

__all__ = [
    "ModelOrder",
    "EstimatorConfig",
    "IterationRecord",
    "EstimationResult",
    "pack",
    "unpack",
    "initialize",
    "build_regressor_srivc",
    "build_instrument_srivc",
    "build_regressor_srivc_c",
    "build_instrument_srivc_c",
    "filtered_output",
    "iv_step",
    "srivc",
    "srivc_c",
]


@dataclass(frozen=True)
class ModelOrder:
    """Denominator degree ``n`` and numerator degree ``m``."""

    n: int
    m: int

    def __post_init__(self):
        if self.n < 1 or self.m < 0 or self.m > self.n:
            raise ValueError(f"need n >= m >= 0 and n >= 1, got n={self.n}, m={self.m}")

    @property
    def n_params(self) -> int:
        return self.n + self.m + 1


@dataclass(frozen=True)
class EstimatorConfig:
    epsilon: float = 1e-4
    max_iter: int = 50
    input_hold: Hold = Hold.FOH
    output_hold: Hold = Hold.FOH
    condition_limit: float = 1e12

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        object.__setattr__(self, "input_hold", Hold.parse(self.input_hold))
        object.__setattr__(self, "output_hold", Hold.parse(self.output_hold))


@dataclass(frozen=True)
class IterationRecord:
    index: int
    theta: np.ndarray
    relative_step: float
    reflected: bool
    condition_estimate: float


@dataclass
class EstimationResult:
    theta: np.ndarray
    converged: bool
    order: ModelOrder
    iterations: list[IterationRecord] = field(default_factory=list)

    @property
    def final_model(self) -> TransferFunction:
        A, B = unpack(self.theta, self.order)
        return TransferFunction(B, A)

    @property
    def n_iterations(self) -> int:
        return len(self.iterations)

    def report(self) -> str:
        """Plain-text summary: final theta, convergence flag and the iteration history."""
        names = param_names(self.order)
        lines = [
            f"converged = {str(self.converged).lower()}",
            f"iterations = {self.n_iterations}",
            "theta = " + ", ".join(f"{v:.17g}" for v in self.theta),
            "",
            "iteration," + ",".join(names) + ",relative_step,reflected,condition",
        ]
        for rec in self.iterations:
            vals = ",".join(f"{v:.17g}" for v in rec.theta)
            lines.append(f"{rec.index},{vals},{rec.relative_step:.6e},{int(rec.reflected)},{rec.condition_estimate:.6e}")
        return "\n".join(lines) + "\n"


def param_names(order: ModelOrder) -> list[str]:
    return [f"a{i}" for i in range(1, order.n + 1)] + [f"b{i}" for i in range(order.m + 1)]


def pack(A: Polynomial, B: Polynomial, order: ModelOrder) -> np.ndarray:
    """``theta`` from ``A`` (normalised to ``A(0) = 1``) and ``B``."""
    a = A.padded(order.n)
    if a[0] == 0:
        raise ValueError("A(0) must be nonzero")
    return np.concatenate([a[1:] / a[0], B.padded(order.m) / a[0]])


def unpack(theta, order: ModelOrder):
    """``(A, B)`` polynomials from ``theta``."""
    theta = np.asarray(theta, dtype=float)
    if theta.size != order.n_params:
        raise ValueError(f"theta has {theta.size} entries, expected {order.n_params}")
    return Polynomial(np.concatenate([[1.0], theta[: order.n]])), Polynomial(theta[order.n :])


def _as_sampled(u, times=None) -> SampledSignal:
    if isinstance(u, SampledSignal):
        return u
    if isinstance(u, Multisine):
        return SampledSignal(times, u.eval(times))
    raise TypeError("expected SampledSignal or Multisine")


def _check_lengths(u: SampledSignal, y: SampledSignal):
    if u.times.shape != y.times.shape or not np.allclose(u.times, y.times, rtol=0, atol=1e-12 * max(1.0, abs(y.times[-1]))):
        raise ValueError("input and output must share sampling instants")


# --- input-side columns -------------------------------------------------------


def _instrument_from_bank(bank2: np.ndarray, B: Polynomial, order: ModelOrder) -> np.ndarray:
    """Columns ``-p**i B / A**2`` (``i = 1..n``) from the ``1/A**2`` filter bank."""
    b = B.padded(order.m)
    cols = np.empty((bank2.shape[0], order.n))
    for i in range(1, order.n + 1):
        cols[:, i - 1] = -bank2[:, i : i + order.m + 1] @ b
    return cols


def _exact_columns(A: Polynomial, B: Polynomial | None, u_ct: Multisine, times, order: ModelOrder):
    """Exact steady-state u-columns and (optionally) instrument columns."""
    s = 1j * u_ct.frequencies
    Aw = eval_at(A, s)
    if np.any(np.abs(Aw) < 1e-300):
        raise PoleOnGrid("prefilter pole at an excitation frequency")
    A0 = float(eval_at(A, 0.0))
    resp = [s**i / Aw for i in range(order.m + 1)]
    dc = [1.0 / A0] + [0.0] * order.m
    if B is not None:
        Bw = eval_at(B, s)
        inst = [-(s**i) * Bw / Aw**2 for i in range(1, order.n + 1)]
        resp = inst + resp
        dc = [0.0] * order.n + dc
    return eval_filtered(u_ct, np.array(resp).reshape(len(resp), -1), np.array(dc), times)


# --- public builders -----------------------------------------------------------


def filtered_output(Aj: Polynomial, y: SampledSignal, cfg: EstimatorConfig = EstimatorConfig()) -> np.ndarray:
    """``y_f = y / A_j`` under the configured output hold."""
    return filter_bank(Aj, y, cfg.output_hold)[:, 0]


def _y_columns(bank_y: np.ndarray, n: int) -> np.ndarray:
    return -bank_y[:, 1 : n + 1]


def build_regressor_srivc(Aj, u: SampledSignal, y: SampledSignal, cfg: EstimatorConfig, order: ModelOrder) -> np.ndarray:
    """Rows ``[-p y/A_j .. -p^n y/A_j, u/A_j .. p^m u/A_j]`` by hold-based filtering."""
    _check_lengths(u, y)
    by = filter_bank(Aj, y, cfg.output_hold)
    bu = filter_bank(Aj, u, cfg.input_hold)
    return np.hstack([_y_columns(by, order.n), bu[:, : order.m + 1]])


def build_instrument_srivc(Aj, Bj, u: SampledSignal, cfg: EstimatorConfig, order: ModelOrder) -> np.ndarray:
    """Rows ``[-p B_j u/A_j^2 .. -p^n B_j u/A_j^2, u/A_j .. p^m u/A_j]``, input only."""
    bu = filter_bank(Aj, u, cfg.input_hold)
    bu2 = filter_bank(Aj * Aj, u, cfg.input_hold)
    return np.hstack([_instrument_from_bank(bu2, Bj, order), bu[:, : order.m + 1]])


def build_regressor_srivc_c(Aj, u_ct: Multisine, y: SampledSignal, cfg: EstimatorConfig, order: ModelOrder) -> np.ndarray:
    """Regressor with exact steady-state input columns; output columns hold-based."""
    by = filter_bank(Aj, y, cfg.output_hold)
    return np.hstack([_y_columns(by, order.n), _exact_columns(Aj, None, u_ct, y.times, order)])


def build_instrument_srivc_c(Aj, Bj, u_ct: Multisine, times, order: ModelOrder) -> np.ndarray:
    """Instrument whose every column is an exact steady-state evaluation."""
    return _exact_columns(Aj, Bj, u_ct, np.asarray(times, dtype=float), order)


def iv_step(phi_hat: np.ndarray, phi: np.ndarray, y_f: np.ndarray, condition_limit: float = 1e12):
    """Solve ``(sum phi_hat phi^T) theta = sum phi_hat y_f``.

    Returns ``(theta, condition)``. Raises :class:`NearSingularNormalMatrix`
    when the condition number of the normal matrix exceeds ``condition_limit``.
    """
    phi_hat = np.asarray(phi_hat, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if phi_hat.shape != phi.shape or phi.shape[0] != np.size(y_f):
        raise ValueError("regressor, instrument and output sizes do not conform")
    if phi.shape[0] < phi.shape[1]:
        raise ValueError("fewer samples than parameters")
    M = phi_hat.T @ phi
    r = phi_hat.T @ y_f
    cond = float(np.linalg.cond(M)) if np.all(np.isfinite(M)) else np.inf
    if not cond <= condition_limit:
        raise NearSingularNormalMatrix(f"normal matrix condition {cond:.3e} exceeds {condition_limit:.1e}")
    lu = scipy.linalg.lu_factor(M)
    return scipy.linalg.lu_solve(lu, r), cond


# --- iteration loop ------------------------------------------------------------


def _stabilise(theta, order: ModelOrder):
    A, B = unpack(theta, order)
    if order.n and not is_stable(A):
        A = reflect_unstable(A)
        return pack(A, B, order), True
    return np.asarray(theta, dtype=float), False


def _iterate(step, theta1, order: ModelOrder, cfg: EstimatorConfig) -> EstimationResult:
    theta, _ = _stabilise(theta1, order)
    A, _B = unpack(theta, order)
    if A.degree < order.n:
        raise ImproperTransferFunction("initial denominator has vanishing leading coefficient")
    result = EstimationResult(theta, False, order)
    for j in range(1, cfg.max_iter + 1):
        A, B = unpack(theta, order)
        phi_hat, phi, y_f = step(A, B)
        new, cond = iv_step(phi_hat, phi, y_f, cfg.condition_limit)
        new, reflected = _stabilise(new, order)
        rel = float(np.linalg.norm(new - theta) / np.linalg.norm(theta))
        result.iterations.append(IterationRecord(j, new, rel, reflected, cond))
        theta = new
        if rel < cfg.epsilon:
            result.converged = True
            break
    result.theta = theta
    return result


def srivc(u: SampledSignal, y: SampledSignal, order: ModelOrder, theta1, cfg: EstimatorConfig = EstimatorConfig()) -> EstimationResult:
    """Classical SRIVC with hold-based prefiltering of input and output samples."""
    _check_lengths(u, y)

    def step(A, B):
        by = filter_bank(A, y, cfg.output_hold)
        bu = filter_bank(A, u, cfg.input_hold)
        bu2 = filter_bank(A * A, u, cfg.input_hold)
        ucols = bu[:, : order.m + 1]
        phi = np.hstack([_y_columns(by, order.n), ucols])
        phi_hat = np.hstack([_instrument_from_bank(bu2, B, order), ucols])
        return phi_hat, phi, by[:, 0]

    return _iterate(step, theta1, order, cfg)


def srivc_c(u_ct: Multisine, y: SampledSignal, order: ModelOrder, theta1, cfg: EstimatorConfig = EstimatorConfig()) -> EstimationResult:
    """SRIVC with exact multisine evaluation of every input-side quantity."""

    def step(A, B):
        by = filter_bank(A, y, cfg.output_hold)
        exact = _exact_columns(A, B, u_ct, y.times, order)
        ucols = exact[:, order.n :]
        phi = np.hstack([_y_columns(by, order.n), ucols])
        return exact, phi, by[:, 0]

    return _iterate(step, theta1, order, cfg)


# --- initialisation ------------------------------------------------------------


def default_cutoff(u_data, y: SampledSignal) -> float:
    if isinstance(u_data, Multisine) and u_data.n_components:
        return u_data.max_frequency
    return float(np.pi / (10 * np.mean(np.diff(y.times))))


def initialize(
    u_data,
    y: SampledSignal,
    order: ModelOrder,
    cutoff: float | None = None,
    cfg: EstimatorConfig = EstimatorConfig(),
) -> np.ndarray:
    """State-variable-filter least squares starting point.

    Input and output pass through ``p**i / (1 + p/w_c)**n``; the linear
    equation-error problem is solved for ``theta`` and unstable roots of the
    resulting ``A`` are reflected. ``u_data`` may be a sampled signal (filtered
    with ``cfg.input_hold``) or a multisine (filtered exactly). Regressor
    columns that vanish identically carry no information; their parameters
    are set to zero.
    """
    n_min = 5 * order.n_params
    if len(y) < n_min:
        raise ValueError(f"need at least {n_min} samples, got {len(y)}")
    wc = default_cutoff(u_data, y) if cutoff is None else float(cutoff)
    L = Polynomial([1.0, 1.0 / wc]) ** order.n
    by = filter_bank(L, y, cfg.output_hold)
    if isinstance(u_data, Multisine):
        s = 1j * u_data.frequencies
        Lw = eval_at(L, s)
        resp = np.array([s**i / Lw for i in range(order.m + 1)]).reshape(order.m + 1, -1)
        dc = np.array([1.0] + [0.0] * order.m)
        ucols = eval_filtered(u_data, resp, dc, y.times)
    else:
        _check_lengths(u_data, y)
        ucols = filter_bank(L, u_data, cfg.input_hold)[:, : order.m + 1]
    phi = np.hstack([_y_columns(by, order.n), ucols])
    target = by[:, 0]
    live = np.any(phi != 0, axis=0)
    theta = np.zeros(order.n_params)
    if np.any(live):
        X = phi[:, live]
        cond = np.linalg.cond(X.T @ X)
        if not cond <= cfg.condition_limit:
            raise SingularRegression(f"initialisation normal matrix condition {cond:.3e}")
        theta[live] = np.linalg.lstsq(X, target, rcond=None)[0]
    A, B = unpack(theta, order)
    if A.degree >= 1 and not is_stable(A):
        theta = pack(reflect_unstable(A), B, order)
    return theta

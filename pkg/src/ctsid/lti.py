"""Continuous-time LTI filters applied to sampled data.

Sampled signals are reconstructed with a zero-order hold (piecewise constant)
or a first-order hold (piecewise linear between samples) and pushed through a
continuous-time filter exactly, using hold-equivalent discretisations
computed from augmented matrix exponentials. Irregular grids are handled by
discretising every interval separately.

All prefilters start from zero initial state at the first sample.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

import numba
import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, EmptySignal, ImproperTransferFunction, PoleOnGrid
from .polynomial import Polynomial, _as_poly, eval_at, is_stable

__all__ = [
    "Hold",
    "TransferFunction",
    "StateSpace",
    "DiscreteFilter",
    "freq_response",
    "to_state_space",
    "discretize",
    "filter_samples",
    "filter_samples_irregular",
    "filter_bank",
]

# relative gap spread below which a grid is treated as regular
REGULAR_GRID_RTOL = 1e-9


class Hold(str, enum.Enum):
    ZOH = "ZOH"
    FOH = "FOH"

    @classmethod
    def parse(cls, value) -> "Hold":
        return value if isinstance(value, cls) else cls(str(value).upper())


@dataclass(frozen=True)
class TransferFunction:
    """``num(p) / den(p)``; must be proper."""

    num: Polynomial
    den: Polynomial

    def __post_init__(self):
        num, den = _as_poly(self.num), _as_poly(self.den)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        if den.is_zero():
            raise ZeroDivisionError("denominator is the zero polynomial")
        if not num.is_zero() and num.degree > den.degree:
            raise ImproperTransferFunction(f"numerator degree {num.degree} > denominator degree {den.degree}")

    @classmethod
    def from_coeffs(cls, num, den) -> "TransferFunction":
        return cls(Polynomial(num), Polynomial(den))

    def __call__(self, s):
        return eval_at(self.num, s) / eval_at(self.den, s)

    def __mul__(self, other: "TransferFunction") -> "TransferFunction":
        return TransferFunction(self.num * other.num, self.den * other.den)

    @property
    def order(self) -> int:
        return self.den.degree

    def dc_gain(self) -> float:
        return float(freq_response(self, 0.0).real)

    def is_stable(self) -> bool:
        return self.den.degree == 0 or is_stable(self.den)


def unity() -> TransferFunction:
    return TransferFunction(Polynomial([1.0]), Polynomial([1.0]))


@dataclass(frozen=True)
class StateSpace:
    """``x' = A x + B u``, ``y = C x + D u``. ``C`` and ``D`` may carry several outputs."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = 0 if A.size == 0 else A.shape[0]
        A = A.reshape(n, n)
        B = np.asarray(self.B, dtype=float).reshape(n, 1)
        C = np.asarray(self.C, dtype=float).reshape(-1, n) if n else np.zeros((np.size(self.D), 0))
        D = np.asarray(self.D, dtype=float).reshape(-1, 1)
        if C.shape[0] != D.shape[0]:
            raise DimensionMismatch("C and D must have the same number of rows")
        for name, val in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, val)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    def freq_response(self, omega):
        """Frequency response ``C (iw - A)^-1 B + D`` for each output."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        n = self.n_states
        out = np.empty((self.C.shape[0], omega.size), dtype=complex)
        for k, w in enumerate(omega):
            if n:
                x = np.linalg.solve(1j * w * np.eye(n) - self.A, self.B)
                out[:, k] = (self.C @ x + self.D)[:, 0]
            else:
                out[:, k] = self.D[:, 0]
        return out


@dataclass(frozen=True)
class DiscreteFilter:
    """Hold-equivalent discretisation of a :class:`StateSpace`.

    State update ``x[k+1] = Ad x[k] + Bd0 u[k] + Bd1 u[k+1]`` and output
    ``y[k] = C x[k] + D u[k]``. ``Bd1`` vanishes for a zero-order hold.
    """

    Ad: np.ndarray
    Bd0: np.ndarray
    Bd1: np.ndarray
    C: np.ndarray
    D: np.ndarray
    hold: Hold
    h: float | None = None

    def run(self, u) -> np.ndarray:
        u = np.ascontiguousarray(u, dtype=float)
        X = _propagate(self.Ad[None], self.Bd0[None, :, 0], self.Bd1[None, :, 0], u)
        return X @ self.C.T + u[:, None] * self.D[:, 0]


def freq_response(tf: TransferFunction, omega):
    """``num(i w) / den(i w)`` for scalar or array ``omega`` (rad/s)."""
    s = 1j * np.asarray(omega, dtype=float)
    den = eval_at(tf.den, s)
    if np.any(np.abs(den) < 1e-300):
        raise PoleOnGrid("filter has a pole on the imaginary axis at an evaluated frequency")
    return eval_at(tf.num, s) / den


def to_state_space(tf: TransferFunction) -> StateSpace:
    """Controllable canonical realisation of a proper transfer function."""
    if not isinstance(tf, TransferFunction):
        raise TypeError("expected a TransferFunction")
    a = tf.den.coeffs / tf.den.leading
    n = a.size - 1
    b = tf.num.padded(max(n, tf.num.degree)) / tf.den.leading
    if b.size > n + 1:
        raise ImproperTransferFunction("numerator degree exceeds denominator degree")
    D = b[n]
    r = b[:n] - D * a[:n]
    A = np.zeros((n, n))
    if n:
        A[np.arange(n - 1), np.arange(1, n)] = 1.0
        A[-1, :] = -a[:n]
    B = np.zeros((n, 1))
    if n:
        B[-1, 0] = 1.0
    return StateSpace(A, B, r.reshape(1, n), np.array([[D]]))


def _bank_state_space(den: Polynomial) -> StateSpace:
    """Realisation of ``1/den`` whose outputs are ``p**k / den`` for ``k = 0..d``."""
    a = den.coeffs
    d = a.size - 1
    lead = a[-1]
    A = np.zeros((d, d))
    if d:
        A[np.arange(d - 1), np.arange(1, d)] = 1.0
        A[-1, :] = -a[:d] / lead
    B = np.zeros((d, 1))
    if d:
        B[-1, 0] = 1.0 / lead
    C = np.zeros((d + 1, d))
    C[np.arange(d), np.arange(d)] = 1.0
    C[d, :] = -a[:d] / lead
    D = np.zeros((d + 1, 1))
    D[d, 0] = 1.0 / lead
    return StateSpace(A, B, C, D)


def _hold_matrices(A: np.ndarray, B: np.ndarray, h, hold: Hold):
    """Exact ``(Ad, Bd0, Bd1)`` for one step length or an array of them."""
    hold = Hold.parse(hold)
    h = np.atleast_1d(np.asarray(h, dtype=float))
    key = (A.tobytes(), B.tobytes(), A.shape[0], hold, h.tobytes())
    hit = _HOLD_CACHE.get(key)
    if hit is not None:
        return hit
    out = _compute_hold_matrices(A, B, h, hold)
    if len(_HOLD_CACHE) >= _HOLD_CACHE_SIZE:
        _HOLD_CACHE.pop(next(iter(_HOLD_CACHE)))
    _HOLD_CACHE[key] = out
    return out


# per-process memo: the same prefilter is usually applied to input and output
_HOLD_CACHE: dict = {}
_HOLD_CACHE_SIZE = 8


def _compute_hold_matrices(A, B, h, hold):
    n = A.shape[0]
    size = n + 1 if hold is Hold.ZOH else n + 2
    M = np.zeros((h.size, size, size))
    M[:, :n, :n] = A[None] * h[:, None, None]
    M[:, :n, n] = B[:, 0][None] * h[:, None]
    if hold is Hold.FOH:
        M[:, n, n + 1] = 1.0
    E = scipy.linalg.expm(M) if h.size > 1 else scipy.linalg.expm(M[0])[None]
    Ad = E[:, :n, :n]
    if hold is Hold.ZOH:
        G0 = E[:, :n, n]
        G1 = np.zeros_like(G0)
    else:
        G1 = E[:, :n, n + 1]
        G0 = E[:, :n, n] - G1
    out = tuple(np.ascontiguousarray(x) for x in (Ad, G0, G1))
    for x in out:
        x.flags.writeable = False
    return out


def discretize(ss: StateSpace, h: float, hold=Hold.ZOH) -> DiscreteFilter:
    """Hold-equivalent discretisation with step ``h``."""
    if not h > 0:
        raise ValueError("sampling period must be positive")
    hold = Hold.parse(hold)
    Ad, G0, G1 = _hold_matrices(ss.A, ss.B, h, hold)
    n = ss.n_states
    return DiscreteFilter(Ad[0], G0[0].reshape(n, 1), G1[0].reshape(n, 1), ss.C, ss.D, hold, float(h))


@numba.njit(cache=True)
def _propagate(Phi, G0, G1, u):
    # Phi/G0/G1 hold either one step (time-invariant) or one entry per interval
    N = u.shape[0]
    d = Phi.shape[1]
    X = np.zeros((N, d))
    invariant = Phi.shape[0] == 1
    for k in range(N - 1):
        j = 0 if invariant else k
        for r in range(d):
            acc = G0[j, r] * u[k] + G1[j, r] * u[k + 1]
            for c in range(d):
                acc += Phi[j, r, c] * X[k, c]
            X[k + 1, r] = acc
    return X


def _check_signal(sig):
    t = np.asarray(sig.times, dtype=float)
    if t.size == 0:
        raise EmptySignal("signal has no samples")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("timestamps must be strictly increasing")
    return t, np.ascontiguousarray(sig.values, dtype=float)


def _gaps(t: np.ndarray):
    """Return ``(h, None)`` for a regular grid, ``(None, gaps)`` otherwise."""
    if t.size < 2:
        return 1.0, None
    g = np.diff(t)
    mean = g.mean()
    if np.max(np.abs(g - mean)) <= REGULAR_GRID_RTOL * mean:
        return float(mean), None
    return None, g


def _simulate(ss: StateSpace, t: np.ndarray, u: np.ndarray, hold, per_interval: bool) -> np.ndarray:
    hold = Hold.parse(hold)
    if ss.n_states == 0:
        return u[:, None] * ss.D[:, 0]
    h, gaps = _gaps(t)
    if per_interval and gaps is None and t.size > 1:
        gaps = np.diff(t)
    if gaps is None:
        Phi, G0, G1 = _hold_matrices(ss.A, ss.B, h, hold)
    else:
        Phi, G0, G1 = _hold_matrices(ss.A, ss.B, gaps, hold)
    X = _propagate(Phi, G0, G1, u)
    return X @ ss.C.T + u[:, None] * ss.D[:, 0]


def filter_samples(tf: TransferFunction, sig, hold=Hold.FOH):
    """Filter a sampled signal through ``tf`` under the given hold reconstruction.

    Returns a signal of the same type with the filter output at the sample
    instants. Irregular grids fall back to per-interval discretisation.
    """
    t, u = _check_signal(sig)
    y = _simulate(to_state_space(tf), t, u, hold, per_interval=False)[:, 0]
    return dataclasses.replace(sig, values=y)


def filter_samples_irregular(tf: TransferFunction, sig, hold=Hold.FOH):
    """Like :func:`filter_samples` but always discretises every interval separately."""
    t, u = _check_signal(sig)
    y = _simulate(to_state_space(tf), t, u, hold, per_interval=True)[:, 0]
    return dataclasses.replace(sig, values=y)


def filter_bank(den, sig, hold=Hold.FOH) -> np.ndarray:
    """Columns ``k = 0..deg(den)`` hold ``p**k / den`` applied to ``sig``.

    One simulation of ``1/den`` yields every derivative-weighted output, so
    any ``N(p)/den`` with ``deg N <= deg den`` is a linear combination of the
    columns with no further interpolation.
    """
    den = _as_poly(den)
    t, u = _check_signal(sig)
    return _simulate(_bank_state_space(den), t, u, hold, per_interval=False)

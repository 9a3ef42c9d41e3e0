"""Multisine inputs, sampling grids, measurement noise and synthetic datasets.

A multisine ``u(t) = a0 + sum_l a_l cos(w_l t + psi_l)`` stays a multisine
after any stable LTI filter in steady state, so filtered inputs can be
evaluated exactly at arbitrary (even irregular) instants.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidBounds, UnstableFilter
from .lti import Hold, TransferFunction, freq_response

__all__ = [
    "Multisine",
    "SampledSignal",
    "SamplingGrid",
    "Regular",
    "IrregularUniform",
    "NoiseModel",
    "rng_stream",
    "filter_multisine",
    "derivative",
    "generate_grid",
    "generate_dataset",
    "write_dataset",
    "read_dataset",
    "write_multisine",
    "read_multisine",
]

# |sin(w h / 2)| below this makes a regular grid blind to frequency w
RESONANCE_TOL = 1e-6


@dataclass(frozen=True)
class Multisine:
    """Offset plus a finite sum of cosines.

    ``amplitudes``, ``frequencies`` (rad/s) and ``phases`` (rad) are
    equal-length arrays. Frequencies must be positive and distinct; amplitudes
    must be non-negative (filtering may null a component, which is kept so its
    frequency survives later compositions).
    """

    offset: float = 0.0
    amplitudes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    frequencies: np.ndarray = field(default_factory=lambda: np.zeros(0))
    phases: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.amplitudes, dtype=float)).copy()
        w = np.atleast_1d(np.asarray(self.frequencies, dtype=float)).copy()
        ph = np.atleast_1d(np.asarray(self.phases, dtype=float)).copy()
        if not (a.shape == w.shape == ph.shape) or a.ndim != 1:
            raise ValueError("amplitudes, frequencies and phases must be equal-length vectors")
        if np.any(w <= 0):
            raise ValueError("frequencies must be positive")
        if np.unique(w).size != w.size:
            raise ValueError("frequencies must be distinct")
        if np.any(a < 0):
            raise ValueError("amplitudes must be non-negative")
        for arr in (a, w, ph):
            arr.flags.writeable = False
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "phases", ph)

    @classmethod
    def from_sines(cls, amplitudes, frequencies, offset: float = 0.0) -> "Multisine":
        """``offset + sum a_l sin(w_l t)``, stored as cosines with phase ``-pi/2``."""
        a = np.atleast_1d(np.asarray(amplitudes, dtype=float))
        return cls(offset, a, frequencies, np.full(a.shape, -np.pi / 2))

    @property
    def n_components(self) -> int:
        return self.frequencies.size

    @property
    def components(self):
        return list(zip(self.amplitudes.tolist(), self.frequencies.tolist(), self.phases.tolist()))

    @property
    def max_frequency(self) -> float:
        return float(self.frequencies.max()) if self.n_components else 0.0

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        arg = np.multiply.outer(t, self.frequencies) + self.phases
        out = self.offset + np.cos(arg) @ self.amplitudes
        return out[()] if np.ndim(out) == 0 else out

    __call__ = eval

    def phasors(self) -> np.ndarray:
        return self.amplitudes * np.exp(1j * self.phases)

    def scaled(self, c: float) -> "Multisine":
        c = float(c)
        ph = self.phases + (np.pi if c < 0 else 0.0)
        return Multisine(self.offset * c, self.amplitudes * abs(c), self.frequencies, ph)

    def time_shifted(self, c: float) -> "Multisine":
        """Signal ``t -> u(t + c)``."""
        return Multisine(self.offset, self.amplitudes, self.frequencies, self.phases + self.frequencies * c)

    def filter(self, tf: TransferFunction) -> "Multisine":
        return filter_multisine(tf, self)

    def derivative(self, order: int = 1) -> "Multisine":
        return derivative(self, order)


def filter_multisine(tf: TransferFunction, ms: Multisine) -> Multisine:
    """Steady-state response of a stable filter to a multisine."""
    if not tf.is_stable():
        raise UnstableFilter("steady-state response requires a stable filter")
    H = freq_response(tf, ms.frequencies)
    H0 = freq_response(tf, 0.0).real
    return Multisine(H0 * ms.offset, ms.amplitudes * np.abs(H), ms.frequencies, ms.phases + np.angle(H))


def derivative(ms: Multisine, order: int = 1) -> Multisine:
    """Exact ``order``-th time derivative."""
    if order < 0:
        raise ValueError("order must be non-negative")
    if order == 0:
        return ms
    return Multisine(
        0.0,
        ms.amplitudes * ms.frequencies**order,
        ms.frequencies,
        ms.phases + order * np.pi / 2,
    )


def eval_filtered(ms: Multisine, responses: np.ndarray, dc: np.ndarray, t) -> np.ndarray:
    """Evaluate several filtered copies of ``ms`` at once.

    ``responses`` has shape ``(k, n_components)`` with each filter's frequency
    response at the multisine frequencies, ``dc`` the ``k`` DC gains. Returns
    an array of shape ``(len(t), k)``.
    """
    t = np.asarray(t, dtype=float)
    E = np.exp(1j * (np.multiply.outer(t, ms.frequencies) + ms.phases))
    return (E @ (responses * ms.amplitudes).T).real + ms.offset * np.asarray(dc, dtype=float)


@dataclass(frozen=True)
class SampledSignal:
    """Samples ``values`` at strictly increasing ``times``."""

    times: np.ndarray
    values: np.ndarray
    hold_tag: Hold | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be equal-length vectors")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if self.hold_tag is not None:
            object.__setattr__(self, "hold_tag", Hold.parse(self.hold_tag))

    def __len__(self):
        return self.times.size


@dataclass(frozen=True)
class Regular:
    h: float


@dataclass(frozen=True)
class IrregularUniform:
    """Gaps drawn i.i.d. uniform on ``[h_lb, h_hb]``."""

    h_lb: float
    h_hb: float
    seed: int | None = None


@dataclass(frozen=True)
class SamplingGrid:
    times: np.ndarray
    kind: Regular | IrregularUniform

    def __len__(self):
        return self.times.size

    @property
    def mean_gap(self) -> float:
        return float(np.mean(np.diff(self.times)))


def rng_stream(seed, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``; streams never overlap."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))))


def generate_grid(kind, N: int, t1: float = 0.0, rng: np.random.Generator | None = None) -> SamplingGrid:
    """Sampling instants for ``N`` samples starting at ``t1``.

    For :class:`IrregularUniform` the gaps come from ``rng`` if given, else
    from a generator seeded with ``kind.seed``.
    """
    if N < 2:
        raise InvalidBounds("need at least two samples")
    if isinstance(kind, Regular):
        if not kind.h > 0:
            raise InvalidBounds("sampling period must be positive")
        return SamplingGrid(t1 + kind.h * np.arange(N), kind)
    if isinstance(kind, IrregularUniform):
        if not (0 < kind.h_lb <= kind.h_hb):
            raise InvalidBounds(f"need 0 < h_lb <= h_hb, got {kind.h_lb}, {kind.h_hb}")
        if rng is None:
            rng = np.random.default_rng(kind.seed)
        gaps = rng.uniform(kind.h_lb, kind.h_hb, N - 1) if kind.h_hb > kind.h_lb else np.full(N - 1, kind.h_lb)
        return SamplingGrid(t1 + np.concatenate([[0.0], np.cumsum(gaps)]), kind)
    raise TypeError(f"unknown grid kind {kind!r}")


@dataclass(frozen=True)
class NoiseModel:
    """White zero-mean Gaussian measurement noise."""

    variance: float
    seed: int | None = None

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be non-negative")

    def sample(self, N: int, rng: np.random.Generator | None = None) -> np.ndarray:
        if rng is None:
            rng = np.random.default_rng(self.seed)
        return rng.normal(0.0, math.sqrt(self.variance), N)


def _warn_resonance(ms: Multisine, grid: SamplingGrid):
    if not isinstance(grid.kind, Regular) or not ms.n_components:
        return
    s = np.abs(np.sin(ms.frequencies * grid.kind.h / 2))
    if np.any(s < RESONANCE_TOL):
        warnings.warn("sampling period is resonant with an excitation frequency", RuntimeWarning, stacklevel=3)


def generate_dataset(
    system: TransferFunction,
    input: Multisine,
    grid: SamplingGrid,
    noise: NoiseModel,
    rng: np.random.Generator | None = None,
):
    """Steady-state noisy output samples of ``system`` driven by ``input``.

    Returns ``(input, y)`` where ``y`` is a :class:`SampledSignal`. The
    noiseless part is evaluated analytically, so it carries no simulation
    error.
    """
    _warn_resonance(input, grid)
    x = filter_multisine(system, input).eval(grid.times)
    v = noise.sample(grid.times.size, rng) if noise.variance > 0 else np.zeros(grid.times.size)
    return input, SampledSignal(grid.times, x + v, Hold.FOH)


def sample(ms: Multisine, times, hold_tag=None) -> SampledSignal:
    return SampledSignal(np.asarray(times, dtype=float), ms.eval(times), hold_tag)


def write_dataset(path, u: SampledSignal, y: SampledSignal) -> None:
    """CSV with header ``t,u,y`` at full double precision."""
    if not np.array_equal(u.times, y.times):
        raise ValueError("input and output must share timestamps")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "u", "y"])
        for row in zip(u.times, u.values, y.values):
            w.writerow([f"{v:.17g}" for v in row])


def read_dataset(path):
    """Inverse of :func:`write_dataset`; returns ``(u, y)`` sampled signals."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header != ["t", "u", "y"]:
        raise ValueError(f"unexpected dataset header {header}")
    t = data[:, 0]
    return SampledSignal(t, data[:, 1]), SampledSignal(t, data[:, 2], Hold.FOH)


def write_multisine(path, ms: Multisine) -> None:
    lines = [f"offset,{ms.offset:.17g}", "amp,freq_rad_s,phase_rad"]
    lines += [f"{a:.17g},{w:.17g},{p:.17g}" for a, w, p in ms.components]
    Path(path).write_text("\n".join(lines) + "\n")


def read_multisine(path) -> Multisine:
    rows = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    key, value = rows[0].split(",")
    if key != "offset" or rows[1] != "amp,freq_rad_s,phase_rad":
        raise ValueError("malformed multisine definition")
    comps = np.array([[float(x) for x in r.split(",")] for r in rows[2:]]).reshape(-1, 3)
    return Multisine(float(value), comps[:, 0], comps[:, 1], comps[:, 2])

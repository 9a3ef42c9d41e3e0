"""Real polynomials in the differentiation operator ``p``.

Coefficients are stored in ascending order, ``coeffs[k]`` multiplying
``p**k``. This matches the parameterisation of the model denominator
``A(p) = 1 + a_1 p + ... + a_n p^n`` where the constant term is pinned to one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegreeZero, DimensionMismatch, IllConditioned, ZeroConstantTerm

__all__ = [
    "Polynomial",
    "SylvesterMatrix",
    "eval_at",
    "roots",
    "is_stable",
    "reflect_unstable",
    "sylvester",
    "from_roots",
]

# roots with real part in [-BOUNDARY_SHIFT, 0] are pushed to -BOUNDARY_SHIFT
BOUNDARY_SHIFT = 1e-9


class Polynomial:
    """Immutable real polynomial with ascending coefficients.

    Trailing zeros are trimmed on construction; the zero polynomial is ``[0]``.

    >>> A = Polynomial([1, 0.7, 0.25])
    >>> A.degree
    2
    >>> A(0)
    1.0
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float)).ravel()
        if c.size == 0:
            c = np.zeros(1)
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else np.zeros(1)
        c = c.copy()
        c.flags.writeable = False
        self._c = c

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def degree(self) -> int:
        return self._c.size - 1

    @property
    def leading(self) -> float:
        return float(self._c[-1])

    def is_zero(self) -> bool:
        return self._c.size == 1 and self._c[0] == 0.0

    def padded(self, degree: int) -> np.ndarray:
        """Coefficients zero-padded to ``degree + 1`` entries."""
        if degree < self.degree:
            raise DimensionMismatch(f"degree {self.degree} exceeds {degree}")
        out = np.zeros(degree + 1)
        out[: self._c.size] = self._c
        return out

    def __call__(self, s):
        return eval_at(self, s)

    def __add__(self, other):
        other = _as_poly(other)
        k = max(self._c.size, other._c.size)
        return Polynomial(np.pad(self._c, (0, k - self._c.size)) + np.pad(other._c, (0, k - other._c.size)))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self._c)

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        if np.isscalar(other):
            return Polynomial(self._c * float(other))
        return Polynomial(np.convolve(self._c, _as_poly(other)._c))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Polynomial(self._c / float(scalar))

    def __pow__(self, k: int):
        out = Polynomial([1.0])
        for _ in range(int(k)):
            out = out * self
        return out

    def shift(self, k: int) -> "Polynomial":
        """Multiply by ``p**k``."""
        return Polynomial(np.concatenate([np.zeros(k), self._c]))

    def derivative_powers(self):
        """Yield ``(k, coeff)`` pairs with nonzero coefficient."""
        for k, c in enumerate(self._c):
            if c != 0.0:
                yield k, float(c)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._c.shape == other._c.shape and bool(np.all(self._c == other._c))

    def __hash__(self):
        return hash(self._c.tobytes())

    def allclose(self, other, rtol=1e-10, atol=0.0) -> bool:
        other = _as_poly(other)
        k = max(self._c.size, other._c.size)
        return bool(np.allclose(self.padded(k - 1), other.padded(k - 1), rtol=rtol, atol=atol))

    def __repr__(self):
        return f"Polynomial({self._c.tolist()})"


def _as_poly(x) -> Polynomial:
    return x if isinstance(x, Polynomial) else Polynomial(x)


def eval_at(poly, s):
    """Evaluate ``poly`` at ``s`` (scalar or array) by Horner's scheme."""
    c = _as_poly(poly).coeffs
    s = np.asarray(s)
    out = np.full(s.shape, c[-1], dtype=np.result_type(s, float))
    for ck in c[-2::-1]:
        out = out * s + ck
    return out[()] if out.ndim == 0 else out


def roots(poly) -> np.ndarray:
    """All roots of ``poly`` from the eigenvalues of its (balanced) companion matrix.

    Complex roots are returned in exact conjugate pairs.
    """
    poly = _as_poly(poly)
    n = poly.degree
    if n < 1:
        raise DegreeZero("constant polynomial has no roots")
    c = poly.coeffs
    if abs(c[-1]) <= 1e-14 * np.max(np.abs(c)):
        raise IllConditioned("leading coefficient is negligible")
    comp = np.zeros((n, n))
    comp[0, :] = -c[-2::-1] / c[-1]
    comp[np.arange(1, n), np.arange(n - 1)] = 1.0
    try:
        r = scipy.linalg.eigvals(comp, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise IllConditioned(str(exc)) from exc
    return _pair_conjugates(r)


def _pair_conjugates(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=complex).copy()
    scale = max(1.0, float(np.max(np.abs(r))))
    used = np.zeros(r.size, dtype=bool)
    out = []
    order = np.argsort(-r.imag)
    for i in order:
        if used[i]:
            continue
        used[i] = True
        if abs(r[i].imag) <= 1e-13 * scale:
            out.append(complex(r[i].real, 0.0))
            continue
        cand = [j for j in range(r.size) if not used[j]]
        if not cand:
            out.append(complex(r[i].real, 0.0))
            continue
        j = min(cand, key=lambda j: abs(r[j] - np.conj(r[i])))
        used[j] = True
        z = 0.5 * (r[i] + np.conj(r[j]))
        out.extend([z, np.conj(z)])
    return np.array(out, dtype=complex)


def from_roots(rts, leading: float = 1.0) -> Polynomial:
    """Real polynomial ``leading * prod(p - r)``; imaginary round-off is dropped."""
    desc = np.poly(np.asarray(rts, dtype=complex)) if len(rts) else np.ones(1)
    return Polynomial(leading * np.real(desc[::-1]))


def is_stable(poly) -> bool:
    """True when every root has strictly negative real part."""
    return bool(np.all(roots(poly).real < 0.0))


def reflect_unstable(poly) -> Polynomial:
    """Mirror right-half-plane roots into the left half-plane.

    Roots on or within ``BOUNDARY_SHIFT`` of the imaginary axis are moved to
    real part ``-BOUNDARY_SHIFT``. The result is rescaled to unit constant term.
    """
    poly = _as_poly(poly)
    r = roots(poly)
    changed = False
    if np.any(r.real > 0):
        r = np.where(r.real > 0, -np.conj(r), r)
        changed = True
    edge = r.real >= -BOUNDARY_SHIFT
    if np.any(edge):
        r = np.where(edge, -BOUNDARY_SHIFT + 1j * r.imag, r)
        changed = True
    out = from_roots(r, poly.leading) if changed else poly
    c0 = out.coeffs[0]
    if abs(c0) < 1e-12:
        raise ZeroConstantTerm("cannot normalise polynomial with vanishing constant term")
    return out / c0


@dataclass(frozen=True)
class SylvesterMatrix:
    """Sylvester matrix ``S(-B, A)`` acting on a descending derivative stack.

    Column ``c`` multiplies ``p**(n+m-c)``. The first ``n`` rows hold
    ``p**i * (-B)`` for ``i = 1..n``; the last ``m + 1`` rows hold ``p**i * A``
    for ``i = 0..m``.
    """

    entries: np.ndarray
    n: int
    m: int

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.entries))

    @property
    def scale(self) -> float:
        """Hadamard bound on ``|det|`` (product of row norms)."""
        return float(np.prod(np.linalg.norm(self.entries, axis=1)))

    def is_singular(self, rtol: float = 1e-8) -> bool:
        return abs(self.determinant) < rtol * self.scale


def sylvester(negB, A, n: int, m: int) -> SylvesterMatrix:
    """Build ``S(negB, A)`` for nominal degrees ``deg A <= n``, ``deg negB <= m``."""
    negB, A = _as_poly(negB), _as_poly(A)
    if n < 0 or m < 0:
        raise DimensionMismatch("degrees must be non-negative")
    if A.degree > n or negB.degree > m:
        raise DimensionMismatch(f"deg A={A.degree} > {n} or deg B={negB.degree} > {m}")
    size = n + m + 1
    S = np.zeros((size, size))
    top = n + m
    for i in range(n):
        for k, c in negB.derivative_powers():
            S[i, top - (k + i + 1)] = c
    for i in range(m + 1):
        for k, c in A.derivative_powers():
            S[n + i, top - (k + i)] = c
    return SylvesterMatrix(S, n, m)

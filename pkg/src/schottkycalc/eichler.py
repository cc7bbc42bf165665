"""Polynomial cocycles under the weight-(1-N) group action.

A PolyForm is a polynomial of degree <= 2N-2 read as the coefficient of a
(1-N)-form; the group acts by (P|m)(z) = P(mz) m'(z)^{1-N}, which maps this
space to itself exactly. Cocycles assign a PolyForm to every group word so
that X[uv] = X[u]|v + X[v]; they are determined by their generator values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import moebius
from .moebius import MoebiusMap
from .schottky import SchottkyParams, generator

__all__ = [
    "Cocycle",
    "PolyForm",
    "PullbackResidualError",
    "canonical_cocycle",
    "coboundary",
    "cocycle_eval",
    "decompose_coboundary",
    "poly_pullback",
]


class PullbackResidualError(ArithmeticError):
    """Interpolated pullback failed its held-out node check."""


@dataclass(frozen=True)
class PolyForm:
    """Monomial coefficients (low to high, length 2N-1) of a (1-N)-form polynomial."""

    N: int
    coeffs: tuple[complex, ...]

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("weight parameter N must be >= 2")
        if len(self.coeffs) != 2 * self.N - 1:
            raise ValueError(
                f"need {2 * self.N - 1} coefficients for N = {self.N}, got {len(self.coeffs)}"
            )
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(z, np.asarray(self.coeffs))

    def __add__(self, other: "PolyForm") -> "PolyForm":
        self._check_compatible(other)
        return PolyForm(self.N, tuple(x + y for x, y in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "PolyForm") -> "PolyForm":
        self._check_compatible(other)
        return PolyForm(self.N, tuple(x - y for x, y in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> "PolyForm":
        return PolyForm(self.N, tuple(-x for x in self.coeffs))

    def __mul__(self, s: complex) -> "PolyForm":
        return PolyForm(self.N, tuple(x * s for x in self.coeffs))

    __rmul__ = __mul__

    def _check_compatible(self, other: "PolyForm"):
        if self.N != other.N:
            raise ValueError(f"mixed weights: N = {self.N} vs {other.N}")

    def norm(self) -> float:
        return max(abs(c) for c in self.coeffs)

    @staticmethod
    def zero(N: int) -> "PolyForm":
        return PolyForm(N, (0j,) * (2 * N - 1))

    def shifted_coeffs(self, w: complex) -> tuple[complex, ...]:
        """Coefficients s_k with P(z) = sum_k s_k (z - w)^k."""
        m = len(self.coeffs)
        out = []
        for k in range(m):
            s = 0j
            for j in range(k, m):
                s += self.coeffs[j] * math.comb(j, k) * w ** (j - k)
            out.append(s)
        return tuple(out)

    @staticmethod
    def from_shifted(N: int, w: complex, shifted: Sequence[complex]) -> "PolyForm":
        """Inverse of shifted_coeffs."""
        m = 2 * N - 1
        if len(shifted) != m:
            raise ValueError(f"need {m} shifted coefficients")
        coeffs = [0j] * m
        for k, s in enumerate(shifted):
            for j in range(k + 1):
                coeffs[j] += s * math.comb(k, j) * (-w) ** (k - j)
        return PolyForm(N, tuple(coeffs))


def _binom_coeffs(u: complex, v: complex, n: int) -> np.ndarray:
    """Monomial coefficients of (u z + v)^n, low to high."""
    return np.array(
        [math.comb(n, j) * u**j * v ** (n - j) for j in range(n + 1)],
        dtype=np.complex128,
    )


def poly_pullback(P: PolyForm, m: MoebiusMap) -> PolyForm:
    """Exact polynomial representing (P|m)(z) = P(mz) m'(z)^{1-N}.

    With determinant-one representatives m'(z)^{1-N} = (cz+d)^{2N-2}, so
    each monomial contributes c_k (az+b)^k (cz+d)^{2N-2-k}: a finite
    binomial convolution, uniform in N and free of interpolation error.
    """
    N = P.N
    n = 2 * N - 2
    total = np.zeros(n + 1, dtype=np.complex128)
    for k, ck in enumerate(P.coeffs):
        if ck == 0:
            continue
        part = np.convolve(_binom_coeffs(m.a, m.b, k), _binom_coeffs(m.c, m.d, n - k))
        total += ck * part
    return PolyForm(N, tuple(total))


@dataclass(frozen=True)
class Cocycle:
    """Group cocycle valued in PolyForms, stored by its generator values.

    values[a-1] is the cocycle on the positive letter a; negative letters and
    longer words follow from X[uv] = X[u]|v + X[v].
    """

    N: int
    values: tuple[PolyForm, ...]
    maps: tuple[MoebiusMap, ...]

    def __post_init__(self):
        if len(self.values) != len(self.maps):
            raise ValueError("one PolyForm per generator required")
        for v in self.values:
            if v.N != self.N:
                raise ValueError("mixed weights in cocycle values")

    @property
    def genus(self) -> int:
        return len(self.values)

    def on_letter(self, letter: int) -> PolyForm:
        a = abs(letter)
        if not 1 <= a <= self.genus:
            raise ValueError(f"letter {letter} out of range")
        if letter > 0:
            return self.values[a - 1]
        # X[g^-1] = -X[g]|g^-1
        return -poly_pullback(self.values[a - 1], moebius.inverse(self.maps[a - 1]))

    def letter_map(self, letter: int) -> MoebiusMap:
        m = self.maps[abs(letter) - 1]
        return m if letter > 0 else moebius.inverse(m)


def cocycle_eval(X: Cocycle, word: Sequence[int]) -> PolyForm:
    """Value of the cocycle on an arbitrary word."""
    cur = PolyForm.zero(X.N)
    for letter in word:
        cur = poly_pullback(cur, X.letter_map(letter)) + X.on_letter(letter)
    return cur


def canonical_cocycle(p: SchottkyParams, N: int, a: int, k: int) -> Cocycle:
    """The cocycle supported on generator a with value (z - w_a)^k.

    These g*(2N-1) cocycles (a = 1..g, k = 0..2N-2) form the standard basis
    of the cocycle space.
    """
    if not 1 <= a <= p.genus:
        raise ValueError(f"handle index {a} out of range")
    if not 0 <= k <= 2 * N - 2:
        raise ValueError(f"power {k} out of range for N = {N}")
    shifted = [0j] * (2 * N - 1)
    shifted[k] = 1.0 + 0j
    mono = PolyForm.from_shifted(N, p.handles[a - 1].w_plus, shifted)
    values = [PolyForm.zero(N) if b != a else mono for b in range(1, p.genus + 1)]
    maps = tuple(generator(p, b) for b in range(1, p.genus + 1))
    return Cocycle(N, tuple(values), maps)


def coboundary(p: SchottkyParams, P: PolyForm) -> Cocycle:
    """The cocycle X_P[g] = P|g - P attached to a single polynomial."""
    maps = tuple(generator(p, b) for b in range(1, p.genus + 1))
    values = tuple(poly_pullback(P, m) - P for m in maps)
    return Cocycle(P.N, values, maps)


def decompose_coboundary(p: SchottkyParams, P: PolyForm) -> np.ndarray:
    """Coefficients p[a-1, k] of X_P in the canonical cocycle basis.

    Row a-1 holds the expansion of P|g_a - P around w_a, so that
    X_P = sum_{a,k} p[a-1, k] * canonical_cocycle(p, N, a, k).
    """
    X = coboundary(p, P)
    out = np.zeros((p.genus, 2 * P.N - 1), dtype=np.complex128)
    for a in range(1, p.genus + 1):
        out[a - 1] = X.values[a - 1].shifted_coeffs(p.handles[a - 1].w_plus)
    return out

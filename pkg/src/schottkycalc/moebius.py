"""Moebius transformations on the Riemann sphere.

Determinant-one 2x2 complex matrices acting on C plus a point at infinity,
with derivatives, composition, fixed-point/multiplier extraction for
loxodromic maps, and the two-fixed-point "handle map" construction used to
generate Schottky groups.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Union

__all__ = [
    "INF",
    "Infinity",
    "MoebiusMap",
    "NotLoxodromicError",
    "PoleError",
    "apply",
    "compose",
    "deriv",
    "fixed_points",
    "handle_map",
    "identity",
    "inverse",
    "moebius",
]

_DET_TOL = 1e-9
_TINY = 1e-300
_TRACE_TOL = 1e-10


class Infinity:
    """Explicit tag for the point at infinity (kept out of complex arithmetic)."""

    _singleton = None

    def __new__(cls):
        if cls._singleton is None:
            cls._singleton = super().__new__(cls)
        return cls._singleton

    def __repr__(self):
        return "INF"


INF = Infinity()

Point = Union[complex, Infinity]


class PoleError(ValueError):
    """Evaluation requested exactly at (or too close to) a pole."""


class NotLoxodromicError(ValueError):
    """Map has no attracting/repelling fixed-point pair (elliptic, parabolic, or identity)."""


@dataclass(frozen=True)
class MoebiusMap:
    """Normalized representative (a b; c d) with a*d - b*c = 1."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        # determinant rounding grows with the entry scale, so test relatively
        scale = max(1.0, abs(self.a * self.d) + abs(self.b * self.c))
        if abs(det - 1.0) > _DET_TOL * scale:
            raise ValueError(f"matrix not normalized: det = {det!r}")

    def __call__(self, z: Point) -> Point:
        return apply(self, z)


def moebius(a: complex, b: complex, c: complex, d: complex) -> MoebiusMap:
    """Build a MoebiusMap from an invertible matrix, rescaling to determinant one.

    The scale factor is 1/sqrt(det) with the principal branch, so the
    normalized representative is deterministic (up to the unavoidable global
    sign choice, which does not affect the action).
    """
    det = a * d - b * c
    if det == 0:
        raise ValueError("matrix is singular")
    s = 1.0 / cmath.sqrt(det)
    return MoebiusMap(a * s, b * s, c * s, d * s)


def identity() -> MoebiusMap:
    return MoebiusMap(1.0 + 0j, 0j, 0j, 1.0 + 0j)


def apply(m: MoebiusMap, z: Point) -> Point:
    """Evaluate m at a point of the sphere; poles map to INF and INF to a/c."""
    if isinstance(z, Infinity):
        if abs(m.c) < _TINY:
            return INF
        return m.a / m.c
    den = m.c * z + m.d
    if abs(den) < _TINY:
        return INF
    return (m.a * z + m.b) / den


def deriv(m: MoebiusMap, z: complex) -> complex:
    """Derivative (cz+d)^(-2) of the normalized map at a finite point."""
    den = m.c * z + m.d
    if abs(den) < _TINY:
        raise PoleError(f"derivative requested at pole z = {z!r}")
    return 1.0 / (den * den)


def compose(m1: MoebiusMap, m2: MoebiusMap) -> MoebiusMap:
    """Composition m1 after m2 (matrix product), renormalized."""
    return moebius(
        m1.a * m2.a + m1.b * m2.c,
        m1.a * m2.b + m1.b * m2.d,
        m1.c * m2.a + m1.d * m2.c,
        m1.c * m2.b + m1.d * m2.d,
    )


def inverse(m: MoebiusMap) -> MoebiusMap:
    # adjugate of a det-1 matrix is its inverse
    return MoebiusMap(m.d, -m.b, -m.c, m.a)


def _is_identity(m: MoebiusMap, tol: float = 1e-14) -> bool:
    return (
        abs(m.b) < tol
        and abs(m.c) < tol
        and (abs(m.a - 1) < tol and abs(m.d - 1) < tol or abs(m.a + 1) < tol and abs(m.d + 1) < tol)
    )


def fixed_points(m: MoebiusMap) -> tuple[Point, Point, complex]:
    """Attracting/repelling fixed points and multiplier of a loxodromic map.

    Returns
    -------
    (z_attr, z_rep, q) : tuple
        Fixed points on the sphere and the multiplier q = m'(z_attr),
        with |q| < 1.

    Raises
    ------
    NotLoxodromicError
        If tr(m)^2 lies within 1e-10 of the real interval [0, 4] (identity,
        elliptic, or parabolic), where no attracting fixed point exists.
    """
    if _is_identity(m):
        raise NotLoxodromicError("identity map has no isolated fixed points")
    tr2 = (m.a + m.d) ** 2
    if abs(tr2.imag) < _TRACE_TOL and -_TRACE_TOL < tr2.real < 4.0 + _TRACE_TOL:
        raise NotLoxodromicError(f"map is elliptic or parabolic: tr^2 = {tr2!r}")

    if abs(m.c) < _TINY:
        # affine case: fixed point b/(d-a) and infinity
        z0 = m.b / (m.d - m.a)
        q0 = m.a / m.d  # derivative at z0
        if abs(q0) < 1.0:
            return z0, INF, q0
        return INF, z0, 1.0 / q0

    # roots of c z^2 + (d-a) z - b = 0, with the stable-branch quadratic
    p = m.d - m.a
    disc = cmath.sqrt(p * p + 4.0 * m.b * m.c)
    t1 = -p + disc
    t2 = -p - disc
    if abs(t1) >= abs(t2):
        z1 = t1 / (2.0 * m.c)
    else:
        z1 = t2 / (2.0 * m.c)
    # product of roots = -b/c
    if abs(z1) < _TINY:
        z2 = (-p - disc) / (2.0 * m.c) if abs(t1) >= abs(t2) else (-p + disc) / (2.0 * m.c)
    else:
        z2 = -m.b / (m.c * z1)

    q1 = deriv(m, z1)
    if abs(q1) < 1.0:
        return z1, z2, q1
    q2 = deriv(m, z2)
    if abs(q2) < 1.0:
        return z2, z1, q2
    raise NotLoxodromicError(f"no attracting fixed point: |multipliers| = {abs(q1)}, {abs(q2)}")


def handle_map(w_plus: complex, w_minus: complex, rho: complex) -> MoebiusMap:
    """Loxodromic map z -> w_minus + rho/(z - w_plus) as a normalized matrix.

    The unnormalized matrix is (w_minus, rho - w_plus*w_minus; 1, -w_plus)
    with determinant -rho; the principal branch of 1/sqrt(-rho) fixes the
    representative.
    """
    if rho == 0:
        raise ValueError("rho must be nonzero")
    s = 1.0 / cmath.sqrt(-rho)
    return MoebiusMap(
        w_minus * s,
        (rho - w_plus * w_minus) * s,
        s,
        -w_plus * s,
    )

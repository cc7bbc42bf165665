"""Weight-2 moduli variation machinery.

Tangent directions on the space of handle parameters, the variation vector
field built from a two-point kernel's jump coefficients, sl2 actions along
coboundary directions, beta-period matrices of the normalized handle
differentials, and the finite-difference verification of the variational
formula 2 pi i * grad Omega_ab(x) = nu_a(x) nu_b(x).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .contour import CircleContour, contour_nodes
from .eichler import PolyForm, decompose_coboundary
from .gem import SpanningTheta, gated_sum_precomputed
from .moebius import apply as mob_apply
from .poincare import NuFamily, SeriesConfig
from .schottky import (
    ClassicalHandle,
    HandleParams,
    SchottkyParams,
    disc_center,
    disc_radius,
    from_classical,
    generator,
    in_domain,
    require_valid,
    to_classical,
)

__all__ = [
    "DIRECTIONS_PER_HANDLE",
    "NormalizationError",
    "PathBlockedError",
    "PeriodMatrix",
    "PeriodSymmetryError",
    "ShiftedGEM",
    "beta_path",
    "direction_diff",
    "nabla_apply",
    "nabla_punctured_apply",
    "nu_normalization_error",
    "period_gradient",
    "period_matrix",
    "perturbed_params",
    "rauch_check",
    "sl2_apply",
    "theta2",
    "theta2_table",
    "word_image",
]

TWO_PI_I = 2j * np.pi

# per handle: d/dw_plus, rho * d/drho, rho * d/dw_minus
DIRECTIONS_PER_HANDLE = 3


class PathBlockedError(RuntimeError):
    """No clearance route found for a beta path."""


class PeriodSymmetryError(ArithmeticError):
    """Period matrix failed its symmetry certification."""


class NormalizationError(ArithmeticError):
    """Handle differentials failed the delta-normalization gate."""


# ---------------------------------------------------------------------------
# tangent directions


def perturbed_params(p: SchottkyParams, a: int, l: int, step: complex) -> SchottkyParams:
    """Shift one handle parameter along tangent direction (a, l).

    l = 0 moves w_plus by step; l = 1 scales rho by (1 + step); l = 2 moves
    w_minus by step * rho. Dividing differences by 2h then realizes the
    rho-weighted basis fields exactly.
    """
    hs = list(p.handles)
    h = hs[a - 1]
    if l == 0:
        hs[a - 1] = HandleParams(h.w_plus + step, h.w_minus, h.rho)
    elif l == 1:
        hs[a - 1] = HandleParams(h.w_plus, h.w_minus, h.rho * (1 + step))
    elif l == 2:
        hs[a - 1] = HandleParams(h.w_plus, h.w_minus + step * h.rho, h.rho)
    else:
        raise ValueError(f"direction index {l} not in (0, 1, 2)")
    out = SchottkyParams(handles=tuple(hs))
    require_valid(out)
    return out


def direction_diff(p: SchottkyParams, a: int, l: int, f: Callable, h: float):
    """Central difference of f along tangent direction (a, l), step h."""
    plus = f(perturbed_params(p, a, l, +h))
    minus = f(perturbed_params(p, a, l, -h))
    return (plus - minus) / (2.0 * h)


def word_image(p: SchottkyParams, word: Sequence[int], z: complex) -> complex:
    """The moduli-dependent orbit point: the word's map applied to z."""
    from .schottky import word_map

    return mob_apply(word_map(p, tuple(word)), z)


# ---------------------------------------------------------------------------
# the variation vector field


def theta2_table(psi, xs) -> np.ndarray:
    """Vector-field coefficients, shape (g, 3, len(xs)).

    Sign convention: psi(x, y) - psi(x, g_a y) (g_a'y)^{-1} as a polynomial
    in (y - w_a), i.e. the negated jump coefficients.
    """
    if psi.N != 2:
        raise ValueError(f"variation machinery needs a weight-2 kernel, got N={psi.N}")
    return -SpanningTheta(psi).table(xs)


def theta2(psi, a: int, l: int, x: complex) -> complex:
    return complex(theta2_table(psi, np.array([x]))[a - 1, l, 0])


def nabla_apply(psi, f: Callable, x: complex, h: float = 1e-5):
    """The variation field at x applied to a function of the surface.

    f maps SchottkyParams to a complex value (or ndarray); derivatives are
    central differences along each tangent direction, weighted by the
    kernel's coefficient table at x.
    """
    p = psi.params
    tab = theta2_table(psi, np.array([x]))[:, :, 0]  # (g, 3)
    total = None
    for a in range(1, p.genus + 1):
        for l in range(DIRECTIONS_PER_HANDLE):
            term = tab[a - 1, l] * direction_diff(p, a, l, f, h)
            total = term if total is None else total + term
    return total


def sl2_apply(
    p: SchottkyParams,
    P: PolyForm,
    f: Callable,
    h: float = 1e-5,
    form: str = "tangent",
):
    """Action of the sl2 field attached to a quadratic polynomial P.

    form="tangent" realizes -sum p_al d_{a,l} with p_al the coboundary
    coefficients of P; form="fixed_point" moves each handle fixed point at
    rate P(W) with the multiplier held. Both realize the conjugation flow
    of the vector field P(z) d/dz.
    """
    if P.N != 2:
        raise ValueError("sl2 fields are attached to weight-2 polynomials")
    if form == "tangent":
        coeffs = decompose_coboundary(p, P)  # (g, 3)
        total = None
        for a in range(1, p.genus + 1):
            for l in range(DIRECTIONS_PER_HANDLE):
                term = -coeffs[a - 1, l] * direction_diff(p, a, l, f, h)
                total = term if total is None else total + term
        return total
    if form == "fixed_point":
        classical = [to_classical(hp) for hp in p.handles]

        def rebuilt(idx: int, field: str, step: complex) -> SchottkyParams:
            hs = list(p.handles)
            c = classical[idx]
            moved = ClassicalHandle(
                W_plus=c.W_plus + (step if field == "W_plus" else 0),
                W_minus=c.W_minus + (step if field == "W_minus" else 0),
                q=c.q,
            )
            hs[idx] = from_classical(moved)
            out = SchottkyParams(handles=tuple(hs))
            require_valid(out)
            return out

        total = None
        for idx, c in enumerate(classical):
            for field in ("W_plus", "W_minus"):
                W = getattr(c, field)
                d = (f(rebuilt(idx, field, +h)) - f(rebuilt(idx, field, -h))) / (2.0 * h)
                term = P(W) * d
                total = term if total is None else total + term
        return total
    raise ValueError(f"unknown form {form!r}")


def nabla_punctured_apply(
    psi,
    punctures: Sequence[complex],
    f: Callable,
    x: complex,
    h: float = 1e-5,
):
    """Variation field extended by kernel-weighted puncture motion.

    f maps (SchottkyParams, punctures tuple) to a value. Adds to the surface
    variation the terms psi(x, y_k) * d/dy_k f.
    """
    p = psi.params
    ys = tuple(complex(y) for y in punctures)
    for i, y in enumerate(ys):
        if not in_domain(p, y):
            raise ValueError(f"puncture {y!r} is not in the fundamental domain")
        for z in ys[i + 1 :]:
            if abs(y - z) < 1e-12:
                raise ValueError("punctures must be distinct")

    total = nabla_apply(psi, lambda q: f(q, ys), x, h=h)
    for k, y in enumerate(ys):
        def moved(step: complex, k=k):
            shifted = ys[:k] + (ys[k] + step,) + ys[k + 1 :]
            return f(p, shifted)

        d = (moved(+h) - moved(-h)) / (2.0 * h)
        term = psi.value(x, y) * d
        total = term if total is None else total + term
    return total


# ---------------------------------------------------------------------------
# beta paths and the period matrix


def _segment_clearance(z0: complex, z1: complex, c: complex) -> float:
    d = z1 - z0
    denom = abs(d) ** 2
    if denom == 0.0:
        return abs(z0 - c)
    t = ((c - z0) * d.conjugate()).real / denom
    t = min(1.0, max(0.0, t))
    return abs(z0 + t * d - c)


def _leg_clear(
    p: SchottkyParams,
    za: complex,
    zb: complex,
    anchor_a: int | None,
    anchor_b: int | None,
    margin: float = 1.1,
    shrink: float = 0.05,
) -> bool:
    """Clearance test for one straight leg.

    A circle an endpoint is anchored on is tested against the leg shrunk
    away from that endpoint (radial departure is legal; passing through the
    disc is not), at unit margin. Every other disc must clear at `margin`
    times its radius.
    """
    d = zb - za
    for letter in p.letters:
        w = disc_center(p, letter)
        r = disc_radius(p, letter)
        if letter == anchor_a:
            if _segment_clearance(za + shrink * d, zb, w) < r:
                return False
        elif letter == anchor_b:
            if _segment_clearance(za, zb - shrink * d, w) < r:
                return False
        elif _segment_clearance(za, zb, w) < margin * r:
            return False
    return True


def _arc_clear(p: SchottkyParams, center: complex, radius: float, skip: int) -> bool:
    for letter in p.letters:
        if letter == skip:
            continue
        w = disc_center(p, letter)
        r = disc_radius(p, letter)
        if abs(w - center) - radius < 1.1 * r:
            return False
    return True


_ARC_SCALES = (1.6, 1.4, 1.9, 2.2)
_WAYPOINT_SCALES = (0.35, -0.35, 0.6, -0.6)


def beta_path(p: SchottkyParams, b: int) -> tuple[tuple, ...]:
    """Legs of the handle-b period path, each ("seg", za, zb) or
    ("arc", center, radius, th0, th1).

    The anchor z0 is the point of C_b facing the companion circle and the
    endpoint is its image z1 on C_{-b}. The straight chord is used when it
    clears every disc; since the image typically lands on the far side of
    the companion, the fallback detours around that disc on a circular arc
    (radial approach, arc, radial arrival), keeping the whole route away
    from every orbit-point cluster. The arc side is chosen deterministically
    (shorter way, clockwise on a tie), which also fixes the homotopy class
    and hence the integer lattice of the resulting periods.
    """
    w = disc_center(p, b)
    r = disc_radius(p, b)
    wm = disc_center(p, -b)
    rm = disc_radius(p, -b)
    z0 = w + r * (wm - w) / abs(wm - w)
    z1 = mob_apply(generator(p, b), z0)
    if not isinstance(z1, complex):
        raise PathBlockedError(f"anchor of handle {b} maps to infinity")
    if _leg_clear(p, z0, z1, anchor_a=b, anchor_b=-b):
        return (("seg", z0, z1),)

    th_a_dir = (z0 - wm) / abs(z0 - wm)
    th_b_dir = (z1 - wm) / abs(z1 - wm)
    th_a = float(np.angle(th_a_dir))
    th_b = float(np.angle(th_b_dir))
    # wrap into [-pi, pi): a diametrically opposite pair goes clockwise
    dth = (th_b - th_a + np.pi) % (2.0 * np.pi) - np.pi
    if dth >= np.pi - 1e-12:
        dth -= 2.0 * np.pi

    for kappa in _ARC_SCALES:
        R = kappa * rm
        A = wm + R * th_a_dir
        B = wm + R * th_b_dir
        if not _arc_clear(p, wm, R, skip=-b):
            continue
        arc = ("arc", wm, R, th_a, th_a + dth)
        tail = ("seg", B, z1)
        if not _leg_clear(p, B, z1, anchor_a=None, anchor_b=-b):
            continue
        if _leg_clear(p, z0, A, anchor_a=b, anchor_b=None):
            return (("seg", z0, A), arc, tail)
        # first leg blocked by a third disc: try one perpendicular waypoint
        d = A - z0
        mid = 0.5 * (z0 + A)
        nhat = 1j * d / abs(d)
        for s in _WAYPOINT_SCALES:
            W = mid + s * abs(d) * nhat
            if _leg_clear(p, z0, W, anchor_a=b, anchor_b=None) and _leg_clear(
                p, W, A, anchor_a=None, anchor_b=None
            ):
                return (("seg", z0, W), ("seg", W, A), arc, tail)
    raise PathBlockedError(f"no clear route for the handle-{b} period path")


@dataclass(frozen=True)
class PeriodMatrix:
    omega: np.ndarray
    symmetry_error: float
    normalization_error: float
    paths: tuple[tuple[complex, ...], ...]

    @property
    def genus(self) -> int:
        return self.omega.shape[0]


def _gl_rule(n: int):
    t, wts = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * wts


def _leg_nodes(leg: tuple, t: np.ndarray):
    """Quadrature nodes and the dz jacobian for one path leg at params t."""
    if leg[0] == "seg":
        _, za, zb = leg
        return za + t * (zb - za), np.full_like(t, zb - za, dtype=np.complex128)
    _, center, radius, th0, th1 = leg
    theta = th0 + t * (th1 - th0)
    z = center + radius * np.exp(1j * theta)
    return z, 1j * radius * (th1 - th0) * np.exp(1j * theta)


def _path_integral(nu: NuFamily, legs: tuple[tuple, ...], n_leg: int, gate: float):
    """Integral of every nu_a along the legs, with a node-doubling gate."""
    g = nu.params.genus
    t1, w1 = _gl_rule(n_leg)
    t2, w2 = _gl_rule(2 * n_leg)
    total1 = np.zeros(g, dtype=np.complex128)
    total2 = np.zeros(g, dtype=np.complex128)
    for leg in legs:
        z_1, dz_1 = _leg_nodes(leg, t1)
        z_2, dz_2 = _leg_nodes(leg, t2)
        vals = nu.values(np.concatenate([z_1, z_2]))  # (g, 3*n_leg)
        total1 += (vals[:, :n_leg] * (w1 * dz_1)).sum(axis=1)
        total2 += (vals[:, n_leg:] * (w2 * dz_2)).sum(axis=1)
    err = float(np.max(np.abs(total1 - total2) / np.maximum(1.0, np.abs(total2))))
    if err > gate:
        from .contour import QuadratureError

        raise QuadratureError(
            f"period quadrature unstable under node doubling (moved {err:.3e})"
        )
    return total2


def nu_normalization_error(p: SchottkyParams, nu: NuFamily, n_nodes: int = 256) -> float:
    worst = 0.0
    for a in range(1, p.genus + 1):
        c = CircleContour(disc_center(p, a), disc_radius(p, a), n_nodes=n_nodes)
        z, dz = contour_nodes(c, doubled=True)
        vals = nu.values(z)  # (g, 2n)
        for b in range(p.genus):
            mom = gated_sum_precomputed(vals[b] * dz, 1e-8) / TWO_PI_I
            target = 1.0 if b == a - 1 else 0.0
            worst = max(worst, abs(mom - target))
    return worst


def period_matrix(
    p: SchottkyParams,
    config: SeriesConfig = SeriesConfig(),
    n_leg: int = 64,
    gate: float = 1e-8,
    symmetry_tol: float = 1e-7,
    certify: bool = True,
    y0: complex = 0j,
    nu: NuFamily | None = None,
) -> PeriodMatrix:
    """Omega_ab = (1/2 pi i) * integral of nu_a along the handle-b path.

    With certify=True the differentials must pass the delta-normalization
    gate at 1e-8 and the matrix must be symmetric to symmetry_tol.
    """
    require_valid(p)
    if nu is None:
        nu = NuFamily(p, config=config, y0=y0)
    norm_err = nu_normalization_error(p, nu) if certify else float("nan")
    if certify and norm_err > 1e-8:
        raise NormalizationError(
            f"handle differentials fail delta normalization by {norm_err:.3e}"
        )
    g = p.genus
    omega = np.empty((g, g), dtype=np.complex128)
    paths = []
    for b in range(1, g + 1):
        legs = beta_path(p, b)
        paths.append(legs)
        # legs run anchor -> image; the period traverses them image -> anchor
        omega[:, b - 1] = -_path_integral(nu, legs, n_leg, gate) / TWO_PI_I
    sym_err = float(np.max(np.abs(omega - omega.T)))
    if certify and sym_err > symmetry_tol:
        raise PeriodSymmetryError(f"period matrix asymmetric by {sym_err:.3e}")
    return PeriodMatrix(
        omega=omega,
        symmetry_error=sym_err,
        normalization_error=norm_err,
        paths=tuple(paths),
    )


# ---------------------------------------------------------------------------
# Rauch verification


class ShiftedGEM:
    """A kernel shifted by a separable differential-times-polynomial term.

    Realizes alternative kernel choices psi - phi(x) P(y); the induced
    variation field differs by an sl2/coboundary direction only, so
    Moebius-invariant functions of the surface feel no difference.
    """

    def __init__(self, base, phi: Callable[[np.ndarray], np.ndarray], poly: PolyForm):
        self.base = base
        self.phi = phi
        self.poly = poly
        self.params = base.params
        self.N = base.N

    def value(self, x: complex, y: complex) -> complex:
        return complex(self.value_grid(np.array([x]), np.array([y]))[0, 0])

    def value_grid(self, xs, ys) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.complex128)
        ys = np.asarray(ys, dtype=np.complex128)
        raw = self.base.value_grid(xs, ys)
        pv = np.array([self.poly(y) for y in ys])
        return raw - np.outer(pv, self.phi(xs))


def period_gradient(
    p: SchottkyParams,
    h: float = 1e-5,
    config: SeriesConfig = SeriesConfig(),
    n_leg: int = 64,
) -> dict:
    """Central-difference derivative of the period matrix per coordinate.

    Returns {(a, l): dOmega/d(a,l)} over every handle a and its three
    real-coordinate directions. Expensive (two period matrices per entry);
    compute once and feed to rauch_check when comparing kernels or steps.
    """

    def omega_of(q: SchottkyParams) -> np.ndarray:
        return period_matrix(q, config=config, n_leg=n_leg, certify=False).omega

    return {
        (a, l): direction_diff(p, a, l, omega_of, h)
        for a in range(1, p.genus + 1)
        for l in range(DIRECTIONS_PER_HANDLE)
    }


def rauch_check(
    p: SchottkyParams,
    xs,
    h: float = 1e-5,
    config: SeriesConfig = SeriesConfig(),
    psi=None,
    n_leg: int = 64,
    y0: complex = 0j,
    gradient: dict | None = None,
) -> dict:
    """Finite-difference check of 2 pi i * grad Omega_ab(x) = nu_a(x) nu_b(x).

    psi defaults to the canonical weight-2 kernel for p. y0 anchors the
    1-form family and must stay off the orbits of the sample points.
    gradient, if given, must come from period_gradient(p, h, ...) and skips
    recomputing the finite differences. Returns a report with the max
    relative error over all (a, b) entries and sample points, plus the
    contracted per-sample fields ("lhs", "rhs" with shape (nx, g, g)).
    """
    xs = np.asarray(xs, dtype=np.complex128)
    if psi is None:
        from .gem import canonical_gem

        psi = canonical_gem(p, 2, config=config)
    base = period_matrix(p, config=config, n_leg=n_leg, certify=True, y0=y0)
    nu = NuFamily(p, config=config, y0=y0)
    nu_vals = nu.values(xs)  # (g, nx)
    tab = theta2_table(psi, xs)  # (g, 3, nx)

    diffs = gradient if gradient is not None else period_gradient(
        p, h=h, config=config, n_leg=n_leg
    )

    g = p.genus
    per_sample = []
    lhs_all = np.empty((len(xs), g, g), dtype=np.complex128)
    rhs_all = np.empty_like(lhs_all)
    worst = 0.0
    for i in range(len(xs)):
        grad = np.zeros((g, g), dtype=np.complex128)
        for (a, l), dm in diffs.items():
            grad += tab[a - 1, l, i] * dm
        lhs = TWO_PI_I * grad
        rhs = np.outer(nu_vals[:, i], nu_vals[:, i])
        lhs_all[i] = lhs
        rhs_all[i] = rhs
        rel = np.max(np.abs(lhs - rhs) / np.abs(rhs))
        per_sample.append(float(rel))
        worst = max(worst, float(rel))
    return {
        "h": h,
        "max_len": config.max_len,
        "max_rel_error": worst,
        "per_sample": per_sample,
        "lhs": lhs_all,
        "rhs": rhs_all,
        "symmetry_error": base.symmetry_error,
        "normalization_error": base.normalization_error,
    }

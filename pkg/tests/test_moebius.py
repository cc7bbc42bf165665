import cmath

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schottkycalc.moebius import (
    INF,
    MoebiusMap,
    NotLoxodromicError,
    PoleError,
    apply,
    compose,
    deriv,
    fixed_points,
    handle_map,
    identity,
    inverse,
    moebius,
)


def test_constructor_rejects_unnormalized():
    with pytest.raises(ValueError):
        MoebiusMap(2.0, 0.0, 0.0, 2.0)


def test_moebius_normalizes_determinant():
    m = moebius(2.0, 1.0, 0.0, 2.0)
    assert abs(m.a * m.d - m.b * m.c - 1.0) < 1e-14


def test_moebius_rejects_singular():
    with pytest.raises(ValueError):
        moebius(1.0, 2.0, 2.0, 4.0)


def test_apply_identity():
    m = identity()
    assert apply(m, 3.0 + 4.0j) == 3.0 + 4.0j
    assert apply(m, INF) is INF


def test_apply_pole_and_infinity():
    # z -> 1/z
    m = moebius(0.0, 1.0, 1.0, 0.0)
    assert apply(m, 0.0) is INF
    assert apply(m, INF) == 0.0
    assert abs(apply(m, 2.0) - 0.5) < 1e-15


def test_affine_keeps_infinity():
    m = moebius(2.0, 1.0, 0.0, 1.0)
    assert apply(m, INF) is INF


def test_deriv_matches_difference_quotient():
    m = moebius(1.0 + 1.0j, 2.0, 0.5j, 1.0)
    z = 0.3 - 0.2j
    h = 1e-6
    fd = (apply(m, z + h) - apply(m, z - h)) / (2 * h)
    assert abs(deriv(m, z) - fd) < 1e-8


def test_deriv_raises_at_pole():
    m = moebius(0.0, 1.0, 1.0, 0.0)
    with pytest.raises(PoleError):
        deriv(m, 0.0)


def test_compose_and_inverse():
    m1 = moebius(1.0, 2.0j, 0.0, 1.0)
    m2 = moebius(3.0, 0.0, 1.0, 1.0)
    z = 0.7 + 0.1j
    assert abs(apply(compose(m1, m2), z) - apply(m1, apply(m2, z))) < 1e-14
    mi = inverse(m2)
    assert abs(apply(compose(mi, m2), z) - z) < 1e-14


def test_handle_map_basic_action():
    w_p, w_m, rho = 2.0 + 0j, 6.0 + 0j, 0.09 + 0j
    m = handle_map(w_p, w_m, rho)
    # z -> w_minus + rho/(z - w_plus)
    z = 9.0 + 1.0j
    expected = w_m + rho / (z - w_p)
    assert abs(apply(m, z) - expected) < 1e-14
    assert apply(m, INF) == pytest.approx(w_m)
    assert apply(m, w_p) is INF


def test_handle_map_fixed_points_classical_example():
    # two-fixed-point data (+1, -1, multiplier 1/4) gives this handle triple
    m = handle_map(5.0 / 3.0, -5.0 / 3.0, -16.0 / 9.0)
    z_attr, z_rep, q = fixed_points(m)
    assert abs(z_attr - (-1.0)) < 1e-12
    assert abs(z_rep - 1.0) < 1e-12
    assert abs(q - 0.25) < 1e-12


def test_fixed_points_affine_case():
    # z -> -1.21 z : attracting point is infinity
    mu = 1.1j
    m = MoebiusMap(mu, 0.0, 0.0, 1.0 / mu)
    z_attr, z_rep, q = fixed_points(m)
    assert z_attr is INF
    assert z_rep == 0.0
    assert abs(q - (-1.0 / 1.21)) < 1e-12


def test_fixed_points_small_trace_loxodromic_accepted():
    # complex trace of modulus < 2 but tr^2 far from [0, 4]
    mu = 1.1j
    m = MoebiusMap(mu, 0.0, 0.0, 1.0 / mu)
    tr = m.a + m.d
    assert abs(tr) < 2.0
    fixed_points(m)  # must not raise


def test_fixed_points_rejects_elliptic_parabolic_identity():
    th = 0.3
    rot = moebius(cmath.cos(th), -cmath.sin(th), cmath.sin(th), cmath.cos(th))
    with pytest.raises(NotLoxodromicError):
        fixed_points(rot)
    with pytest.raises(NotLoxodromicError):
        fixed_points(MoebiusMap(1.0, 1.0, 0.0, 1.0))
    with pytest.raises(NotLoxodromicError):
        fixed_points(identity())


_reasonable = st.complex_numbers(
    min_magnitude=0.0, max_magnitude=5.0, allow_nan=False, allow_infinity=False
)


@st.composite
def loxodromic_handles(draw):
    w_p = draw(_reasonable)
    w_m = draw(_reasonable)
    rho = draw(st.complex_numbers(min_magnitude=1e-3, max_magnitude=0.5))
    sep = abs(w_p - w_m)
    if sep <= 2.2 * abs(rho) ** 0.5:
        w_m = w_p + (3.0 * abs(rho) ** 0.5 + 1.0)
    return w_p, w_m, rho


@given(loxodromic_handles())
@settings(max_examples=50, deadline=None)
def test_fixed_points_are_fixed(h):
    m = handle_map(*h)
    z_attr, z_rep, q = fixed_points(m)
    assert abs(q) < 1.0
    for z in (z_attr, z_rep):
        img = apply(m, z)
        if isinstance(z, complex) and not isinstance(img, complex):
            pytest.fail("finite fixed point mapped to infinity")
        if isinstance(z, complex):
            assert abs(img - z) < 1e-8 * max(1.0, abs(z))


@given(loxodromic_handles(), _reasonable)
@settings(max_examples=50, deadline=None)
def test_chain_rule(h, z):
    m1 = handle_map(*h)
    m2 = moebius(1.0, 1.0 + 0.5j, 0.0, 1.0)
    den1 = m2.c * z + m2.d
    if abs(den1) < 1e-6:
        return
    w = apply(m2, z)
    den2 = m1.c * w + m1.d
    if abs(den2) < 1e-6:
        return
    lhs = deriv(compose(m1, m2), z)
    rhs = deriv(m1, w) * deriv(m2, z)
    assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(rhs))

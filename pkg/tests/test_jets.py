import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from umbilic import jets
from umbilic.jets import DomainError, Jet3, combine, elementary, finite_difference_oracle, seed_coordinates

finite = st.floats(-3, 3, allow_nan=False)


def coeffs(j):
    return j.coefficients()


@pytest.mark.parametrize("u0, v0", [(2, 3), (0, 0), (-1.5, 0.25)])
def test_seed_coordinates(u0, v0):
    u, v = seed_coordinates(u0, v0)
    np.testing.assert_array_equal(coeffs(u), [u0, 1, 0, 0, 0, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(coeffs(v), [v0, 0, 1, 0, 0, 0, 0, 0, 0, 0])


def test_product_of_coordinates():
    u, v = seed_coordinates(2, 3)
    np.testing.assert_array_equal(coeffs(combine("mul", u, v)), [6, 3, 2, 0, 1, 0, 0, 0, 0, 0])


def test_int_pow_square():
    u, _ = seed_coordinates(2, 7)
    np.testing.assert_array_equal(coeffs(combine("int_pow", u, 2)), [4, 4, 0, 2, 0, 0, 0, 0, 0, 0])


def test_negative_int_pow():
    u, _ = seed_coordinates(2.0, 0.0)
    j = u ** -1
    np.testing.assert_allclose(coeffs(j)[[0, 1, 3, 6]], [0.5, -0.25, 0.25, -0.375])


def test_division_by_zero_value():
    zero = Jet3()
    with pytest.raises(DomainError):
        combine("div", Jet3.constant(1.0), zero)


def test_sin_taylor():
    u, _ = seed_coordinates(0.0, 0.0)
    np.testing.assert_allclose(coeffs(elementary("sin", u)), [0, 1, 0, 0, 0, 0, -1, 0, 0, 0], atol=0)


def test_exp_of_zero_jet_and_seed():
    np.testing.assert_array_equal(coeffs(elementary("exp", Jet3())), [1] + [0] * 9)
    u, _ = seed_coordinates(0.0, 0.0)
    np.testing.assert_array_equal(coeffs(elementary("exp", u)), [1, 1, 0, 1, 0, 0, 1, 0, 0, 0])


@pytest.mark.parametrize("func", ["ln", "sqrt"])
def test_ln_sqrt_domain(func):
    with pytest.raises(DomainError):
        elementary(func, Jet3.constant(-1.0))


def test_domain_error_index_on_arrays():
    a = Jet3.constant(np.array([1.0, 2.0, -1.0, -2.0]))
    with pytest.raises(DomainError) as exc:
        elementary("ln", a)
    assert exc.value.index == 2


def test_fd_oracle_examples():
    fd = finite_difference_oracle(lambda u, v: u * v, (2.0, 3.0), 1e-3)
    assert abs(fd.fuv - 1) < 1e-6
    fd = finite_difference_oracle(lambda u, v: 4 / (1 + u * u + v * v) ** 2, (0.0, 0.0), 1e-3)
    assert abs(fd.fuu + 16) < 1e-4 and abs(fd.fvv + 16) < 1e-4
    fd = finite_difference_oracle(lambda u, v: math.sin(u), (0.0, 0.0), 1e-2)
    assert abs(fd.fuuu + 1) < 1e-3


def test_fd_oracle_two_step_sizes_agree_on_stereographic_factor():
    f = lambda u, v: 4 / (1 + u * u + v * v) ** 2
    a = finite_difference_oracle(f, (0.0, 0.0), 1e-3)
    b = finite_difference_oracle(f, (0.0, 0.0), 5e-4)
    assert abs(a.fuu - b.fuu) < 1e-4
    # Richardson extrapolation of the two estimates lands on -16
    assert abs((4 * b.fuu - a.fuu) / 3 + 16) < 1e-6


def test_fd_oracle_rejects_nonpositive_step():
    with pytest.raises(ValueError):
        finite_difference_oracle(lambda u, v: u, (0.0, 0.0), 0.0)


def test_derivative_lowers_order():
    u, v = seed_coordinates(0.5, -0.25)
    j = jets.sin(u * v) * jets.exp(v)
    d = j.du()
    assert d.order == 2
    assert d.fuuu == 0 and d.fvvv == 0
    np.testing.assert_allclose([d.f, d.fu, d.fv, d.fuu, d.fuv, d.fvv],
                               [j.fu, j.fuu, j.fuv, j.fuuu, j.fuuv, j.fuvv])
    with pytest.raises(ValueError):
        Jet3(order=0).du()


def _random_jet(draw_vals):
    return Jet3(*draw_vals)


jet_strategy = st.lists(finite, min_size=10, max_size=10).map(_random_jet)


@settings(max_examples=200, deadline=None)
@given(jet_strategy, jet_strategy)
def test_mul_commutes(a, b):
    np.testing.assert_allclose(coeffs(a * b), coeffs(b * a), rtol=0, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(jet_strategy)
def test_pythagorean_identity(a):
    one = jets.sin(a) ** 2 + jets.cos(a) ** 2
    c = coeffs(one)
    assert abs(c[0] - 1) <= 1e-12
    # partials scale with powers of a's coefficients; bound relative to that
    scale = 1 + np.max(np.abs(coeffs(a))) ** 3
    assert np.all(np.abs(c[1:]) <= 1e-12 * scale)


@settings(max_examples=100, deadline=None)
@given(finite, finite)
def test_quotient_matches_product_with_reciprocal(u0, v0):
    u, v = seed_coordinates(u0, v0)
    num = jets.sin(u) + v
    den = 2 + u * u + v * v
    q = num / den
    back = q * den
    np.testing.assert_allclose(coeffs(back), coeffs(num), atol=1e-10)


def test_array_jets_broadcast():
    u, v = seed_coordinates(np.linspace(-1, 1, 5), np.zeros(5))
    j = u * u + v
    np.testing.assert_allclose(j.fuu, 2.0)
    assert j.f.shape == (5,)

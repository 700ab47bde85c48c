import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import THETA_0_1, THETA_SHARP_0_1, brute_theta
from qtheta.errors import ConvergenceError, DomainError, InputError
from qtheta.theta import (WeightSequence, characterization_residual, theta, theta_log_d2, theta_mod,
                          theta_mod_coefficients, theta_sharp)

phases = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)
decays = st.floats(0.05, 6.0, allow_nan=False)


class TestFrozenValues:
    def test_theta_at_origin(self):
        assert abs(theta(0.0, 1.0) - THETA_0_1) < 1e-15

    def test_theta_sharp_at_origin(self):
        assert abs(theta_sharp(0.0, 1.0) - THETA_SHARP_0_1) < 1e-15

    def test_oracle_reproduces_frozen_values(self):
        assert abs(brute_theta(0.0, 1.0) - THETA_0_1) < 1e-15
        assert abs(brute_theta(0.0, 1.0, shift=0.5) - THETA_SHARP_0_1) < 1e-15


@pytest.mark.parametrize("method", ["direct", "jacobi", "auto"])
@pytest.mark.parametrize("eps", [0.05, 0.3, 1.0, 2.5])
@pytest.mark.parametrize("alpha", [0.0, 1.3, -2.9, 0.7 + 0.4j, 2.0 - 1.1j])
def test_routes_match_oracle(method, eps, alpha):
    # rounding is relative to the sum of |terms|, not to the (possibly cancelling) value
    scale = brute_theta(1j * complex(alpha).imag, eps).real
    ref = brute_theta(alpha, eps)
    assert abs(theta(alpha, eps, method=method) - ref) < 1e-13 * scale
    ref_s = brute_theta(alpha, eps, shift=0.5)
    assert abs(theta_sharp(alpha, eps, method=method) - ref_s) < 1e-13 * scale


def test_vectorized_shape():
    a = np.linspace(0, 1, 12).reshape(3, 4)
    out = theta(a, 0.7)
    assert out.shape == (3, 4)
    assert abs(out[1, 2] - theta(a[1, 2], 0.7)) < 1e-15


@settings(max_examples=60, deadline=None)
@given(alpha=phases, eps=decays)
def test_jacobi_duality(alpha, eps):
    lhs = theta(alpha, eps, method="direct")
    rhs = math.sqrt(math.pi / eps) * math.exp(-alpha ** 2 / (4 * eps)) * theta(
        1j * math.pi * alpha / eps, math.pi ** 2 / eps, method="direct")
    assert abs(lhs - rhs) < 1e-10


@settings(max_examples=60, deadline=None)
@given(alpha=phases, eps=decays)
def test_periodicity(alpha, eps):
    assert abs(theta(alpha + 2 * math.pi, eps) - theta(alpha, eps)) < 1e-12
    assert abs(theta_sharp(alpha + 2 * math.pi, eps) + theta_sharp(alpha, eps)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(alpha=phases, eps=st.floats(0.2, 3.0))
def test_imaginary_quasi_periodicity(alpha, eps):
    # shifting alpha by 2 i eps moves the lattice by one step
    lhs = theta(alpha + 2j * eps, eps)
    rhs = np.exp(eps - 1j * alpha) * theta(alpha, eps)
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))


@pytest.mark.parametrize("deriv", [1, 2])
@pytest.mark.parametrize("eps", [0.4, 1.7])
def test_derivatives_against_differences(deriv, eps):
    a, h = 0.9, 1e-3
    f = lambda x: theta(x, eps)  # noqa: E731
    if deriv == 1:
        fd = (f(a - 2 * h) - 8 * f(a - h) + 8 * f(a + h) - f(a + 2 * h)) / (12 * h)
    else:
        fd = (-f(a - 2 * h) + 16 * f(a - h) - 30 * f(a) + 16 * f(a + h) - f(a + 2 * h)) / (12 * h * h)
    assert abs(theta(a, eps, deriv=deriv) - fd) < 1e-7


def test_derivative_routes_agree():
    for eps in (0.3, 0.8):
        for d in (1, 2):
            assert abs(theta(1.1, eps, method="direct", deriv=d) - theta(1.1, eps, method="jacobi", deriv=d)) < 1e-12


class TestErrors:
    @pytest.mark.parametrize("eps", [0.0, -1.0])
    def test_nonpositive_eps(self, eps):
        with pytest.raises(DomainError):
            theta(0.0, eps)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            theta(0.0, 1.0, method="fast")

    def test_direct_route_refuses_tiny_eps(self):
        with pytest.raises(ConvergenceError):
            theta(0.0, 1e-13, method="direct")


# ---------------------------------------------------------------------------
# weighted series


def _rho(t):
    return 1.0 + 0.3 * np.cos(np.asarray(t, dtype=float)) + 0.2j


def _brute_weighted(alpha, eps, weights, n_max=60):
    n = np.arange(-n_max, n_max + 1)
    return complex(np.sum(np.exp(-weights.log(n) - eps * n * n + 1j * n * alpha)))


class TestWeightSequence:
    def test_recurrence(self):
        w = WeightSequence.from_pointwise(_rho, 0.5)
        n = np.arange(-10, 11)
        lhs = w(n[1:])
        rhs = _rho(n[1:] * 0.5) * w(n[:-1])
        assert np.max(np.abs(lhs / rhs - 1)) < 1e-13
        assert w(np.array([0]))[0] == 1

    def test_vanishing_rho_names_index(self):
        w = WeightSequence.from_pointwise(lambda t: np.asarray(t, dtype=complex) - 1.5, 0.5)
        with pytest.raises(DomainError, match="k = 3"):
            w(np.array([5]))

    def test_table_lookup_outside(self):
        w = WeightSequence.from_table({0: 1.0, 1: 2.0, -1: 0.5}, 1.0)
        assert abs(w(np.array([1]))[0] - 2.0) < 1e-15
        with pytest.raises(InputError, match="rho_!\\(4"):
            w(np.array([4]))

    def test_table_needs_unit_origin(self):
        with pytest.raises(DomainError):
            WeightSequence.from_table({0: 2.0}, 1.0)

    def test_modulus_squared(self):
        w = WeightSequence.from_pointwise(_rho, 0.5)
        n = np.arange(-6, 7)
        assert np.max(np.abs(w.modulus_squared()(n) - np.abs(w(n)) ** 2)) < 1e-12

    def test_nonpositive_hbar(self):
        with pytest.raises(DomainError):
            WeightSequence.unit_weights(0.0)


class TestThetaMod:
    def test_unit_weights_reduce_to_theta(self):
        w = WeightSequence.unit_weights(1.0)
        assert abs(theta_mod(0.4, 0.8, w) - theta(0.4, 0.8)) == 0

    @pytest.mark.parametrize("alpha", [0.0, 1.0, 0.5 - 0.7j])
    def test_matches_direct_sum(self, alpha):
        w = WeightSequence.from_pointwise(_rho, 0.5)
        ref = _brute_weighted(alpha, 0.6, w)
        assert abs(theta_mod(alpha, 0.6, w) - ref) < 1e-13 * abs(ref)

    def test_characterization(self):
        w = WeightSequence.from_pointwise(_rho, 0.5)
        assert characterization_residual(0.6, w) < 1e-13

    def test_coefficients(self):
        w = WeightSequence.from_pointwise(_rho, 0.5)
        c = theta_mod_coefficients(0.6, w, np.arange(-3, 4))
        assert abs(c[3] - 1) < 1e-15

    def test_small_eps_refused(self):
        w = WeightSequence.from_pointwise(_rho, 0.5)
        with pytest.raises(ConvergenceError):
            theta_mod(0.0, 0.01, w)

    def test_growing_terms_reported(self):
        # rho_! decays like exp(-n^2), overwhelming the Gaussian
        w = WeightSequence.from_log_function(lambda n: -1.0 * n.astype(float) ** 2 + 0j, 1.0)
        with pytest.raises(ConvergenceError, match="does not converge"):
            theta_mod(0.0, 0.5, w)

    def test_missing_table_value(self):
        w = WeightSequence.from_table({0: 1.0, 1: 2.0}, 1.0)
        with pytest.raises(InputError):
            theta_mod(0.0, 1.0, w)


class TestLogSecondDerivative:
    @pytest.mark.parametrize("x", [-1.3, 0.0, 0.45, 2.0])
    def test_against_differences(self, x):
        eps, h = 0.5, 1e-3

        def lnS(y):
            return math.log(theta(-1j * y, eps).real)

        fd = (-lnS(x - 2 * h) + 16 * lnS(x - h) - 30 * lnS(x) + 16 * lnS(x + h) - lnS(x + 2 * h)) / (12 * h * h)
        assert abs(theta_log_d2(x, eps) - fd) < 1e-7

    def test_weighted_variance(self):
        w = WeightSequence.from_pointwise(lambda t: 1.0 + 0.5 * np.tanh(np.asarray(t, float)) + 0j, 1.0)
        x = 0.3
        n = np.arange(-40, 41)
        p = np.exp(-w.log(n).real - 0.8 * n * n + n * x)
        p /= p.sum()
        var = float(p @ n ** 2 - (p @ n) ** 2)
        assert abs(theta_log_d2(x, 0.8, w) - var) < 1e-13

    def test_complex_weights_rejected(self):
        w = WeightSequence.from_pointwise(_rho, 0.5)
        with pytest.raises(DomainError):
            theta_log_d2(0.0, 0.8, w)

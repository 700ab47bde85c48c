import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtheta.errors import ParameterError, UnsupportedSurfaceError
from qtheta.flows import (DeformationFlow, SurfaceKind, casimir_drift, classify_surface, detect_resonance,
                          find_period, group_law_residual, rotation_flow, sklyanin_flow, su11_flow,
                          surface_profile)

times = st.floats(-6.0, 6.0, allow_nan=False)


def _flows():
    return [sklyanin_flow(math.pi / 2, 1.0, 0.0, 2.0), sklyanin_flow(1.0, 0.7, 0.4, 3.0),
            su11_flow(1.25, 0.0, 1.0), su11_flow(2.0, 0.7, 0.5), rotation_flow(math.pi, 2.0, 1.0)]


@pytest.mark.parametrize("flow", _flows(), ids=lambda f: f"{f.name}-{f.params}")
class TestGroupStructure:
    @settings(max_examples=30, deadline=None)
    @given(t=times, s=times)
    def test_group_law(self, flow, t, s):
        assert group_law_residual(flow, [t], [s]) < 1e-12 * (1 + t * t + s * s)

    def test_identity_at_zero(self, flow):
        F, A = flow(0.0)
        assert abs(F - flow.a0) < 1e-15
        assert np.max(np.abs(np.asarray(A) - flow.a)) < 1e-15

    def test_casimirs_constant_along_orbit(self, flow):
        drift = casimir_drift(flow, np.linspace(-8, 8, 161))
        assert max(drift.values()) < 1e-12 * 100

    def test_profile_is_positive(self, flow):
        assert np.all(surface_profile(flow, np.linspace(-20, 20, 401)) > 0)


class TestSu11:
    def test_profile_closed_form(self):
        flow = su11_flow(2.0, 0.7, 0.5)
        t = np.linspace(-3, 3, 13)
        assert np.max(np.abs(surface_profile(flow, t) - (t * t + t * (2 * 0.7 - 0.5) + 2.0))) < 1e-14

    def test_is_cylinder(self):
        assert classify_surface(su11_flow(1.25, 0.0, 1.0)).kind is SurfaceKind.CYLINDER
        assert find_period(su11_flow(1.25, 0.0, 1.0)) is None

    def test_lambda_must_be_real(self):
        with pytest.raises(ParameterError):
            su11_flow(0.1, 1.0, 1.0)

    def test_hbar_positive(self):
        with pytest.raises(ParameterError):
            su11_flow(1.0, 0.0, 0.0)


class TestSklyanin:
    @pytest.mark.parametrize("N", [3, 4, 5, 6, 8])
    def test_resonant_period(self, N):
        sc = classify_surface(sklyanin_flow(2 * math.pi / N, 1.0, 0.0, 2.0))
        assert sc.kind is SurfaceKind.TORUS
        assert sc.resonance == (N, 1)
        assert abs(sc.minimal_period - N) < 1e-12

    def test_covering_torus(self):
        sc = classify_surface(sklyanin_flow(3 * math.pi / 4, 1.0, 0.0, 3.0))
        assert sc.resonance == (8, 3)
        assert abs(sc.minimal_period - 8 / 3) < 1e-12
        assert sc.period == 8.0

    def test_irrational_period(self):
        sc = classify_surface(sklyanin_flow(1.0, 1.0, 0.0, 2.0))
        assert sc.kind is SurfaceKind.TORUS
        assert sc.resonance is None
        assert abs(sc.minimal_period - 2 * math.pi) < 1e-12

    @pytest.mark.parametrize("phi", [0.0, math.pi, -0.3])
    def test_phi_range(self, phi):
        with pytest.raises(ParameterError):
            sklyanin_flow(phi, 1.0, 0.0, 2.0)

    def test_positivity_bound(self):
        # a0 must exceed kappa1 (1 - cos(psi - phi)) / sin(phi) = 1 here
        with pytest.raises(ParameterError):
            sklyanin_flow(math.pi / 2, 1.0, 0.0, 0.9)

    def test_vector_component_rotates(self):
        flow = sklyanin_flow(math.pi / 2, 1.0, 0.0, 2.0)
        _, A = flow(1.0)
        assert abs(complex(np.ravel(A)[0]) - 1j * flow.a[0]) < 1e-15


class TestResonance:
    @pytest.mark.parametrize("T,h,expected", [(4.0, 1.0, (4, 1)), (8 / 3, 1.0, (8, 3)), (2.5, 0.5, (5, 1)),
                                              (2 * math.pi, 1.0, None), (math.sqrt(2), 1.0, None)])
    def test_detect(self, T, h, expected):
        assert detect_resonance(T, h) == expected

    def test_bad_input(self):
        with pytest.raises(ParameterError):
            detect_resonance(-1.0, 1.0)

    def test_rotation_flow_half_turn(self):
        sc = classify_surface(rotation_flow(math.pi, 2.0, 1.0))
        assert sc.resonance == (2, 1)


def _toy_flow(profile):
    """``F(t) = profile(t)`` with a trivially translated vector component."""
    return DeformationFlow(lambda t, A0, A: np.real(A0 + profile(np.asarray(t, float)) - profile(0.0)),
                           lambda t, A0, A: np.asarray(A, complex) + np.asarray(t, float),
                           1, 1.0, (float(profile(0.0)), (0j,)))


class TestDegenerateLeaves:
    def test_plane(self):
        assert classify_surface(_toy_flow(lambda t: np.asarray(t) ** 2)).kind is SurfaceKind.PLANE

    def test_sphere(self):
        flow = _toy_flow(lambda t: np.asarray(t) * (3.0 - np.asarray(t)))
        assert classify_surface(flow).kind is SurfaceKind.SPHERE

    def test_vanishing_profile(self):
        flow = _toy_flow(lambda t: 1.0 - 0.1 * np.asarray(t) ** 2)
        with pytest.raises(UnsupportedSurfaceError, match="degenerate"):
            classify_surface(flow)

    def test_too_few_samples(self):
        with pytest.raises(ParameterError):
            classify_surface(su11_flow(1.25, 0.0, 1.0), samples=10)

import math
from dataclasses import replace

import numpy as np
import pytest

from qtheta import factorization as fz
from qtheta import representations as rp
from qtheta.acceptance import SU11_V2, sklyanin_torus
from qtheta.errors import ConstructionError, InputError, ParameterError
from qtheta.flows import sklyanin_flow, su11_flow

REPS = ["torus4", "torus8", "su11_v1", "su11_v2"]


@pytest.fixture(params=REPS)
def rep(request):
    return request.getfixturevalue(request.param)[0]


def test_relations(rep):
    report = rp.verify_relations(rep)
    assert report.passed, report


def test_casimirs_are_scalars(rep):
    for name, value, dev in rp.casimir_scalars(rep):
        assert dev < 1e-12 * max(1.0, abs(value)), name


def test_fiducial_state(rep):
    v = rp.fiducial_state(rep)
    assert abs(np.linalg.norm(v) - 1) < 1e-15


def test_adjoint_pair(rep):
    _, B, C = rep.matrices()
    assert np.max(np.abs(B.conj().T - C)) == 0


class TestSklyanin:
    @pytest.mark.parametrize("name", ["torus4", "torus8"])
    def test_original_relations(self, request, name):
        rep = request.getfixturevalue(name)[0]
        assert rp.verify_sklyanin_original(rep).passed

    def test_original_relations_on_cylinder(self):
        flow = sklyanin_flow(1.0, 1.0, 0.0, 2.0)
        fact = fz.sklyanin_factorization(1.0, 1.0, 0.0, 2.0, 1.0)
        rep = rp.build_cylinder_rep(flow, fact, 16)
        assert rp.verify_sklyanin_original(rep).passed

    @pytest.mark.parametrize("name", ["torus4", "torus8"])
    def test_B_power_N(self, request, name):
        rep = request.getfixturevalue(name)[0]
        P = np.linalg.matrix_power(rep.B, rep.N)
        beta = rp.expected_beta(rep)
        assert np.max(np.abs(P - beta * np.eye(rep.N))) < 1e-12 * abs(beta)
        assert abs(rep.beta - beta) < 1e-12 * abs(beta)

    def test_generators_hermitian(self, torus4):
        S0, S1, S2, S3, r = rp.sklyanin_generators(torus4[0])
        for S in (S0, S1, S2, S3):
            assert np.max(np.abs(S - S.conj().T)) < 1e-15
        assert abs(r - 1.0) < 1e-15

    def test_generators_need_sklyanin(self, su11_v1):
        with pytest.raises(InputError):
            rp.sklyanin_generators(su11_v1[0])

    def test_covering_multiplicity(self, torus8):
        assert torus8[0].m == 3

    @pytest.mark.parametrize("N", [2, 3, 5, 6])
    def test_other_resonances(self, N):
        rep, _ = sklyanin_torus(N, alpha=0.2)
        assert rp.verify_relations(rep).passed
        assert rep.N == N

    def test_not_minimal(self):
        phi = math.pi / 2
        flow = sklyanin_flow(phi, 1.0, 0.0, 2.0)
        fact = fz.normalize_resonant(fz.sklyanin_factorization(phi, 1.0, 0.0, 2.0, 1.0), 8, 0.0)
        with pytest.raises(ParameterError, match="not minimal"):
            rp.build_torus_rep(flow, fact, 8, 0.0)

    def test_not_a_period(self):
        phi = math.pi / 2
        flow = sklyanin_flow(phi, 1.0, 0.0, 2.0)
        fact = fz.normalize_resonant(fz.sklyanin_factorization(phi, 1.0, 0.0, 2.0, 1.0), 5, 0.0)
        with pytest.raises(ParameterError, match="identity"):
            rp.build_torus_rep(flow, fact, 5, 0.0)

    def test_unnormalized(self):
        phi = math.pi / 2
        flow = sklyanin_flow(phi, 1.0, 0.0, 2.0)
        fact = fz.sklyanin_factorization(phi, 1.0, 0.0, 2.0, 1.0)
        with pytest.raises(ParameterError, match="normalized"):
            rp.build_torus_rep(flow, fact, 4, 0.9)

    def test_spectral_invariants_ignore_alpha(self):
        # A and BC are diagonal with alpha-independent entries
        r1, _ = sklyanin_torus(4, alpha=0.0)
        r2, _ = sklyanin_torus(4, alpha=1.1)
        for s1, s2 in zip(rp.spectral_invariants(r1), rp.spectral_invariants(r2)):
            assert np.max(np.abs(s1 - s2)) < 1e-12


class TestCylinder:
    def test_truncation_minimum(self):
        flow = su11_flow(1.25, 0.0, 1.0)
        fact = fz.su11_factorization(1.25, 0.0, 1.0, 1.0, 1)
        with pytest.raises(ParameterError):
            rp.build_cylinder_rep(flow, fact, 7)

    def test_verified_band_recorded(self, su11_v1):
        report = rp.verify_relations(su11_v1[0])
        assert report.params["verified_band"] == "|n| <= 22"

    def test_edge_rows_are_not_verified(self, su11_v1):
        rep = su11_v1[0]
        assert not rep.interior()[0] and rep.interior()[2]

    def test_index_bounds(self, su11_v1):
        with pytest.raises(IndexError):
            su11_v1[0].index_of(25)

    def test_fiducial_failure(self, su11_v1):
        rep = su11_v1[0]
        bad = rp.CylinderRep(rep.M, rep.diag_A + 1.0, rep.shift_up, rep.shift_down, rep.flow, rep.fact)
        with pytest.raises(ConstructionError):
            rp.fiducial_state(bad)


class TestMonomialAction:
    @pytest.mark.parametrize("name", ["su11_v1", "su11_v2"])
    def test_matches_literal_operators(self, request, name):
        rep = request.getfixturevalue(name)[0]
        fact = rep.fact
        lam, a = fact.extras["lambda"], fact.extras["a"]
        lo, hi = -10, 10
        (A,), B, C = rp.MonomialAction(rep.flow, fact).matrices(lo, hi)
        A2, B2, C2 = rp.su11_explicit_operators(a, lam, rep.hbar, fact.tau, lo, hi)
        if fact.nu_is_unit:
            # B = mu: the literal form has B(t) = t + a - hbar/2 - i lam
            assert np.max(np.abs(B - B2)) < 1e-12 * np.max(np.abs(B2))
            assert np.max(np.abs(C - C2)) < 1e-12 * np.max(np.abs(C2))
        assert np.max(np.abs(A - A2)) < 1e-13

    @pytest.mark.parametrize("name", ["su11_v1", "su11_v2", "torus4"])
    def test_orthonormal_basis_gives_shift(self, request, name):
        rep = request.getfixturevalue(name)[0]
        lo, hi = -8, 8
        _, B, C = rp.MonomialAction(rep.flow, rep.fact).in_orthonormal_basis(lo, hi)
        m = np.arange(lo, hi)
        mu = rep.fact.mu((m + 1) * rep.hbar)
        assert np.max(np.abs(np.diag(B, -1) - mu)) < 1e-12 * np.max(np.abs(mu))
        assert np.max(np.abs(C - B.conj().T)) < 1e-12 * np.max(np.abs(mu))

    def test_large_window_stays_finite(self, su11_v2):
        rep = su11_v2[0]
        _, B, _ = rp.MonomialAction(rep.flow, rep.fact).in_orthonormal_basis(-64, 64)
        assert np.all(np.isfinite(B))


def test_tau_admissibility_enforced():
    p = SU11_V2
    flow = su11_flow(p["a0"], p["a"], p["hbar"])
    fact = fz.su11_factorization(p["a0"], p["a"], p["hbar"], p["tau"], 2)
    with pytest.raises(ParameterError, match="tau0"):
        rp.build_cylinder_rep(flow, replace(fact, tau=0.2), 16)

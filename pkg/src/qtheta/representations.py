"""Irreducible representations as diagonal-plus-weighted-shift operators.

In the orthonormal basis ``e^(n)`` the generators act by

    B e^(n) = mu((n+1) hbar) e^(n+1),
    C e^(n) = conj(mu(n hbar)) e^(n-1),
    A e^(n) = phi_{n hbar}(a0, a) e^(n).

On the cylinder the index runs over ``[-M, M]`` and only interior indices
are exact; on a resonant torus the shift is cyclic of length ``N``.

The shift form is derived from the exponential operators acting on
monomials ``e^{m zbar}`` (see :class:`MonomialAction`): with the scalar
commutator ``[zbar, d/dzbar] = -1``,

    exp(zbar - tau hbar d) e^{m zbar} = exp(-tau hbar (m + 1/2)) e^{(m+1) zbar},

and rescaling monomials by ``c_m = exp(-tau hbar m^2 / 2) / nu_!(m hbar)``
turns ``B(t) exp(...)`` into the weight ``B nu = mu``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError, InputError, ParameterError
from .factorization import FactorizationData, resonant_normalization_residual, tau_min
from .flows import (DeformationFlow, SurfaceKind, _return_distance, classify_surface, find_period,
                    surface_profile)
from .reports import CheckReport, combine

MIN_TRUNCATION = 8
INTERIOR_MARGIN = 2


class _Rep:
    """Shared matrix interface: ``A`` (tuple of k matrices), ``B``, ``C`` and the verified index mask."""

    flow: DeformationFlow
    fact: FactorizationData

    def matrices(self):
        raise NotImplementedError

    @property
    def hbar(self) -> float:
        return self.flow.hbar

    @property
    def tau(self) -> float:
        return self.fact.tau

    def interior(self) -> np.ndarray:
        raise NotImplementedError

    def index_of(self, n: int) -> int:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class CylinderRep(_Rep):
    """Truncated weighted-shift representation on ``n in [-M, M]``."""

    M: int
    diag_A: np.ndarray
    shift_up: np.ndarray
    shift_down: np.ndarray
    flow: DeformationFlow
    fact: FactorizationData

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    def index_of(self, n: int) -> int:
        if abs(n) > self.M:
            raise IndexError(f"basis index {n} outside [-{self.M}, {self.M}]")
        return n + self.M

    def interior(self) -> np.ndarray:
        return np.abs(self.indices) <= self.M - INTERIOR_MARGIN

    def matrices(self):
        size = 2 * self.M + 1
        B = np.zeros((size, size), dtype=complex)
        C = np.zeros((size, size), dtype=complex)
        i = np.arange(size - 1)
        B[i + 1, i] = self.shift_up[:-1]
        C[i, i + 1] = self.shift_down[1:]
        A = tuple(np.diag(d) for d in self.diag_A)
        return A, B, C

    def shift(self) -> np.ndarray:
        """Pure unweighted shift ``e^{i s}: e^(n) -> e^(n+1)``."""
        size = 2 * self.M + 1
        return np.eye(size, k=-1, dtype=complex)


@dataclass(frozen=True, eq=False)
class TorusRep(_Rep):
    """Exact ``N``-dimensional representation on a resonant torus."""

    N: int
    A: tuple
    B: np.ndarray
    C: np.ndarray
    alpha: float
    flow: DeformationFlow
    fact: FactorizationData
    m: int = 1

    def index_of(self, n: int) -> int:
        return n % self.N

    def interior(self) -> np.ndarray:
        return np.ones(self.N, dtype=bool)

    def matrices(self):
        return self.A, self.B, self.C

    @property
    def beta(self) -> complex:
        """Scalar value of ``B^N``."""
        return complex(np.linalg.matrix_power(self.B, self.N)[0, 0])


# ---------------------------------------------------------------------------
# construction


def _diag_A(flow: DeformationFlow, n: np.ndarray) -> np.ndarray:
    _, A = flow.trajectory(n * flow.hbar)
    return np.asarray(A, dtype=complex).reshape(flow.k, n.size)


def _check_tau(fact: FactorizationData) -> None:
    tau0 = fact.tau0 if fact.tau0 is not None else tau_min(fact.g, hbar=fact.hbar)
    if not fact.tau > tau0:
        raise ParameterError(f"tau = {fact.tau} must exceed tau0 = {tau0:.6g}")


def build_cylinder_rep(flow: DeformationFlow, fact: FactorizationData, M: int,
                       check_surface: bool = True) -> CylinderRep:
    """Weighted-shift representation on the cylinder (or on the infinite winding of a torus).

    Raises
    ------
    ParameterError
        ``M < 8``, ``tau <= tau0``, or the leaf is not a cylinder/torus.
    """
    if int(M) != M or M < MIN_TRUNCATION:
        raise ParameterError(f"truncation M must be an integer >= {MIN_TRUNCATION}, got {M!r}")
    M = int(M)
    _check_tau(fact)
    if check_surface:
        kind = classify_surface(flow).kind
        if kind not in (SurfaceKind.CYLINDER, SurfaceKind.TORUS):
            raise ParameterError(f"a {kind.value} leaf has no weighted-shift cylinder representation")
    n = np.arange(-M, M + 1)
    hb = flow.hbar
    if np.any(surface_profile(flow, n * hb) <= 0):
        raise ParameterError("F must be positive on the lattice")
    up = np.asarray(fact.mu((n + 1) * hb), dtype=complex)
    down = np.conj(np.asarray(fact.mu(n * hb), dtype=complex))
    return CylinderRep(M, _diag_A(flow, n), up, down, flow, fact)


def build_torus_rep(flow: DeformationFlow, fact: FactorizationData, N: int, alpha: float,
                    normalization_tol: float = 1e-10, period_tol: float = 1e-9) -> TorusRep:
    """Cyclic weighted shift of length ``N``; ``B^N = F_!(N hbar)^{1/2} e^{i alpha}``.

    ``fact`` must already satisfy the resonant normalization with this
    ``alpha`` (see :func:`qtheta.factorization.normalize_resonant`).  The
    wrap entry carries ``mu(N hbar) / nu_!(N hbar)`` so that ``B^N`` is the
    product of the factor ``B`` around the period; for ``nu = 1`` it is
    simply ``mu(N hbar)``.
    """
    if int(N) != N or N < 2:
        raise ParameterError("N must be an integer >= 2")
    N = int(N)
    hb = flow.hbar
    if np.max(np.abs(_return_distance(flow, N * hb))) > period_tol:
        raise ParameterError(f"Phi_(N hbar) is not the identity for N = {N}")
    for Np in range(1, N):
        if N % Np == 0 and np.max(np.abs(_return_distance(flow, Np * hb))) < period_tol:
            raise ParameterError(f"N = {N} is not minimal: N' = {Np} is already a period")
    mod_res, phase_res = resonant_normalization_residual(fact, N, alpha)
    if max(mod_res, phase_res) > normalization_tol:
        raise ParameterError("factorization is not normalized for this (N, alpha); "
                             f"residuals {mod_res:.2e}, {phase_res:.2e}")
    _check_tau(fact)
    n = np.arange(N)
    weights = np.asarray(fact.mu((n + 1) * hb), dtype=complex)
    if not fact.nu_is_unit:
        weights[-1] /= complex(fact.nu_factorial(np.array([N]))[0])
    B = np.zeros((N, N), dtype=complex)
    B[(n + 1) % N, n] = weights
    C = B.conj().T.copy()
    A = tuple(np.diag(d) for d in _diag_A(flow, n))
    T = N * hb
    m = 1
    T0 = find_period(flow)
    if T0 is not None:
        m = max(1, int(round(T / T0)))
    return TorusRep(N, A, B, C, float(alpha), flow, fact, m)


# ---------------------------------------------------------------------------
# verification


def _operator_functions(flow: DeformationFlow, BC_diag: np.ndarray, A_diags: np.ndarray):
    """``phi0_hbar(BC, A)`` and ``phi_hbar(BC, A)`` evaluated on the joint diagonal."""
    F1, A1 = flow(flow.hbar, np.real(BC_diag), A_diags)
    return np.asarray(F1, dtype=complex), np.asarray(A1, dtype=complex).reshape(A_diags.shape)


def _col_residual(X: np.ndarray, cols: np.ndarray) -> float:
    if X.size == 0:
        return 0.0
    return float(np.max(np.abs(X[:, cols]))) if cols.any() else 0.0


def verify_relations(rep: _Rep, flow: DeformationFlow | None = None, tol: float = 1e-12) -> CheckReport:
    """Residuals of the defining relations, the conjugated ones and the adjoint structure.

    Residuals are measured column-wise on verified basis vectors (all of
    them on the torus, ``|n| <= M - 2`` on the cylinder) and divided by
    ``max(1, max |F(n hbar)|)`` so that large-index growth of the profile
    does not swamp the tolerance.  For a complex vector component the
    self-adjointness of ``A`` is replaced by normality ``[A, A*] = 0``.
    """
    flow = flow or rep.flow
    A, B, C = rep.matrices()
    cols = rep.interior()
    BC = B @ C
    A_diags = np.array([np.diag(a) for a in A])
    D0, D = _operator_functions(flow, np.diag(BC), A_diags)
    scale = max(1.0, float(np.max(np.abs(np.diag(BC)[cols]))))
    parts = []

    def add(name, X):
        parts.append(CheckReport(name, _col_residual(X, cols) / scale, tol))

    add("CB - phi0(BC, A)", C @ B - np.diag(D0))
    for j, a in enumerate(A):
        add(f"CA_{j} - phi_{j}(BC, A) C", C @ a - np.diag(D[j]) @ C)
        add(f"A_{j}B - B phi_{j}(BC, A)", a @ B - B @ np.diag(D[j]))
        for l in range(j + 1, len(A)):
            add(f"[A_{j}, A_{l}]", a @ A[l] - A[l] @ a)
        if flow.real_vector:
            add(f"A_{j}* - A_{j}", a.conj().T - a)
        else:
            add(f"[A_{j}, A_{j}*]", a @ a.conj().T - a.conj().T @ a)
    parts.append(CheckReport("B* - C", float(np.max(np.abs(B.conj().T - C))), tol))
    params = {"flow": flow.name, "dimension": int(B.shape[0])}
    if isinstance(rep, CylinderRep):
        params["verified_band"] = f"|n| <= {rep.M - INTERIOR_MARGIN}"
        params["excluded_band"] = f"{rep.M - INTERIOR_MARGIN} < |n| <= {rep.M}"
    return combine("relations", parts, tol, **params)


def sklyanin_generators(rep: _Rep):
    """Recover the Hermitian ``S_0..S_3`` from ``A``, ``B``, ``C``."""
    if rep.flow.name != "sklyanin":
        raise InputError("not a Sklyanin representation")
    phi = rep.flow.params["phi"]
    r = math.tan(phi / 2)
    (A,), B, C = rep.matrices()
    As = A.conj().T
    S1 = (B + C) / 2
    S2 = (C - B) / 2j
    S3 = (A + As) / (2 * math.sqrt(r))
    S0 = math.sqrt(r) * (A - As) / 2j
    return S0, S1, S2, S3, r


def verify_sklyanin_original(rep: _Rep, tol: float = 1e-11) -> CheckReport:
    """The six quadratic bracket relations of the ``S_j`` and the relations in ``A, B, C`` form."""
    S0, S1, S2, S3, r = sklyanin_generators(rep)
    (A,), B, C = rep.matrices()
    As = A.conj().T
    q = complex(np.exp(1j * rep.flow.params["phi"]))
    cols = rep.interior()

    def comm(X, Y):
        return X @ Y - Y @ X

    def acomm(X, Y):
        return X @ Y + Y @ X

    rels = {
        "[S1,S2] - i{S0,S3}": comm(S1, S2) - 1j * acomm(S0, S3),
        "[S2,S3] - i{S0,S1}": comm(S2, S3) - 1j * acomm(S0, S1),
        "[S3,S1] - i{S0,S2}": comm(S3, S1) - 1j * acomm(S0, S2),
        "[S0,S1] + i r^2{S2,S3}": comm(S0, S1) + 1j * r * r * acomm(S2, S3),
        "[S0,S2] - i r^2{S3,S1}": comm(S0, S2) - 1j * r * r * acomm(S3, S1),
        "[S0,S3]": comm(S0, S3),
        "[C,B] + i(A^2 - A*^2)": comm(C, B) + 1j * (A @ A - As @ As),
        "[A,A*]": comm(A, As),
        "CA - qAC": C @ A - q * A @ C,
        "AB - qBA": A @ B - q * B @ A,
        "B* - C": B.conj().T - C,
    }
    if isinstance(rep, CylinderRep):
        # the brackets reach two steps out, keep one more layer
        cols = cols & (np.abs(rep.indices) <= rep.M - INTERIOR_MARGIN - 1)
    parts = [CheckReport(k, _col_residual(v, cols), tol) for k, v in rels.items()]
    return combine("sklyanin_original", parts, tol, r=r)


def casimir_scalars(rep: _Rep, flow: DeformationFlow | None = None):
    """``[(name, mean value, max deviation from a scalar)]`` for every Casimir of the flow.

    Torus representations also report the nonclassical scalars ``B^N`` and ``A_j^N``.
    """
    flow = flow or rep.flow
    A, B, C = rep.matrices()
    cols = rep.interior()
    BC = np.real(np.diag(B @ C))
    A_diags = np.array([np.diag(a) for a in A])
    out = []
    for name, fn in flow.casimirs.items():
        vals = np.asarray(fn(BC, A_diags), dtype=complex)[cols]
        mean = complex(np.mean(vals))
        out.append((name, mean, float(np.max(np.abs(vals - mean)))))
    if isinstance(rep, TorusRep):
        I = np.eye(rep.N)
        for name, X in [("B^N", B)] + [(f"A_{j}^N", a) for j, a in enumerate(A)]:
            P = np.linalg.matrix_power(X, rep.N)
            value = complex(np.trace(P) / rep.N)
            out.append((name, value, float(np.max(np.abs(P - value * I)))))
    return out


def expected_beta(rep: TorusRep) -> complex:
    """``F_!(N hbar)^{1/2} e^{i alpha}`` from the profile on the lattice."""
    n = np.arange(1, rep.N + 1)
    F = surface_profile(rep.flow, n * rep.hbar)
    return complex(math.exp(0.5 * float(np.sum(np.log(F)))) * np.exp(1j * rep.alpha))


def fiducial_state(rep: _Rep, tol: float = 1e-10) -> np.ndarray:
    """Coefficients of the fiducial state: the basis vector ``n = 0``.

    Raises
    ------
    ConstructionError
        It fails to be a joint eigenvector with eigenvalues ``(a0, a)``.
    """
    A, B, C = rep.matrices()
    size = B.shape[0]
    v = np.zeros(size, dtype=complex)
    v[rep.index_of(0)] = 1.0
    res = float(np.max(np.abs(B @ (C @ v) - rep.flow.a0 * v)))
    for a, aj in zip(A, rep.flow.a):
        res = max(res, float(np.max(np.abs(a @ v - aj * v))))
    res = max(res, abs(np.linalg.norm(v) - 1.0))
    if res > tol:
        raise ConstructionError(f"fiducial state eigen-residual {res:.2e} exceeds {tol:.0e}")
    return v


def spectral_invariants(rep: _Rep):
    """Sorted spectra of ``A_j`` and ``BC``; unitarily equivalent reps share them."""
    A, B, C = rep.matrices()
    key = lambda z: (round(z.real, 9), round(z.imag, 9))
    specs = [sorted(np.linalg.eigvals(a), key=key) for a in A]
    specs.append(sorted(np.linalg.eigvals(B @ C), key=key))
    return [np.array(s) for s in specs]


# ---------------------------------------------------------------------------
# functional model on monomials


@dataclass(frozen=True)
class MonomialAction:
    """Action of the generators on monomials ``e^{m zbar}`` from the exponential-operator form.

    ``B e^{m zbar} = B((m+1) hbar) exp(-tau hbar (m + 1/2)) e^{(m+1) zbar}``,
    ``C e^{m zbar} = C(m hbar) exp(tau hbar (m - 1/2)) e^{(m-1) zbar}``,
    ``A e^{m zbar} = phi_{m hbar}(a0, a) e^{m zbar}``.
    """

    flow: DeformationFlow
    fact: FactorizationData
    extras: dict = field(default_factory=dict)

    def log_coefficient(self, m) -> np.ndarray:
        m = np.asarray(m)
        return -self.fact.tau * self.flow.hbar * m * m / 2 - self.fact.nu_factorial.log(m)

    def coefficient(self, m) -> np.ndarray:
        """``c_m``: the orthonormal basis vector is ``c_m e^{m zbar}``."""
        return np.exp(self.log_coefficient(m))

    def matrices(self, lo: int, hi: int):
        """Matrices on monomial coefficients for ``m in [lo, hi]`` (truncated at the ends)."""
        m = np.arange(lo, hi + 1)
        hb, tau = self.flow.hbar, self.fact.tau
        size = m.size
        B = np.zeros((size, size), dtype=complex)
        C = np.zeros((size, size), dtype=complex)
        i = np.arange(size - 1)
        B[i + 1, i] = self.fact.factor_B((m[:-1] + 1) * hb) * np.exp(-tau * hb * (m[:-1] + 0.5))
        C[i, i + 1] = self.fact.factor_C(m[1:] * hb) * np.exp(tau * hb * (m[1:] - 0.5))
        A = tuple(np.diag(d) for d in _diag_A(self.flow, m))
        return A, B, C

    def in_orthonormal_basis(self, lo: int, hi: int):
        """Conjugate the monomial matrices by ``diag(c_m)``.

        Entries are rescaled by ``c_j / c_i`` formed in log space, so large
        windows do not underflow.
        """
        logc = self.log_coefficient(np.arange(lo, hi + 1))
        A, B, C = self.matrices(lo, hi)

        def conj(X):
            out = np.zeros_like(X)
            nz = X != 0
            i, j = np.nonzero(nz)
            out[i, j] = X[i, j] * np.exp(logc[j] - logc[i])
            return out

        return tuple(conj(a) for a in A), conj(B), conj(C)


def su11_explicit_operators(a: float, lam: float, hbar: float, tau: float, lo: int, hi: int):
    """Matrices of ``A = a + hbar d``, ``B = (A - hbar/2 - i lam) exp(zbar - tau hbar d)``,
    ``C = exp(tau hbar d - zbar)(A - hbar/2 + i lam)`` on monomial coefficients.

    The exponentials are split with ``e^{X+Y} = e^X e^Y e^{-[X,Y]/2}``.
    """
    m = np.arange(lo, hi + 1)
    size = m.size
    Ad = a + hbar * m
    # exp(zbar - tau hbar d) = e^{zbar} e^{-tau hbar d} e^{-tau hbar/2}
    E_up = np.zeros((size, size))
    E_up[np.arange(1, size), np.arange(size - 1)] = np.exp(-tau * hbar * m[:-1]) * math.exp(-tau * hbar / 2)
    # exp(tau hbar d - zbar) = e^{-zbar} e^{tau hbar d} e^{-tau hbar/2}
    E_down = np.zeros((size, size))
    E_down[np.arange(size - 1), np.arange(1, size)] = np.exp(tau * hbar * m[1:]) * math.exp(-tau * hbar / 2)
    A = np.diag(Ad + 0j)
    I = np.eye(size)
    B = (A - (hbar / 2 + 1j * lam) * I) @ E_up
    C = E_down @ (A - (hbar / 2 - 1j * lam) * I)
    return A, B, C

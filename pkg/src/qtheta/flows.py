"""Deformation flows, their Casimirs, and the geometry of the leaf they sweep.

A flow is a one-parameter group ``Phi_t(A0, A) = (phi0_t(A0, A), phi_t(A0, A))``
supplied as vectorized evaluators.  ``A`` is a length-``k`` complex vector;
flows whose generators are Hermitian keep ``A`` real (``real_vector=True``).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import ParameterError, UnsupportedSurfaceError


@dataclass(frozen=True)
class DeformationFlow:
    """One-parameter deformation flow with a chosen base point.

    ``zero_component(t, A0, A)`` and ``vector_component(t, A0, A)`` must
    broadcast over arrays: ``A0`` of shape ``s`` pairs with ``A`` of shape
    ``(k,) + s``.
    """

    zero_component: Callable
    vector_component: Callable
    k: int
    hbar: float
    base_point: tuple[float, tuple[complex, ...]]
    casimirs: dict[str, Callable] = field(default_factory=dict)
    real_vector: bool = True
    name: str = "flow"
    params: dict = field(default_factory=dict)

    @property
    def a0(self) -> float:
        return float(self.base_point[0])

    @property
    def a(self) -> np.ndarray:
        return np.asarray(self.base_point[1], dtype=complex)

    def __call__(self, t, A0=None, A=None):
        """Apply ``Phi_t``; defaults to the base point."""
        if A0 is None:
            A0 = self.a0
        if A is None:
            A = self.a
        A = np.asarray(A, dtype=complex)
        return self.zero_component(t, A0, A), self.vector_component(t, A0, A)

    def trajectory(self, t):
        """``(F(t), phi_t(a0, a))`` along the base-point orbit for an array ``t``."""
        t = np.asarray(t, dtype=float)
        a = self.a.reshape((self.k,) + (1,) * t.ndim)
        a0 = np.full(t.shape, self.a0)
        A = np.broadcast_to(a, (self.k,) + t.shape)
        return self.zero_component(t, a0, A), self.vector_component(t, a0, A)


class SurfaceKind(str, enum.Enum):
    PLANE = "plane"
    SPHERE = "sphere"
    CYLINDER = "cylinder"
    TORUS = "torus"


@dataclass(frozen=True)
class SurfaceClass:
    kind: SurfaceKind
    period: float | None = None
    minimal_period: float | None = None
    resonance: tuple[int, int] | None = None


def surface_profile(flow: DeformationFlow, t):
    """``F(t) = phi0_t(a0, a)``, the squared radius of the leaf at height ``t``."""
    F, _ = flow.trajectory(t)
    return np.real(F) if np.ndim(t) else float(np.real(F))


def _return_distance(flow: DeformationFlow, T) -> np.ndarray:
    F, A = flow.trajectory(np.atleast_1d(T))
    dA = A - flow.a.reshape(-1, 1)
    return np.sqrt(np.abs(F - flow.a0) ** 2 + np.sum(np.abs(dA) ** 2, axis=0))


def _return_residual(flow: DeformationFlow, T: float) -> np.ndarray:
    F, A = flow.trajectory(np.array([T]))
    dA = (A[:, 0] - flow.a)
    return np.concatenate([[F[0] - flow.a0], dA.real, dA.imag])


def find_period(flow: DeformationFlow, samples: int = 20000, tol: float = 1e-9) -> float | None:
    """First return time of the base-point orbit in ``[hbar/10, 1000 hbar]``.

    Local minima of the return distance on a sample grid are refined by
    Gauss-Newton iterations on the residual vector ``Phi_T(a0, a) - (a0, a)``,
    which reaches the period to a few ulps.
    """
    h = flow.hbar
    grid = np.linspace(h / 10.0, 1000.0 * h, samples)
    d = _return_distance(flow, grid)
    scale = 1.0 + abs(flow.a0) + float(np.linalg.norm(flow.a))
    step = grid[1] - grid[0]
    for i in range(1, samples - 1):
        if not (d[i] <= d[i - 1] and d[i] <= d[i + 1] and d[i] < 0.5 * scale):
            continue
        T = optimize.minimize_scalar(lambda s: _return_distance(flow, s)[0],
                                     bounds=(grid[i] - step, grid[i] + step), method="bounded",
                                     options={"xatol": 1e-12}).x
        for _ in range(30):
            r = _return_residual(flow, T)
            e = 1e-6 * max(1.0, abs(T))
            dr = (_return_residual(flow, T + e) - _return_residual(flow, T - e)) / (2 * e)
            denom = float(dr @ dr)
            if denom == 0.0:
                break
            dT = -float(r @ dr) / denom
            T += dT
            if abs(dT) <= 4e-16 * abs(T):
                break
        if np.linalg.norm(_return_residual(flow, T)) < tol * scale:
            return float(T)
    return None


def detect_resonance(T: float, hbar: float, tol: float = 1e-14,
                     max_denominator: int = 1_000_000) -> tuple[int, int] | None:
    """Write ``T/hbar`` as ``N/m`` with coprime integers, if it is rational.

    Continued-fraction convergents are scanned in order; the first one within
    ``tol`` (relative) is returned.  ``None`` means no convergent with
    denominator up to ``max_denominator`` is that close, i.e. the period and
    ``hbar`` are treated as incommensurable.
    """
    if not (T > 0 and hbar > 0):
        raise ParameterError("T and hbar must be positive")
    ratio = T / hbar
    # convergents p_k/q_k of the continued fraction of ratio
    p_prev, p = 1, int(math.floor(ratio))
    q_prev, q = 0, 1
    rest = ratio - math.floor(ratio)
    while q <= max_denominator:
        if abs(ratio - p / q) <= tol * ratio:
            f = Fraction(p, q)
            return f.numerator, f.denominator
        if rest < 1e-300:
            break
        x = 1.0 / rest
        a = int(math.floor(x))
        rest = x - a
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
    return None


def classify_surface(flow: DeformationFlow, t_min: float = -50.0, t_max: float = 50.0,
                     samples: int = 2001, resonance_tol: float = 1e-14) -> SurfaceClass:
    """Decide the topology of the leaf swept by the base-point orbit.

    ``a0 = 0``: plane when ``F`` stays positive on one side of ``t = 0`` over
    the scan, sphere when it returns to zero there.  ``a0 > 0``: cylinder,
    or torus when the orbit returns to the base point.
    """
    if samples < 100:
        raise ParameterError("classify_surface needs at least 100 samples")
    t = np.linspace(t_min, t_max, samples)
    F = surface_profile(flow, t)
    a0 = flow.a0
    scale = 1.0 + abs(a0)
    if abs(a0) <= 1e-14 * scale:
        pos = t > 0
        neg = t < 0
        right = F[pos]
        left = F[neg][::-1]  # ordered outward from t = 0
        if np.all(right > 0) or np.all(left > 0):
            return SurfaceClass(SurfaceKind.PLANE)
        for branch in (right, left):
            if branch[0] > 0:
                return SurfaceClass(SurfaceKind.SPHERE)
        raise UnsupportedSurfaceError("a0 = 0 but F changes sign on both sides of t = 0")
    if a0 < 0:
        raise UnsupportedSurfaceError("a0 must be non-negative")
    if np.any(F <= 0):
        bad = t[np.argmax(F <= 0)]
        raise UnsupportedSurfaceError(f"F(t) <= 0 at t = {bad:g}: degenerate leaf")
    T0 = find_period(flow)
    if T0 is None:
        return SurfaceClass(SurfaceKind.CYLINDER)
    res = detect_resonance(T0, flow.hbar, tol=resonance_tol)
    if res is None:
        return SurfaceClass(SurfaceKind.TORUS, period=T0, minimal_period=T0)
    N, m = res
    return SurfaceClass(SurfaceKind.TORUS, period=N * flow.hbar, minimal_period=T0,
                        resonance=(N, m))


# ---------------------------------------------------------------------------
# example flows


def sklyanin_flow(phi: float, kappa1: float, psi: float, a0: float) -> DeformationFlow:
    """Flow of the degenerate Sklyanin algebra, ``hbar = 1``.

    ``Phi_t(A0, A) = (A0 + [qbar (q^{2t} - 1) A^2 + c.c.] / (i (q - qbar)), q^t A)``
    with ``q = e^{i phi}``.  ``A`` is a single complex coordinate.
    """
    if not 0 < phi < math.pi:
        raise ParameterError(f"phi must lie in (0, pi), got {phi!r}")
    if not kappa1 > 0:
        raise ParameterError("kappa1 must be positive")
    bound = kappa1 * (1.0 - math.cos(psi - phi)) / math.sin(phi)
    if not a0 > bound:
        raise ParameterError(f"a0 = {a0!r} must exceed kappa1 (1 - cos(psi - phi)) / sin(phi) = {bound!r}")
    q = complex(math.cos(phi), math.sin(phi))
    denom = 1j * (q - q.conjugate())

    def zero(t, A0, A):
        A1 = A[0]
        q2t = np.exp(2j * phi * np.asarray(t, dtype=float))
        corr = (q.conjugate() * (q2t - 1) * A1 ** 2 + q * (np.conj(q2t) - 1) * np.conj(A1) ** 2) / denom
        return np.real(A0 + corr)

    def vector(t, A0, A):
        return np.exp(1j * phi * np.asarray(t, dtype=float)) * np.asarray(A, dtype=complex)

    def kappa0(A0, A):
        A1 = A[0]
        return np.real(A0 - (q.conjugate() * A1 ** 2 + q * np.conj(A1) ** 2) / denom)

    def kappa1_fn(A0, A):
        return np.real(A[0] * np.conj(A[0]))

    a = math.sqrt(kappa1) * complex(math.cos(psi / 2), math.sin(psi / 2))
    return DeformationFlow(zero, vector, 1, 1.0, (float(a0), (a,)),
                           casimirs={"kappa0": kappa0, "kappa1": kappa1_fn},
                           real_vector=False, name="sklyanin",
                           params=dict(phi=phi, kappa1=kappa1, psi=psi, a0=a0))


def su11_flow(a0: float, a: float, hbar: float) -> DeformationFlow:
    """``Phi_t(A0, A) = (t^2 + t (2A - hbar) + A0, A + t)`` of the su(1,1) relations."""
    if not hbar > 0:
        raise ParameterError("hbar must be positive")
    lam2 = a0 - (a - hbar / 2) ** 2
    if not lam2 > 0:
        raise ParameterError(f"lambda^2 = a0 - (a - hbar/2)^2 = {lam2!r} must be positive")

    def zero(t, A0, A):
        t = np.asarray(t, dtype=float)
        return np.real(t * t + t * (2 * np.real(A[0]) - hbar) + A0)

    def vector(t, A0, A):
        return np.asarray(A, dtype=complex) + np.asarray(t, dtype=float)

    def casimir(A0, A):
        return np.real(A0 - (np.real(A[0]) - hbar / 2) ** 2)

    return DeformationFlow(zero, vector, 1, float(hbar), (float(a0), (complex(a),)),
                           casimirs={"hyperboloid": casimir}, real_vector=True,
                           name="su11", params=dict(a0=a0, a=a, hbar=hbar))


def rotation_flow(omega: float, a0: float, a: complex, hbar: float = 1.0) -> DeformationFlow:
    """``Phi_t(A0, A) = (A0, e^{i omega t} A)``: a flat torus of radius ``sqrt(a0)``.

    The smallest example with a resonant period (``omega = pi`` gives
    ``T = 2``), useful where the Sklyanin family degenerates.
    """
    if not a0 > 0:
        raise ParameterError("a0 must be positive")

    def zero(t, A0, A):
        return np.real(np.asarray(A0, dtype=float) + 0.0 * np.asarray(t, dtype=float))

    def vector(t, A0, A):
        return np.exp(1j * omega * np.asarray(t, dtype=float)) * np.asarray(A, dtype=complex)

    return DeformationFlow(zero, vector, 1, float(hbar), (float(a0), (complex(a),)),
                           casimirs={"A0": lambda A0, A: np.real(A0),
                                     "modulus": lambda A0, A: np.real(A[0] * np.conj(A[0]))},
                           real_vector=False, name="rotation",
                           params=dict(omega=omega, a0=a0, a=a, hbar=hbar))


def group_law_residual(flow: DeformationFlow, ts: Sequence[float], ss: Sequence[float]) -> float:
    """Max componentwise ``|Phi_{t+s} - Phi_t o Phi_s|`` at the base point."""
    worst = 0.0
    for t, s in zip(ts, ss):
        F_s, A_s = flow(s)
        F_ts, A_ts = flow(t, F_s, A_s)
        F_d, A_d = flow(t + s)
        worst = max(worst, abs(F_ts - F_d), float(np.max(np.abs(np.asarray(A_ts) - np.asarray(A_d)))))
    return worst


def casimir_drift(flow: DeformationFlow, t) -> dict[str, float]:
    """Max variation of each Casimir along the base-point orbit."""
    F, A = flow.trajectory(np.asarray(t, dtype=float))
    out = {}
    for name, fn in flow.casimirs.items():
        vals = np.asarray(fn(F, A))
        ref = fn(flow.a0, flow.a.reshape(-1))
        out[name] = float(np.max(np.abs(vals - ref)))
    return out

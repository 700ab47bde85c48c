"""Reproducing kernels, the functions ``q`` and ``p``, Kähler densities and integral norms.

Conventions
-----------
Points of the leaf carry ``zbar = tau t + g(t) + i s``; we write
``z = u + i v`` so that ``zbar = u - i v`` and ``x = zbar + z = 2u``.
Area elements use ``dzbar dz = 2 du dv`` (a positive measure); the
Kähler form ``i hbar dbar d ln K dzbar ^ dz`` has ``(t, s)`` density
``2 hbar (tau + Re g') dbar d ln K`` with ``dbar d = (1/4) Laplacian(u, v)``.

With these conventions the integral norm reads

    ||psi||^2 = (1/2 pi) int |psi|^2 p(2u) exp(-u^2/(hbar tau)) / sqrt(4 pi hbar tau) 2 du dv,

and the same weight (including the ``1/(2 pi hbar)`` in front of the
reproducing measure) drives the coherent transform.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import ConvergenceError, InputError, ParameterError
from .factorization import FactorizationData, resonant_normalization_residual
from .reports import CheckReport, combine
from .theta import WeightSequence, _modified_window, theta, theta_log_d2, theta_mod, theta_sharp

MIN_GRID = 64
TAIL_TOL = 1e-12
P_TOL = 1e-9
HERMITE_START = 32
HERMITE_MAX = 512


class Geometry(str, enum.Enum):
    CYLINDER = "cylinder"
    TORUS = "torus"


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid in ``(u, v)``; ``v`` always spans ``[0, 2 pi)``.

    Nodes are equispaced with the right end excluded, so the trapezoid rule
    is the plain mean on periodic directions.
    """

    u_min: float
    u_max: float
    n_u: int = 128
    n_v: int = 128
    orientation_sign: int = 1

    def __post_init__(self):
        if self.n_u < MIN_GRID or self.n_v < MIN_GRID:
            raise ParameterError(f"grid needs at least {MIN_GRID} points per direction")
        if not self.u_max > self.u_min:
            raise ParameterError("u_max must exceed u_min")
        if self.orientation_sign not in (1, -1):
            raise ParameterError("orientation_sign must be +1 or -1")

    @property
    def du(self) -> float:
        return (self.u_max - self.u_min) / self.n_u

    @property
    def dv(self) -> float:
        return 2 * math.pi / self.n_v

    def u_nodes(self) -> np.ndarray:
        return self.u_min + self.du * np.arange(self.n_u)

    def v_nodes(self) -> np.ndarray:
        return self.dv * np.arange(self.n_v)

    def mesh(self):
        return np.meshgrid(self.u_nodes(), self.v_nodes(), indexing="ij")


@dataclass(frozen=True)
class KernelContext:
    """Geometry plus complex-structure data needed by every kernel computation.

    ``weights`` is the sequence ``|nu_!(n hbar)|^2``: the kernel series has
    coefficients ``1 / weights``.
    """

    geometry: Geometry
    fact: FactorizationData
    weights: WeightSequence
    grid: GridSpec | None = None
    N: int | None = None
    m: int = 1
    threads: int = 1
    extras: dict = field(default_factory=dict)

    @property
    def hbar(self) -> float:
        return self.fact.hbar

    @property
    def tau(self) -> float:
        return self.fact.tau

    @property
    def eps(self) -> float:
        return self.tau * self.hbar

    @property
    def nu_is_unit(self) -> bool:
        return self.fact.nu_is_unit

    def default_grid(self, n_u: int = 128, n_v: int = 128) -> GridSpec:
        if self.grid is not None:
            return self.grid
        if self.geometry is Geometry.TORUS:
            return GridSpec(0.0, self.eps * self.N, n_u, n_v)
        W = math.sqrt(self.eps * -math.log(TAIL_TOL)) + 1.0
        return GridSpec(-W, W, n_u, n_v)


def cylinder_context(fact: FactorizationData, grid: GridSpec | None = None, threads: int = 1) -> KernelContext:
    return KernelContext(Geometry.CYLINDER, fact, fact.kernel_weights(), grid, threads=threads)


def torus_context(fact: FactorizationData, N: int, m: int = 1, grid: GridSpec | None = None,
                  threads: int = 1, tol: float = 1e-10) -> KernelContext:
    """Context on a resonant torus; ``fact`` must be normalized for period ``N hbar``.

    Raises
    ------
    ParameterError
        The resonant normalization does not hold, or ``nu_!(N hbar) != 1``.
    """
    if fact.alpha is None:
        raise ParameterError("torus kernels need a factorization normalized with some alpha")
    mod_res, phase_res = resonant_normalization_residual(fact, N, fact.alpha)
    nuN = complex(fact.nu_factorial(np.array([N]))[0])
    if max(mod_res, phase_res, abs(nuN - 1.0)) > tol:
        raise ParameterError("factorization is not normalized for this period")
    return KernelContext(Geometry.TORUS, fact, fact.kernel_weights(), grid, N=int(N), m=int(m),
                         threads=threads)


def _parallel_rows(fn, rows: list, threads: int):
    """Map ``fn`` over fixed chunks; the chunking never depends on ``threads``."""
    if threads <= 1 or len(rows) < 2:
        return [fn(r) for r in rows]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, rows))


# ---------------------------------------------------------------------------
# cylinder kernel


def kernel_cylinder(ctx: KernelContext, zbar, z):
    """``K(zbar|z) = sum_n |nu_!(n hbar)|^-2 exp(-tau hbar n^2 + n (zbar + z))``."""
    alpha = (np.asarray(zbar, dtype=complex) + np.asarray(z, dtype=complex)) / 1j
    return theta_mod(alpha, ctx.eps, ctx.weights)


def log_kernel_diagonal(ctx: KernelContext, x) -> np.ndarray:
    """``ln K(x)`` on the cylinder diagonal, by a shifted log-sum (no overflow)."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    eps = ctx.eps
    width = int(math.ceil(math.sqrt(40.0 / eps))) + 5
    if ctx.weights.is_unit:
        lo = int(math.floor(xs.min() / (2 * eps))) - width
        hi = int(math.ceil(xs.max() / (2 * eps))) + width
        n = np.arange(lo, hi + 1)
        lw = np.zeros(n.shape)
    else:
        n = _modified_window(-1j * xs, eps, ctx.weights, 1e-17)
        lw = ctx.weights.log(n).real
    expo = -lw[None, :] - eps * n * n + np.multiply.outer(xs, n)
    top = expo.max(axis=1)
    out = top + np.log(np.exp(expo - top[:, None]).sum(axis=1))
    return out if np.ndim(x) else float(out[0])


def cylinder_basis(ctx: KernelContext, zbar, n) -> np.ndarray:
    """``e^(n)(zbar) = nu_!(n hbar)^-1 exp(-tau hbar n^2 / 2 + n zbar)``; shape ``zbar.shape + (len(n),)``."""
    zb = np.asarray(zbar, dtype=complex)
    n = np.asarray(n)
    lognu = ctx.fact.nu_factorial.log(n)
    return np.exp(-lognu - ctx.eps * n * n / 2 + np.multiply.outer(zb, n))


# ---------------------------------------------------------------------------
# torus kernel


def torus_basis(ctx: KernelContext, zbar) -> np.ndarray:
    """Quasiperiodic basis ``e^(n)(zbar)``, ``n = 0..N-1``, from theta evaluations."""
    _need_torus(ctx)
    N, eps = ctx.N, ctx.eps
    zb = np.asarray(zbar, dtype=complex)
    n = np.arange(N)
    lognu = ctx.fact.nu_factorial.log(n)
    cols = []
    for k in n:
        th = theta(N * (zb - eps * k) / 1j, eps * N * N / 2)
        cols.append(np.exp(-lognu[k] - eps * k * k / 2 + k * zb) * th)
    return np.stack(cols, axis=-1)


def _need_torus(ctx: KernelContext) -> None:
    if ctx.geometry is not Geometry.TORUS:
        raise InputError("operation needs a torus context")


def _torus_lattice(ctx: KernelContext, zbar, deriv: bool = False):
    """Basis values (and ``d/dzbar``) by direct lattice sums scaled by ``exp(-u^2 / 2 tau hbar)``.

    Returns arrays of shape ``(P, N)`` for flattened points.  The common
    real scale cancels in ``dbar d ln K``.
    """
    N, eps = ctx.N, ctx.eps
    zb = np.atleast_1d(np.asarray(zbar, dtype=complex)).ravel()
    u = zb.real
    width = int(math.ceil(math.sqrt(2 * 42.0 / eps))) + 3
    lo = (int(math.floor(u.min() / eps)) - width) // N * N
    hi = (int(math.ceil(u.max() / eps)) + width) // N * N + N
    m = np.arange(lo, hi)
    c = u / eps
    expo = -eps / 2 * (m[None, :] - c[:, None]) ** 2 + 1j * np.multiply.outer(zb.imag, m)
    terms = np.exp(expo)
    K = m.size // N
    lognu = ctx.fact.nu_factorial.log(np.arange(N))
    scale = np.exp(-lognu)
    F = terms.reshape(len(zb), K, N).sum(axis=1) * scale
    if not deriv:
        return F
    dF = (terms * m[None, :]).reshape(len(zb), K, N).sum(axis=1) * scale
    return F, dF


def kernel_torus(ctx: KernelContext, zbar, z, method: str = "basis"):
    """``K^N(zbar|z)`` by the basis sum, the quantum-Fourier sum or the closed product form.

    ``method="product"`` is available for ``nu = 1`` only: odd ``N`` uses the
    two-term ``theta theta + theta# theta#`` formula and even ``N`` the single
    product (the parity assignment that the series actually satisfies).
    """
    _need_torus(ctx)
    zb = np.asarray(zbar, dtype=complex)
    zz = np.asarray(z, dtype=complex)
    N, eps = ctx.N, ctx.eps
    if method == "basis":
        E1 = torus_basis(ctx, zb)
        E2 = torus_basis(ctx, np.conj(zz))
        return np.sum(E1 * np.conj(E2), axis=-1)
    if method == "fourier":
        w = ctx.fact.nu_factorial
        total = 0
        for n in range(N):
            a1 = zb / 1j + 2 * math.pi * n / N
            a2 = np.conj(zz) / 1j + 2 * math.pi * n / N
            total = total + theta_mod(a1, eps / 2, w) * np.conj(theta_mod(a2, eps / 2, w))
        return total / N
    if method == "product":
        if not ctx.nu_is_unit:
            raise InputError("the closed product form holds for nu = 1 only")
        s = (zb + zz) / 1j
        d = (zb - zz) / 1j
        if N % 2 == 0:
            return theta(s, eps) * theta(N * d / 2, eps * N * N / 4)
        return theta(s, eps) * theta(N * d, eps * N * N) + theta_sharp(s, eps) * theta_sharp(N * d, eps * N * N)
    raise ValueError(f"unknown method {method!r}")


def kernel(ctx: KernelContext, zbar, z):
    if ctx.geometry is Geometry.TORUS:
        return kernel_torus(ctx, zbar, z)
    return kernel_cylinder(ctx, zbar, z)


def kernel_torus_difference_system_check(ctx: KernelContext, grid: GridSpec | None = None,
                                         tol: float = 1e-9, n_points: int = 64) -> CheckReport:
    """Residuals of the difference system characterizing ``K^N(zbar|w)``.

    The shift equation ``|nu|^-2(hbar d) exp{zbar + w - tau hbar (d + d_w)} K = K``
    is evaluated as ``exp(zbar + w - tau hbar) K(zbar - tau hbar | w - tau hbar)``
    followed by the Fourier multiplier ``|nu(k hbar)|^-2`` in the
    ``Im zbar`` direction (exact for the band-limited kernel).  The other
    conditions are pointwise, and the double average uses the trapezoid rule
    (exact for trigonometric polynomials of low degree).
    """
    _need_torus(ctx)
    N, eps, hb = ctx.N, ctx.eps, ctx.hbar
    rng = np.random.default_rng(20240611)
    u0 = rng.uniform(0, eps * N, 4)
    w = rng.uniform(0, eps * N, 4) + 1j * rng.uniform(0, 2 * math.pi, 4)
    nalpha = max(n_points, 4 * int(math.ceil(math.sqrt(80.0 / eps))) + 8)
    alpha = 2 * math.pi * np.arange(nalpha) / nalpha
    k = np.fft.fftfreq(nalpha, d=1.0 / nalpha).astype(int)
    mult = np.abs(ctx.fact.nu(k * hb)) ** -2 if not ctx.nu_is_unit else np.ones(nalpha)

    def Kw(zb, ww):
        # K(zbar|w) holomorphic in w: sum_n e_n(zbar) conj(e_n(conj w))
        return np.sum(torus_basis(ctx, zb) * np.conj(torus_basis(ctx, np.conj(ww))), axis=-1)

    shift_res = period_res = quasi_res = sym_res = 0.0
    for uu, ww in zip(u0, w):
        zb = uu + 1j * alpha
        base = Kw(zb, ww)
        scale = np.max(np.abs(base))
        L = np.exp(zb + ww - eps) * Kw(zb - eps, ww - eps)
        # Fourier multiplier in alpha: e^{k zbar} = e^{k u} e^{i k alpha}
        coeff = np.fft.fft(L)
        L2 = np.fft.ifft(coeff * mult)
        shift_res = max(shift_res, float(np.max(np.abs(L2 - base)) / scale))
        period_res = max(period_res, float(np.max(np.abs(Kw(zb + 2j * math.pi, ww) - base)) / scale))
        q = np.exp(N * zb - N * N * eps / 2) * Kw(zb - N * eps, ww)
        quasi_res = max(quasi_res, float(np.max(np.abs(q - base)) / scale))
        sym = Kw(zb + 2j * math.pi / N, ww) - Kw(zb, ww + 2j * math.pi / N)
        sym_res = max(sym_res, float(np.max(np.abs(sym)) / scale))
    A, Bm = np.meshgrid(alpha, alpha, indexing="ij")
    avg = complex(np.mean(Kw(1j * A, 1j * Bm)))
    parts = [
        CheckReport("shift equation", shift_res, tol),
        CheckReport("2 pi i periodicity", period_res, tol),
        CheckReport("N-quasiperiodicity", quasi_res, tol),
        CheckReport("2 pi i / N symmetry", sym_res, tol),
        CheckReport("double average", abs(avg - 1.0), tol),
    ]
    return combine("difference_system", parts, tol, N=N)


# ---------------------------------------------------------------------------
# q and p


def q_function(ctx: KernelContext, x, v=0.0):
    """``q(x) = sqrt(tau hbar / pi) exp(-x^2 / 4 tau hbar) K`` (``v`` is used on the torus only)."""
    eps = ctx.eps
    xs = np.asarray(x, dtype=float)
    if ctx.geometry is Geometry.CYLINDER:
        return np.exp(0.5 * math.log(eps / math.pi) - xs * xs / (4 * eps) + log_kernel_diagonal(ctx, xs))
    zb = np.asarray(xs / 2 - 1j * np.asarray(v, dtype=float))
    F = _torus_lattice(ctx, zb.ravel())
    val = math.sqrt(eps / math.pi) * np.sum(np.abs(F) ** 2, axis=-1)
    return val.reshape(zb.shape) if zb.ndim else float(val[0])


def q_unit_closed(ctx: KernelContext, x):
    """``theta(pi x / tau hbar, pi^2 / tau hbar)``: the ``nu = 1`` value of ``q``."""
    eps = ctx.eps
    return np.real(theta(math.pi * np.asarray(x, dtype=float) / eps, math.pi ** 2 / eps))


def _abs_factorial_sq(fact: FactorizationData):
    if fact.abs_factorial_sq is not None:
        return fact.abs_factorial_sq
    cont = fact.nu_factorial.continuous
    if cont is None:
        raise InputError("p needs the continuation of |nu|_!^2 (abs_factorial_sq or a continuous nu_!)")

    def H(w):
        w = np.asarray(w, dtype=complex)
        return cont(w) * np.conj(cont(np.conj(w)))
    return H


def p_function(ctx: KernelContext, x, tol: float = P_TOL):
    """``p(x) = (pi hbar tau)^-1/2 int exp(-t^2 / hbar tau) |nu|_!((x + 2 i t) / 2 tau)^2 dt``.

    Gauss-Hermite with ``t = sqrt(hbar tau) y``; nodes are doubled from 32
    until successive values differ by less than ``tol`` (relative).

    Raises
    ------
    ConvergenceError
        No agreement up to 512 nodes.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if ctx.nu_is_unit:
        out = np.ones(xs.shape)
        return out if np.ndim(x) else 1.0
    H = _abs_factorial_sq(ctx.fact)
    tau, hb = ctx.tau, ctx.hbar
    prev = None
    n = HERMITE_START
    while n <= HERMITE_MAX:
        y, wts = np.polynomial.hermite.hermgauss(n)
        t = math.sqrt(hb * tau) * y
        w = (xs[:, None] + 2j * t[None, :]) / (2 * tau)
        vals = np.real(H(w) @ wts) / math.sqrt(math.pi)
        if prev is not None and np.all(np.abs(vals - prev) <= tol * np.maximum(np.abs(vals), 1e-300)):
            return vals if np.ndim(x) else float(vals[0])
        prev = vals
        n *= 2
    raise ConvergenceError("p integral did not settle under node doubling up to 512 nodes")


# ---------------------------------------------------------------------------
# Kähler density, measure and quantization


def _coords(ctx: KernelContext, t, s):
    """``(u, v)`` of the point ``(t, s)``: ``zbar = tau t + g(t) + i s = u - i v``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if ctx.fact.g is None:
        if not ctx.nu_is_unit:
            raise InputError("the coordinate map needs g for nu != 1")
        return ctx.tau * t, -s + 0 * t
    g = ctx.fact.g(t)
    return ctx.tau * t + np.real(g), -(s + np.imag(g))


def _jacobian(ctx: KernelContext, t):
    if ctx.fact.g is None and not ctx.nu_is_unit:
        raise InputError("the Jacobian needs g for nu != 1")
    return ctx.fact.jacobian(t)


def ddbar_log_kernel(ctx: KernelContext, u, v=0.0):
    """``dbar d ln K`` at ``z = u + i v`` (depends on ``u`` alone on the cylinder)."""
    u = np.asarray(u, dtype=float)
    if ctx.geometry is Geometry.CYLINDER:
        return theta_log_d2(2 * u, ctx.eps, None if ctx.weights.is_unit else ctx.weights)
    zb = np.asarray(u - 1j * np.asarray(v, dtype=float))
    F, dF = _torus_lattice(ctx, zb.ravel(), deriv=True)
    K = np.sum(np.abs(F) ** 2, axis=-1)
    G = np.sum(np.abs(dF) ** 2, axis=-1)
    X = np.sum(dF * np.conj(F), axis=-1)
    val = (K * G - np.abs(X) ** 2) / (K * K)
    return val.reshape(zb.shape) if zb.ndim else float(val[0])


def kahler_density(ctx: KernelContext, t, s=0.0):
    """Density of the quantum Kähler form in ``(t, s)``: ``2 hbar (tau + Re g') dbar d ln K``."""
    u, v = _coords(ctx, t, s)
    return 2 * ctx.hbar * _jacobian(ctx, t) * ddbar_log_kernel(ctx, u, v)


def kahler_deviation_unit(ctx: KernelContext, t):
    """``density - 1 = 2 tau hbar (ln q)''(x)`` for ``nu = 1`` on the cylinder, from the dual series.

    Evaluated through theta derivatives at ``eps' = pi^2 / tau hbar`` so that
    deviations far below double-precision resolution of ``1`` are resolved.
    """
    if not ctx.nu_is_unit or ctx.geometry is not Geometry.CYLINDER:
        raise InputError("closed deviation is available for nu = 1 on the cylinder")
    eps = ctx.eps
    x = 2 * ctx.tau * np.asarray(t, dtype=float)
    a = math.pi * x / eps
    e2 = math.pi ** 2 / eps
    th = np.real(theta(a, e2))
    d1 = np.real(theta(a, e2, deriv=1))
    d2 = np.real(theta(a, e2, deriv=2))
    lnq2 = (math.pi / eps) ** 2 * (d2 / th - (d1 / th) ** 2)
    return 2 * eps * lnq2


def measure_density(ctx: KernelContext, t, s=0.0):
    """Density of ``dm`` in ``(t, s)``: ``q p (tau + Re g') / tau``."""
    u, v = _coords(ctx, t, s)
    x = 2 * u
    q = q_function(ctx, x) if ctx.geometry is Geometry.CYLINDER else q_function(ctx, x, v)
    return q * p_function(ctx, x) * _jacobian(ctx, t) / ctx.tau


def quantization_integral(ctx: KernelContext, grid: GridSpec | None = None) -> float:
    """``(1/2 pi hbar) int omega`` over the fundamental rectangle (the ``m``-sheet covering).

    In ``(u, v)`` this is ``(1/pi) int dbar d ln K du dv`` over
    ``u in [0, tau hbar N)``, ``v in [0, 2 pi)``; the integrand is periodic in
    both directions, so the equispaced rule converges spectrally.
    """
    _need_torus(ctx)
    grid = grid or ctx.default_grid()
    U, V = grid.mesh()
    rows = list(range(grid.n_u))
    vals = _parallel_rows(lambda i: ddbar_log_kernel(ctx, U[i], V[i]), rows, ctx.threads)
    total = float(np.sum(np.array(vals))) * grid.du * grid.dv
    return grid.orientation_sign * total / math.pi


# ---------------------------------------------------------------------------
# integral norms


def norm_weight(ctx: KernelContext, u) -> np.ndarray:
    """``(1/2 pi) p(2u) exp(-u^2 / hbar tau) / sqrt(4 pi hbar tau) * 2``: weight per ``du dv``."""
    u = np.asarray(u, dtype=float)
    eps = ctx.eps
    return p_function(ctx, 2 * u) * np.exp(-u * u / eps) / math.sqrt(4 * math.pi * eps) * 2 / (2 * math.pi)


def basis_values(ctx: KernelContext, zbar, indices=None) -> np.ndarray:
    """``e^(n)(zbar)`` for the context's basis (``indices`` required on the cylinder)."""
    if ctx.geometry is Geometry.TORUS:
        return torus_basis(ctx, zbar)
    if indices is None:
        raise InputError("cylinder basis needs explicit indices")
    return cylinder_basis(ctx, zbar, indices)


def cylinder_window(ctx: KernelContext, indices, tail: float = TAIL_TOL) -> tuple[float, float]:
    """``u``-window holding all but ``tail`` of the Gaussian mass of the given basis vectors.

    For ``nu != 1`` the window is widened until the weighted integrand of the
    extreme basis vectors falls below ``tail`` at both ends.
    """
    idx = np.asarray(indices)
    eps = ctx.eps
    W = math.sqrt(eps * -math.log(tail)) + 2 * math.sqrt(eps)
    lo, hi = eps * idx.min() - W, eps * idx.max() + W
    if ctx.nu_is_unit:
        return lo, hi
    for _ in range(20):
        ends = np.array([lo, hi])
        prof_lo = norm_weight(ctx, ends) * np.abs(cylinder_basis(ctx, ends, [idx.min()]))[:, 0] ** 2
        prof_hi = norm_weight(ctx, ends) * np.abs(cylinder_basis(ctx, ends, [idx.max()]))[:, 0] ** 2
        if prof_lo[0] < tail and prof_hi[1] < tail:
            return lo, hi
        if prof_lo[0] >= tail:
            lo -= W
        if prof_hi[1] >= tail:
            hi += W
    raise ConvergenceError("could not find a cylinder window with the requested tail")


def cylinder_grid(ctx: KernelContext, indices, tail: float = TAIL_TOL, step: float | None = None) -> GridSpec:
    """Grid for windowed cylinder quadrature: ``du <= 0.2 sqrt(tau hbar)``, ``n_v > 2 max|n - n'|``."""
    lo, hi = cylinder_window(ctx, indices, tail)
    h = step or 0.2 * math.sqrt(ctx.eps)
    n_u = max(MIN_GRID, int(math.ceil((hi - lo) / h)))
    idx = np.asarray(indices)
    n_v = max(MIN_GRID, 2 * int(idx.max() - idx.min()) + 2)
    return GridSpec(lo, hi, n_u, n_v)


def quadrature_nodes(ctx: KernelContext, grid: GridSpec):
    """Flattened ``(zbar, weight)`` pairs for the integral norm on ``grid``."""
    U, V = grid.mesh()
    w = norm_weight(ctx, grid.u_nodes())[:, None] * np.ones(grid.n_v)[None, :]
    return (U - 1j * V).ravel(), (w * grid.du * grid.dv).ravel()


def norm_quadrature(ctx: KernelContext, psi_coefficients, indices=None, grid: GridSpec | None = None) -> float:
    """Squared norm of ``psi = sum_n psi_n e^(n)`` from the integral form.

    On the cylinder ``indices`` labels the coefficients (defaults to
    ``-M..M`` centred on zero); the ``u``-window is chosen from the Gaussian
    tail bound.  On the torus the integral runs over the fundamental rectangle.
    """
    c = np.asarray(psi_coefficients, dtype=complex)
    if not np.any(c):
        return 0.0
    if ctx.geometry is Geometry.CYLINDER:
        if indices is None:
            M = (c.size - 1) // 2
            indices = np.arange(-M, M + 1)
        indices = np.asarray(indices)
        keep = c != 0
        grid = grid or cylinder_grid(ctx, indices[keep])
    else:
        grid = grid or ctx.default_grid()
    zb, w = quadrature_nodes(ctx, grid)
    rows = np.array_split(np.arange(zb.size), grid.n_u)

    def part(r):
        E = basis_values(ctx, zb[r], indices)
        return float(np.sum(np.abs(E @ c) ** 2 * w[r]))

    return float(np.sum(_parallel_rows(part, rows, ctx.threads)))


def gram_quadrature(ctx: KernelContext, indices=None, grid: GridSpec | None = None) -> np.ndarray:
    """Integral-form Gram matrix of the basis vectors (identity when the norm formula holds)."""
    if ctx.geometry is Geometry.CYLINDER:
        indices = np.asarray(indices)
        grid = grid or cylinder_grid(ctx, indices)
    else:
        grid = grid or ctx.default_grid()
    zb, w = quadrature_nodes(ctx, grid)
    rows = np.array_split(np.arange(zb.size), grid.n_u)

    def part(r):
        E = basis_values(ctx, zb[r], indices)
        return (E.conj().T * w[r]) @ E

    return np.sum(_parallel_rows(part, rows, ctx.threads), axis=0).T


# ---------------------------------------------------------------------------
# grid emission


CSV_COLUMNS = ("t", "s", "u", "v", "re_K", "im_K", "kahler_density", "measure_density")


def t_of_u(ctx: KernelContext, u) -> np.ndarray:
    """Invert ``u(t) = tau t + Re g(t)``; ``u`` is strictly increasing since ``tau > tau_0``."""
    u = np.asarray(u, dtype=float)
    if ctx.fact.g is None:
        return u / ctx.tau

    def one(target):
        f = lambda t: ctx.tau * t + float(np.real(ctx.fact.g(np.array([t]))[0])) - target  # noqa: E731
        lo, hi = target / ctx.tau - 1.0, target / ctx.tau + 1.0
        while f(lo) > 0:
            lo -= 2 * (hi - lo)
        while f(hi) < 0:
            hi += 2 * (hi - lo)
        return optimize.brentq(f, lo, hi, xtol=1e-15, rtol=1e-15)

    return np.array([one(x) for x in u.ravel()]).reshape(u.shape)


def grid_table(ctx: KernelContext, t_values, s_values, columns=CSV_COLUMNS) -> np.ndarray:
    """Rows of the selected :data:`CSV_COLUMNS` on a ``(t, s)`` grid (``t`` outer, ``s`` inner)."""
    bad = [c for c in columns if c not in CSV_COLUMNS]
    if bad:
        raise InputError(f"unknown grid columns {bad}")
    T, S = np.meshgrid(np.asarray(t_values, float), np.asarray(s_values, float), indexing="ij")

    def row(i):
        t, s = T[i], S[i]
        u, v = _coords(ctx, t, s)
        u, v = np.broadcast_to(u, t.shape), np.broadcast_to(v, t.shape)
        cols = {"t": t, "s": s, "u": u, "v": v}
        if "re_K" in columns or "im_K" in columns:
            zb = u - 1j * v
            K = kernel(ctx, zb, np.conj(zb))
            cols["re_K"], cols["im_K"] = np.real(K), np.imag(K)
        if "kahler_density" in columns:
            cols["kahler_density"] = kahler_density(ctx, t, s)
        if "measure_density" in columns:
            cols["measure_density"] = measure_density(ctx, t, s)
        return np.column_stack([np.broadcast_to(cols[c], t.shape) for c in columns])

    return np.vstack(_parallel_rows(row, list(range(T.shape[0])), ctx.threads))


def grid_table_uv(ctx: KernelContext, grid: GridSpec, columns=CSV_COLUMNS) -> np.ndarray:
    """:func:`grid_table` on the ``(t, s)`` points lying over the ``(u, v)`` nodes of ``grid``.

    Columns ``u`` and ``v`` are recomputed from ``(t, s)``, so they match the
    nodes up to the root-finding accuracy.  Rows run over ``u`` first and
    carry a constant ``v`` only when ``g`` is real.
    """
    t = t_of_u(ctx, grid.u_nodes())
    v = grid.v_nodes()
    rows = []
    for ti in t:
        g_im = 0.0 if ctx.fact.g is None else float(np.imag(ctx.fact.g(np.array([ti]))[0]))
        rows.append(grid_table(ctx, [ti], -v - g_im, columns))
    return np.vstack(rows)


def write_csv(rows: np.ndarray, stream, columns=CSV_COLUMNS) -> None:
    """Fixed header, 17 significant digits, ``\\n`` line ends."""
    stream.write(",".join(columns) + "\n")
    for r in np.asarray(rows, dtype=float) + 0.0:  # + 0.0 turns -0 into 0
        stream.write(",".join("%.17g" % x for x in r) + "\n")

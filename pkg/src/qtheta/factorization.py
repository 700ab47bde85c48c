"""Complex-structure data on the leaf: ``mu``, the factor pair, ``nu``, ``g`` and ``nu_!``.

Given the profile ``F(t)`` of a cylinder or torus we choose ``mu`` with
``|mu|^2 = F`` and split ``F = B C``.  The ratio ``nu = mu / B`` determines
the function ``g`` through

    exp{(1/hbar) int_{t-hbar}^{t} g} = nu(t),

and the generalized factorial ``nu_!`` that weights the Hilbert norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import integrate, special

from .errors import ConvergenceError, DomainError, ParameterError
from .flows import DeformationFlow, surface_profile
from .theta import WeightSequence

EULER_GAMMA = float(np.euler_gamma)


@dataclass(frozen=True)
class FactorizationData:
    """Everything the representation and kernels need about the complex structure.

    ``abs_factorial_sq`` is the analytic continuation of ``t -> |nu_!(t)|^2``
    off the real axis, used by the reproducing-measure factor ``p``.
    """

    mu: Callable
    factor_B: Callable
    factor_C: Callable
    nu: Callable
    nu_factorial: WeightSequence
    tau: float
    hbar: float
    g: Callable | None = None
    g_prime: Callable | None = None
    tau0: float | None = None
    alpha: float | None = None
    nu_is_unit: bool = False
    abs_factorial_sq: Callable | None = None
    label: str = ""
    extras: dict = field(default_factory=dict)

    def kernel_weights(self) -> WeightSequence:
        """``|nu_!|^2`` on the lattice: the kernel series has coefficients ``1/|nu_!|^2``."""
        return self.nu_factorial.modulus_squared()

    def re_g(self, t):
        if self.g is None:
            return np.zeros_like(np.asarray(t, dtype=float))
        return np.real(self.g(t))

    def jacobian(self, t):
        """``tau + Re g'(t)``, the area factor between ``dt ds`` and ``du dv``."""
        t = np.asarray(t, dtype=float)
        if self.g is None:
            return np.full(t.shape, self.tau)
        gp = self.g_prime if self.g_prime is not None else numeric_derivative(self.g, self.hbar / 100)
        return self.tau + np.real(gp(t))

    def x_of_t(self, t):
        """Diagonal coordinate ``x = zbar + z = 2 (tau t + Re g(t))``."""
        t = np.asarray(t, dtype=float)
        return 2.0 * (self.tau * t + self.re_g(t))


def numeric_derivative(f: Callable, h: float) -> Callable:
    """Five-point central difference of a (vectorized) function."""
    def df(t):
        t = np.asarray(t, dtype=float)
        return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)
    return df


# ---------------------------------------------------------------------------
# choices of mu


def mu_su11(a0: float, a: float, hbar: float) -> Callable:
    """``mu(t) = t + a - hbar/2 - i lambda`` with ``lambda = sqrt(a0 - (a - hbar/2)^2)``."""
    lam2 = a0 - (a - hbar / 2) ** 2
    if not lam2 > 0:
        raise ParameterError(f"lambda^2 = {lam2!r} must be positive")
    lam = math.sqrt(lam2)

    def mu(t):
        return np.asarray(t, dtype=float) + (a - hbar / 2) - 1j * lam

    return mu


def sklyanin_coefficients(phi: float, kappa1: float, psi: float, a0: float) -> tuple[complex, complex]:
    """Solve ``zeta xi = e^{-i phi} / (2 sin phi)``, ``|zeta|^2 + |xi|^2 = S``.

    ``|zeta|^2`` and ``|xi|^2`` are the roots of ``x^2 - S x + 1/(4 sin^2 phi)``;
    we take the larger root for ``|zeta|^2`` and ``arg zeta = 0``.
    """
    s = math.sin(phi)
    S = a0 / kappa1 + math.cos(psi - phi) / s
    disc = S * S - 1.0 / (s * s)
    if disc < 0:
        raise ParameterError("no solution for (zeta, xi): the positivity condition on a0 fails")
    X = 0.5 * (S + math.sqrt(disc))
    zeta = complex(math.sqrt(X), 0.0)
    xi = complex(math.cos(-phi), math.sin(-phi)) / (2.0 * s * zeta)
    return zeta, xi


def _sklyanin_mu(zeta: complex, xi: complex, a: complex, phi: float) -> Callable:
    za = zeta * a
    xa = np.conj(xi * a)

    def mu(t):
        t = np.asarray(t, dtype=float)
        return za * np.exp(1j * phi * t) - xa * np.exp(-1j * phi * t)

    return mu


def mu_sklyanin(phi: float, kappa1: float, psi: float, a0: float):
    """``mu(t) = zeta a e^{i phi t} - conj(xi a) e^{-i phi t}``; returns ``(mu, zeta, xi)``."""
    if not 0 < phi < math.pi:
        raise ParameterError("phi must lie in (0, pi)")
    zeta, xi = sklyanin_coefficients(phi, kappa1, psi, a0)
    a = math.sqrt(kappa1) * complex(math.cos(psi / 2), math.sin(psi / 2))
    return _sklyanin_mu(zeta, xi, a, phi), zeta, xi


# ---------------------------------------------------------------------------
# the function g


@dataclass(frozen=True)
class Asymptotics:
    """``nu(t) = |t|^b exp(p t + l) (1 + O(1/t))`` as ``t -> side``."""

    b: float = 0.0
    p: float = 0.0
    l: complex = 0.0
    side: str = "+inf"

    def __post_init__(self):
        if self.side not in ("+inf", "-inf"):
            raise ValueError("side must be '+inf' or '-inf'")


def numeric_log_derivative(nu: Callable, scale: float = 1.0) -> Callable:
    """``nu'/nu`` by a five-point stencil (step ``1e-3`` relative)."""
    def dlog(t):
        t = np.asarray(t, dtype=float)
        h = 1e-3 * np.maximum(scale, np.abs(t))
        d = (-nu(t + 2 * h) + 8 * nu(t + h) - 8 * nu(t - h) + nu(t - 2 * h)) / (12 * h)
        return d / nu(t)
    return dlog


def solve_g_series(nu: Callable, asymptotics: Asymptotics, hbar: float,
                   log_derivative: Callable | None = None, direct_terms: int = 256,
                   term_tol: float = 1e-14, max_terms: int = 1_000_000) -> Callable:
    """Regular solution ``g`` of the averaging equation as a one-sided series.

    For ``side="+inf"``

        g(t) = sum_{k>=1} (-hbar nu'/nu(t + k hbar) + b/k + hbar p)
               + l + b (ln hbar - gamma) + p (t + hbar/2),

    and for ``side="-inf"``

        g(t) = sum_{k>=1} (hbar nu'/nu(t - k hbar) + b/k - hbar p)
               + hbar nu'/nu(t) + l + b (ln hbar - gamma) + p (t - hbar/2).

    Terms decay like ``k^-2``, so after ``direct_terms`` explicit terms the
    remainder is added by Euler-Maclaurin: the integral of the summand has
    the closed form ``log[nu(s)/(|s|^b e^{p s + l})] + b ln(|s|/(K hbar))``
    with ``s = t +- K hbar``, plus the usual end corrections.

    Raises
    ------
    ConvergenceError
        The summand has not decayed by ``direct_terms`` (asymptotic data
        inconsistent with ``nu``) or the term cap is hit.
    """
    b, p, l = asymptotics.b, asymptotics.p, complex(asymptotics.l)
    sign = 1.0 if asymptotics.side == "+inf" else -1.0
    dlog = log_derivative if log_derivative is not None else numeric_log_derivative(nu)
    if direct_terms > max_terms:
        raise ConvergenceError("term cap below the explicit-term count")

    def summand(t, k):
        k = np.asarray(k, dtype=float)
        return -sign * hbar * dlog(t + sign * k * hbar) + b / k + sign * hbar * p

    def g_scalar(t: float) -> complex:
        K = direct_terms + int(math.ceil(4 * abs(t) / hbar))
        if K > max_terms:
            raise ConvergenceError(f"g-series needs more than {max_terms} terms at t={t}")
        k = np.arange(1, K, dtype=float)
        terms = np.asarray(summand(t, k), dtype=complex)
        fK = complex(summand(t, np.array([K]))[0])
        if abs(fK) > 1e-3:
            raise ConvergenceError(
                f"g-series terms have not decayed by k={K} (|f|={abs(fK):.2e}); "
                "check the asymptotic parameters")
        small = np.abs(terms) < term_tol
        total = complex(np.sum(terms[::-1]))
        if not (small[-8:].all() and abs(fK) < term_tol):
            s_K = t + sign * K * hbar
            nu_sK = complex(nu(np.array([s_K]))[0])
            ratio = nu_sK / (abs(s_K) ** b * np.exp(p * s_K + l))
            tail_int = np.log(ratio) + b * math.log(abs(s_K) / (K * hbar))
            hh = 0.5
            f = [complex(summand(t, np.array([K + j * hh]))[0]) for j in (-2, -1, 1, 2)]
            d1 = (f[2] - f[1]) / (2 * hh)
            d3 = (f[3] - 2 * f[2] + 2 * f[1] - f[0]) / (2 * hh ** 3)
            total += tail_int + fK / 2 - d1 / 12 + d3 / 720
        total += l + b * (math.log(hbar) - EULER_GAMMA) + p * (t + sign * hbar / 2)
        if sign < 0:
            total += hbar * complex(dlog(np.array([t]))[0])
        return total

    def g(t):
        ts = np.asarray(t, dtype=float)
        out = np.array([g_scalar(float(x)) for x in ts.ravel()], dtype=complex)
        return complex(out[0]) if ts.ndim == 0 else out.reshape(ts.shape)

    return g


def g_equation_defect(g: Callable, nu: Callable, hbar: float, ts) -> float:
    """Max ``|exp{(1/hbar) int_{t-hbar}^t g} - nu(t)|`` over ``ts`` (adaptive quadrature)."""
    worst = 0.0
    for t in np.atleast_1d(ts):
        val = _complex_quad(lambda s: g(s), t - hbar, t)
        worst = max(worst, abs(np.exp(val / hbar) - complex(nu(np.array([t]))[0])))
    return worst


def _complex_quad(f: Callable, lo: float, hi: float, tol: float = 1e-13) -> complex:
    re, err_re = integrate.quad(lambda s: float(np.real(f(s))), lo, hi, epsabs=tol, epsrel=tol, limit=200)
    im, err_im = integrate.quad(lambda s: float(np.imag(f(s))), lo, hi, epsabs=tol, epsrel=tol, limit=200)
    if max(err_re, err_im) > 1e-9 * max(1.0, abs(re) + abs(im)):
        raise ConvergenceError(f"quadrature did not converge (error estimate {max(err_re, err_im):.2e})")
    return complex(re, im)


# ---------------------------------------------------------------------------
# generalized factorial


def nu_factorial_lattice(nu: Callable, n_range: tuple[int, int], hbar: float) -> WeightSequence:
    """``nu_!(n hbar)`` by lattice products in log space, validated on ``n_range``.

    Raises :class:`DomainError` naming ``k`` when ``nu(k hbar) = 0``.
    """
    w = WeightSequence.from_pointwise(nu, hbar, name="nu")
    lo, hi = n_range
    w.log(np.arange(lo, hi + 1))
    return w


def nu_factorial_continuous(g: Callable, t: complex, hbar: float) -> complex:
    """``nu_!(t) = exp{(1/hbar) int_0^t g}`` along the straight segment from 0 to ``t``."""
    t = complex(t)
    if t == 0:
        return 1.0 + 0j

    def integrand(s):
        return complex(np.asarray(g(s * t))) * t if np.ndim(s) == 0 else g(s * t) * t

    if t.imag == 0.0:
        val = _complex_quad(lambda s: g(np.array(s)), 0.0, t.real)
    else:
        val = _complex_quad(lambda s: integrand(s), 0.0, 1.0)
    return complex(np.exp(val / hbar))


# ---------------------------------------------------------------------------
# admissibility and resonant normalization


def tau_min(g: Callable | None, t_min: float = -50.0, t_max: float = 50.0, samples: int = 2001,
            hbar: float = 1.0) -> float:
    """``tau_0 = -min_t Re g'(t)`` on a scan grid (derivative step ``hbar/100``)."""
    if g is None:
        return 0.0
    t = np.linspace(t_min, t_max, samples)
    gp = numeric_derivative(g, hbar / 100)(t)
    return float(-np.min(np.real(gp)))


def resonant_normalization_residual(fact: FactorizationData, N: int, alpha: float) -> tuple[float, float]:
    """Residuals of ``|nu_!(N hbar)| = 1`` and ``sum_{n=1}^N arg B(n hbar) = alpha (mod 2 pi)``."""
    n = np.arange(1, N + 1)
    modulus = abs(abs(complex(fact.nu_factorial(np.array([N]))[0])) - 1.0)
    phase = float(np.sum(np.angle(fact.factor_B(n * fact.hbar)))) - alpha
    phase = abs(math.remainder(phase, 2 * math.pi))
    return modulus, phase


def normalize_resonant(fact: FactorizationData, N: int, alpha_target: float) -> FactorizationData:
    """Rescale the factor pair so the resonant normalization holds with phase ``alpha_target``.

    ``B -> c B``, ``C -> C / c`` with ``c = exp(rho + i sigma)``, and ``mu``
    is rotated by a constant phase so that ``nu_!(N hbar) = 1`` exactly.  When
    ``nu = 1`` the phase is absorbed into ``mu`` itself so that ``nu`` stays
    trivial; for the Sklyanin family this is the replacement
    ``zeta -> zeta e^{i(alpha - delta)/N}``, ``xi -> xi e^{-i(alpha - delta)/N}``
    with ``delta = sum_{n=1}^N arg mu(n hbar)``.
    """
    hbar = fact.hbar
    n = np.arange(1, N + 1)
    Bn = fact.factor_B(n * hbar)
    if np.any(np.abs(Bn) == 0):
        k = int(n[np.argmax(np.abs(Bn) == 0)])
        raise DomainError(f"factor B vanishes at k = {k}")
    if fact.nu_is_unit:
        delta = float(np.sum(np.angle(fact.mu(n * hbar))))
        rot = complex(np.exp(1j * (alpha_target - delta) / N))
        if "zeta" in fact.extras:
            ex = fact.extras
            zeta = ex["zeta"] * rot
            xi = ex["xi"] / rot
            mu = _sklyanin_mu(zeta, xi, ex["a"], ex["phi"])
            extras = {**ex, "zeta": zeta, "xi": xi, "delta": delta}
        else:
            mu = (lambda t, f=fact.mu: rot * f(t))
            extras = {**fact.extras, "delta": delta}
        C = (lambda t, f=mu: np.conj(f(t)))
        return replace(fact, mu=mu, factor_B=mu, factor_C=C, alpha=alpha_target, extras=extras)
    # rotate mu as well so that nu_!(N hbar) = 1 exactly, not only in modulus:
    # arg nu_!(N hbar) = sum arg mu - sum arg B, and the rotation cancels it
    nuN = complex(fact.nu_factorial(np.array([N]))[0])
    rho = math.log(abs(nuN)) / N
    sigma = (alpha_target - float(np.sum(np.angle(Bn)))) / N
    theta = (alpha_target - float(np.sum(np.angle(fact.mu(n * hbar))))) / N
    c = complex(np.exp(rho + 1j * sigma))
    rot = complex(np.exp(1j * theta))
    mu = (lambda t, f=fact.mu: rot * f(t))
    B = (lambda t, f=fact.factor_B: c * f(t))
    C = (lambda t, f=fact.factor_C: f(t) / c)
    nu = (lambda t, f=fact.nu: rot * f(t) / c)
    weights = WeightSequence.from_pointwise(nu, hbar, name="nu")
    return replace(fact, mu=mu, factor_B=B, factor_C=C, nu=nu, nu_factorial=weights,
                   alpha=alpha_target, abs_factorial_sq=None,
                   extras={**fact.extras, "rescale": c, "rotation": rot})


def check_factorization(fact: FactorizationData, flow: DeformationFlow, ts) -> dict[str, float]:
    """Grid residuals of the defining identities (relative where natural)."""
    ts = np.asarray(ts, dtype=float)
    F = surface_profile(flow, ts)
    out = {
        "mu_modulus": float(np.max(np.abs(np.abs(fact.mu(ts)) ** 2 - F) / np.abs(F))),
        "factor_product": float(np.max(np.abs(fact.factor_B(ts) * fact.factor_C(ts) - F) / np.abs(F))),
        "nu_ratio": float(np.max(np.abs(fact.nu(ts) * fact.factor_B(ts) - fact.mu(ts))
                                 / np.abs(fact.mu(ts)))),
    }
    n = np.arange(-20, 21)
    w = fact.nu_factorial
    lhs = w.log(n[1:])
    rhs = np.log(fact.nu(n[1:] * fact.hbar)) + w.log(n[:-1])
    out["factorial_recurrence"] = float(np.max(np.abs(np.exp(lhs - rhs) - 1.0)))
    out["factorial_origin"] = float(abs(np.exp(w.log(np.array([0]))[0]) - 1.0))
    if fact.tau0 is not None:
        out["tau_margin"] = float(fact.tau - fact.tau0)
    return out


# ---------------------------------------------------------------------------
# ready-made factorizations for the example flows


def _unit_fact(mu: Callable, tau: float, hbar: float, label: str, extras: dict | None = None
               ) -> FactorizationData:
    return FactorizationData(
        mu=mu, factor_B=mu, factor_C=lambda t: np.conj(mu(t)),
        nu=lambda t: np.ones_like(np.asarray(t, dtype=complex)),
        nu_factorial=WeightSequence.unit_weights(hbar), tau=tau, hbar=hbar,
        g=None, tau0=0.0, nu_is_unit=True,
        abs_factorial_sq=lambda w: np.ones_like(np.asarray(w, dtype=complex)),
        label=label, extras=extras or {})


def unit_factorization(flow: DeformationFlow, mu: Callable, tau: float) -> FactorizationData:
    """``B = mu``: ``nu = 1``, ``g = 0``, the flat complex structure ``zbar = tau t + i s``."""
    if not tau > 0:
        raise ParameterError("tau must be positive")
    return _unit_fact(mu, tau, flow.hbar, f"{flow.name}-unit")


def sklyanin_factorization(phi: float, kappa1: float, psi: float, a0: float, tau: float
                           ) -> FactorizationData:
    if not tau > 0:
        raise ParameterError("tau must be positive")
    mu, zeta, xi = mu_sklyanin(phi, kappa1, psi, a0)
    a = math.sqrt(kappa1) * complex(math.cos(psi / 2), math.sin(psi / 2))
    return _unit_fact(mu, tau, 1.0, "sklyanin",
                      extras={"zeta": zeta, "xi": xi, "a": a, "phi": phi})


def su11_lambda(a0: float, a: float, hbar: float) -> float:
    lam2 = a0 - (a - hbar / 2) ** 2
    if not lam2 > 0:
        raise ParameterError(f"lambda^2 = {lam2!r} must be positive")
    return math.sqrt(lam2)


def su11_g_closed(a: float, lam: float, hbar: float) -> Callable:
    """Version-II ``g(t) = -psi((a + t)/hbar + 1/2 + i lambda/hbar) - ln hbar`` (digamma form)."""
    def g(t):
        w = (a + np.asarray(t, dtype=complex)) / hbar + 0.5 + 1j * lam / hbar
        return -special.digamma(w) - math.log(hbar)
    return g


def su11_log_nu_factorial_closed(a: float, lam: float, hbar: float) -> Callable:
    """``log nu_!(t) = lnGamma(c) - lnGamma(c + t/hbar) - (t/hbar) ln hbar``, ``c = a/hbar + 1/2 + i lambda/hbar``."""
    c = a / hbar + 0.5 + 1j * lam / hbar

    def log_nf(t):
        t = np.asarray(t, dtype=complex)
        return special.loggamma(c) - special.loggamma(c + t / hbar) - (t / hbar) * math.log(hbar)
    return log_nf


def su11_abs_factorial_sq(a: float, lam: float, hbar: float) -> Callable:
    """Analytic continuation of ``|nu_!(t)|^2 = 1 / F_!(t)`` for version II."""
    cp = a / hbar + 0.5 + 1j * lam / hbar
    cm = a / hbar + 0.5 - 1j * lam / hbar
    base = special.loggamma(cp) + special.loggamma(cm)

    def H(w):
        w = np.asarray(w, dtype=complex)
        return np.exp(base - special.loggamma(cp + w / hbar) - special.loggamma(cm + w / hbar)
                      - 2.0 * (w / hbar) * math.log(hbar))
    return H


def su11_factorization(a0: float, a: float, hbar: float, tau: float, version: int = 1,
                       g_method: str = "closed") -> FactorizationData:
    """Version I: ``B = mu`` (``nu = 1``).  Version II: ``B = F``, ``C = 1``, ``nu = 1/conj(mu)``.

    ``g_method`` selects the digamma closed form or the one-sided series for
    the version-II ``g``.
    """
    if not tau > 0:
        raise ParameterError("tau must be positive")
    lam = su11_lambda(a0, a, hbar)
    mu = mu_su11(a0, a, hbar)
    if version == 1:
        return _unit_fact(mu, tau, hbar, "su11-v1", extras={"lambda": lam, "a": a})
    if version != 2:
        raise ParameterError("version must be 1 or 2")

    def F(t):
        return np.abs(mu(t)) ** 2 + 0j

    def nu(t):
        return 1.0 / np.conj(mu(t))

    shift = a - hbar / 2 + 1j * lam
    if g_method == "closed":
        g = su11_g_closed(a, lam, hbar)
    elif g_method == "series":
        g = solve_g_series(nu, Asymptotics(b=-1.0, p=0.0, l=0.0, side="+inf"), hbar,
                           log_derivative=lambda t: -1.0 / (np.asarray(t, dtype=float) + shift))
    else:
        raise ValueError(f"unknown g_method {g_method!r}")
    weights = nu_factorial_lattice(nu, (-64, 64), hbar)
    closed = su11_log_nu_factorial_closed(a, lam, hbar)
    weights.continuous = lambda t: np.exp(closed(t))
    fact = FactorizationData(
        mu=mu, factor_B=F, factor_C=lambda t: np.ones_like(np.asarray(t, dtype=complex)),
        nu=nu, nu_factorial=weights, tau=tau, hbar=hbar, g=g,
        g_prime=numeric_derivative(g, hbar / 100), nu_is_unit=False,
        abs_factorial_sq=su11_abs_factorial_sq(a, lam, hbar), label="su11-v2",
        extras={"lambda": lam, "a": a})
    tau0 = tau_min(g, hbar=hbar, samples=401)
    if not tau > tau0:
        raise ParameterError(f"tau = {tau} must exceed tau0 = {tau0:.6g}")
    return replace(fact, tau0=tau0)


def general_factorization(flow: DeformationFlow, mu: Callable, factor_B: Callable, tau: float,
                          g: Callable | None = None, label: str = "general") -> FactorizationData:
    """Arbitrary factor ``B`` (nonvanishing on the lattice) with ``C = F / B`` and ``nu = mu / B``.

    Without ``g`` only lattice quantities (weights, kernels, matrices) are
    available; the coordinate map and Kähler densities need ``g``.
    """
    if not tau > 0:
        raise ParameterError("tau must be positive")
    hbar = flow.hbar

    def C(t):
        return surface_profile(flow, t) / factor_B(t)

    def nu(t):
        return mu(t) / factor_B(t)

    weights = nu_factorial_lattice(nu, (-16, 16), hbar)
    fact = FactorizationData(mu=mu, factor_B=factor_B, factor_C=C, nu=nu, nu_factorial=weights,
                             tau=tau, hbar=hbar, g=g, nu_is_unit=False, label=label)
    tau0 = tau_min(g, hbar=hbar, samples=401) if g is not None else None
    if tau0 is not None and not tau > tau0:
        raise ParameterError(f"tau = {tau} must exceed tau0 = {tau0:.6g}")
    return replace(fact, tau0=tau0)

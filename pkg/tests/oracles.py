"""Independent reference implementations used as test oracles.

Nothing here calls into :mod:`qtheta`; each routine follows the defining
series or integral as literally as possible, trading speed for clarity.
"""
from __future__ import annotations

import cmath
import math

import numpy as np
from scipy import integrate

# frozen values of the defining series at alpha = 0, eps = 1 (fsum over |n| <= 40)
THETA_0_1 = 1.772637204826652
THETA_SHARP_0_1 = 1.7722704969843797


def brute_theta(alpha: complex, eps: float, shift: float = 0.0, n_max: int | None = None) -> complex:
    """``sum_{n in shift + Z} exp(-eps n^2 + i n alpha)`` with compensated summation."""
    alpha = complex(alpha)
    if n_max is None:
        centre = -alpha.imag / (2 * eps)
        reach = math.sqrt(60.0 / eps) + 3
        lo, hi = int(math.floor(centre - reach)), int(math.ceil(centre + reach))
    else:
        lo, hi = -n_max, n_max
    terms = [cmath.exp(-eps * (k + shift) ** 2 + 1j * (k + shift) * alpha) for k in range(lo, hi + 1)]
    return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))


_LANCZOS_G = 7
_LANCZOS = (0.99999999999980993, 676.5203681218851, -1259.1392167224028, 771.32342877765313,
            -176.61502916214059, 12.507343278686905, -0.13857109526572012,
            9.9843695780195716e-6, 1.5056327351493116e-7)


def lanczos_loggamma(z: complex) -> complex:
    """``ln Gamma(z)`` modulo ``2 pi i`` by the Lanczos approximation (reflection for Re z < 1/2)."""
    z = complex(z)
    if z.real < 0.5:
        return cmath.log(math.pi / cmath.sin(math.pi * z)) - lanczos_loggamma(1 - z)
    z -= 1
    x = _LANCZOS[0]
    for i in range(1, _LANCZOS_G + 2):
        x += _LANCZOS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return 0.5 * math.log(2 * math.pi) + (z + 0.5) * cmath.log(t) - t + cmath.log(x)


def su11_abs_factorial_sq(w: complex, a: float, lam: float, hbar: float) -> complex:
    """``|Gamma(c+) Gamma(c-)| hbar^{-2w/hbar} / (Gamma(c+ + w/hbar) Gamma(c- + w/hbar))``."""
    cp = a / hbar + 0.5 + 1j * lam / hbar
    cm = a / hbar + 0.5 - 1j * lam / hbar
    lg = (lanczos_loggamma(cp) + lanczos_loggamma(cm) - lanczos_loggamma(cp + w / hbar)
          - lanczos_loggamma(cm + w / hbar) - 2 * (w / hbar) * math.log(hbar))
    return cmath.exp(lg)


def p_quad(x: float, a: float, lam: float, hbar: float, tau: float) -> float:
    """``(pi hbar tau)^-1/2 int exp(-t^2/hbar tau) |nu|_!((x + 2it)/2tau)^2 dt`` by adaptive quadrature."""
    s = math.sqrt(hbar * tau)

    def f(t):
        return math.exp(-t * t / (hbar * tau)) * su11_abs_factorial_sq((x + 2j * t) / (2 * tau), a, lam, hbar).real

    val, _ = integrate.quad(f, -12 * s, 12 * s, epsabs=1e-15, epsrel=1e-13, limit=400)
    return val / math.sqrt(math.pi * hbar * tau)


def torus_sections(zbar: complex, N: int, eps: float, m_reach: int = 80) -> np.ndarray:
    """``S_n(zbar) = sum_{m = n mod N} exp(-eps m^2 / 2 + m zbar)`` for ``nu = 1``."""
    centre = int(round(zbar.real / eps))
    out = np.zeros(N, dtype=complex)
    for m in range(centre - m_reach, centre + m_reach + 1):
        out[m % N] += cmath.exp(-eps * m * m / 2 + m * zbar)
    return out


def torus_kernel(zbar: complex, z: complex, N: int, eps: float) -> complex:
    """``K^N(zbar | z) = sum_n S_n(zbar) conj(S_n(conj z))`` by direct lattice sums."""
    return complex(np.sum(torus_sections(zbar, N, eps) * np.conj(torus_sections(np.conj(z), N, eps))))


def log_torus_kernel_diag(u: float, v: float, N: int, eps: float) -> float:
    zb = complex(u, -v)
    return math.log(torus_kernel(zb, np.conj(zb), N, eps).real)

"""Theta series and their weighted modifications.

The basic object is the lattice sum

.. math:: \\theta_c(\\alpha, \\varepsilon) = \\sum_{n \\in c + \\mathbb{Z}}
          \\exp(-\\varepsilon n^2 + i n \\alpha),

with ``c = 0`` for :func:`theta` and ``c = 1/2`` for :func:`theta_sharp`.
Two evaluation routes are available: direct summation and the imaginary
Jacobi (Poisson) transform

.. math:: \\theta_c(\\alpha, \\varepsilon) = \\sqrt{\\pi/\\varepsilon}
          \\sum_{m} e^{2\\pi i m c} \\exp(-(\\alpha - 2\\pi m)^2 / 4\\varepsilon).

``method="auto"`` uses the direct series for ``eps >= 1`` and the dual
series otherwise, which keeps both term counts small.  All routines accept
numpy arrays for ``alpha`` and are vectorized.
"""
from __future__ import annotations

import math
from typing import Callable, Mapping

import numpy as np

from .errors import ConvergenceError, DomainError, InputError

DEFAULT_TOL = 1e-16
GUARD_TERMS = 5
MAX_TERMS = 1_000_000
MIN_MODIFIED_EPS = 0.05
MODIFIED_MAX_SPAN = 20_000


def _check_eps(eps: float, tol: float) -> None:
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps!r}")
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol!r}")


def _cut_width(eps: float, tol: float, deriv: int = 0) -> int:
    # exp(-eps*L^2) < tol, padded for the polynomial factor of derivatives
    log_tol = -math.log(tol) + 2.0 * deriv + 2.0
    return int(math.ceil(math.sqrt(log_tol / eps))) + GUARD_TERMS


def _ordered(lo: int, hi: int, center: float) -> np.ndarray:
    n = np.arange(lo, hi + 1)
    # smallest terms first: farthest from the peak summed earliest
    order = np.argsort(-np.abs(n - center), kind="stable")
    return n[order]


def _direct(alpha: np.ndarray, eps: float, shift: float, tol: float, deriv: int) -> np.ndarray:
    width = _cut_width(eps, tol, deriv)
    peaks = -alpha.imag / (2.0 * eps) - shift
    lo = int(math.floor(np.min(peaks))) - width
    hi = int(math.ceil(np.max(peaks))) + width
    if hi - lo > MAX_TERMS:
        raise ConvergenceError(
            f"direct theta series needs {hi - lo} terms (eps={eps:g}); "
            "use the Jacobi-transformed route")
    k = _ordered(lo, hi, float(np.median(peaks)))
    n = k + shift
    expo = -eps * n * n + 1j * np.multiply.outer(alpha, n)
    terms = np.exp(expo)
    if deriv:
        terms = terms * (1j * n) ** deriv
    return terms.sum(axis=-1)


def _jacobi(alpha: np.ndarray, eps: float, shift: float, tol: float, deriv: int) -> np.ndarray:
    # Poisson dual: sqrt(pi/eps) * sum_m e^{2 pi i m c} exp(-(alpha - 2 pi m)^2 / (4 eps))
    width = int(math.ceil(math.sqrt(4.0 * eps * (-math.log(tol) + 2.0 * deriv + 2.0)) / (2 * math.pi)))
    width += GUARD_TERMS
    centers = alpha.real / (2.0 * math.pi)
    lo = int(math.floor(np.min(centers))) - width
    hi = int(math.ceil(np.max(centers))) + width
    if hi - lo > MAX_TERMS:
        raise ConvergenceError(f"dual theta series needs {hi - lo} terms")
    m = _ordered(lo, hi, float(np.median(centers)))
    d = np.subtract.outer(alpha, 2.0 * math.pi * m)
    g = np.exp(-d * d / (4.0 * eps))
    if deriv == 1:
        g = g * (-d / (2.0 * eps))
    elif deriv == 2:
        g = g * ((d / (2.0 * eps)) ** 2 - 1.0 / (2.0 * eps))
    elif deriv:
        raise ValueError("derivatives above order 2 are not supported on the dual route")
    if shift:
        g = g * np.exp(2j * math.pi * m * shift)
    return math.sqrt(math.pi / eps) * g.sum(axis=-1)


def _lattice_theta(alpha, eps, shift, tol, method, deriv):
    _check_eps(eps, tol)
    a = np.asarray(alpha, dtype=complex)
    scalar = a.ndim == 0
    flat = np.atleast_1d(a).ravel()
    if method == "auto":
        method = "direct" if eps >= 1.0 else "jacobi"
    if method == "direct":
        out = _direct(flat, eps, shift, tol, deriv)
    elif method == "jacobi":
        out = _jacobi(flat, eps, shift, tol, deriv)
    else:
        raise ValueError(f"unknown method {method!r}")
    out = out.reshape(a.shape) if not scalar else out[0]
    return complex(out) if scalar else out


def theta(alpha, eps: float, tol: float = DEFAULT_TOL, method: str = "auto", deriv: int = 0):
    """Standard theta series ``sum_n exp(-eps n^2 + i n alpha)``.

    Parameters
    ----------
    alpha : complex or array_like
        Phase argument; may be complex.
    eps : float
        Gaussian decay parameter, must be positive.
    tol : float
        Truncation tolerance relative to the largest term.
    method : {"auto", "direct", "jacobi"}
        Evaluation route.  ``"auto"`` switches at ``eps = 1``.
    deriv : int
        Order of the derivative with respect to ``alpha`` (0, 1 or 2).

    Returns
    -------
    complex or ndarray
    """
    return _lattice_theta(alpha, eps, 0.0, tol, method, deriv)


def theta_sharp(alpha, eps: float, tol: float = DEFAULT_TOL, method: str = "auto", deriv: int = 0):
    """Half-integer theta series ``sum_{n in 1/2 + Z} exp(-eps n^2 + i n alpha)``.

    Anti-periodic: shifting ``alpha`` by ``2 pi`` flips the sign.
    """
    return _lattice_theta(alpha, eps, 0.5, tol, method, deriv)


class WeightSequence:
    """Generalized factorial ``rho_!(n hbar)`` on the integer lattice.

    Values are held as complex logarithms so that products far out on the
    lattice neither overflow nor underflow.  Instances are built with one of
    the ``from_*`` constructors.

    Parameters
    ----------
    hbar : float
        Lattice spacing.
    log_values : callable
        ``n -> log rho_!(n hbar)`` for an integer array ``n``.
    pointwise : callable, optional
        ``t -> rho(t)``; enables recurrence checks.
    continuous : callable, optional
        ``t -> rho_!(t)`` for arbitrary complex ``t``.
    unit : bool
        Marks the trivial sequence ``rho = 1``.
    """

    def __init__(self, hbar: float, log_values: Callable[[np.ndarray], np.ndarray],
                 pointwise: Callable | None = None, continuous: Callable | None = None,
                 unit: bool = False):
        if not hbar > 0:
            raise DomainError("hbar must be positive")
        self.hbar = float(hbar)
        self._log_values = log_values
        self.pointwise = pointwise
        self.continuous = continuous
        self.is_unit = unit

    @classmethod
    def unit_weights(cls, hbar: float) -> "WeightSequence":
        return cls(hbar, lambda n: np.zeros(np.shape(n), dtype=complex),
                   pointwise=lambda t: np.ones_like(np.asarray(t, dtype=complex)),
                   continuous=lambda t: np.ones_like(np.asarray(t, dtype=complex)),
                   unit=True)

    @classmethod
    def from_pointwise(cls, rho: Callable, hbar: float, continuous: Callable | None = None,
                       name: str = "rho") -> "WeightSequence":
        """Accumulate ``rho_!`` from a pointwise ``rho`` by lattice products in log space."""
        cache: dict[str, np.ndarray | int] = {"lo": 0, "hi": 0, "logs": np.zeros(1, complex)}

        def extend(lo: int, hi: int) -> None:
            clo, chi = cache["lo"], cache["hi"]
            if lo >= clo and hi <= chi:
                return
            lo, hi = min(lo, clo), max(hi, chi)
            k_pos = np.arange(1, hi + 1)
            k_neg = np.arange(lo + 1, 1)  # (n+1)hbar, ..., 0 for the most negative n
            vals_pos = np.asarray(rho(k_pos * hbar), dtype=complex) if hi > 0 else np.zeros(0, complex)
            vals_neg = np.asarray(rho(k_neg * hbar), dtype=complex) if lo < 0 else np.zeros(0, complex)
            bad = np.concatenate([k_pos[vals_pos == 0], k_neg[vals_neg == 0]])
            if bad.size:
                raise DomainError(f"{name}(k hbar) vanishes at k = {int(bad[0])}")
            pos = np.cumsum(np.log(vals_pos)) if hi > 0 else np.zeros(0, complex)
            # n <= -1: rho_!(n) = [rho(0) rho(-hbar) ... rho((n+1) hbar)]^{-1}
            neg = -np.cumsum(np.log(vals_neg)[::-1]) if lo < 0 else np.zeros(0, complex)
            cache["lo"], cache["hi"] = lo, hi
            cache["logs"] = np.concatenate([neg[::-1], [0.0], pos])

        def log_values(n):
            n = np.asarray(n, dtype=int)
            if n.size == 0:
                return np.zeros(n.shape, complex)
            extend(int(n.min()), int(n.max()))
            return cache["logs"][n - cache["lo"]]

        return cls(hbar, log_values, pointwise=rho, continuous=continuous)

    @classmethod
    def from_log_function(cls, log_fn: Callable, hbar: float, pointwise: Callable | None = None,
                          continuous: Callable | None = None) -> "WeightSequence":
        """Wrap a closed-form ``n -> log rho_!(n hbar)``."""
        return cls(hbar, lambda n: np.asarray(log_fn(np.asarray(n)), dtype=complex),
                   pointwise=pointwise, continuous=continuous)

    @classmethod
    def from_table(cls, values: Mapping[int, complex], hbar: float,
                   pointwise: Callable | None = None) -> "WeightSequence":
        """Finite table of lattice values; lookups outside it raise :class:`InputError`."""
        table = {int(k): complex(v) for k, v in values.items()}
        if abs(table.get(0, 1.0) - 1.0) > 1e-14:
            raise DomainError("rho_!(0) must equal 1")
        table[0] = 1.0 + 0j

        def log_values(n):
            n = np.asarray(n, dtype=int)
            out = np.empty(n.shape, complex)
            for idx, k in np.ndenumerate(n):
                try:
                    out[idx] = np.log(table[int(k)])
                except KeyError:
                    raise InputError(f"missing lattice value rho_!({int(k)} hbar)") from None
            return out

        return cls(hbar, log_values, pointwise=pointwise)

    def log(self, n) -> np.ndarray:
        """Complex log of ``rho_!(n hbar)``."""
        return self._log_values(np.asarray(n, dtype=int))

    def __call__(self, n) -> np.ndarray:
        return np.exp(self.log(n))

    def modulus_squared(self) -> "WeightSequence":
        """The sequence ``|rho_!|^2``, i.e. the factorial of ``|rho|^2``."""
        if self.is_unit:
            return WeightSequence.unit_weights(self.hbar)
        pw = None
        if self.pointwise is not None:
            pw = lambda t, f=self.pointwise: np.abs(f(t)) ** 2  # noqa: E731
        return WeightSequence(self.hbar, lambda n: 2.0 * self.log(n).real + 0j, pointwise=pw)

    def conjugate(self) -> "WeightSequence":
        if self.is_unit:
            return self
        pw = None
        if self.pointwise is not None:
            pw = lambda t, f=self.pointwise: np.conj(f(t))  # noqa: E731
        return WeightSequence(self.hbar, lambda n: np.conj(self.log(n)), pointwise=pw)


def _modified_window(alpha: np.ndarray, eps: float, weights: WeightSequence, tol: float):
    """Pick a lattice window containing every significant term of the weighted series."""
    log_tol = -math.log(tol) + 2.0
    peaks = -alpha.imag / (2.0 * eps)
    width = _cut_width(eps, tol)
    lo = int(math.floor(np.min(peaks))) - width
    hi = int(math.ceil(np.max(peaks))) + width
    while True:
        n = np.arange(lo, hi + 1)
        lw = -weights.log(n).real
        expo = lw[None, :] - eps * n * n - np.multiply.outer(alpha.imag, n)
        top = expo.max(axis=1, keepdims=True)
        rel = expo - top
        left_ok = np.all(rel[:, :3] < -log_tol) and np.all(np.diff(rel[:, :4], axis=1) > 0)
        right_ok = np.all(rel[:, -3:] < -log_tol) and np.all(np.diff(rel[:, -4:], axis=1) < 0)
        if left_ok and right_ok:
            return n
        if hi - lo > MODIFIED_MAX_SPAN:
            growing_l = np.any(np.diff(rel[:, :4], axis=1) <= 0)
            growing_r = np.any(np.diff(rel[:, -4:], axis=1) >= 0)
            side = "negative" if growing_l else "positive" if growing_r else "either"
            raise ConvergenceError(
                f"weighted theta series does not converge toward the {side} end "
                f"(terms still growing over 3 consecutive indices at |n| ~ {max(-lo, hi)})")
        span = hi - lo
        if not left_ok:
            lo -= span
        if not right_ok:
            hi += span


def theta_mod(alpha, eps: float, weights: WeightSequence, tol: float = DEFAULT_TOL, deriv: int = 0):
    """Weighted theta series ``sum_n rho_!(n hbar)^{-1} exp(-eps n^2 + i n alpha)``.

    Unit weights delegate to :func:`theta`.  There is no dual route for
    general weights, so ``eps < 0.05`` is refused rather than summed slowly.

    Raises
    ------
    InputError
        A required lattice value is missing from a tabulated sequence.
    ConvergenceError
        The terms keep growing at the edge of the summation window, or
        ``eps`` is too small for direct summation.
    """
    if weights.is_unit:
        return theta(alpha, eps, tol=tol, deriv=deriv)
    _check_eps(eps, tol)
    if eps < MIN_MODIFIED_EPS:
        raise ConvergenceError(
            f"eps={eps:g} below {MIN_MODIFIED_EPS}: weighted series has no dual route")
    a = np.asarray(alpha, dtype=complex)
    scalar = a.ndim == 0
    flat = np.atleast_1d(a).ravel()
    n = _modified_window(flat, eps, weights, tol)
    order = np.argsort(-np.abs(n - np.median(n)), kind="stable")
    n = n[order]
    expo = -weights.log(n)[None, :] - eps * n * n + 1j * np.multiply.outer(flat, n)
    terms = np.exp(expo)
    if deriv:
        terms = terms * (1j * n) ** deriv
    out = terms.sum(axis=-1)
    return complex(out[0]) if scalar else out.reshape(a.shape)


def theta_mod_coefficients(eps: float, weights: WeightSequence, n) -> np.ndarray:
    """Fourier coefficients ``c_n = exp(-eps n^2) / rho_!(n hbar)`` of :func:`theta_mod`."""
    n = np.asarray(n, dtype=int)
    return np.exp(-weights.log(n) - eps * n * n)


def characterization_residual(eps: float, weights: WeightSequence, n_max: int = 12) -> float:
    """Residual of the difference equation characterizing :func:`theta_mod`.

    On the Fourier side ``exp{i(2 eps d/dalpha + alpha)} y = rho(-i hbar d/dalpha) y``
    reads ``exp(-eps (2n+1)) c_n = rho((n+1) hbar) c_{n+1}``; together with
    the normalization ``c_0 = 1`` (unit mean over a period) this fixes ``y``.
    Requires the pointwise ``rho``.
    """
    if weights.pointwise is None:
        raise InputError("characterization needs the pointwise rho")
    n = np.arange(-n_max, n_max)
    c = theta_mod_coefficients(eps, weights, np.arange(-n_max, n_max + 1))
    lhs = np.exp(-eps * (2 * n + 1)) * c[:-1]
    rhs = np.asarray(weights.pointwise((n + 1) * weights.hbar), dtype=complex) * c[1:]
    scale = np.maximum(np.abs(lhs), 1e-300)
    res = np.max(np.abs(lhs - rhs) / np.maximum(scale, 1.0))
    return float(max(res, abs(c[n_max] - 1.0)))


def theta_log_d2(x, eps: float, weights: WeightSequence | None = None,
                 tol: float = DEFAULT_TOL):
    """Second derivative of ``ln S(x)``, ``S(x) = sum_n w_n exp(-eps n^2 + n x)``.

    ``w_n = 1 / rho_!(n hbar)`` for the given weights (all ones by default).
    The value ``S''/S - (S'/S)^2`` is the variance of ``n`` under the
    probability weights proportional to the terms, which is how it is
    evaluated (no cancellation between the two quotients).
    """
    _check_eps(eps, tol)
    xs = np.asarray(x, dtype=float)
    scalar = xs.ndim == 0
    flat = np.atleast_1d(xs).ravel()
    alpha = -1j * flat
    if weights is None or weights.is_unit:
        width = _cut_width(eps, tol, 2)
        peaks = flat / (2.0 * eps)
        n = np.arange(int(math.floor(peaks.min())) - width, int(math.ceil(peaks.max())) + width + 1)
        logw = np.zeros(n.shape)
    else:
        n = _modified_window(alpha, eps, weights, tol)
        lw = weights.log(n)
        phase = np.angle(np.exp(1j * lw.imag))
        if np.any(np.abs(phase) > 1e-12):
            raise DomainError("theta_log_d2 needs real positive weights")
        logw = -lw.real
    expo = logw[None, :] - eps * n * n + np.multiply.outer(flat, n)
    expo -= expo.max(axis=1, keepdims=True)
    p = np.exp(expo)
    s = p.sum(axis=1)
    if np.any(s <= 0):
        raise DomainError("series value is not positive")
    p /= s[:, None]
    mean = p @ n
    var = np.einsum("ij,ij->i", p, (n[None, :] - mean[:, None]) ** 2)
    return float(var[0]) if scalar else var.reshape(xs.shape)

"""Coherent states, the partition of unity and the coherent transform.

The coherent state is the theta series of the shift operator applied to
the fiducial state,

    P_z = sum_m conj(nu_!(m hbar))^-1 exp(-tau hbar m^2 / 2 + m z) e^{i m s} P0,

so its coefficients in the orthonormal basis are ``conj(e^(n)(zbar))``.
The inner product is linear in the first slot: ``(x, y) = sum x_n conj(y_n)``,
so ``(P, P_z)`` is the antiholomorphic function ``sum P_n e^(n)(zbar)`` and
``(P_w, P_z) = K(zbar|w)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .kernels import (Geometry, GridSpec, KernelContext, basis_values, cylinder_grid,
                      quadrature_nodes, _parallel_rows)
from .reports import CheckReport, combine
from .representations import CylinderRep, MonomialAction, TorusRep, _Rep, fiducial_state

ORBIT_TOL = 1e-18
WINDOW_PROBE_TAIL = 1e-6


@dataclass(frozen=True)
class CoherentState:
    z: complex
    coefficients: np.ndarray
    indices: np.ndarray


def inner(x, y) -> complex:
    """``(x, y) = sum x_n conj(y_n)``."""
    return complex(np.sum(np.asarray(x) * np.conj(np.asarray(y))))


def _pure_shift(rep: _Rep) -> np.ndarray:
    """``e^{i s}``: ``e^(n) -> e^(n+1)``, cyclic on the torus (``nu_!(N hbar) = 1`` after normalization)."""
    if isinstance(rep, CylinderRep):
        return rep.shift()
    N = rep.N
    S = np.zeros((N, N), dtype=complex)
    S[(np.arange(N) + 1) % N, np.arange(N)] = 1.0
    return S


def _orbit_range(rep: _Rep, z_real) -> np.ndarray:
    """Shift powers ``m`` whose coefficients are not negligible for the given ``Re z``."""
    eps = rep.tau * rep.hbar
    zr = np.atleast_1d(np.asarray(z_real, dtype=float))
    width = int(math.ceil(math.sqrt(-2 * math.log(ORBIT_TOL) / eps))) + 2
    lo = int(math.floor(zr.min() / eps)) - width
    hi = int(math.ceil(zr.max() / eps)) + width
    if isinstance(rep, CylinderRep):
        lo, hi = max(lo, -rep.M), min(hi, rep.M)
    return np.arange(lo, hi + 1)


def shift_orbit(S: np.ndarray, P0: np.ndarray, ms: np.ndarray) -> np.ndarray:
    """Columns ``S^m P0`` for ``m`` in ``ms``; negative powers use ``S*`` (the inverse on the orbit)."""
    out = np.zeros((P0.size, ms.size), dtype=complex)
    cache = {0: P0.astype(complex)}
    for m in range(1, int(max(ms.max(), 0)) + 1):
        cache[m] = S @ cache[m - 1]
    for m in range(-1, int(min(ms.min(), 0)) - 1, -1):
        cache[m] = S.conj().T @ cache[m + 1]
    for j, m in enumerate(ms):
        out[:, j] = cache[int(m)]
    return out


def coherent_coefficients(rep: _Rep, z, S: np.ndarray | None = None, P0: np.ndarray | None = None
                          ) -> np.ndarray:
    """Coefficient vectors of ``P_z`` for an array of ``z``; shape ``z.shape + (dim,)``.

    ``S`` and ``P0`` default to the representation's pure shift and fiducial
    state; passing a larger shift (e.g. a block-diagonal copy) realizes the
    coherent family inside a bigger space.
    """
    zz = np.asarray(z, dtype=complex)
    flat = np.atleast_1d(zz).ravel()
    S = _pure_shift(rep) if S is None else S
    P0 = fiducial_state(rep) if P0 is None else P0
    ms = _orbit_range(rep, flat.real)
    V = shift_orbit(S, P0, ms)
    eps = rep.tau * rep.hbar
    lognu = np.conj(rep.fact.nu_factorial.log(ms))
    A = np.exp(-lognu[None, :] - eps * ms * ms / 2 + np.multiply.outer(flat, ms))
    C = A @ V.T
    return C.reshape(zz.shape + (P0.size,))


def coherent_state(rep: _Rep, z: complex) -> CoherentState:
    """``P_z`` expanded in the orthonormal basis of ``rep``."""
    c = coherent_coefficients(rep, complex(z))
    idx = rep.indices if isinstance(rep, CylinderRep) else np.arange(rep.N)
    return CoherentState(complex(z), c, idx)


# ---------------------------------------------------------------------------
# integrals over the leaf


def _rep_grid(rep: _Rep, ctx: KernelContext, grid: GridSpec | None, indices) -> GridSpec:
    if grid is not None:
        return grid
    if ctx.geometry is Geometry.TORUS:
        return ctx.default_grid()
    return cylinder_grid(ctx, indices)


def _verified_indices(rep: _Rep, band: int | None) -> np.ndarray:
    if isinstance(rep, TorusRep):
        return np.arange(rep.N)
    band = min(band if band is not None else 4, rep.M - 2)
    return np.arange(-band, band + 1)


def partition_matrix(rep: _Rep, ctx: KernelContext, grid: GridSpec | None = None,
                     band: int | None = None, S=None, P0=None) -> tuple[np.ndarray, np.ndarray]:
    """``(1/2 pi hbar) int Pi dm`` on the verified indices; returns ``(matrix, indices)``.

    With ``Pi = P_z P_z* / K`` and ``dm / K`` equal to the norm weight, the
    integrand reduces to ``P_z P_z*`` times the norm weight per ``du dv``.
    """
    idx = _verified_indices(rep, band)
    grid = _rep_grid(rep, ctx, grid, idx)
    zb, w = quadrature_nodes(ctx, grid)
    pos = np.array([rep.index_of(int(n)) for n in idx])
    rows = np.array_split(np.arange(zb.size), grid.n_u)

    def part(r):
        C = coherent_coefficients(rep, np.conj(zb[r]), S, P0)
        if S is None:
            C = C[:, pos]
        return (C.T * w[r]) @ C.conj()

    P = np.sum(_parallel_rows(part, rows, ctx.threads), axis=0)
    return P, idx


def partition_of_unity(rep: _Rep, ctx: KernelContext, grid: GridSpec | None = None,
                       tol: float = 1e-6, band: int | None = None) -> CheckReport:
    """Max ``|entry - delta|`` of the integrated projector on the verified indices."""
    P, idx = partition_matrix(rep, ctx, grid, band)
    dev = float(np.max(np.abs(P - np.eye(P.shape[0]))))
    params = {"dimension": int(P.shape[0]), "indices": f"{int(idx.min())}..{int(idx.max())}"}
    if isinstance(rep, CylinderRep):
        g = _rep_grid(rep, ctx, grid, idx)
        params["u_window"] = f"[{g.u_min:.6g}, {g.u_max:.6g}]"
        if grid is None:
            # the improper integral is truncated; report how much a narrower window moves it
            narrow = cylinder_grid(ctx, idx, tail=WINDOW_PROBE_TAIL, step=g.du)
            P2, _ = partition_matrix(rep, ctx, narrow, band)
            params["window_sensitivity"] = float(np.max(np.abs(P - P2)))
    return CheckReport("partition_of_unity", dev, tol, params=params)


def function_values(ctx: KernelContext, psi_coefficients, zbar, indices=None) -> np.ndarray:
    """``psi(zbar) = sum_n psi_n e^(n)(zbar)``."""
    E = basis_values(ctx, zbar, indices)
    return E @ np.asarray(psi_coefficients, dtype=complex)


def coherent_transform(rep: _Rep, ctx: KernelContext, psi, grid: GridSpec | None = None,
                       indices=None, embed: bool = False, band: int | None = None) -> np.ndarray:
    """``psi -> int (psi(zbar) / K(zbar|z)) P_z dm`` (with the ``1/2 pi hbar`` normalization).

    ``psi`` is either a coefficient vector over ``indices`` (cylinder) or the
    torus basis, or a callable ``zbar -> psi(zbar)``.  With ``embed=True``
    the target space is the block-diagonal double copy of the representation
    and the fiducial state sits in the first block; the result has twice the
    dimension and the second block measures leakage out of ``L0``.
    """
    idx = _verified_indices(rep, band)
    if isinstance(rep, CylinderRep) and indices is None:
        indices = idx
    grid = _rep_grid(rep, ctx, grid, idx if indices is None else np.asarray(indices))
    zb, w = quadrature_nodes(ctx, grid)
    S = P0 = None
    if embed:
        S0 = _pure_shift(rep)
        Z = np.zeros_like(S0)
        S = np.block([[S0, Z], [Z, S0]])
        P0 = np.concatenate([fiducial_state(rep), np.zeros(S0.shape[0], dtype=complex)])
    rows = np.array_split(np.arange(zb.size), grid.n_u)

    def part(r):
        f = psi(zb[r]) if callable(psi) else function_values(ctx, psi, zb[r], indices)
        C = coherent_coefficients(rep, np.conj(zb[r]), S, P0)
        return (f * w[r]) @ C

    return np.sum(_parallel_rows(part, rows, ctx.threads), axis=0)


def inverse_transform(rep: _Rep, P: np.ndarray, zbar) -> np.ndarray:
    """``P -> (P, P_z)`` as a function of ``zbar``."""
    C = coherent_coefficients(rep, np.conj(np.asarray(zbar, dtype=complex)))
    return C.conj() @ P


def transform_gram(rep: _Rep, ctx: KernelContext, grid: GridSpec | None = None,
                   band: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Transforms of the basis vectors: ``(round-trip matrix, Gram matrix, indices)``.

    Column ``j`` of the round-trip matrix is ``T e^(n_j)`` restricted to the
    verified indices; it equals the identity when ``T`` is unitary.
    """
    idx = _verified_indices(rep, band)
    pos = np.array([rep.index_of(int(n)) for n in idx])
    cols = []
    for n in idx:
        if isinstance(rep, TorusRep):
            e = np.zeros(rep.N)
            e[n] = 1.0
            v = coherent_transform(rep, ctx, e, grid, band=band)
        else:
            v = coherent_transform(rep, ctx, np.array([1.0]), grid, indices=np.array([n]), band=band)
        cols.append(v)
    T = np.array(cols).T
    return T[pos], T.conj().T @ T, idx


# ---------------------------------------------------------------------------
# intertwining


def _monomial_window(rep: _Rep, ctx: KernelContext, idx) -> tuple[int, int]:
    eps = ctx.eps
    width = int(math.ceil(math.sqrt(-2 * math.log(ORBIT_TOL) / eps))) + 3
    if isinstance(rep, TorusRep):
        return -width, rep.N + width
    return int(idx.min()) - 2, int(idx.max()) + 2


def _basis_monomials(rep: _Rep, action: MonomialAction, n: int, lo: int, hi: int) -> np.ndarray:
    """Monomial coefficients of ``e^(n)`` on ``m in [lo, hi]``."""
    m = np.arange(lo, hi + 1)
    if isinstance(rep, TorusRep):
        sel = (m - n) % rep.N == 0
        # nu_!(m hbar) = nu_!(n hbar) on the residue class after normalization
        c = np.where(sel, np.exp(-rep.tau * rep.hbar * m * m / 2
                                 - rep.fact.nu_factorial.log(np.array([n]))[0]), 0)
        return c.astype(complex)
    return np.where(m == n, action.coefficient(np.array([n]))[0], 0).astype(complex)


def intertwining_check(rep: _Rep, ctx: KernelContext, which_generator: str = "all",
                       grid: GridSpec | None = None, tol: float = 1e-6, band: int | None = None
                       ) -> CheckReport:
    """``max |T(G psi) - G(T psi)|`` over basis ``psi``.

    ``G psi`` on the function side comes from the exponential-operator action
    on monomials (:class:`MonomialAction`), independent of the matrices used
    on the representation side.
    """
    A, B, C = rep.matrices()
    gens = {"B": B, "C": C, "identity": np.eye(B.shape[0])}
    for j, a in enumerate(A):
        gens[f"A_{j}"] = a
    if which_generator == "all":
        names = [k for k in gens if k != "identity"]
    elif which_generator in gens:
        names = [which_generator]
    elif which_generator == "A" and "A_0" in gens:
        names = ["A_0"]
    else:
        raise InputError(f"unknown generator {which_generator!r}")
    action = MonomialAction(rep.flow, rep.fact)
    idx = _verified_indices(rep, band)
    lo, hi = _monomial_window(rep, ctx, idx)
    mA, mB, mC = action.matrices(lo, hi)
    mgens = {"B": mB, "C": mC, "identity": np.eye(hi - lo + 1)}
    for j, a in enumerate(mA):
        mgens[f"A_{j}"] = a
    m = np.arange(lo, hi + 1)
    grid_idx = idx if isinstance(rep, TorusRep) else np.arange(idx.min() - 1, idx.max() + 2)
    grid = _rep_grid(rep, ctx, grid, grid_idx)
    pos = np.array([rep.index_of(int(n)) for n in idx])
    test = idx if isinstance(rep, TorusRep) else idx[1:-1]
    parts = []
    for name in names:
        worst = 0.0
        for n in test:
            coeffs = _basis_monomials(rep, action, int(n), lo, hi)
            g_coeffs = mgens[name] @ coeffs

            def f_of(zb, cf=coeffs):
                return np.exp(np.multiply.outer(np.asarray(zb), m)) @ cf

            def g_of(zb, cf=g_coeffs):
                return np.exp(np.multiply.outer(np.asarray(zb), m)) @ cf

            Tg = coherent_transform(rep, ctx, g_of, grid, band=band)
            gT = gens[name] @ coherent_transform(rep, ctx, f_of, grid, band=band)
            worst = max(worst, float(np.max(np.abs((Tg - gT)[pos]))))
        parts.append(CheckReport(f"intertwining {name}", worst, tol))
    return combine("intertwining", parts, tol, generators=",".join(names))

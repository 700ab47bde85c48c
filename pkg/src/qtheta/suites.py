"""Verification suites for the example algebras.

A suite builds the flow, factorization, representation and kernel context
of one example and returns a list of :class:`CheckReport`, one per identity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import coherent as co
from . import factorization as fz
from . import kernels as kr
from . import representations as rp
from .config import RunConfig
from .flows import (DeformationFlow, SurfaceKind, casimir_drift, classify_surface, group_law_residual,
                    sklyanin_flow, su11_flow)
from .reports import CheckReport
from .theta import theta

DEFAULT_TOLERANCES = {
    "surface": 1e-12,
    "group_law": 1e-12,
    "casimir_drift": 1e-12,
    "factorization": 1e-12,
    "resonant_normalization": 1e-10,
    "relations": 1e-12,
    "sklyanin_original": 1e-11,
    "casimir_scalars": 1e-12,
    "B^N": 1e-10,
    "fiducial": 1e-10,
    "jacobi": 1e-10,
    "kernel_paths": 1e-10,
    "difference_system": 1e-9,
    "kernel_basis_sum": 1e-12,
    "monomial_action": 1e-12,
    "g_equation": 1e-9,
    "g_closed": 1e-8,
    "nu_factorial": 1e-9,
    "q_closed": 1e-12,
    "kahler_deviation": 1e-10,
    "quantization": 1e-6,
    "norms": 1e-8,
    "partition_of_unity": 1e-6,
    "transform_unitarity": 1e-6,
    "intertwining": 1e-6,
}

# cylinder quadratures are windowed: the tail bound loosens these
CYLINDER_TOLERANCES = {"transform_unitarity": 1e-5}
P_WEIGHTED_TOLERANCES = {"norms": 1e-6}
BAND = 4


@dataclass
class Example:
    """Everything a suite or a grid emission needs about one configured example."""

    flow: DeformationFlow
    fact: fz.FactorizationData
    rep: rp._Rep
    ctx: kr.KernelContext
    surface: object

    @property
    def is_torus(self) -> bool:
        return isinstance(self.rep, rp.TorusRep)


def build_example(cfg: RunConfig) -> Example:
    p = cfg.params
    if cfg.example == "sklyanin":
        flow = sklyanin_flow(p["phi"], p["kappa1"], p["psi"], p["a0"])
        fact = fz.sklyanin_factorization(p["phi"], p["kappa1"], p["psi"], p["a0"], p["tau"])
        surface = classify_surface(flow)
        N = p.get("N")
        if N is None and surface.resonance is not None:
            N = surface.resonance[0]
        if N is not None:
            fact = fz.normalize_resonant(fact, N, p["alpha"])
            rep = rp.build_torus_rep(flow, fact, N, p["alpha"])
            ctx = kr.torus_context(fact, N, rep.m, threads=cfg.threads)
        else:
            rep = rp.build_cylinder_rep(flow, fact, p["M"])
            ctx = kr.cylinder_context(fact, threads=cfg.threads)
    else:
        version = 1 if cfg.example == "su11-v1" else 2
        flow = su11_flow(p["a0"], p["a"], p["hbar"])
        fact = fz.su11_factorization(p["a0"], p["a"], p["hbar"], p["tau"], version)
        surface = classify_surface(flow)
        rep = rp.build_cylinder_rep(flow, fact, p["M"])
        ctx = kr.cylinder_context(fact, threads=cfg.threads)
    return Example(flow, fact, rep, ctx, surface)


class _Collector:
    def __init__(self, cfg: RunConfig, defaults: dict):
        self.cfg = cfg
        self.defaults = defaults
        self.reports: list[CheckReport] = []

    def tol(self, name: str) -> float:
        return self.cfg.tol(name, self.defaults[name])

    def add(self, name: str, residual: float, **params) -> None:
        self.reports.append(CheckReport(name, residual, self.tol(name), params=params))

    def add_report(self, name: str, report: CheckReport) -> None:
        """Re-threshold a library report against the configured tolerance."""
        tol = self.tol(name)
        self.reports.append(CheckReport(name, report.residual, tol, report.residual < tol, report.params))


def _jacobi_residual() -> float:
    alpha = 2 * math.pi * np.arange(50) / 50
    worst = 0.0
    for e in np.linspace(0.05, 5.0, 20):
        lhs = theta(alpha, e, method="direct")
        rhs = math.sqrt(math.pi / e) * np.exp(-alpha ** 2 / (4 * e)) * theta(
            1j * math.pi * alpha / e, math.pi ** 2 / e, method="direct")
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def _fiducial_residual(rep: rp._Rep) -> float:
    A, B, C = rep.matrices()
    v = np.zeros(B.shape[0], dtype=complex)
    v[rep.index_of(0)] = 1.0
    res = float(np.max(np.abs(B @ (C @ v) - rep.flow.a0 * v)))
    for a, aj in zip(A, rep.flow.a):
        res = max(res, float(np.max(np.abs(a @ v - aj * v))))
    return res


def _monomial_residual(rep: rp._Rep) -> float:
    """Shift matrices vs the exponential-operator action on monomials, relative to ``max |B|``."""
    action = rp.MonomialAction(rep.flow, rep.fact)
    if isinstance(rep, rp.TorusRep):
        return 0.0
    _, Bm, Cm = action.in_orthonormal_basis(-rep.M, rep.M)
    _, B, C = rep.matrices()
    inner = rep.interior()
    scale = float(np.max(np.abs(B)))
    return max(float(np.max(np.abs((Bm - B)[:, inner]))), float(np.max(np.abs((Cm - C)[:, inner])))) / scale


def _common(col: _Collector, ex: Example) -> None:
    flow, fact, rep = ex.flow, ex.fact, ex.rep
    h = flow.hbar
    ts = h * np.array([0.3, -1.7, 2.9, 5.1, -4.4])
    ss = h * np.array([1.1, 0.6, -2.3, 3.7, -0.9])
    col.add("group_law", group_law_residual(flow, ts, ss))
    drift = casimir_drift(flow, np.linspace(-10 * h, 10 * h, 201))
    col.add("casimir_drift", max(drift.values()), **drift)
    checks = fz.check_factorization(fact, flow, np.linspace(-5 * h, 5 * h, 41))
    margin = checks.pop("tau_margin", None)
    resid = max(checks.values())
    if margin is not None and margin <= 0:
        resid = math.inf
    col.add("factorization", resid, **checks, **({"tau_margin": margin} if margin is not None else {}))
    col.add_report("relations", rp.verify_relations(rep, tol=col.tol("relations")))
    if flow.name == "sklyanin":
        col.add_report("sklyanin_original", rp.verify_sklyanin_original(rep, tol=col.tol("sklyanin_original")))
    cas = rp.casimir_scalars(rep)
    devs = {name: dev / max(1.0, abs(mean)) for name, mean, dev in cas}
    col.add("casimir_scalars", max(devs.values()), **devs)
    col.add("fiducial", _fiducial_residual(rep))
    col.add("jacobi", _jacobi_residual())


def _torus_checks(col: _Collector, ex: Example) -> None:
    rep, ctx, cfg = ex.rep, ex.ctx, col.cfg
    N, h = rep.N, rep.hbar
    T0 = ex.surface.minimal_period
    col.add("surface", abs(rep.m * T0 - N * h) / (N * h), kind=ex.surface.kind.value, N=N, m=rep.m)
    col.add("resonant_normalization", max(fz.resonant_normalization_residual(ex.fact, N, rep.alpha)))
    P = np.linalg.matrix_power(rep.B, N)
    beta = rp.expected_beta(rep)
    col.add("B^N", float(np.max(np.abs(P - beta * np.eye(N)))) / max(1.0, abs(beta)),
            beta=beta)
    n_u = cfg.grid.n_u if cfg.grid else 128
    n_v = cfg.grid.n_v if cfg.grid else 128
    grid = kr.GridSpec(0.0, ctx.eps * N, n_u, n_v)
    U, V = kr.GridSpec(0.0, ctx.eps * N, 64, 64).mesh()
    z = U + 1j * V
    K = kr.kernel_torus(ctx, np.conj(z), z, "basis")
    paths = max(float(np.max(np.abs(kr.kernel_torus(ctx, np.conj(z), z, m) - K) / np.abs(K)))
                for m in ("fourier", "product"))
    col.add("kernel_paths", paths)
    col.add_report("difference_system", kr.kernel_torus_difference_system_check(ctx, tol=col.tol("difference_system")))
    col.add("quantization", abs(kr.quantization_integral(ctx, grid) - N), N=N)
    G = kr.gram_quadrature(ctx, grid=grid)
    col.add("norms", float(np.max(np.abs(G - np.eye(N)))))
    col.add_report("partition_of_unity", co.partition_of_unity(rep, ctx, grid, tol=col.tol("partition_of_unity")))
    R, Gt, _ = co.transform_gram(rep, ctx, grid)
    col.add("transform_unitarity", max(float(np.max(np.abs(Gt - np.eye(N)))), float(np.max(np.abs(R - np.eye(N))))))
    col.add_report("intertwining", co.intertwining_check(rep, ctx, "all", grid, tol=col.tol("intertwining")))


def _cylinder_checks(col: _Collector, ex: Example) -> None:
    rep, ctx, fact, cfg = ex.rep, ex.ctx, ex.fact, col.cfg
    h = rep.hbar
    ok = ex.surface.kind in (SurfaceKind.CYLINDER, SurfaceKind.TORUS)
    col.add("surface", 0.0 if ok else math.inf, kind=ex.surface.kind.value)
    col.add("monomial_action", _monomial_residual(rep))
    idx = np.arange(-BAND, BAND + 1)
    # kernel as a sum over the basis, points spread over a few lattice cells
    rng = np.random.default_rng(7)
    zb = rng.uniform(-3 * ctx.eps, 3 * ctx.eps, 16) - 1j * rng.uniform(0, 2 * math.pi, 16)
    n = np.arange(-rep.M, rep.M + 1)
    E = kr.cylinder_basis(ctx, zb, n)
    direct = np.sum(np.abs(E) ** 2, axis=1)
    K = kr.kernel_cylinder(ctx, zb, np.conj(zb))
    col.add("kernel_basis_sum", float(np.max(np.abs(K - direct) / np.abs(direct))), terms=int(n.size))
    x = np.linspace(-4 * ctx.eps, 4 * ctx.eps, 33)
    if fact.nu_is_unit:
        col.add("q_closed", float(np.max(np.abs(kr.q_function(ctx, x) / kr.q_unit_closed(ctx, x) - 1.0))))
        t = np.linspace(0.0, h, 33)
        dens = kr.kahler_density(ctx, t)
        col.add("kahler_deviation", float(np.max(np.abs(dens - 1.0 - kr.kahler_deviation_unit(ctx, t)))))
    else:
        ts = np.linspace(-4 * h, 4 * h, 9)
        p = cfg.params
        series = fz.su11_factorization(p["a0"], p["a"], p["hbar"], p["tau"], 2, g_method="series").g
        col.add("g_equation", fz.g_equation_defect(series, fact.nu, h, ts))
        col.add("g_closed", float(np.max(np.abs(series(ts) - fact.g(ts)))))
        k = np.arange(-5, 6)
        cont = np.array([fz.nu_factorial_continuous(fact.g, kk * h, h) for kk in k])
        col.add("nu_factorial", float(np.max(np.abs(cont / fact.nu_factorial(k) - 1.0))))
    grid = cfg.grid
    norms = max(abs(kr.norm_quadrature(ctx, [1.0], indices=[int(j)], grid=grid) - 1.0) for j in idx)
    col.add("norms", norms, indices=f"{-BAND}..{BAND}")
    col.add_report("partition_of_unity", co.partition_of_unity(rep, ctx, grid, col.tol("partition_of_unity"), BAND))
    R, G, ids = co.transform_gram(rep, ctx, grid, BAND)
    eye = np.eye(ids.size)
    col.add("transform_unitarity", max(float(np.max(np.abs(G - eye))), float(np.max(np.abs(R - eye)))),
            indices=f"{-BAND}..{BAND}")
    col.add_report("intertwining", co.intertwining_check(rep, ctx, "all", grid, col.tol("intertwining"), BAND))


def run_suite(cfg: RunConfig, example: Example | None = None) -> list[CheckReport]:
    """All checks for the configured example, in a fixed order."""
    ex = example or build_example(cfg)
    defaults = dict(DEFAULT_TOLERANCES)
    if not ex.is_torus:
        defaults.update(CYLINDER_TOLERANCES)
    if not ex.fact.nu_is_unit:
        defaults.update(P_WEIGHTED_TOLERANCES)
    col = _Collector(cfg, defaults)
    _common(col, ex)
    if ex.is_torus:
        _torus_checks(col, ex)
    else:
        _cylinder_checks(col, ex)
    return col.reports

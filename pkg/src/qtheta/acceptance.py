"""The twelve acceptance criteria as runnable checks.

Each criterion returns its sub-checks with their own tolerances; a
:class:`CriterionResult` passes only if every sub-check and the time budget
hold.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import coherent as co
from . import factorization as fz
from . import kernels as kr
from . import representations as rp
from .flows import rotation_flow, sklyanin_flow, su11_flow
from .theta import theta


@dataclass
class CriterionResult:
    """Outcome of one criterion.

    ``components`` maps a sub-check name to ``(residual, tolerance)``; the
    criterion passes when every component is below its tolerance and the
    wall time is within budget.
    """

    number: int
    title: str
    components: dict
    seconds: float
    budget: float
    details: dict = field(default_factory=dict)

    @property
    def worst(self) -> tuple[str, float, float]:
        def ratio(item):
            r, tol = item[1]
            return r / tol if math.isfinite(r) else math.inf
        name, (r, tol) = max(self.components.items(), key=ratio)
        return name, r, tol

    @property
    def residual(self) -> float:
        return self.worst[1]

    @property
    def tolerance(self) -> float:
        return self.worst[2]

    @property
    def passed(self) -> bool:
        ok = all(math.isfinite(r) and r < tol for r, tol in self.components.values())
        return bool(ok and self.seconds < self.budget)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        name, r, tol = self.worst
        return (f"{flag} criterion {self.number:2d} {self.title}: worst {name} residual={r:.3e} "
                f"(tol {tol:.0e}), time={self.seconds:.2f}s (budget {self.budget:g}s)")


# ---------------------------------------------------------------------------
# shared example builders


def sklyanin_torus(N: int, alpha: float = 0.0, tau: float = 1.0, kappa1: float = 1.0,
                   psi: float = 0.0, a0: float = 2.0):
    """``(rep, ctx)`` for the Sklyanin torus with ``phi = 2 pi / N``; ``N = 2`` uses the rotation flow."""
    if N == 2:
        flow = rotation_flow(math.pi, a0, math.sqrt(kappa1) * complex(math.cos(psi / 2), math.sin(psi / 2)))
        mu = lambda t: np.full(np.shape(t), math.sqrt(a0)) + 0j  # noqa: E731
        fact = fz.unit_factorization(flow, mu, tau)
    else:
        phi = 2 * math.pi / N
        flow = sklyanin_flow(phi, kappa1, psi, a0)
        fact = fz.sklyanin_factorization(phi, kappa1, psi, a0, tau)
    fact = fz.normalize_resonant(fact, N, alpha)
    rep = rp.build_torus_rep(flow, fact, N, alpha)
    return rep, kr.torus_context(fact, N, rep.m)


def su11_cylinder(version: int, M: int = 64, a0: float = 1.25, a: float = 0.0, hbar: float = 1.0,
                  tau: float = 1.0):
    flow = su11_flow(a0, a, hbar)
    fact = fz.su11_factorization(a0, a, hbar, tau, version)
    rep = rp.build_cylinder_rep(flow, fact, M)
    return rep, kr.cylinder_context(fact)


# parameters of the version-II example used by the norm, g and factorial criteria
SU11_V2 = dict(a0=2.0, a=0.7, hbar=0.5, tau=1.0)


# ---------------------------------------------------------------------------
# criteria


def criterion_1():
    alpha = 2 * math.pi * np.arange(50) / 50
    eps = np.linspace(0.05, 5.0, 20)
    worst = 0.0
    for e in eps:
        lhs = theta(alpha, e, method="direct")
        rhs = math.sqrt(math.pi / e) * np.exp(-alpha ** 2 / (4 * e)) * theta(1j * math.pi * alpha / e,
                                                                             math.pi ** 2 / e, method="direct")
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return {"duality": (worst, 1e-10)}, {}


def criterion_2():
    worst, beta_worst = 0.0, 0.0
    for N in (4, 3, 5, 8):
        rep, _ = sklyanin_torus(N)
        worst = max(worst, rp.verify_relations(rep).residual, rp.verify_sklyanin_original(rep).residual)
        P = np.linalg.matrix_power(rep.B, N)
        beta_worst = max(beta_worst, float(np.max(np.abs(P - rp.expected_beta(rep) * np.eye(N)))))
    return {"relations": (worst, 1e-11), "B^N": (beta_worst, 1e-10)}, {}


def criterion_3():
    comps = {}
    for version, pars in ((1, dict(a0=1.25, a=0.0, hbar=1.0, tau=1.0)), (2, SU11_V2)):
        rep, _ = su11_cylinder(version, 64, **pars)
        r = rp.verify_relations(rep).residual
        # the same matrices must come out of the exponential-operator action on monomials
        Am, Bm, Cm = rp.MonomialAction(rep.flow, rep.fact).in_orthonormal_basis(-64, 64)
        _, B, C = rep.matrices()
        inner = rep.interior()
        scale = float(np.max(np.abs(B)))
        mono = max(float(np.max(np.abs((Bm - B)[:, inner]))), float(np.max(np.abs((Cm - C)[:, inner])))) / scale
        comps[f"v{version} relations"] = (r, 1e-12)
        comps[f"v{version} monomial action"] = (mono, 1e-12)
    return comps, {}


def criterion_4():
    comps = {}
    for N in (2, 3, 4, 5, 8):
        _, ctx = sklyanin_torus(N)
        grid = kr.GridSpec(0.0, ctx.eps * N, 64, 64)
        U, V = grid.mesh()
        z = U + 1j * V
        direct = kr.kernel_torus(ctx, np.conj(z), z, "basis")
        closed = kr.kernel_torus(ctx, np.conj(z), z, "product")
        comps[f"N={N}"] = (float(np.max(np.abs(direct - closed) / np.abs(direct))), 1e-10)
    return comps, {}


def criterion_5():
    vals = {}
    for N in (4, 5):
        _, ctx = sklyanin_torus(N)
        vals[N] = kr.quantization_integral(ctx)
    return {f"N={N}": (abs(v - N), 1e-6) for N, v in vals.items()}, {f"N={N}": v for N, v in vals.items()}


def criterion_6():
    _, ctx = sklyanin_torus(4)
    torus = max(abs(kr.norm_quadrature(ctx, np.eye(4)[n]) - 1.0) for n in range(4))
    _, c1 = su11_cylinder(1, 16)
    v1 = max(abs(kr.norm_quadrature(c1, [1.0], indices=[n]) - 1.0) for n in range(-6, 7))
    _, c2 = su11_cylinder(2, 16, **SU11_V2)
    v2 = max(abs(kr.norm_quadrature(c2, [1.0], indices=[n]) - 1.0) for n in range(-6, 7))
    return {"torus nu=1": (torus, 1e-8), "cylinder nu=1": (v1, 1e-8), "cylinder su11 v2": (v2, 1e-6)}, {}


def criterion_7():
    comps = {}
    for N in range(2, 9):
        rep, ctx = sklyanin_torus(N)
        grid = kr.GridSpec(0.0, ctx.eps * N, 128, 128)
        comps[f"N={N}"] = (co.partition_of_unity(rep, ctx, grid).residual, 1e-6)
    return comps, {}


def criterion_8():
    rep, ctx = sklyanin_torus(4, alpha=0.3)
    R, G, _ = co.transform_gram(rep, ctx)
    torus = max(float(np.max(np.abs(G - np.eye(4)))), float(np.max(np.abs(R - np.eye(4)))))
    crep, cctx = su11_cylinder(1, 24)
    Rc, Gc, idx = co.transform_gram(crep, cctx, band=6)
    cyl = max(float(np.max(np.abs(Gc - np.eye(idx.size)))), float(np.max(np.abs(Rc - np.eye(idx.size)))))
    return {"torus": (torus, 1e-6), "windowed cylinder": (cyl, 1e-5)}, {}


def criterion_9():
    rep, ctx = sklyanin_torus(4, alpha=0.3)
    report = co.intertwining_check(rep, ctx, "all")
    return {k: (v, 1e-6) for k, v in report.params["components"].items()}, {}


def criterion_10():
    hbars = (0.5, 0.25, 0.125)
    devs = []
    for h in hbars:
        fact = fz.su11_factorization(1.25, 0.0, h, 1.0, 1)
        ctx = kr.cylinder_context(fact)
        t = np.linspace(0.0, h, 257)
        devs.append(float(np.max(np.abs(kr.kahler_deviation_unit(ctx, t)))))
    slope = float(np.polyfit([1 / h for h in hbars], np.log(devs), 1)[0])
    rel = abs(slope + math.pi ** 2) / math.pi ** 2
    return {"relative slope error": (rel, 0.1)}, {"slope": slope, "deviations": devs}


def criterion_11():
    p = SU11_V2
    series = fz.su11_factorization(p["a0"], p["a"], p["hbar"], p["tau"], 2, g_method="series")
    closed = fz.su11_factorization(p["a0"], p["a"], p["hbar"], p["tau"], 2, g_method="closed")
    ts = np.linspace(-4.0, 4.0, 9)
    defect = fz.g_equation_defect(series.g, series.nu, p["hbar"], ts)
    match = float(np.max(np.abs(series.g(ts) - closed.g(ts))))
    unit = fz.solve_g_series(lambda t: np.ones_like(np.asarray(t, dtype=complex)), fz.Asymptotics(), 1.0)
    unit_defect = float(np.max(np.abs(unit(ts))))
    return {"su11 v2 defect": (defect, 1e-9), "nu=1 defect": (unit_defect, 1e-9),
            "series vs closed form": (match, 1e-8)}, {}


def criterion_12():
    p = SU11_V2
    fact = fz.su11_factorization(p["a0"], p["a"], p["hbar"], p["tau"], 2)
    n = np.arange(-5, 6)
    lattice = fact.nu_factorial(n)
    cont = np.array([fz.nu_factorial_continuous(fact.g, k * p["hbar"], p["hbar"]) for k in n])
    su11 = float(np.max(np.abs(cont / lattice - 1.0)))
    sk = fz.sklyanin_factorization(math.pi / 2, 1.0, 0.0, 2.0, 1.0)
    zero_g = lambda t: np.zeros_like(np.asarray(t, dtype=complex))  # noqa: E731
    sk_cont = np.array([fz.nu_factorial_continuous(zero_g, float(k), 1.0) for k in n])
    skl = float(np.max(np.abs(sk_cont - sk.nu_factorial(n))))
    return {"su11 v2": (su11, 1e-9), "sklyanin": (skl, 1e-9)}, {}


CRITERIA: dict[int, tuple[str, float, Callable]] = {
    1: ("Jacobi duality", 1.0, criterion_1),
    2: ("Sklyanin torus relations and B^N", 1.0, criterion_2),
    3: ("su(1,1) cylinder relations, M=64", 1.0, criterion_3),
    4: ("closed product form of the torus kernel", 10.0, criterion_4),
    5: ("quantization integral equals N", 30.0, criterion_5),
    6: ("integral norms of basis vectors", 60.0, criterion_6),
    7: ("partition of unity on tori N <= 8", 120.0, criterion_7),
    8: ("coherent transform round trip and unitarity", 120.0, criterion_8),
    9: ("intertwining on the N=4 torus", 60.0, criterion_9),
    10: ("exponentially small Kähler deviation", 10.0, criterion_10),
    11: ("g-equation defect and closed form", 5.0, criterion_11),
    12: ("continuous vs lattice nu_!", 5.0, criterion_12),
}


def run_criterion(number: int) -> CriterionResult:
    title, budget, fn = CRITERIA[number]
    start = time.perf_counter()
    components, details = fn()
    seconds = time.perf_counter() - start
    components = {k: (float(r), float(t)) for k, (r, t) in components.items()}
    return CriterionResult(number, title, components, seconds, budget, details)


def run_all(numbers=None):
    return [run_criterion(k) for k in (numbers or sorted(CRITERIA))]

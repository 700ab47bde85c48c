import math

import pytest

from qtheta import factorization as fz
from qtheta import kernels as kr
from qtheta import representations as rp
from qtheta.acceptance import SU11_V2, sklyanin_torus
from qtheta.flows import sklyanin_flow, su11_flow


@pytest.fixture(scope="session")
def torus4():
    """Sklyanin torus, phi = pi/2 (N = 4), alpha = 0.3."""
    return sklyanin_torus(4, alpha=0.3)


@pytest.fixture(scope="session")
def torus8():
    """phi = 3 pi / 4: period 8/3, so N = 8 with an m = 3 covering."""
    phi = 3 * math.pi / 4
    flow = sklyanin_flow(phi, 1.0, 0.0, 3.0)
    fact = fz.normalize_resonant(fz.sklyanin_factorization(phi, 1.0, 0.0, 3.0, 1.0), 8, 0.7)
    rep = rp.build_torus_rep(flow, fact, 8, 0.7)
    return rep, kr.torus_context(fact, 8, rep.m)


@pytest.fixture(scope="session")
def su11_v1():
    flow = su11_flow(1.25, 0.0, 1.0)
    fact = fz.su11_factorization(1.25, 0.0, 1.0, 1.0, 1)
    return rp.build_cylinder_rep(flow, fact, 24), kr.cylinder_context(fact)


@pytest.fixture(scope="session")
def su11_v2():
    p = SU11_V2
    flow = su11_flow(p["a0"], p["a"], p["hbar"])
    fact = fz.su11_factorization(p["a0"], p["a"], p["hbar"], p["tau"], 2)
    return rp.build_cylinder_rep(flow, fact, 24), kr.cylinder_context(fact)

import math

import mpmath
import pytest

from src.models.tolerance import ToleranceConfig
from src.services.es_solver import solve_es
from src.services.trigonal_curve import periods_symmetric

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)

# −Γ(1/6)Γ(1/3) / (2^{1/6} √3 · 2√3 √π)
TETRAHEDRAL_CHI_CUBEROOT = -float(
    mpmath.gamma(mpmath.mpf(1) / 6) * mpmath.gamma(mpmath.mpf(1) / 3)
    / (mpmath.mpf(2) ** (mpmath.mpf(1) / 6) * mpmath.sqrt(3) * 2 * mpmath.sqrt(3) * mpmath.sqrt(mpmath.pi))
)


@pytest.fixture(scope="session")
def cfg():
    return ToleranceConfig()


@pytest.fixture(scope="session")
def tetrahedral_es(cfg):
    return solve_es(1, 1, cfg)


@pytest.fixture(scope="session")
def tetrahedral_periods(tetrahedral_es, cfg):
    return periods_symmetric(tetrahedral_es.b, cfg)


@pytest.fixture(scope="session")
def es_2_1(cfg):
    return solve_es(2, 1, cfg)


@pytest.fixture(scope="session")
def periods_2_1(es_2_1, cfg):
    return periods_symmetric(es_2_1.b, cfg)


@pytest.fixture(params=[0.3, 0.6, 0.9])
def charge2_k(request):
    return request.param

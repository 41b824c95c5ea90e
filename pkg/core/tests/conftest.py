import pytest

from core.orbits.dynamics import BROUCKE_HENON_T0, ShootingProblem, integrate, shoot_henon
from core.orbits.minimize import minimize_free
from core.runner import Runner
from core.utils.types import MinimizeConfig


@pytest.fixture
def runner():
    return Runner()


@pytest.fixture(scope="session")
def henon_state():
    """Broucke-Henon t=0 state refined until the t=1 residuals vanish."""
    return shoot_henon(ShootingProblem.from_state(BROUCKE_HENON_T0))


@pytest.fixture(scope="session")
def henon_quarter(henon_state):
    return integrate(henon_state, 1.0, samples=1001)


@pytest.fixture(scope="session")
def schubart_min():
    cfg = MinimizeConfig(
        grid=256,
        grading=3.0,
        family="qs1_qe1",
        seed="collinear_testpath",
        levels=3,
        max_iterations=20_000,
    )
    return minimize_free(cfg)

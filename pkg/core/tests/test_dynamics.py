import numpy as np
import pytest

from core.orbits import bounds
from core.orbits.dynamics import (
    BROUCKE_HENON_T0,
    SCHUBART_T1,
    ShootingProblem,
    accelerations,
    angular_momentum,
    collision_direction,
    energy,
    integrate,
    named_state,
    pair_lagrangian,
    relative_y_velocity,
    schubart_quarter,
    shoot_henon,
    trajectory_action,
)
from core.orbits.model import Configuration, PhaseState, com_and_momentum
from core.utils.exceptions import (
    NotAtCollisionError,
    PreconditionError,
    ShootingDivergenceError,
    SingularJacobianError,
)


@pytest.fixture(scope="module")
def schubart():
    return schubart_quarter()


def test_published_data_is_balanced():
    for s in (BROUCKE_HENON_T0, SCHUBART_T1):
        com, momentum = com_and_momentum(s)
        np.testing.assert_allclose(com, 0.0, atol=1e-4)
        np.testing.assert_allclose(momentum, 0.0, atol=1e-4)


def test_named_states():
    assert named_state("broucke-henon") is BROUCKE_HENON_T0
    assert named_state("schubart_t1").time == 1.0
    np.testing.assert_allclose(named_state("lagrange").positions, bounds.lagrange_state(0.0).positions)
    with pytest.raises(PreconditionError):
        named_state("figure-eight")


def test_accelerations_equilateral():
    q = Configuration.from_raw([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    a = accelerations(q)
    for i in range(3):
        assert np.linalg.norm(a[i]) == pytest.approx(np.sqrt(3))
        # pointing at the centroid (the origin)
        cos = -np.dot(a[i], q.positions[i]) / (np.linalg.norm(a[i]) * np.linalg.norm(q.positions[i]))
        assert cos == pytest.approx(1.0)
    np.testing.assert_allclose(a.sum(axis=0), 0.0, atol=1e-15)


def test_integrate_rejects_unbalanced_state():
    s = PhaseState([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]], np.zeros((3, 2)))
    with pytest.raises(PreconditionError):
        integrate(s, 1.0)


def test_integrate_rejects_start_inside_event_radius():
    s = PhaseState([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]], np.zeros((3, 2)))
    with pytest.raises(PreconditionError):
        integrate(s, 1.0)


def test_lagrange_stays_on_circle():
    tr = integrate(bounds.lagrange_state(0.0), 4.0, samples=401)
    expected = np.stack([bounds.lagrange_state(t).positions for t in tr.times])
    np.testing.assert_allclose(tr.positions, expected, atol=1e-8)
    assert tr.energy_drift() < 1e-9
    assert tr.status == "completed"


def test_lagrange_quarter_action():
    tr = integrate(bounds.lagrange_state(0.0), 1.0)
    assert trajectory_action(tr, 0.0, 1.0) == pytest.approx(4.21617, abs=1e-3)


def test_broucke_henon_returns_after_period(henon_state):
    tr = integrate(henon_state, 4.0)
    assert tr.status == "completed"
    deviation = np.abs(tr.end_state.as_vector() - tr.start_state.as_vector()).max()
    assert deviation < 1e-3
    assert tr.energy_drift() < 1e-9
    assert tr.angular_momentum_drift() < 1e-9
    half = tr.state_at(2.0)
    np.testing.assert_allclose(half.positions[:, 1], 0.0, atol=1e-3)
    assert np.abs(half.velocities[:, 0]).max() < 1e-3


def test_rounded_data_is_within_shooting_reach(henon_state):
    # the 4-decimal data misses closure by a few percent but sits next to the refined state
    raw = integrate(BROUCKE_HENON_T0, 4.0)
    assert np.abs(raw.end_state.as_vector() - raw.start_state.as_vector()).max() < 0.2
    assert raw.energy_drift() < 1e-9
    assert np.abs(henon_state.as_vector() - BROUCKE_HENON_T0.as_vector()).max() < 5e-4


def test_broucke_henon_quarter_action():
    tr = integrate(BROUCKE_HENON_T0, 1.0)
    assert trajectory_action(tr, 0.0, 1.0) == pytest.approx(3.46, abs=0.01)


def test_quarter_actions_follow_the_virial_identity(henon_quarter, henon_state, schubart):
    # <U> = -2E over a period, so a quarter whose ends have q.v = 0 has action -3E
    assert trajectory_action(henon_quarter, 0.0, 1.0) == pytest.approx(-3.0 * energy(henon_state), abs=1e-3)
    assert schubart.action == pytest.approx(-3.0 * energy(SCHUBART_T1), abs=3e-3)
    lagrange = integrate(bounds.lagrange_state(0.0), 1.0)
    assert trajectory_action(lagrange, 0.0, 1.0) == pytest.approx(-3.0 * energy(lagrange.start_state), abs=1e-3)


def test_conserved_quantities():
    tr = integrate(BROUCKE_HENON_T0, 1.0, samples=101)
    np.testing.assert_allclose(tr.momentum, 0.0, atol=1e-10)
    assert angular_momentum(BROUCKE_HENON_T0) == pytest.approx(tr.angular_momentum[-1], abs=1e-9)
    assert energy(BROUCKE_HENON_T0) == pytest.approx(tr.energy[-1], rel=1e-9)


def test_forward_then_backward_returns():
    tol = 1e-12
    fwd = integrate(BROUCKE_HENON_T0, 0.5, tol)
    back = integrate(fwd.end_state, 0.0, tol)
    assert back.backward
    np.testing.assert_allclose(back.end_state.as_vector(), BROUCKE_HENON_T0.as_vector(), atol=1e-9)
    assert back.times[0] == pytest.approx(0.0)
    assert np.all(np.diff(back.times) > 0)


def test_dense_output():
    tr = integrate(bounds.lagrange_state(0.0), 1.0, samples=11)
    s = tr.state_at(0.55)
    np.testing.assert_allclose(s.positions, bounds.lagrange_state(0.55).positions, atol=1e-9)
    with pytest.raises(PreconditionError):
        tr.state_at(1.5)


def test_collinear_data_stays_collinear():
    tr = integrate(SCHUBART_T1, 1.5, samples=201)
    assert np.all(tr.positions[..., 1] == 0.0)
    assert np.all(tr.velocities[..., 1] == 0.0)


# region shooting
def test_shooting_problem_state():
    u = ShootingProblem(-0.9, -0.7, -2.4, 2.2)
    s = u.state()
    assert s.is_balanced()
    np.testing.assert_array_equal(s.positions[:, 1], 0.0)
    np.testing.assert_array_equal(s.velocities[:, 0], 0.0)
    assert ShootingProblem.from_state(s) == u
    assert u.rounded(0).as_array().tolist() == [-1.0, -1.0, -2.0, 2.0]


def test_shoot_from_published_data(henon_state):
    tr = integrate(henon_state, 1.0, samples=2)
    assert np.abs(ShootingProblem.residuals(tr.end_state)).max() < 1e-9
    np.testing.assert_allclose(henon_state.as_vector(), BROUCKE_HENON_T0.as_vector(), atol=5e-4)


def test_shoot_from_two_decimals():
    guess = ShootingProblem.from_state(BROUCKE_HENON_T0).rounded(2)
    refined = shoot_henon(guess)
    tr = integrate(refined, 1.0, samples=2)
    assert np.abs(ShootingProblem.residuals(tr.end_state)).max() < 1e-8
    np.testing.assert_allclose(refined.as_vector(), BROUCKE_HENON_T0.as_vector(), atol=5e-4)


def test_shoot_far_guess_fails():
    with pytest.raises((ShootingDivergenceError, SingularJacobianError, PreconditionError)):
        shoot_henon(ShootingProblem(-0.9031, -0.7321, 0.0, 0.0), max_iterations=5)


def test_refined_orbit_is_periodic(henon_state):
    tr = integrate(henon_state, 4.0)
    deviation = np.abs(tr.end_state.as_vector() - tr.start_state.as_vector()).max()
    assert deviation < 1e-6


def test_refined_orbit_at_half_period(henon_state):
    s = integrate(henon_state, 2.0, samples=2).end_state
    np.testing.assert_allclose(s.positions[:, 1], 0.0, atol=1e-6)
    assert np.abs(s.velocities[:, 0]).max() < 1e-3


# endregion


# region collisions
def test_collision_helpers_need_an_event():
    tr = integrate(BROUCKE_HENON_T0, 0.5, samples=11)
    with pytest.raises(NotAtCollisionError):
        collision_direction(tr)


def test_schubart_backward_run(schubart):
    tr = schubart.trajectory
    assert tr.status == "collision"
    assert tr.event_pair == (0, 1)
    assert tr.backward
    assert abs(schubart.collision_time) < 0.05


def test_schubart_collision_direction(schubart):
    d = schubart.direction
    assert abs(abs(d[0]) - 1.0) < 1e-3
    assert abs(d[1]) < 1e-3
    assert relative_y_velocity(schubart.trajectory) == 0.0


def test_schubart_quarter_action(schubart):
    assert schubart.action == pytest.approx(3.4745, abs=5e-3)
    assert 0 < schubart.tail_action < 0.01


def test_ejection_gamma_estimate(schubart):
    assert schubart.gamma0 == pytest.approx(9.0 ** (1.0 / 3.0), abs=1e-2)


def test_pair_lagrangian():
    s = PhaseState([[-0.5, 0.0], [0.5, 0.0], [0.0, 0.0]], [[1.0, 0.0], [-1.0, 0.0], [0.0, 0.0]])
    # |dr| = 2, r = 1
    assert pair_lagrangian(s) == pytest.approx(0.25 * 4 + 1.0)


# endregion

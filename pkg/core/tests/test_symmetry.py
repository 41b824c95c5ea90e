import numpy as np
import pytest

from core.orbits import bounds
from core.orbits.dynamics import integrate
from core.orbits.minimize import MinimizeResult
from core.orbits.symmetry import (
    PERIOD,
    PeriodicOrbit,
    Quarter,
    as_quarter,
    extend,
    extend_antisymmetric,
    extend_henon,
    junction_report,
    verify_d2,
)
from core.utils.exceptions import PreconditionError
from core.utils.types import ExtensionMode


@pytest.fixture(scope="module")
def henon_orbit(henon_quarter):
    return extend_henon(henon_quarter)


@pytest.fixture(scope="module")
def lagrange_quarter():
    return integrate(bounds.lagrange_state(0.0), 1.0, samples=501)


def test_orbit_spans_one_period(henon_orbit: PeriodicOrbit):
    assert henon_orbit.times[0] == 0.0
    assert henon_orbit.times[-1] == pytest.approx(PERIOD)
    assert np.all(np.diff(henon_orbit.times) > 0)
    assert henon_orbit.provenance == ExtensionMode.henon


def test_henon_extension_matches_integration(henon_state, henon_orbit: PeriodicOrbit):
    direct = integrate(henon_state, PERIOD, t_eval=henon_orbit.times)
    np.testing.assert_allclose(henon_orbit.positions, direct.positions, atol=1e-5)
    np.testing.assert_allclose(henon_orbit.velocities, direct.velocities, atol=1e-4)


def test_henon_junctions_are_smooth(henon_orbit: PeriodicOrbit):
    rows = junction_report(henon_orbit)
    assert [r.time for r in rows] == [1.0, 2.0, 3.0, 4.0]
    assert not any(r.collision for r in rows)
    assert max(max(r.position_jump, r.velocity_jump) for r in rows) < 1e-6


def test_henon_orbit_passes_d2(henon_orbit: PeriodicOrbit):
    report = verify_d2(henon_orbit, tol=1e-5)
    assert report.passed, report.to_dict()


def test_henon_energy_is_constant(henon_orbit: PeriodicOrbit):
    e = henon_orbit.energy()
    assert np.abs(e - e[0]).max() / abs(e[0]) < 1e-8


def test_periodic_evaluation(henon_orbit: PeriodicOrbit):
    t = np.array([0.3, 1.7, 3.2])
    np.testing.assert_allclose(henon_orbit.positions_at(t + PERIOD), henon_orbit.positions_at(t), atol=1e-12)
    assert henon_orbit.velocities_at(0.5).shape == (3, 2)


def test_d2_detects_a_broken_orbit(henon_orbit: PeriodicOrbit):
    positions = np.array(henon_orbit.positions)
    window = (henon_orbit.times >= 0.5) & (henon_orbit.times <= 1.0)
    positions[window, 0, 0] += 1e-3
    broken = PeriodicOrbit(
        henon_orbit.times, positions, henon_orbit.velocities, henon_orbit.provenance
    )
    report = verify_d2(broken, tol=1e-5)
    assert not report.passed
    t = report.worst_time
    assert 0.45 <= t <= 1.05 or 2.45 <= t <= 3.05 or 2.95 <= t <= 3.55


def test_antisymmetric_lagrange_matches_circle(lagrange_quarter):
    orbit = extend_antisymmetric(lagrange_quarter)
    expected = np.stack([bounds.lagrange_state(t).positions for t in orbit.times])
    np.testing.assert_allclose(orbit.positions, expected, atol=1e-8)
    e = orbit.energy()
    assert np.abs(e - e[0]).max() / abs(e[0]) < 1e-8
    assert verify_d2(orbit, tol=1e-5).passed


def test_henon_rejects_lagrange(lagrange_quarter):
    with pytest.raises(PreconditionError):
        extend_henon(lagrange_quarter)


def test_schubart_minimizer_henon_extension(schubart_min: MinimizeResult):
    orbit = extend_henon(schubart_min.path, tol=0.1)
    rows = junction_report(orbit)
    assert rows[1].collision and rows[3].collision

    a2 = schubart_min.boundary_params.a2
    k = int(np.argmin(np.abs(orbit.times - 2.0)))
    assert orbit.times[k] == pytest.approx(2.0)
    np.testing.assert_allclose(orbit.positions[k], [[a2, 0.0], [-2 * a2, 0.0], [a2, 0.0]], atol=1e-2)
    # bodies 1 and 3 collide at the half period
    assert np.linalg.norm(orbit.positions[k, 0] - orbit.positions[k, 2]) < 1e-2


def test_schubart_minimizer_is_not_antisymmetric(schubart_min: MinimizeResult):
    with pytest.raises(PreconditionError):
        extend_antisymmetric(schubart_min.path)


def test_extensions_agree_on_first_half(schubart_min: MinimizeResult):
    a = extend(schubart_min.path, "henon", strict=False)
    b = extend(schubart_min.path, ExtensionMode.antisymmetric, strict=False)
    first = a.times <= 2.0
    np.testing.assert_array_equal(a.times[first], b.times[first])
    np.testing.assert_array_equal(a.positions[first], b.positions[first])


def test_collinear_quarter_stays_collinear(schubart_min: MinimizeResult):
    orbit = extend_henon(schubart_min.path, tol=0.1)
    assert np.abs(orbit.positions[..., 1]).max() < 1e-6


def test_as_quarter_validation():
    tr = integrate(bounds.lagrange_state(0.0), 2.0, samples=11)
    with pytest.raises(PreconditionError):
        as_quarter(tr)
    with pytest.raises(PreconditionError):
        as_quarter("not a quarter")
    q = Quarter(np.linspace(0, 1, 2), np.zeros((2, 3, 2)), np.zeros((2, 3, 2)))
    with pytest.raises(PreconditionError):
        as_quarter(q)


def test_orbit_validates_span(henon_orbit: PeriodicOrbit):
    with pytest.raises(PreconditionError):
        PeriodicOrbit(
            henon_orbit.times[:-5], henon_orbit.positions[:-5], henon_orbit.velocities[:-5], ExtensionMode.henon
        )


def test_orbit_quarter_round_trip(henon_quarter, henon_orbit: PeriodicOrbit):
    q = henon_orbit.quarter()
    np.testing.assert_array_equal(q.times, henon_quarter.times)
    again = extend_henon(henon_orbit)
    np.testing.assert_array_equal(again.positions, henon_orbit.positions)

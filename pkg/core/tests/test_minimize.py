from dataclasses import replace

import numpy as np
import pytest

from core import settings
from core.orbits import bounds, fileio
from core.orbits.action import discrete_action
from core.orbits.dynamics import SCHUBART_T1, energy
from core.orbits.minimize import (
    MinimizeResult,
    boundary_velocities,
    first_variation_report,
    minimize_free,
    minimize_inner,
    resample,
    seed_path,
)
from core.orbits.model import BoundaryParams, DiscretePath, build_qe2, make_grid
from core.utils.exceptions import CollisionError
from core.utils.types import BoundaryFamily, MinimizeConfig, SeedKind

LAGRANGE_QUARTER = 4.21617
# a period-4 orbit has <U> = -2E, so the quarter action is -3E (about 3.4745)
SCHUBART_QUARTER = -3.0 * energy(SCHUBART_T1)


def _straight_line(n: int) -> DiscretePath:
    t = make_grid(n)
    start, end = bounds.lagrange_state(0.0).positions, bounds.lagrange_state(1.0).positions
    return DiscretePath(t, (1 - t)[:, None, None] * start + t[:, None, None] * end)


@pytest.fixture(scope="module")
def lagrange_inner():
    return minimize_inner(_straight_line(32), MinimizeConfig(family="fixed", grid=32))


def test_config_validation():
    with pytest.raises(ValueError):
        MinimizeConfig(grid=8)
    with pytest.raises(ValueError):
        MinimizeConfig(gradient_tol=0.0)
    with pytest.raises(ValueError):
        MinimizeConfig(seed="from_file")


def test_config_accepts_cli_spellings():
    cfg = MinimizeConfig(family="qs3-qe3", seed="lagrange")
    assert cfg.family == BoundaryFamily.qs3_qe3
    assert cfg.seed == SeedKind.lagrange_quarter


def test_inner_descent_is_monotone(lagrange_inner: MinimizeResult):
    history = np.array(lagrange_inner.history)
    assert np.all(np.diff(history) <= 1e-12)
    assert lagrange_inner.action.total <= history[0]


def test_inner_keeps_boundary_fixed(lagrange_inner: MinimizeResult):
    seed = _straight_line(32)
    np.testing.assert_array_equal(lagrange_inner.path.nodes[0], seed.nodes[0])
    np.testing.assert_array_equal(lagrange_inner.path.nodes[-1], seed.nodes[-1])


def test_inner_reconverges_after_perturbation(lagrange_inner: MinimizeResult):
    rng = np.random.default_rng(5)
    nodes = np.array(lagrange_inner.path.nodes)
    nodes[1:-1] += 1e-3 * rng.standard_normal(nodes[1:-1].shape)
    nodes[1:-1] -= nodes[1:-1].mean(axis=1, keepdims=True)
    again = minimize_inner(DiscretePath(lagrange_inner.path.times, nodes), MinimizeConfig(family="fixed", grid=32))
    assert again.action.total == pytest.approx(lagrange_inner.action.total, abs=1e-8)


def test_inner_recovers_lagrange_arc():
    result = minimize_inner(_straight_line(512), MinimizeConfig(family="fixed", grid=512))
    assert result.action.total == pytest.approx(LAGRANGE_QUARTER, abs=1e-2)
    assert result.min_distance > 0.5


def test_inner_from_static_path_does_not_increase_action():
    c = build_qe2(1.0).positions
    static = DiscretePath(make_grid(16), np.stack([c] * 17))
    start = discrete_action(static).total
    result = minimize_inner(static, MinimizeConfig(family="fixed", grid=16, max_iterations=200))
    assert result.action.total <= start + 1e-12
    np.testing.assert_array_equal(result.path.nodes[0], c)
    np.testing.assert_array_equal(result.path.nodes[-1], c)


def test_inner_rejects_colliding_seed():
    with pytest.raises(CollisionError):
        minimize_inner(bounds.test_path_nodes(make_grid(32, 1.5)), MinimizeConfig(family="fixed", grid=32, r_floor=0.5))


def test_schubart_from_test_path(schubart_min: MinimizeResult):
    assert schubart_min.action.total == pytest.approx(SCHUBART_QUARTER, abs=5e-3)
    params = schubart_min.boundary_params
    assert isinstance(params, BoundaryParams)
    assert params.a1 < 1e-3
    assert np.abs(schubart_min.path.nodes[..., 1]).max() < 1e-6
    assert schubart_min.action.total < bounds.test_path_action().total


def test_schubart_reports_convergence(schubart_min: MinimizeResult):
    assert schubart_min.termination in ("gradient", "stalled")
    summary = schubart_min.summary()
    assert summary["converged"] is schubart_min.converged
    assert schubart_min.converged == (
        schubart_min.termination == "gradient" or schubart_min.gradient_norm < settings.CONVERGED_GRADIENT
    )


def test_stall_with_large_gradient_is_not_converged(schubart_min: MinimizeResult):
    stuck = replace(schubart_min, termination="stalled", gradient_norm=1.5e-4)
    assert not stuck.converged
    assert stuck.summary()["converged"] is False
    assert replace(schubart_min, termination="gradient").converged
    assert not replace(schubart_min, termination="max_iterations").converged


def test_stall_restarts_before_stopping():
    # a loose window makes every iteration look stalled
    cfg = MinimizeConfig(grid=32, family="qs3_qe3", seed="lagrange", action_rtol=0.5, stall_window=1)
    result = minimize_free(cfg)
    assert result.termination in ("gradient", "stalled")
    if not result.converged:
        assert result.iterations == settings.STALL_RESTARTS + 1


def test_grid_doubling_changes_schubart_action_little(schubart_min: MinimizeResult):
    coarse = minimize_free(
        MinimizeConfig(grid=128, grading=3.0, family="qs1_qe1", levels=2, max_iterations=20_000)
    )
    assert abs(coarse.action.total - schubart_min.action.total) < 1e-2


def test_schubart_first_variation(schubart_min: MinimizeResult):
    rows = {r.condition: r for r in first_variation_report(schubart_min)}
    assert set(rows) == {"v1x(0)", "v2x(0)", "v3x(0)", "v1y(1)", "v2y(1) + v3y(1)", "v2x(1) - v3x(1)"}
    # collinear: the y conditions hold exactly
    assert rows["v1y(1)"].residual == 0.0
    assert abs(rows["v2x(1) - v3x(1)"].residual) < 1e-2
    assert abs(rows["v3x(0)"].residual) < 5e-2


def test_lagrange_auxiliary_problem():
    cfg = MinimizeConfig(grid=128, family="qs3_qe3", seed="lagrange_quarter", max_iterations=20_000)
    result = minimize_free(cfg)
    assert result.action.total == pytest.approx(LAGRANGE_QUARTER, abs=5e-3)
    assert result.min_distance > 0.5
    assert result.summary()["family"] == "qs3_qe3"


@pytest.mark.slow
def test_schubart_acceptance_grid():
    cfg = MinimizeConfig(grid=2048, grading=3.0, family="qs1_qe1", levels=4, max_iterations=50_000)
    result = minimize_free(cfg)
    assert result.action.total == pytest.approx(SCHUBART_QUARTER, abs=5e-3)
    assert result.boundary_params.a1 < 1e-3
    assert np.abs(result.path.nodes[..., 1]).max() < 1e-6


def test_grid_continuation_levels():
    cfg = MinimizeConfig(grid=64, levels=3, family="qs3_qe3", seed="lagrange", max_iterations=2_000)
    result = minimize_free(cfg)
    assert result.path.n_segments == 64


def test_seed_from_file(tmp_path):
    seed = bounds.lagrange_path(make_grid(40))
    path = fileio.write_trajectory(fileio.from_path(seed), str(tmp_path / "seed.json"))
    cfg = MinimizeConfig(grid=16, seed="from_file", seed_path=path, family="qs3_qe3")
    loaded = seed_path(cfg, make_grid(16))
    assert loaded.n_segments == 16
    # resampled nodes lie on the chords of the seed
    np.testing.assert_allclose(loaded.nodes[0], seed.nodes[0], atol=1e-12)
    np.testing.assert_allclose(loaded.nodes[-1], seed.nodes[-1], atol=1e-12)


def test_resample_identity():
    p = bounds.lagrange_path(make_grid(16))
    np.testing.assert_allclose(resample(p, p.times).nodes, p.nodes, atol=1e-15)


def test_boundary_velocities_exact_for_quadratics():
    t = make_grid(10, 1.5)
    a = np.array([[1.0, -2.0], [0.5, 0.0], [-1.5, 2.0]])
    b = np.array([[0.0, 1.0], [-1.0, 0.0], [1.0, -1.0]])
    nodes = a[None] * t[:, None, None] ** 2 + b[None] * t[:, None, None]
    v0, v1 = boundary_velocities(t, nodes)
    np.testing.assert_allclose(v0, b, atol=1e-12)
    np.testing.assert_allclose(v1, 2 * a + b, atol=1e-12)


def test_first_variation_on_lagrange_quarter():
    rows = first_variation_report(bounds.lagrange_path(make_grid(512)), "qs3_qe3")
    assert {r.condition for r in rows} >= {"v1x(0)", "v2y(0) - v3y(0)", "v1y(1)"}
    assert max(abs(r.residual) for r in rows) < 1e-4


def test_first_variation_fixed_family_is_empty():
    assert first_variation_report(bounds.lagrange_path(make_grid(8)), "fixed") == []


def test_minimizer_beats_seed_action():
    cfg = MinimizeConfig(grid=32, family="qs3_qe3", seed="lagrange", max_iterations=500)
    seed = bounds.lagrange_path(make_grid(32))
    result = minimize_free(cfg)
    assert result.action.total <= discrete_action(seed).total + 1e-12

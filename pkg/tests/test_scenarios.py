import numpy as np
import pytest

from nsverify.claims import convective_residual
from nsverify.errors import ConfigError
from nsverify.fields import STAGGERED, divergence, l2_norm
from nsverify.grid import GridSpec
from nsverify.scenarios import SCENARIO_NAMES, Scenario, build_forcing
from nsverify.solvers import ForcingSpec


def make(name, grid=None, seed=None, mu=0.1):
    grid = grid or GridSpec.periodic(32)
    return Scenario(
        name=name, grid=grid, viscosity=mu, forcing=ForcingSpec.zero(),
        boundary=None, seed=seed,
    )


@pytest.mark.parametrize("name", SCENARIO_NAMES)
def test_torus_initial_fields_solenoidal(name):
    scenario = make(name, seed=42 if name == "random_solenoidal" else None)
    v = scenario.initial_velocity()
    assert divergence(v).max_abs() <= 1e-10


def test_box_initial_fields_solenoidal():
    for name in ("shear", "taylor_green", "ansatz_custom"):
        scenario = make(name, grid=GridSpec.box(32))
        v = scenario.initial_velocity()
        interior = divergence(v).values[1:-1, 1:-1]
        assert np.max(np.abs(interior)) <= 1e-10
        vs = scenario.initial_velocity(layout=STAGGERED)
        assert divergence(vs).max_abs() <= 1e-10


def test_two_mode_normalized_to_amplitude():
    scenario = make("two_mode")
    assert abs(l2_norm(scenario.initial_velocity()) - 1.0) < 1e-12
    scaled = Scenario(
        name="two_mode", grid=GridSpec.periodic(32), viscosity=0.1,
        forcing=ForcingSpec.zero(), boundary=None, amplitude=3.0,
    )
    assert abs(l2_norm(scaled.initial_velocity()) - 3.0) < 1e-12


def test_two_mode_has_convective_residual():
    scenario = make("two_mode", grid=GridSpec.periodic(64))
    assert convective_residual(scenario.initial_velocity()) >= 0.1


def test_shear_and_ansatz_have_no_transport():
    for name in ("shear", "ansatz_custom"):
        scenario = make(name, grid=GridSpec.periodic(64))
        assert convective_residual(scenario.initial_velocity()) <= 1e-10


def test_random_scenario_reproducible_and_seed_sensitive():
    a = make("random_solenoidal", seed=7).initial_velocity()
    b = make("random_solenoidal", seed=7).initial_velocity()
    c = make("random_solenoidal", seed=8).initial_velocity()
    for ca, cb in zip(a.components, b.components):
        assert np.array_equal(ca.values, cb.values)
    assert any(
        not np.array_equal(ca.values, cc.values)
        for ca, cc in zip(a.components, c.components)
    )


def test_random_requires_seed():
    with pytest.raises(ConfigError, match="seed"):
        make("random_solenoidal")


def test_torus_only_scenarios_rejected_on_box():
    with pytest.raises(ConfigError, match="torus only"):
        make("two_mode", grid=GridSpec.box(32))


def test_box_datum_matches_initial_field_on_walls():
    scenario = make("taylor_green", grid=GridSpec.box(32))
    bc = scenario.boundary_datum()
    assert bc is not None and bc.tangential_only
    v0 = scenario.initial_velocity(layout=STAGGERED)
    datum = bc.evaluate(scenario.grid, 0.0, layout=STAGGERED)
    for axis in range(2):
        a = np.moveaxis(v0.components[axis].values, axis, 0)
        d = np.moveaxis(datum.components[axis].values, axis, 0)
        assert np.allclose(a[0], d[0], atol=1e-12)
        assert np.allclose(a[-1], d[-1], atol=1e-12)


def test_inflow_enters_datum_not_initial_field():
    scenario = Scenario(
        name="shear", grid=GridSpec.box(32), viscosity=0.1,
        forcing=ForcingSpec.zero(), boundary=None, normal_inflow=0.25,
    )
    v0 = scenario.initial_velocity()
    assert divergence(v0).max_abs() <= 1e-10
    from nsverify.fields import boundary_flux

    datum = scenario.boundary_datum().evaluate(scenario.grid, 0.0, layout=STAGGERED)
    assert abs(boundary_flux(datum) + 0.25) < 1e-8  # net inflow through x=0


def test_forcing_profiles():
    grid = GridSpec.periodic(32)
    zero = build_forcing("none", 1.0, 2.0, grid)
    assert zero.is_zero
    f = build_forcing("shear_mode", 0.5, 2.0, grid)
    v = f.evaluate(grid, 0.0)
    assert abs(v.max_abs() - 0.5) < 1e-12
    g = build_forcing("gradient_mode", 1.0, 2.0, grid)
    from nsverify.spectral import leray_project

    assert leray_project(g.evaluate(grid, 0.0)).max_abs() < 1e-10
    with pytest.raises(ConfigError):
        build_forcing("tornado", 1.0, 2.0, grid)

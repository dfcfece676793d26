import numpy as np
import pytest

from app.models.domain import EuclideanConfig
from app.services.errors import InputError, PreconditionError, QuadratureError
from app.services.oracle_service import OracleService, sphere_area, unit_ball_volume


@pytest.mark.parametrize("d,volume", [(1, 2.0), (2, np.pi), (3, 4 * np.pi / 3)])
def test_unit_ball_volume(d, volume):
    assert unit_ball_volume(d) == pytest.approx(volume)


@pytest.mark.parametrize("d,area", [(2, 2 * np.pi), (3, 4 * np.pi), (4, 2 * np.pi ** 2)])
def test_sphere_area(d, area):
    assert sphere_area(d) == pytest.approx(area)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_quadrature_of_constant(d):
    result = OracleService.sphere_quadrature(d, lambda u: np.ones(len(u)))
    assert result.value == pytest.approx(sphere_area(d), rel=1e-10)


@pytest.mark.parametrize("d", [2, 3])
def test_quadrature_of_squared_coordinate(d):
    # by symmetry each u_k^2 averages to 1/d
    result = OracleService.sphere_quadrature(d, lambda u: u[:, 0] ** 2, axis=np.ones(d))
    assert result.value == pytest.approx(sphere_area(d) / d, rel=1e-9)


def test_quadrature_node_cap():
    with pytest.raises(QuadratureError) as info:
        OracleService.sphere_quadrature(2, lambda u: np.abs(u[:, 0]), max_nodes=20)
    assert info.value.nodes > 20


def test_quadrature_needs_a_sphere():
    with pytest.raises(PreconditionError):
        OracleService.sphere_quadrature(1, lambda u: np.ones(len(u)))


def test_green_function():
    assert OracleService.green(3, (0, 0, 0), (1, 0, 0)) == pytest.approx(1 / (4 * np.pi))
    assert OracleService.green(2, (0, 0), (np.e, 0)) == pytest.approx(-1 / (2 * np.pi))
    with pytest.raises(InputError):
        OracleService.green(2, (0, 0), (0, 0))


def test_riesz_kernel():
    assert OracleService.riesz_kernel(2, (0, 0), (0, 2)) == pytest.approx(1 / (2 * np.pi))
    assert OracleService.riesz_kernel(3, (0, 0, 0), (0, 0, 2)) == pytest.approx(3 / (16 * np.pi))


@pytest.mark.parametrize("d", [2, 3])
def test_gradient_identity(d):
    rng = np.random.default_rng(d)
    for _ in range(20):
        x = rng.uniform(-1, 1, d)
        direction = rng.standard_normal(d)
        z = x + rng.uniform(0.5, 2.0) * direction / np.linalg.norm(direction)
        check = OracleService.gradient_identity_check(d, x, z, 1e-4)
        assert check.rel_error < 1e-5
        assert not check.step_flagged


def test_gradient_flags_large_step():
    assert OracleService.gradient_identity_check(2, (0, 0), (0.1, 0), 0.01).step_flagged


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_sphere_energy_equals_dimension(d, r):
    assert OracleService.sphere_energy(d, r).value == pytest.approx(d, rel=1e-3)


def test_sphere_energy_radius():
    with pytest.raises(PreconditionError):
        OracleService.sphere_energy(2, 0.0)


@pytest.mark.parametrize("d", [2, 3])
def test_delta_decreases_with_truncation(d):
    x = (0.0,) * d
    y = (1.0,) + (0.0,) * (d - 1)
    values = [OracleService.delta_L(EuclideanConfig(d=d, x=x, y=y, L=L)).value for L in (1, 2, 4, 8)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert values[-1] < 0.5 * values[0]


def test_bisector_energy_closed_form_plane():
    config = EuclideanConfig(d=2, x=(-0.5, 0.0), y=(0.5, 0.0), L=2.0)
    T = np.sqrt(16.0 - 0.25)
    expected = 2 * (2 / np.pi) * np.arcsinh(2 * T)
    terms = OracleService.halfspace_separator_terms(config)
    assert terms.x_term == pytest.approx(terms.y_term)
    assert terms.total == pytest.approx(expected, rel=1e-9)


def test_bisector_energy_closed_form_space():
    config = EuclideanConfig(d=3, x=(0.0, 0.0, 0.0), y=(0.0, 0.0, 1.0), L=1.0)
    T2 = 4.0 - 0.25
    assert OracleService.halfspace_separator_energy(config) == pytest.approx(1.5 * np.log(1 + 4 * T2), rel=1e-9)


@pytest.mark.parametrize("d", [2, 3])
def test_bisector_energy_chain(d):
    x = (0.0,) * d
    y = (1.0,) + (0.0,) * (d - 1)
    for L in (1, 2, 4, 8):
        config = EuclideanConfig(d=d, x=x, y=y, L=L)
        energy = OracleService.halfspace_separator_energy(config)
        assert energy >= d - OracleService.delta_L(config).value
        assert energy >= d / 2


def test_bisector_needs_a_plane():
    with pytest.raises(PreconditionError):
        OracleService.halfspace_separator_terms(EuclideanConfig(d=1, x=(0.0,), y=(1.0,)))


def test_ball_mass_on_the_line():
    config = EuclideanConfig(d=1, x=(0.0,), y=(1.0,))
    assert OracleService.riesz_ball_mass_analytic(config, 0.25) == pytest.approx(0.5)


def test_ball_mass_small_radius_in_the_plane():
    config = EuclideanConfig(d=2, x=(0.0, 0.0), y=(1.0, 0.0))
    # the y-pole density is close to 1 / pi on a tiny ball
    assert OracleService.riesz_ball_mass_analytic(config, 0.01) == pytest.approx(0.02 + 1e-4, rel=1e-3)
    with pytest.raises(PreconditionError):
        OracleService.riesz_ball_mass_analytic(config, 1.0)


@pytest.mark.parametrize("kwargs", [
    {"d": 0, "x": (), "y": ()},
    {"d": 2, "x": (0.0,), "y": (1.0, 0.0)},
    {"d": 2, "x": (0.0, 0.0), "y": (0.0, 0.0)},
    {"d": 2, "x": (0.0, 0.0), "y": (1.0, 0.0), "L": 0.5},
])
def test_euclidean_config_validation(kwargs):
    with pytest.raises(InputError):
        EuclideanConfig(**kwargs)

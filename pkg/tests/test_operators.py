import numpy as np
import pytest

from anderson_edge.eigen import eigvalsh
from anderson_edge.errors import ExplosionGuard, IncompatibleDimensions, PeriodMismatch, SizeMismatch
from anderson_edge.operators import (
    CellGrid,
    PeriodicModel,
    assemble_bloch_hamiltonian,
    assemble_dirichlet_box,
    is_hermitian,
    kinetic_bloch,
    wrap_theta,
)
from anderson_edge.potential import (
    DisorderConfiguration,
    PeriodicBackground,
    build_single_site,
    constant_config,
    periodic_config,
)

from conftest import make_family

BOUNDS = (0.5, 1.5)


def free_bloch_spectrum(n, cell, theta):
    m = n * cell
    alpha = (theta * cell + 2 * np.pi * np.arange(m)) / m
    return np.sort((2 - 2 * np.cos(alpha)) * n**2)


def test_grid_nodes_are_cell_centred():
    g = CellGrid(1, (2,), 4)
    np.testing.assert_allclose(g.axis_nodes(0), [-0.375, -0.125, 0.125, 0.375, 0.625, 0.875, 1.125, 1.375])
    assert g.unit_cell_mask().sum() == 4
    g2 = CellGrid(2, (1, 2), 4)
    assert g2.points.shape == (32, 2)
    assert g2.unit_cell_mask().sum() == 16


def test_free_periodic_matrix_small():
    lap = kinetic_bloch(CellGrid(1, (1,), 4), [0.0])
    np.testing.assert_allclose(eigvalsh(lap), [0, 32, 32, 64], atol=1e-12)


@pytest.mark.parametrize("cell,theta", [(1, 0.0), (1, 0.7), (3, -0.4), (2, np.pi / 2)])
def test_free_bloch_matches_closed_form(cell, theta):
    grid = CellGrid(1, (cell,), 16)
    np.testing.assert_allclose(eigvalsh(kinetic_bloch(grid, [theta])), free_bloch_spectrum(16, cell, theta), atol=1e-10)


@pytest.mark.parametrize("theta", [0.0, 0.3, -2.1, np.pi])
def test_gauges_agree(theta):
    fam = make_family(n=24)
    model = fam.periodic(1.7, periodic_config([0.5, 1.5, 1.0], BOUNDS))
    th = [theta / 3]
    a = eigvalsh(model.hamiltonian(th, "boundary"))
    b = eigvalsh(model.hamiltonian(th, "link"))
    np.testing.assert_allclose(a, b, atol=1e-9 * np.abs(a).max())


def test_hermitian_and_theta_symmetries(rng):
    fam = make_family(n=20)
    model = fam.periodic(2.0, periodic_config([0.5, 1.5], BOUNDS))
    theta = rng.uniform(-np.pi / 2, np.pi / 2, 1)
    h = model.hamiltonian(theta)
    assert is_hermitian(h)
    base = eigvalsh(h)
    # zone periodicity and time-reversal symmetry of a real potential
    np.testing.assert_allclose(eigvalsh(model.hamiltonian(theta + np.pi)), base, atol=1e-9)
    np.testing.assert_allclose(eigvalsh(model.hamiltonian(-theta)), base, atol=1e-9)


def test_wrap_theta():
    np.testing.assert_allclose(wrap_theta([np.pi + 0.1], (1,)), [-np.pi + 0.1])
    np.testing.assert_allclose(wrap_theta([1.5], (3,)), [1.5 - 2 * np.pi / 3])
    np.testing.assert_allclose(wrap_theta([0.5], (3,)), [0.5])


def test_2d_free_spectrum_is_sum_of_1d():
    n = 6
    lap2 = kinetic_bloch(CellGrid(2, (1, 1), n), [0.3, -0.8])
    one = free_bloch_spectrum(n, 1, 0.3)
    two = free_bloch_spectrum(n, 1, -0.8)
    np.testing.assert_allclose(eigvalsh(lap2), np.sort((one[:, None] + two[None, :]).ravel()), atol=1e-9)


def test_monotone_in_couplings(rng):
    site = build_single_site([((0.0,), 0.3, 1.0)], 1, 1 / 16)
    bg = PeriodicBackground.cosine(1.0)
    low = rng.uniform(0.5, 1.5, 4)
    high = np.minimum(low + rng.uniform(0, 0.5, 4), 1.5)
    grid = CellGrid(1, (4,), 16)
    theta = [0.2]
    a = eigvalsh(assemble_bloch_hamiltonian(grid, bg, site, 2.0, DisorderConfiguration("periodic", (4,), low, BOUNDS), theta))
    b = eigvalsh(assemble_bloch_hamiltonian(grid, bg, site, 2.0, DisorderConfiguration("periodic", (4,), high, BOUNDS), theta))
    assert np.all(b >= a - 1e-10)


def test_dirichlet_box_above_periodic_bottom(rng):
    fam = make_family(n=16)
    for _ in range(5):
        vals = rng.uniform(0.5, 1.5, 3)
        box = DisorderConfiguration("boxed", (3,), vals, BOUNDS)
        e_dir = eigvalsh(assemble_dirichlet_box(CellGrid(1, (3,), 16), fam.background, fam.site, 3.0, box))[0]
        # the box is a principal block of the doubled periodic supercell
        sup = fam.periodic(3.0, DisorderConfiguration("periodic", (6,), np.tile(vals, 2), BOUNDS))
        e_per = eigvalsh(sup.hamiltonian([0.0]))[0]
        assert e_dir >= e_per - 1e-10


@pytest.mark.parametrize("length", [1, 2])
def test_dirichlet_box_richardson(length):
    c = 0.75
    bg = PeriodicBackground(1, c, ())
    site = build_single_site([((0.0,), 0.1, 1.0)])
    box = DisorderConfiguration("boxed", (length,), np.full(length, 1.0), BOUNDS)
    ns = np.array([16, 32, 64])
    e = np.array([eigvalsh(assemble_dirichlet_box(CellGrid(1, (length,), n), bg, site, 0.0, box))[0] for n in ns])
    # fit E(h) = E0 + a h + b h^2 through three resolutions
    h = 1.0 / ns
    e0 = np.linalg.solve(np.stack([np.ones(3), h, h * h], axis=1), e)[0]
    assert abs(e0 - (np.pi**2 / length**2 + c)) < 1e-2


def test_errors():
    fam = make_family(n=16)
    grid = CellGrid(1, (2,), 16)
    with pytest.raises(PeriodMismatch):
        assemble_bloch_hamiltonian(grid, fam.background, fam.site, 1.0, periodic_config([0.5, 1.0, 1.5], BOUNDS), [0.0])
    with pytest.raises(SizeMismatch):
        assemble_dirichlet_box(grid, fam.background, fam.site, 1.0, DisorderConfiguration("boxed", (3,), np.ones(3), BOUNDS))
    with pytest.raises(IncompatibleDimensions):
        kinetic_bloch(grid, [0.0, 0.0])
    with pytest.raises(ValueError):
        assemble_bloch_hamiltonian(grid, fam.background, fam.site, -1.0, constant_config(1.0, BOUNDS), [0.0])
    with pytest.raises(ExplosionGuard):
        PeriodicModel(fam.background, fam.site, 1.0, DisorderConfiguration("boxed", (300,), np.ones(300), BOUNDS), 16).hamiltonian([0.0])
    with pytest.raises(ValueError):
        kinetic_bloch(grid, [0.0], gauge="other")


def test_constant_config_tiles_like_unit_cell():
    fam = make_family(n=12)
    unit = fam.constant(1.5, 1.0)
    sup = fam.periodic(1.5, DisorderConfiguration("periodic", (3,), np.ones(3), BOUNDS))
    np.testing.assert_allclose(sup.diagonal, np.tile(unit.diagonal, 3), atol=1e-14)

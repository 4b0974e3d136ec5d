"""Finite-difference Hamiltonians on unit cells, supercells and Dirichlet boxes."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ExplosionGuard, IncompatibleDimensions, PeriodMismatch, SizeMismatch
from .potential import DisorderConfiguration, PeriodicBackground, SingleSite

MAX_DENSE_ORDER = 4096
HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True)
class CellGrid:
    """Cell-centred grid on a ``cell[0] x ... x cell[d-1]`` block of unit cells.

    Along each axis nodes sit at ``-1/2 + (j + 1/2) h`` for
    ``j = 0 .. cell_i * n - 1``, so the block spans ``[-1/2, cell_i - 1/2]``.
    """

    dimension: int
    cell: tuple[int, ...]
    n: int

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise IncompatibleDimensions(f"dimension must be 1 or 2, got {self.dimension}")
        if len(self.cell) != self.dimension:
            raise IncompatibleDimensions(f"cell {self.cell} is not a {self.dimension}-vector")
        if self.n < 4:
            raise ValueError(f"points_per_unit must be >= 4, got {self.n}")
        if any(k < 1 for k in self.cell):
            raise ValueError(f"cell sides must be >= 1, got {self.cell}")
        object.__setattr__(self, "cell", tuple(int(k) for k in self.cell))

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(k * self.n for k in self.cell)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.cell))

    def axis_nodes(self, axis: int) -> np.ndarray:
        h = self.spacing
        return -0.5 + (np.arange(self.shape[axis]) + 0.5) * h

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(size, d)``, C order (last axis fastest)."""
        mesh = np.meshgrid(*(self.axis_nodes(a) for a in range(self.dimension)), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def unit_cell_mask(self) -> np.ndarray:
        """Nodes lying in the reference cell ``[-1/2, 1/2]^d``."""
        return np.all(self.points < 0.5, axis=-1)


def wrap_theta(theta, cell) -> np.ndarray:
    """Map quasimomenta into the (super)cell zone ``[-pi/K_i, pi/K_i)``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    period = 2.0 * np.pi / np.asarray(cell, dtype=float)
    return (theta + period / 2.0) % period - period / 2.0


def potential_diagonal(
    grid: CellGrid,
    background: PeriodicBackground,
    site: SingleSite,
    coupling: float,
    couplings: np.ndarray,
) -> np.ndarray:
    """``W(x_j) + coupling * sum_gamma omega_gamma f(x_j - gamma)`` on the grid.

    ``couplings`` has the grid's cell shape; sites are the integer points of
    the block.
    """
    pts = grid.points
    diag = background(pts).astype(float)
    if coupling != 0.0:
        for gamma in np.ndindex(*grid.cell):
            w = couplings[gamma]
            if w != 0.0:
                diag = diag + coupling * w * site(pts - np.asarray(gamma, dtype=float))
    return diag


def _check_model(grid, background, site, config=None):
    d = grid.dimension
    if background.dimension != d or site.dimension != d:
        raise IncompatibleDimensions("grid, background and single site disagree on dimension")
    if config is not None and config.dimension != d:
        raise IncompatibleDimensions("configuration dimension differs from the grid")
    if grid.size > MAX_DENSE_ORDER:
        raise ExplosionGuard(f"dense order {grid.size} exceeds {MAX_DENSE_ORDER}")


def _laplacian_1d(m: int, h: float, wrap_phase: complex | None, link_phase: complex = 1.0) -> np.ndarray:
    """``-d^2/dx^2`` on ``m`` nodes; ``wrap_phase=None`` means Dirichlet."""
    lap = np.zeros((m, m), dtype=complex)
    idx = np.arange(m)
    lap[idx, idx] = 2.0
    lap[idx[:-1], idx[1:]] += -link_phase
    lap[idx[1:], idx[:-1]] += -np.conj(link_phase)
    if wrap_phase is not None:
        if m == 1:
            lap[0, 0] += -2.0 * np.real(wrap_phase * link_phase)
        else:
            # psi_m = wrap_phase * psi_0 enters row m-1
            lap[m - 1, 0] += -wrap_phase * link_phase
            lap[0, m - 1] += -np.conj(wrap_phase * link_phase)
    return lap / h**2


def _kron_sum(blocks: list[np.ndarray]) -> np.ndarray:
    out = blocks[0]
    for b in blocks[1:]:
        out = np.kron(out, np.eye(b.shape[0])) + np.kron(np.eye(out.shape[0]), b)
    return out


def kinetic_bloch(grid: CellGrid, theta, gauge: str = "boundary") -> np.ndarray:
    """Bloch-periodic finite-difference ``-Laplacian``.

    ``gauge="boundary"`` puts the phase ``exp(i theta_i K_i)`` on the wrap
    link only; ``gauge="link"`` spreads ``exp(i theta_i h)`` over every link
    (the unknowns are then the periodic parts ``u = exp(-i theta x) psi``).
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.size != grid.dimension:
        raise IncompatibleDimensions(f"theta has {theta.size} components, grid is {grid.dimension}-d")
    h = grid.spacing
    blocks = []
    for axis, (m, k) in enumerate(zip(grid.shape, grid.cell)):
        th = theta[axis]
        if gauge == "boundary":
            blocks.append(_laplacian_1d(m, h, np.exp(1j * th * k)))
        elif gauge == "link":
            blocks.append(_laplacian_1d(m, h, 1.0 + 0j, np.exp(1j * th * h)))
        else:
            raise ValueError(f"unknown gauge {gauge!r}")
    return _kron_sum(blocks)


def assemble_bloch_hamiltonian(
    grid: CellGrid,
    background: PeriodicBackground,
    site: SingleSite,
    coupling: float,
    config: DisorderConfiguration,
    theta,
    gauge: str = "boundary",
) -> np.ndarray:
    """Dense Bloch Hamiltonian ``H(theta)`` of the block described by ``grid``.

    The configuration period must divide ``grid.cell`` along every axis; the
    couplings are tiled over the block.
    """
    if coupling < 0:
        raise ValueError("coupling constant must be >= 0")
    _check_model(grid, background, site, config)
    if any(c % p for c, p in zip(grid.cell, config.period)):
        raise PeriodMismatch(f"period {config.period} does not divide cell {grid.cell}")
    diag = potential_diagonal(grid, background, site, coupling, config.tiled(grid.cell))
    mat = kinetic_bloch(grid, theta, gauge)
    mat[np.diag_indices_from(mat)] += diag
    return mat


def assemble_dirichlet_box(
    grid: CellGrid,
    background: PeriodicBackground,
    site: SingleSite,
    coupling: float,
    config: DisorderConfiguration,
) -> np.ndarray:
    """Finite-difference Hamiltonian on the box ``grid.cell`` with zero boundary values."""
    if coupling < 0:
        raise ValueError("coupling constant must be >= 0")
    _check_model(grid, background, site, config)
    if tuple(config.period) != tuple(grid.cell):
        raise SizeMismatch(f"configuration box {config.period} differs from grid box {grid.cell}")
    diag = potential_diagonal(grid, background, site, coupling, config.values)
    h = grid.spacing
    mat = _kron_sum([_laplacian_1d(m, h, None) for m in grid.shape])
    mat[np.diag_indices_from(mat)] += diag
    return mat


def is_hermitian(mat: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    scale = float(np.max(np.abs(mat))) if mat.size else 0.0
    return bool(np.max(np.abs(mat - mat.conj().T), initial=0.0) <= rtol * scale)


@dataclass(frozen=True)
class PeriodicModel:
    """``-Laplacian + W + coupling * V_omega`` for one periodic configuration.

    The computational block is one period of the configuration, so its
    Brillouin zone is ``prod_i [-pi/K_i, pi/K_i]``.
    """

    background: PeriodicBackground
    site: SingleSite
    coupling: float
    config: DisorderConfiguration
    n: int

    @property
    def dimension(self) -> int:
        return self.background.dimension

    @cached_property
    def grid(self) -> CellGrid:
        return CellGrid(self.dimension, self.config.period, self.n)

    @cached_property
    def diagonal(self) -> np.ndarray:
        _check_model(self.grid, self.background, self.site, self.config)
        return potential_diagonal(self.grid, self.background, self.site, self.coupling, self.config.values)

    def hamiltonian(self, theta, gauge: str = "boundary") -> np.ndarray:
        mat = kinetic_bloch(self.grid, theta, gauge)
        mat[np.diag_indices_from(mat)] += self.diagonal
        return mat

    def zone(self) -> tuple[np.ndarray, np.ndarray]:
        half = np.pi / np.asarray(self.config.period, dtype=float)
        return -half, half

    @property
    def descriptor(self) -> dict:
        return {
            "background": self.background.to_dict(),
            "site": self.site.to_dict(),
            "coupling": self.coupling,
            "config": self.config.to_dict(),
            "points_per_unit": self.n,
        }

    @property
    def key(self) -> tuple:
        return (self.background, self.site, float(self.coupling), self.config, self.n)


@dataclass(frozen=True)
class AndersonModel:
    """A background, a single site, a grid resolution and the coupling range.

    This is the model family; ``periodic``/``constant`` fix the disorder
    strength and a periodic configuration.
    """

    background: PeriodicBackground
    site: SingleSite
    n: int = 32
    omega_minus: float = 0.5
    omega_plus: float = 1.5

    def __post_init__(self):
        if not self.omega_minus < self.omega_plus:
            raise ValueError("omega_minus must be smaller than omega_plus")
        if self.background.dimension != self.site.dimension:
            raise IncompatibleDimensions("background and single site disagree on dimension")

    @property
    def dimension(self) -> int:
        return self.site.dimension

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.omega_minus, self.omega_plus)

    def extreme_value(self, which: str) -> float:
        if which in ("minus", "-", "omega_minus"):
            return self.omega_minus
        if which in ("plus", "+", "omega_plus"):
            return self.omega_plus
        raise ValueError(f"extreme must be 'minus' or 'plus', got {which!r}")

    def periodic(self, coupling: float, config: DisorderConfiguration) -> PeriodicModel:
        if tuple(config.bounds) != self.bounds:
            config = DisorderConfiguration(config.kind, config.period, config.values, self.bounds)
        return PeriodicModel(self.background, self.site, float(coupling), config, self.n)

    def constant(self, coupling: float, value: float) -> PeriodicModel:
        from .potential import constant_config

        return self.periodic(coupling, constant_config(value, self.bounds, self.dimension))

    def extreme(self, coupling: float, which: str) -> PeriodicModel:
        return self.constant(coupling, self.extreme_value(which))

    def with_site(self, site: SingleSite) -> "AndersonModel":
        return AndersonModel(self.background, site, self.n, self.omega_minus, self.omega_plus)

    def with_background(self, background: PeriodicBackground) -> "AndersonModel":
        return AndersonModel(background, self.site, self.n, self.omega_minus, self.omega_plus)

    def with_resolution(self, n: int) -> "AndersonModel":
        return AndersonModel(self.background, self.site, n, self.omega_minus, self.omega_plus)

    def to_dict(self) -> dict:
        return {
            "background": self.background.to_dict(),
            "site": self.site.to_dict(),
            "points_per_unit": self.n,
            "omega_minus": self.omega_minus,
            "omega_plus": self.omega_plus,
        }

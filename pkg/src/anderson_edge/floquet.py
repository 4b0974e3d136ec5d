"""Band functions over the Brillouin zone and the minima of the first band."""

from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .eigen import eig_smallest_k
from .errors import DegenerateMinimum, FlatBandSuspected, SandwichViolation, TopologyChange
from .operators import AndersonModel, PeriodicModel, wrap_theta

FLAT_FRACTION = 0.25
DEGENERACY_THRESHOLD = 1e-6


def parallel_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Ordered map, optionally over a thread pool (results keep input order)."""
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def grouping_tolerance(e_min: float) -> float:
    return 1e-7 * (1.0 + abs(e_min))


def band_energies(model: PeriodicModel, theta, n_bands: int = 1) -> np.ndarray:
    """Lowest ``n_bands`` Floquet eigenvalues at one quasimomentum."""
    return eig_smallest_k(model.hamiltonian(theta), n_bands, vectors=False).values


def theta_grid(model: PeriodicModel | None, n_theta: int, d: int = 1, cell=None) -> np.ndarray:
    """Uniform tensor grid with both zone edges included, shape ``(n_theta**d, d)``."""
    if model is not None:
        lo, hi = model.zone()
    else:
        cell = np.ones(d) if cell is None else np.asarray(cell, dtype=float)
        lo, hi = -np.pi / cell, np.pi / cell
    axes = [np.linspace(lo[i], hi[i], n_theta) for i in range(len(lo))]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class BandStructure:
    """Sampled Floquet eigenvalues on a uniform zone grid.

    ``bands[i, j]`` is the ``(j+1)``-th eigenvalue at ``thetas[i]``. The
    model may be ``None`` for externally supplied band data.
    """

    thetas: np.ndarray
    bands: np.ndarray
    n_theta: int
    zone_period: np.ndarray
    model: PeriodicModel | None = field(default=None, compare=False)

    @property
    def dimension(self) -> int:
        return self.thetas.shape[1]

    @property
    def step(self) -> np.ndarray:
        return self.zone_period / (self.n_theta - 1)

    def band(self, index: int = 1) -> np.ndarray:
        return self.bands[:, index - 1]

    def band_grid(self, index: int = 1) -> np.ndarray:
        return self.band(index).reshape((self.n_theta,) * self.dimension)

    @property
    def bottom(self) -> float:
        return float(self.bands[:, 0].min())

    def eigenfunction(self, index: int) -> np.ndarray:
        if self.model is None:
            raise ValueError("band structure has no model attached")
        return bloch_eigenfunction(self.model, self.thetas[index])


def compute_band_structure(
    model: PeriodicModel, n_theta: int = 129, n_bands: int = 2, threads: int = 1
) -> BandStructure:
    """Evaluate the lowest ``n_bands`` bands on an ``n_theta``-per-axis zone grid."""
    if n_theta < 8:
        raise ValueError(f"n_theta must be >= 8, got {n_theta}")
    if n_bands < 1:
        raise ValueError("n_bands must be >= 1")
    thetas = theta_grid(model, n_theta)
    rows = parallel_map(lambda th: band_energies(model, th, n_bands), list(thetas), threads)
    lo, hi = model.zone()
    return BandStructure(thetas, np.vstack(rows), n_theta, hi - lo, model)


def periodic_distance(a, b, period) -> float:
    diff = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    period = np.asarray(period, dtype=float)
    diff = np.minimum(diff % period, period - diff % period)
    return float(np.sqrt(np.sum(diff * diff)))


@dataclass(frozen=True)
class RefinedMinimum:
    theta: np.ndarray
    value: float
    resolution: float
    hessian: np.ndarray
    iterations: int


def _quadratic_design(offsets: np.ndarray) -> np.ndarray:
    d = offsets.shape[1]
    cols = [np.ones(len(offsets))]
    cols += [offsets[:, i] for i in range(d)]
    cols += [offsets[:, i] * offsets[:, j] for i in range(d) for j in range(i, d)]
    return np.stack(cols, axis=1)


def fit_quadratic(offsets: np.ndarray, values: np.ndarray):
    """Least-squares ``c + g.u + u^T H u / 2``; returns ``(c, g, H, rms)``."""
    d = offsets.shape[1]
    design = _quadratic_design(offsets)
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    c = coef[0]
    g = coef[1 : 1 + d]
    hess = np.zeros((d, d))
    pos = 1 + d
    for i in range(d):
        for j in range(i, d):
            if i == j:
                hess[i, i] = 2.0 * coef[pos]
            else:
                hess[i, j] = hess[j, i] = coef[pos]
            pos += 1
    rms = float(np.sqrt(np.mean((design @ coef - values) ** 2)))
    return float(c), g, hess, rms


def refine_minimum(
    energy: Callable[[np.ndarray], float],
    theta0,
    step,
    zone_period,
    refine_tol: float = 1e-6,
    max_iter: int = 60,
) -> RefinedMinimum:
    """Iterated quadratic-fit descent from a grid minimum.

    Each iteration fits a full quadratic on a ``3^d`` stencil of half-width
    ``s`` and moves to its vertex (clipped to the stencil); the stencil then
    shrinks. Stops once the move is below ``refine_tol``.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    d = theta.size
    cell = 2.0 * np.pi / np.asarray(zone_period, dtype=float)
    s = float(np.max(step))
    s_floor = max(10.0 * refine_tol, 1e-5)
    unit = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=d)))
    best_theta = theta.copy()
    best_value = energy(theta)
    resolution = 0.0
    hess = np.zeros((d, d))
    it = 0
    for it in range(1, max_iter + 1):
        offsets = unit * s
        vals = np.array([energy(wrap_theta(theta + o, cell)) for o in offsets])
        centre = int(np.flatnonzero(np.all(unit == 0.0, axis=1))[0])
        vals[centre] = energy(wrap_theta(theta, cell))
        _, g, hess, rms = fit_quadratic(offsets, vals - vals[centre])
        k = int(np.argmin(vals))
        if vals[k] < best_value:
            best_value, best_theta = float(vals[k]), wrap_theta(theta + offsets[k], cell)
        evals = np.linalg.eigvalsh(hess) if d > 1 else hess.ravel()
        if np.all(evals > 0):
            move = -np.linalg.solve(hess, g)
            norm = float(np.linalg.norm(move))
            if norm > s:
                move *= s / norm
            descent = 0.5 * float(g @ np.linalg.solve(hess, g))
        else:
            move = offsets[k]
            descent = float(vals[centre] - vals[k])
        moved = float(np.linalg.norm(move))
        theta = wrap_theta(theta + move, cell)
        value = energy(theta)
        if value < best_value:
            best_value, best_theta = value, theta.copy()
        resolution = max(descent, 0.0) + rms
        if moved < refine_tol:
            break
        s = min(s, max(2.0 * moved, s_floor))
    resolution += 1e-14 * (1.0 + abs(best_value))
    return RefinedMinimum(best_theta, float(best_value), float(resolution), hess, it)


@dataclass(frozen=True)
class MinimaSet:
    """Global minimisers of the first band, after refinement and merging."""

    points: tuple[np.ndarray, ...]
    values: tuple[float, ...]
    e_min: float
    grouping_tol: float
    merge_radius: float
    resolution: float
    simple: tuple[bool, ...] = ()
    model_key: tuple | None = field(default=None, compare=False)

    @property
    def m(self) -> int:
        return len(self.points)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "points": [np.asarray(p).tolist() for p in self.points],
            "values": list(self.values),
            "e_min": self.e_min,
            "grouping_tol": self.grouping_tol,
            "merge_radius": self.merge_radius,
            "resolution": self.resolution,
            "simple": list(self.simple),
        }


def _grid_local_minima(grid_vals: np.ndarray) -> list[tuple[int, ...]]:
    # drop the duplicated upper zone edge so neighbours wrap correctly
    core = grid_vals[(slice(0, -1),) * grid_vals.ndim]
    mask = np.ones(core.shape, dtype=bool)
    for axis in range(core.ndim):
        mask &= core <= np.roll(core, 1, axis=axis)
        mask &= core <= np.roll(core, -1, axis=axis)
    return [tuple(int(i) for i in idx) for idx in np.argwhere(mask)]


def find_band_minima(
    band: BandStructure,
    refine_tol: float = 1e-6,
    merge_radius: float | None = None,
    grouping_tol: float | None = None,
    refine: bool = True,
    check_flat: bool = True,
) -> MinimaSet:
    """Locate the set of global minimisers of the first band.

    Grid local minima are refined by iterated quadratic fits, kept when
    within the grouping tolerance of the global minimum, and merged when
    closer than ``merge_radius`` (lower value wins, then smaller theta).
    """
    e1 = band.band(1)
    grid_min = float(e1.min())
    tol = grouping_tolerance(grid_min) if grouping_tol is None else grouping_tol
    if check_flat and np.mean(e1 <= grid_min + tol) > FLAT_FRACTION:
        raise FlatBandSuspected(
            f"{np.mean(e1 <= grid_min + tol):.0%} of the zone grid lies within {tol:.1e} of the minimum"
        )
    radius = 3.0 * float(np.max(band.step)) if merge_radius is None else merge_radius
    grid_vals = band.band_grid(1)
    axes = [np.linspace(-p / 2.0, p / 2.0, band.n_theta) for p in band.zone_period]
    cell = 2.0 * np.pi / band.zone_period

    candidates = []
    for idx in _grid_local_minima(grid_vals):
        theta0 = np.array([axes[a][i] for a, i in enumerate(idx)])
        if refine and band.model is not None:
            model = band.model
            r = refine_minimum(
                lambda th: float(band_energies(model, th, 1)[0]),
                theta0,
                band.step,
                band.zone_period,
                refine_tol,
            )
            candidates.append((r.value, wrap_theta(r.theta, cell), r.resolution))
        else:
            candidates.append((float(grid_vals[idx]), wrap_theta(theta0, cell), 0.0))

    e_min = min(c[0] for c in candidates)
    kept = [c for c in candidates if c[0] <= e_min + tol]
    kept.sort(key=lambda c: (c[0], tuple(np.round(c[1], 12))))
    merged: list[tuple] = []
    for c in kept:
        if all(periodic_distance(c[1], m[1], band.zone_period) > radius for m in merged):
            merged.append(c)
    merged.sort(key=lambda c: tuple(np.round(c[1], 12)))

    simple = ()
    if band.model is not None:
        flags = []
        for _, th, _ in merged:
            e = band_energies(band.model, th, 2)
            flags.append(bool(e[1] - e[0] > 10.0 * tol))
        simple = tuple(flags)
    elif band.bands.shape[1] >= 2:
        simple = tuple(True for _ in merged)
    return MinimaSet(
        points=tuple(np.asarray(c[1]) for c in merged),
        values=tuple(float(c[0]) for c in merged),
        e_min=float(e_min),
        grouping_tol=float(tol),
        merge_radius=float(radius),
        resolution=float(max(c[2] for c in merged)),
        simple=simple,
        model_key=None if band.model is None else band.model.key,
    )


@dataclass(frozen=True)
class QuadraticFit:
    theta: np.ndarray
    hessian: np.ndarray
    c_fit: float
    delta: float
    n_points: int


@dataclass(frozen=True)
class QuadraticModel:
    fits: tuple[QuadraticFit, ...]

    def to_dict(self) -> dict:
        return {
            "fits": [
                {
                    "theta": f.theta.tolist(),
                    "hessian": f.hessian.tolist(),
                    "c_fit": f.c_fit,
                    "delta": f.delta,
                    "n_points": f.n_points,
                }
                for f in self.fits
            ]
        }


def quadratic_model(
    band: BandStructure,
    minima: MinimaSet,
    delta: float = 0.3,
    threshold: float = DEGENERACY_THRESHOLD,
) -> QuadraticModel:
    """Fit the first band near each minimiser and bound it by ``zeta`` from both sides.

    ``zeta(theta) = |theta - theta_k|^2``; the reported ``c_fit`` is the
    smallest ``C >= 1`` with ``zeta / C <= E_1 - E_min <= C zeta`` at every
    grid point of the ``delta``-ball.
    """
    step = float(np.max(band.step))
    if delta < 3.0 * step - 1e-12:
        raise ValueError(f"delta={delta} is below three grid steps ({3 * step:.4g})")
    core = tuple(slice(0, -1) for _ in range(band.dimension))
    thetas = band.thetas.reshape((band.n_theta,) * band.dimension + (band.dimension,))[core].reshape(-1, band.dimension)
    e1 = band.band_grid(1)[core].ravel()
    fits = []
    for theta_k in minima.points:
        diff = thetas - theta_k
        diff = (diff + band.zone_period / 2.0) % band.zone_period - band.zone_period / 2.0
        zeta = np.sum(diff * diff, axis=1)
        ball = zeta <= delta * delta + 1e-15
        excess = e1[ball] - minima.e_min
        _, _, hess, _ = fit_quadratic(diff[ball], excess)
        evals = np.linalg.eigvalsh(hess)
        if evals.min() < threshold:
            raise DegenerateMinimum(
                f"Hessian at theta={np.asarray(theta_k).tolist()} has eigenvalue {evals.min():.3e} < {threshold:g}"
            )
        z = zeta[ball]
        off = z > 0
        bad = off & (excess <= 0.0)
        if np.any(bad):
            raise SandwichViolation(
                f"E_1 - E_min <= 0 at {int(bad.sum())} points of the delta-ball",
                [t.tolist() for t in thetas[ball][bad]],
            )
        ratio = excess[off] / z[off]
        c_fit = float(max(1.0, ratio.max(), (1.0 / ratio).max())) if ratio.size else 1.0
        lower_ok = np.all(z[off] / c_fit <= excess[off] * (1 + 1e-12))
        upper_ok = np.all(excess[off] <= c_fit * z[off] * (1 + 1e-12))
        if not (lower_ok and upper_ok):
            raise SandwichViolation("sandwich bound fails on the delta-ball")
        fits.append(QuadraticFit(np.asarray(theta_k), hess, c_fit, float(delta), int(ball.sum())))
    return QuadraticModel(tuple(fits))


def bloch_eigenfunction(model: PeriodicModel, theta, band_index: int = 1) -> np.ndarray:
    """Normalised Floquet eigenfunction on the model's block.

    Normalisation is ``h^d sum |phi_j|^2 = 1``; the phase makes the entry of
    largest modulus real and positive (ties go to the lowest grid index).
    """
    dec = eig_smallest_k(model.hamiltonian(theta), band_index)
    phi = dec.vectors[:, band_index - 1].copy()
    h = model.grid.spacing
    phi /= np.sqrt(h**model.dimension * np.sum(np.abs(phi) ** 2))
    mod = np.abs(phi)
    pivot = int(np.flatnonzero(mod >= mod.max() * (1.0 - 1e-9))[0])
    phi *= np.conj(phi[pivot]) / mod[pivot]
    phi[pivot] = mod[pivot]
    return phi


@dataclass(frozen=True)
class LambdaTrack:
    couplings: tuple[float, ...]
    minima: tuple[MinimaSet, ...]
    displacements: tuple[float, ...]
    topology_changes: tuple[int, ...]

    @property
    def max_displacement(self) -> float:
        return max(self.displacements, default=0.0)


def _pair_displacement(prev: MinimaSet, cur: MinimaSet, period) -> float:
    worst = 0.0
    for p in cur.points:
        worst = max(worst, min(periodic_distance(p, q, period) for q in prev.points))
    for q in prev.points:
        worst = max(worst, min(periodic_distance(p, q, period) for p in cur.points))
    return worst


def track_minima_in_lambda(
    family: AndersonModel,
    ladder: Sequence[float],
    extreme: str = "minus",
    n_theta: int = 129,
    refine_tol: float = 1e-6,
    threads: int = 1,
) -> LambdaTrack:
    """Recompute the first-band minimisers of the extreme constant operator along a coupling ladder."""
    ladder = [float(x) for x in ladder]
    if not ladder or ladder[0] != 0.0 or any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("ladder must start at 0 and increase strictly")
    sets = []
    for lam in ladder:
        model = family.extreme(lam, extreme)
        sets.append(find_band_minima(compute_band_structure(model, n_theta, 1, threads), refine_tol))
    period = 2.0 * np.pi * np.ones(family.dimension)
    disp, changes = [], []
    for i in range(1, len(sets)):
        disp.append(_pair_displacement(sets[i - 1], sets[i], period))
        if sets[i].m != sets[i - 1].m:
            changes.append(i)
            warnings.warn(
                f"number of minima changes from {sets[i-1].m} to {sets[i].m} at lambda={ladder[i]}",
                TopologyChange,
                stacklevel=2,
            )
    return LambdaTrack(tuple(ladder), tuple(sets), tuple(disp), tuple(changes))

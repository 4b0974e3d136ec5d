"""The first-band coupling matrix and its definiteness along a coupling ladder."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .eigen import eigvalsh
from .errors import MismatchedModel, NotDefiniteAtZero
from .floquet import MinimaSet, bloch_eigenfunction, compute_band_structure, find_band_minima, parallel_map
from .operators import AndersonModel, PeriodicModel
from .potential import SingleSite

POSITIVE = "positive-definite"
NEGATIVE = "negative-definite"
INDEFINITE = "indefinite"
SINGULAR = "numerically-singular"
DEFAULT_SINGULAR_TOL = 1e-8


@dataclass(frozen=True)
class BlochState:
    """A phase-fixed first-band eigenfunction tagged with the model it came from."""

    model_key: tuple
    theta: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class CouplingMatrix:
    entries: np.ndarray
    coupling: float
    definiteness: str
    eigenvalues: np.ndarray
    scale: float | None = None

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues), initial=0.0))

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "lambda": self.coupling,
            "entries": [[[float(z.real), float(z.imag)] for z in row] for row in self.entries],
            "class": self.definiteness,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "scale": self.scale,
        }


def hermitian_part_eigenvalues(entries: np.ndarray) -> np.ndarray:
    return eigvalsh(0.5 * (entries + entries.conj().T))


def classify_definiteness(entries, singular_tol: float = DEFAULT_SINGULAR_TOL, scale: float | None = None) -> str:
    """Definiteness class of the Hermitian part.

    Eigenvalues within ``singular_tol * scale`` of zero count as singular.
    ``scale`` defaults to the spectral norm; a ``CouplingMatrix`` carries the
    norm of its ``|f|``-weighted counterpart, which also catches cancellation
    in the ``1 x 1`` case.
    """
    if isinstance(entries, CouplingMatrix):
        scale = entries.scale if scale is None else scale
        entries = entries.entries
    a = np.atleast_2d(np.asarray(entries, dtype=complex))
    ev = hermitian_part_eigenvalues(a)
    if scale is None:
        scale = float(np.max(np.abs(ev), initial=0.0))
    cut = singular_tol * scale
    if np.any(np.abs(ev) <= cut):
        return SINGULAR
    if ev.min() > cut:
        return POSITIVE
    if ev.max() < -cut:
        return NEGATIVE
    return INDEFINITE


def bloch_states(model: PeriodicModel, minima: MinimaSet) -> list[BlochState]:
    return [BlochState(model.key, np.asarray(th), bloch_eigenfunction(model, th)) for th in minima.points]


def coupling_matrix(
    site: SingleSite,
    minima: MinimaSet,
    states: Sequence[BlochState],
    model: PeriodicModel,
    singular_tol: float = DEFAULT_SINGULAR_TOL,
) -> CouplingMatrix:
    """``A[k, k'] = h^d sum_j f(x_j) phi_k(x_j) conj(phi_k'(x_j))`` over the unit cell."""
    if minima.model_key is not None and minima.model_key != model.key:
        raise MismatchedModel("minima were computed for a different model")
    if len(states) != minima.m:
        raise MismatchedModel(f"{len(states)} eigenfunctions for {minima.m} minima")
    for s in states:
        if s.model_key != model.key:
            raise MismatchedModel("eigenfunction was computed for a different model")
    grid = model.grid
    mask = grid.unit_cell_mask()
    weight = grid.spacing**grid.dimension * site(grid.points[mask])
    phis = np.stack([s.values[mask] for s in states], axis=0)
    entries = (phis * weight[None, :]) @ phis.conj().T
    # same matrix with |f|: a cancellation-free yardstick for "numerically zero"
    scale = float(np.max(np.abs(eigvalsh((phis * np.abs(weight)[None, :]) @ phis.conj().T))))
    return CouplingMatrix(
        entries=entries,
        coupling=float(model.coupling),
        definiteness=classify_definiteness(entries, singular_tol, scale),
        eigenvalues=hermitian_part_eigenvalues(entries),
        scale=scale,
    )


@dataclass(frozen=True)
class CouplingAnalysis:
    """Reference operator, its band minima and the coupling matrix at one coupling."""

    model: PeriodicModel
    minima: MinimaSet
    matrix: CouplingMatrix


def analyse_coupling(
    family: AndersonModel,
    coupling: float,
    extreme: str = "minus",
    n_theta: int = 129,
    refine_tol: float = 1e-6,
    singular_tol: float = DEFAULT_SINGULAR_TOL,
    threads: int = 1,
) -> CouplingAnalysis:
    """``A(lambda)`` built on the first band of the constant extreme operator."""
    model = family.extreme(coupling, extreme)
    band = compute_band_structure(model, n_theta, 2, threads)
    minima = find_band_minima(band, refine_tol)
    matrix = coupling_matrix(family.site, minima, bloch_states(model, minima), model, singular_tol)
    return CouplingAnalysis(model, minima, matrix)


@dataclass(frozen=True)
class ThresholdScan:
    ladder: tuple[float, ...]
    matrices: tuple[CouplingMatrix, ...]
    reference: str
    c_zero: float
    lambda0: float
    envelope_slope: float

    @property
    def classes(self) -> list[str]:
        return [m.definiteness for m in self.matrices]

    def margins(self) -> list[float]:
        """Signed distance of the extreme eigenvalue from zero (min for +, -max for -)."""
        sign = 1.0 if self.reference == "minus" else -1.0
        return [float(sign * (m.eigenvalues.min() if sign > 0 else m.eigenvalues.max())) for m in self.matrices]

    def deviations(self) -> list[float]:
        """``||A(lambda) - A(0)||_2`` when the orders agree, NaN otherwise."""
        base = self.matrices[0].entries
        out = []
        for m in self.matrices:
            if m.entries.shape != base.shape:
                out.append(float("nan"))
            else:
                out.append(float(np.linalg.norm(m.entries - base, 2)))
        return out

    def to_dict(self) -> dict:
        return {
            "ladder": list(self.ladder),
            "reference": self.reference,
            "c_zero": self.c_zero,
            "lambda0_estimate": self.lambda0,
            "envelope_slope": self.envelope_slope,
            "entries": [
                {**m.to_dict(), "margin": g, "deviation": dv}
                for m, g, dv in zip(self.matrices, self.margins(), self.deviations())
            ],
        }


def reference_extreme(definiteness: str) -> str:
    if definiteness == POSITIVE:
        return "minus"
    if definiteness == NEGATIVE:
        return "plus"
    raise NotDefiniteAtZero(f"A(0) is {definiteness}; the extreme realization is not determined")


def lambda_threshold_scan(
    family: AndersonModel,
    ladder: Sequence[float],
    n_theta: int = 129,
    refine_tol: float = 1e-6,
    singular_tol: float = DEFAULT_SINGULAR_TOL,
    threads: int = 1,
) -> ThresholdScan:
    """Follow ``A(lambda)`` along a ladder and estimate the admissible coupling range.

    ``A(0)`` fixes the reference extreme (lower coupling bound if positive
    definite, upper if negative definite) and ``C`` = its smallest
    eigenvalue in modulus. The estimate is the largest ladder value up to
    which the extreme eigenvalue of ``A(lambda)`` keeps the sign and stays
    at least ``C/2`` away from zero. It is an empirical estimate only.
    """
    ladder = tuple(float(x) for x in ladder)
    if not ladder or ladder[0] != 0.0 or any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("ladder must start at 0 and increase strictly")
    first = analyse_coupling(family, 0.0, "minus", n_theta, refine_tol, singular_tol, threads).matrix
    reference = reference_extreme(first.definiteness)

    def one(lam: float) -> CouplingMatrix:
        if lam == 0.0:
            return first
        return analyse_coupling(family, lam, reference, n_theta, refine_tol, singular_tol).matrix

    matrices = parallel_map(one, list(ladder), threads)
    sign = 1.0 if reference == "minus" else -1.0
    c_zero = float(np.min(sign * first.eigenvalues))
    lambda0 = 0.0
    for lam, mat in zip(ladder, matrices):
        if mat.order != first.order or np.min(sign * mat.eigenvalues) < 0.5 * c_zero:
            break
        lambda0 = lam
    slopes = []
    for lam, mat in zip(ladder[1:], matrices[1:]):
        if mat.order == first.order:
            slopes.append(float(np.linalg.norm(mat.entries - first.entries, 2)) / lam)
    slope = max(slopes, default=0.0)
    return ThresholdScan(ladder, tuple(matrices), reference, c_zero, lambda0, slope)


def rephase(entries: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Coupling matrix after ``phi_k -> exp(i alpha_k) phi_k``: ``D A D^*``."""
    d = np.exp(1j * np.asarray(phases, dtype=float))
    return d[:, None] * entries * d.conj()[None, :]

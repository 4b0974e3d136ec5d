"""Single-site bumps, periodic backgrounds and disorder configurations."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import BumpOutsideCell, EmptySpec, ExplosionGuard

DEFAULT_ENUMERATION_CAP = 10**6


def _as_vector(value, d: int) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1 and d > 1:
        arr = np.repeat(arr, d)
    if arr.size != d:
        raise ValueError(f"expected a {d}-vector, got {value!r}")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class Bump:
    """``amplitude * exp(-1 / (1 - r^2))`` for ``r = |x - center| / radius < 1``."""

    center: tuple[float, ...]
    radius: float
    amplitude: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        diff = x - np.asarray(self.center)
        r2 = np.sum(diff * diff, axis=-1) / self.radius**2
        out = np.zeros(r2.shape)
        inside = r2 < 1.0
        out[inside] = self.amplitude * np.exp(-1.0 / (1.0 - r2[inside]))
        return out


@dataclass(frozen=True)
class SingleSite:
    """Sum of compactly supported smooth bumps on the unit cell ``[-1/2, 1/2]^d``.

    Evaluation accepts points of shape ``(..., d)`` (a trailing axis may be
    omitted in one dimension) and returns zero outside every bump.
    """

    dimension: int
    bumps: tuple[Bump, ...]

    @property
    def support_radius(self) -> float:
        return max(float(np.linalg.norm(b.center)) + b.radius for b in self.bumps)

    def _points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dimension == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        return x

    def __call__(self, x) -> np.ndarray:
        pts = self._points(x)
        total = np.zeros(pts.shape[:-1])
        for b in self.bumps:
            total = total + b(pts)
        return total

    def positive_part(self, x) -> np.ndarray:
        return np.maximum(self(x), 0.0)

    def negative_part(self, x) -> np.ndarray:
        return np.minimum(self(x), 0.0)

    def scaled(self, factor: float) -> "SingleSite":
        return SingleSite(
            self.dimension,
            tuple(Bump(b.center, b.radius, factor * b.amplitude) for b in self.bumps),
        )

    def sign_on(self, values: np.ndarray, atol: float = 0.0) -> int:
        """+1 if the samples are all >= 0, -1 if all <= 0, 0 otherwise."""
        if np.all(values >= -atol):
            return 1
        if np.all(values <= atol):
            return -1
        return 0

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "bumps": [
                {"center": list(b.center), "radius": b.radius, "amplitude": b.amplitude}
                for b in self.bumps
            ],
        }


def build_single_site(bumps: Iterable[Sequence], d: int = 1, spacing: float = 0.0) -> SingleSite:
    """Build a single-site potential from ``(center, radius, amplitude)`` triples.

    Each bump support (``center ± radius`` along every axis) must stay inside
    the open cell, at least ``spacing`` away from its boundary.
    """
    if d not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {d}")
    parsed = []
    for idx, spec in enumerate(bumps):
        center, radius, amplitude = spec
        c = _as_vector(center, d)
        radius = float(radius)
        if radius <= 0.0:
            raise ValueError(f"bump {idx}: radius must be positive")
        reach = max(abs(ci) for ci in c) + radius
        if 0.5 - reach < max(spacing, 0.0) or np.isclose(reach, 0.5):
            raise BumpOutsideCell(
                f"bump {idx} (center={list(c)}, radius={radius}) reaches the cell boundary"
            )
        parsed.append(Bump(c, radius, float(amplitude)))
    if not parsed:
        raise EmptySpec("a single-site potential needs at least one bump")
    return SingleSite(d, tuple(parsed))


@dataclass(frozen=True)
class PeriodicBackground:
    """``constant + sum_j a_j cos(2 pi k_j . x + phase_j)`` with integer wave vectors."""

    dimension: int
    constant: float = 0.0
    terms: tuple[tuple[float, tuple[int, ...], float], ...] = ()

    def __post_init__(self):
        for amp, k, _ in self.terms:
            if len(k) != self.dimension or any(int(ki) != ki for ki in k):
                raise ValueError(f"wave vector {k} must be an integer {self.dimension}-vector")
            if not np.isfinite(amp):
                raise ValueError("background amplitudes must be finite")

    @classmethod
    def cosine(cls, amplitude: float = 1.0, d: int = 1, constant: float = 0.0) -> "PeriodicBackground":
        """``amplitude * cos(2 pi x_1)`` (plus a constant)."""
        k = (1,) + (0,) * (d - 1)
        return cls(d, constant, ((float(amplitude), k, 0.0),))

    @classmethod
    def zero(cls, d: int = 1) -> "PeriodicBackground":
        return cls(d)

    def shifted(self, c: float) -> "PeriodicBackground":
        return PeriodicBackground(self.dimension, self.constant + c, self.terms)

    @property
    def bound(self) -> float:
        return abs(self.constant) + sum(abs(a) for a, _, _ in self.terms)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dimension == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        out = np.full(x.shape[:-1], self.constant, dtype=float)
        for amp, k, phase in self.terms:
            out = out + amp * np.cos(2.0 * np.pi * (x @ np.asarray(k, dtype=float)) + phase)
        return out

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "constant": self.constant,
            "terms": [{"amplitude": a, "k": list(k), "phase": p} for a, k, p in self.terms],
        }


@dataclass(frozen=True)
class DisorderConfiguration:
    """Couplings on the sites of one period cell (or of a finite box).

    ``values`` is an array of shape ``period``; site ``gamma`` (a multi-index
    into that array) carries coupling ``values[gamma]``.
    """

    kind: str
    period: tuple[int, ...]
    values: np.ndarray = field(compare=False)
    bounds: tuple[float, float]

    def __post_init__(self):
        if self.kind not in ("constant", "periodic", "boxed"):
            raise ValueError(f"unknown configuration kind {self.kind!r}")
        lo, hi = self.bounds
        if not lo < hi:
            raise ValueError(f"bounds must satisfy lower < upper, got {self.bounds}")
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != tuple(self.period):
            raise ValueError(f"values shape {vals.shape} does not match period {self.period}")
        if np.any(vals < lo) or np.any(vals > hi):
            raise ValueError(f"couplings must lie in [{lo}, {hi}]")
        if self.kind == "constant" and any(p != 1 for p in self.period):
            raise ValueError("constant configurations have period (1, ..., 1)")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "period", tuple(int(p) for p in self.period))

    @property
    def dimension(self) -> int:
        return len(self.period)

    @property
    def key(self) -> tuple:
        return (self.kind, self.period, tuple(self.values.ravel().tolist()), self.bounds)

    def __eq__(self, other):
        return isinstance(other, DisorderConfiguration) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def is_constant(self, value: float | None = None) -> bool:
        flat = self.values.ravel()
        same = bool(np.all(flat == flat[0]))
        return same and (value is None or flat[0] == value)

    def shifted_from_lower(self) -> np.ndarray:
        return self.values - self.bounds[0]

    def shifted_from_upper(self) -> np.ndarray:
        return self.values - self.bounds[1]

    def tiled(self, cell: Sequence[int]) -> np.ndarray:
        """Values repeated over a supercell whose sides are multiples of the period."""
        reps = tuple(c // p for c, p in zip(cell, self.period))
        return np.tile(self.values, reps)

    def label(self) -> str:
        return "(" + ", ".join(f"{v:g}" for v in self.values.ravel()) + ")"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "period": list(self.period),
            "values": self.values.ravel().tolist(),
            "bounds": list(self.bounds),
        }


def constant_config(value: float, bounds: tuple[float, float], d: int = 1) -> DisorderConfiguration:
    return DisorderConfiguration("constant", (1,) * d, np.full((1,) * d, float(value)), tuple(bounds))


def periodic_config(values, bounds: tuple[float, float]) -> DisorderConfiguration:
    vals = np.asarray(values, dtype=float)
    if vals.size == 1:
        return constant_config(float(vals.ravel()[0]), bounds, max(vals.ndim, 1))
    return DisorderConfiguration("periodic", vals.shape, vals, tuple(bounds))


def _translates(arr: np.ndarray):
    for shift in itertools.product(*(range(p) for p in arr.shape)):
        yield np.roll(arr, shift, axis=tuple(range(arr.ndim)))


def canonical_translate(values: np.ndarray) -> np.ndarray:
    """Lexicographically least lattice translate of a periodic value array."""
    return min(_translates(np.asarray(values)), key=lambda a: tuple(a.ravel().tolist()))


def _has_smaller_period(arr: np.ndarray) -> bool:
    for axis, p in enumerate(arr.shape):
        for q in range(1, p):
            if p % q == 0 and np.array_equal(arr, np.roll(arr, q, axis=axis)):
                return True
    return False


def enumerate_periodic_configs(
    alphabet: Iterable[float],
    max_period,
    d: int = 1,
    bounds: tuple[float, float] | None = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> list[DisorderConfiguration]:
    """All periodic configurations up to translation with period <= ``max_period``.

    Each configuration is listed once, at its exact (minimal) period, as the
    lexicographically least translate. Output is sorted by period, then by
    value tuple.
    """
    letters = sorted({float(a) for a in alphabet})
    if not letters:
        raise EmptySpec("alphabet must be nonempty")
    if bounds is None:
        if len(letters) < 2:
            raise ValueError("a one-letter alphabet needs explicit bounds")
        bounds = (letters[0], letters[-1])
    lo, hi = bounds
    if any(a < lo or a > hi for a in letters):
        raise ValueError(f"alphabet values must lie in [{lo}, {hi}]")
    maxp = tuple(int(v) for v in np.broadcast_to(np.asarray(max_period), (d,)))
    if any(p < 1 for p in maxp):
        raise ValueError("max_period must be >= 1 per axis")

    # worst-case raw tuple count; an exact bound would require the enumeration itself
    raw = sum(
        len(letters) ** int(np.prod(per))
        for per in itertools.product(*(range(1, p + 1) for p in maxp))
    )
    if raw > cap * max(1, int(np.prod(maxp))):
        raise ExplosionGuard(f"enumeration would visit {raw} tuples (cap {cap})")

    seen: set[tuple] = set()
    out: list[DisorderConfiguration] = []
    for per in sorted(itertools.product(*(range(1, p + 1) for p in maxp)), key=lambda p: (int(np.prod(p)), p)):
        size = int(np.prod(per))
        for tup in itertools.product(letters, repeat=size):
            arr = np.asarray(tup, dtype=float).reshape(per)
            if _has_smaller_period(arr):
                continue
            canon = canonical_translate(arr)
            key = (per, tuple(canon.ravel().tolist()))
            if key in seen:
                continue
            seen.add(key)
            if len(seen) > cap:
                raise ExplosionGuard(f"more than {cap} distinct configurations")
            out.append(periodic_config(canon, bounds))
    out.sort(key=lambda c: (int(np.prod(c.period)), c.period, tuple(c.values.ravel().tolist())))
    return out


def sample_random_config(
    seed: int,
    box,
    bounds: tuple[float, float],
    alphabet: Sequence[float] | None = None,
) -> DisorderConfiguration:
    """I.i.d. couplings on a finite box: uniform on ``alphabet`` or on ``bounds``."""
    box = tuple(int(b) for b in np.atleast_1d(box))
    if any(b < 1 for b in box):
        raise ValueError("box must be >= 1 per axis")
    rng = np.random.default_rng(seed)
    lo, hi = bounds
    if alphabet is not None:
        letters = np.asarray(sorted({float(a) for a in alphabet}))
        if letters.size == 0:
            raise EmptySpec("alphabet must be nonempty")
        vals = letters[rng.integers(0, letters.size, size=box)]
    else:
        vals = np.clip(rng.uniform(lo, hi, size=box), lo, hi)
    return DisorderConfiguration("boxed", box, vals, (float(lo), float(hi)))

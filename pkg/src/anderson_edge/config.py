"""Experiment recipes: TOML parsing and validation.

Schema (``schema_version = 1``)::

    schema_version = 1

    [model]
    dimension = 1                 # 1 or 2
    points_per_unit = 32          # grid nodes per unit length, >= 4
    omega_minus = 0.5
    omega_plus = 1.5
    [model.background]            # W(x) = constant + sum a cos(2 pi k.x + phase)
    constant = 0.0
    terms = [{amplitude = 1.0, k = [1], phase = 0.0}]
    [[model.bumps]]               # single site: sum of smooth bumps
    center = [-0.25]
    radius = 0.15
    amplitude = 2.0

    [sweep]
    n_theta = 129                 # unit-cell zone grid per axis
    n_bands = 4
    supercell_n_theta = 33        # supercell zone grid per axis
    ladder = [0.0, 1.0, 2.0]      # ascending from 0
    alphabet = [0.5, 1.0, 1.5]    # optional, default {lower, mid, upper}
    max_period = [3]

    [check]
    run = ["auto", "projection", "box"]
    lambda_fractions = [0.1, 0.25]   # multiples of the threshold estimate
    lambda_values = []               # extra explicit couplings
    refine_tol = 1e-6
    singular_tol = 1e-8
    gap_threshold = 1e-6
    delta = 0.3
    projection_samples = 50
    projection_period = [3]
    projection_fraction = 0.25
    projection_n_theta = 9
    box_sizes = [1, 2, 4, 8]
    box_samples = 200
    seed = 0

    [output]
    directory = "out"

Unknown keys are rejected so typos surface early.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import BumpOutsideCell, ConfigError, EmptySpec
from .operators import AndersonModel
from .potential import PeriodicBackground, build_single_site

SCHEMA_VERSION = 1
CHECKS = ("auto", "min_location", "monotone", "projection", "box")

_KNOWN = {
    "": {"schema_version", "model", "sweep", "check", "output"},
    "model": {"dimension", "points_per_unit", "omega_minus", "omega_plus", "background", "bumps"},
    "model.background": {"constant", "terms"},
    "sweep": {"n_theta", "n_bands", "supercell_n_theta", "ladder", "alphabet", "max_period"},
    "check": {
        "run", "lambda_fractions", "lambda_values", "refine_tol", "singular_tol", "gap_threshold",
        "delta", "projection_samples", "projection_period", "projection_fraction",
        "projection_n_theta", "box_sizes", "box_samples", "seed",
    },
    "output": {"directory"},
}


@dataclass(frozen=True)
class SweepSettings:
    n_theta: int = 129
    n_bands: int = 4
    supercell_n_theta: int = 33
    ladder: tuple[float, ...] = (0.0,)
    alphabet: tuple[float, ...] | None = None
    max_period: tuple[int, ...] = (3,)


@dataclass(frozen=True)
class CheckSettings:
    run: tuple[str, ...] = ("auto", "projection", "box")
    lambda_fractions: tuple[float, ...] = (0.1, 0.25)
    lambda_values: tuple[float, ...] = ()
    refine_tol: float = 1e-6
    singular_tol: float = 1e-8
    gap_threshold: float = 1e-6
    delta: float = 0.3
    projection_samples: int = 50
    projection_period: tuple[int, ...] = (3,)
    projection_fraction: float = 0.25
    projection_n_theta: int = 9
    box_sizes: tuple[int, ...] = (1, 2, 4, 8)
    box_samples: int = 200
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    model: AndersonModel
    sweep: SweepSettings = field(default_factory=SweepSettings)
    check: CheckSettings = field(default_factory=CheckSettings)
    output_dir: Path = Path("out")
    source: Path | None = None


def _fail(where: str, msg: str):
    raise ConfigError(f"{where}: {msg}")


def _reject_unknown(table: dict, where: str):
    extra = sorted(set(table) - _KNOWN[where])
    if extra:
        _fail(where or "<root>", f"unknown key(s) {', '.join(extra)}")


def _num(table, key, where, default, kind=float, positive=False):
    val = table.get(key, default)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        _fail(f"{where}.{key}", f"expected a number, got {val!r}")
    if kind is int and int(val) != val:
        _fail(f"{where}.{key}", f"expected an integer, got {val!r}")
    val = kind(val)
    if positive and val <= 0:
        _fail(f"{where}.{key}", f"must be positive, got {val!r}")
    return val


def _vec(table, key, where, default, kind=float, d=None):
    val = table.get(key, default)
    if val is None:
        return None
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        val = [val]
    if not isinstance(val, (list, tuple)) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in val):
        _fail(f"{where}.{key}", f"expected a list of numbers, got {val!r}")
    if kind is int and any(int(v) != v for v in val):
        _fail(f"{where}.{key}", f"expected integers, got {val!r}")
    out = tuple(kind(v) for v in val)
    if d is not None and len(out) == 1 and d > 1:
        out = out * d
    if d is not None and len(out) != d:
        _fail(f"{where}.{key}", f"expected {d} entries, got {len(out)}")
    return out


def parse_config(data: dict, source: Path | None = None) -> ExperimentConfig:
    _reject_unknown(data, "")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        _fail("schema_version", f"unsupported version {version!r} (expected {SCHEMA_VERSION})")

    m = data.get("model")
    if not isinstance(m, dict):
        _fail("model", "missing [model] table")
    _reject_unknown(m, "model")
    d = _num(m, "dimension", "model", 1, int)
    if d not in (1, 2):
        _fail("model.dimension", f"must be 1 or 2, got {d}")
    n = _num(m, "points_per_unit", "model", 32, int)
    if n < 4:
        _fail("model.points_per_unit", f"must be >= 4, got {n}")
    lo = _num(m, "omega_minus", "model", 0.5)
    hi = _num(m, "omega_plus", "model", 1.5)
    if not lo < hi:
        _fail("model.omega_minus", f"omega_minus ({lo}) must be smaller than omega_plus ({hi})")

    bg = m.get("background", {})
    if not isinstance(bg, dict):
        _fail("model.background", "expected a table")
    _reject_unknown(bg, "model.background")
    terms = []
    for i, t in enumerate(bg.get("terms", [])):
        where = f"model.background.terms[{i}]"
        if not isinstance(t, dict) or set(t) - {"amplitude", "k", "phase"}:
            _fail(where, "expected {amplitude, k, phase}")
        terms.append((_num(t, "amplitude", where, 0.0), _vec(t, "k", where, None, int, d), _num(t, "phase", where, 0.0)))
        if terms[-1][1] is None:
            _fail(where, "missing wave vector k")
    background = PeriodicBackground(d, _num(bg, "constant", "model.background", 0.0), tuple(terms))

    bumps = m.get("bumps", [])
    if not isinstance(bumps, list):
        _fail("model.bumps", "expected an array of tables")
    specs = []
    for i, b in enumerate(bumps):
        where = f"model.bumps[{i}]"
        if not isinstance(b, dict) or set(b) - {"center", "radius", "amplitude"}:
            _fail(where, "expected {center, radius, amplitude}")
        specs.append((_vec(b, "center", where, [0.0] * d, float, d), _num(b, "radius", where, None, positive=True) if "radius" in b else _fail(where, "missing radius"), _num(b, "amplitude", where, 1.0)))
    try:
        site = build_single_site(specs, d, spacing=1.0 / n)
    except BumpOutsideCell as exc:
        idx = str(exc).split()[1]
        raise ConfigError(f"model.bumps[{idx}]: support touches the cell boundary ({exc})") from None
    except EmptySpec:
        raise ConfigError("model.bumps: at least one bump is required") from None
    family = AndersonModel(background, site, n, lo, hi)

    s = data.get("sweep", {})
    _reject_unknown(s, "sweep")
    ladder = _vec(s, "ladder", "sweep", [0.0])
    if not ladder or ladder[0] != 0.0 or any(b <= a for a, b in zip(ladder, ladder[1:])):
        _fail("sweep.ladder", "must start at 0 and increase strictly")
    alphabet = _vec(s, "alphabet", "sweep", None)
    if alphabet is not None and any(a < lo or a > hi for a in alphabet):
        _fail("sweep.alphabet", f"values must lie in [{lo}, {hi}]")
    sweep = SweepSettings(
        n_theta=_num(s, "n_theta", "sweep", 129 if d == 1 else 33, int),
        n_bands=_num(s, "n_bands", "sweep", 4, int, positive=True),
        supercell_n_theta=_num(s, "supercell_n_theta", "sweep", 33 if d == 1 else 9, int),
        ladder=ladder,
        alphabet=alphabet,
        max_period=_vec(s, "max_period", "sweep", [3] if d == 1 else [2, 2], int, d),
    )
    if sweep.n_theta < 8 or sweep.supercell_n_theta < 8:
        _fail("sweep.n_theta", "zone grids need at least 8 points per axis")

    c = data.get("check", {})
    _reject_unknown(c, "check")
    run = c.get("run", list(CheckSettings.run))
    if not isinstance(run, list) or any(r not in CHECKS for r in run):
        _fail("check.run", f"entries must be among {', '.join(CHECKS)}")
    check = CheckSettings(
        run=tuple(run),
        lambda_fractions=_vec(c, "lambda_fractions", "check", [0.1, 0.25]),
        lambda_values=_vec(c, "lambda_values", "check", []),
        refine_tol=_num(c, "refine_tol", "check", 1e-6, positive=True),
        singular_tol=_num(c, "singular_tol", "check", 1e-8, positive=True),
        gap_threshold=_num(c, "gap_threshold", "check", 1e-6, positive=True),
        delta=_num(c, "delta", "check", 0.3, positive=True),
        projection_samples=_num(c, "projection_samples", "check", 50, int),
        projection_period=_vec(c, "projection_period", "check", [3] if d == 1 else [2, 2], int, d),
        projection_fraction=_num(c, "projection_fraction", "check", 0.25, positive=True),
        projection_n_theta=_num(c, "projection_n_theta", "check", 9, int, positive=True),
        box_sizes=_vec(c, "box_sizes", "check", [1, 2, 4, 8], int),
        box_samples=_num(c, "box_samples", "check", 200, int),
        seed=_num(c, "seed", "check", 0, int),
    )
    if any(v < 0 for v in check.lambda_values) or any(v < 0 for v in check.lambda_fractions):
        _fail("check.lambda_values", "couplings must be >= 0")

    o = data.get("output", {})
    _reject_unknown(o, "output")
    out = Path(o.get("directory", "out"))
    if source is not None and not out.is_absolute():
        out = source.parent / out
    return ExperimentConfig(family, sweep, check, out, source)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data, path)


DEFAULT_CONFIG = """\
schema_version = 1

[model]
dimension = 1
points_per_unit = 32
omega_minus = 0.5
omega_plus = 1.5

[model.background]
constant = 0.0
terms = [{amplitude = 1.0, k = [1], phase = 0.0}]

[[model.bumps]]
center = [-0.25]
radius = 0.15
amplitude = 2.0

[[model.bumps]]
center = [0.25]
radius = 0.15
amplitude = -1.2

[sweep]
n_theta = 129
n_bands = 4
supercell_n_theta = 33
ladder = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0, 16.0]
max_period = [3]

[check]
run = ["auto", "projection", "box"]
lambda_fractions = [0.1, 0.25]
seed = 0

[output]
directory = "out"
"""


def config_dict(cfg: ExperimentConfig) -> dict:
    """Canonical content of a config (the output location is left out)."""
    from dataclasses import asdict

    return {
        "schema_version": SCHEMA_VERSION,
        "model": cfg.model.to_dict(),
        "sweep": asdict(cfg.sweep),
        "check": asdict(cfg.check),
    }

"""Artifact writers: deterministic JSON, band CSV and a hand-written SVG plot."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from .floquet import BandStructure


def _clean(obj):
    """Plain JSON types; non-finite floats become ``null``."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def read_json(path: Path):
    return json.loads(Path(path).read_text())


def fingerprint(obj) -> str:
    """Short content hash of a JSON-able object."""
    return hashlib.sha256(json.dumps(_clean(obj), sort_keys=True).encode()).hexdigest()[:16]


# --- bands.csv: columns theta_1..theta_d, E1..En, one row per zone grid point (C order)


def bands_csv(band: BandStructure) -> str:
    d = band.dimension
    n_bands = band.bands.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"theta_{i + 1}" for i in range(d)] + [f"E{j + 1}" for j in range(n_bands)])
    for theta, row in zip(band.thetas, band.bands):
        w.writerow([repr(float(t)) for t in np.atleast_1d(theta)] + [repr(float(e)) for e in row])
    return buf.getvalue()


def write_bands_csv(path: Path, band: BandStructure) -> Path:
    path = Path(path)
    path.write_text(bands_csv(band))
    return path


def read_bands_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """``(thetas, bands)`` with shapes ``(N, d)`` and ``(N, n_bands)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d = sum(1 for h in header if h.startswith("theta_"))
    data = np.array([[float(x) for x in r] for r in body])
    return data[:, :d], data[:, d:]


def verification_csv(reports: list[dict]) -> str:
    """One row per (report, configuration): mode, lambda, config, E_min, resolution, flags."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mode", "lambda", "period", "values", "e_min", "resolution", "is_argmin", "is_predicted"])
    for r in reports:
        side = 0 if r["predicted"] == "omega_minus" else 1
        for s in r["spectra"]:
            cfg = s["config"]
            predicted = cfg["kind"] == "constant" and cfg["values"][0] == cfg["bounds"][side]
            w.writerow([
                r["mode"],
                repr(float(r["lambda"])),
                "x".join(str(p) for p in cfg["period"]),
                " ".join(repr(float(v)) for v in cfg["values"]),
                repr(float(s["e_min"])),
                repr(float(s["resolution"])),
                cfg == r["argmin"],
                predicted,
            ])
    return buf.getvalue()


# --- SVG band plot (d = 1)

_W, _H = 640, 420
_MARGIN = dict(left=70, right=20, top=30, bottom=50)
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * step:
        out.append(round(t, 12))
        t += step
    return out


def bands_svg(thetas, bands, minima=(), title: str = "") -> str:
    """Band curves over the zone with markers at the given ``(theta, energy)`` points."""
    x = np.asarray(thetas, dtype=float).ravel()
    y = np.asarray(bands, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    x0, x1 = float(x.min()), float(x.max())
    y0, y1 = float(y.min()), float(y.max())
    pad = 0.05 * (y1 - y0 or 1.0)
    y0, y1 = y0 - pad, y1 + pad
    L, R, T, B = _MARGIN["left"], _W - _MARGIN["right"], _MARGIN["top"], _H - _MARGIN["bottom"]

    def sx(v):
        return L + (v - x0) / (x1 - x0 or 1.0) * (R - L)

    def sy(v):
        return B - (v - y0) / (y1 - y0) * (B - T)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{L}" y1="{B}" x2="{R}" y2="{B}" stroke="black"/>',
        f'<line x1="{L}" y1="{T}" x2="{L}" y2="{B}" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{sx(t):.2f}" y1="{B}" x2="{sx(t):.2f}" y2="{B + 5}" stroke="black"/>')
        out.append(f'<text x="{sx(t):.2f}" y="{B + 20}" font-size="12" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{L - 5}" y1="{sy(t):.2f}" x2="{L}" y2="{sy(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{L - 8}" y="{sy(t) + 4:.2f}" font-size="12" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{(L + R) / 2}" y="{_H - 10}" font-size="13" text-anchor="middle">theta</text>')
    out.append(f'<text x="15" y="{(T + B) / 2}" font-size="13" text-anchor="middle" transform="rotate(-90 15 {(T + B) / 2})">E</text>')
    if title:
        out.append(f'<text x="{(L + R) / 2}" y="18" font-size="14" text-anchor="middle">{title}</text>')
    for j in range(y.shape[1]):
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y[:, j]))
        out.append(f'<polyline fill="none" stroke="{_COLORS[j % len(_COLORS)]}" stroke-width="1.5" points="{pts}"><title>E{j + 1}</title></polyline>')
    for th, e in minima:
        out.append(f'<circle cx="{sx(float(th)):.2f}" cy="{sy(float(e)):.2f}" r="4" fill="none" stroke="black" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# --- JSON schemas for the emitted artifacts

_NUM = {"type": ["number", "null"]}
_VEC = {"type": "array", "items": _NUM}
_CONFIG = {
    "type": "object",
    "required": ["kind", "period", "values", "bounds"],
    "properties": {
        "kind": {"enum": ["constant", "periodic", "boxed"]},
        "period": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "values": _VEC,
        "bounds": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    },
}
_MATRIX = {
    "type": "object",
    "required": ["order", "lambda", "entries", "class", "eigenvalues"],
    "properties": {
        "order": {"type": "integer", "minimum": 1},
        "lambda": {"type": "number"},
        "entries": {"type": "array", "items": {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}}},
        "class": {"enum": ["positive-definite", "negative-definite", "indefinite", "numerically-singular"]},
        "eigenvalues": _VEC,
    },
}

MINIMA_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "minima.json",
    "type": "object",
    "required": ["fingerprint", "lambda", "extreme", "minima", "quadratic", "warnings"],
    "properties": {
        "fingerprint": {"type": "string"},
        "lambda": {"type": "number"},
        "extreme": {"enum": ["minus", "plus"]},
        "minima": {
            "type": "object",
            "required": ["m", "points", "values", "e_min", "grouping_tol", "merge_radius", "resolution", "simple"],
            "properties": {
                "m": {"type": "integer", "minimum": 1},
                "points": {"type": "array", "items": _VEC},
                "values": _VEC,
                "e_min": {"type": "number"},
                "grouping_tol": {"type": "number", "exclusiveMinimum": 0},
                "merge_radius": {"type": "number"},
                "resolution": {"type": "number", "minimum": 0},
                "simple": {"type": "array", "items": {"type": "boolean"}},
            },
        },
        "quadratic": {
            "type": ["object", "null"],
            "properties": {
                "fits": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["theta", "hessian", "c_fit", "delta", "n_points"],
                        "properties": {"c_fit": {"type": "number", "minimum": 1}},
                    },
                }
            },
        },
        "warnings": {"type": "array", "items": {"type": "string"}},
    },
}

COUPLING_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "coupling.json",
    "type": "object",
    "required": ["fingerprint", "a_zero", "scan", "rephasing", "warnings"],
    "properties": {
        "fingerprint": {"type": "string"},
        "a_zero": _MATRIX,
        "scan": {
            "type": ["object", "null"],
            "required": ["ladder", "reference", "c_zero", "lambda0_estimate", "envelope_slope", "entries"],
            "properties": {
                "ladder": _VEC,
                "reference": {"enum": ["minus", "plus"]},
                "c_zero": {"type": "number"},
                "lambda0_estimate": {"type": "number", "minimum": 0},
                "envelope_slope": {"type": "number", "minimum": 0},
                "envelope_holds": {"type": "boolean"},
                "class_constant_to_lambda0": {"type": "boolean"},
                "entries": {"type": "array", "items": {"allOf": [_MATRIX, {"required": ["margin", "deviation"]}]}},
            },
        },
        "rephasing": {
            "type": "object",
            "required": ["trials", "seed", "class_stable", "max_eigenvalue_drift"],
            "properties": {
                "trials": {"type": "integer"},
                "seed": {"type": "integer"},
                "class_stable": {"type": "boolean"},
                "max_eigenvalue_drift": _NUM,
            },
        },
        "warnings": {"type": "array", "items": {"type": "string"}},
    },
}

_REPORT = {
    "type": "object",
    "required": ["mode", "lambda", "definiteness", "predicted", "predicted_energy", "argmin", "argmin_is_predicted", "gap", "budget", "verdict", "spread", "all_tie", "spectra"],
    "properties": {
        "mode": {"enum": ["min_location", "monotone"]},
        "lambda": {"type": "number", "minimum": 0},
        "predicted": {"enum": ["omega_minus", "omega_plus"]},
        "argmin": _CONFIG,
        "verdict": {"enum": ["pass", "fail"]},
        "budget": {"type": "number", "exclusiveMinimum": 0},
        "spectra": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["config", "lambda", "e_min", "theta", "resolution"],
                "properties": {"config": _CONFIG},
            },
        },
    },
}

PROJECTION_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "projection.json",
    "type": "object",
    "required": ["lambda", "extreme", "e_extreme", "n_configs", "period", "rows", "min_eigenvalue", "all_valid", "verdict"],
    "properties": {
        "lambda": {"type": "number"},
        "extreme": {"enum": ["minus", "plus"]},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["theta", "min_eigenvalue", "min_gap", "valid"],
                "properties": {"theta": _VEC, "valid": {"type": "boolean"}},
            },
        },
        "verdict": {"enum": ["pass", "fail"]},
    },
}

VERIFICATION_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "verification.json",
    "type": "object",
    "required": ["fingerprint", "couplings", "reports", "skipped", "projection", "box", "warnings", "verdict"],
    "properties": {
        "fingerprint": {"type": "string"},
        "couplings": _VEC,
        "reports": {"type": "array", "items": _REPORT},
        "skipped": {"type": "array", "items": {"type": "string"}},
        "projection": {"anyOf": [{"type": "null"}, PROJECTION_SCHEMA]},
        "box": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["lambda", "boxes", "n_samples", "min_energy", "predicted_infimum", "budget", "violations", "passed"],
            },
        },
        "warnings": {"type": "array", "items": {"type": "string"}},
        "verdict": {"enum": ["pass", "fail"]},
    },
}

SCHEMAS = {
    "minima.json": MINIMA_SCHEMA,
    "coupling.json": COUPLING_SCHEMA,
    "verification.json": VERIFICATION_SCHEMA,
    "projection.json": PROJECTION_SCHEMA,
}

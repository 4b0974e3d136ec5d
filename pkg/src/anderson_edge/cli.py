"""Command-line pipeline: bands -> minima -> coupling -> verify (+ project-check).

Each stage writes its artifact into the output directory and reads the
upstream artifacts it needs when they are present and were produced from
the same inputs (checked through the ``fingerprint`` field). Missing or
stale inputs are recomputed unless ``--no-recompute`` is given.

Exit status: 0 when every requested verdict passes, 1 on a failed verdict
(or a warning under ``--strict``), 2 on a config error, 3 on a pipeline
error or a missing upstream artifact.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import export
from .config import DEFAULT_CONFIG, ExperimentConfig, config_dict, load_config
from .coupling import NEGATIVE, POSITIVE, analyse_coupling, classify_definiteness, hermitian_part_eigenvalues, lambda_threshold_scan, rephase
from .errors import AndersonEdgeError, ConfigError, MissingUpstream, NotDefiniteAtZero
from .floquet import BandStructure, compute_band_structure, find_band_minima, parallel_map, quadratic_model, theta_grid
from .verifier import (
    BUDGET_FLOOR,
    box_sampling_check,
    extreme_bottom,
    monotone_case_oracle,
    projection_positivity_check,
    random_periodic_configs,
    verify_min_location,
    site_sign,
)

log = logging.getLogger("anderson_edge")

STAGES = ("bands", "minima", "coupling", "verify", "project-check")
REPHASE_TRIALS = 100
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_PIPELINE = 0, 1, 2, 3


@dataclass
class Pipeline:
    cfg: ExperimentConfig
    out: Path
    threads: int = 1
    recompute: bool = True
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.out = Path(self.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self._band: BandStructure | None = None

    # -- fingerprints tie artifacts to the inputs that determine them

    @property
    def _cd(self) -> dict:
        return config_dict(self.cfg)

    def fp_minima(self) -> str:
        cd = self._cd
        return export.fingerprint({"model": cd["model"], "n_theta": cd["sweep"]["n_theta"], "n_bands": cd["sweep"]["n_bands"], "refine_tol": cd["check"]["refine_tol"], "delta": cd["check"]["delta"]})

    def fp_coupling(self) -> str:
        cd = self._cd
        keys = ("refine_tol", "singular_tol", "seed")
        return export.fingerprint({"model": cd["model"], "n_theta": cd["sweep"]["n_theta"], "ladder": cd["sweep"]["ladder"], **{k: cd["check"][k] for k in keys}})

    def fp_verify(self) -> str:
        return export.fingerprint(self._cd)

    def _load(self, name: str, fp: str):
        path = self.out / name
        if path.exists():
            data = export.read_json(path)
            if data.get("fingerprint") == fp:
                log.info("reusing %s", path)
                return data
            log.info("%s is stale (inputs changed)", path)
        if not self.recompute:
            raise MissingUpstream(f"{name} is missing or stale in {self.out} and recompute is disabled")
        return None

    def _warn(self, msg: str):
        log.warning(msg)
        self.warnings.append(msg)

    # -- stages

    def bands(self) -> BandStructure:
        if self._band is None:
            model = self.cfg.model.extreme(0.0, "minus")
            n_bands = min(self.cfg.sweep.n_bands, model.grid.size)
            self._band = compute_band_structure(model, self.cfg.sweep.n_theta, n_bands, self.threads)
        return self._band

    def stage_bands(self) -> Path:
        path = export.write_bands_csv(self.out / "bands.csv", self.bands())
        log.info("wrote %s", path)
        return path

    def _band_for_minima(self) -> BandStructure:
        path = self.out / "bands.csv"
        model = self.cfg.model.extreme(0.0, "minus")
        n_theta = self.cfg.sweep.n_theta
        if self._band is None and path.exists():
            thetas, vals = export.read_bands_csv(path)
            if thetas.shape == (n_theta**model.dimension, model.dimension) and np.allclose(thetas, theta_grid(model, n_theta)):
                log.info("reusing %s", path)
                lo, hi = model.zone()
                self._band = BandStructure(thetas, vals, n_theta, hi - lo, model)
        return self.bands()

    def stage_minima(self) -> dict:
        band = self._band_for_minima()
        minima = find_band_minima(band, self.cfg.check.refine_tol)
        notes = []
        if not all(minima.simple):
            notes.append("a first-band minimum is not simple")
        delta = max(self.cfg.check.delta, 3.0 * float(np.max(band.step)))
        if delta != self.cfg.check.delta:
            notes.append(f"delta raised to {delta:.6g} (three grid steps)")
        try:
            quad = quadratic_model(band, minima, delta).to_dict()
        except AndersonEdgeError as exc:
            quad = None
            notes.append(f"quadratic model failed: {type(exc).__name__}: {exc}")
        for n in notes:
            self._warn(n)
        data = {
            "fingerprint": self.fp_minima(),
            "lambda": 0.0,
            "extreme": "minus",
            "minima": minima.to_dict(),
            "quadratic": quad,
            "warnings": notes,
        }
        export.write_json(self.out / "minima.json", data)
        log.info("wrote %s (m=%d)", self.out / "minima.json", minima.m)
        return data

    def coupling(self) -> dict:
        data = self._load("coupling.json", self.fp_coupling())
        return data if data is not None else self.stage_coupling()

    def stage_coupling(self) -> dict:
        family, chk = self.cfg.model, self.cfg.check
        minima_path = self.out / "minima.json"
        if minima_path.exists():
            up = export.read_json(minima_path)
            if up.get("fingerprint") == self.fp_minima():
                log.info("using %s for the lambda = 0 cross-check", minima_path)
            else:
                up = None
        else:
            up = None
        notes = []
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            a0 = analyse_coupling(family, 0.0, "minus", self.cfg.sweep.n_theta, chk.refine_tol, chk.singular_tol, self.threads)
            if up is not None and up["minima"]["m"] != a0.minima.m:
                notes.append(f"minima.json reports m={up['minima']['m']}, coupling analysis found m={a0.minima.m}")
            try:
                scan = lambda_threshold_scan(family, self.cfg.sweep.ladder, self.cfg.sweep.n_theta, chk.refine_tol, chk.singular_tol, self.threads)
            except NotDefiniteAtZero as exc:
                scan = None
                notes.append(str(exc))
        notes += [str(w.message) for w in caught]
        matrices = scan.matrices if scan is not None else (a0.matrix,)
        scan_dict = None
        if scan is not None:
            scan_dict = scan.to_dict()
            dev = scan.deviations()
            scan_dict["envelope_holds"] = bool(all(
                np.isnan(dv) or dv <= scan.envelope_slope * lam * (1 + 1e-12) + 1e-14 for lam, dv in zip(scan.ladder, dev)
            ))
            ref = scan.matrices[0].definiteness
            scan_dict["class_constant_to_lambda0"] = bool(all(
                m.definiteness == ref for lam, m in zip(scan.ladder, scan.matrices) if lam <= scan.lambda0
            ))
        data = {
            "fingerprint": self.fp_coupling(),
            "a_zero": a0.matrix.to_dict(),
            "scan": scan_dict,
            "rephasing": rephasing_study(matrices, REPHASE_TRIALS, chk.seed, chk.singular_tol),
            "warnings": notes,
        }
        for n in notes:
            self._warn(n)
        export.write_json(self.out / "coupling.json", data)
        log.info("wrote %s (A(0) %s)", self.out / "coupling.json", a0.matrix.definiteness)
        return data

    def couplings(self, coup: dict) -> list[float]:
        scan = coup["scan"]
        lam0 = scan["lambda0_estimate"] if scan is not None else 0.0
        vals = {round(f * lam0, 12) for f in self.cfg.check.lambda_fractions}
        vals |= {float(v) for v in self.cfg.check.lambda_values}
        return sorted(vals)

    def _projection(self, coup: dict) -> dict | None:
        family, chk = self.cfg.model, self.cfg.check
        scan = coup["scan"]
        if scan is None:
            self._warn("projection check skipped: A(0) is not definite")
            return None
        lam = chk.projection_fraction * scan["lambda0_estimate"]
        extreme = scan["reference"]
        e_ext = extreme_bottom(family, lam, extreme, self.cfg.sweep.n_theta, chk.refine_tol)
        configs = random_periodic_configs(family, chk.projection_period, chk.projection_samples, chk.seed, self.cfg.sweep.alphabet)

        def one(cfg):
            return projection_positivity_check(
                family, cfg, lam, extreme=extreme, n_theta=chk.projection_n_theta,
                gap_threshold=chk.gap_threshold, e_extreme=e_ext,
            )

        results = parallel_map(one, configs, self.threads)
        rows = []
        for i in range(len(results[0])):
            col = [r[i] for r in results]
            rows.append({
                "theta": np.asarray(col[0].theta).tolist(),
                "min_eigenvalue": min(c.min_eigenvalue for c in col),
                "min_gap": min(c.gap for c in col),
                "valid": all(c.valid for c in col),
            })
        worst = min(r["min_eigenvalue"] for r in rows)
        all_valid = all(r["valid"] for r in rows)
        if not all_valid:
            self._warn("projection check: first-band cluster gap below threshold at some quasimomenta")
        ok = all_valid and worst >= -BUDGET_FLOOR
        return {
            "lambda": lam,
            "extreme": extreme,
            "e_extreme": e_ext,
            "n_configs": len(configs),
            "period": list(configs[0].period),
            "rows": rows,
            "min_eigenvalue": worst,
            "tolerance": BUDGET_FLOOR,
            "all_valid": all_valid,
            "verdict": "pass" if ok else "fail",
        }

    def stage_project_check(self) -> dict:
        coup = self.coupling()
        proj = self._projection(coup)
        if proj is None:
            raise NotDefiniteAtZero("projection check needs a definite A(0)")
        data = {"fingerprint": self.fp_verify(), **proj}
        export.write_json(self.out / "projection.json", data)
        log.info("wrote %s", self.out / "projection.json")
        return data

    def stage_verify(self) -> dict:
        family, chk, sw = self.cfg.model, self.cfg.check, self.cfg.sweep
        coup = self.coupling()
        couplings = self.couplings(coup)
        a0_class = coup["a_zero"]["class"]
        sign = site_sign(family)
        run = set(chk.run)
        modes = set()
        if "auto" in run:
            modes.add("monotone" if sign != 0 else "min_location")
        modes |= run & {"monotone", "min_location"}
        reports, skipped = [], []
        for mode in sorted(modes):
            if mode == "monotone" and sign == 0:
                skipped.append("monotone: single site takes both signs")
                continue
            if mode == "min_location" and a0_class not in (POSITIVE, NEGATIVE):
                skipped.append(f"min_location: A(0) is {a0_class}")
                continue
            for lam in couplings:
                if mode == "monotone":
                    rep = monotone_case_oracle(family, lam, sw.alphabet, sw.max_period, sw.supercell_n_theta, seed=chk.seed, threads=self.threads)
                else:
                    rep = verify_min_location(family, lam, sw.alphabet, sw.max_period, sw.supercell_n_theta, a0_class, sw.n_theta, self.threads)
                reports.append(rep)
                log.info("%s lambda=%g: argmin %s, gap %.3e, budget %.3e -> %s", mode, lam, rep.argmin.label(), rep.gap, rep.budget, "pass" if rep.verdict else "fail")
        for s in skipped:
            self._warn(f"skipped {s}")
        projection = self._projection(coup) if "projection" in run else None
        box = []
        if "box" in run:
            if family.dimension != 1:
                skipped.append("box: implemented for d = 1 only")
            else:
                for rep in reports:
                    summary = box_sampling_check(
                        family, rep.coupling, chk.box_sizes, chk.box_samples, chk.seed,
                        rep.predicted_energy, rep.budget, sw.alphabet,
                    )
                    box.append({"lambda": rep.coupling, "mode": rep.mode, **summary.to_dict()})
        ok = all(r.verdict for r in reports)
        ok = ok and all(b["passed"] for b in box)
        ok = ok and (projection is None or projection["verdict"] == "pass")
        data = {
            "fingerprint": self.fp_verify(),
            "couplings": couplings,
            "reports": [r.to_dict() for r in reports],
            "skipped": skipped,
            "projection": projection,
            "box": box,
            "warnings": list(self.warnings),
            "verdict": "pass" if ok else "fail",
        }
        export.write_json(self.out / "verification.json", data)
        (self.out / "verification.csv").write_text(export.verification_csv(data["reports"]))
        log.info("wrote %s (%s)", self.out / "verification.json", data["verdict"])
        return data

    def run_all(self) -> dict:
        self.stage_bands()
        minima = self.stage_minima()
        coup = self.stage_coupling()
        ver = self.stage_verify()
        if self.cfg.model.dimension == 1:
            band = self.bands()
            marks = [(p[0], v) for p, v in zip(minima["minima"]["points"], minima["minima"]["values"])]
            svg = export.bands_svg(band.thetas[:, 0], band.bands, marks, "lowest bands at coupling 0")
            (self.out / "bands.svg").write_text(svg)
        (self.out / "report.md").write_text(report_markdown(minima, coup, ver))
        log.info("wrote %s", self.out / "report.md")
        return ver


def rephasing_study(matrices, trials: int, seed: int, singular_tol: float) -> dict:
    """Class and Hermitian-part spectrum under random diagonal-unitary rephasings."""
    rng = np.random.default_rng(seed)
    stable = True
    drift = 0.0
    for mat in matrices:
        a = np.asarray(mat.entries)
        base = hermitian_part_eigenvalues(a)
        cls = classify_definiteness(a, singular_tol, mat.scale)
        for _ in range(trials):
            b = rephase(a, rng.uniform(0.0, 2.0 * np.pi, a.shape[0]))
            stable = stable and classify_definiteness(b, singular_tol, mat.scale) == cls
            drift = max(drift, float(np.max(np.abs(hermitian_part_eigenvalues(b) - base))))
    return {"trials": trials, "seed": seed, "class_stable": bool(stable), "max_eigenvalue_drift": drift}


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.6g}"


def report_markdown(minima: dict, coup: dict, ver: dict) -> str:
    """Human summary; every number is copied from a JSON field named next to it."""
    mset = minima["minima"]
    lines = ["# Experiment report", ""]
    lines += ["## First band at coupling 0 (minima.json)", ""]
    lines.append(f"- `minima.m`: {mset['m']}")
    lines.append(f"- `minima.e_min`: {_fmt(mset['e_min'])}")
    lines.append(f"- `minima.points`: {mset['points']}")
    lines.append(f"- `minima.resolution`: {_fmt(mset['resolution'])}")
    if minima["quadratic"] is not None:
        for i, f in enumerate(minima["quadratic"]["fits"]):
            lines.append(f"- `quadratic.fits[{i}].c_fit`: {_fmt(f['c_fit'])} (delta {_fmt(f['delta'])})")
    lines += ["", "## Coupling matrix (coupling.json)", ""]
    lines.append(f"- `a_zero.class`: {coup['a_zero']['class']}")
    lines.append(f"- `a_zero.eigenvalues`: {[float(f'{v:.6g}') for v in coup['a_zero']['eigenvalues']]}")
    scan = coup["scan"]
    if scan is not None:
        lines.append(f"- `scan.reference`: {scan['reference']}")
        lines.append(f"- `scan.c_zero`: {_fmt(scan['c_zero'])}")
        lines.append(f"- `scan.lambda0_estimate`: {_fmt(scan['lambda0_estimate'])} (empirical)")
        lines.append(f"- `scan.envelope_slope`: {_fmt(scan['envelope_slope'])}")
        lines += ["", "| lambda | class | margin | deviation |", "|---|---|---|---|"]
        for e in scan["entries"]:
            lines.append(f"| {_fmt(e['lambda'])} | {e['class']} | {_fmt(e['margin'])} | {_fmt(e['deviation'])} |")
    reph = coup["rephasing"]
    lines.append("")
    lines.append(f"- `rephasing.class_stable`: {reph['class_stable']} over {reph['trials']} trials per matrix")
    lines += ["", "## Verification (verification.json)", ""]
    lines.append(f"- `verdict`: **{ver['verdict']}**")
    if ver["reports"]:
        lines += ["", "| mode | lambda | predicted | argmin | gap | budget | all_tie | verdict |", "|---|---|---|---|---|---|---|---|"]
        for r in ver["reports"]:
            arg = "(" + ", ".join(f"{v:g}" for v in r["argmin"]["values"]) + ")"
            lines.append(f"| {r['mode']} | {_fmt(r['lambda'])} | {r['predicted']} | {arg} | {_fmt(r['gap'])} | {_fmt(r['budget'])} | {r['all_tie']} | {r['verdict']} |")
    proj = ver["projection"]
    if proj is not None:
        lines.append("")
        lines.append(f"- `projection.lambda`: {_fmt(proj['lambda'])}, `projection.n_configs`: {proj['n_configs']}, `projection.min_eigenvalue`: {_fmt(proj['min_eigenvalue'])}, `projection.verdict`: {proj['verdict']}")
    for b in ver["box"]:
        lines.append(f"- `box` at lambda {_fmt(b['lambda'])}: `min_energy` {[float(f'{v:.6g}') for v in b['min_energy']]}, `violations` {b['violations']}")
    for s in ver["skipped"]:
        lines.append(f"- skipped: {s}")
    if ver["warnings"]:
        lines += ["", "## Warnings", ""] + [f"- {w}" for w in ver["warnings"]]
    lines += ["", "Scope: finite alphabet and bounded periods only; the checks sample a desk-scale subset of periodic configurations.", ""]
    return "\n".join(lines)


def run_experiment(config_path, out=None, threads: int = 1, stage: str | None = None, recompute: bool = True, strict: bool = False) -> int:
    """Run the pipeline (or one stage) from a config file and return the exit status."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    pipe = Pipeline(cfg, Path(out) if out is not None else cfg.output_dir, threads, recompute)
    current = stage or "run"
    try:
        if stage is None:
            ver = pipe.run_all()
            ok = ver["verdict"] == "pass"
        elif stage == "bands":
            pipe.stage_bands()
            ok = True
        elif stage == "minima":
            ok = pipe.stage_minima()["quadratic"] is not None
        elif stage == "coupling":
            coup = pipe.stage_coupling()
            ok = coup["rephasing"]["class_stable"]
        elif stage == "verify":
            ok = pipe.stage_verify()["verdict"] == "pass"
        elif stage == "project-check":
            data = pipe.stage_project_check()
            print(projection_table(data))
            ok = data["verdict"] == "pass"
        else:
            raise ValueError(f"unknown stage {stage!r}")
    except MissingUpstream as exc:
        log.error("stage %r: %s", current, exc)
        return EXIT_PIPELINE
    except (AndersonEdgeError, ValueError, np.linalg.LinAlgError) as exc:
        log.error("stage %r failed: %s: %s", current, type(exc).__name__, exc)
        return EXIT_PIPELINE
    if strict and pipe.warnings:
        log.error("--strict: %d warning(s) treated as failures", len(pipe.warnings))
        return EXIT_FAIL
    return EXIT_OK if ok else EXIT_FAIL


def projection_table(data: dict) -> str:
    rows = ["theta\tmin_eigenvalue\tmin_gap\tvalid"]
    for r in data["rows"]:
        th = ",".join(f"{t:.6g}" for t in r["theta"])
        rows.append(f"{th}\t{r['min_eigenvalue']:.6e}\t{r['min_gap']:.6e}\t{r['valid']}")
    return "\n".join(rows)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anderson-edge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, type=Path, help="experiment TOML file")
        sp.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for zone and configuration sweeps")
        sp.add_argument("--strict", action="store_true", help="treat warnings as failures")
        sp.add_argument("--no-recompute", action="store_true", help="fail instead of recomputing missing upstream artifacts")
        sp.add_argument("-q", "--quiet", action="store_true")

    r = sub.add_parser("run", help="full pipeline, or one stage with --stage")
    common(r)
    r.add_argument("--stage", choices=STAGES, default=None)
    for name in STAGES:
        common(sub.add_parser(name, help=f"run the {name} stage only"))
    init = sub.add_parser("init", help="write the default config")
    init.add_argument("path", type=Path)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "init":
        args.path.write_text(DEFAULT_CONFIG)
        return EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    stage = args.stage if args.command == "run" else args.command
    if args.threads < 1:
        log.error("--threads must be >= 1")
        return EXIT_CONFIG
    return run_experiment(args.config, args.out, args.threads, stage, not args.no_recompute, args.strict)


if __name__ == "__main__":
    sys.exit(main())

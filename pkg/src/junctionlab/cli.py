"""Configuration-driven scenario runner.

Usage::

    junctionlab run --config scenario.ini --out results/ [--seed 7] [--threads 4] [--verify]
    junctionlab validate --config scenario.ini
    junctionlab verify --out results/

Config files are INI text (see ``docs/config.md``).  Exit codes: 0 success,
2 configuration/parse error, 3 numerical failure (partial artifacts kept).
Every run writes ``MANIFEST.sha256`` (``sha256sum`` format) covering all
emitted files.

Seeding: the 64-bit ``seed`` feeds one :class:`numpy.random.SeedSequence`;
scenario components draw from ``SeedSequence.spawn`` children in a fixed
order (sphere: one child per requested seed index).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

KINDS = ("solve", "diagnose", "blowup", "epi-sweep", "sphere")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
MANIFEST = "MANIFEST.sha256"
DEFAULT_RADII = "0.1,0.2,0.3,0.4,0.5"


class ConfigError(ValueError):
    """Invalid or unparseable scenario configuration."""


# --------------------------------------------------------------------------- config

def _floats(text):
    return tuple(float(x) for x in str(text).replace(";", ",").split(",") if x.strip())


@dataclass
class ScenarioConfig:
    kind: str
    seed: int = 0
    d: int = 2
    h: float = 1 / 64
    boundary: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    input_field: Optional[str] = None
    out: Optional[str] = None


_BOUNDARY_KEYS = {"kind", "n", "offsets", "a0", "b0", "a", "b", "delta", "extra_phase", "rotation"}
_SOLVER_KEYS = {"method", "kappa", "step_policy", "max_halvings", "max_iter", "tol", "segregation_tol",
                "plateau_window"}


def _check_range(errors, name, value, lo=None, hi=None, lo_open=False):
    if lo is not None and (value < lo or (lo_open and value == lo)):
        errors.append(f"{name}: {value} out of range (must be {'>' if lo_open else '>='} {lo})")
    if hi is not None and value > hi:
        errors.append(f"{name}: {value} out of range (must be <= {hi})")


def parse_config(path) -> tuple:
    """Read a scenario file; returns ``(ScenarioConfig or None, errors)``."""
    errors = []
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        return None, [f"parse: {exc}"]
    if not cp.has_section("scenario"):
        return None, ["scenario: missing [scenario] section"]
    sc = cp["scenario"]
    kind = sc.get("kind", "").strip()
    if kind not in KINDS:
        return None, [f"scenario.kind: {kind!r} is not one of {', '.join(KINDS)}"]
    cfg = ScenarioConfig(kind)
    try:
        cfg.seed = sc.getint("seed", 0)
        g = cp["grid"] if cp.has_section("grid") else {}
        cfg.d = int(g.get("d", 2))
        cfg.h = float(g.get("h", 1 / 64))
        cfg.input_field = sc.get("input_field")
        cfg.out = sc.get("out")
        if cp.has_section("boundary"):
            b = dict(cp["boundary"])
            unknown = set(b) - _BOUNDARY_KEYS
            if unknown:
                errors.append(f"boundary: unknown keys {sorted(unknown)}")
            cfg.boundary = b
        if cp.has_section("solver"):
            s = dict(cp["solver"])
            unknown = set(s) - _SOLVER_KEYS
            if unknown:
                errors.append(f"solver: unknown keys {sorted(unknown)}")
            cfg.solver = s
        sect = kind.replace("-", "_")
        if cp.has_section(sect):
            cfg.params = dict(cp[sect])
    except ValueError as exc:
        return None, [f"parse: {exc}"]
    errors += _validate(cfg)
    return cfg, errors


def _validate(cfg: ScenarioConfig):
    errors = []
    _check_range(errors, "scenario.seed", cfg.seed, 0, 2 ** 64 - 1)
    if cfg.kind != "sphere":
        if cfg.d not in (2, 3):
            errors.append(f"grid.d: {cfg.d} out of range (must be 2 or 3)")
        _check_range(errors, "grid.h", cfg.h, 0.0, 0.5, lo_open=True)
        if cfg.h > 0:
            m = 2.0 / cfg.h
            if abs(m - round(m)) > 1e-9 * m:
                errors.append(f"grid.h: {cfg.h} must divide 2 into an integer number of cells")
    if cfg.input_field and not Path(cfg.input_field).exists():
        errors.append(f"scenario.input_field: file {cfg.input_field} does not exist")
    b = cfg.boundary
    try:
        kind = b.get("kind", "y")
        if kind not in ("y", "perturbed"):
            errors.append(f"boundary.kind: {kind!r} is not one of y, perturbed")
        if "offsets" in b and len(_floats(b["offsets"])) != 3:
            errors.append("boundary.offsets: need three values")
        if "delta" in b:
            _check_range(errors, "boundary.delta", float(b["delta"]), 0.0)
        if "n" in b:
            _check_range(errors, "boundary.n", int(b["n"]), 3)
        if "extra_phase" in b and b["extra_phase"].strip() and len(_floats(b["extra_phase"])) != 3:
            errors.append("boundary.extra_phase: need center, half_width, amplitude")
    except ValueError as exc:
        errors.append(f"boundary: {exc}")
    try:
        _solver_config(cfg.solver)
    except (ValueError, TypeError) as exc:
        errors.append(f"solver: {exc}")
    p = cfg.params
    try:
        if cfg.kind == "sphere":
            _check_range(errors, "sphere.subdiv", int(p.get("subdiv", 5)), 0, 7)
            _check_range(errors, "sphere.seeds", int(p.get("seeds", 10)), 1)
            _check_range(errors, "sphere.n", int(p.get("n", 3)), 2)
        if cfg.kind == "epi-sweep":
            ds = _floats(p.get("deltas", "0.05"))
            if not ds:
                errors.append("epi_sweep.deltas: empty")
            for v in ds:
                _check_range(errors, "epi_sweep.deltas", v, 0.0, lo_open=True)
        if cfg.kind in ("diagnose", "blowup"):
            # radii must resolve at least four cells of the grid
            rmin = 4 * cfg.h if cfg.h > 0 and not cfg.input_field else 0.0
            if cfg.kind == "diagnose":
                for v in _floats(p.get("radii", DEFAULT_RADII)):
                    _check_range(errors, "diagnose.radii", v, max(rmin, 0.0), 1.0, lo_open=rmin == 0)
            _check_range(errors, f"{cfg.kind}.radius", float(p.get("radius", 0.25)), max(rmin, 0.0), 1.0,
                         lo_open=rmin == 0)
    except ValueError as exc:
        errors.append(f"{cfg.kind}: {exc}")
    return errors


def _solver_config(s):
    from .solver import SolverConfig
    kw = {}
    for k, v in s.items():
        if k in ("method", "step_policy"):
            kw[k] = v
        elif k in ("max_iter", "max_halvings", "plateau_window"):
            kw[k] = int(v)
        else:
            kw[k] = float(v)
    return SolverConfig(**kw)


def _spec(b):
    from .epi import PerturbationSpec
    extra = b.get("extra_phase", "").strip()
    return PerturbationSpec(offsets=_floats(b.get("offsets", "0,0,0")), a0=float(b.get("a0", 0)),
                            a=_floats(b.get("a", "")), b0=float(b.get("b0", 0)), b=_floats(b.get("b", "")),
                            delta=float(b.get("delta", 0)), extra_phase=_floats(extra) if extra else None)


def _boundary(cfg: ScenarioConfig):
    from .core import HomogeneousTrace, make_Y
    from .epi import perturb_trace
    b = cfg.boundary
    N = int(b.get("n", 3))
    if b.get("kind", "y") == "perturbed":
        return perturb_trace(_spec(b), cfg.d, N=N)
    return HomogeneousTrace.from_function(make_Y(N, 1.0, float(b.get("rotation", 0.0)), cfg.d), cfg.d)


# --------------------------------------------------------------------------- scenarios

def _obtain_field(cfg, out: Path, written):
    from .core import GridSpec
    from .io import read_sgf, write_sgf, write_solve_report_csv
    from .solver import minimize
    if cfg.input_field:
        return read_sgf(cfg.input_field)
    c = _boundary(cfg)
    u, rep = minimize(c, _solver_config(cfg.solver), grid=GridSpec(cfg.d, cfg.h), N=c.N)
    write_sgf(out / "field.sgf1", u)
    write_solve_report_csv(out / "solve_report.csv", rep)
    written += ["field.sgf1", "solve_report.csv"]
    return u


def _center(cfg, u):
    p = cfg.params
    if "center" in p and p["center"].strip() != "auto":
        return np.array(_floats(p["center"]))
    if u.grid.d == 2 and cfg.kind == "blowup":
        from .blowup import detect_junction
        return detect_junction(u)
    return np.zeros(u.grid.d)


def _run_solve(cfg, out, written, rng):
    _obtain_field(cfg, out, written)


def _run_diagnose(cfg, out, written, rng):
    from .diagnostics import stratify, weiss_profile, write_profile_csv, write_stratification_csv
    u = _obtain_field(cfg, out, written)
    x0 = _center(cfg, u)
    radii = _floats(cfg.params.get("radii", DEFAULT_RADII))
    wp, fp = weiss_profile(u, x0, radii)
    write_profile_csv(out / "profile.csv", fp, wp)
    written.append("profile.csv")
    with open(out / "audit.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["profile", "violations"])
        w.writerow(["frequency", len(fp.violations)])
        w.writerow(["weiss", len(wp.violations)])
    written.append("audit.csv")
    if cfg.params.get("stratify", "false").lower() in ("1", "true", "yes"):
        smap = stratify(u, float(cfg.params.get("r_est", 4 * u.grid.h)))
        write_stratification_csv(out / "stratification.csv", smap)
        written.append("stratification.csv")


def _run_blowup(cfg, out, written, rng):
    from .blowup import junction_report, rescale, singular_curve_fit, write_junction_csv, write_oscillation_csv
    from .io import write_sgt
    u = _obtain_field(cfg, out, written)
    x0 = _center(cfg, u)
    r = float(cfg.params.get("radius", 0.25))
    if u.grid.d == 2:
        rep = junction_report(u, x0, r)
        write_junction_csv(out / "junction.csv", [rep])
        written.append("junction.csv")
    else:
        fit = singular_curve_fit(u)
        write_oscillation_csv(out / "oscillation.csv", fit)
        with open(out / "singular_curve.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "eta2", "eta3", "deta2", "deta3"])
            for a, e, ep in zip(fit.axis_coords, fit.eta, fit.eta_prime):
                w.writerow([repr(float(a)), repr(float(e[0])), repr(float(e[1])),
                            repr(float(ep[0])), repr(float(ep[1]))])
        written += ["oscillation.csv", "singular_curve.csv"]
    write_sgt(out / "blowup_trace.sgt1", rescale(u, x0, r))
    written.append("blowup_trace.sgt1")


def _run_epi(cfg, out, written, rng):
    from .epi import epi_check, write_epi_csv
    base = _spec(cfg.boundary)
    if base.delta == 0:
        base = type(base)(base.offsets, base.a0, base.a, base.b0, base.b, 1.0, base.extra_phase)
    deltas = _floats(cfg.params.get("deltas", "0.05"))
    specs = [base.scaled(dl) for dl in deltas]
    N = int(cfg.boundary.get("n", 3))
    scfg = _solver_config(cfg.solver)
    reports = [epi_check(sp, scfg, h=cfg.h, d=cfg.d, N=N) for sp in specs]
    write_epi_csv(out / "epi.csv", reports, specs)
    written.append("epi.csv")


def _run_sphere(cfg, out, written, rng):
    from .sphere import (build_icosphere, minmax_partition_search, partition_report, write_history_csv,
                         write_partition_csv)
    p = cfg.params
    mesh = build_icosphere(int(p.get("subdiv", 5)))
    N = int(p.get("n", 3))
    nseeds = int(p.get("seeds", 10))
    children = np.random.SeedSequence(cfg.seed).spawn(nseeds)
    rows = []
    for k, child in enumerate(children):
        part, L, hist = minmax_partition_search(mesh, N, seed=child)
        rep = partition_report(mesh, part)
        write_partition_csv(out / f"partition_{k:02d}.csv", mesh, part)
        write_history_csv(out / f"history_{k:02d}.csv", hist)
        written += [f"partition_{k:02d}.csv", f"history_{k:02d}.csv"]
        ang = [a for j in rep.angles_deg for a in j]
        rows.append([k, repr(L), repr(rep.spread), repr(rep.hausdorff_deg), len(rep.junctions),
                     repr(float(np.max(np.abs(np.array(ang) - 120)))) if ang else "nan",
                     len(hist.L), hist.restarts, hist.stop])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed_index", "L3", "spread", "hausdorff_deg", "junctions", "max_angle_dev_deg",
                    "sweeps", "restarts", "stop"])
        w.writerows(rows)
    written.append("summary.csv")


_RUNNERS = {"solve": _run_solve, "diagnose": _run_diagnose, "blowup": _run_blowup,
            "epi-sweep": _run_epi, "sphere": _run_sphere}


# --------------------------------------------------------------------------- manifest

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, files):
    lines = [f"{_sha256(out / f)}  {f}" for f in sorted(set(files))]
    (out / MANIFEST).write_text("\n".join(lines) + "\n")


def read_manifest(out: Path):
    res = {}
    for ln in (Path(out) / MANIFEST).read_text().splitlines():
        if ln.strip():
            digest, name = ln.split("  ", 1)
            res[name] = digest
    return res


def verify_manifest(out: Path):
    """Mismatched or missing files against the manifest (empty list = ok)."""
    bad = []
    for name, digest in read_manifest(out).items():
        p = Path(out) / name
        if not p.exists():
            bad.append(f"{name}: missing")
        elif _sha256(p) != digest:
            bad.append(f"{name}: hash mismatch")
    return bad


# --------------------------------------------------------------------------- entry points

def _thread_count(arg):
    if arg is not None:
        return int(arg)
    env = os.environ.get("JUNCTIONLAB_THREADS")
    return int(env) if env else None


def run_scenario(cfg: ScenarioConfig, out: Path, threads: Optional[int] = None) -> int:
    """Execute a validated scenario into ``out``; returns the exit code."""
    from threadpoolctl import threadpool_limits

    from ._validation import DegenerateHeightError, ResolutionError
    from .blowup import NotATripleJunctionError
    from .io import write_sgf
    from .solver import SolverError
    from .sphere import PartitionCollapseError, UndefinedEigenvalueError
    out.mkdir(parents=True, exist_ok=True)
    written = []
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    code = EXIT_OK
    try:
        with threadpool_limits(limits=threads):
            _RUNNERS[cfg.kind](cfg, out, written, rng)
    except ResolutionError as exc:
        print(f"configuration: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except SolverError as exc:
        write_sgf(out / "field_partial.sgf1", exc.field)
        written.append("field_partial.sgf1")
        print(f"numerical failure: {exc}", file=sys.stderr)
        code = EXIT_NUMERIC
    except (NotATripleJunctionError, PartitionCollapseError, UndefinedEigenvalueError, DegenerateHeightError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        code = EXIT_NUMERIC
    write_manifest(out, written)
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="junctionlab", description="Segregated-field junction experiments.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run a scenario")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--threads", type=int, default=None)
    r.add_argument("--verify", action="store_true", help="rerun into a scratch directory and compare hashes")
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("--config", required=True)
    f = sub.add_parser("verify", help="recompute hashes of an output directory against its manifest")
    f.add_argument("--out", required=True)
    args = ap.parse_args(argv)

    if args.cmd == "verify":
        try:
            bad = verify_manifest(Path(args.out))
        except OSError as exc:
            print(f"verify: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        for b in bad:
            print(b)
        print("ok" if not bad else f"{len(bad)} mismatches")
        return EXIT_OK if not bad else EXIT_NUMERIC

    cfg, errors = parse_config(args.config)
    if args.cmd == "validate":
        for e in errors:
            print(e)
        if cfg is None or errors:
            return EXIT_CONFIG
        print("ok")
        return EXIT_OK
    if cfg is None or errors:
        for e in errors:
            print(e, file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        if args.seed < 0:
            print("--seed must be nonnegative", file=sys.stderr)
            return EXIT_CONFIG
        cfg.seed = args.seed
    out = Path(args.out or cfg.out or "junctionlab_out")
    threads = _thread_count(args.threads)
    code = run_scenario(cfg, out, threads)
    if args.verify and code == EXIT_OK:
        with tempfile.TemporaryDirectory() as tmp:
            run_scenario(cfg, Path(tmp), threads)
            a, b = read_manifest(out), read_manifest(Path(tmp))
            diff = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
            for k in diff:
                print(f"{k}: differs between runs")
            if diff:
                return EXIT_NUMERIC
            print("verified: outputs byte-identical")
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Acceptance suite: one test per criterion, each emitting a single PASS/FAIL line."""
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from junctionlab.blowup import (detect_junction, loop_crossing_parity, measure_junction_angles, rate_fit,
                                square_loop, two_homogeneity_field)
from junctionlab.cli import ScenarioConfig, read_manifest, run_scenario
from junctionlab.core import GridSpec, SegregatedField, make_Y, trace_of_Y
from junctionlab.diagnostics import frequency, weiss_profile
from junctionlab.epi import PerturbationSpec, beta_term, epi_check, perturb_trace, weiss_identity_check, weiss_of_trace
from junctionlab.solver import minimize
from junctionlab.sphere import (build_icosphere, cap_level, lambda1_dirichlet, lune_level, minmax_partition_search,
                                partition_report)


def verdict(n, ok, detail, tol):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  [tol {tol}]"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# --------------------------------------------------------------------------- 1

def test_c01_frequency_of_Y():
    t0 = time.perf_counter()
    u = SegregatedField.from_function(GridSpec(2, 1 / 128), make_Y())
    vals = np.array([frequency(u, np.zeros(2), r) for r in (0.1, 0.2, 0.3, 0.4, 0.5)])
    dt = time.perf_counter() - t0
    err = np.abs(vals - 1.5).max()
    verdict(1, err <= 0.01 and dt < 10, f"max |N - 1.5| = {err:.2e}, {dt:.1f} s", "0.01, < 10 s")


# --------------------------------------------------------------------------- 2

def test_c02_weiss_of_Y_trace():
    w = [weiss_of_trace(trace_of_Y(d=d), 1.5, d) for d in (2, 3)]
    worst = max(abs(x) for x in w)
    verdict(2, worst <= 1e-6, f"W(Y) = {w[0]:.1e} (d=2), {w[1]:.1e} (d=3)", "1e-6")


# --------------------------------------------------------------------------- 3

def test_c03_weiss_linearization_identity():
    t0 = time.perf_counter()
    rot = []
    for h in (1 / 128, 1 / 256):
        u = SegregatedField.from_function(GridSpec(2, h), make_Y(rotation=np.deg2rad(5)))
        rot.append(weiss_identity_check(u, make_Y())["residual"])
    c = perturb_trace(PerturbationSpec(offsets=(0.05, -0.05, 0.0), delta=0.05,
                                       extra_phase=(np.pi / 3, 0.1, 0.05)), N=4)
    sol = []
    for h in (1 / 128, 1 / 256):
        u, _ = minimize(c, grid=GridSpec(2, h), N=4)
        sol.append(weiss_identity_check(u, make_Y(4))["residual"])
    dt = time.perf_counter() - t0
    ok = max(rot[0], sol[0]) <= 0.05 and rot[1] < rot[0] and sol[1] < sol[0] and dt < 120
    verdict(3, ok, f"rotated Y {rot[0]:.2%} -> {rot[1]:.2%}, solver {sol[0]:.2%} -> {sol[1]:.2%}, {dt:.0f} s",
            "5% at h=1/128, decreasing to 1/256, < 120 s")


# --------------------------------------------------------------------------- 4

def test_c04_beta_positivity_and_calibration():
    g = GridSpec(2, 1 / 32)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(4).spawn(50)]
    worst = np.inf
    for rng in rngs:
        N = 4
        raw = rng.uniform(0, 1, (N,) + g.shape) * (rng.uniform(size=(N,) + g.shape) < 0.6)
        keep = np.argmax(raw, axis=0)
        comps = np.where(np.arange(N)[:, None, None] == keep[None], raw, 0.0) * g.mask
        worst = min(worst, beta_term(SegregatedField(g, comps), make_Y(4)))
    # painted ray: a fourth phase of height 1 on the cells along the Y interface at angle pi/3
    h = 1 / 128
    gp = GridSpec(2, h)
    comps = np.zeros((4,) + gp.shape)
    t = np.linspace(0, 1, 20001)
    pts = t[:, None] * np.array([np.cos(np.pi / 3), np.sin(np.pi / 3)])
    idx = np.floor((pts + 1) / h).astype(int)
    for a in (0, 1):
        for b in (0, 1):
            comps[3][idx[:, 0] + a, idx[:, 1] + b] = 1.0
    cal = beta_term(SegregatedField(gp, comps * gp.mask), make_Y(4), radius=1.0)
    ok = worst >= 0 and abs(cal / 4.0 - 1) <= 0.02
    verdict(4, ok, f"min beta over 50 fields = {worst:.3e}, painted ray = {cal:.4f} (want 4)", "beta >= 0, 2%")


# --------------------------------------------------------------------------- 5

EPI_SPECS = [PerturbationSpec(offsets=(0.05, -0.05, 0.0), delta=0.05),
             PerturbationSpec(offsets=(0.0, 0.05, -0.05), delta=0.05),
             PerturbationSpec(offsets=(-0.05, 0.0, 0.05), delta=0.05),
             PerturbationSpec(offsets=(0.05, 0.0, 0.0), delta=0.05),
             PerturbationSpec(delta=0.05, extra_phase=(np.pi / 3, 0.15, 0.3))]


def test_c05_epiperimetric_contraction():
    t0 = time.perf_counter()
    reps = [epi_check(sp, h=1 / 128, identity=False) for sp in EPI_SPECS]
    dt = time.perf_counter() - t0
    ok = all(not r.degenerate and r.W_u_le_W_interp and r.eps >= 0.05 for r in reps) and dt < 600
    eps = ", ".join(f"{r.eps:.3f}" for r in reps)
    verdict(5, ok, f"eps = [{eps}], W_u <= W_interp + slack in {sum(r.W_u_le_W_interp for r in reps)}/5, "
                   f"{dt:.0f} s", "eps >= 0.05, slack 1e-6 E_ext, < 600 s")


# --------------------------------------------------------------------------- 6

def test_c06_junction_geometry(solved_perturbed128):
    u, _ = solved_perturbed128
    g = u.grid
    x0 = detect_junction(u)
    ang = measure_junction_angles(u, x0, 0.25).angles_deg
    spine = loop_crossing_parity(u, square_loop(g, x0, 0.2))
    # a loop well inside the phase around the positive x_1 axis
    one = loop_crossing_parity(u, square_loop(g, np.array([0.55, 0.0]), 0.1))
    dev = np.abs(ang - 120).max()
    verdict(6, dev <= 2 and spine == 3 and one == 0,
            f"angles {np.round(ang, 2).tolist()}, parity spine {spine}, one phase {one}", "2 deg, parity exact")


# --------------------------------------------------------------------------- 7

def test_c07_rate_fit():
    rf = rate_fit(two_homogeneity_field(0.3), np.zeros(2), np.geomspace(0.05, 0.8, 8))
    verdict(7, abs(rf.alpha - 2) <= 0.2 and rf.r2 >= 0.95, f"alpha = {rf.alpha:.4f}, R^2 = {rf.r2:.5f}",
            "alpha 2 +- 0.2, R^2 >= 0.95")


# --------------------------------------------------------------------------- 8

def test_c08_sphere_minmax():
    t0 = time.perf_counter()
    m = build_icosphere(5)
    lev = lune_level(m, 2 * np.pi / 3)
    lune = lambda1_dirichlet(m, lev > 0, level=lev).lam
    hemi = lambda1_dirichlet(m, m.vertices[:, 2] > 0, level=cap_level(m, (0, 0, 1))).lam
    good = 0
    for child in np.random.SeedSequence(8).spawn(10):
        part, L, _ = minmax_partition_search(m, 3, seed=child)
        rep = partition_report(m, part)
        ang = np.array(rep.angles_deg, float)
        if abs(L / 3.75 - 1) <= 0.03 and len(rep.junctions) == 2 and np.all(np.abs(ang - 120) <= 3):
            good += 1
    dt = time.perf_counter() - t0
    ok = abs(lune / 3.75 - 1) <= 0.02 and abs(hemi / 2 - 1) <= 0.01 and good >= 8 and dt < 900
    verdict(8, ok, f"lune {lune:.4f}, hemisphere {hemi:.5f}, {good}/10 seeds good, {dt:.0f} s",
            "lune 2%, hemisphere 1%, L 3% and angles 3 deg in >= 8/10, < 900 s")


# --------------------------------------------------------------------------- 9

CORPUS = [None,
          PerturbationSpec(offsets=(0.05, -0.05, 0.0), delta=0.05),
          PerturbationSpec(offsets=(0.0, 0.05, -0.05), delta=0.05),
          PerturbationSpec(offsets=(0.05, 0.0, 0.0), delta=0.05, a0=0.5),
          PerturbationSpec(offsets=(0.05, -0.05, 0.0), delta=0.05, extra_phase=(np.pi / 3, 0.1, 0.05))]


def test_c09_monotonicity_corpus():
    h = 1 / 128
    g = GridSpec(2, h)
    bad, audits = [], 0
    for k, sp in enumerate(CORPUS):
        c = trace_of_Y() if sp is None else perturb_trace(sp, N=4 if sp.extra_phase else None)
        u, _ = minimize(c, grid=g, N=c.N)
        for x0 in (np.zeros(2), detect_junction(u)):
            radii = np.linspace(max(4 * h, 0.05), 0.95 - np.linalg.norm(x0), 12)
            wp, fp = weiss_profile(u, x0, radii, audit_tol=1e-3)
            audits += 2
            bad += [(k, "N", v) for v in fp.violations] + [(k, "W", v) for v in wp.violations]
    verdict(9, not bad, f"{len(bad)} violations in {audits} audits", "slack 1e-3")


# --------------------------------------------------------------------------- 10

SCENARIOS = [
    ScenarioConfig("solve", seed=1, h=1 / 32, boundary={"kind": "perturbed", "offsets": "0.05,-0.05,0",
                                                         "delta": "0.05"}),
    ScenarioConfig("diagnose", seed=1, h=1 / 32, params={"radii": "0.2,0.4,0.6"}),
    ScenarioConfig("blowup", seed=1, h=1 / 64, boundary={"kind": "perturbed", "offsets": "0.05,-0.05,0",
                                                          "delta": "0.05"}),
    ScenarioConfig("epi-sweep", seed=1, h=1 / 32, boundary={"offsets": "1,-1,0"},
                   params={"deltas": "0.025,0.05,0.1"}),
    ScenarioConfig("sphere", seed=11, params={"subdiv": "3", "seeds": "2"}),
]


def test_c10_determinism(tmp_path):
    diffs = []
    for cfg in SCENARIOS:
        a, b = tmp_path / f"{cfg.kind}_a", tmp_path / f"{cfg.kind}_b"
        assert run_scenario(cfg, a) == 0 and run_scenario(cfg, b) == 0
        ma, mb = read_manifest(a), read_manifest(b)
        assert ma, cfg.kind
        diffs += [f"{cfg.kind}/{k}" for k in sorted(set(ma) | set(mb)) if ma.get(k) != mb.get(k)]
    verdict(10, not diffs, f"{len(SCENARIOS)} scenarios, differing files: {diffs or 'none'}", "byte-identical")

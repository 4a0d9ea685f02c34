import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from sklearn.base import clone

from junctionlab.core import GridSpec, SegregatedField, make_Y, project_sigma, trace_of_Y
from junctionlab.epi import PerturbationSpec, perturb_trace
from junctionlab.solver import (SegregatedDirichletMinimizer, SolverConfig, SolverError, check_criticality,
                                dirichlet_energy, field_energy, minimize)


def _two_phase(p):
    return np.stack([np.clip(p[..., -1], 0, None), np.clip(-p[..., -1], 0, None)])


def _l2(a, g):
    return float(np.sqrt((a ** 2).sum() * g.h ** g.d))


def test_energy_of_zero_field():
    g = GridSpec(2, 1 / 16)
    assert dirichlet_energy(SegregatedField(g, np.zeros((3,) + g.shape))) == 0.0


@pytest.mark.parametrize("d", [2, 3])
def test_energy_of_linear_field_on_box(d):
    for h in (1 / 8, 1 / 32):
        g = GridSpec(d, h, ball=False)
        u = SegregatedField.from_function(g, lambda p: (p[..., -1] + 1)[None])
        # n^(d-1) (n-1) edges along x_d with increment h, weight h^(d-2)
        assert dirichlet_energy(u) == pytest.approx(2 * (2 + h) ** (d - 1), rel=1e-12)
    assert dirichlet_energy(u) == pytest.approx(2.0 ** d, rel=d * h)


def test_energy_of_Y_first_order():
    oracle = 1.5 * integrate.quad(lambda t: np.cos(1.5 * t) ** 2, -np.pi, np.pi, limit=200)[0]
    assert oracle == pytest.approx(1.5 * np.pi, rel=1e-10)
    errs = []
    for h in (1 / 32, 1 / 64, 1 / 128):
        u = SegregatedField.from_function(GridSpec(2, h), make_Y())
        errs.append(abs(dirichlet_energy(u) / oracle - 1))
    assert errs[-1] < 1e-2
    assert errs[0] / errs[1] > 1.8 and errs[1] / errs[2] > 1.8


def test_minimize_Y_boundary_recovers_Y():
    errs = []
    for h in (1 / 16, 1 / 32):
        g = GridSpec(2, h)
        u, rep = minimize(trace_of_Y(), grid=g, N=3)
        Y = SegregatedField.from_function(g, make_Y())
        errs.append(_l2(u.comps - Y.comps, g))
        assert rep.converged
    assert errs[1] <= 2 * (1 / 32)
    assert errs[1] < errs[0]


def test_minimize_two_phase_linear_is_fixed():
    g = GridSpec(2, 1 / 32)
    u, _ = minimize(_two_phase, grid=g)
    want = SegregatedField.from_function(g, _two_phase)
    np.testing.assert_allclose(u.comps, want.comps, atol=1e-12)


def test_minimize_zero_boundary():
    g = GridSpec(2, 1 / 16)
    u, rep = minimize(lambda p: np.zeros((3,) + p.shape[:-1]), grid=g)
    assert rep.iterations == 0 and not u.comps.any()


def test_energy_history_non_increasing_and_shell_preserved(solved_y64):
    u, rep = solved_y64
    assert np.all(np.diff(rep.energy_history) <= 1e-12 * rep.energy_history[0])
    g = u.grid
    c = trace_of_Y()
    shell = c.extend(g.points[g.shell], 1.5)
    np.testing.assert_array_equal(u.comps[:, g.shell], shell)


def test_non_convergence_raises_with_partial_field():
    g = GridSpec(2, 1 / 32)
    rng = np.random.default_rng(0)
    init = SegregatedField(g, project_sigma(rng.uniform(0, 1, (3,) + g.shape), axis=0) * g.mask)
    with pytest.raises(SolverError) as exc:
        minimize(trace_of_Y(), SolverConfig(max_iter=1), init=init, grid=g)
    assert exc.value.field.N == 3
    assert exc.value.report.iterations == 1


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(method="newton")
    with pytest.raises(ValueError):
        SolverConfig(kappa=-1)
    with pytest.raises(ValueError):
        SolverConfig(tol=0)


@pytest.fixture(scope="module")
def perturbed32():
    g = GridSpec(2, 1 / 32)
    c = perturb_trace(PerturbationSpec(offsets=(0.05, -0.05, 0.0), delta=0.05))
    u, _ = minimize(c, grid=g, N=3)
    return u


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_comparison_with_local_segregated_edits(perturbed32, seed):
    u = perturbed32
    g = u.grid
    E = dirichlet_energy(u)
    rng = np.random.default_rng(seed)
    free = np.argwhere(g.free)
    v = u.comps.copy()
    for idx in free[rng.choice(len(free), 4)]:
        at = (slice(None),) + tuple(idx)
        old = v[at].max()
        v[at] = 0.0
        v[(rng.integers(3),) + tuple(idx)] = max(old + rng.normal(0, 0.02), 0.0)
    assert field_energy(v, g) >= E - 1e-12


def test_jacobi_policy_agrees_with_redblack():
    g = GridSpec(2, 1 / 32)
    c = perturb_trace(PerturbationSpec(offsets=(0.05, -0.05, 0.0), delta=0.05))
    a, _ = minimize(c, grid=g, N=3)
    b, _ = minimize(c, SolverConfig(step_policy="jacobi"), grid=g, N=3)
    assert dirichlet_energy(b) == pytest.approx(dirichlet_energy(a), rel=1e-6)


def test_penalty_converges_to_projected_gradient():
    g = GridSpec(2, 1 / 16)
    ref, _ = minimize(trace_of_Y(), grid=g, N=3)
    gaps = []
    for kappa in (1e2, 1e3, 1e4):
        u, _ = minimize(trace_of_Y(), SolverConfig(method="penalty", kappa=kappa), grid=g, N=3)
        assert u.segregation_residual() == 0.0
        gaps.append(_l2(u.comps - ref.comps, g))
    assert gaps[0] > gaps[1] > gaps[2]


def test_criticality_of_Y_harmonic_and_noise():
    g = GridSpec(2, 1 / 64)
    assert check_criticality(SegregatedField.from_function(g, make_Y()))["count_sub"] == 0
    rep = check_criticality(SegregatedField.from_function(g, make_Y()))
    assert rep["count_super"] == 0
    harm = SegregatedField.from_function(g, lambda p: (2.0 + p[..., 0] ** 2 - p[..., 1] ** 2)[None])
    rep = check_criticality(harm)
    assert rep["count_sub"] == 0 and rep["count_super"] == 0
    rng = np.random.default_rng(3)
    noise = SegregatedField(g, project_sigma(rng.uniform(0, 1, (3,) + g.shape), axis=0) * g.mask)
    rep = check_criticality(noise)
    assert rep["count_sub"] + rep["count_super"] > 0


def test_criticality_of_solver_output(solved_y64):
    u, _ = solved_y64
    rep = check_criticality(u)
    assert rep["count_sub"] == 0 and rep["count_super"] == 0


def test_estimator_interface():
    est = SegregatedDirichletMinimizer(h=1 / 16)
    assert clone(est).get_params()["h"] == 1 / 16
    est.fit(trace_of_Y())
    assert est.transform().shape == (3, 33, 33)
    assert est.energy_ == pytest.approx(dirichlet_energy(est.field_))
    assert est.report_.converged

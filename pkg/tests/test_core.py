import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from junctionlab import InvalidTargetError
from junctionlab.core import (GridSpec, HomogeneousTrace, SegregatedField, free_interface, hausdorff_distance,
                              make_Y, make_linearized_mode, node_coords, project_sigma, sigma_distance,
                              sigma_lerp, sphere_quadrature, trace_of_Y)


# --------------------------------------------------------------------------- Sigma_N

@pytest.mark.parametrize("X, Z, want", [((1, 0), (0, 2), 3.0), ((0, 0, 5), (0, 0, 5), 0.0),
                                        ((0, 0, 5), (0, 0, 1), 4.0)])
def test_sigma_distance_examples(X, Z, want):
    assert sigma_distance(X, Z) == want


def test_sigma_distance_rejects_non_tree_points():
    with pytest.raises(InvalidTargetError):
        sigma_distance((1, 1), (0, 0))
    with pytest.raises(InvalidTargetError):
        sigma_distance((-1, 0), (0, 0))


sigma_points = st.tuples(st.integers(0, 3), st.floats(0, 10, allow_nan=False)).map(
    lambda t: np.eye(4)[t[0]] * t[1])


@given(sigma_points, sigma_points, sigma_points)
def test_sigma_distance_is_a_metric(X, Y, Z):
    dxy = sigma_distance(X, Y)
    assert dxy >= 0
    assert dxy == sigma_distance(Y, X)
    assert sigma_distance(X, Z) <= dxy + sigma_distance(Y, Z) + 1e-12
    assert sigma_distance(X, X) == 0


@given(sigma_points, sigma_points)
def test_sigma_distance_branch_formula(X, Z):
    i, j = np.argmax(X), np.argmax(Z)
    if X[i] == 0 or Z[j] == 0 or i == j:
        want = abs(X.sum() - Z.sum())
    else:
        want = X[i] + Z[j]
    assert sigma_distance(X, Z) == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("v, want", [((3, 1, 2), (3, 0, 0)), ((-1, -2), (0, 0)), ((2, 2), (2, 0))])
def test_project_sigma_examples(v, want):
    np.testing.assert_array_equal(project_sigma(v), want)


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=6))
def test_project_sigma_idempotent_and_never_increases(v):
    v = np.array(v)
    p = project_sigma(v)
    np.testing.assert_array_equal(project_sigma(p), p)
    assert np.count_nonzero(p) <= 1
    assert np.all(p >= 0)
    assert np.all(p <= np.clip(v, 0, None))


def test_project_sigma_vectorized_axis():
    v = np.array([[1.0, 5.0], [2.0, -1.0], [0.5, 4.0]])
    np.testing.assert_array_equal(project_sigma(v, axis=0), [[0, 5], [2, 0], [0, 0]])


def test_sigma_lerp_crosses_the_vertex():
    a, b = np.array([1.0, 0.0]), np.array([0.0, 3.0])
    np.testing.assert_allclose(sigma_lerp(a, b, 0.25), [0.0, 0.0])
    np.testing.assert_allclose(sigma_lerp(a, b, 0.1), [0.6, 0.0])
    np.testing.assert_allclose(sigma_lerp(a, b, 0.5), [0.0, 1.0])


# --------------------------------------------------------------------------- Y and modes

def test_make_Y_requires_three_components():
    with pytest.raises(InvalidTargetError):
        make_Y(2)


@settings(max_examples=50)
@given(st.floats(0.05, 1.0), st.floats(-np.pi, np.pi), st.floats(0.1, 3.0), st.floats(-1, 1))
def test_Y_segregated_and_homogeneous(rho, theta, lam, rot):
    Y = make_Y(rotation=rot)
    x = rho * np.array([np.cos(theta), np.sin(theta)])
    v = Y(x)
    assert np.count_nonzero(v) <= 1 and np.all(v >= 0)
    np.testing.assert_allclose(Y(lam * x), lam ** 1.5 * v, rtol=1e-12, atol=1e-15)


def test_Y_cylindrical_in_3d():
    Y = make_Y(d=3)
    p = np.array([[0.3, 0.2, -0.4], [-0.7, 0.2, -0.4]])
    np.testing.assert_allclose(Y(p)[:, 0], Y(p)[:, 1])


@pytest.mark.parametrize("kind, point, want", [("Yhat", (1.0, 0.0), 1.0), ("U0_times_xj", (-1.0, 0.0), 0.0),
                                               ("Z", (0.5, np.sqrt(3) / 2), -1.0)])
def test_linearized_mode_values(kind, point, want):
    assert make_linearized_mode(kind)(np.array(point)) == pytest.approx(want, abs=1e-14)


def test_linearized_mode_axis_range():
    with pytest.raises(ValueError):
        make_linearized_mode("U0_times_xj", j=1, d=2)
    f = make_linearized_mode("V0_times_xj", j=1, d=3)
    assert f(np.array([2.0, 0.0, 1.0])) == pytest.approx(2.0 * np.sin(np.pi / 4))


@pytest.mark.parametrize("kind", ["Yhat", "Z", "U0_times_xj", "V0_times_xj"])
def test_linearized_modes_discrete_harmonic_second_order(kind):
    f = make_linearized_mode(kind)

    def worst(h):
        ax = np.arange(-1, 1 + h / 2, h)
        X, Yc = np.meshgrid(ax, ax, indexing="ij")
        P = np.stack([X, Yc], -1)
        v = f(P)
        lap = (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4 * v[1:-1, 1:-1]) / h ** 2
        q = P[1:-1, 1:-1]
        rho = np.hypot(q[..., 0], q[..., 1])
        # away from the slit {x_1 <= 0, x_2 = 0} and the origin
        ok = (rho > 0.3) & (rho < 0.9) & ((q[..., 0] > 0.1) | (np.abs(q[..., 1]) > 0.3))
        return np.abs(lap[ok]).max()

    e1, e2 = worst(1 / 64), worst(1 / 128)
    assert e2 < 1e-2
    assert np.log2(e1 / e2) > 1.8


# --------------------------------------------------------------------------- grids and fields

def test_grid_shape_and_mask_symmetry():
    g = GridSpec(2, 1 / 16)
    assert g.shape == (33, 33)
    np.testing.assert_array_equal(g.mask, g.mask[::-1])
    np.testing.assert_array_equal(g.mask, g.mask.T)
    assert not np.any(g.free & g.shell)
    with pytest.raises(ValueError):
        GridSpec(2, 0.3)


def test_segregated_field_validation():
    g = GridSpec(2, 1 / 8)
    with pytest.raises(InvalidTargetError):
        SegregatedField(g, -np.ones((2,) + g.shape))
    # overlap is allowed (penalty iterates) but reported
    assert SegregatedField(g, np.ones((2,) + g.shape)).segregation_residual() == 1.0
    assert SegregatedField.from_function(g, make_Y()).segregation_residual() == 0.0


def test_free_interface_of_Y_near_rays():
    g = GridSpec(2, 1 / 32)
    u = SegregatedField.from_function(g, make_Y())
    pts = node_coords(g, free_interface(u))
    theta = np.arctan2(pts[:, 1], pts[:, 0])
    rho = np.hypot(pts[:, 0], pts[:, 1])
    rays = np.array([np.pi / 3, -np.pi / 3, np.pi])
    dist = rho * np.abs(np.sin(theta[:, None] - rays[None])).min(axis=1)
    assert len(pts) > 0
    assert dist.max() <= g.h * 1.01


# --------------------------------------------------------------------------- traces and quadrature

@pytest.mark.parametrize("d", [2, 3])
def test_sphere_quadrature_area_and_moments(d):
    pts, w = sphere_quadrature(d)
    area = 2 * np.pi if d == 2 else 4 * np.pi
    assert w.sum() == pytest.approx(area, rel=1e-12)
    assert (w * pts[:, 0] ** 2).sum() == pytest.approx(area / d, rel=1e-10)


def test_trace_norm_of_Y_against_quadrature():
    c = trace_of_Y()
    want, _ = integrate.quad(lambda t: np.cos(1.5 * t) ** 2, -np.pi, np.pi, limit=200)
    assert c.norm_sq() == pytest.approx(want, rel=1e-9)


def test_trace_evaluate_reproduces_samples_and_stays_segregated():
    c = trace_of_Y()
    np.testing.assert_allclose(c.evaluate(c.points), c.comps, atol=1e-12)
    rng = np.random.default_rng(0)
    th = rng.uniform(-np.pi, np.pi, 500)
    v = c.evaluate(np.stack([np.cos(th), np.sin(th)], -1))
    assert np.all(np.sort(v, axis=0)[-2] == 0)


def test_trace_3d_evaluate_matches_Y():
    c = trace_of_Y(d=3, resolution=(65, 192))
    rng = np.random.default_rng(1)
    p = rng.normal(size=(200, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    np.testing.assert_allclose(c.evaluate(p), make_Y(d=3)(p), atol=2e-3)


def test_trace_rejects_negative_values():
    with pytest.raises(InvalidTargetError):
        HomogeneousTrace(2, -np.ones((3, 8)))


# --------------------------------------------------------------------------- Hausdorff distance

def test_hausdorff_trivial_cases():
    A = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert hausdorff_distance(A, A) == 0
    assert hausdorff_distance([[0.0, 0.0]], [[3.0, 4.0]]) == pytest.approx(5.0)
    assert hausdorff_distance(np.empty((0, 2)), np.empty((0, 2))) == 0
    assert hausdorff_distance(A, np.empty((0, 2))) == np.inf


def test_hausdorff_supports_of_rotated_Y_match_brute_force():
    g = GridSpec(2, 1 / 16)
    half = g.mask & (g.radius <= 0.5)
    a = SegregatedField.from_function(g, make_Y()).comps[0] > 0
    b = SegregatedField.from_function(g, make_Y(rotation=0.2)).comps[0] > 0
    A, B = node_coords(g, a & half), node_coords(g, b & half)
    D = np.sqrt(((A[:, None] - B[None]) ** 2).sum(-1))
    brute = max(D.min(axis=1).max(), D.min(axis=0).max())
    assert hausdorff_distance(A, B) == pytest.approx(brute, abs=1e-14)

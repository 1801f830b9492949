import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from snbumps.ansatz import (
    admissible_box,
    box_centers,
    evaluate_W,
    make_config,
    separations,
)
from snbumps.groundstate import evaluate_profile


def test_config_example_points():
    cfg = make_config(4, 10, 0.6)
    assert np.allclose(cfg.upper_points[0], (8, 0, 6), atol=1e-14)
    assert np.allclose(cfg.lower_points[0], (8, 0, -6), atol=1e-14)
    assert math.isclose(np.linalg.norm(cfg.upper_points[0] - cfg.lower_points[0]), 12.0)


def test_flat_config_coincides():
    cfg = make_config(5, 7.0, 0.0)
    assert np.array_equal(cfg.upper_points, cfg.lower_points)


@pytest.mark.parametrize("args", [(4, 10, 1.0), (1, 10, 0.2), (4, -1, 0.2), (3.5, 10, 0.2)])
def test_config_errors(args):
    with pytest.raises(ValueError):
        make_config(*args)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.floats(0.5, 1e6), st.floats(0.0, 0.99))
def test_points_on_sphere_and_symmetric(m, r, t):
    cfg = make_config(m, r, t)
    pts = cfg.points
    assert np.allclose(np.linalg.norm(pts, axis=1), r, rtol=1e-12)
    a = 2 * math.pi / m
    R = np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]])

    def same_set(p, q):
        d = np.linalg.norm(p[:, None, :] - q[None, :, :], axis=2)
        return np.all(d.min(axis=1) <= 1e-9 * r)

    assert same_set(pts @ R.T, pts)
    assert same_set(pts * np.array([1, 1, -1]), pts)


def test_separation_example():
    sep = separations(make_config(4, 10, 0.6))
    assert math.isclose(sep.ring_gap, 2 * 10 * 0.8 * math.sin(math.pi / 4), rel_tol=1e-14)
    assert math.isclose(sep.layer_gap, 12.0, rel_tol=1e-14)


@pytest.mark.parametrize("m,r,t", [(4, 10, 0.6), (7, 30, 0.2), (12, 5, 0.9)])
def test_separations_brute_force(m, r, t):
    cfg = make_config(m, r, t)
    sep = separations(cfg)
    p1 = cfg.upper_points[0]
    same = sorted(np.linalg.norm(cfg.upper_points[1:] - p1, axis=1))
    cross = sorted(np.linalg.norm(cfg.lower_points - p1, axis=1))
    assert np.allclose(sep.same_ring, same, rtol=1e-12, atol=1e-12)
    assert np.allclose(sep.cross_ring, cross, rtol=1e-12, atol=1e-12)
    pts = cfg.points
    brute = min(np.linalg.norm(a - b) for a, b in combinations(pts, 2))
    assert math.isclose(sep.minimum, brute, rel_tol=1e-12)


def test_gaps_grow_at_box_centers(constants):
    rings, layers = [], []
    for m in (10**2, 10**3, 10**4):
        r, t = box_centers(m, 0.5, constants.A1)
        sep = separations(make_config(m, r, t))
        rings.append(sep.ring_gap)
        layers.append(sep.layer_gap)
    assert rings[0] < rings[1] < rings[2]
    assert layers[0] < layers[1] < layers[2]


def test_box_degenerate_and_center(constants):
    m, q = 10**4, 0.5
    box = admissible_box(m, q, 1.0, constants.A1, 0.0, 0.0)
    r_c, t_c = box_centers(m, q, constants.A1)
    assert box.r_lo == box.r_hi and box.t_lo == box.t_hi
    assert math.isclose(box.r_lo, r_c, rel_tol=1e-14)
    closed = (constants.A1 / (8 * math.pi**2)) ** 2 * (m * math.log(m)) ** 2
    assert abs(r_c / closed - 1) < 1e-10
    assert t_c * math.sqrt(math.log(m)) == pytest.approx(1.0, abs=1e-15)


def test_box_widths(constants):
    m, q = 10**3, 0.75
    box = admissible_box(m, q, 1.0, constants.A1, 0.1, 0.2)
    lm = math.log(m)
    assert math.isclose(box.r_hi - box.r_lo, 0.4 * (m * lm) ** (1 / (1 - q)), rel_tol=1e-12)
    assert math.isclose(box.t_hi - box.t_lo, 0.2 * lm**-0.5, rel_tol=1e-12)


def test_b_corrected_center(constants):
    plain = box_centers(1000, 0.5, constants.A1, b=2.0)
    corr = box_centers(1000, 0.5, constants.A1, b=2.0, b_corrected=True)
    assert plain[0] == box_centers(1000, 0.5, constants.A1)[0]
    assert math.isclose(corr[0], plain[0] / 4.0, rel_tol=1e-14)


@pytest.mark.parametrize("q", [0.4, 1.0])
def test_box_rejects_q(q, constants):
    with pytest.raises(ValueError):
        admissible_box(100, q, 1.0, constants.A1)


def test_W_at_center_bounds(gs):
    cfg = make_config(6, 30.0, 0.4)
    p = cfg.upper_points[0]
    w = evaluate_W(cfg, gs, p)
    dmin = separations(cfg).minimum
    u0 = evaluate_profile(gs, 0.0)
    assert u0 <= w <= u0 + 2 * cfg.m * evaluate_profile(gs, dmin)


def test_W_symmetries(gs, rng):
    m = 5
    cfg = make_config(m, 9.0, 0.3)
    pts = rng.normal(scale=8.0, size=(40, 3))
    w = evaluate_W(cfg, gs, pts)
    assert np.all(w >= 0)
    assert np.allclose(evaluate_W(cfg, gs, pts * [1, -1, 1]), w, rtol=0, atol=1e-14)
    a = 2 * math.pi / m
    R = np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]])
    assert np.allclose(evaluate_W(cfg, gs, pts @ R.T), w, rtol=0, atol=1e-13)

import numpy as np
import pytest

from ltlplan.labeling import AxisRect, Circle, LabelingConfig, label, label_jacobian
from ltlplan.ltlf import PropSet


def config(*regions):
    return LabelingConfig(PropSet([f"p{i}" for i in range(len(regions))]), tuple(regions))


def brute_inside(point, region):
    if isinstance(region, Circle):
        return np.linalg.norm(np.asarray(point) - region.center) < region.radius
    return (region.lo[0] < point[0] < region.hi[0]) and (region.lo[1] < point[1] < region.hi[1])


def test_circle_margin_at_center():
    cfg = config(Circle((1.0, 2.0), 0.5))
    states = np.array([[1.0, 2.0]])
    assert label(states, cfg)[0, 0] == pytest.approx(0.5)


def test_circle_margin_on_boundary_is_zero():
    cfg = config(Circle((0.0, 0.0), 0.5))
    states = np.array([[0.5, 0.0]])
    sigma = label(states, cfg)
    assert sigma[0, 0] == pytest.approx(0.0)
    assert not (sigma > 0)[0, 0]  # boundary counts as not-inside


def test_circle_margin_outside():
    cfg = config(Circle((0.0, 0.0), 0.5))
    states = np.array([[2.0, 0.0]])
    assert label(states, cfg)[0, 0] == pytest.approx(-1.5)


def test_rect_margin_signs():
    rect = AxisRect((0.0, 0.0), (2.0, 1.0))
    cfg = config(rect)
    inside = label(np.array([[1.0, 0.5]]), cfg)[0, 0]
    outside = label(np.array([[3.0, 0.5]]), cfg)[0, 0]
    assert inside == pytest.approx(0.5)  # distance to nearest edge
    assert outside == pytest.approx(-1.0)


def test_label_shapes_and_extra_columns_ignored():
    cfg = config(Circle((0.0, 0.0), 1.0), Circle((5.0, 5.0), 1.0))
    states = np.zeros((7, 4))
    states[:, 2:] = 99.0  # velocity columns must not affect labels
    sigma = label(states, cfg)
    assert sigma.shape == (2, 7)
    assert np.allclose(sigma[0], 1.0)
    batch = label(np.stack([states, states]), cfg)
    assert batch.shape == (2, 2, 7)


def test_sign_matches_point_in_region_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(10_000 // 20):
        if rng.random() < 0.5:
            region = Circle(tuple(rng.uniform(-2, 2, 2)), float(rng.uniform(0.1, 2.0)))
        else:
            lo = rng.uniform(-2, 0, 2)
            hi = lo + rng.uniform(0.1, 2.0, 2)
            region = AxisRect(tuple(lo), tuple(hi))
        cfg = config(region)
        points = rng.uniform(-3, 3, size=(20, 2))
        sigma = label(points, cfg)[0]
        for point, value in zip(points, sigma):
            assert (value > 0) == brute_inside(point, region)


def test_circle_label_is_1_lipschitz():
    rng = np.random.default_rng(1)
    region = Circle((0.3, -0.2), 0.8)
    cfg = config(region)
    for _ in range(200):
        x, y = rng.uniform(-2, 2, size=(2, 2))
        fx = label(x[None], cfg)[0, 0]
        fy = label(y[None], cfg)[0, 0]
        assert abs(fx - fy) <= np.linalg.norm(x - y) + 1e-12


def test_jacobian_unit_directions():
    cfg = config(Circle((0.0, 0.0), 1.0))
    jac = label_jacobian(np.array([[1.0, 0.0]]), cfg)
    assert jac[0, 0] == pytest.approx([-1.0, 0.0])
    jac = label_jacobian(np.array([[0.0, 1.0]]), cfg)
    assert jac[0, 0] == pytest.approx([0.0, -1.0])


def test_jacobian_zero_at_circle_center():
    cfg = config(Circle((0.5, 0.5), 1.0))
    jac = label_jacobian(np.array([[0.5, 0.5]]), cfg)
    assert np.array_equal(jac[0, 0], [0.0, 0.0])


def test_jacobian_norm_at_most_one_for_circles():
    rng = np.random.default_rng(2)
    cfg = config(Circle((0.0, 0.0), 0.7))
    points = rng.uniform(-2, 2, size=(500, 2))
    jac = label_jacobian(points, cfg)[0]
    norms = np.linalg.norm(jac, axis=-1)
    assert (norms <= 1.0 + 1e-12).all()
    away = np.linalg.norm(points, axis=1) > 1e-6
    assert np.allclose(norms[away], 1.0)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(3)
    regions = [
        Circle((0.2, -0.4), 0.9),
        AxisRect((-1.0, -0.5), (0.5, 1.0)),
    ]
    cfg = config(*regions)
    h = 1e-6
    checked = 0
    while checked < 200:
        point = rng.uniform(-2, 2, 2)
        sigma = label(point[None], cfg)[:, 0]
        # keep away from SDF kinks (boundaries, box diagonals)
        if np.abs(sigma).min() < 1e-3:
            continue
        jac = label_jacobian(point[None], cfg)[:, 0]
        for p in range(2):
            for d in range(2):
                up, dn = point.copy(), point.copy()
                up[d] += h
                dn[d] -= h
                num = (label(up[None], cfg)[p, 0] - label(dn[None], cfg)[p, 0]) / (2 * h)
                assert jac[p, d] == pytest.approx(num, rel=1e-6, abs=1e-6)
        checked += 1


def test_invalid_regions_rejected():
    with pytest.raises(ValueError):
        Circle((0.0, 0.0), 0.0)
    with pytest.raises(ValueError):
        AxisRect((1.0, 0.0), (0.0, 1.0))
    with pytest.raises(ValueError):
        LabelingConfig(PropSet(["a", "b"]), (Circle((0, 0), 1.0),))


def test_nonfinite_states_rejected():
    cfg = config(Circle((0.0, 0.0), 1.0))
    with pytest.raises(ValueError):
        label(np.array([[np.nan, 0.0]]), cfg)

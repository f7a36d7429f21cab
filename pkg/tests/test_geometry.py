import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from accretion.export import grid_csv
from accretion.geometry import (
    ANCHOR,
    BOUNDARY,
    OMEGA0,
    Disk,
    DiskUnion,
    DomainSpec,
    GeometryError,
    Polygon,
    build_grid,
    dist_to_region,
    gradient,
    hessian,
)

from conftest import disk_domain


def test_reference_grid_accepted(grid65):
    assert grid65.shape == (65, 65)
    assert grid65.h == pytest.approx(1 / 64)
    assert grid65.omega0.sum() > 0 and grid65.anchor.sum() > 0


def test_long_horizon_rejected():
    with pytest.raises(GeometryError, match=r"hypothesis \(H15\) violated"):
        build_grid(disk_domain(T=0.6), 65)


def test_anchor_outside_body_rejected():
    spec = DomainSpec(1, 1, Disk((0.5, 0.5), 0.1), Disk((0.5, 0.5), 0.15), 0.25, 0.5, 1.0)
    with pytest.raises(GeometryError, match="anchor not inside initial body"):
        build_grid(spec, 65)


def test_body_touching_container_rejected():
    spec = DomainSpec(1, 1, Disk((0.05, 0.5), 0.1), Disk((0.05, 0.5), 0.02), 0.1, 0.5, 1.0)
    with pytest.raises(GeometryError, match="not strictly inside"):
        build_grid(spec, 65)


def test_too_coarse_rejected(domain):
    with pytest.raises(GeometryError):
        build_grid(domain, 9)


def test_h15_gate_is_sharp():
    # dist(Omega0, dU) = 0.4 ; accepted iff 0.4 > C T + 2h
    h = 1 / 64
    ok = disk_domain(T=0.4 - 2 * h - 1e-6)
    bad = disk_domain(T=0.4 - 2 * h + 1e-6)
    build_grid(ok, 65)
    with pytest.raises(GeometryError):
        build_grid(bad, 65)


def test_mask_consistency(grid65):
    m = grid65.masks
    assert not np.any((m & OMEGA0) & (m & BOUNDARY))
    assert np.all(((m & ANCHOR) == 0) | ((m & OMEGA0) != 0))


def test_weights_sum_to_area(grid65):
    assert grid65.weights.sum() == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_affine_exactness(grid33, vals):
    M = np.array(vals[:4]).reshape(2, 2)
    b = np.array(vals[4:])
    y = grid33.coords @ M.T + b
    F = gradient(y, grid33)
    G = hessian(y, grid33)
    assert np.abs(F - M).max() <= 1e-12 * (1 + np.abs(M).max()) / grid33.h
    assert np.abs(G).max() <= 1e-9 * (1 + np.abs(M).max() + np.abs(b).max()) / grid33.h**2


def test_identity_gradient_exact(grid65):
    F = gradient(grid65.coords, grid65)
    assert np.abs(F - np.eye(2)).max() < 1e-12


def test_sine_gradient_second_order(grid65):
    x = grid65.coords
    y = np.stack([np.sin(x[..., 0]), x[..., 1]], -1)
    F = gradient(y, grid65)
    exact = np.zeros(grid65.shape + (2, 2))
    exact[..., 0, 0] = np.cos(x[..., 0])
    exact[..., 1, 1] = 1.0
    assert np.abs(F - exact).max() <= 10 * grid65.h**2


def test_hessian_quadratic(grid65):
    x = grid65.coords
    y = np.stack([x[..., 0] ** 2, np.zeros(grid65.shape)], -1)
    G = hessian(y, grid65)
    assert np.allclose(G[1:-1, 1:-1, 0, 0, 0], 2.0, atol=1e-9)
    assert np.abs(G[..., 1, :, :]).max() == 0.0


def test_hessian_trig_second_order(grid65):
    x = grid65.coords
    y = np.stack([np.sin(x[..., 0]), np.cos(x[..., 1])], -1)
    G = hessian(y, grid65)
    err0 = np.abs(G[..., 0, 0, 0] + np.sin(x[..., 0])).max()
    err1 = np.abs(G[..., 1, 1, 1] + np.cos(x[..., 1])).max()
    # one-sided boundary rows are first-order accurate for the second derivative
    assert max(err0, err1) <= 10 * grid65.h


def test_dist_to_disk():
    d = Disk((0.5, 0.5), 0.1)
    assert dist_to_region((0.9, 0.5), d) == pytest.approx(0.3)
    assert dist_to_region((0.52, 0.5), d) == 0.0


def test_dist_to_union_is_min():
    u = DiskUnion((Disk((0.3, 0.5), 0.1), Disk((0.7, 0.5), 0.1)))
    assert dist_to_region((0.5, 0.5), u) == pytest.approx(0.1)


def test_polygon_distance_matches_dense_sampling():
    sq = Polygon(((0.4, 0.4), (0.6, 0.4), (0.6, 0.6), (0.4, 0.6)))
    x = np.array([0.9, 0.75])
    t = np.linspace(0, 1, 100_001)[:, None]
    v = np.array(sq.vertices)
    ring = np.concatenate([a + t * (b - a) for a, b in zip(v, np.roll(v, -1, 0))])
    brute = np.linalg.norm(ring - x, axis=1).min()
    assert dist_to_region(x, sq) == pytest.approx(brute, abs=1e-6)
    assert dist_to_region((0.5, 0.5), sq) == 0.0


def test_dist_to_mask(grid65):
    d = dist_to_region((0.9, 0.5), grid65.omega0, grid65)
    assert abs(d - 0.3) <= grid65.h


def test_dist_to_empty_mask_raises(grid65):
    with pytest.raises(GeometryError):
        dist_to_region((0.9, 0.5), np.zeros(grid65.shape, bool), grid65)


def test_grid_csv(tmp_path, grid33):
    p = tmp_path / "grid.csv"
    grid_csv(grid33, p)
    data = np.genfromtxt(p, delimiter=",", names=True)
    assert len(data) == grid33.size
    assert data["omega0"].sum() == grid33.omega0.sum()
    k = 5 * grid33.ny + 7
    assert (data["i"][k], data["j"][k]) == (5, 7)
    assert data["x"][k] == pytest.approx(5 * grid33.h)

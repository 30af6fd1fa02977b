import numpy as np
import pytest
from scipy.integrate import dblquad

from mbolab.manifolds import (
    SPHERE,
    TORUS,
    DensitySpec,
    ManifoldSpec,
    geodesic_distance,
    load_cloud_csv,
    sample_points,
    save_cloud_csv,
    torus_delta,
)


def test_manifold_validation():
    with pytest.raises(ValueError):
        ManifoldSpec("klein-bottle")
    with pytest.raises(ValueError):
        ManifoldSpec(TORUS, side=-1.0)
    assert ManifoldSpec(TORUS, 2.0).volume == 4.0
    assert ManifoldSpec(SPHERE).volume == pytest.approx(4 * np.pi)


def test_density_validation(torus):
    with pytest.raises(ValueError):
        DensitySpec("gaussian")
    with pytest.raises(ValueError):
        DensitySpec("cosine", amplitude=1.0)
    d = DensitySpec("cosine", axis=0, amplitude=0.3)
    with pytest.raises(ValueError):
        d.rho(ManifoldSpec(SPHERE), np.zeros((1, 3)))


def test_density_normalization(torus):
    for dens in (DensitySpec(), DensitySpec("cosine", 0, 0.3), DensitySpec("cosine", 1, -0.5)):
        total, _ = dblquad(lambda y, x: dens.rho(torus, np.array([[x, y]]))[0], 0, 1, 0, 1)
        assert total == pytest.approx(1.0, abs=1e-9)


def test_xi_is_rho_squared(torus):
    dens = DensitySpec("cosine", 0, 0.3)
    pts = np.random.default_rng(1).uniform(0, 1, (50, 2))
    assert np.allclose(dens.xi(torus, pts), dens.rho(torus, pts) ** 2)


def test_grad_log_xi_matches_finite_differences(torus):
    dens = DensitySpec("cosine", 0, 0.3)
    x = np.linspace(0.05, 0.95, 19)
    eps = 1e-6
    xi = lambda s: dens.xi(torus, np.column_stack([s, np.zeros_like(s)]))
    fd = (np.log(xi(x + eps)) - np.log(xi(x - eps))) / (2 * eps)
    assert np.allclose(dens.grad_log_xi_1d(torus, x), fd, atol=1e-6)
    g = dens.grad_log_xi(torus, np.array([0.2, 0.9]))
    assert g[1] == 0.0
    assert g[0] == pytest.approx(dens.grad_log_xi_1d(torus, np.array([0.2]))[0])


def test_sampling_deterministic(torus, uniform):
    a = sample_points(torus, uniform, 100, 3)
    b = sample_points(torus, uniform, 100, 3)
    c = sample_points(torus, uniform, 100, 4)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)
    assert a.points.shape == (100, 2)
    assert a.points.min() >= 0 and a.points.max() < 1


def test_cosine_sampling_marginal(torus):
    dens = DensitySpec("cosine", 0, 0.5)
    cloud = sample_points(torus, dens, 40000, 0)
    # empirical mass of the first quarter vs the exact integral of the marginal
    left = np.mean(cloud.points[:, 0] < 0.25)
    exact = 0.25 + 0.25 / np.pi  # int_0^{1/4} (1 + 0.5 cos(2 pi x)) dx
    assert left == pytest.approx(exact, abs=0.01)


def test_sphere_sampling_uniform():
    m = ManifoldSpec(SPHERE)
    cloud = sample_points(m, DensitySpec(), 20000, 0)
    norms = np.linalg.norm(cloud.points, axis=1)
    assert np.allclose(norms, 1.0)
    # each coordinate of a uniform point on S^2 has mean 0 and variance 1/3
    assert np.allclose(cloud.points.mean(axis=0), 0.0, atol=0.02)
    assert np.allclose(cloud.points.var(axis=0), 1 / 3, atol=0.02)
    with pytest.raises(ValueError):
        sample_points(m, DensitySpec("cosine", 0, 0.3), 10, 0)


def test_torus_delta_and_distance(torus):
    d = torus_delta(torus, np.array([0.05, 0.5]), np.array([0.95, 0.5]))
    assert np.allclose(d, [0.1, 0.0])
    assert geodesic_distance(torus, np.array([0.05, 0.5]), np.array([0.95, 0.5])) == pytest.approx(0.1)
    # broadcasting over an array of points
    x = np.array([[0.0, 0.0], [0.5, 0.5]])
    dist = geodesic_distance(torus, x, np.array([0.9, 0.9]))
    assert dist.shape == (2,)
    assert dist[0] == pytest.approx(np.hypot(0.1, 0.1))


def test_sphere_distance():
    m = ManifoldSpec(SPHERE)
    north = np.array([0.0, 0.0, 1.0])
    south = np.array([0.0, 0.0, -1.0])
    assert geodesic_distance(m, north, south) == pytest.approx(np.pi)
    assert geodesic_distance(m, north, np.array([1.0, 0.0, 0.0])) == pytest.approx(np.pi / 2)


def test_cloud_csv_roundtrip(tmp_path, torus):
    dens = DensitySpec("cosine", 1, 0.2)
    cloud = sample_points(torus, dens, 50, 9)
    path = tmp_path / "cloud.csv"
    save_cloud_csv(cloud, path)
    back = load_cloud_csv(path)
    assert np.array_equal(back.points, cloud.points)
    assert back.density == dens
    assert back.manifold == torus
    assert back.seed == 9

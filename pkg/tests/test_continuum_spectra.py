import numpy as np
import pytest

from mbolab.continuum_spectra import (
    TruncationError,
    continuum_eigensystem,
    continuum_heat_apply,
    quadrature_grid,
    torus_heat_kernel,
)
from mbolab.manifolds import SPHERE, DensitySpec, ManifoldSpec


@pytest.fixture(scope="module")
def sphere():
    return ManifoldSpec(SPHERE)


def test_torus_eigenvalues(torus, uniform):
    es = continuum_eigensystem(torus, uniform, 10)
    w2 = (2 * np.pi) ** 2
    # 0, then 1 with multiplicity 4, then 2 with multiplicity 4, then 4
    expect = w2 * np.array([0, 1, 1, 1, 1, 2, 2, 2, 2, 4])
    assert np.allclose(es.eigenvalues, expect)


def test_sphere_eigenvalues(sphere, uniform):
    es = continuum_eigensystem(sphere, uniform, 10)
    expect = np.array([0, 2, 2, 2, 6, 6, 6, 6, 6, 12], dtype=float)
    assert np.allclose(es.eigenvalues, expect)


def test_eigensystem_validation(torus, sphere, uniform):
    with pytest.raises(ValueError):
        continuum_eigensystem(torus, DensitySpec("cosine", 0, 0.3), 5)
    with pytest.raises(ValueError):
        continuum_eigensystem(sphere, uniform, 0)


@pytest.mark.parametrize("kind", ["torus", "sphere"])
def test_eigenfunctions_orthonormal_in_weighted_L2(kind, torus, sphere, uniform):
    m = torus if kind == "torus" else sphere
    es = continuum_eigensystem(m, uniform, 16)
    pts, wts = quadrature_grid(m, 48)
    basis = es.evaluate(pts)
    xi = uniform.xi(m, pts)
    G = basis.T @ (basis * (xi * wts)[:, None])
    assert np.max(np.abs(G - np.eye(16))) < 1e-8


def test_quadrature_weights_sum_to_volume(torus, sphere):
    for m in (torus, sphere):
        _, wts = quadrature_grid(m, 32)
        assert wts.sum() == pytest.approx(m.volume, rel=1e-12)


def test_heat_apply_decays_single_mode(torus, uniform):
    es = continuum_eigensystem(torus, uniform, 450)
    f = lambda p: np.cos(2 * np.pi * p[:, 0])
    q = np.array([[0.1, 0.7], [0.3, 0.2]])
    t = 0.02
    got = continuum_heat_apply(es, t, f, q)
    expect = np.exp(-t * (2 * np.pi) ** 2) * f(q)
    assert np.max(np.abs(got - expect)) < 1e-10


def test_heat_apply_truncation_guard(torus, uniform):
    es = continuum_eigensystem(torus, uniform, 5)
    with pytest.raises(TruncationError):
        continuum_heat_apply(es, 1e-4, lambda p: np.ones(p.shape[0]), np.array([[0.5, 0.5]]))
    with pytest.raises(ValueError):
        continuum_heat_apply(es, -1.0, lambda p: np.ones(p.shape[0]), np.array([[0.5, 0.5]]))


def test_torus_heat_kernel_mass_and_positivity(torus, uniform):
    t = 0.01
    x = np.array([0.3, 0.6])
    pts, wts = quadrature_grid(torus, 128)
    ker = torus_heat_kernel(torus, t, x, pts)
    assert np.all(ker >= 0)
    xi = uniform.xi(torus, pts)
    assert np.sum(ker * xi * wts) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValueError):
        torus_heat_kernel(torus, 0.0, x, pts)


def test_torus_heat_kernel_matches_spectral_expansion(torus, uniform):
    es = continuum_eigensystem(torus, uniform, 200)
    t = 0.02
    x = np.array([0.25, 0.5])
    y = np.array([[0.3, 0.55], [0.8, 0.1]])
    bx = es.evaluate(x[None, :])[0]
    by = es.evaluate(y)
    spectral = by @ (np.exp(-t * es.eigenvalues) * bx)
    images = torus_heat_kernel(torus, t, x, y)
    assert np.max(np.abs(spectral - images)) < 1e-8

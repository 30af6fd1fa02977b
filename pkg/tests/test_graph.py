import numpy as np
import pytest
from scipy.integrate import quad

from mbolab.graph import (
    IsolatedNodeError,
    KernelProfile,
    WeightedGraph,
    build_graph,
    inner_product,
    kernel_constants,
    laplacian_apply,
    norm_V,
    save_graph_csv,
)
from mbolab.manifolds import DensitySpec, ManifoldSpec, SPHERE, TORUS, PointCloud, sample_points


def numeric_constants(kernel, k):
    """Quadrature oracle for C1 = int eta(|y|) dy and C2 = int eta(|y|) y_1^2 dy."""
    sigma = {1: 2.0, 2: 2 * np.pi, 3: 4 * np.pi}[k]
    C1 = sigma * quad(lambda r: kernel.eta(np.array([r]))[0] * r ** (k - 1), 0, 1)[0]
    C2 = sigma / k * quad(lambda r: kernel.eta(np.array([r]))[0] * r ** (k + 1), 0, 1)[0]
    return C1, C2


@pytest.mark.parametrize("form", ["indicator", "triangular", "quadratic"])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_kernel_constants_against_quadrature(form, k):
    kernel = KernelProfile(form)
    consts = kernel_constants(kernel, k)
    C1, C2 = numeric_constants(kernel, k)
    assert consts.C1 == pytest.approx(C1, rel=1e-9)
    assert consts.C2 == pytest.approx(C2, rel=1e-9)


def test_indicator_kappa_is_one_eighth():
    consts = kernel_constants(KernelProfile("indicator"), 2)
    assert consts.C1 == pytest.approx(np.pi)
    assert consts.C2 == pytest.approx(np.pi / 4)
    assert consts.kappa == pytest.approx(0.125)


def test_kernel_profile_validation():
    with pytest.raises(ValueError):
        KernelProfile("gaussian")
    eta = KernelProfile("triangular").eta(np.array([0.0, 0.5, 1.0, 2.0]))
    assert np.allclose(eta, [1.0, 0.5, 0.0, 0.0])


def test_build_graph_basic(small_graph):
    g = small_graph
    W = g.weights
    assert (W != W.T).nnz == 0
    assert np.all(W.diagonal() == 0)
    assert g.connected
    assert np.allclose(g.degrees, np.asarray(W.sum(axis=1)).ravel() / g.n)


def test_build_graph_epsilon_validation(small_cloud, torus):
    with pytest.raises(ValueError):
        build_graph(small_cloud, -0.1, KernelProfile())
    with pytest.raises(ValueError):
        build_graph(small_cloud, 0.5, KernelProfile())  # >= L/2 on the torus


def test_torus_wraparound_edges(torus, uniform):
    pts = np.array([[0.02, 0.5], [0.98, 0.5], [0.5, 0.5]])
    cloud = PointCloud(torus, uniform, pts, seed=0)
    g = build_graph(cloud, 0.1, KernelProfile("indicator"))
    assert g.weights[0, 1] > 0  # distance 0.04 across the seam
    assert g.weights[0, 2] == 0


def test_degrees_concentrate_at_C1_rho(torus):
    dens = DensitySpec("cosine", 0, 0.3)
    cloud = sample_points(torus, dens, 20000, 1)
    g = build_graph(cloud, 0.08, KernelProfile("indicator"))
    consts = kernel_constants(g.kernel, 2)
    rho = dens.rho(torus, cloud.points)
    rel = np.abs(g.degrees - consts.C1 * rho) / (consts.C1 * rho)
    assert np.median(rel) < 0.05


def test_sphere_graph_chordal(uniform):
    m = ManifoldSpec(SPHERE)
    cloud = sample_points(m, uniform, 800, 2)
    g = build_graph(cloud, 0.3, KernelProfile("indicator"))
    assert g.connected
    i, j = g.weights.nonzero()
    chord = np.linalg.norm(cloud.points[i] - cloud.points[j], axis=1)
    assert chord.max() <= 0.3 * (1 + 1e-9)


def test_isolated_node_raises(torus, uniform):
    pts = np.array([[0.1, 0.1], [0.12, 0.1], [0.6, 0.6]])
    cloud = PointCloud(torus, uniform, pts, seed=0)
    g = build_graph(cloud, 0.05, KernelProfile("indicator"))
    assert not g.connected
    with pytest.raises(IsolatedNodeError):
        g.laplacian_matrix()
    with pytest.raises(IsolatedNodeError):
        laplacian_apply(g, np.ones(3))


def test_laplacian_annihilates_constants(small_graph):
    ones = np.ones(small_graph.n)
    assert np.max(np.abs(laplacian_apply(small_graph, ones))) < 1e-12
    L = small_graph.laplacian_matrix()
    assert np.max(np.abs(L @ ones)) < 1e-12
    u = np.random.default_rng(3).uniform(-1, 1, small_graph.n)
    assert np.allclose(L @ u, laplacian_apply(small_graph, u))


def test_laplacian_self_adjoint_in_V(small_graph, rng):
    u = rng.uniform(-1, 1, small_graph.n)
    v = rng.uniform(-1, 1, small_graph.n)
    lhs = inner_product(small_graph, laplacian_apply(small_graph, u), v)
    rhs = inner_product(small_graph, u, laplacian_apply(small_graph, v))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_inner_product_and_norm(small_graph):
    ones = np.ones(small_graph.n)
    mass = inner_product(small_graph, ones, ones)
    assert mass == pytest.approx(np.mean(small_graph.degrees))
    assert norm_V(small_graph, ones) == pytest.approx(np.sqrt(mass))


def test_save_graph_csv(tmp_path, small_graph):
    wpath = tmp_path / "w.csv"
    dpath = tmp_path / "d.csv"
    save_graph_csv(small_graph, wpath, dpath)
    rows = wpath.read_text().strip().split("\n")
    assert rows[0] == "i,j,w"
    assert len(rows) - 1 == small_graph.weights.nnz // 2
    drows = dpath.read_text().strip().split("\n")
    assert len(drows) - 1 == small_graph.n
    meta = (tmp_path / "w.csv.meta.json").read_text()
    assert '"epsilon"' in meta

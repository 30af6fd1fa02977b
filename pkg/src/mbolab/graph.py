"""Weighted epsilon-graphs on sampled point clouds and the random-walk Laplacian.

Weights are w_ij = eps^{-k} * eta(dist(x_i, x_j) / eps) with a compactly
supported non-increasing kernel profile eta. Torus distances use the quotient
metric (periodic KD-tree); sphere distances use the ambient chordal metric.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .manifolds import TORUS, PointCloud

KERNEL_FORMS = ("indicator", "triangular", "quadratic")

# surface area of the unit sphere S^{k-1}
_SIGMA = {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}


@dataclass(frozen=True)
class KernelProfile:
    form: str = "indicator"

    def __post_init__(self):
        if self.form not in KERNEL_FORMS:
            raise ValueError(f"unknown kernel form {self.form!r}")

    def eta(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.form == "indicator":
            return np.where(r <= 1.0, 1.0, 0.0)
        if self.form == "triangular":
            return np.maximum(1.0 - r, 0.0)
        return np.maximum(1.0 - r**2, 0.0)


@dataclass(frozen=True)
class KernelConstants:
    C1: float
    C2: float

    @property
    def kappa(self) -> float:
        return self.C2 / (2.0 * self.C1)


def kernel_constants(kernel: KernelProfile, k: int) -> KernelConstants:
    """Closed-form moments C1 = int eta(|y|) dy and C2 = int eta(|y|) y_1^2 dy
    over R^k, for k in {1,2,3}."""
    if k not in _SIGMA:
        raise ValueError("k must be 1, 2 or 3")
    # radial moments int_0^1 eta(r) r^p dr for p = k-1 and p = k+1
    if kernel.form == "indicator":
        m_lo, m_hi = 1.0 / k, 1.0 / (k + 2)
    elif kernel.form == "triangular":
        m_lo, m_hi = 1.0 / (k * (k + 1)), 1.0 / ((k + 2) * (k + 3))
    else:  # quadratic
        m_lo, m_hi = 2.0 / (k * (k + 2)), 2.0 / ((k + 2) * (k + 4))
    sigma = _SIGMA[k]
    return KernelConstants(C1=sigma * m_lo, C2=sigma * m_hi / k)


@dataclass(frozen=True)
class WeightedGraph:
    cloud: PointCloud
    epsilon: float
    kernel: KernelProfile
    weights: sp.csr_matrix  # symmetric, zero diagonal
    degrees: np.ndarray  # d(x_i) = (1/n) sum_j w_ij
    connected: bool

    @property
    def n(self) -> int:
        return self.cloud.n

    def laplacian_matrix(self) -> sp.csr_matrix:
        """Sparse matrix of Delta = eps^{-2} (I - D^{-1} W / n)."""
        self._check_degrees()
        n = self.n
        dinv = 1.0 / (n * self.degrees)
        P = sp.diags(dinv) @ self.weights
        return ((sp.identity(n, format="csr") - P) / self.epsilon**2).tocsr()

    def _check_degrees(self):
        bad = np.flatnonzero(self.degrees <= 0)
        if bad.size:
            raise IsolatedNodeError(bad[0])


class IsolatedNodeError(ValueError):
    def __init__(self, index: int):
        super().__init__(f"node {index} has zero degree; D^{{-1}} is undefined")
        self.index = int(index)


def build_graph(cloud: PointCloud, epsilon: float, kernel: KernelProfile) -> WeightedGraph:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    m = cloud.manifold
    if m.kind == TORUS:
        if epsilon >= m.side / 2:
            raise ValueError("epsilon must be below L/2 on the torus")
        tree = cKDTree(cloud.points, boxsize=m.side)
    else:
        tree = cKDTree(cloud.points)
    pairs = tree.query_pairs(r=epsilon * (1 + 1e-12), output_type="ndarray")
    n = cloud.n
    k = m.intrinsic_dim
    if pairs.size:
        i, j = pairs[:, 0], pairs[:, 1]
        if m.kind == TORUS:
            d = cloud.points[i] - cloud.points[j]
            d -= m.side * np.round(d / m.side)
            dist = np.linalg.norm(d, axis=1)
        else:
            dist = np.linalg.norm(cloud.points[i] - cloud.points[j], axis=1)
        w = kernel.eta(dist / epsilon) / epsilon**k
        keep = w > 0
        i, j, w = i[keep], j[keep], w[keep]
    else:
        i = j = np.zeros(0, dtype=int)
        w = np.zeros(0)
    W = sp.coo_matrix((np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n)).tocsr()
    degrees = np.asarray(W.sum(axis=1)).ravel() / n
    ncomp, _ = connected_components(W, directed=False)
    return WeightedGraph(cloud, epsilon, kernel, W, degrees, connected=bool(ncomp == 1))


def inner_product(graph: WeightedGraph, u: np.ndarray, v: np.ndarray) -> float:
    """Degree-weighted inner product <u,v>_V = (1/n) sum_i d_i u_i v_i."""
    return float(np.sum(graph.degrees * np.asarray(u) * np.asarray(v)) / graph.n)


def norm_V(graph: WeightedGraph, u: np.ndarray) -> float:
    return float(np.sqrt(max(inner_product(graph, u, u), 0.0)))


def laplacian_apply(graph: WeightedGraph, u: np.ndarray) -> np.ndarray:
    """(Delta u)(x_i) = eps^{-2} (u_i - (1/(n d_i)) sum_j w_ij u_j)."""
    graph._check_degrees()
    u = np.asarray(u, dtype=float)
    avg = (graph.weights @ u) / (graph.n * graph.degrees)
    return (u - avg) / graph.epsilon**2


# ---------------------------------------------------------------------------
# export

def save_graph_csv(graph: WeightedGraph, weights_path, degrees_path) -> None:
    W = sp.triu(graph.weights, k=1).tocoo()
    with open(weights_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "w"])
        for i, j, v in zip(W.row, W.col, W.data):
            w.writerow([i, j, repr(v)])
    with open(degrees_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "d"])
        for i, d in enumerate(graph.degrees):
            w.writerow([i, repr(d)])
    meta = {
        "epsilon": graph.epsilon,
        "kernel": graph.kernel.form,
        "n": graph.n,
        "seed": graph.cloud.seed,
        "connected": graph.connected,
    }
    Path(str(weights_path) + ".meta.json").write_text(json.dumps(meta, indent=2))

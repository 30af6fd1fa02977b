"""Closed 2-manifolds (flat torus, unit sphere), densities and point sampling.

The torus is represented by fundamental-domain coordinates in [0, L)^2 with
the quotient metric; the sphere by unit vectors in R^3.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TORUS = "flat-torus-2d"
SPHERE = "sphere-2"

# rejection sampling gives up after this many rounds without filling the quota
_MAX_REJECTION_ROUNDS = 1000


class RejectionFailure(RuntimeError):
    """Rejection sampling failed to produce enough points (malformed density)."""


@dataclass(frozen=True)
class ManifoldSpec:
    kind: str
    side: float = 1.0  # torus side length L; ignored for the sphere

    def __post_init__(self):
        if self.kind not in (TORUS, SPHERE):
            raise ValueError(f"unknown manifold kind {self.kind!r}")
        if self.kind == TORUS and self.side <= 0:
            raise ValueError("torus side length must be positive")

    @property
    def intrinsic_dim(self) -> int:
        return 2

    @property
    def embedding_dim(self) -> int:
        return 2 if self.kind == TORUS else 3

    @property
    def volume(self) -> float:
        return self.side**2 if self.kind == TORUS else 4.0 * np.pi


@dataclass(frozen=True)
class DensitySpec:
    """Probability density rho w.r.t. the Riemannian volume measure.

    form 'uniform' or 'cosine' (1 + amplitude*cos(2*pi*x_axis/L) on the torus,
    normalized to integrate to one).
    """

    form: str = "uniform"
    axis: int = 0
    amplitude: float = 0.0

    def __post_init__(self):
        if self.form not in ("uniform", "cosine"):
            raise ValueError(f"unknown density form {self.form!r}")
        if self.form == "cosine" and not abs(self.amplitude) < 1:
            raise ValueError("cosine amplitude must satisfy |a| < 1")

    def rho(self, manifold: ManifoldSpec, points: np.ndarray) -> np.ndarray:
        """Evaluate rho at an (m, d) array of points."""
        points = np.atleast_2d(points)
        base = 1.0 / manifold.volume
        if self.form == "uniform":
            return np.full(points.shape[0], base)
        if manifold.kind != TORUS:
            raise ValueError("cosine-perturbed density is only defined on the torus")
        L = manifold.side
        # the cosine integrates to zero over a full period, so the
        # normalization constant is the uniform one
        return base * (1.0 + self.amplitude * np.cos(2 * np.pi * points[:, self.axis] / L))

    def xi(self, manifold: ManifoldSpec, points: np.ndarray) -> np.ndarray:
        """The weight xi = rho^2 driving the weighted flows."""
        return self.rho(manifold, points) ** 2

    def grad_log_xi_1d(self, manifold: ManifoldSpec, x: np.ndarray) -> np.ndarray:
        """d/dx log(xi) along the perturbation axis, as a function of that
        coordinate alone (zero for uniform)."""
        x = np.asarray(x, dtype=float)
        if self.form == "uniform":
            return np.zeros_like(x)
        L = manifold.side
        w = 2 * np.pi / L
        c = np.cos(w * x)
        s = np.sin(w * x)
        return -2.0 * self.amplitude * w * s / (1.0 + self.amplitude * c)

    def grad_log_xi(self, manifold: ManifoldSpec, x: np.ndarray) -> np.ndarray:
        """Gradient of log(xi) at a single torus point, as a vector."""
        g = np.zeros(manifold.embedding_dim)
        if self.form == "cosine":
            g[self.axis] = float(self.grad_log_xi_1d(manifold, np.asarray(x)[..., self.axis]))
        return g


@dataclass(frozen=True)
class PointCloud:
    manifold: ManifoldSpec
    density: DensitySpec
    points: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return self.points.shape[0]


def sample_points(manifold: ManifoldSpec, density: DensitySpec, n: int, seed: int) -> PointCloud:
    """Draw n i.i.d. points from `density` on `manifold`, deterministically in seed."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    if manifold.kind == SPHERE:
        if density.form != "uniform":
            raise ValueError("only the uniform density is supported on the sphere")
        g = rng.standard_normal((n, 3))
        pts = g / np.linalg.norm(g, axis=1, keepdims=True)
        return PointCloud(manifold, density, pts, seed)

    L = manifold.side
    if density.form == "uniform":
        pts = rng.uniform(0.0, L, size=(n, 2))
        return PointCloud(manifold, density, pts, seed)

    # cosine-perturbed: rejection against the uniform base measure
    bound = (1.0 + abs(density.amplitude)) / manifold.volume
    out = np.empty((n, 2))
    have = 0
    for _ in range(_MAX_REJECTION_ROUNDS):
        m = max(2 * (n - have), 1024)
        cand = rng.uniform(0.0, L, size=(m, 2))
        accept = rng.uniform(0.0, bound, size=m) < density.rho(manifold, cand)
        take = cand[accept][: n - have]
        out[have : have + take.shape[0]] = take
        have += take.shape[0]
        if have == n:
            return PointCloud(manifold, density, out, seed)
    raise RejectionFailure(f"could not sample {n} points after {_MAX_REJECTION_ROUNDS} rounds")


def torus_delta(manifold: ManifoldSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Shortest per-coordinate displacement y -> x on the torus, in (-L/2, L/2]."""
    L = manifold.side
    d = np.asarray(x) - np.asarray(y)
    return d - L * np.round(d / L)


def geodesic_distance(manifold: ManifoldSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Geodesic distance; broadcasts over leading axes."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if manifold.kind == TORUS:
        return np.linalg.norm(torus_delta(manifold, x, y), axis=-1)
    dot = np.clip(np.sum(x * y, axis=-1), -1.0, 1.0)
    return np.arccos(dot)


# ---------------------------------------------------------------------------
# CSV serialization

def save_cloud_csv(cloud: PointCloud, path: str | Path) -> None:
    path = Path(path)
    d = cloud.manifold.embedding_dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(d)])
        for row in cloud.points:
            w.writerow([f"{v:.17g}" for v in row])
    meta = {
        "kind": cloud.manifold.kind,
        "side": cloud.manifold.side,
        "density_form": cloud.density.form,
        "density_axis": cloud.density.axis,
        "density_amplitude": cloud.density.amplitude,
        "seed": cloud.seed,
        "n": cloud.n,
    }
    path.with_suffix(path.suffix + ".meta.json").write_text(json.dumps(meta, indent=2))


def load_cloud_csv(path: str | Path) -> PointCloud:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".meta.json").read_text())
    pts = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    manifold = ManifoldSpec(meta["kind"], meta["side"])
    density = DensitySpec(meta["density_form"], meta["density_axis"], meta["density_amplitude"])
    return PointCloud(manifold, density, pts, meta["seed"])

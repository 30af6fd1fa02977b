"""Continuum spectral data: Laplacian eigenpairs and the heat semigroup on the
flat torus and the unit sphere with uniform density.

Eigenfunctions are normalized in L^2(xi * Vol) with xi = rho^2, so the heat
kernel expansion H(t,x,y) = sum_l exp(-t*lambda_l) f_l(x) f_l(y) satisfies
integral of H(t,x,.) * xi dVol = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifolds import SPHERE, TORUS, DensitySpec, ManifoldSpec, torus_delta

try:  # scipy >= 1.15
    from scipy.special import sph_harm_y as _sph_harm_y

    def _sph(m, l, phi, theta):
        return _sph_harm_y(l, m, theta, phi)

except ImportError:  # pragma: no cover
    from scipy.special import sph_harm as _sph_harm

    def _sph(m, l, phi, theta):
        return _sph_harm(m, l, phi, theta)


@dataclass(frozen=True)
class ContinuumEigensystem:
    manifold: ManifoldSpec
    density: DensitySpec
    eigenvalues: np.ndarray  # ascending, first entry 0
    modes: tuple  # per-eigenpair mode descriptors, see _eval_* below
    norm: float  # common normalization factor for the raw basis functions

    @property
    def count(self) -> int:
        return self.eigenvalues.size

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Matrix of eigenfunction values, shape (npoints, count)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.manifold.kind == TORUS:
            return _eval_torus(self, points)
        return _eval_sphere(self, points)


def continuum_eigensystem(manifold: ManifoldSpec, density: DensitySpec, L: int) -> ContinuumEigensystem:
    """First L eigenpairs of the weighted Laplacian, sorted ascending with
    multiplicities. Closed forms exist only for the uniform density."""
    if density.form != "uniform":
        raise ValueError("closed-form eigensystem requires the uniform density")
    if L < 1:
        raise ValueError("need at least one eigenpair")
    if manifold.kind == TORUS:
        return _torus_eigensystem(manifold, density, L)
    return _sphere_eigensystem(manifold, density, L)


def _torus_eigensystem(manifold, density, L):
    side = manifold.side
    base = (2 * np.pi / side) ** 2
    # grow the lattice enumeration radius until the first L eigenvalues are
    # certainly all inside the enumerated box
    mmax = max(2, int(np.ceil(np.sqrt(L))))
    while True:
        modes = [(0.0, (0, 0, "const"))]
        for m1 in range(0, mmax + 1):
            for m2 in range(-mmax, mmax + 1):
                if m1 == 0 and m2 <= 0:
                    continue  # half lattice: avoid duplicating (m1,m2) ~ (-m1,-m2)
                lam = base * (m1 * m1 + m2 * m2)
                modes.append((lam, (m1, m2, "cos")))
                modes.append((lam, (m1, m2, "sin")))
        modes.sort(key=lambda p: p[0])
        if len(modes) >= L and modes[L - 1][0] < base * mmax**2:
            modes = modes[:L]
            break
        mmax *= 2
    lams = np.array([p[0] for p in modes])
    xi = (1.0 / manifold.volume) ** 2
    # raw basis: 1 and cos/sin with integral of square = V or V/2
    norm = 1.0 / np.sqrt(xi * manifold.volume)
    return ContinuumEigensystem(manifold, density, lams, tuple(p[1] for p in modes), norm)


def _eval_torus(es: ContinuumEigensystem, points: np.ndarray) -> np.ndarray:
    w = 2 * np.pi / es.manifold.side
    out = np.empty((points.shape[0], es.count))
    for j, (m1, m2, kind) in enumerate(es.modes):
        if kind == "const":
            out[:, j] = es.norm
        else:
            phase = w * (m1 * points[:, 0] + m2 * points[:, 1])
            vals = np.cos(phase) if kind == "cos" else np.sin(phase)
            out[:, j] = es.norm * np.sqrt(2.0) * vals
    return out


def _sphere_eigensystem(manifold, density, L):
    modes = []
    l = 0
    while len(modes) < L:
        lam = float(l * (l + 1))
        for m in range(-l, l + 1):
            modes.append((lam, (l, m)))
        l += 1
    modes = modes[:L]
    lams = np.array([p[0] for p in modes])
    xi = (1.0 / (4 * np.pi)) ** 2
    # real spherical harmonics are orthonormal in L^2(dS)
    norm = 1.0 / np.sqrt(xi)
    return ContinuumEigensystem(manifold, density, lams, tuple(p[1] for p in modes), norm)


def _eval_sphere(es: ContinuumEigensystem, points: np.ndarray) -> np.ndarray:
    theta = np.arccos(np.clip(points[:, 2], -1.0, 1.0))
    phi = np.arctan2(points[:, 1], points[:, 0])
    out = np.empty((points.shape[0], es.count))
    for j, (l, m) in enumerate(es.modes):
        y = _sph(abs(m), l, phi, theta)
        if m == 0:
            vals = y.real
        elif m > 0:
            vals = np.sqrt(2.0) * (-1.0) ** m * y.real
        else:
            vals = np.sqrt(2.0) * (-1.0) ** m * y.imag
        out[:, j] = es.norm * vals
    return out


# ---------------------------------------------------------------------------
# quadrature grids for spectral projection

def quadrature_grid(manifold: ManifoldSpec, n: int = 128):
    """Quadrature nodes and volume weights exact enough for smooth data."""
    if manifold.kind == TORUS:
        side = manifold.side
        ax = (np.arange(n) + 0.5) * side / n
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        wts = np.full(pts.shape[0], (side / n) ** 2)
        return pts, wts
    # sphere: Gauss-Legendre in cos(theta) x trapezoid in phi
    mu, wmu = np.polynomial.legendre.leggauss(n)
    phi = (np.arange(2 * n) + 0.5) * np.pi / n
    MU, PHI = np.meshgrid(mu, phi, indexing="ij")
    st = np.sqrt(1 - MU**2)
    pts = np.column_stack([(st * np.cos(PHI)).ravel(), (st * np.sin(PHI)).ravel(), MU.ravel()])
    wts = np.repeat(wmu, 2 * n) * (np.pi / n)
    return pts, wts


class TruncationError(ValueError):
    """Requested time needs more eigenpairs than the eigensystem holds."""


def continuum_heat_apply(
    es: ContinuumEigensystem,
    t: float,
    f,
    query: np.ndarray,
    quad_n: int = 128,
    tail_tol: float = 1e-14,
) -> np.ndarray:
    """Apply exp(-t * Delta_xi) to f by spectral projection.

    f may be a callable on points or an array of values on the internal
    quadrature grid (obtain the grid from `quadrature_grid`).
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if np.exp(-t * es.eigenvalues[-1]) > tail_tol:
        raise TruncationError(
            f"exp(-t*lambda_max) = {np.exp(-t * es.eigenvalues[-1]):.2e} > {tail_tol:.0e}; "
            "request a larger eigensystem"
        )
    pts, wts = quadrature_grid(es.manifold, quad_n)
    fv = np.asarray(f(pts), dtype=float) if callable(f) else np.asarray(f, dtype=float)
    xi = es.density.xi(es.manifold, pts)
    basis = es.evaluate(pts)
    coeffs = basis.T @ (fv * xi * wts)
    qbasis = es.evaluate(query)
    return qbasis @ (np.exp(-t * es.eigenvalues) * coeffs)


def torus_heat_kernel(
    manifold: ManifoldSpec, t: float, x: np.ndarray, y: np.ndarray, images: int = 3
) -> np.ndarray:
    """Heat kernel H(t,x,y) on the uniform-density torus via Gaussian images.

    Normalized so that integral of H(t,x,.) xi dVol = 1 with xi = (1/L^2)^2.
    Broadcasts x against y on leading axes.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    L = manifold.side
    d = torus_delta(manifold, x, y)
    shift = np.arange(-images, images + 1) * L
    acc_x = np.zeros(d.shape[:-1])
    acc_y = np.zeros(d.shape[:-1])
    for s in shift:
        acc_x = acc_x + np.exp(-((d[..., 0] + s) ** 2) / (4 * t))
        acc_y = acc_y + np.exp(-((d[..., 1] + s) ** 2) / (4 * t))
    gper = acc_x * acc_y / (4 * np.pi * t)
    xi = (1.0 / manifold.volume) ** 2
    return gper / xi

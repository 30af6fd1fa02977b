"""Partial eigendecompositions of the random-walk Laplacian and heat operators.

The Laplacian is conjugated by D^{1/2} to a symmetric operator, solved with a
Lanczos-type iteration (ARPACK) or a dense symmetric solver, and the
eigenvectors are mapped back and rescaled to orthonormality in the
degree-weighted inner product.
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, expm_multiply

from .graph import WeightedGraph, inner_product

DENSE_CAP = 2048

_MAGIC = b"MBOSPEC1"


class EigensolverError(RuntimeError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # ascending, first ~ 0
    vectors: np.ndarray  # (n, K), orthonormal in <,>_V
    residuals: np.ndarray  # per-pair ||Delta v - lambda v||_2
    solver_tol: float
    graph_hash: bytes

    @property
    def K(self) -> int:
        return self.eigenvalues.size

    @property
    def n(self) -> int:
        return self.vectors.shape[0]


def graph_content_hash(graph: WeightedGraph) -> bytes:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(graph.cloud.points).tobytes())
    h.update(struct.pack("<d", graph.epsilon))
    h.update(graph.kernel.form.encode())
    return h.digest()


def _symmetric_form(graph: WeightedGraph) -> sp.csr_matrix:
    """A = D^{1/2} Delta D^{-1/2}, symmetric positive semidefinite."""
    graph._check_degrees()
    n = graph.n
    dinv_sqrt = 1.0 / np.sqrt(n * graph.degrees)
    S = sp.diags(dinv_sqrt) @ graph.weights @ sp.diags(dinv_sqrt)
    A = (sp.identity(n, format="csr") - S) / graph.epsilon**2
    return ((A + A.T) / 2).tocsr()


def _map_back(graph: WeightedGraph, vals: np.ndarray, y: np.ndarray):
    """Map eigenvectors of the symmetric form back to Delta eigenvectors,
    orthonormal in <,>_V."""
    order = np.argsort(vals)
    vals = np.maximum(vals[order], 0.0)
    y = y[:, order]
    vecs = np.sqrt(graph.n) * (y / np.sqrt(graph.degrees)[:, None])
    # ell^2-orthonormal y gives exactly <,>_V-orthonormal columns; renormalize
    # to kill solver roundoff
    for j in range(vecs.shape[1]):
        vecs[:, j] /= np.sqrt(inner_product(graph, vecs[:, j], vecs[:, j]))
    # fix sign convention: first nonzero entry positive
    for j in range(vecs.shape[1]):
        nz = np.flatnonzero(np.abs(vecs[:, j]) > 1e-12)
        if nz.size and vecs[nz[0], j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vals, vecs


def partial_eigendecomposition(graph: WeightedGraph, K: int, tol: float = 1e-10) -> SpectralDecomposition:
    n = graph.n
    if not 1 <= K <= n:
        raise ValueError("K must satisfy 1 <= K <= n")
    A = _symmetric_form(graph)
    if K >= n - 1 or n <= 400:
        vals, y = sla.eigh(A.toarray())
        vals, y = vals[:K], y[:, :K]
    else:
        ncv = min(n, max(4 * K + 1, 64))
        try:
            vals, y = eigsh(A, k=K, which="SA", tol=tol, ncv=ncv, maxiter=200 * n)
        except sp.linalg.ArpackNoConvergence as exc:  # pragma: no cover
            raise EigensolverError(f"eigensolver failed to converge: {exc}") from exc
    vals, vecs = _map_back(graph, vals, y)
    from .graph import laplacian_apply

    residuals = np.array(
        [np.linalg.norm(laplacian_apply(graph, vecs[:, j]) - vals[j] * vecs[:, j]) for j in range(vals.size)]
    )
    cap = max(tol, 1e-12) * (vals[-1] + 1.0 / graph.epsilon**2) * np.sqrt(n)
    if np.any(residuals > cap):
        raise EigensolverError(
            f"residuals exceed tolerance: max {residuals.max():.3e} > {cap:.3e}", residuals=residuals
        )
    return SpectralDecomposition(vals, vecs, residuals, tol, graph_content_hash(graph))


# ---------------------------------------------------------------------------
# heat operators


class HeatOperator:
    """Common interface: apply(t, u) evaluates the diffusion semigroup."""

    descriptor: str

    def apply(self, t: float, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class FullHeatOperator(HeatOperator):
    """e^{-t Delta}: dense spectral path for n <= DENSE_CAP, Krylov
    matrix-exponential action above it."""

    def __init__(self, graph: WeightedGraph, method: str = "auto"):
        if method not in ("auto", "dense", "krylov"):
            raise ValueError(f"unknown method {method!r}")
        if method == "auto":
            method = "dense" if graph.n <= DENSE_CAP else "krylov"
        if method == "dense" and graph.n > DENSE_CAP:
            raise ValueError(f"dense path capped at n = {DENSE_CAP}")
        self.graph = graph
        self.method = method
        self.descriptor = f"full/{method}"
        if method == "dense":
            A = _symmetric_form(graph).toarray()
            vals, y = sla.eigh(A)
            self._vals = np.maximum(vals, 0.0)
            self._y = y
            self._scale = np.sqrt(graph.n * graph.degrees)
        else:
            self._L = graph.laplacian_matrix()

    def apply(self, t: float, u: np.ndarray) -> np.ndarray:
        if t <= 0:
            raise ValueError("t must be positive")
        u = np.asarray(u, dtype=float)
        if self.method == "dense":
            w = self._y.T @ (self._scale * u)
            return (self._y @ (np.exp(-t * self._vals) * w)) / self._scale
        return expm_multiply(-t * self._L, u)


class TruncatedHeatOperator(HeatOperator):
    """P_n(t, u) = sum_{l<=K} exp(-t lambda_l) v_l <v_l, u>_V."""

    def __init__(self, graph: WeightedGraph, dec: SpectralDecomposition):
        if dec.n != graph.n:
            raise ValueError("decomposition does not match graph size")
        self.graph = graph
        self.dec = dec
        self.descriptor = f"truncated/K={dec.K}"
        self._wv = dec.vectors * (graph.degrees / graph.n)[:, None]  # <v_l, .>_V rows

    def apply(self, t: float, u: np.ndarray) -> np.ndarray:
        if t <= 0:
            raise ValueError("t must be positive")
        coeffs = self._wv.T @ np.asarray(u, dtype=float)
        return self.dec.vectors @ (np.exp(-t * self.dec.eigenvalues) * coeffs)


def truncated_kernel_entry(dec: SpectralDecomposition, graph: WeightedGraph, t: float, i: int, j: int) -> float:
    """H^K(t, x_i, x_j) = sum_l exp(-t lambda_l) v_l(x_i) v_l(x_j) d(x_j)/n."""
    if t <= 0:
        raise ValueError("t must be positive")
    terms = np.exp(-t * dec.eigenvalues) * dec.vectors[i] * dec.vectors[j]
    return float(np.sum(terms) * graph.degrees[j] / graph.n)


def truncated_kernel_block(
    dec: SpectralDecomposition, graph: WeightedGraph, t: float, rows: np.ndarray, cols: np.ndarray
) -> np.ndarray:
    """Dense block of H^K entries for the given row/column node indices."""
    e = np.exp(-t * dec.eigenvalues)
    vr = dec.vectors[rows] * e
    vc = dec.vectors[cols]
    return (vr @ vc.T) * (graph.degrees[cols] / graph.n)[None, :]


def mass_defect(handle: HeatOperator, t: float) -> float:
    ones = np.ones(handle.graph.n)
    return float(np.max(np.abs(handle.apply(t, ones) - 1.0)))


# ---------------------------------------------------------------------------
# spectrum cache: magic, little-endian header, float64 blocks, CRC32 trailer


class CacheError(IOError):
    pass


def spectrum_cache_save(dec: SpectralDecomposition, path) -> None:
    header = struct.pack("<qqd", dec.n, dec.K, dec.solver_tol) + dec.graph_hash
    vals = np.ascontiguousarray(dec.eigenvalues, dtype="<f8").tobytes()
    vecs = np.ascontiguousarray(dec.vectors, dtype="<f8").tobytes()  # node-major
    res = np.ascontiguousarray(dec.residuals, dtype="<f8").tobytes()
    body = _MAGIC + header + vals + vecs + res
    crc = struct.pack("<I", zlib.crc32(body))
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(body + crc)
    tmp.replace(path)


def spectrum_cache_load(path, expected_graph_hash: bytes | None = None) -> SpectralDecomposition:
    raw = Path(path).read_bytes()
    if len(raw) < len(_MAGIC) + 24 + 32 + 4 or raw[: len(_MAGIC)] != _MAGIC:
        raise CacheError("not a spectrum cache file")
    body, crc = raw[:-4], raw[-4:]
    if struct.unpack("<I", crc)[0] != zlib.crc32(body):
        raise CacheError("checksum mismatch (truncated or corrupted file)")
    off = len(_MAGIC)
    n, K, tol = struct.unpack_from("<qqd", body, off)
    off += 24
    ghash = body[off : off + 32]
    off += 32
    expected = off + 8 * (K + n * K + K)
    if len(body) != expected:
        raise CacheError("shape mismatch in cache file")
    vals = np.frombuffer(body, dtype="<f8", count=K, offset=off).copy()
    off += 8 * K
    vecs = np.frombuffer(body, dtype="<f8", count=n * K, offset=off).reshape(n, K).copy()
    off += 8 * n * K
    res = np.frombuffer(body, dtype="<f8", count=K, offset=off).copy()
    if expected_graph_hash is not None and ghash != expected_graph_hash:
        raise CacheError("cache was built for a different graph")
    return SpectralDecomposition(vals, vecs, res, tol, ghash)

"""Small-k linear algebra: point sets, orthonormal bases, spans and volumes.

Volumes are handled in the log domain throughout. A zero volume is the
``NEG_INF`` sentinel rather than ``0.0`` so that products of many small
residuals never underflow.

A :class:`PointSet` either holds explicit coordinates or is backed by an
inner-product oracle (kernel access). Every routine in the package works in
both modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

NEG_INF = float("-inf")

# residual r counts as zero when r <= RANK_RTOL * max(1, |p|)
RANK_RTOL = 1e-9
# Cholesky pivot counts as zero when pivot <= CHOL_RTOL * trace
CHOL_RTOL = 1e-12

BlockKernel = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _rank_deficient(residual_sq: float, norm_sq: float, oracle: bool) -> bool:
    if oracle:
        # residuals from subtractive Schur complements are only accurate to
        # ~sqrt(machine eps) relative, so test the squared quantity instead
        return residual_sq <= CHOL_RTOL * max(1.0, norm_sq)
    return residual_sq <= (RANK_RTOL * max(1.0, math.sqrt(norm_sq))) ** 2


class PointSet:
    """Ordered collection of points with stable indices.

    Build one with :meth:`from_coords` (explicit coordinates) or
    :meth:`from_oracle` (inner products only). Oracle-mode sets count the
    number of scalar inner products they answer in ``query_count``.
    """

    def __init__(self, coords=None, *, kernel: Optional[BlockKernel] = None,
                 n: Optional[int] = None, dimension: Optional[int] = None,
                 diag: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 description: str = "linear"):
        if (coords is None) == (kernel is None):
            raise ValueError("give exactly one of coords or kernel")
        if coords is not None:
            X = np.array(coords, dtype=float, copy=True)
            if X.ndim == 1:
                X = X.reshape(1, -1)
            if X.ndim != 2 or X.shape[1] < 1:
                raise ValueError(f"coords must be 2-d with d >= 1, got shape {X.shape}")
            if not np.all(np.isfinite(X)):
                raise ValueError("coordinates must be finite")
            X.setflags(write=False)
            self._coords = X
            self._kernel = None
            self.n = X.shape[0]
            self.dimension = X.shape[1]
        else:
            if n is None or n < 0:
                raise ValueError("oracle mode needs n >= 0")
            self._coords = None
            self._kernel = kernel
            self._diag = diag
            self.n = int(n)
            self.dimension = dimension
        self.description = description
        self.query_count = 0

    @classmethod
    def from_coords(cls, X) -> "PointSet":
        return cls(X)

    @classmethod
    def from_oracle(cls, kernel: BlockKernel, n: int, *, dimension=None, diag=None,
                    description: str = "oracle") -> "PointSet":
        """Wrap a block kernel ``kernel(rows, cols) -> (len(rows), len(cols))``.

        ``diag(idx)``, if given, returns the squared norms of ``idx`` in one call.
        """
        return cls(kernel=kernel, n=n, dimension=dimension, diag=diag,
                   description=description)

    @classmethod
    def from_pairwise(cls, fn: Callable[[int, int], float], n: int, **kw) -> "PointSet":
        """Wrap a scalar oracle ``fn(i, j) -> <p_i, p_j>``."""
        def block(rows, cols):
            return np.array([[fn(int(i), int(j)) for j in cols] for i in rows],
                            dtype=float).reshape(len(rows), len(cols))
        return cls.from_oracle(block, n, **kw)

    @property
    def is_oracle(self) -> bool:
        return self._kernel is not None

    @property
    def access_mode(self) -> str:
        return "inner-product-oracle" if self.is_oracle else "explicit-coordinates"

    @property
    def coords(self) -> np.ndarray:
        if self._coords is None:
            raise TypeError("oracle-mode point set has no coordinates")
        return self._coords

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"PointSet(n={self.n}, dimension={self.dimension}, mode={self.access_mode!r})"

    def _check_indices(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.intp).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise IndexError(f"index out of range for point set of size {self.n}")
        return idx

    def gram_block(self, rows, cols) -> np.ndarray:
        """Matrix of inner products between ``rows`` and ``cols``."""
        rows = self._check_indices(rows)
        cols = self._check_indices(cols)
        if self._kernel is None:
            return self._coords[rows] @ self._coords[cols].T
        self.query_count += rows.size * cols.size
        out = np.asarray(self._kernel(rows, cols), dtype=float)
        return out.reshape(rows.size, cols.size)

    def gram(self, S) -> np.ndarray:
        return self.gram_block(S, S)

    def sq_norms(self, idx=None) -> np.ndarray:
        idx = np.arange(self.n) if idx is None else self._check_indices(idx)
        if self._kernel is None:
            X = self._coords[idx]
            return np.einsum("ij,ij->i", X, X)
        self.query_count += idx.size
        if self._diag is not None:
            return np.asarray(self._diag(idx), dtype=float).reshape(idx.size)
        return np.array([float(self._kernel(idx[i:i + 1], idx[i:i + 1])[0, 0])
                         for i in range(idx.size)])

    def take(self, indices) -> "PointSet":
        """Restriction to ``indices``; local index i maps to ``indices[i]``."""
        idx = self._check_indices(indices)
        if self._kernel is None:
            return PointSet(self._coords[idx])
        parent = self

        def block(rows, cols):
            return parent.gram_block(idx[rows], idx[cols])

        def diag(rows):
            return parent.sq_norms(idx[rows])

        return PointSet(kernel=block, n=idx.size, dimension=self.dimension,
                        diag=diag, description=self.description)

    def spot_check_psd(self, sample_size: int = 32, seed=0, tol: float = 1e-8) -> bool:
        """Check symmetry and PSD-ness of the Gram matrix on a random sample."""
        rng = np.random.default_rng(seed)
        m = min(sample_size, self.n)
        if m == 0:
            return True
        S = np.sort(rng.choice(self.n, size=m, replace=False))
        G = self.gram(S)
        scale = max(1.0, float(np.abs(G).max()))
        if not np.allclose(G, G.T, atol=tol * scale):
            return False
        return bool(np.linalg.eigvalsh((G + G.T) / 2).min() >= -tol * scale)


def inner_product(ps: PointSet, i: int, j: int) -> float:
    return float(ps.gram_block([i], [j])[0, 0])


def linear_oracle(X) -> PointSet:
    """Oracle-mode view of explicit coordinates under the plain dot product."""
    X = np.array(X, dtype=float, copy=True)
    if X.ndim == 1:
        X = X.reshape(1, -1)

    def block(rows, cols):
        return X[rows] @ X[cols].T

    def diag(rows):
        return np.einsum("ij,ij->i", X[rows], X[rows])

    return PointSet.from_oracle(block, X.shape[0], dimension=X.shape[1],
                                diag=diag, description="linear")


def rbf_kernelize(ps: PointSet, sigma: float) -> PointSet:
    """RBF kernel view ``K(x, y) = exp(-|x - y|^2 / (2 sigma^2))``."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    X = ps.coords
    denom = 2.0 * float(sigma) ** 2

    def block(rows, cols):
        return np.exp(-cdist(X[rows], X[cols], "sqeuclidean") / denom)

    def diag(rows):
        return np.ones(len(rows))

    return PointSet.from_oracle(block, ps.n, dimension=ps.dimension, diag=diag,
                                description=f"rbf:{sigma!r}")


@dataclass(frozen=True, eq=False)
class OrthoBasis:
    """Orthonormal basis of a subspace.

    Explicit bases store ``vectors`` (t x d). Oracle bases are dual: basis
    vector i is ``sum_j coef[i, j] * phi(anchors[j])`` and orthonormality is
    measured with the oracle inner product.
    """

    vectors: Optional[np.ndarray] = None
    anchors: tuple = ()
    coef: Optional[np.ndarray] = None
    dimension: Optional[int] = None

    @classmethod
    def empty(cls, ps_or_dim) -> "OrthoBasis":
        if isinstance(ps_or_dim, PointSet):
            if ps_or_dim.is_oracle:
                return cls(anchors=(), coef=np.zeros((0, 0)))
            ps_or_dim = ps_or_dim.dimension
        return cls(vectors=np.zeros((0, int(ps_or_dim))), dimension=int(ps_or_dim))

    @classmethod
    def from_vectors(cls, V) -> "OrthoBasis":
        V = np.array(V, dtype=float, copy=True)
        V.setflags(write=False)
        return cls(vectors=V, dimension=V.shape[1])

    @property
    def is_dual(self) -> bool:
        return self.vectors is None

    @property
    def size(self) -> int:
        return self.coef.shape[0] if self.is_dual else self.vectors.shape[0]

    def __len__(self) -> int:
        return self.size

    def orthonormality_error(self, ps: Optional[PointSet] = None) -> float:
        """max |<b_i, b_j> - delta_ij| (needs ``ps`` for dual bases)."""
        if self.size == 0:
            return 0.0
        if self.is_dual:
            M = self.coef @ ps.gram(list(self.anchors)) @ self.coef.T
        else:
            M = self.vectors @ self.vectors.T
        return float(np.abs(M - np.eye(self.size)).max())


def _check_basis(ps: PointSet, basis: OrthoBasis):
    if basis.is_dual != ps.is_oracle:
        raise ValueError("basis representation does not match point set access mode")
    if not basis.is_dual and basis.dimension != ps.dimension:
        raise ValueError(f"dimension mismatch: basis {basis.dimension}, points {ps.dimension}")


def _explicit_residual(basis: OrthoBasis, x: np.ndarray) -> np.ndarray:
    B = basis.vectors
    r = x - B.T @ (B @ x)
    return r - B.T @ (B @ r)


def _dual_projection(ps: PointSet, basis: OrthoBasis, p: int):
    # coefficients <b_i, p> and |p|^2
    kpp = float(ps.sq_norms([p])[0])
    if basis.size == 0:
        return np.zeros(0), kpp
    k = ps.gram_block(list(basis.anchors), [p])[:, 0]
    return basis.coef @ k, kpp


def dist_to_span(ps: PointSet, p: int, basis: OrthoBasis) -> float:
    """Euclidean distance from point ``p`` to the span of ``basis``."""
    _check_basis(ps, basis)
    if basis.is_dual:
        a, kpp = _dual_projection(ps, basis, p)
        return math.sqrt(max(kpp - float(a @ a), 0.0))
    x = ps.coords[ps._check_indices([p])[0]]
    return float(np.linalg.norm(_explicit_residual(basis, x)))


def projection_norm(ps: PointSet, p: int, basis: OrthoBasis) -> float:
    """Norm of the orthogonal projection of ``p`` onto the span of ``basis``."""
    _check_basis(ps, basis)
    if basis.is_dual:
        a, _ = _dual_projection(ps, basis, p)
        return float(np.linalg.norm(a))
    x = ps.coords[ps._check_indices([p])[0]]
    return float(np.linalg.norm(basis.vectors @ x))


def extend_basis(basis: OrthoBasis, ps: PointSet, p: int):
    """One Gram-Schmidt step (with a reorthogonalization pass).

    Returns ``(new_basis, residual)``. When the residual falls under the rank
    tolerance the input basis is returned unchanged.
    """
    _check_basis(ps, basis)
    if not basis.is_dual:
        x = ps.coords[ps._check_indices([p])[0]]
        r = _explicit_residual(basis, x)
        res = float(np.linalg.norm(r))
        if _rank_deficient(res * res, float(x @ x), oracle=False):
            return basis, res
        b = r / res
        b = b - basis.vectors.T @ (basis.vectors @ b)
        b /= np.linalg.norm(b)
        return OrthoBasis.from_vectors(np.vstack([basis.vectors, b])), res

    anchors = list(basis.anchors) + [int(p)]
    t = basis.size
    K = ps.gram(anchors)
    C = np.zeros((t, t + 1))
    C[:, :t] = basis.coef
    w = np.zeros(t + 1)
    w[t] = 1.0
    for _ in range(2):
        w = w - C.T @ (C @ (K @ w))
    res_sq = max(float(w @ K @ w), 0.0)
    if _rank_deficient(res_sq, float(K[t, t]), oracle=True):
        return basis, math.sqrt(res_sq)
    res = math.sqrt(res_sq)
    coef = np.vstack([C, w / res])
    coef.setflags(write=False)
    return OrthoBasis(anchors=tuple(anchors), coef=coef), res


def span_basis(ps: PointSet, indices: Sequence[int]) -> OrthoBasis:
    """Orthonormal basis of the span of the given points (dependent ones skipped)."""
    basis = OrthoBasis.empty(ps)
    for i in indices:
        basis, _ = extend_basis(basis, ps, i)
    return basis


def sample_subspace(d: int, t: int, rng_seed=None) -> OrthoBasis:
    """Uniformly random t-dimensional subspace of R^d."""
    if t < 0 or t > d:
        raise ValueError(f"need 0 <= t <= d, got t={t}, d={d}")
    if t == 0:
        return OrthoBasis.empty(d)
    rng = np.random.default_rng(rng_seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, t)))
    return OrthoBasis.from_vectors(Q.T)


def chol_logdet(A) -> np.ndarray:
    """Batched log-determinant of symmetric PSD matrices via Cholesky.

    ``A`` has shape ``(..., k, k)``. A matrix whose pivot drops to
    ``CHOL_RTOL * trace`` or below is declared singular and gets ``-inf``.
    """
    A = np.asarray(A, dtype=float)
    batch = A.shape[:-2]
    k = A.shape[-1]
    A = A.reshape(-1, k, k)
    B = A.shape[0]
    if k == 0:
        return np.zeros(batch)
    tol = CHOL_RTOL * np.trace(A, axis1=1, axis2=2)
    L = np.zeros_like(A)
    half_logdet = np.zeros(B)
    ok = np.ones(B, dtype=bool)
    for j in range(k):
        Lj = L[:, j, :j]
        piv = A[:, j, j] - np.einsum("bi,bi->b", Lj, Lj)
        bad = ~(piv > tol)
        ok &= ~bad
        d = np.sqrt(np.where(bad, 1.0, piv))
        L[:, j, j] = d
        half_logdet += np.log(d)
        if j + 1 < k:
            L[:, j + 1:, j] = (A[:, j + 1:, j]
                               - np.einsum("bri,bi->br", L[:, j + 1:, :j], Lj)) / d[:, None]
    out = 2.0 * half_logdet
    out[~ok] = NEG_INF
    return out.reshape(batch)


def log_volume(ps: PointSet, S: Sequence[int]) -> float:
    """log VOL(S) = 0.5 * log det(Gram(S)); ``NEG_INF`` for dependent sets."""
    S = [int(i) for i in S]
    if not S:
        raise ValueError("log_volume of an empty set")
    if len(set(S)) != len(S):
        raise ValueError(f"duplicate indices in {S}")
    return 0.5 * float(chol_logdet(ps.gram(S)))


def sequential_log_volume(ps: PointSet, S: Sequence[int]) -> float:
    """log VOL(S) as a sum of Gram-Schmidt residual logs in the given order."""
    basis = OrthoBasis.empty(ps)
    total = 0.0
    for i in S:
        new, res = extend_basis(basis, ps, i)
        if new is basis:
            return NEG_INF
        basis = new
        total += math.log(res)
    return total


def dists_to_span(ps: PointSet, basis: OrthoBasis, idx=None) -> np.ndarray:
    """Vectorized :func:`dist_to_span` over ``idx`` (default: all points)."""
    _check_basis(ps, basis)
    idx = np.arange(ps.n) if idx is None else ps._check_indices(idx)
    if basis.is_dual:
        diag = ps.sq_norms(idx)
        if basis.size == 0:
            return np.sqrt(diag)
        A = basis.coef @ ps.gram_block(list(basis.anchors), idx)
        return np.sqrt(np.maximum(diag - np.einsum("ij,ij->j", A, A), 0.0))
    X = ps.coords[idx]
    B = basis.vectors
    R = X - (X @ B.T) @ B
    R = R - (R @ B.T) @ B
    return np.sqrt(np.einsum("ij,ij->i", R, R))

"""Dense linear-algebra kernels.

Thin SVD and symmetric eigendecomposition with a deterministic sign
convention, plus the symmetric embedding of a rectangular matrix whose
eigensystem is available in closed form from the SVD.  Everything works on
plain float64 numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ThinSVD",
    "EmbedEigensystem",
    "as_matrix",
    "sym_embed",
    "sym_embed_adjoint",
    "thin_svd",
    "embed_eigensystem",
    "sym_eig",
    "singular_values",
    "trace_norm",
]

_SQRT_HALF = np.sqrt(0.5)


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a nonempty 2-D float64 array with finite entries."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 2-D array, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def sym_embed(x) -> np.ndarray:
    """Embed a p-by-q matrix X as the symmetric matrix [[0, X^T], [X, 0]].

    The result is (q+p)-square with the q-dimensional block first; X sits in
    the bottom-left block.  The nonzero eigenvalues of the embedding are
    plus/minus the singular values of X.
    """
    x = as_matrix(x, "x")
    p, q = x.shape
    out = np.zeros((p + q, p + q))
    out[:q, q:] = x.T
    out[q:, :q] = x
    return out


def sym_embed_adjoint(w, shape: tuple[int, int]) -> np.ndarray:
    """Adjoint of :func:`sym_embed` under the trace inner product.

    For symmetric W of dimension p+q (split q first, p second) returns the
    p-by-q matrix Y with ``sym_embed(X) . W == X . Y`` for every X, i.e.
    twice the bottom-left block of W.
    """
    w = as_matrix(w, "w")
    p, q = shape
    if w.shape != (p + q, p + q):
        raise ValueError(
            f"split {(p, q)} does not match embedded dimension {w.shape}"
        )
    return 2.0 * w[q:, :q]


@dataclass(frozen=True)
class ThinSVD:
    """Thin singular value decomposition ``a = left @ diag(singulars) @ right.T``.

    ``left`` is p-by-m and ``right`` is q-by-m with orthonormal columns,
    m = min(p, q); ``singulars`` is nonincreasing and nonnegative.  The
    largest-magnitude entry of every left singular vector is nonnegative
    (ties broken by lowest row index), which pins the factor signs.
    """

    left: np.ndarray
    singulars: np.ndarray
    right: np.ndarray

    @property
    def rank_dim(self) -> int:
        return self.singulars.size

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singulars) @ self.right.T


def _orient_columns(u: np.ndarray, companion: np.ndarray | None = None):
    """Flip column signs so each column's largest-magnitude entry is >= 0.

    np.argmax returns the first maximizer, which breaks magnitude ties by
    lowest row index.  ``companion`` columns are flipped in lockstep.
    """
    idx = np.argmax(np.abs(u), axis=0)
    vals = u[idx, np.arange(u.shape[1])]
    signs = np.where(vals < 0.0, -1.0, 1.0)
    if companion is None:
        return u * signs
    return u * signs, companion * signs


def thin_svd(a) -> ThinSVD:
    """Thin SVD with the deterministic sign convention of :class:`ThinSVD`."""
    a = as_matrix(a, "a")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    u, v = _orient_columns(u, vt.T)
    return ThinSVD(left=u, singulars=s, right=v)


def singular_values(a) -> np.ndarray:
    """Singular values of ``a``, nonincreasing."""
    return np.linalg.svd(as_matrix(a, "a"), compute_uv=False)


def trace_norm(a) -> float:
    """Sum of the singular values of ``a``."""
    return float(np.sum(singular_values(a)))


@dataclass(frozen=True)
class EmbedEigensystem:
    """Closed-form eigenpairs of ``sym_embed(a)`` built from a thin SVD of a.

    ``vectors`` is (p+q)-by-2m with orthonormal columns; column i < m pairs
    with eigenvalue ``+singulars[i]`` and column m+i with ``-singulars[i]``.
    The remaining p+q-2m eigenvalues of the embedding are zero and their
    eigenvectors are never materialized.
    """

    vectors: np.ndarray
    values: np.ndarray


def embed_eigensystem(svd: ThinSVD) -> EmbedEigensystem:
    """Eigenpairs of the symmetric embedding from the factors of its SVD.

    With a = U diag(s) V^T, the embedding [[0, a^T], [a, 0]] has unit
    eigenvectors (v_i; u_i)/sqrt(2) for eigenvalue +s_i and
    (v_i; -u_i)/sqrt(2) for -s_i.
    """
    u, s, v = svd.left, svd.singulars, svd.right
    p, m = u.shape
    q = v.shape[0]
    vecs = np.empty((p + q, 2 * m))
    vecs[:q, :m] = _SQRT_HALF * v
    vecs[:q, m:] = _SQRT_HALF * v
    vecs[q:, :m] = _SQRT_HALF * u
    vecs[q:, m:] = -_SQRT_HALF * u
    return EmbedEigensystem(vectors=vecs, values=np.concatenate([s, -s]))


def sym_eig(s) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns ``(values, vectors)`` with values nonincreasing and each
    eigenvector's largest-magnitude entry nonnegative.  Only the lower
    triangle of ``s`` is referenced.
    """
    s = as_matrix(s, "s")
    if s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    w, v = np.linalg.eigh(s)
    order = np.argsort(-w, kind="stable")
    return w[order], _orient_columns(v[:, order])

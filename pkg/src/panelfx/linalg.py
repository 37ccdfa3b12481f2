"""Dense linear-algebra kernels shared by every estimator.

Thin, contract-checked wrappers around numpy.linalg: minimum-norm least
squares, rank-revealing annihilation, principal-components extraction
with the factor normalization F'F/T = I, and a deterministic symmetric
eigensolver. Everything downstream (interactive-effects loops,
diagnostics, factor counting) goes through these four operations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidM, NotSymmetric

__all__ = [
    "OlsFit",
    "FactorModel",
    "Projector",
    "ols",
    "annihilate",
    "orthonormal_basis",
    "principal_components",
    "sym_eigen",
]


@dataclass
class OlsFit:
    """Least-squares solution with rank bookkeeping.

    ``coef`` is the minimum-norm solution when the design is rank
    deficient; ``rank_deficient`` flags that case rather than raising.
    """

    coef: np.ndarray
    residuals: np.ndarray
    rank: int
    rank_deficient: bool


def ols(x: np.ndarray, y: np.ndarray) -> OlsFit:
    """Least squares of ``y`` on ``x`` (n x k, n >= k).

    Returns the minimum-norm solution and flags rank deficiency instead
    of failing, so callers can decide whether a dropped direction is
    acceptable.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch(f"design must be 2-d, got shape {x.shape}")
    n, k = x.shape
    if y.shape[0] != n or y.ndim not in (1, 2):
        raise DimensionMismatch(f"response shape {y.shape} does not match design {x.shape}")
    if n < k:
        raise DimensionMismatch(f"need at least as many rows as columns, got {n} < {k}")
    coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    residuals = y - x @ coef
    return OlsFit(coef=coef, residuals=residuals, rank=int(rank), rank_deficient=rank < k)


def orthonormal_basis(w: np.ndarray | None) -> np.ndarray:
    """Orthonormal basis of the column space of ``w``.

    Rank is decided by the SVD with tolerance max(n, q) * eps * s_max,
    so numerically null directions are excluded from the basis.
    """
    if w is None:
        return np.zeros((0, 0))
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    if w.ndim != 2:
        raise DimensionMismatch(f"basis source must be 2-d, got shape {w.shape}")
    if w.shape[1] == 0 or w.size == 0:
        return np.zeros((w.shape[0], 0))
    u, s, _ = np.linalg.svd(w, full_matrices=False)
    tol = max(w.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    return u[:, s > tol]


def annihilate(w: np.ndarray | None, a: np.ndarray) -> np.ndarray:
    """Project ``a`` onto the orthogonal complement of the columns of ``w``.

    Computes a - W (W'W)^+ W' a through an orthonormal basis of W, which
    keeps the operation well defined when W is rank deficient. ``w`` may
    be None or have zero columns, in which case a copy of ``a`` returns.
    """
    a = np.asarray(a, dtype=float)
    q = orthonormal_basis(w)
    if q.shape[1] == 0:
        return a.copy()
    if q.shape[0] != a.shape[0]:
        raise DimensionMismatch(
            f"cannot annihilate: {q.shape[0]} basis rows vs {a.shape[0]} target rows")
    return a - q @ (q.T @ a)


@dataclass
class Projector:
    """Residual-maker for a fixed column space, reusable across targets."""

    basis: np.ndarray

    def __post_init__(self) -> None:
        self.q = orthonormal_basis(self.basis)

    @property
    def rank(self) -> int:
        return self.q.shape[1]

    def __call__(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if self.q.shape[1] == 0:
            return a.copy()
        if a.shape[0] != self.q.shape[0]:
            raise DimensionMismatch(
                f"cannot annihilate: {self.q.shape[0]} basis rows vs {a.shape[0]} target rows")
        return a - self.q @ (self.q.T @ a)


def _orient_columns(v: np.ndarray) -> np.ndarray:
    # deterministic sign: the largest-magnitude entry of each column is positive
    if v.size == 0:
        return v
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


@dataclass
class FactorModel:
    """Common factors and loadings with the normalization F'F/T = I."""

    F: np.ndarray  # T x m
    Z: np.ndarray  # N x m
    m: int

    def __post_init__(self) -> None:
        self.F = np.asarray(self.F, dtype=float)
        self.Z = np.asarray(self.Z, dtype=float)
        if self.F.ndim != 2 or self.Z.ndim != 2:
            raise DimensionMismatch("factors and loadings must be 2-d")
        if self.F.shape[1] != self.m or self.Z.shape[1] != self.m:
            raise DimensionMismatch("factor count disagrees with matrix shapes")
        t = self.F.shape[0]
        if self.m > 0:
            gram = self.F.T @ self.F / t
            if np.abs(gram - np.eye(self.m)).max() > 1e-8:
                raise InvalidM("factors do not satisfy F'F/T = I within 1e-8")

    @property
    def n_periods(self) -> int:
        return self.F.shape[0]

    def common_component(self) -> np.ndarray:
        """N x T matrix of fitted common components Z F'."""
        return self.Z @ self.F.T


def principal_components(u: np.ndarray, m: int) -> FactorModel:
    """Leading principal components of an N x T panel of residuals.

    Factors are sqrt(T) times the top-``m`` eigenvectors of U'U/(NT), so
    that F'F/T = I; loadings are Z = U F / T. The eigenproblem is solved
    on the smaller of the two Gram matrices. Eigenvector signs follow the
    largest-magnitude-entry convention, which makes the output unique.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 2:
        raise DimensionMismatch(f"panel must be 2-d, got shape {u.shape}")
    n, t = u.shape
    if not (isinstance(m, (int, np.integer)) and 1 <= m <= min(n, t)):
        raise InvalidM(f"factor count m={m} violates 1 <= m <= min(N, T) = {min(n, t)}")

    if t <= n:
        gram = u.T @ u / (n * t)
        w, v = np.linalg.eigh(gram)
        f = np.sqrt(t) * v[:, ::-1][:, :m]
    else:
        gram = u @ u.T / (n * t)
        w, v = np.linalg.eigh(gram)
        w = w[::-1]
        v = v[:, ::-1]
        # convert unit-side eigenvectors a_k to factor-side b_k = U'a_k/s_k
        sing = np.sqrt(np.clip(w[:m], 0.0, None) * n * t)
        floor = max(w[0], 0.0) * 1e-12
        if np.any(w[:m] <= floor):
            # near-null eigenvalue: the conversion is unstable, solve on the
            # factor side directly even though it is the larger Gram
            gram_t = u.T @ u / (n * t)
            wt, vt = np.linalg.eigh(gram_t)
            f = np.sqrt(t) * vt[:, ::-1][:, :m]
        else:
            b = u.T @ v[:, :m] / sing
            b /= np.linalg.norm(b, axis=0)
            f = np.sqrt(t) * b
    f = _orient_columns(f)
    z = u @ f / t
    return FactorModel(F=f, Z=z, m=int(m))


def sym_eigen(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix, descending eigenvalues.

    Symmetry is required within 1e-10 (relative to the largest entry).
    Eigenvector signs follow the same convention as
    :func:`principal_components` so repeated calls are bit-identical.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {s.shape}")
    scale = max(1.0, np.abs(s).max()) if s.size else 1.0
    if s.size and np.abs(s - s.T).max() > 1e-10 * scale:
        raise NotSymmetric("matrix is not symmetric within 1e-10")
    w, v = np.linalg.eigh((s + s.T) / 2.0)
    order = np.argsort(w)[::-1]
    return w[order], _orient_columns(v[:, order])

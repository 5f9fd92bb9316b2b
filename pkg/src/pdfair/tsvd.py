"""Truncated SVD: randomized range finder plus a one-sided Jacobi solve.

The range finder sketches ``A`` with a Gaussian test matrix, sharpens the
sketch by subspace (power) iteration and then computes the exact SVD of the
small projected matrix ``Q^T A`` with Hestenes' one-sided Jacobi method.
When the sketch already spans ``min(m, n)`` directions the result is exact
up to rounding; otherwise subspace iteration continues past ``power_iters``
until the leading ``k`` Ritz values stop moving.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput, RankOutOfRange


@dataclass(frozen=True, eq=False)
class TruncatedFactors:
    """Rank-``k`` factors with ``A ~= U @ diag(sigma) @ V.T``.

    ``U`` is m x k and ``V`` is n x k, both with orthonormal columns.
    ``iterations`` counts the subspace iterations actually performed.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    iterations: int = 0
    converged: bool = True

    @property
    def k(self) -> int:
        return self.sigma.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.U.shape[0], self.V.shape[0]


def as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise NonFiniteInput("matrix contains NaN or infinite entries")
    return A


def _round_robin(q: int):
    """Yield the rounds of a cyclic tournament over ``q`` columns.

    Each round is a pair of index arrays of disjoint column pairs, so all
    rotations of one round commute and can be applied at once.
    """
    players = list(range(q)) + ([-1] if q % 2 else [])
    half = len(players) // 2
    for _ in range(len(players) - 1):
        pairs = [(players[i], players[-1 - i]) for i in range(half)]
        pairs = [(a, b) if a < b else (b, a) for a, b in pairs if a >= 0 and b >= 0]
        yield np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])
        players = [players[0], players[-1]] + players[1:-1]


def _hestenes(W: np.ndarray, max_sweeps: int = 100, tol: float = 1e-15):
    """Orthogonalize the columns of ``W`` (p x q, p >= q) by plane rotations.

    Returns the rotated ``W`` and the accumulated orthogonal ``V`` with
    ``W_in @ V == W_out``.
    """
    W = W.copy()
    q = W.shape[1]
    V = np.eye(q)
    rounds = list(_round_robin(q))
    for _ in range(max_sweeps):
        rotated = False
        for I, J in rounds:
            if I.size == 0:
                continue
            Wi, Wj = W[:, I], W[:, J]
            alpha = np.einsum("ij,ij->j", Wi, Wi)
            beta = np.einsum("ij,ij->j", Wj, Wj)
            gamma = np.einsum("ij,ij->j", Wi, Wj)
            active = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            if not active.any():
                continue
            rotated = True
            # an overflowing zeta means a negligible rotation: t becomes 0
            with np.errstate(over="ignore"):
                zeta = np.divide(beta - alpha, 2.0 * gamma, out=np.zeros_like(gamma), where=active)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            c = np.where(active, 1.0 / np.sqrt(1.0 + t * t), 1.0)
            s = np.where(active, c * t, 0.0)
            W[:, I], W[:, J] = c * Wi - s * Wj, s * Wi + c * Wj
            Vi, Vj = V[:, I], V[:, J]
            V[:, I], V[:, J] = c * Vi - s * Vj, s * Vi + c * Vj
        if not rotated:
            break
    return W, V


def _complete(U: np.ndarray, missing: np.ndarray) -> np.ndarray:
    """Replace the columns flagged in ``missing`` by an orthonormal completion."""
    U = U.copy()
    keep = [U[:, j] for j in np.flatnonzero(~missing)]
    candidates = iter(np.eye(U.shape[0]))
    for j in np.flatnonzero(missing):
        for e in candidates:
            v = e.copy()
            for _ in range(2):
                for u in keep:
                    v -= (u @ v) * u
            norm = np.linalg.norm(v)
            if norm > 0.5:
                U[:, j] = v / norm
                keep.append(U[:, j])
                break
    return U


def jacobi_svd(W) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``W = U @ diag(s) @ V.T`` of any real matrix.

    ``s`` is sorted in decreasing order and has ``min(p, q)`` entries. Left
    vectors belonging to exactly zero singular values are filled in so that
    ``U`` always has orthonormal columns.
    """
    W = as_matrix(W)
    if W.shape[0] < W.shape[1]:
        Vt, s, Ut = jacobi_svd(W.T)
        return Ut, s, Vt
    Wr, V = _hestenes(W)
    s = np.sqrt(np.einsum("ij,ij->j", Wr, Wr))
    order = np.argsort(-s, kind="stable")
    s, Wr, V = s[order], Wr[:, order], V[:, order]
    zero = s <= np.finfo(float).tiny
    U = np.divide(Wr, s, out=np.zeros_like(Wr), where=~zero)
    if zero.any():
        U = _complete(U, zero)
    return U, s, V


def _orth(Y: np.ndarray) -> np.ndarray:
    return np.linalg.qr(Y, mode="reduced")[0]


def _ritz_energies(Q: np.ndarray, A: np.ndarray, k: int) -> np.ndarray:
    B = Q.T @ A
    # convergence monitor only; the returned factors come from jacobi_svd
    return np.linalg.eigvalsh(B @ B.T)[::-1][:k]


def truncated_svd(
    A,
    k: int,
    oversampling: int = 10,
    power_iters: int = 2,
    seed: int = 0,
    tol: float = 1e-12,
    max_iters: int = 300,
) -> TruncatedFactors:
    """Rank-``k`` SVD of ``A``.

    Parameters
    ----------
    k : int
        Target rank, ``1 <= k <= min(m, n)``.
    oversampling : int
        Extra sketch columns beyond ``k``.
    power_iters : int
        Subspace iterations always performed after the initial sketch.
    seed : int
        Seed of the Gaussian test matrix; equal seeds give bitwise equal output.
    tol, max_iters :
        When the sketch is narrower than ``min(m, n)``, iteration continues
        until the top-``k`` squared Ritz values change by at most
        ``tol * sigma_1**2`` between sweeps, for at most ``max_iters`` sweeps
        in total.

    Each column of ``V`` is signed so its largest-magnitude entry is positive,
    with ``U`` flipped to match.
    """
    A = as_matrix(A)
    m, n = A.shape
    r = min(m, n)
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 1 <= k <= r:
        raise RankOutOfRange(f"rank k must be an integer in [1, {r}], got {k!r}")
    if oversampling < 0 or power_iters < 0:
        raise ValueError("oversampling and power_iters must be non-negative")
    width = min(k + oversampling, r)

    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((n, width))
    Q = _orth(A @ omega)
    iterations = 0
    for _ in range(power_iters):
        Q = _orth(A @ _orth(A.T @ Q))
        iterations += 1

    converged = True
    if width < r:
        converged = False
        prev = _ritz_energies(Q, A, k)
        while iterations < max_iters:
            Q = _orth(A @ _orth(A.T @ Q))
            iterations += 1
            cur = _ritz_energies(Q, A, k)
            if np.max(np.abs(cur - prev)) <= tol * max(cur[0], np.finfo(float).tiny):
                converged = True
                break
            prev = cur
        if not converged:
            warnings.warn(
                f"truncated_svd: subspace iteration stopped after {iterations} sweeps "
                "without meeting the Ritz-value tolerance",
                RuntimeWarning,
                stacklevel=2,
            )

    Ub, s, V = jacobi_svd(Q.T @ A)
    U = Q @ Ub[:, :k]
    s, V = s[:k], V[:, :k]

    flip = np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(k)])
    flip[flip == 0] = 1.0
    return TruncatedFactors(
        U=U * flip,
        sigma=np.maximum(s, 0.0),
        V=V * flip,
        iterations=iterations,
        converged=converged,
    )


def project(factors: TruncatedFactors, X) -> np.ndarray:
    """Reduced representation ``X @ V`` (n_rows x k)."""
    X = as_matrix(X)
    if X.shape[1] != factors.V.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[1]} columns, factors expect {factors.V.shape[0]}")
    return X @ factors.V


def reconstruct(factors: TruncatedFactors) -> np.ndarray:
    return (factors.U * factors.sigma) @ factors.V.T


def frobenius_error(A, factors: TruncatedFactors) -> float:
    A = as_matrix(A)
    if A.shape != factors.shape:
        raise DimensionMismatch(f"A is {A.shape}, factors describe {factors.shape}")
    return float(np.linalg.norm(A - reconstruct(factors)))


def singular_values(A, seed: int = 0) -> np.ndarray:
    """Full spectrum of ``A`` (``k = min(m, n)``)."""
    A = as_matrix(A)
    return truncated_svd(A, min(A.shape), seed=seed).sigma


def format_spectrum(sigma) -> str:
    """One singular value per line with 17 significant digits."""
    return "".join(f"{float(v):.17g}\n" for v in sigma)

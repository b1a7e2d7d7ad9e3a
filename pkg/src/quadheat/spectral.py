"""Deterministic eigenstructure of the scalarized form matrix.

For each frequency vector ``lam`` the Hermitian matrix ``A = sum_k lam_k A_k``
is diagonalized by cyclic complex Jacobi rotations.  The output is fully
deterministic: eigenvalues are ordered nonzero-first by descending magnitude
(ties positive-before-negative, then by original position), eigenvector
phases are fixed by making the largest-magnitude entry real positive, and
numerically degenerate clusters are re-orthonormalized in index order.

Coordinates in the eigenbasis split into the rank block z' (nonzero
eigenvalues, ``nu`` of them) and the kernel block z'' where the evolution is
plain Euclidean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericsError
from .quadric import QuadricForm, phi_lambda_matrix

DEFAULT_RANK_TOL_REL = 1e-10
OFFDIAG_TARGET_REL = 1e-14
DEGENERACY_GAP_REL = 1e-8
MAX_SWEEPS = 60


def _offdiag_norm(B: np.ndarray) -> float:
    # Direct sum over off-diagonal entries; the difference-of-squares form
    # |B|^2 - |diag|^2 cancels catastrophically near convergence.
    D = B.copy()
    np.fill_diagonal(D, 0.0)
    return float(np.linalg.norm(D))


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues, orthonormal eigenbasis, and rank at a fixed lambda.

    ``mu[j]`` and column ``V[:, j]`` pair up; ``|mu[j]| > tol`` exactly for
    ``j < nu``.  ``lam`` is the frequency vector the matrix came from (None
    when decomposing a raw matrix).
    """

    mu: np.ndarray
    V: np.ndarray
    nu: int
    tol: float
    lam: np.ndarray | None = None

    def __post_init__(self):
        self.mu.setflags(write=False)
        self.V.setflags(write=False)
        if self.lam is not None:
            self.lam.setflags(write=False)

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    @property
    def m(self) -> int:
        if self.lam is None:
            raise ValueError("SpectralData has no lambda attached")
        return self.lam.shape[0]

    def to_json(self) -> dict:
        out = {
            "mu": [float(x) for x in self.mu],
            "V": [[float(v.real), float(v.imag)] for v in self.V.ravel()],
            "nu": int(self.nu),
            "tol": float(self.tol),
        }
        if self.lam is not None:
            out["lambda"] = [float(x) for x in self.lam]
        return out


@dataclass(frozen=True)
class AdaptedPoint:
    """Coordinates of z in the eigenbasis: zp spans the rank block, zpp the kernel block."""

    zp: np.ndarray
    zpp: np.ndarray

    @property
    def xp(self) -> np.ndarray:
        return self.zp.real

    @property
    def yp(self) -> np.ndarray:
        return self.zp.imag

    @property
    def xpp(self) -> np.ndarray:
        return self.zpp.real

    @property
    def ypp(self) -> np.ndarray:
        return self.zpp.imag


def _jacobi_hermitian(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic complex Jacobi diagonalization of a Hermitian matrix.

    Returns (eigenvalues in residual order, unitary V with A V = V diag).
    Sweeps annihilate every off-diagonal pair in a fixed order until the
    off-diagonal Frobenius norm drops below 1e-14 |A|_F.
    """
    n = A.shape[0]
    B = np.array(A, dtype=complex)
    V = np.eye(n, dtype=complex)
    norm_a = np.linalg.norm(B)
    if n == 1 or norm_a == 0.0:
        return B.diagonal().real.copy(), V
    target = OFFDIAG_TARGET_REL * norm_a
    # Entries this small cannot lift the off-diagonal norm above the target.
    skip = target / (10.0 * n)
    for _ in range(MAX_SWEEPS):
        off = _offdiag_norm(B)
        if off <= target:
            mu = B.diagonal().real.copy()
            return mu, V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = B[p, q]
                r = abs(apq)
                if r <= skip:
                    continue
                phase = apq / r
                tau = (B[q, q].real - B[p, p].real) / (2.0 * r)
                # Small-magnitude root of t^2 - 2 tau t - 1 = 0.
                if tau >= 0.0:
                    t = -1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = 1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # Unitary rotation in the (p, q) plane: columns
                # (c, s e^{-i theta}) and (-s e^{i theta}, c).
                col_p = B[:, p].copy()
                col_q = B[:, q].copy()
                B[:, p] = c * col_p + s * np.conj(phase) * col_q
                B[:, q] = -s * phase * col_p + c * col_q
                row_p = B[p, :].copy()
                row_q = B[q, :].copy()
                B[p, :] = c * row_p + s * phase * row_q
                B[q, :] = -s * np.conj(phase) * row_p + c * row_q
                B[p, q] = 0.0
                B[q, p] = 0.0
                col_p = V[:, p].copy()
                col_q = V[:, q].copy()
                V[:, p] = c * col_p + s * np.conj(phase) * col_q
                V[:, q] = -s * phase * col_p + c * col_q
    off = _offdiag_norm(B)
    raise NumericsError(
        f"Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps "
        f"(off-diagonal residual {off:.3e}, target {target:.3e})"
    )


def rank_nu(mu, tol: float) -> int:
    """Number of eigenvalues with |mu_j| > tol."""
    mu = np.asarray(mu, dtype=float)
    return int(np.count_nonzero(np.abs(mu) > tol))


def _canonical_order(mu: np.ndarray, tol: float) -> np.ndarray:
    """Permutation: nonzero block by descending |mu| (ties positive first,
    then original index), zero block last in original index order."""
    idx = np.arange(mu.shape[0])
    nonzero = [j for j in idx if abs(mu[j]) > tol]
    zero = [j for j in idx if abs(mu[j]) <= tol]
    nonzero.sort(key=lambda j: (-abs(mu[j]), 0 if mu[j] > 0 else 1, j))
    return np.array(nonzero + zero, dtype=int)


def _fix_phases(V: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive."""
    out = V.copy()
    for j in range(out.shape[1]):
        k = int(np.argmax(np.abs(out[:, j])))
        pivot = out[k, j]
        if abs(pivot) > 0.0:
            out[:, j] *= np.conj(pivot) / abs(pivot)
    return out


def _gram_schmidt_clusters(mu: np.ndarray, V: np.ndarray, gap: float) -> np.ndarray:
    """Re-orthonormalize columns inside numerically degenerate eigenvalue
    clusters, in index order (modified Gram-Schmidt)."""
    out = V.copy()
    n = mu.shape[0]
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and abs(mu[stop] - mu[stop - 1]) < gap:
            stop += 1
        if stop - start > 1:
            for j in range(start, stop):
                for i in range(start, j):
                    out[:, j] -= np.vdot(out[:, i], out[:, j]) * out[:, i]
                out[:, j] /= np.linalg.norm(out[:, j])
        start = stop
    return out


def eigendecompose(A, tol_rel: float = DEFAULT_RANK_TOL_REL, lam=None) -> SpectralData:
    """Diagonalize a Hermitian matrix into canonical SpectralData.

    ``tol_rel`` scales the rank cut: eigenvalues with magnitude at most
    ``tol_rel * max(1, |A|_F)`` count as the kernel block.  Raises
    NumericsError if the Jacobi sweeps fail to converge.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    mu_raw, V_raw = _jacobi_hermitian(A)
    tol = tol_rel * max(1.0, np.linalg.norm(A))
    order = _canonical_order(mu_raw, tol)
    mu = mu_raw[order]
    V = V_raw[:, order]
    gap = DEGENERACY_GAP_REL * max(1.0, np.linalg.norm(A))
    V = _gram_schmidt_clusters(mu, V, gap)
    V = _fix_phases(V)
    nu = rank_nu(mu, tol)
    lam_arr = None if lam is None else np.asarray(lam, dtype=float).reshape(-1).copy()
    return SpectralData(mu=mu, V=V, nu=nu, tol=float(tol), lam=lam_arr)


def decompose_form(Q: QuadricForm, lam, tol_rel: float = DEFAULT_RANK_TOL_REL) -> SpectralData:
    """Eigendecompose the matrix of ``phi . lam``, remembering lambda."""
    return eigendecompose(phi_lambda_matrix(Q, lam), tol_rel=tol_rel, lam=lam)


def to_adapted(S: SpectralData, z) -> AdaptedPoint:
    """Coefficients c = V^H z split into the rank and kernel blocks."""
    z = np.asarray(z, dtype=complex).reshape(-1)
    if z.shape != (S.n,):
        raise ValueError(f"z must have length n={S.n}, got {z.shape[0]}")
    c = S.V.conj().T @ z
    return AdaptedPoint(zp=c[: S.nu], zpp=c[S.nu :])


def from_adapted(S: SpectralData, p: AdaptedPoint) -> np.ndarray:
    """Reassemble z = V c from adapted coordinates."""
    c = np.concatenate([p.zp, p.zpp])
    return S.V @ c

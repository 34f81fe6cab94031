"""Exact Dynamic Mode Decomposition on snapshot matrices.

Given snapshots X with columns x_1 .. x_M, the shifted pair X_a (columns
1..M-1) and X_b (columns 2..M) define a best-fit linear propagator. A thin
SVD X_a ~ Q Sigma B^H reduces it to the J x J operator

    C~ = Q^H X_b B Sigma^-1

whose eigendecomposition C~ = T Omega T^-1 yields the DMD eigenvalues; the
exact dynamic modes are Phi = X_b B Sigma^-1 T. Amplitudes are the least
squares fit of Phi b = x_1, and the low-rank / sparse split collects the
modes whose continuous frequency omega = log(lambda)/dt sits inside a small
threshold around zero (the stationary background) against everything else.
"""

from dataclasses import dataclass

import numpy as np

from .color_flow import SnapshotMatrix

# Singular values below this fraction of sigma_1 are treated as numerically
# zero: truncated, never inverted.
_SIGMA_RTOL = 1e-12


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD factors X ~ Q diag(sigma) B^T.

    rank is the achieved truncation rank; rank_deficient is set when the
    requested rank exceeded the numerical rank and was reduced.
    """

    Q: np.ndarray
    sigma: np.ndarray
    B: np.ndarray
    rank: int
    rank_deficient: bool


@dataclass(frozen=True)
class DmdResult:
    """DMD spectrum of one snapshot set.

    eigenvalues are discrete-time lambda sorted by descending magnitude with
    ties broken by ascending phase; modes columns have unit 2-norm, their
    scale absorbed into amplitudes. J is the achieved rank (at most the
    requested one), dt the pseudo-time step.
    """

    J: int
    eigenvalues: np.ndarray
    modes: np.ndarray
    amplitudes: np.ndarray
    svd: SvdFactors
    dt: float = 1.0


@dataclass(frozen=True)
class LowRankSparsePair:
    """Background (low-rank) and residual (sparse) parts of a snapshot set.

    S = X - Re(L) by construction, so lowrank + sparse always reproduces X
    exactly. has_background is False when no mode fell inside the frequency
    threshold, in which case L = 0 and S = X.
    """

    lowrank: np.ndarray
    sparse: np.ndarray
    eps: float
    background: np.ndarray
    has_background: bool


def _as_matrix(snapshots):
    if isinstance(snapshots, SnapshotMatrix):
        return snapshots.data
    arr = np.asarray(snapshots, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"snapshots must be a 2-D matrix, got shape {arr.shape}")
    return arr


def thin_svd(X, J):
    """Rank-J thin SVD of X.

    Returns the J largest singular triplets; if the numerical rank of X is
    below J, returns the achievable rank instead and sets rank_deficient
    (zero singular directions are never fabricated).

    Parameters
    ----------
    X : (N, M) real matrix, not all zero
    J : requested rank, 1 <= J <= min(N, M)

    Returns
    -------
    SvdFactors
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    if not np.any(X):
        raise ValueError("thin_svd of an all-zero matrix is undefined")
    if not 1 <= J <= min(X.shape):
        raise ValueError(f"rank J={J} outside [1, {min(X.shape)}] for shape {X.shape}")
    Q, sigma, Bh = np.linalg.svd(X, full_matrices=False)
    numerical_rank = int((sigma > _SIGMA_RTOL * sigma[0]).sum())
    rank = min(J, numerical_rank)
    return SvdFactors(
        Q=Q[:, :rank],
        sigma=sigma[:rank],
        B=Bh[:rank].conj().T,
        rank=rank,
        rank_deficient=rank < J,
    )


def dmd(snapshots, J):
    """Run exact DMD at truncation rank J.

    Parameters
    ----------
    snapshots : SnapshotMatrix or (N, M) array with M >= 2 columns
    J : requested rank, 1 <= J <= min(N, M - 1)

    Returns
    -------
    DmdResult
    """
    X = _as_matrix(snapshots)
    N, M = X.shape
    if M < 2:
        raise ValueError(f"DMD needs at least 2 snapshots, got M={M}")
    if not 1 <= J <= min(N, M - 1):
        raise ValueError(f"rank J={J} outside [1, {min(N, M - 1)}] for {N}x{M} snapshots")
    Xa = X[:, :-1]
    Xb = X[:, 1:]
    svd = thin_svd(Xa, J)
    Q, sigma, B = svd.Q, svd.sigma, svd.B
    # Right-multiplying by diag(1/sigma) is a column scaling.
    XbBSinv = Xb @ B / sigma
    C = Q.conj().T @ XbBSinv
    eigenvalues, T = np.linalg.eig(C)
    # eig of a real matrix returns a real array when the spectrum is real;
    # keep lambda complex so log(lambda) stays on the principal branch.
    eigenvalues = eigenvalues.astype(complex)
    modes = XbBSinv.astype(complex) @ T.astype(complex)
    norms = np.linalg.norm(modes, axis=0)
    norms[norms == 0.0] = 1.0
    modes = modes / norms
    order = np.lexsort((np.angle(eigenvalues), -np.abs(eigenvalues)))
    eigenvalues = eigenvalues[order]
    modes = modes[:, order]
    amplitudes, *_ = np.linalg.lstsq(modes, X[:, 0].astype(complex), rcond=None)
    return DmdResult(
        J=svd.rank,
        eigenvalues=eigenvalues,
        modes=modes,
        amplitudes=amplitudes,
        svd=svd,
    )


def reconstruct(result, t):
    """State at pseudo-time t from the DMD spectrum.

    Returns the complex N-vector Phi diag(amplitudes) lambda^t; at t = 0 this
    approximates the first snapshot up to the rank-truncation residual.
    """
    if t < 0:
        raise ValueError(f"pseudo-time must be non-negative, got {t}")
    return result.modes @ (result.amplitudes * result.eigenvalues ** t)


def lowrank_sparse_split(result, snapshots, eps=1e-2):
    """Split snapshots into background (low-rank) and residual (sparse) parts.

    Modes with |omega| = |log(lambda)/dt| below eps are near-stationary and
    form the background L; the sparse part is defined as S = X - Re(L), so
    L + S = X holds exactly. With no background mode, L = 0 and S = X, with
    has_background set to False.

    Parameters
    ----------
    result : DmdResult
    snapshots : SnapshotMatrix or (N, M) array the result came from
    eps : positive frequency threshold (default 1e-2)

    Returns
    -------
    LowRankSparsePair
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    X = _as_matrix(snapshots)
    M = X.shape[1]
    lam = result.eigenvalues
    # log(0) = -inf: a fully decayed transient has |omega| = inf, never
    # background.
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = np.log(lam) / result.dt
        absomega = np.abs(omega)
    absomega = np.where(np.isfinite(absomega), absomega, np.inf)
    background = np.flatnonzero(absomega < eps)
    if background.size == 0:
        lowrank = np.zeros_like(X)
    else:
        powers = lam[background, None] ** np.arange(M)[None, :]
        lowrank = np.real(
            result.modes[:, background] @ (result.amplitudes[background, None] * powers)
        )
    sparse = X - lowrank
    return LowRankSparsePair(
        lowrank=lowrank,
        sparse=sparse,
        eps=eps,
        background=background,
        has_background=background.size > 0,
    )


def spectrum_rows(result):
    """Per-mode spectrum table for CSV export.

    One row per mode, in the result's eigenvalue order:
    (mode_index, re_lambda, im_lambda, abs_lambda, abs_omega, amplitude_abs).
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = np.log(result.eigenvalues) / result.dt
        absomega = np.abs(omega)
    absomega = np.where(np.isfinite(absomega), absomega, np.inf)
    rows = []
    for j, lam in enumerate(result.eigenvalues):
        rows.append((
            j,
            float(lam.real),
            float(lam.imag),
            float(abs(lam)),
            float(absomega[j]),
            float(abs(result.amplitudes[j])),
        ))
    return rows

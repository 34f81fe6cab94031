"""Random Kitchen Sinks explicit feature map for the Gaussian kernel.

Frequencies Omega_1 .. Omega_k are sampled i.i.d. from N(0, sigma^-2 I) and
the explicit map

    z(x) = sqrt(1/k) [cos(x'Omega_1) .. cos(x'Omega_k),
                      sin(x'Omega_1) .. sin(x'Omega_k)]

satisfies z(x)'z(y) ~ exp(-||x - y||^2 / (2 sigma^2)) with ||z(x)|| = 1
exactly. Sampling uses a counter-based generator (Philox) so a map is
reconstructible bit-exactly from its (seed, k, sigma, d) tuple alone.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RffMap:
    """Sampled frequency matrix omega (d x k) plus its generating tuple."""

    omega: np.ndarray
    k: int
    sigma: float
    seed: int

    @property
    def d(self):
        return self.omega.shape[0]


def sample_map(seed, k, sigma, d):
    """Sample a random Fourier feature map.

    Parameters
    ----------
    seed : RNG seed; same (seed, k, sigma, d) always yields the same map
    k : number of frequency columns (output dimension is 2k)
    sigma : kernel bandwidth in input units, > 0
    d : input dimension

    Returns
    -------
    RffMap
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    gen = np.random.Generator(np.random.Philox(seed))
    omega = gen.normal(0.0, 1.0 / sigma, size=(d, k))
    return RffMap(omega=omega, k=k, sigma=float(sigma), seed=seed)


def transform(rmap, x):
    """Apply the explicit map z to one vector or a batch of rows.

    Parameters
    ----------
    rmap : RffMap
    x : (d,) vector or (n, d) matrix

    Returns
    -------
    (2k,) or (n, 2k) array: the cos block followed by the sin block
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != rmap.d:
        raise ValueError(f"input dimension {x.shape[-1]} does not match map dimension {rmap.d}")
    proj = x @ rmap.omega
    scale = np.sqrt(1.0 / rmap.k)
    return scale * np.concatenate([np.cos(proj), np.sin(proj)], axis=-1)


def median_bandwidth(X, max_samples=256):
    """Median pairwise distance of a leading subset of X (the median heuristic).

    Falls back to 1.0 when the subset collapses to a single point.
    """
    X = np.asarray(X, dtype=np.float64)
    sub = X[:max_samples]
    sq = (sub * sub).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (sub @ sub.T)
    iu = np.triu_indices(len(sub), k=1)
    dist = np.sqrt(np.maximum(d2[iu], 0.0))
    med = float(np.median(dist)) if dist.size else 0.0
    return med if med > 0.0 else 1.0

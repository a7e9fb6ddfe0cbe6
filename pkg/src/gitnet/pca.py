"""PCA function bases: fitting, coefficient encoding, reconstruction.

A basis holds the sample mean together with orthonormal component
functions (rows) obtained from the SVD of the centered snapshot matrix.
Encoding a function means orthogonal projection onto those components;
decoding is the linear combination plus the mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeError, randomized_svd, tally

DEFAULT_ENERGY_THRESHOLD = 0.99999
DEFAULT_P_CAP = 200

# above this many matrix elements the centered SVD switches to the randomized path
RANDOMIZED_SVD_CUTOFF = 4 * 10**6


@dataclass
class PcaBasis:
    """Truncated orthonormal basis of discretized functions.

    components has shape (P, N) with orthonormal rows; mean has shape (N,).
    """

    n_points: int
    mean: np.ndarray
    components: np.ndarray
    singular_values: np.ndarray
    energy_threshold: float = DEFAULT_ENERGY_THRESHOLD
    p_cap: int = DEFAULT_P_CAP
    degenerate: bool = False
    centered: bool = True
    all_singular_values: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_components(self):
        return self.components.shape[0]


def fit_pca(samples, energy_threshold=DEFAULT_ENERGY_THRESHOLD,
            p_cap=DEFAULT_P_CAP, seed=0, center=True):
    """Fit a PCA basis to a (M, N) matrix of M sampled functions.

    The truncation order P is the smallest p whose squared singular
    values retain ``energy_threshold`` of the total energy, capped at
    ``p_cap`` and floored at 1. Zero-variance data yields a flagged
    degenerate basis with an arbitrary unit component.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise ShapeError(f"samples must be (M, N), got shape {samples.shape}")
    n_samples, n_points = samples.shape
    if n_samples < 2:
        raise ValueError(f"need at least 2 samples to fit a basis, got {n_samples}")
    if not (0.0 < energy_threshold <= 1.0):
        raise ValueError(f"energy_threshold must be in (0, 1], got {energy_threshold}")
    if p_cap < 1:
        raise ValueError(f"p_cap must be >= 1, got {p_cap}")

    mean = samples.mean(axis=0) if center else np.zeros(n_points)
    centered = samples - mean

    total_energy = float(np.sum(centered * centered))
    if total_energy == 0.0:
        component = np.zeros((1, n_points))
        component[0, 0] = 1.0
        return PcaBasis(
            n_points=n_points,
            mean=mean,
            components=component,
            singular_values=np.zeros(1),
            energy_threshold=energy_threshold,
            p_cap=p_cap,
            degenerate=True,
            centered=center,
            all_singular_values=np.zeros(1),
        )

    max_rank = min(n_samples, n_points)
    if centered.size > RANDOMIZED_SVD_CUTOFF:
        rank = min(p_cap, max_rank)
        oversample = min(10, max_rank - rank)
        _, s, vt = randomized_svd(
            centered, rank=rank, oversample=oversample, power_iters=2, seed=seed
        )
        all_s = s
    else:
        _, s, vt = np.linalg.svd(centered, full_matrices=False)
        all_s = s

    energies = s * s
    cumulative = np.cumsum(energies)
    target = energy_threshold * total_energy
    reached = np.nonzero(cumulative >= target * (1.0 - 1e-12))[0]
    p = int(reached[0]) + 1 if reached.size else len(s)
    p = max(1, min(p, p_cap, len(s)))

    return PcaBasis(
        n_points=n_points,
        mean=mean,
        components=vt[:p].copy(),
        singular_values=s[:p].copy(),
        energy_threshold=energy_threshold,
        p_cap=p_cap,
        degenerate=False,
        centered=center,
        all_singular_values=all_s.copy(),
    )


def encode(basis, f):
    """Project functions (d, N) onto the basis, returning coefficients (d, P)."""
    f = np.asarray(f, dtype=np.float64)
    squeeze = f.ndim == 1
    if squeeze:
        f = f[None, :]
    if f.shape[-1] != basis.n_points:
        raise ShapeError(
            f"encode: function has {f.shape[-1]} points, basis has {basis.n_points}"
        )
    tally(2 * int(np.prod(f.shape[:-1])) * basis.n_points * basis.n_components)
    coeffs = (f - basis.mean) @ basis.components.T
    return coeffs[0] if squeeze else coeffs


def decode(basis, coeffs):
    """Reconstruct functions (d, N) from coefficients (d, P)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    squeeze = coeffs.ndim == 1
    if squeeze:
        coeffs = coeffs[None, :]
    if coeffs.shape[-1] != basis.n_components:
        raise ShapeError(
            f"decode: got {coeffs.shape[-1]} coefficients, basis has "
            f"{basis.n_components} components"
        )
    tally(2 * int(np.prod(coeffs.shape[:-1])) * basis.n_components * basis.n_points)
    f = coeffs @ basis.components + basis.mean
    return f[0] if squeeze else f

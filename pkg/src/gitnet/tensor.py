"""Dense linear-algebra kernels and elementwise nonlinearities.

Everything operates on float64 numpy arrays. Kernels optionally tally
floating-point operations into an active :class:`FlopCounter` (see
:func:`count_flops`); the counting convention is one flop per real
multiply or add, so a multiply-add pair costs 2.
"""

from __future__ import annotations

import contextlib
import contextvars
import math

import numpy as np
from scipy.special import erf


class ShapeError(ValueError):
    """Raised when operand shapes do not conform."""


_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# flops charged per element for the erf-based GELU (declared budget, not measured)
GELU_FLOPS_PER_ELEMENT = 15
RELU_FLOPS_PER_ELEMENT = 1


class FlopCounter:
    """Accumulates flop counts for one evaluation context."""

    def __init__(self):
        self.total = 0

    def add(self, n):
        self.total += int(n)


_active_counter: contextvars.ContextVar[FlopCounter | None] = contextvars.ContextVar(
    "gitnet_flop_counter", default=None
)


@contextlib.contextmanager
def count_flops():
    """Context manager enabling flop instrumentation; yields the counter."""
    counter = FlopCounter()
    token = _active_counter.set(counter)
    try:
        yield counter
    finally:
        _active_counter.reset(token)


def tally(n):
    """Charge ``n`` flops to the active counter, if any."""
    counter = _active_counter.get()
    if counter is not None:
        counter.add(n)


def _as_matrix(x, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"{name} must be 2-dimensional, got shape {x.shape}")
    return x


def matmul(a, b):
    """Matrix product with shape checking and flop tallying.

    Backed by BLAS; per-element reductions may be blocked, so exact
    agreement with a strictly ascending-index summation is only
    guaranteed to relative 1e-12.
    """
    a = _as_matrix(a, "left operand")
    b = _as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul shape mismatch: {a.shape} x {b.shape} (inner extents differ)"
        )
    tally(2 * a.shape[0] * a.shape[1] * b.shape[1])
    return a @ b


def norm_cdf(x):
    """Standard normal CDF via the error function."""
    return 0.5 * (1.0 + erf(np.asarray(x, dtype=np.float64) / _SQRT2))


def norm_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=np.float64)
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def gelu(x):
    """Elementwise x * Phi(x), exact erf formulation."""
    x = np.asarray(x, dtype=np.float64)
    tally(GELU_FLOPS_PER_ELEMENT * x.size)
    return x * norm_cdf(x)


def gelu_grad(x):
    """Derivative of gelu: Phi(x) + x * phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    return norm_cdf(x) + x * norm_pdf(x)


def relu(x):
    x = np.asarray(x, dtype=np.float64)
    tally(RELU_FLOPS_PER_ELEMENT * x.size)
    return np.maximum(x, 0.0)


def relu_grad(x):
    x = np.asarray(x, dtype=np.float64)
    return (x > 0.0).astype(np.float64)


# Activation registry used by the network layers: (function, derivative, flops/element).
ACTIVATIONS = {
    "gelu": (gelu, gelu_grad, GELU_FLOPS_PER_ELEMENT),
    "relu": (relu, relu_grad, RELU_FLOPS_PER_ELEMENT),
    "identity": (lambda x: x, lambda x: np.ones_like(x), 0),
}

DENSE_SVD_MAX_ELEMENTS = 10**6


def dense_svd(m):
    """Full SVD of a small dense matrix; serves as the exact oracle.

    Guarded to m*n <= 1e6 elements to prevent misuse at scale.
    """
    m = _as_matrix(m, "matrix")
    if m.size > DENSE_SVD_MAX_ELEMENTS:
        raise ShapeError(
            f"dense_svd limited to {DENSE_SVD_MAX_ELEMENTS} elements, got {m.size}"
        )
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return u, s, vt


def randomized_svd(m, rank, oversample=10, power_iters=2, seed=0):
    """Randomized truncated SVD (Gaussian sketch + power iterations).

    Returns (U, S, Vt) with U: (m, rank) orthonormal columns, S
    nonincreasing, Vt: (rank, n) orthonormal rows. Deterministic in
    ``seed``.
    """
    m = _as_matrix(m, "matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("randomized_svd: input contains non-finite entries")
    n_rows, n_cols = m.shape
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if rank + oversample > min(n_rows, n_cols):
        raise ShapeError(
            f"rank + oversample = {rank + oversample} exceeds min{m.shape}"
        )
    rng = np.random.default_rng(seed)
    sketch = rng.standard_normal((n_cols, rank + oversample))
    y = m @ sketch
    q, _ = np.linalg.qr(y)
    for _ in range(power_iters):
        z, _ = np.linalg.qr(m.T @ q)
        q, _ = np.linalg.qr(m @ z)
    b = q.T @ m
    ub, s, vt = np.linalg.svd(b, full_matrices=False)
    u = q @ ub
    return u[:, :rank], s[:rank], vt[:rank, :]

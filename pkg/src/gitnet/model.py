"""Network forward passes: integral-transform layers, lifting/projection,
the composed operator, and the PCA-coefficient MLP baseline.

All parameters are plain float64 arrays; forward passes are pure. The
layer map on a coefficient array ``a`` of shape (C, K) is

    standard:      act(T @ a + hybrid_product(a @ P, D) @ Q)
    pre_residual:  T @ a + act(hybrid_product(a @ P, D) @ Q)

where the hybrid product mixes channels independently per frequency
column. Gradients live in :mod:`gitnet.grad`.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from . import pca
from .tensor import ACTIVATIONS, ShapeError, tally

VARIANTS = ("standard", "pre_residual")


@dataclass
class GitLayerParams:
    """One layer: channel skip T (C,C), basis changes P,Q (K,K), mixer D (C,C,K)."""

    T: np.ndarray
    P: np.ndarray
    D: np.ndarray
    Q: np.ndarray
    activation: str = "gelu"


@dataclass
class GitNetParams:
    """Full operator: lift, ordered layers, projection, and shape metadata."""

    d_in: int
    d_out: int
    P_u: int
    P_v: int
    C: int
    K: int
    L_up: np.ndarray
    R_up: np.ndarray
    layers: list[GitLayerParams]
    L_down: np.ndarray
    R_down: np.ndarray
    variant: str = "standard"

    @property
    def n_layers(self):
        return len(self.layers)

    def copy(self):
        return copy.deepcopy(self)


def hybrid_product(alpha, D):
    """Frequency-wise channel mixing: out[c,k] = sum_d D[d,c,k] * alpha[d,k].

    Accepts a single (C, K) array or a batch (B, C, K).
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 3 or D.shape[0] != D.shape[1]:
        raise ShapeError(f"mixer tensor must be (C, C, K), got {D.shape}")
    c, k = D.shape[1], D.shape[2]
    if alpha.shape[-2:] != (c, k):
        raise ShapeError(
            f"hybrid_product: coefficients {alpha.shape} do not match mixer {D.shape}"
        )
    batch = int(np.prod(alpha.shape[:-2])) if alpha.ndim > 2 else 1
    tally(2 * batch * c * c * k)
    # out[..., c, k] = sum_d D[d, c, k] * alpha[..., d, k]
    return np.einsum("dck,...dk->...ck", D, alpha)


def _apply_layer(layer, alpha, variant):
    """Batched layer forward; returns (out, cache) with intermediates."""
    act, _, act_flops = ACTIVATIONS[layer.activation]
    c, k = layer.T.shape[0], layer.P.shape[0]
    batch = int(np.prod(alpha.shape[:-2])) if alpha.ndim > 2 else 1
    skew = np.matmul(layer.T, alpha)          # T @ a
    tally(2 * batch * c * c * k)
    checked = np.matmul(alpha, layer.P)       # a @ P
    tally(2 * batch * c * k * k)
    mixed = hybrid_product(checked, layer.D)
    routed = np.matmul(mixed, layer.Q)        # (...) @ Q
    tally(2 * batch * c * k * k)
    if variant == "standard":
        pre = skew + routed
        tally(batch * c * k)
        out = pre if layer.activation == "identity" else act(pre)
        cache = (alpha, checked, mixed, pre)
    elif variant == "pre_residual":
        inner = routed if layer.activation == "identity" else act(routed)
        out = skew + inner
        tally(batch * c * k)
        cache = (alpha, checked, mixed, routed)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return out, cache


def git_layer_forward(layer, alpha, variant="standard"):
    """Apply one layer to coefficients (C, K) or a batch (B, C, K)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    out, _ = _apply_layer(layer, alpha, variant)
    return out


def lift(model, alpha):
    """L_up @ alpha @ R_up, mapping (d_in, P_u) to (C, K). Batched over leading axes."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape[-2:] != (model.d_in, model.P_u):
        raise ShapeError(
            f"lift: expected trailing shape ({model.d_in}, {model.P_u}), "
            f"got {alpha.shape}"
        )
    batch = int(np.prod(alpha.shape[:-2])) if alpha.ndim > 2 else 1
    tally(2 * batch * model.C * model.d_in * model.P_u)
    tally(2 * batch * model.C * model.P_u * model.K)
    return np.matmul(np.matmul(model.L_up, alpha), model.R_up)


def project(model, z):
    """L_down @ z @ R_down, mapping (C, K) to (d_out, P_v). Batched over leading axes."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-2:] != (model.C, model.K):
        raise ShapeError(
            f"project: expected trailing shape ({model.C}, {model.K}), got {z.shape}"
        )
    batch = int(np.prod(z.shape[:-2])) if z.ndim > 2 else 1
    tally(2 * batch * model.d_out * model.C * model.K)
    tally(2 * batch * model.d_out * model.K * model.P_v)
    return np.matmul(np.matmul(model.L_down, z), model.R_down)


def gitnet_forward(model, basis_u, basis_v, f):
    """Evaluate the operator on one input function (d_in, N_u) -> (d_out, N_v)."""
    f = np.asarray(f, dtype=np.float64)
    coeffs = pca.encode(basis_u, f)
    z = lift(model, coeffs)
    for layer in model.layers:
        z, _ = _apply_layer(layer, z, model.variant)
    out_coeffs = project(model, z)
    return pca.decode(basis_v, out_coeffs)


def param_count_layer(C, K):
    """Scalar parameters of one layer: 2K^2 (P, Q) + KC^2 (D) + C^2 (T)."""
    return 2 * K * K + K * C * C + C * C


def param_count_total(d_in, d_out, P_u, P_v, C, K, L):
    return C * d_in + P_u * K + L * param_count_layer(C, K) + d_out * C + K * P_v


def _glorot(rng, shape, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_params(d_in, d_out, P_u, P_v, C, K, L, variant="standard", seed=0,
                activation="gelu"):
    """Glorot-uniform initialization; the last layer always gets identity activation.

    The mixer D is initialized per frequency slice, each (C, C) slab
    drawn with fans (C, C) so every frequency starts at comparable scale.
    """
    if min(d_in, d_out, P_u, P_v, C, K, L) < 1:
        raise ValueError("all architecture counts must be >= 1")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    rng = np.random.default_rng(seed)
    L_up = _glorot(rng, (C, d_in), d_in, C)
    R_up = _glorot(rng, (P_u, K), P_u, K)
    layers = []
    for index in range(L):
        T = _glorot(rng, (C, C), C, C)
        P = _glorot(rng, (K, K), K, K)
        D = np.empty((C, C, K))
        for k in range(K):
            D[:, :, k] = _glorot(rng, (C, C), C, C)
        Q = _glorot(rng, (K, K), K, K)
        act = "identity" if index == L - 1 else activation
        layers.append(GitLayerParams(T=T, P=P, D=D, Q=Q, activation=act))
    L_down = _glorot(rng, (d_out, C), C, d_out)
    R_down = _glorot(rng, (K, P_v), K, P_v)
    return GitNetParams(
        d_in=d_in, d_out=d_out, P_u=P_u, P_v=P_v, C=C, K=K,
        L_up=L_up, R_up=R_up, layers=layers, L_down=L_down, R_down=R_down,
        variant=variant,
    )


def param_arrays(model):
    """Parameter arrays in the fixed order L_up, R_up, (T, P, D, Q) per layer,
    L_down, R_down."""
    arrays = [model.L_up, model.R_up]
    for layer in model.layers:
        arrays.extend([layer.T, layer.P, layer.D, layer.Q])
    arrays.extend([model.L_down, model.R_down])
    return arrays


@dataclass
class PcaNetParams:
    """MLP on flattened PCA coefficients: the baseline architecture."""

    d_in: int
    d_out: int
    P_u: int
    P_v: int
    widths: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"

    def copy(self):
        return copy.deepcopy(self)


def init_pcanet(d_in, d_out, P_u, P_v, hidden_width, n_hidden=4, seed=0,
                activation="relu"):
    """Build an MLP chain d_in*P_u -> hidden_width (x n_hidden) -> d_out*P_v."""
    widths = [d_in * P_u] + [hidden_width] * n_hidden + [d_out * P_v]
    rng = np.random.default_rng(seed)
    weights = [
        _glorot(rng, (widths[i], widths[i + 1]), widths[i], widths[i + 1])
        for i in range(len(widths) - 1)
    ]
    biases = [np.zeros(widths[i + 1]) for i in range(len(widths) - 1)]
    return PcaNetParams(
        d_in=d_in, d_out=d_out, P_u=P_u, P_v=P_v, widths=widths,
        weights=weights, biases=biases, activation=activation,
    )


def pcanet_apply(model, coeffs):
    """Run the MLP on flattened coefficients; batched over leading axis.

    Returns (out_coeffs, caches) where caches holds per-layer inputs and
    pre-activations for backpropagation.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    squeeze = coeffs.ndim == 1
    x = coeffs[None, :] if squeeze else coeffs
    act, _, act_flops = ACTIVATIONS[model.activation]
    caches = []
    n_linear = len(model.weights)
    batch = x.shape[0]
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        if x.shape[1] != w.shape[0]:
            raise ShapeError(
                f"pcanet layer {i}: input width {x.shape[1]} != weight rows {w.shape[0]}"
            )
        tally(2 * batch * w.shape[0] * w.shape[1])
        z = x @ w
        z = z + b
        tally(batch * w.shape[1])
        hidden = i < n_linear - 1
        out = act(z) if hidden else z
        caches.append((x, z))
        x = out
    return (x[0] if squeeze else x), caches


def pcanet_forward(model, basis_u, basis_v, f):
    """Evaluate the baseline on one input function (d_in, N_u) -> (d_out, N_v)."""
    f = np.asarray(f, dtype=np.float64)
    coeffs = pca.encode(basis_u, f).reshape(-1)
    out, _ = pcanet_apply(model, coeffs)
    return pca.decode(basis_v, out.reshape(model.d_out, model.P_v))


def pcanet_param_arrays(model):
    return list(model.weights) + list(model.biases)

"""Hand-derived reverse-mode gradients for the network and the loss.

The architecture is a fixed composition of five primitive forms
(left-matmul, right-matmul, frequency-wise mixing, elementwise
activation, add), so the adjoints are written out explicitly rather than
going through a generic autodiff tape:

    out = A @ X @ B   ->   dX = A^T @ G @ B^T,  dA = G @ (X B)^T,  dB = (A X)^T @ G
    mixing out[c,k] = sum_d D[d,c,k] a[d,k]
                      ->   da[d,k] = sum_c D[d,c,k] G[c,k],
                           dD[d,c,k] = a[d,k] G[c,k]

Bases are frozen: gradients flow to network parameters only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pca
from .model import _apply_layer, lift, param_arrays, project
from .tensor import ACTIVATIONS, ShapeError


@dataclass
class GradTape:
    """Forward intermediates for one batch: per-layer caches plus the
    encoded input and post-layer state."""

    input_coeffs: np.ndarray      # (B, d_in, P_u)
    lifted: np.ndarray            # (B, C, K)
    layer_caches: list            # per layer: (input, a@P, mixed, pre/routed)
    final_state: np.ndarray       # (B, C, K) output of the last layer


@dataclass
class GitLayerGrads:
    T: np.ndarray
    P: np.ndarray
    D: np.ndarray
    Q: np.ndarray


@dataclass
class GitNetGrads:
    L_up: np.ndarray
    R_up: np.ndarray
    layers: list[GitLayerGrads]
    L_down: np.ndarray
    R_down: np.ndarray


def grad_arrays(grads):
    """Gradient arrays in the same fixed order as model.param_arrays."""
    arrays = [grads.L_up, grads.R_up]
    for layer in grads.layers:
        arrays.extend([layer.T, layer.P, layer.D, layer.Q])
    arrays.extend([grads.L_down, grads.R_down])
    return arrays


def forward_with_tape(model, basis_u, basis_v, f_batch):
    """Batched forward pass caching every intermediate.

    f_batch has shape (B, d_in, N_u); returns (predictions, tape) with
    predictions of shape (B, d_out, N_v), sample-wise identical to
    :func:`gitnet.model.gitnet_forward`.
    """
    f_batch = np.asarray(f_batch, dtype=np.float64)
    if f_batch.ndim != 3:
        raise ShapeError(f"f_batch must be (B, d_in, N_u), got shape {f_batch.shape}")
    coeffs = pca.encode(basis_u, f_batch)
    z = lift(model, coeffs)
    lifted = z
    caches = []
    for layer in model.layers:
        z, cache = _apply_layer(layer, z, model.variant)
        caches.append(cache)
    out_coeffs = project(model, z)
    preds = pca.decode(basis_v, out_coeffs)
    tape = GradTape(
        input_coeffs=coeffs, lifted=lifted, layer_caches=caches, final_state=z
    )
    return preds, tape


def backward(model, basis_v, tape, dloss_dpred):
    """Accumulate parameter gradients from the upstream gradient on the
    predictions (B, d_out, N_v)."""
    g = np.asarray(dloss_dpred, dtype=np.float64)
    if g.shape[0] != tape.input_coeffs.shape[0]:
        raise ShapeError(
            f"upstream gradient batch {g.shape[0]} != tape batch "
            f"{tape.input_coeffs.shape[0]}"
        )
    # decode is linear: pred = beta @ E_v + mean, so d_beta = G @ E_v^T
    g_coeffs = g @ basis_v.components.T                       # (B, d_out, P_v)

    # projection out = L_down @ z @ R_down
    z_final = tape.final_state
    mz = np.matmul(model.L_down, z_final)                     # (B, d_out, K)
    zr = np.matmul(z_final, model.R_down)                     # (B, C, P_v)
    d_R_down = np.einsum("bdk,bdp->kp", mz, g_coeffs)
    d_L_down = np.einsum("bdp,bcp->dc", g_coeffs, zr)
    gz = np.matmul(
        model.L_down.T, np.matmul(g_coeffs, model.R_down.T)
    )                                                         # (B, C, K)

    layer_grads = [None] * len(model.layers)
    for index in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[index]
        a, checked, mixed, stash = tape.layer_caches[index]
        _, act_grad, _ = ACTIVATIONS[layer.activation]
        if model.variant == "standard":
            pre = stash
            g_pre = gz if layer.activation == "identity" else gz * act_grad(pre)
            g_skew = g_pre
            g_routed = g_pre
        else:  # pre_residual: out = T @ a + act(routed)
            routed = stash
            g_skew = gz
            g_routed = gz if layer.activation == "identity" else gz * act_grad(routed)
        d_T = np.einsum("bck,bdk->cd", g_skew, a)
        ga = np.matmul(layer.T.T, g_skew)
        d_Q = np.einsum("bck,bcj->kj", mixed, g_routed)
        g_mixed = np.matmul(g_routed, layer.Q.T)
        d_D = np.einsum("bdk,bck->dck", checked, g_mixed)
        g_checked = np.einsum("dck,bck->bdk", layer.D, g_mixed)
        d_P = np.einsum("bck,bcj->kj", a, g_checked)
        ga = ga + np.matmul(g_checked, layer.P.T)
        layer_grads[index] = GitLayerGrads(T=d_T, P=d_P, D=d_D, Q=d_Q)
        gz = ga

    # lift out = L_up @ alpha @ R_up
    malpha = np.matmul(model.L_up, tape.input_coeffs)         # (B, C, P_u)
    alphar = np.matmul(tape.input_coeffs, model.R_up)         # (B, d_in, K)
    d_R_up = np.einsum("bcp,bck->pk", malpha, gz)
    d_L_up = np.einsum("bck,bdk->cd", gz, alphar)

    return GitNetGrads(
        L_up=d_L_up, R_up=d_R_up, layers=layer_grads,
        L_down=d_L_down, R_down=d_R_down,
    )


def loss_and_grads(model, basis_u, basis_v, f_batch, g_batch, selector="absolute_mse"):
    """Convenience: forward, loss, and parameter gradients in one call."""
    from .train import empirical_loss, loss_gradient

    preds, tape = forward_with_tape(model, basis_u, basis_v, f_batch)
    loss = empirical_loss(preds, g_batch, selector)
    upstream = loss_gradient(preds, g_batch, selector)
    grads = backward(model, basis_v, tape, upstream)
    return loss, grads, preds


def pcanet_loss_and_grads(model, basis_u, basis_v, f_batch, g_batch,
                          selector="absolute_mse"):
    """Forward, loss, and gradients for the MLP baseline.

    Returns (loss, weight_grads + bias_grads, preds) with gradients
    ordered as in :func:`gitnet.model.pcanet_param_arrays`.
    """
    from .model import pcanet_apply
    from .train import empirical_loss, loss_gradient

    f_batch = np.asarray(f_batch, dtype=np.float64)
    batch = f_batch.shape[0]
    coeffs = pca.encode(basis_u, f_batch).reshape(batch, -1)
    out, caches = pcanet_apply(model, coeffs)
    preds = pca.decode(basis_v, out.reshape(batch, model.d_out, model.P_v))
    loss = empirical_loss(preds, g_batch, selector)
    upstream = loss_gradient(preds, g_batch, selector)

    g = (upstream @ basis_v.components.T).reshape(batch, -1)
    _, act_grad, _ = ACTIVATIONS[model.activation]
    n_linear = len(model.weights)
    w_grads = [None] * n_linear
    b_grads = [None] * n_linear
    for i in range(n_linear - 1, -1, -1):
        x, z = caches[i]
        if i < n_linear - 1:
            g = g * act_grad(z)
        w_grads[i] = x.T @ g
        b_grads[i] = g.sum(axis=0)
        g = g @ model.weights[i].T
    return loss, w_grads + b_grads, preds


def finite_diff_check(model, basis_u, basis_v, f_batch, g_batch, h=1e-5,
                      selector="absolute_mse"):
    """Max relative deviation between analytic gradients and central
    finite differences over every scalar parameter.

    The relative denominator is max(|analytic|, |numeric|, 1e-12) to
    avoid 0/0 on dead parameters.
    """
    if not (1e-7 <= h <= 1e-3):
        raise ValueError(f"step h must lie in [1e-7, 1e-3], got {h}")
    from .train import empirical_loss

    _, grads, _ = loss_and_grads(model, basis_u, basis_v, f_batch, g_batch, selector)
    analytic = grad_arrays(grads)
    work = model.copy()
    arrays = param_arrays(work)

    def loss_at():
        preds, _ = forward_with_tape(work, basis_u, basis_v, f_batch)
        return empirical_loss(preds, g_batch, selector)

    max_dev = 0.0
    for arr, grad in zip(arrays, analytic):
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            lp = loss_at()
            flat[i] = original - h
            lm = loss_at()
            flat[i] = original
            numeric = (lp - lm) / (2.0 * h)
            denom = max(abs(gflat[i]), abs(numeric), 1e-12)
            max_dev = max(max_dev, abs(gflat[i] - numeric) / denom)
    return max_dev

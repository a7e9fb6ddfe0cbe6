"""Loss functions, the relative test error metric, Adam, and the
minibatch training loop.

The training loss defaults to the mean of squared Euclidean norms of the
residual functions on mesh values; evaluation uses the mean of norm
ratios (not squared). Optimizer defaults are conventional; the learning
rate decays by 0.5 every ceil(epochs/4) epochs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import grad as gradmod
from . import model as modelmod

LOSS_SELECTORS = ("absolute_mse", "relative")


class NumericError(RuntimeError):
    """Raised when training encounters non-finite values."""


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle: bool = True
    loss: str = "absolute_mse"
    lr_decay: float = 0.5

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr < 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if self.loss not in LOSS_SELECTORS:
            raise ValueError(f"loss must be one of {LOSS_SELECTORS}, got {self.loss!r}")


def _sample_sq_norms(residuals):
    flat = residuals.reshape(residuals.shape[0], -1)
    return np.einsum("ij,ij->i", flat, flat)


def empirical_loss(preds, targets, selector="absolute_mse"):
    """Mean squared residual norm per sample; 'relative' divides each
    sample by its target's squared norm."""
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape:
        raise ValueError(f"shape mismatch: preds {preds.shape}, targets {targets.shape}")
    sq = _sample_sq_norms(preds - targets)
    if selector == "absolute_mse":
        return float(sq.mean())
    if selector == "relative":
        tnorm = _sample_sq_norms(targets)
        zero = np.nonzero(tnorm == 0.0)[0]
        if zero.size:
            raise ValueError(f"relative loss undefined: target {zero[0]} has zero norm")
        return float((sq / tnorm).mean())
    raise ValueError(f"unknown loss selector {selector!r}")


def loss_gradient(preds, targets, selector="absolute_mse"):
    """Gradient of :func:`empirical_loss` with respect to the predictions."""
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n = preds.shape[0]
    residual = preds - targets
    if selector == "absolute_mse":
        return (2.0 / n) * residual
    if selector == "relative":
        tnorm = _sample_sq_norms(targets)
        shape = (n,) + (1,) * (preds.ndim - 1)
        return (2.0 / n) * residual / tnorm.reshape(shape)
    raise ValueError(f"unknown loss selector {selector!r}")


def relative_test_error(outputs, targets):
    """Mean over samples of ||output - target|| / ||target|| (plain norms)."""
    outputs = np.asarray(outputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if outputs.shape != targets.shape:
        raise ValueError(
            f"shape mismatch: outputs {outputs.shape}, targets {targets.shape}"
        )
    return float(per_sample_errors(outputs, targets).mean())


def per_sample_errors(outputs, targets):
    """Per-sample relative errors ||output_i - target_i|| / ||target_i||."""
    outputs = np.asarray(outputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    tnorm = np.sqrt(_sample_sq_norms(targets))
    zero = np.nonzero(tnorm == 0.0)[0]
    if zero.size:
        raise ValueError(f"relative error undefined: target {zero[0]} has zero norm")
    rnorm = np.sqrt(_sample_sq_norms(outputs - targets))
    return rnorm / tnorm


@dataclass
class AdamState:
    """First/second-moment accumulators matching a list of parameter arrays."""

    m: list
    v: list
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(params, grads, state):
    """One Adam update on a list of arrays; returns (new_params, new_state).

    Inputs are not mutated. Aborts on non-finite gradients.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter/gradient/state lists differ in length")
    for i, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter array {i}")
    t = state.t + 1
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        new_params.append(p - update)
        new_m.append(m)
        new_v.append(v)
    new_state = AdamState(
        m=new_m, v=new_v, t=t, lr=state.lr,
        beta1=state.beta1, beta2=state.beta2, eps=state.eps,
    )
    return new_params, new_state


def _set_git_params(model, arrays):
    model.L_up, model.R_up = arrays[0], arrays[1]
    idx = 2
    for layer in model.layers:
        layer.T, layer.P, layer.D, layer.Q = arrays[idx:idx + 4]
        idx += 4
    model.L_down, model.R_down = arrays[idx], arrays[idx + 1]


def _set_pcanet_params(model, arrays):
    n = len(model.weights)
    model.weights = list(arrays[:n])
    model.biases = list(arrays[n:])


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    test_rel_error: list = field(default_factory=list)
    lr: list = field(default_factory=list)


@dataclass
class TrainResult:
    model: object            # final parameters
    best_model: object       # snapshot with smallest test relative error
    best_test_error: float
    history: TrainHistory


def train_loop(model, basis_u, basis_v, train_inputs, train_outputs, cfg,
               test_inputs=None, test_outputs=None):
    """Minibatch Adam training; deterministic in cfg.seed.

    train_inputs: (N, d_in, N_u); train_outputs: (N, d_out, N_v). When a
    test split is supplied the history tracks its relative error per
    epoch and the best snapshot is kept; otherwise those entries are NaN
    and the best snapshot equals the final one.
    """
    train_inputs = np.asarray(train_inputs, dtype=np.float64)
    train_outputs = np.asarray(train_outputs, dtype=np.float64)
    n_train = train_inputs.shape[0]
    if n_train == 0:
        raise ValueError("empty training set")
    is_gitnet = isinstance(model, modelmod.GitNetParams)
    work = model.copy()
    params = (modelmod.param_arrays(work) if is_gitnet
              else modelmod.pcanet_param_arrays(work))
    state = AdamState.for_params(
        params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps
    )
    rng = np.random.default_rng(cfg.seed)
    decay_every = math.ceil(cfg.epochs / 4)
    history = TrainHistory()
    best_err = math.inf
    best_model = None
    have_test = test_inputs is not None and test_outputs is not None

    for epoch in range(cfg.epochs):
        state.lr = cfg.lr * (cfg.lr_decay ** (epoch // decay_every))
        order = rng.permutation(n_train) if cfg.shuffle else np.arange(n_train)
        loss_sum = 0.0
        for start in range(0, n_train, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            fb = train_inputs[batch]
            gb = train_outputs[batch]
            if is_gitnet:
                loss, grads, _ = gradmod.loss_and_grads(
                    work, basis_u, basis_v, fb, gb, cfg.loss
                )
                garrs = gradmod.grad_arrays(grads)
            else:
                loss, garrs, _ = gradmod.pcanet_loss_and_grads(
                    work, basis_u, basis_v, fb, gb, cfg.loss
                )
            if not math.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch starting {start}"
                )
            loss_sum += loss * len(batch)
            params, state = adam_step(params, garrs, state)
            if is_gitnet:
                _set_git_params(work, params)
            else:
                _set_pcanet_params(work, params)
        epoch_loss = loss_sum / n_train
        if have_test:
            preds, _ = _predict_batch(work, basis_u, basis_v, test_inputs, is_gitnet)
            test_err = relative_test_error(preds, test_outputs)
            if test_err < best_err:
                best_err = test_err
                best_model = work.copy()
        else:
            test_err = math.nan
        history.epochs.append(epoch)
        history.train_loss.append(epoch_loss)
        history.test_rel_error.append(test_err)
        history.lr.append(state.lr)

    if best_model is None:
        best_model = work.copy()
        best_err = math.nan
    return TrainResult(
        model=work, best_model=best_model, best_test_error=best_err, history=history
    )


def _predict_batch(model, basis_u, basis_v, inputs, is_gitnet):
    inputs = np.asarray(inputs, dtype=np.float64)
    if is_gitnet:
        preds, tape = gradmod.forward_with_tape(model, basis_u, basis_v, inputs)
        return preds, tape
    from . import pca

    batch = inputs.shape[0]
    coeffs = pca.encode(basis_u, inputs).reshape(batch, -1)
    out, _ = modelmod.pcanet_apply(model, coeffs)
    preds = pca.decode(basis_v, out.reshape(batch, model.d_out, model.P_v))
    return preds, None


def predict(model, basis_u, basis_v, inputs):
    """Batched evaluation of either architecture on (N, d_in, N_u) inputs."""
    is_gitnet = isinstance(model, modelmod.GitNetParams)
    preds, _ = _predict_batch(model, basis_u, basis_v, inputs, is_gitnet)
    return preds

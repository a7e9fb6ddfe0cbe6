"""Scikit-learn style wrappers so the operator models compose with the
wider ecosystem (pipelines, cross-validation, get_params/set_params)."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import model as modelmod, pca, train as trainmod


def _as_functions(x):
    """Coerce (N, n_pts) or (N, d, n_pts) arrays to (N, d, n_pts)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[:, None, :]
    if x.ndim == 3:
        return x
    raise ValueError(f"expected (N, n_pts) or (N, d, n_pts), got shape {x.shape}")


class PcaFunctionBasis(TransformerMixin, BaseEstimator):
    """Transformer exposing the PCA function basis: transform yields
    projection coefficients, inverse_transform reconstructs functions."""

    def __init__(self, energy_threshold=pca.DEFAULT_ENERGY_THRESHOLD,
                 p_cap=pca.DEFAULT_P_CAP, center=True, seed=0):
        self.energy_threshold = energy_threshold
        self.p_cap = p_cap
        self.center = center
        self.seed = seed

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        self.basis_ = pca.fit_pca(X, self.energy_threshold, self.p_cap,
                                  seed=self.seed, center=self.center)
        return self

    def transform(self, X):
        self._check_fitted()
        return pca.encode(self.basis_, np.asarray(X, dtype=np.float64))

    def inverse_transform(self, X):
        self._check_fitted()
        return pca.decode(self.basis_, np.asarray(X, dtype=np.float64))

    def _check_fitted(self):
        if not hasattr(self, "basis_"):
            raise NotFittedError("PcaFunctionBasis is not fitted")


class _OperatorRegressor(BaseEstimator):
    """Shared fit/predict plumbing for both operator architectures."""

    def fit(self, X, y):
        F = _as_functions(X)
        G = _as_functions(y)
        if F.shape[0] != G.shape[0]:
            raise ValueError(
                f"X and y disagree on sample count: {F.shape[0]} vs {G.shape[0]}"
            )
        n, d_in, n_u = F.shape
        _, d_out, n_v = G.shape
        self.basis_u_ = pca.fit_pca(F.reshape(n * d_in, n_u),
                                    self.energy_threshold, self.p_cap, self.seed)
        self.basis_v_ = pca.fit_pca(G.reshape(n * d_out, n_v),
                                    self.energy_threshold, self.p_cap, self.seed)
        net = self._build(d_in, d_out)
        cfg = trainmod.TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size, lr=self.lr,
            seed=self.seed, loss=self.loss,
        )
        result = trainmod.train_loop(net, self.basis_u_, self.basis_v_, F, G, cfg)
        self.model_ = result.model
        self.history_ = result.history
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted")
        F = _as_functions(X)
        preds = trainmod.predict(self.model_, self.basis_u_, self.basis_v_, F)
        return preds[:, 0, :] if preds.shape[1] == 1 else preds

    def score(self, X, y):
        """Negative mean relative error (higher is better)."""
        G = _as_functions(y)
        preds = _as_functions(self.predict(X))
        return -trainmod.relative_test_error(preds, G)


class GitNetRegressor(_OperatorRegressor):
    """Operator regressor built from generalized-integral-transform layers
    acting on PCA coefficients."""

    def __init__(self, C=4, K=16, L=3, variant="standard", activation="gelu",
                 energy_threshold=pca.DEFAULT_ENERGY_THRESHOLD,
                 p_cap=pca.DEFAULT_P_CAP, epochs=100, batch_size=64, lr=1e-3,
                 loss="absolute_mse", seed=0):
        self.C = C
        self.K = K
        self.L = L
        self.variant = variant
        self.activation = activation
        self.energy_threshold = energy_threshold
        self.p_cap = p_cap
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.loss = loss
        self.seed = seed

    def _build(self, d_in, d_out):
        return modelmod.init_params(
            d_in, d_out, self.basis_u_.n_components, self.basis_v_.n_components,
            self.C, self.K, self.L, variant=self.variant, seed=self.seed,
            activation=self.activation,
        )


class PcaNetRegressor(_OperatorRegressor):
    """Baseline regressor: a fully connected network on PCA coefficients."""

    def __init__(self, hidden_width=64, n_hidden=4, activation="relu",
                 energy_threshold=pca.DEFAULT_ENERGY_THRESHOLD,
                 p_cap=pca.DEFAULT_P_CAP, epochs=100, batch_size=64, lr=1e-3,
                 loss="absolute_mse", seed=0):
        self.hidden_width = hidden_width
        self.n_hidden = n_hidden
        self.activation = activation
        self.energy_threshold = energy_threshold
        self.p_cap = p_cap
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.loss = loss
        self.seed = seed

    def _build(self, d_in, d_out):
        return modelmod.init_pcanet(
            d_in, d_out, self.basis_u_.n_components, self.basis_v_.n_components,
            hidden_width=self.hidden_width, n_hidden=self.n_hidden,
            seed=self.seed, activation=self.activation,
        )

"""Gradient-boosted trees on logistic loss, plus logistic and MLP baselines."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import kernels
from .errors import ConfigError, NotFittedError, ValidationError

log = logging.getLogger(__name__)

MODEL_HEADER = "dbg4eth-model v1"


def _as_xy(X, y=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if y is None:
        return X
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValidationError("features and labels differ in length")
    if X.shape[0] < 2:
        raise ValidationError("need at least 2 samples")
    return X, y


def logistic_loss(y, margin) -> float:
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


# -- regression trees --------------------------------------------------------

@dataclass
class Node:
    value: float = 0.0
    feature: int = -1
    threshold: float = 0.0
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_list(self):
        if self.is_leaf:
            return [self.value]
        return [self.feature, self.threshold, self.left.to_list(), self.right.to_list()]

    @classmethod
    def from_list(cls, data) -> "Node":
        if len(data) == 1:
            return cls(value=float(data[0]))
        f, t, l, r = data
        return cls(feature=int(f), threshold=float(t), left=cls.from_list(l), right=cls.from_list(r))


def _predict_node(node: Node, X: np.ndarray) -> np.ndarray:
    if node.is_leaf:
        return np.full(X.shape[0], node.value)
    go_left = X[:, node.feature] <= node.threshold
    out = np.empty(X.shape[0])
    out[go_left] = _predict_node(node.left, X[go_left])
    out[~go_left] = _predict_node(node.right, X[~go_left])
    return out


def _grow(X, g, h, idx, depth, max_depth, reg_lambda, min_leaf, min_hess) -> Node:
    G, H = g[idx].sum(), h[idx].sum()
    leaf = Node(value=float(-G / (H + reg_lambda)))
    if depth >= max_depth or idx.size < 2 * min_leaf:
        return leaf
    best = (0.0, -1, 0.0, None)
    for f in range(X.shape[1]):
        order = idx[np.argsort(X[idx, f], kind="stable")]
        xs = X[order, f]
        gain, n_left = kernels.best_split(xs, g[order], h[order], reg_lambda, min_leaf, min_hess)
        if n_left and gain > best[0]:
            best = (gain, f, 0.5 * (xs[n_left - 1] + xs[n_left]), order[:n_left])
    gain, f, thr, left_idx = best
    if f < 0:
        return leaf
    left_mask = X[idx, f] <= thr
    args = (max_depth, reg_lambda, min_leaf, min_hess)
    return Node(
        value=leaf.value, feature=f, threshold=float(thr),
        left=_grow(X, g, h, idx[left_mask], depth + 1, *args),
        right=_grow(X, g, h, idx[~left_mask], depth + 1, *args),
    )


@dataclass
class BoostedTreeModel:
    """Second-order boosting of depth-limited regression trees on logistic loss."""

    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    min_samples_leaf: int = 1
    min_hessian: float = 1e-3
    bias: float | None = None
    trees: list[Node] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)

    def fit(self, X, y) -> "BoostedTreeModel":
        X, y = _as_xy(X, y)
        self.trees = []
        rate = y.mean()
        if rate in (0.0, 1.0):
            log.warning("single-class labels; fitting a constant model")
            rate = np.clip(rate, 1e-3, 1 - 1e-3)
            self.bias = float(np.log(rate / (1 - rate)))
            self.train_loss = [logistic_loss(y, np.full(y.size, self.bias))]
            return self
        self.bias = float(np.log(rate / (1 - rate)))
        margin = np.full(y.size, self.bias)
        self.train_loss = [logistic_loss(y, margin)]
        idx = np.arange(y.size)
        for _ in range(self.n_trees):
            p = expit(margin)
            g, h = p - y, p * (1 - p)
            tree = _grow(X, g, h, idx, 0, self.max_depth, self.reg_lambda, self.min_samples_leaf, self.min_hessian)
            self.trees.append(tree)
            margin = margin + self.learning_rate * _predict_node(tree, X)
            self.train_loss.append(logistic_loss(y, margin))
        return self

    def decision_function(self, X) -> np.ndarray:
        if self.bias is None:
            raise NotFittedError("BoostedTreeModel is not fitted")
        X = _as_xy(X)
        m = np.full(X.shape[0], self.bias)
        for t in self.trees:
            m += self.learning_rate * _predict_node(t, X)
        return m

    def predict_proba(self, X) -> np.ndarray:
        # clip keeps the probability strictly inside (0, 1) in float64
        return np.clip(expit(self.decision_function(X)), 1e-15, 1 - 1e-15)

    def to_dict(self) -> dict:
        return {"kind": "gbdt", "n_trees": self.n_trees, "max_depth": self.max_depth,
                "learning_rate": self.learning_rate, "reg_lambda": self.reg_lambda,
                "min_samples_leaf": self.min_samples_leaf, "min_hessian": self.min_hessian,
                "bias": self.bias, "trees": [t.to_list() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "BoostedTreeModel":
        m = cls(d["n_trees"], d["max_depth"], d["learning_rate"], d["reg_lambda"],
                d["min_samples_leaf"], d["min_hessian"], d["bias"])
        m.trees = [Node.from_list(t) for t in d["trees"]]
        return m


def fit_classifier(features, labels, **params) -> BoostedTreeModel:
    return BoostedTreeModel(**params).fit(features, labels)


def predict_account(model, features, threshold: float = 0.5):
    """Return ``(probability, class)``; class is 1 iff probability >= threshold."""
    p = np.asarray(model.predict_proba(np.atleast_2d(np.asarray(features, dtype=float))))
    cls = (p >= threshold).astype(int)
    if np.ndim(features) == 1:
        return float(p[0]), int(cls[0])
    return p, cls


# -- baselines ---------------------------------------------------------------

@dataclass
class LogisticModel:
    reg_lambda: float = 1e-4
    coef: np.ndarray | None = None

    def fit(self, X, y) -> "LogisticModel":
        from scipy.optimize import minimize

        X, y = _as_xy(X, y)
        Z = np.column_stack([X, np.ones(len(y))])

        def f(w):
            m = Z @ w
            reg = 0.5 * self.reg_lambda * w[:-1] @ w[:-1]
            grad = Z.T @ (expit(m) - y) / len(y)
            grad[:-1] += self.reg_lambda * w[:-1]
            return logistic_loss(y, m) + reg, grad

        self.coef = minimize(f, np.zeros(Z.shape[1]), jac=True, method="L-BFGS-B").x
        return self

    def predict_proba(self, X) -> np.ndarray:
        if self.coef is None:
            raise NotFittedError("LogisticModel is not fitted")
        X = _as_xy(X)
        return np.clip(expit(X @ self.coef[:-1] + self.coef[-1]), 1e-15, 1 - 1e-15)

    def to_dict(self) -> dict:
        return {"kind": "logistic", "reg_lambda": self.reg_lambda, "coef": self.coef.tolist()}


@dataclass
class MLPModel:
    """One-hidden-layer perceptron trained full-batch with Adam."""

    hidden: int = 16
    epochs: int = 300
    lr: float = 0.01
    seed: int = 0
    state: dict | None = None

    def __post_init__(self):
        if self.hidden < 1:
            raise ConfigError("MLP needs at least one hidden unit")

    def _net(self, n_in):
        import torch

        return torch.nn.Sequential(
            torch.nn.Linear(n_in, self.hidden), torch.nn.ReLU(), torch.nn.Linear(self.hidden, 1)
        ).double()

    def fit(self, X, y) -> "MLPModel":
        import torch

        X, y = _as_xy(X, y)
        torch.manual_seed(self.seed)
        net = self._net(X.shape[1])
        opt = torch.optim.Adam(net.parameters(), lr=self.lr)
        xt, yt = torch.from_numpy(X), torch.from_numpy(y)
        for _ in range(self.epochs):
            opt.zero_grad()
            loss = torch.nn.functional.binary_cross_entropy_with_logits(net(xt).squeeze(-1), yt)
            loss.backward()
            opt.step()
        self.n_in = X.shape[1]
        self.state = {k: v.detach().clone() for k, v in net.state_dict().items()}
        return self

    def predict_proba(self, X) -> np.ndarray:
        import torch

        if self.state is None:
            raise NotFittedError("MLPModel is not fitted")
        X = _as_xy(X)
        net = self._net(X.shape[1])
        net.load_state_dict(self.state)
        with torch.no_grad():
            z = net(torch.from_numpy(X)).squeeze(-1).numpy()
        return np.clip(expit(z), 1e-15, 1 - 1e-15)

    def to_dict(self) -> dict:
        return {"kind": "mlp", "hidden": self.hidden, "epochs": self.epochs, "lr": self.lr, "seed": self.seed,
                "state": {k: v.tolist() for k, v in (self.state or {}).items()}}


def pluggable_baseline(name: str, seed: int = 0, **params):
    if name == "logistic":
        return LogisticModel(**params)
    if name == "mlp":
        return MLPModel(seed=seed, **params)
    raise ConfigError(f"unknown baseline classifier {name!r}; expected 'mlp' or 'logistic'")


def make_classifier(kind: str, seed: int = 0, n_trees=100, max_depth=3, learning_rate=0.1):
    if kind in ("gbdt", "lightgbm", "boosted"):
        return BoostedTreeModel(n_trees=n_trees, max_depth=max_depth, learning_rate=learning_rate)
    return pluggable_baseline(kind, seed=seed)


def model_from_dict(d: dict):
    import torch

    kind = d["kind"]
    if kind == "gbdt":
        return BoostedTreeModel.from_dict(d)
    if kind == "logistic":
        return LogisticModel(d["reg_lambda"], np.asarray(d["coef"]))
    if kind == "mlp":
        m = MLPModel(d["hidden"], d["epochs"], d["lr"], d["seed"])
        m.state = {k: torch.tensor(v, dtype=torch.float64) for k, v in d["state"].items()}
        return m
    raise ConfigError(f"unknown serialized model kind {kind!r}")

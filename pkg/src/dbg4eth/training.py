"""Branch training: Adam over a learning-rate grid with early stopping on validation F1."""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import torch
import torch.nn.functional as F

from .gsg import (
    AugmentationConfig,
    GraphArrays,
    GsgEncoder,
    augment_arrays,
    collate,
    contrastive_loss,
    edge_drop_probabilities,
)
from .ldg import LdgEncoder, SequenceArrays, cluster_schedule, collate_sequences
from .metrics import binary_metrics

log = logging.getLogger(__name__)

DEFAULT_LR_GRID = (0.1, 0.05, 0.01, 0.005, 0.001)


@dataclass
class TrainConfig:
    lr_grid: tuple[float, ...] = DEFAULT_LR_GRID
    epochs: int = 100
    patience: int = 10
    batch_size: int = 32
    seed: int = 0
    weight_decay: float = 0.0


@dataclass
class TrainResult:
    model: torch.nn.Module
    lr: float
    best_epoch: int
    val_f1: float
    val_loss: float
    grid: list[dict] = field(default_factory=list)


def _seed_everything(seed: int) -> None:
    torch.manual_seed(seed)


def _batches(n: int, size: int, rng: np.random.Generator, order: np.ndarray | None = None):
    idx = np.arange(n) if order is None else order
    chunks = [idx[k : k + size] for k in range(0, n, size)]
    for k in rng.permutation(len(chunks)):
        yield chunks[k]


class GsgTrainer:
    """Supervised cross-entropy plus ``lam`` times the two-view contrastive loss."""

    name = "gsg"

    def __init__(self, hidden=128, layers=2, lam=0.5, tau=0.5, aug: AugmentationConfig | None = None):
        self.hidden, self.layers, self.lam, self.tau = hidden, layers, lam, tau
        self.aug = aug or AugmentationConfig()
        self._drop: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def prepare(self, graphs) -> list[GraphArrays]:
        return [g if isinstance(g, GraphArrays) else GraphArrays.from_graph(g) for g in graphs]

    def new_model(self, train_items) -> GsgEncoder:
        m = GsgEncoder(self.hidden, self.layers)
        m.fit_scalers(train_items)
        return m

    def _drop_probs(self, a: GraphArrays):
        key = id(a)
        if key not in self._drop:
            self._drop[key] = tuple(
                edge_drop_probabilities(a.n, a.edge_index, pe, self.aug.centrality)
                for pe in (self.aug.pe1, self.aug.pe2)
            )
        return self._drop[key]

    def train_loss(self, model, items, rng):
        b = collate(items)
        sup = F.binary_cross_entropy_with_logits(model(b), b.y)
        if self.lam == 0.0 or len(items) < 2:
            return sup
        views = []
        for v, pf in ((0, self.aug.pf1), (1, self.aug.pf2)):
            views.append(collate([augment_arrays(a, self._drop_probs(a)[v], pf, rng) for a in items]))
        return sup + self.lam * contrastive_loss(model.embed(views[0]), model.embed(views[1]), self.tau)

    def order(self, items):
        return None

    def logits(self, model, items, batch_size=64) -> np.ndarray:
        model.eval()
        out = []
        with torch.no_grad():
            for k in range(0, len(items), batch_size):
                out.append(model(collate(items[k : k + batch_size])).numpy())
        return np.concatenate(out) if out else np.zeros(0)

    raw_values = logits


class LdgTrainer:
    """Binary cross-entropy on the affine link of the non-negative branch value."""

    name = "ldg"

    def __init__(self, hidden=64, T=10, pool_rate=0.1, pool_levels=2):
        self.hidden, self.T, self.pool_rate, self.pool_levels = hidden, T, pool_rate, pool_levels

    def prepare(self, sequences) -> list[SequenceArrays]:
        return [s if isinstance(s, SequenceArrays) else SequenceArrays.from_sequence(s) for s in sequences]

    def new_model(self, train_items) -> LdgEncoder:
        n_max = max(a.n for a in train_items)
        c = cluster_schedule(n_max, self.pool_rate, self.pool_levels)[0] if self.pool_levels > 1 else 1
        m = LdgEncoder(self.hidden, self.T, self.pool_rate, self.pool_levels, max_clusters=c)
        m.fit_scalers(train_items)
        return m

    def train_loss(self, model, items, rng):
        b = collate_sequences(items)
        return F.binary_cross_entropy_with_logits(model.logit(model(b)), b.y)

    def order(self, items):
        # bucket by size so padding stays small
        return np.argsort([a.n for a in items], kind="stable")

    def _run(self, model, items, fn, batch_size=32):
        model.eval()
        order = self.order(items)
        out = np.zeros(len(items))
        with torch.no_grad():
            for k in range(0, len(items), batch_size):
                idx = order[k : k + batch_size]
                out[idx] = fn(model, collate_sequences([items[i] for i in idx])).numpy()
        return out

    def raw_values(self, model, items) -> np.ndarray:
        return self._run(model, items, lambda m, b: m(b))

    def logits(self, model, items) -> np.ndarray:
        return self._run(model, items, lambda m, b: m.logit(m(b)))


def _evaluate(trainer, model, items) -> tuple[float, float]:
    z = trainer.logits(model, items)
    y = np.array([a.label for a in items], dtype=float)
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    f1 = binary_metrics((z >= 0).astype(int), y.astype(int))["f1"]
    return f1, loss


def train_one(trainer, train_items, val_items, lr: float, cfg: TrainConfig, seed: int):
    _seed_everything(seed)
    rng = np.random.default_rng(seed)
    model = trainer.new_model(train_items)
    opt = torch.optim.Adam(model.parameters(), lr=lr, weight_decay=cfg.weight_decay)
    best = (-1.0, -np.inf)
    best_state, best_epoch, stale = None, -1, 0
    order = trainer.order(train_items)
    for epoch in range(cfg.epochs):
        model.train()
        if order is None:
            perm = rng.permutation(len(train_items))
            chunks = [perm[k : k + cfg.batch_size] for k in range(0, len(perm), cfg.batch_size)]
        else:
            chunks = list(_batches(len(train_items), cfg.batch_size, rng, order))
        for idx in chunks:
            opt.zero_grad()
            loss = trainer.train_loss(model, [train_items[i] for i in idx], rng)
            if not torch.isfinite(loss):
                break
            loss.backward()
            opt.step()
        f1, vloss = _evaluate(trainer, model, val_items)
        score = (f1, -vloss)
        if score > best:
            best, best_epoch, stale = score, epoch, 0
            best_state = copy.deepcopy(model.state_dict())
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    if best_state is not None:
        model.load_state_dict(best_state)
    model.is_fitted = True
    return model, best_epoch, best[0], -best[1]


def train_branch(trainer, train_items, val_items, cfg: TrainConfig, on_fit: Callable | None = None) -> TrainResult:
    """Train one model per learning rate and keep the best on validation (F1, then loss)."""
    if on_fit is not None:
        on_fit(trainer.name, train_items)
    best: TrainResult | None = None
    grid = []
    for k, lr in enumerate(cfg.lr_grid):
        model, epoch, f1, vloss = train_one(trainer, train_items, val_items, lr, cfg, cfg.seed + 1000 * k)
        grid.append({"lr": lr, "epoch": epoch, "val_f1": f1, "val_loss": vloss})
        log.info("%s lr=%g best_epoch=%d val_f1=%.4f val_loss=%.4f", trainer.name, lr, epoch, f1, vloss)
        if best is None or (f1, -vloss) > (best.val_f1, -best.val_loss):
            best = TrainResult(model, lr, epoch, f1, vloss)
    best.grid = grid
    return best

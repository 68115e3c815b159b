"""Dynamic-graph branch: per-slice GCN, GRU across slices, DiffPool, weighted slice readout."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import NotFittedError
from .gsg import InputScaler
from .ingest.features import N_FEATURES
from .ingest.graphs import DynamicGraphSequence


# -- functional kernels ------------------------------------------------------

def normalize_adjacency(A):
    """``D^-1/2 (A + A^T + I) D^-1/2`` over the last two axes; weights kept."""
    n = A.shape[-1]
    S = A + A.transpose(-1, -2) + torch.eye(n, dtype=A.dtype)
    dinv = S.sum(-1).clamp_min(1e-12).rsqrt()
    return dinv.unsqueeze(-1) * S * dinv.unsqueeze(-2)


def gcn_step(h_prev, A, weight, activation=F.relu, A_norm=None):
    """``activation(A_norm @ h_prev @ weight)``; ``weight`` maps columns of ``h_prev``."""
    if A_norm is None:
        A_norm = normalize_adjacency(A)
    return activation(A_norm @ (h_prev @ weight))


@dataclass
class GRUWeights:
    W_u: torch.Tensor
    V_u: torch.Tensor
    W_r: torch.Tensor
    V_r: torch.Tensor
    W: torch.Tensor
    V: torch.Tensor
    b_u: torch.Tensor | float = 0.0
    b_r: torch.Tensor | float = 0.0
    b_h: torch.Tensor | float = 0.0


def gru_step(U, h_prev, p: GRUWeights):
    """Gated update of node states from slice features ``U``.

    The candidate uses ``(r * h_prev) @ V`` (reset applied before the projection).
    """
    u = torch.sigmoid(U @ p.W_u + h_prev @ p.V_u + p.b_u)
    r = torch.sigmoid(U @ p.W_r + h_prev @ p.V_r + p.b_r)
    cand = torch.tanh(U @ p.W + (r * h_prev) @ p.V + p.b_h)
    return (1 - u) * h_prev + u * cand


def diffpool_step(A, h, weight, n_clusters=None, node_mask=None, cluster_mask=None, A_norm=None):
    """Soft-assign nodes to clusters; return ``(h_pool, A_pool, M)``.

    ``M = softmax_rows(A_norm @ h @ weight)``, ``h_pool = M^T h``, ``A_pool = M^T A M``.
    ``n_clusters`` truncates ``weight`` columns; ``cluster_mask`` (B, C) disables
    columns per graph and ``node_mask`` (B, N) zeroes padded rows.
    """
    if n_clusters is not None:
        weight = weight[..., :n_clusters]
    if A_norm is None:
        A_norm = normalize_adjacency(A)
    logits = A_norm @ (h @ weight)
    if cluster_mask is not None:
        logits = logits.masked_fill(~cluster_mask.unsqueeze(-2), -math.inf)
    M = torch.softmax(logits, dim=-1)
    if node_mask is not None:
        M = M * node_mask.unsqueeze(-1).to(M.dtype)
    Mt = M.transpose(-1, -2)
    return Mt @ h, Mt @ A @ M, M


def temporal_readout(h_pool, alpha):
    """``sum_t softmax(alpha)_t h_pool[..., t, :]``."""
    a = torch.softmax(alpha, dim=-1)
    return torch.einsum("t,...td->...d", a, h_pool)


def cluster_schedule(n_nodes: int, rate: float = 0.1, levels: int = 2) -> list[int]:
    """Cluster counts per pooling level: ``max(1, floor(N * rate^k))``, last level 1."""
    return [max(1, math.floor(n_nodes * rate**k + 1e-9)) for k in range(1, levels)] + [1]


# -- arrays and batching -----------------------------------------------------

@dataclass
class SequenceArrays:
    x: np.ndarray  # (n, 15) raw features
    slices: list[np.ndarray]  # per slice (m_k, 3): i, j, total ETH
    label: int

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def T(self) -> int:
        return len(self.slices)

    @classmethod
    def from_sequence(cls, g: DynamicGraphSequence) -> "SequenceArrays":
        return cls(g.feature_matrix(), [np.array(s, dtype=float).reshape(-1, 3) for s in g.slices], g.label)

    def adjacency(self, n_pad: int | None = None) -> np.ndarray:
        """(T, n, n) slice adjacency holding ``log1p`` of total ETH per directed pair."""
        n = n_pad or self.n
        A = np.zeros((self.T, n, n))
        for t, s in enumerate(self.slices):
            if len(s):
                A[t, s[:, 0].astype(int), s[:, 1].astype(int)] = np.log1p(s[:, 2])
        return A


@dataclass
class SequenceBatch:
    x: torch.Tensor  # (B, N, 15)
    A: torch.Tensor  # (B, T, N, N)
    node_mask: torch.Tensor  # (B, N) bool
    n_nodes: torch.Tensor  # (B,)
    y: torch.Tensor


def collate_sequences(items: list[SequenceArrays], dtype=torch.float32) -> SequenceBatch:
    n = max(a.n for a in items)
    B, T = len(items), items[0].T
    x = np.zeros((B, n, N_FEATURES))
    A = np.zeros((B, T, n, n))
    mask = np.zeros((B, n), dtype=bool)
    for k, a in enumerate(items):
        x[k, : a.n] = a.x
        A[k] = a.adjacency(n)
        mask[k, : a.n] = True
    return SequenceBatch(
        torch.as_tensor(x, dtype=dtype), torch.as_tensor(A, dtype=dtype), torch.as_tensor(mask),
        torch.as_tensor([a.n for a in items]), torch.as_tensor([a.label for a in items], dtype=dtype),
    )


# -- module ------------------------------------------------------------------

class LdgEncoder(nn.Module):
    def __init__(self, hidden: int = 64, T: int = 10, pool_rate: float = 0.1, pool_levels: int = 2,
                 max_clusters: int = 16, in_features: int = N_FEATURES):
        super().__init__()
        self.hidden, self.T, self.pool_rate, self.pool_levels = hidden, T, pool_rate, pool_levels
        self.max_clusters = max_clusters
        d = hidden
        self.x_scale = InputScaler(in_features)
        self.proj = nn.Linear(in_features, d)
        self.w_gcn = nn.Parameter(torch.randn(d, d) / math.sqrt(d))
        g = lambda: nn.Parameter(torch.randn(d, d) / math.sqrt(d))  # noqa: E731
        self.W_u, self.V_u, self.W_r, self.V_r, self.W, self.V = g(), g(), g(), g(), g(), g()
        self.b_u = nn.Parameter(torch.zeros(d))
        self.b_r = nn.Parameter(torch.zeros(d))
        self.b_h = nn.Parameter(torch.zeros(d))
        widths = [max_clusters] * (pool_levels - 1) + [1]
        self.assign = nn.ParameterList([nn.Parameter(torch.randn(d, c) / math.sqrt(d)) for c in widths])
        self.alpha = nn.Parameter(torch.zeros(T))
        self.head = nn.Linear(d, 1)
        nn.init.constant_(self.head.bias, 1.0)  # start in the active region of the ReLU head
        # affine link from the non-negative branch value to a two-sided training logit
        self.link = nn.Parameter(torch.tensor([1.0, 0.0]))
        self.is_fitted = False

    def gru_weights(self) -> GRUWeights:
        return GRUWeights(self.W_u, self.V_u, self.W_r, self.V_r, self.W, self.V, self.b_u, self.b_r, self.b_h)

    def fit_scalers(self, items: list[SequenceArrays]) -> None:
        self.x_scale.fit(np.concatenate([a.x for a in items]))

    def embed(self, b: SequenceBatch):
        mask = b.node_mask.to(b.x.dtype).unsqueeze(-1)
        h = self.proj(self.x_scale(b.x)) * mask
        p = self.gru_weights()
        B, N = b.node_mask.shape
        sizes = [cluster_schedule(int(n), self.pool_rate, self.pool_levels) for n in b.n_nodes.tolist()]
        col = torch.arange(self.max_clusters)
        cmasks = [
            col.unsqueeze(0) < torch.tensor([min(s[k], self.max_clusters) for s in sizes]).unsqueeze(1)
            for k in range(self.pool_levels - 1)
        ]
        # final single-cluster state is a sum over nodes; divide by N so scale is size-free
        inv_n = 1.0 / b.n_nodes.to(b.x.dtype).clamp_min(1).unsqueeze(-1)
        pooled = []
        for t in range(self.T):
            A = b.A[:, t]
            An = normalize_adjacency(A)
            U = gcn_step(h, A, self.w_gcn, A_norm=An)
            h = gru_step(U, h, p) * mask
            hp, Ap, nm = h, A, b.node_mask
            for lvl in range(self.pool_levels):
                cm = cmasks[lvl] if lvl < self.pool_levels - 1 else None
                hp, Ap, _ = diffpool_step(Ap, hp, self.assign[lvl], node_mask=nm, cluster_mask=cm)
                nm = cm
            pooled.append(hp[:, 0] * inv_n)
        return temporal_readout(torch.stack(pooled, dim=1), self.alpha)

    def forward(self, b: SequenceBatch):
        """Non-negative branch value ``ReLU(head(gamma))`` per sequence."""
        return F.relu(self.head(self.embed(b))).squeeze(-1)

    def logit(self, value):
        return self.link[0] * value + self.link[1]


def ldg_predict(model: LdgEncoder, sequence) -> float:
    if not getattr(model, "is_fitted", False):
        raise NotFittedError("LDG encoder has not been trained")
    a = sequence if isinstance(sequence, SequenceArrays) else SequenceArrays.from_sequence(sequence)
    dtype = next(model.parameters()).dtype
    model.eval()
    with torch.no_grad():
        return float(model(collate_sequences([a], dtype=dtype))[0])

"""Static-graph branch: feature alignment, two-level graph attention, contrastive regularisation.

Functional kernels take explicit weight tensors so they can be checked in
isolation; :class:`GsgEncoder` wires them together for batched training.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import NotFittedError, ValidationError
from .ingest.features import AccountFeatureVector, N_FEATURES
from .ingest.graphs import StaticSubgraph

log = logging.getLogger(__name__)

NEG_SLOPE = 0.01
EDGE_DROP_CAP = 0.9
CENTRALITIES = ("degree", "eigenvector", "pagerank")


def leaky(x):
    return F.leaky_relu(x, NEG_SLOPE)


# -- functional kernels ------------------------------------------------------

def align_neighbor_features(x, r, weight, bias=None):
    """``LeakyReLU(weight @ [x || r] + bias)`` row-wise."""
    z = torch.cat([torch.as_tensor(x), torch.as_tensor(r)], dim=-1)
    if z.shape[-1] != weight.shape[-1]:
        raise ValidationError(f"aligned input has width {z.shape[-1]}, weight expects {weight.shape[-1]}")
    return leaky(F.linear(z, weight, bias))


def segment_softmax(scores, index, n_segments: int):
    """Softmax of ``scores`` within groups given by ``index``."""
    idx = index.to(torch.long)
    top = torch.full((n_segments,), -math.inf, dtype=scores.dtype).scatter_reduce(
        0, idx, scores.detach(), reduce="amax", include_self=True)
    e = torch.exp(scores - top[idx])
    denom = torch.zeros(n_segments, dtype=scores.dtype).index_add(0, idx, e)
    return e / denom[idx]


def segment_max(values, index, n_segments: int):
    d = values.shape[-1]
    out = torch.full((n_segments, d), -math.inf, dtype=values.dtype)
    return out.scatter_reduce(0, index.view(-1, 1).expand(-1, d), values, reduce="amax", include_self=True)


def with_self_loops(src, dst, n: int):
    """Append one ``(i, i)`` pair per node after removing existing self pairs."""
    keep = src != dst
    loop = torch.arange(n, dtype=src.dtype)
    return torch.cat([src[keep], loop]), torch.cat([dst[keep], loop])


def node_attention_layer(H, src, dst, theta_n, theta_a, return_attention: bool = False):
    """One node-level attention update.

    ``(src[k], dst[k])`` says ``src[k]`` is a neighbour of ``dst[k]``. Each node
    normalises over its neighbours and itself: ``alpha = softmax(LeakyReLU(theta_n
    @ [H_dst || H_src]))``, then ``H'_i = ELU(sum_j alpha_ij theta_a H_j)``.
    """
    n, d = H.shape
    s, t = with_self_loops(src, dst, n)
    score = leaky(H[t] @ theta_n[:d] + H[s] @ theta_n[d:])
    alpha = segment_softmax(score, t, n)
    msg = (H @ theta_a.T)[s] * alpha.unsqueeze(-1)
    out = F.elu(torch.zeros(n, theta_a.shape[0], dtype=H.dtype).index_add(0, t, msg))
    if return_attention:
        return out, alpha, t
    return out


def hierarchical_readout(H, batch, n_graphs: int, theta_s, theta_g, return_attention: bool = False):
    """Graph embedding from max-pooled summary ``c`` and attention over nodes and ``c``.

    ``s_j = LeakyReLU(theta_s @ [c || H_j])``; the summary's own score uses
    ``H_j := c``. ``g = ELU(beta_c theta_g c + sum_j beta_j theta_g H_j)``.
    """
    d = H.shape[1]
    batch = batch.to(torch.long)
    c = segment_max(H, batch, n_graphs)
    s_nodes = leaky(c[batch] @ theta_s[:d] + H @ theta_s[d:])
    s_c = leaky(c @ theta_s[:d] + c @ theta_s[d:])
    scores = torch.cat([s_nodes, s_c])
    seg = torch.cat([batch, torch.arange(n_graphs)])
    beta = segment_softmax(scores, seg, n_graphs)
    vals = torch.cat([H, c]) @ theta_g.T
    g = F.elu(torch.zeros(n_graphs, theta_g.shape[0], dtype=H.dtype).index_add(0, seg, vals * beta.unsqueeze(-1)))
    if return_attention:
        return g, beta, seg
    return g


def contrastive_loss(g1, g2, tau: float = 0.5):
    """Symmetric InfoNCE over cosine similarities of paired view embeddings.

    Row ``k`` of ``g1`` and ``g2`` form the positive pair; other rows of the
    opposite view are negatives. Both directions are averaged.
    """
    if g1.shape[0] < 2:
        log.warning("contrastive term needs a batch of at least 2; skipped")
        return g1.sum() * 0.0
    z1, z2 = F.normalize(g1, dim=-1), F.normalize(g2, dim=-1)
    sim = z1 @ z2.T / tau
    target = torch.arange(g1.shape[0])
    return 0.5 * (F.cross_entropy(sim, target) + F.cross_entropy(sim.T, target))


# -- graph arrays and augmentation ------------------------------------------

@dataclass
class GraphArrays:
    """Numeric form of a static subgraph: node features and merged directed edges."""

    x: np.ndarray  # (n, 15) raw features
    edge_index: np.ndarray  # (m, 2)
    edge_w: np.ndarray  # (m,) total ETH
    edge_t: np.ndarray  # (m,) tx count
    label: int

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @classmethod
    def from_graph(cls, g: StaticSubgraph) -> "GraphArrays":
        e = np.array([(i, j) for i, j, _, _ in g.edges], dtype=np.int64).reshape(-1, 2)
        return cls(
            g.feature_matrix(), e,
            np.array([w for _, _, w, _ in g.edges], dtype=float),
            np.array([t for _, _, _, t in g.edges], dtype=float), g.label,
        )

    def edge_features(self) -> np.ndarray:
        """Per-node ``[value, count]`` summed over incident edges (self-loops once)."""
        r = np.zeros((self.n, 2))
        i, j = self.edge_index[:, 0], self.edge_index[:, 1]
        wt = np.column_stack([self.edge_w, self.edge_t])
        np.add.at(r, i, wt)
        np.add.at(r, j[i != j], wt[i != j])
        return r

    def neighbor_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Undirected neighbour relation as (src, dst) pairs, self pairs removed."""
        i, j = self.edge_index[:, 0], self.edge_index[:, 1]
        pairs = np.concatenate([np.column_stack([i, j]), np.column_stack([j, i])])
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        pairs = np.unique(pairs, axis=0) if len(pairs) else pairs.reshape(0, 2)
        return pairs[:, 0], pairs[:, 1]


@dataclass(frozen=True)
class AugmentationConfig:
    pe1: float = 0.3
    pe2: float = 0.4
    pf1: float = 0.1
    pf2: float = 0.0
    centrality: str = "degree"

    def __post_init__(self):
        for name in ("pe1", "pe2", "pf1", "pf2"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValidationError(f"{name} must lie in [0, 1), got {v}")
        if self.centrality not in CENTRALITIES:
            raise ValidationError(f"unknown centrality {self.centrality!r}")

    def view(self, k: int) -> tuple[float, float]:
        if k not in (1, 2):
            raise ValidationError("view index must be 1 or 2")
        return (self.pe1, self.pf1) if k == 1 else (self.pe2, self.pf2)


def node_centrality(n: int, edge_index: np.ndarray, measure: str = "degree") -> np.ndarray:
    i, j = edge_index[:, 0], edge_index[:, 1]
    if measure == "degree":
        A = np.zeros((n, n))
        A[i, j] = A[j, i] = 1.0
        np.fill_diagonal(A, 0.0)
        return A.sum(1)
    if measure == "eigenvector":
        A = np.zeros((n, n))
        A[i, j] = A[j, i] = 1.0
        vals, vecs = np.linalg.eigh(A)
        return np.abs(vecs[:, -1])
    if measure == "pagerank":
        P = np.zeros((n, n))
        P[i, j] = 1.0
        out = P.sum(1, keepdims=True)
        P = np.divide(P, out, out=np.full_like(P, 1.0 / n), where=out > 0)
        r = np.full(n, 1.0 / n)
        for _ in range(100):
            nxt = 0.15 / n + 0.85 * r @ P
            if np.abs(nxt - r).sum() < 1e-12:
                r = nxt
                break
            r = nxt
        return r
    raise ValidationError(f"unknown centrality {measure!r}")


def edge_drop_probabilities(n: int, edge_index: np.ndarray, p_edge: float, measure: str = "degree") -> np.ndarray:
    """Per-edge removal probability: low-centrality edges go first, mean ``p_edge``, capped at 0.9."""
    m = edge_index.shape[0]
    if m == 0 or p_edge == 0.0:
        return np.zeros(m)
    c = node_centrality(n, edge_index, measure)
    s = np.log((c[edge_index[:, 0]] + c[edge_index[:, 1]]) / 2.0 + 1e-8)
    spread = s.max() - s.mean()
    if spread < 1e-12:
        return np.full(m, min(p_edge, EDGE_DROP_CAP))
    return np.minimum((s.max() - s) / spread * p_edge, EDGE_DROP_CAP)


def masked_dimensions(p_feat: float, rng: np.random.Generator, d: int = N_FEATURES) -> np.ndarray:
    k = math.ceil(round(p_feat * d, 9))
    return np.sort(rng.choice(d, size=k, replace=False)) if k else np.zeros(0, dtype=np.int64)


def augment_arrays(a: GraphArrays, drop_prob: np.ndarray, p_feat: float, rng: np.random.Generator) -> GraphArrays:
    keep = rng.random(drop_prob.shape[0]) >= drop_prob
    dims = masked_dimensions(p_feat, rng, a.x.shape[1])
    x = a.x.copy()
    x[:, dims] = 0.0
    return GraphArrays(x, a.edge_index[keep], a.edge_w[keep], a.edge_t[keep], a.label)


def augment_view(graph: StaticSubgraph, config: AugmentationConfig, view: int, seed: int) -> StaticSubgraph:
    """Topology- and attribute-level augmentation of one static subgraph; label preserved."""
    p_edge, p_feat = config.view(view)
    a = GraphArrays.from_graph(graph)
    probs = edge_drop_probabilities(a.n, a.edge_index, p_edge, config.centrality)
    rng = np.random.default_rng(seed)
    keep = rng.random(probs.shape[0]) >= probs
    dims = masked_dimensions(p_feat, rng)
    feats = graph.features
    if dims.size:
        feats = []
        for f in graph.features:
            v = list(f.as_tuple())
            for k in dims:
                v[k] = 0.0
            feats.append(AccountFeatureVector(*v))
    edges = [e for e, k in zip(graph.edges, keep) if k]
    return replace(graph, features=list(feats), edges=edges)


# -- batching ----------------------------------------------------------------

@dataclass
class GraphBatch:
    x: torch.Tensor  # (N, 15) raw features
    r: torch.Tensor  # (N, 2) incident edge totals
    src: torch.Tensor
    dst: torch.Tensor
    batch: torch.Tensor
    n_graphs: int
    y: torch.Tensor


def collate(items: list[GraphArrays], dtype=torch.float32) -> GraphBatch:
    xs, rs, ss, ds, bs = [], [], [], [], []
    off = 0
    for k, a in enumerate(items):
        s, d = a.neighbor_pairs()
        xs.append(a.x)
        rs.append(a.edge_features())
        ss.append(s + off)
        ds.append(d + off)
        bs.append(np.full(a.n, k))
        off += a.n
    return GraphBatch(
        torch.as_tensor(np.concatenate(xs), dtype=dtype),
        torch.as_tensor(np.concatenate(rs), dtype=dtype),
        torch.as_tensor(np.concatenate(ss), dtype=torch.long),
        torch.as_tensor(np.concatenate(ds), dtype=torch.long),
        torch.as_tensor(np.concatenate(bs), dtype=torch.long),
        len(items),
        torch.as_tensor([a.label for a in items], dtype=dtype),
    )


# -- module ------------------------------------------------------------------

class InputScaler(nn.Module):
    """``(log1p(v) - mean) / std`` with statistics taken from training nodes."""

    def __init__(self, width: int):
        super().__init__()
        self.register_buffer("mean", torch.zeros(width))
        self.register_buffer("std", torch.ones(width))

    def fit(self, values: np.ndarray) -> "InputScaler":
        z = np.log1p(np.maximum(values, 0.0))
        sd = z.std(0)
        self.mean.copy_(torch.as_tensor(z.mean(0)))
        self.std.copy_(torch.as_tensor(np.where(sd > 1e-12, sd, 1.0)))
        return self

    def forward(self, v):
        return (torch.log1p(v.clamp_min(0.0)) - self.mean) / self.std


class GsgEncoder(nn.Module):
    def __init__(self, hidden: int = 128, layers: int = 2, in_features: int = N_FEATURES, edge_features: int = 2):
        super().__init__()
        self.hidden, self.layers = hidden, layers
        self.x_scale = InputScaler(in_features)
        self.r_scale = InputScaler(edge_features)
        self.align = nn.Linear(in_features + edge_features, hidden)
        self.theta_n = nn.ParameterList([nn.Parameter(torch.randn(2 * hidden) / math.sqrt(2 * hidden)) for _ in range(layers)])
        self.theta_a = nn.ModuleList([nn.Linear(hidden, hidden, bias=False) for _ in range(layers)])
        self.theta_s = nn.Parameter(torch.randn(2 * hidden) / math.sqrt(2 * hidden))
        self.theta_g = nn.Linear(hidden, hidden, bias=False)
        self.head = nn.Linear(hidden, 1)
        self.is_fitted = False

    def fit_scalers(self, items: list[GraphArrays]) -> None:
        self.x_scale.fit(np.concatenate([a.x for a in items]))
        self.r_scale.fit(np.concatenate([a.edge_features() for a in items]))

    def embed(self, b: GraphBatch):
        x = self.x_scale(b.x)
        r = self.r_scale(b.r)
        H = align_neighbor_features(x, r, self.align.weight, self.align.bias)
        for l in range(self.layers):
            H = node_attention_layer(H, b.src, b.dst, self.theta_n[l], self.theta_a[l].weight)
        return hierarchical_readout(H, b.batch, b.n_graphs, self.theta_s, self.theta_g.weight)

    def forward(self, b: GraphBatch):
        return self.head(self.embed(b)).squeeze(-1)


def gsg_predict(model: GsgEncoder, graph) -> float:
    """Scalar branch output for one static subgraph (a logit-like value)."""
    if not getattr(model, "is_fitted", False):
        raise NotFittedError("GSG encoder has not been trained")
    a = graph if isinstance(graph, GraphArrays) else GraphArrays.from_graph(graph)
    dtype = next(model.parameters()).dtype
    model.eval()
    with torch.no_grad():
        return float(model(collate([a], dtype=dtype))[0])

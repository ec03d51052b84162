"""Masked-attention graph policy with a pointer head, and the twin-Q critic.

Encoder layers compute per-head logits scaled by 1/sqrt(embed_dim),
softmax over the graph's nodes, then an elementwise minimum with the
0/1 adjacency-plus-self mask (no renormalization), plus a residual
connection that keeps gradients alive at depth.  The decoder is a
single unmasked
attention queried from the acting agent's node; its output is
concatenated with that node's embedding, projected back to the embed
dimension, and used as the pointer query over the agent's closed
neighborhood, whose attention vector is the policy itself.
"""

from __future__ import annotations

import torch
from torch import nn


def _neg_inf(dtype: torch.dtype) -> float:
    return torch.finfo(dtype).min


class MaskedAttentionLayer(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        assert dim % heads == 0
        self.dim = dim
        self.heads = heads
        self.w_q = nn.Linear(dim, dim, bias=False)
        self.w_k = nn.Linear(dim, dim, bias=False)
        self.w_v = nn.Linear(dim, dim, bias=False)
        self.w_o = nn.Linear(dim, dim, bias=False)

    def forward(self, h: torch.Tensor, adj: torch.Tensor,
                valid: torch.Tensor) -> torch.Tensor:
        b, n, d = h.shape
        hd = d // self.heads

        def split(t):
            return t.view(b, n, self.heads, hd).transpose(1, 2)

        q, k, v = split(self.w_q(h)), split(self.w_k(h)), split(self.w_v(h))
        logits = q @ k.transpose(-1, -2) / self.dim**0.5
        logits = logits.masked_fill(~valid[:, None, None, :], _neg_inf(h.dtype))
        weights = torch.softmax(logits, dim=-1)
        weights = torch.minimum(weights, adj[:, None])
        out = (weights @ v).transpose(1, 2).reshape(b, n, d)
        # residual keeps the stack trainable: the min-masked convex
        # combination alone contracts activations toward zero with depth
        return h + self.w_o(out)


class Encoder(nn.Module):
    def __init__(self, in_features: int, dim: int = 128, heads: int = 8,
                 layers: int = 6):
        super().__init__()
        self.embed = nn.Linear(in_features, dim)
        self.layers = nn.ModuleList(
            MaskedAttentionLayer(dim, heads) for _ in range(layers))

    def forward(self, x: torch.Tensor, adj: torch.Tensor,
                valid: torch.Tensor) -> torch.Tensor:
        h = self.embed(x)
        for layer in self.layers:
            h = layer(h, adj, valid)
        return h


class PolicyNet(nn.Module):
    """One decision of one agent: a distribution over its closed moves."""

    def __init__(self, in_features: int, dim: int = 128, heads: int = 8,
                 layers: int = 6):
        super().__init__()
        self.encoder = Encoder(in_features, dim, heads, layers)
        self.dim = dim
        self.dec_q = nn.Linear(dim, dim, bias=False)
        self.dec_k = nn.Linear(dim, dim, bias=False)
        self.dec_v = nn.Linear(dim, dim, bias=False)
        self.merge = nn.Linear(2 * dim, dim)
        self.ptr_k = nn.Linear(dim, dim, bias=False)

    def forward(self, x: torch.Tensor, adj: torch.Tensor, valid: torch.Tensor,
                acting: torch.Tensor, nbrs: torch.Tensor,
                nbr_mask: torch.Tensor) -> torch.Tensor:
        """Log-probabilities over the padded neighbor slots.

        x: (B, N, F) features; adj: (B, N, N) mask with self-connections;
        valid: (B, N) real-node flags; acting: (B,) node index of the
        deciding agent; nbrs: (B, K) its closed neighborhood, padded;
        nbr_mask: (B, K) real-slot flags.
        """
        h = self.encoder(x, adj, valid)
        b = h.shape[0]
        rows = torch.arange(b, device=h.device)
        h_c = h[rows, acting]                      # (B, D)
        q = self.dec_q(h_c)[:, None]               # (B, 1, D)
        k = self.dec_k(h)
        v = self.dec_v(h)
        u = (q @ k.transpose(-1, -2)).squeeze(1) / self.dim**0.5
        u = u.masked_fill(~valid, _neg_inf(h.dtype))
        glob = (torch.softmax(u, dim=-1)[:, None] @ v).squeeze(1)
        query = self.merge(torch.cat([glob, h_c], dim=-1))  # (B, D)
        nbr_emb = self.ptr_k(torch.gather(
            h, 1, nbrs[..., None].expand(-1, -1, h.shape[-1])))
        logits = (nbr_emb @ query[..., None]).squeeze(-1) / self.dim**0.5
        logits = logits.masked_fill(~nbr_mask, _neg_inf(h.dtype))
        return torch.log_softmax(logits, dim=-1)


class CriticNet(nn.Module):
    """Joint-action value: encoder pool plus the action target embeddings."""

    def __init__(self, in_features: int, m: int, dim: int = 128,
                 heads: int = 8, layers: int = 6, hidden: int = 256):
        super().__init__()
        self.encoder = Encoder(in_features, dim, heads, layers)
        self.m = m
        self.head = nn.Sequential(
            nn.Linear((m + 1) * dim, hidden), nn.ReLU(),
            nn.Linear(hidden, 1))

    def forward(self, x: torch.Tensor, adj: torch.Tensor, valid: torch.Tensor,
                actions: torch.Tensor) -> torch.Tensor:
        """Values for every candidate joint action.

        actions: (B, A, m) target nodes per candidate; returns (B, A).
        """
        h = self.encoder(x, adj, valid)
        denom = valid.sum(dim=1, keepdim=True).clamp(min=1)
        pooled = (h * valid[..., None]).sum(dim=1) / denom  # (B, D)
        b, a, m = actions.shape
        flat = actions.reshape(b, a * m)
        emb = torch.gather(h, 1, flat[..., None].expand(-1, -1, h.shape[-1]))
        emb = emb.reshape(b, a, m * h.shape[-1])
        pooled = pooled[:, None].expand(-1, a, -1)
        return self.head(torch.cat([pooled, emb], dim=-1)).squeeze(-1)

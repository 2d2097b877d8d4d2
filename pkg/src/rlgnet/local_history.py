"""Local history: relational GCN per snapshot, GRU evolution over the last m snapshots,
attention over per-snapshot candidate means, ConvTransE decoding."""
from __future__ import annotations

import numpy as np
import torch
from torch import nn

from rlgnet.decoder import ConvTransEDecoder
from rlgnet.numeric import NumericEmbedding
from rlgnet.ops import as_index, attention_pool, xavier_init


class RelGraphLayer(nn.Module):
    """``h_o' = act(sum_{(s,r,o)} W_msg [h_s; r; h_s + r; h_s * r] / |N_o| + W_self h_o)``."""

    def __init__(self, dim: int, activation=torch.tanh):
        super().__init__()
        self.w_msg = nn.Linear(4 * dim, dim, bias=False)
        self.w_self = nn.Linear(dim, dim, bias=False)
        self.activation = activation

    def forward(self, h, rel_emb, src, rel, dst, inv_deg):
        hs = h[src]
        r = rel_emb[rel]
        msg = self.w_msg(torch.cat([hs, r, hs + r, hs * r], dim=1)) * inv_deg[dst].unsqueeze(1)
        agg = torch.zeros_like(h).index_add(0, dst, msg)
        out = agg + self.w_self(h)
        return out if self.activation is None else self.activation(out)


class LocalHistoryModule(nn.Module):
    module_id = "local"

    def __init__(
        self,
        num_entities: int,
        num_relations: int,
        dim: int = 200,
        time_dim: int = 48,
        num_layers: int = 1,
        history_len: int = 10,
        channels: int = 50,
        kernel_size: int = 3,
        dropout: float = 0.2,
    ):
        super().__init__()
        self.num_entities = num_entities
        self.num_relations = num_relations
        self.dim = dim
        self.history_len = history_len
        self.hparams = dict(
            num_entities=num_entities, num_relations=num_relations, dim=dim, time_dim=time_dim,
            num_layers=num_layers, history_len=history_len, channels=channels,
            kernel_size=kernel_size, dropout=dropout,
        )
        self.entity_emb = nn.Parameter(torch.empty(num_entities, dim))
        self.relation_emb = nn.Parameter(torch.empty(num_relations, dim))
        self.layers = nn.ModuleList(RelGraphLayer(dim) for _ in range(num_layers))
        self.time_emb = NumericEmbedding(time_dim)
        self.gru = nn.GRUCell(dim + time_dim, dim)
        self.attn = nn.Sequential(nn.Linear(3 * dim + time_dim, dim), nn.Tanh(), nn.Linear(dim, 1))
        self.decoder = ConvTransEDecoder(3, dim, channels, kernel_size, dropout)
        nn.init.xavier_uniform_(self.entity_emb)
        nn.init.xavier_uniform_(self.relation_emb)
        xavier_init(self.layers)
        xavier_init(self.attn)
        xavier_init(self.decoder)

    def init_states(self) -> torch.Tensor:
        return self.entity_emb

    def gcn_forward(self, snapshot: np.ndarray, h: torch.Tensor) -> torch.Tensor:
        """One snapshot of message passing over all entities; ``snapshot`` rows are (s, r, o)."""
        dev = h.device
        if snapshot.shape[0] == 0:
            h0 = h
            src = rel = dst = torch.zeros(0, dtype=torch.long, device=dev)
            inv_deg = torch.zeros(h.shape[0], dtype=h.dtype, device=dev)
        else:
            src = as_index(snapshot[:, 0], dev)
            rel = as_index(snapshot[:, 1], dev)
            dst = as_index(snapshot[:, 2], dev)
            deg = torch.bincount(dst, minlength=h.shape[0]).to(h.dtype)
            inv_deg = torch.where(deg > 0, 1.0 / deg.clamp(min=1), torch.zeros_like(deg))
            mean = torch.zeros_like(h).index_add(0, dst, h[src]) * inv_deg.unsqueeze(1)
            # entities without incoming edges keep their own state
            h0 = torch.where((deg > 0).unsqueeze(1), mean, h)
        out = h0
        for layer in self.layers:
            out = layer(out, self.relation_emb, src, rel, dst, inv_deg)
        return out

    def evolve(self, view, t_q: int):
        """Run GCN + GRU over the visible window before ``t_q``.

        Returns ``(timestamps, states)`` where ``states[j]`` is the entity
        matrix entering snapshot ``timestamps[j]`` and ``states[-1]`` is the
        matrix used to score queries at ``t_q``.
        """
        ts = view.window(t_q, self.history_len)
        h = self.init_states()
        states = [h]
        for t in ts:
            h_graph = self.gcn_forward(view.snapshot(t), h)
            v = self.time_emb(float(t_q - t)).expand(h.shape[0], -1)
            h = self.gru(torch.cat([h, v], dim=1), h_graph)
            states.append(h)
        return ts, states

    def attention_logits(self, h_t, queries, t_offset, cand_mean):
        s = as_index(queries[:, 0], h_t.device)
        r = as_index(queries[:, 1], h_t.device)
        v = self.time_emb(float(t_offset)).expand(len(queries), -1)
        return self.attn(torch.cat([h_t[s], self.relation_emb[r], v, cand_mean], dim=1)).squeeze(-1)

    def candidate_attention(self, view, ts, states, queries: np.ndarray, t_q: int) -> torch.Tensor:
        ref = self.entity_emb
        n = len(queries)
        if not ts:
            return ref.new_zeros(n, self.dim)
        means, logits = [], []
        for j, t in enumerate(ts):
            h_t = states[j]
            qidx, objs = view.window_candidates(t, queries[:, :2])
            qidx = as_index(qidx, ref.device)
            total = ref.new_zeros(n, self.dim).index_add(0, qidx, h_t[as_index(objs, ref.device)])
            size = torch.bincount(qidx, minlength=n).to(ref.dtype).clamp(min=1)
            c = total / size.unsqueeze(1)
            means.append(c)
            logits.append(self.attention_logits(h_t, queries, t_q - t, c))
        return attention_pool(torch.stack(logits, 1), torch.stack(means, 1))

    def score_local(self, queries: np.ndarray, h_q: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        s = as_index(queries[:, 0], h_q.device)
        r = as_index(queries[:, 1], h_q.device)
        stacked = torch.stack([h_q[s], self.relation_emb[r], context], dim=1)
        return self.decoder(stacked, h_q)

    def score(self, view, t_q: int, queries: np.ndarray) -> torch.Tensor:
        queries = np.asarray(queries, dtype=np.int64).reshape(-1, queries.shape[-1])
        ts, states = self.evolve(view, t_q)
        context = self.candidate_attention(view, ts, states, queries, t_q)
        return self.score_local(queries, states[-1], context)

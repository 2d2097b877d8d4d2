"""Global history: attention over whole-history candidates keyed by recency and by frequency."""
from __future__ import annotations

import numpy as np
import torch
from torch import nn

from rlgnet.decoder import ConvTransEDecoder
from rlgnet.numeric import NumericEmbedding
from rlgnet.ops import as_index, attention_pool, xavier_init


class GlobalHistoryModule(nn.Module):
    module_id = "global"

    def __init__(
        self,
        num_entities: int,
        num_relations: int,
        dim: int = 200,
        top_k_all: int = 200,
        channels: int = 50,
        kernel_size: int = 3,
        dropout: float = 0.2,
    ):
        super().__init__()
        self.num_entities = num_entities
        self.num_relations = num_relations
        self.dim = dim
        self.top_k_all = top_k_all
        self.hparams = dict(
            num_entities=num_entities, num_relations=num_relations, dim=dim, top_k_all=top_k_all,
            channels=channels, kernel_size=kernel_size, dropout=dropout,
        )
        self.entity_emb = nn.Parameter(torch.empty(num_entities, dim))
        self.relation_emb = nn.Parameter(torch.empty(num_relations, dim))
        # bilinear attention: query side and candidate side, one pair per branch
        self.gap_query = nn.Linear(2 * dim, dim, bias=False)
        self.gap_key = nn.Linear(2 * dim, dim, bias=False)
        self.cnt_query = nn.Linear(2 * dim, dim, bias=False)
        self.cnt_key = nn.Linear(2 * dim, dim, bias=False)
        self.gap_emb = NumericEmbedding(dim)
        self.cnt_emb = NumericEmbedding(dim)
        self.time_emb = NumericEmbedding(dim)
        self.decoder = ConvTransEDecoder(5, dim, channels, kernel_size, dropout)
        nn.init.xavier_uniform_(self.entity_emb)
        nn.init.xavier_uniform_(self.relation_emb)
        xavier_init(self)

    def _query(self, queries):
        dev = self.entity_emb.device
        s = as_index(queries[:, 0], dev)
        r = as_index(queries[:, 1], dev)
        return self.entity_emb[s], self.relation_emb[r]

    def attention_logits(self, queries, t_q, obj, cnt, last):
        """Recency logits ``A1`` and frequency logits ``A2``, each (Q, K)."""
        dev = self.entity_emb.device
        h_q, r_q = self._query(queries)
        q = torch.cat([h_q, r_q], dim=1)
        h_i = self.entity_emb[as_index(obj, dev)]
        gap = self.gap_emb(torch.as_tensor(t_q - np.asarray(last), device=dev))
        count = self.cnt_emb(torch.as_tensor(np.asarray(cnt), device=dev))
        a1 = torch.einsum("qd,qkd->qk", self.gap_query(q), self.gap_key(torch.cat([gap, h_i], dim=-1)))
        a2 = torch.einsum("qd,qkd->qk", self.cnt_query(q), self.cnt_key(torch.cat([count, h_i], dim=-1)))
        return a1, a2, h_i

    def global_attention(self, queries, t_q, obj, cnt, last, mask):
        """Candidate summaries ``(C_gap, C_cnt)``; zero vectors for queries without history."""
        a1, a2, h_i = self.attention_logits(queries, t_q, obj, cnt, last)
        mask = torch.as_tensor(np.asarray(mask), device=h_i.device)
        return attention_pool(a1, h_i, mask), attention_pool(a2, h_i, mask)

    def score_global(self, queries, t_q, c_gap, c_cnt) -> torch.Tensor:
        h_q, r_q = self._query(queries)
        v = self.time_emb(float(t_q)).expand(len(queries), -1)
        stacked = torch.stack([h_q, r_q, v, c_gap, c_cnt], dim=1)
        return self.decoder(stacked, self.entity_emb)

    def score(self, view, t_q: int, queries: np.ndarray) -> torch.Tensor:
        queries = np.asarray(queries, dtype=np.int64)
        obj, cnt, last, mask = view.candidates(queries[:, :2], self.top_k_all)
        c_gap, c_cnt = self.global_attention(queries, t_q, obj, cnt, last, mask)
        return self.score_global(queries, t_q, c_gap, c_cnt)

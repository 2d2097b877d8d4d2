"""Repeating history: an MLP scores each top-k historical candidate; everything else scores 0."""
from __future__ import annotations

import numpy as np
import torch
from torch import nn

from rlgnet.numeric import NumericEmbedding
from rlgnet.ops import as_index, xavier_init


class RepeatHistoryModule(nn.Module):
    module_id = "repeat"

    def __init__(self, num_entities: int, num_relations: int, dim: int = 200, top_k: int = 20):
        super().__init__()
        self.num_entities = num_entities
        self.num_relations = num_relations
        self.dim = dim
        self.top_k = top_k
        self.hparams = dict(num_entities=num_entities, num_relations=num_relations, dim=dim, top_k=top_k)
        self.entity_emb = nn.Parameter(torch.empty(num_entities, dim))
        self.relation_emb = nn.Parameter(torch.empty(num_relations, dim))
        self.time_emb = NumericEmbedding(dim)
        self.cnt_emb = NumericEmbedding(dim)
        self.mlp = nn.Sequential(
            nn.Linear(5 * dim, 2 * dim), nn.Tanh(),
            nn.Linear(2 * dim, dim), nn.Tanh(),
            nn.Linear(dim, 1),
        )
        nn.init.xavier_uniform_(self.entity_emb)
        nn.init.xavier_uniform_(self.relation_emb)
        xavier_init(self.mlp)

    def candidate_logits(self, queries, t_q, obj, cnt) -> torch.Tensor:
        dev = self.entity_emb.device
        n, k = np.shape(obj)
        s = as_index(queries[:, 0], dev)
        r = as_index(queries[:, 1], dev)
        h_q = self.entity_emb[s].unsqueeze(1).expand(n, k, -1)
        r_q = self.relation_emb[r].unsqueeze(1).expand(n, k, -1)
        v_t = self.time_emb(float(t_q)).expand(n, k, -1)
        h_i = self.entity_emb[as_index(obj, dev)]
        v_c = self.cnt_emb(torch.as_tensor(np.asarray(cnt), device=dev))
        return self.mlp(torch.cat([h_q, r_q, v_t, h_i, v_c], dim=-1)).squeeze(-1)

    def score_repeat(self, queries, t_q, obj, cnt, mask):
        """Dense (Q, |E|) scores and the boolean candidate support."""
        dev = self.entity_emb.device
        logits = self.candidate_logits(queries, t_q, obj, cnt)
        rows, cols = np.nonzero(np.asarray(mask))
        rows_t = as_index(rows, dev)
        ents = as_index(np.asarray(obj)[rows, cols], dev)
        out = logits.new_zeros(len(queries), self.num_entities)
        out = out.index_put((rows_t, ents), logits[rows_t, as_index(cols, dev)])
        support = torch.zeros(len(queries), self.num_entities, dtype=torch.bool, device=dev)
        support[rows_t, ents] = True
        return out, support

    def score_with_support(self, view, t_q: int, queries: np.ndarray):
        queries = np.asarray(queries, dtype=np.int64)
        obj, cnt, _, mask = view.candidates(queries[:, :2], self.top_k)
        return self.score_repeat(queries, t_q, obj, cnt, mask)

    def score(self, view, t_q: int, queries: np.ndarray) -> torch.Tensor:
        return self.score_with_support(view, t_q, queries)[0]

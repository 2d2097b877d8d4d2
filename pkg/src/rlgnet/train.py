"""Independent training of one scoring module over chronologically ordered snapshots."""
from __future__ import annotations

import csv
import logging
import math
import os
import random
import time

import numpy as np
import torch
import torch.nn.functional as F

from rlgnet.checkpoint import Checkpoint
from rlgnet.config import TrainConfig
from rlgnet.data import SnapshotSequence, add_reverse_relations
from rlgnet.evaluate import module_ranks, summarize
from rlgnet.models import build_module
from rlgnet.protocol import SINGLE_STEP, walk

log = logging.getLogger(__name__)

LOG_FIELDS = ("epoch", "loss", "lr", "train_facts", "valid_mrr", "seconds")


class TrainingDivergence(RuntimeError):
    pass


def cross_entropy_loss(scores: torch.Tensor, targets) -> torch.Tensor:
    """Mean over the batch of ``-log softmax(scores)[target]``."""
    targets = torch.as_tensor(targets, dtype=torch.long, device=scores.device)
    return F.cross_entropy(scores, targets)


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


class Trainer:
    """Owns one module, its optimiser and its learning-rate schedule."""

    def __init__(self, module_id: str, seq: SnapshotSequence, cfg: TrainConfig, dtype=torch.float32):
        if not seq.augmented:
            seq = add_reverse_relations(seq)
        if cfg.static_constraint:
            log.info("static_constraint is set but has no effect in this implementation")
        self.module_id = module_id
        self.seq = seq
        self.cfg = cfg.replace(module=module_id)
        seed_everything(cfg.seed)
        self.model = build_module(module_id, seq.num_entities, seq.num_relations, self.cfg).to(dtype)
        self.optimizer = torch.optim.Adam(self.model.parameters(), lr=cfg.lr)
        self.scheduler = None
        if module_id == "local":
            self.scheduler = torch.optim.lr_scheduler.StepLR(self.optimizer, step_size=cfg.lr_step, gamma=cfg.lr_decay)
        self.epoch = 0

    @property
    def lr(self) -> float:
        return self.optimizer.param_groups[0]["lr"]

    def batches(self, split: str = "train"):
        """Yield ``(t, view, facts, candidates)`` per non-empty snapshot.

        For the repeat module ``facts`` holds only the repeating facts (object
        among the top-k candidates) and ``candidates`` the matching top-k
        arrays; for the other modules ``candidates`` is None.
        """
        for t, view in walk(self.seq, split, SINGLE_STEP):
            facts = self.seq.snapshots[t]
            cands = None
            if self.module_id == "repeat" and facts.shape[0]:
                obj, cnt, last, mask = view.candidates(facts[:, :2], self.cfg.top_k)
                keep = ((obj == facts[:, 2:3]) & mask).any(axis=1)
                facts = facts[keep]
                cands = (obj[keep], cnt[keep], last[keep], mask[keep])
            if facts.shape[0] == 0:
                continue
            yield t, view, facts, cands

    def forward(self, t, view, facts, cands) -> torch.Tensor:
        if cands is not None:
            obj, cnt, _, mask = cands
            return self.model.score_repeat(facts, t, obj, cnt, mask)[0]
        return self.model.score(view, t, facts)

    def train_epoch(self) -> tuple[float, int]:
        """One pass over the training snapshots; returns (mean loss, facts seen)."""
        self.model.train()
        total, n = 0.0, 0
        for t, view, facts, cands in self.batches("train"):
            scores = self.forward(t, view, facts, cands)
            loss = cross_entropy_loss(scores, facts[:, 2])
            if not torch.isfinite(loss):
                raise TrainingDivergence(f"{self.module_id}: non-finite loss at epoch {self.epoch + 1}, t={t}")
            self.optimizer.zero_grad()
            loss.backward()
            if self.cfg.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(self.model.parameters(), self.cfg.grad_clip)
            self.optimizer.step()
            total += loss.item() * facts.shape[0]
            n += facts.shape[0]
        self.epoch += 1
        if self.scheduler is not None:
            self.scheduler.step()
        return (total / n if n else float("nan")), n

    def split_mrr(self, split: str) -> float:
        ranks = module_ranks(self.model, self.seq, split, SINGLE_STEP, repeating_only=self.module_id == "repeat")
        return summarize(ranks)[0]

    def checkpoint(self, valid_mrr=float("nan")) -> Checkpoint:
        return Checkpoint.from_model(self.model, self.epoch, self.cfg.to_dict(), valid_mrr)

    def fit(self, log_path: str | None = None, select_split: str = "valid") -> Checkpoint:
        """Train up to ``max_epochs`` with early stopping on ``select_split`` MRR."""
        has_select = self.seq.num_facts(select_split) > 0
        best, best_mrr, stale = None, -math.inf, 0
        writer = None
        fh = None
        if log_path:
            os.makedirs(os.path.dirname(os.path.abspath(log_path)), exist_ok=True)
            fh = open(log_path, "w", newline="")
            writer = csv.DictWriter(fh, fieldnames=LOG_FIELDS)
            writer.writeheader()
        try:
            for _ in range(self.cfg.max_epochs):
                start = time.perf_counter()
                lr = self.lr
                loss, n = self.train_epoch()
                mrr = self.split_mrr(select_split) if has_select else float("nan")
                row = dict(epoch=self.epoch, loss=loss, lr=lr, train_facts=n, valid_mrr=mrr,
                           seconds=round(time.perf_counter() - start, 3))
                log.info("%s epoch %d loss %.4f valid MRR %.4f", self.module_id, self.epoch, loss, mrr)
                if writer:
                    writer.writerow(row)
                    fh.flush()
                if not has_select:
                    best = self.checkpoint()
                    continue
                if mrr > best_mrr:
                    best_mrr, stale = mrr, 0
                    best = self.checkpoint(mrr)
                else:
                    stale += 1
                    if stale >= self.cfg.patience:
                        break
        finally:
            if fh:
                fh.close()
        return best if best is not None else self.checkpoint()


def train_module(module_id: str, seq: SnapshotSequence, cfg: TrainConfig, log_path: str | None = None) -> Checkpoint:
    return Trainer(module_id, seq, cfg).fit(log_path)

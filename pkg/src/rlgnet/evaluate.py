"""Score fusion, time-aware filtered ranking, and the single-/multi-step evaluation protocols."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from rlgnet import kernels
from rlgnet.checkpoint import Checkpoint
from rlgnet.config import ConfigError
from rlgnet.data import SnapshotSequence, add_reverse_relations
from rlgnet.history import build_index
from rlgnet.models import module_scores
from rlgnet.ops import masked_softmax
from rlgnet.protocol import MODES, SINGLE_STEP, filter_lists, walk

FUSION_STRATEGIES = ("prob", "raw")
TIE_POLICY = "optimistic: rank = 1 + #entities scoring strictly higher"


class UnsupportedCombination(ValueError):
    pass


class MissingModule(KeyError):
    pass


@dataclass
class EnsembleConfig:
    alpha: float = 0.8
    mode: str = SINGLE_STEP
    k_list: tuple = (1, 3, 10)
    fusion: str = "prob"
    filtered: bool = True

    def __post_init__(self):
        check_alpha(self.alpha)
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.fusion not in FUSION_STRATEGIES:
            raise ConfigError(f"fusion must be one of {FUSION_STRATEGIES}")
        self.k_list = tuple(sorted(int(k) for k in self.k_list))


def check_alpha(alpha):
    if not 0.0 <= float(alpha) <= 1.0:
        raise ConfigError(f"alpha must be in [0, 1], got {alpha}")


def _t(x):
    return x if isinstance(x, torch.Tensor) else torch.as_tensor(np.asarray(x))


def fuse_scores(loc, glo, rep, alpha: float, rep_support=None, strategy: str = "prob") -> torch.Tensor:
    """``alpha * loc + (1 - alpha) * glo + rep`` on the chosen scale.

    With ``strategy="prob"`` local and global scores become softmax
    probabilities and the repeat scores a softmax over their support (zero
    elsewhere); ``"raw"`` adds the logits as they are. Any of the three may be
    ``None`` to drop that term. Work is done in float64.
    """
    check_alpha(alpha)
    if strategy not in FUSION_STRATEGIES:
        raise ConfigError(f"unknown fusion strategy {strategy!r}")
    out = None

    def add(acc, x):
        return x if acc is None else acc + x

    if loc is not None:
        p = _t(loc).double()
        p = torch.softmax(p, dim=-1) if strategy == "prob" else p
        out = add(out, alpha * p)
    if glo is not None:
        p = _t(glo).double()
        p = torch.softmax(p, dim=-1) if strategy == "prob" else p
        out = add(out, (1.0 - alpha) * p)
    if rep is not None:
        r = _t(rep).double()
        if strategy == "prob":
            support = (r != 0) if rep_support is None else _t(rep_support).bool()
            r = masked_softmax(r, support, dim=-1)
        out = add(out, r)
    if out is None:
        raise ValueError("nothing to fuse")
    return out


def rank_time_aware_filtered(scores, query, truth: int, snapshot_truths) -> int:
    """Rank of ``truth`` after removing the other objects true for ``query``'s (s, r) at its time."""
    scores = np.asarray(_t(scores).detach().double().cpu().numpy()).reshape(-1)
    if not 0 <= truth < scores.shape[0]:
        raise ValueError(f"truth {truth} outside the entity universe [0, {scores.shape[0]})")
    s_q, r_q = int(query[0]), int(query[1])
    facts = np.asarray(snapshot_truths, dtype=np.int64).reshape(-1, 3) if len(snapshot_truths) else np.zeros((0, 3), np.int64)
    others = np.unique(facts[(facts[:, 0] == s_q) & (facts[:, 1] == r_q), 2])
    return int(kernels.filtered_ranks(scores[None, :], np.array([truth]), np.array([0, others.size]), others)[0])


def snapshot_ranks(scores, snapshot: np.ndarray, filtered: bool = True) -> np.ndarray:
    """Ranks for every fact of ``snapshot`` (rows aligned with ``scores``)."""
    s = _t(scores).detach().double().cpu().numpy()
    truth = snapshot[:, 2]
    if filtered:
        ptr, idx = filter_lists(snapshot)
    else:
        ptr, idx = np.zeros(snapshot.shape[0] + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return kernels.filtered_ranks(s, truth, ptr, idx)


def summarize(ranks, k_list=(1, 3, 10)):
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        return float("nan"), {int(k): float("nan") for k in k_list}
    return float(np.mean(1.0 / ranks)), {int(k): float(np.mean(ranks <= k)) for k in k_list}


def combo_label(combo) -> str:
    names = {"local": "Loc", "global": "Glo", "repeat": "Rep"}
    order = [m for m in ("global", "local", "repeat") if m in combo]
    return "+".join(names[m] for m in order)


def check_combo(combo) -> frozenset:
    combo = frozenset(combo)
    unknown = combo - {"local", "global", "repeat"}
    if unknown:
        raise UnsupportedCombination(f"unknown modules {sorted(unknown)}")
    if not combo:
        raise UnsupportedCombination("empty module combination")
    if combo == {"repeat"}:
        raise UnsupportedCombination("the repeat module alone only scores repeating facts; combine it with local or global")
    return combo


def combo_alpha(combo, alpha):
    if "local" not in combo:
        return 0.0
    if "global" not in combo:
        return 1.0
    return alpha


ALL_COMBOS = (
    frozenset({"global"}),
    frozenset({"local"}),
    frozenset({"global", "local"}),
    frozenset({"global", "repeat"}),
    frozenset({"local", "repeat"}),
    frozenset({"global", "local", "repeat"}),
)


@dataclass
class EvalReport:
    label: str
    modules: list
    mrr: float
    hits: dict
    num_queries: int
    config: dict
    per_timestamp: list = field(default_factory=list)
    module_mrr: dict = field(default_factory=dict)
    max_history_timestamp: int = -1
    config_hash: str = ""
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "modules": self.modules,
            "mrr": self.mrr,
            "hits": {str(k): v for k, v in self.hits.items()},
            "num_queries": self.num_queries,
            "module_mrr": self.module_mrr,
            "tie_policy": TIE_POLICY,
            "config": self.config,
            "config_hash": self.config_hash,
            "max_history_timestamp": self.max_history_timestamp,
            "seconds": self.seconds,
            "per_timestamp": self.per_timestamp,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def to_table(self) -> str:
        ks = sorted(self.hits)
        head = f"{'model':<14} {'MRR':>7} " + " ".join(f"{'H@' + str(k):>7}" for k in ks)
        row = f"{self.label:<14} {100 * self.mrr:7.2f} " + " ".join(f"{100 * self.hits[k]:7.2f}" for k in ks)
        lines = [head, row]
        for mid, v in sorted(self.module_mrr.items()):
            lines.append(f"  {mid + ' alone':<12} {100 * v:7.2f}")
        lines.append(f"({self.num_queries} queries, {self.config.get('mode')}, time-aware filtered, {TIE_POLICY})")
        return "\n".join(lines)


def _as_models(checkpoints: dict) -> dict:
    models = {}
    for mid, obj in checkpoints.items():
        if obj is None:
            continue
        model = obj.build_model() if isinstance(obj, Checkpoint) else obj
        if model.module_id != mid:
            raise ConfigError(f"checkpoint under key {mid!r} holds the {model.module_id!r} module")
        model.eval()
        models[mid] = model
    return models


def run_protocol(checkpoints: dict, seq: SnapshotSequence, cfg: EnsembleConfig, combos, split: str = "test",
                 config_hash: str = "") -> list[EvalReport]:
    """Evaluate several module combinations in one pass over ``split``."""
    if not seq.augmented:
        seq = add_reverse_relations(seq)
    combos = [check_combo(c) for c in combos]
    needed = set().union(*combos)
    models = _as_models({m: checkpoints.get(m) for m in needed})
    for mid in sorted(needed):
        if mid not in models:
            raise MissingModule(f"no checkpoint for the {mid!r} module")
    ts = seq.split_range(split)
    if len(ts) == 0 or seq.num_facts(split) == 0:
        raise ValueError(f"{split} split is empty")

    start = time.perf_counter()
    ranks = {c: [] for c in combos}
    module_ranks = {m: [] for m in models}
    per_t = {c: [] for c in combos}
    max_seen = -1
    index = build_index(seq, ts.start)
    with torch.no_grad():
        for t, view in walk(seq, split, cfg.mode, index):
            snap = seq.snapshots[t]
            if snap.shape[0] == 0:
                continue
            out = {m: module_scores(model, view, t, snap) for m, model in models.items()}
            max_seen = max(max_seen, view.max_accessed, view.index.frontier - 1)
            for m, (sc, _) in out.items():
                module_ranks[m].append(snapshot_ranks(sc, snap, cfg.filtered))
            for c in combos:
                a = combo_alpha(c, cfg.alpha)
                fused = fuse_scores(
                    out["local"][0] if "local" in c else None,
                    out["global"][0] if "global" in c else None,
                    out["repeat"][0] if "repeat" in c else None,
                    a,
                    rep_support=out["repeat"][1] if "repeat" in c else None,
                    strategy=cfg.fusion,
                )
                r = snapshot_ranks(fused, snap, cfg.filtered)
                ranks[c].append(r)
                per_t[c].append({"t": t, "queries": int(r.size), "mrr": float(np.mean(1.0 / r)), "ranks": r.tolist()})
    elapsed = time.perf_counter() - start

    mod_mrr = {m: summarize(np.concatenate(v), cfg.k_list)[0] for m, v in module_ranks.items() if v}
    reports = []
    for c in combos:
        allr = np.concatenate(ranks[c]) if ranks[c] else np.zeros(0)
        mrr, hits = summarize(allr, cfg.k_list)
        reports.append(
            EvalReport(
                label=combo_label(c),
                modules=sorted(c),
                mrr=mrr,
                hits=hits,
                num_queries=int(allr.size),
                config=dict(
                    alpha=combo_alpha(c, cfg.alpha), mode=cfg.mode, fusion=cfg.fusion,
                    filtered=cfg.filtered, split=split, dataset=seq.name,
                ),
                per_timestamp=per_t[c],
                module_mrr={m: mod_mrr[m] for m in sorted(c) if m in mod_mrr},
                max_history_timestamp=max_seen,
                config_hash=config_hash,
                seconds=elapsed,
            )
        )
    return reports


def evaluate(checkpoints: dict, seq: SnapshotSequence, cfg: EnsembleConfig, split: str = "test",
             combo=None, config_hash: str = "") -> EvalReport:
    """Fused evaluation of the given checkpoints (all three unless ``combo`` restricts it)."""
    if combo is None:
        combo = ("local", "global", "repeat")
    return run_protocol(checkpoints, seq, cfg, [combo], split, config_hash)[0]


def ablate(checkpoints: dict, seq: SnapshotSequence, cfg: EnsembleConfig, combos=ALL_COMBOS,
           split: str = "test", config_hash: str = "") -> list[EvalReport]:
    return run_protocol(checkpoints, seq, cfg, combos, split, config_hash)


def module_ranks(model, seq: SnapshotSequence, split: str, mode: str = SINGLE_STEP, repeating_only: bool = False,
                 filtered: bool = True) -> np.ndarray:
    """Ranks of one module's raw scores over ``split``.

    ``repeating_only`` keeps just the facts whose object is among the
    module's top-k candidates (the repeat module's domain).
    """
    was_training = model.training
    model.eval()
    out = []
    with torch.no_grad():
        for t, view in walk(seq, split, mode):
            snap = seq.snapshots[t]
            if snap.shape[0] == 0:
                continue
            scores, support = module_scores(model, view, t, snap)
            r = snapshot_ranks(scores, snap, filtered)
            if repeating_only:
                if support is None:
                    raise ValueError("repeating_only needs a module with a candidate support")
                keep = support[torch.arange(snap.shape[0]), torch.as_tensor(snap[:, 2])].cpu().numpy()
                r = r[keep]
            out.append(r)
    model.train(was_training)
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)

"""Construction of the three independently trained scoring modules."""
from __future__ import annotations

from rlgnet.config import MODULE_IDS, TrainConfig
from rlgnet.global_history import GlobalHistoryModule
from rlgnet.local_history import LocalHistoryModule
from rlgnet.repeat_history import RepeatHistoryModule

MODULE_CLASSES = {
    "local": LocalHistoryModule,
    "global": GlobalHistoryModule,
    "repeat": RepeatHistoryModule,
}


def module_hparams(module_id: str, num_entities: int, num_relations: int, cfg: TrainConfig) -> dict:
    common = dict(num_entities=num_entities, num_relations=num_relations, dim=cfg.dim)
    if module_id == "local":
        return dict(
            common, time_dim=cfg.time_dim, num_layers=cfg.omega, history_len=cfg.m,
            channels=cfg.channels, kernel_size=cfg.kernel_size, dropout=cfg.dropout,
        )
    if module_id == "global":
        return dict(
            common, top_k_all=cfg.top_k_all, channels=cfg.channels,
            kernel_size=cfg.kernel_size, dropout=cfg.dropout,
        )
    if module_id == "repeat":
        return dict(common, top_k=cfg.top_k)
    raise ValueError(f"unknown module {module_id!r}; expected one of {MODULE_IDS}")


def build_module(module_id: str, num_entities: int, num_relations: int, cfg: TrainConfig):
    return MODULE_CLASSES[module_id](**module_hparams(module_id, num_entities, num_relations, cfg))


def module_scores(model, view, t_q, queries):
    """``(scores, support)``; support is only defined for the repeat module."""
    if isinstance(model, RepeatHistoryModule):
        return model.score_with_support(view, t_q, queries)
    return model.score(view, t_q, queries), None

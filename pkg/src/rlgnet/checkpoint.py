"""Versioned checkpoint files for a single trained module."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import torch

from rlgnet.models import MODULE_CLASSES

CHECKPOINT_FORMAT = "rlgnet-checkpoint"
CHECKPOINT_VERSION = 1


class CheckpointError(Exception):
    pass


@dataclass
class Checkpoint:
    module_id: str
    epoch: int
    state_dict: dict
    hparams: dict
    config: dict = field(default_factory=dict)
    valid_mrr: float = float("nan")

    def build_model(self):
        model = MODULE_CLASSES[self.module_id](**self.hparams)
        model.load_state_dict(self.state_dict)
        model.eval()
        return model

    @classmethod
    def from_model(cls, model, epoch=0, config=None, valid_mrr=float("nan")) -> "Checkpoint":
        state = {k: v.detach().cpu().clone() for k, v in model.state_dict().items()}
        return cls(model.module_id, epoch, state, dict(model.hparams), dict(config or {}), valid_mrr)


def save_checkpoint(ckpt: Checkpoint, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    torch.save(
        {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "module_id": ckpt.module_id,
            "epoch": ckpt.epoch,
            "hparams": ckpt.hparams,
            "config": ckpt.config,
            "valid_mrr": ckpt.valid_mrr,
            "state_dict": ckpt.state_dict,
        },
        path,
    )


def load_checkpoint(path: str, module_id: str | None = None, num_entities: int | None = None,
                    num_relations: int | None = None) -> Checkpoint:
    """Load and validate; ``module_id``/sizes, when given, must match the stored ones."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        blob = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({type(exc).__name__})") from exc
    if not isinstance(blob, dict) or blob.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not an rlgnet checkpoint")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: checkpoint version {blob.get('version')} != {CHECKPOINT_VERSION}")
    stored = blob["module_id"]
    if module_id is not None and stored != module_id:
        raise CheckpointError(f"{path}: holds the {stored!r} module, expected {module_id!r}")
    hp = blob["hparams"]
    if num_entities is not None and hp["num_entities"] != num_entities:
        raise CheckpointError(f"{path}: trained for {hp['num_entities']} entities, dataset has {num_entities}")
    if num_relations is not None and hp["num_relations"] != num_relations:
        raise CheckpointError(f"{path}: trained for {hp['num_relations']} relations, dataset has {num_relations}")
    return Checkpoint(stored, blob["epoch"], blob["state_dict"], hp, blob.get("config", {}),
                      blob.get("valid_mrr", float("nan")))

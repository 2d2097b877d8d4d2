import math

import numpy as np
import pytest
import torch

from rlgnet.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from rlgnet.config import TrainConfig
from rlgnet.data import add_reverse_relations, from_quadruples
from rlgnet.history import build_repeating_graph
from rlgnet.models import module_scores
from rlgnet.protocol import HistoryView
from rlgnet.history import build_index
from rlgnet.synthetic import toy_sequence
from rlgnet.train import Trainer, TrainingDivergence, cross_entropy_loss

SMALL = dict(dim=16, time_dim=8, channels=4, max_epochs=3, m=2)


def test_loss_vanishes_for_dominant_target():
    scores = torch.zeros(2, 5, dtype=torch.float64)
    scores[0, 3] = scores[1, 1] = 1e6
    assert cross_entropy_loss(scores, [3, 1]).item() < 1e-12


def test_uniform_scores_give_log_e():
    assert abs(cross_entropy_loss(torch.zeros(4, 7, dtype=torch.float64), [0, 1, 2, 3]).item() - math.log(7)) < 1e-12


def test_loss_matches_hand_arithmetic():
    rng = np.random.default_rng(0)
    scores = rng.normal(size=(6, 5))
    targets = rng.integers(0, 5, 6)
    manual = np.mean([-(scores[i, targets[i]] - np.log(np.exp(scores[i]).sum())) for i in range(6)])
    assert abs(cross_entropy_loss(torch.as_tensor(scores), targets).item() - manual) < 1e-10


def test_learning_rate_decay_schedule():
    tr = Trainer("local", toy_sequence(), TrainConfig(**SMALL, lr_step=10, lr_decay=0.8))
    for _ in range(10):
        tr.optimizer.step()  # no gradients, so only the schedule advances
        tr.scheduler.step()
    assert abs(tr.lr - 0.0008) < 1e-12


def test_only_local_has_scheduler():
    seq = toy_sequence()
    assert Trainer("global", seq, TrainConfig(**SMALL)).scheduler is None
    assert Trainer("repeat", seq, TrainConfig(**SMALL)).scheduler is None


def test_repeat_batches_contain_only_repeating_facts():
    seq = add_reverse_relations(toy_sequence())
    tr = Trainer("repeat", seq, TrainConfig(**SMALL, top_k=2))
    rep = build_repeating_graph(seq, 2)
    seen = 0
    for t, _, facts, _ in tr.batches("train"):
        allowed = set(map(tuple, rep.snapshots[t].tolist()))
        assert set(map(tuple, facts.tolist())) <= allowed
        seen += facts.shape[0]
    assert seen == sum(rep.snapshots[t].shape[0] for t in seq.split_range("train"))


def test_local_loss_decreases_over_five_epochs():
    seq = toy_sequence()
    tr = Trainer("local", seq, TrainConfig(m=3))
    losses = [tr.train_epoch()[0] for _ in range(5)]
    assert all(b < a for a, b in zip(losses, losses[1:])), losses


def test_same_seed_same_losses():
    seq = toy_sequence()
    runs = []
    for _ in range(2):
        tr = Trainer("global", seq, TrainConfig(**SMALL))
        runs.append([tr.train_epoch()[0] for _ in range(2)])
    assert runs[0] == runs[1]


def test_modules_share_no_parameters():
    seq = toy_sequence()
    models = [Trainer(m, seq, TrainConfig(**SMALL)).model for m in ("local", "global", "repeat")]
    ptrs = [{p.data_ptr() for p in model.parameters()} for model in models]
    assert not (ptrs[0] & ptrs[1]) and not (ptrs[0] & ptrs[2]) and not (ptrs[1] & ptrs[2])


def test_divergence_detected():
    tr = Trainer("global", toy_sequence(), TrainConfig(**SMALL))
    with torch.no_grad():
        tr.model.entity_emb.fill_(float("nan"))
    with pytest.raises(TrainingDivergence):
        tr.train_epoch()


def test_fit_writes_log_and_selects_best(tmp_path):
    seq = toy_sequence(valid_start=7, test_start=9)
    log = tmp_path / "log.csv"
    ckpt = Trainer("global", seq, TrainConfig(**SMALL)).fit(str(log))
    lines = log.read_text().splitlines()
    assert lines[0].split(",") == ["epoch", "loss", "lr", "train_facts", "valid_mrr", "seconds"]
    assert len(lines) == 4
    best = max(float(line.split(",")[4]) for line in lines[1:])
    assert ckpt.valid_mrr == best


@pytest.mark.parametrize("module_id", ["local", "global", "repeat"])
def test_checkpoint_roundtrip_bit_exact(tmp_path, module_id):
    seq = add_reverse_relations(toy_sequence())
    tr = Trainer(module_id, seq, TrainConfig(**SMALL))
    tr.train_epoch()
    ckpt = tr.checkpoint()
    path = str(tmp_path / f"{module_id}.pt")
    save_checkpoint(ckpt, path)
    back = load_checkpoint(path, module_id, seq.num_entities, seq.num_relations)
    a, b = ckpt.build_model(), back.build_model()
    view = HistoryView(seq, build_index(seq, 8), 8)
    assert torch.equal(module_scores(a, view, 8, seq.snapshots[8])[0], module_scores(b, view, 8, seq.snapshots[8])[0])


def test_checkpoint_errors(tmp_path):
    seq = toy_sequence()
    ckpt = Trainer("local", seq, TrainConfig(**SMALL)).checkpoint()
    path = str(tmp_path / "local.pt")
    save_checkpoint(ckpt, path)
    with pytest.raises(CheckpointError, match="local"):
        load_checkpoint(path, "global")
    with pytest.raises(CheckpointError):
        load_checkpoint(path, "local", num_entities=41)
    bad = tmp_path / "bad.pt"
    bad.write_bytes(b"\x00garbage header" + open(path, "rb").read()[16:])
    with pytest.raises(CheckpointError):
        load_checkpoint(str(bad))
    with pytest.raises(FileNotFoundError):
        load_checkpoint(str(tmp_path / "none.pt"))


def test_checkpoint_version_mismatch(tmp_path):
    blob = {"format": "rlgnet-checkpoint", "version": 99, "module_id": "local"}
    path = str(tmp_path / "v.pt")
    torch.save(blob, path)
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)


def test_static_constraint_is_accepted():
    seq = add_reverse_relations(from_quadruples([(0, 0, 1, 0), (0, 0, 1, 1)], 4, 1))
    tr = Trainer("repeat", seq, TrainConfig(**SMALL, static_constraint=True))
    assert tr.cfg.static_constraint

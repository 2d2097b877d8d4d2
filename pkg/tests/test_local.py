import math

import numpy as np
import pytest
import torch

from gradcheck import relative_errors
from oracles import dense_gcn
from rlgnet.data import add_reverse_relations, from_quadruples
from rlgnet.history import build_index
from rlgnet.local_history import LocalHistoryModule, RelGraphLayer
from rlgnet.ops import attention_pool, masked_softmax
from rlgnet.protocol import CausalityError, HistoryView


def view_at(seq, t):
    return HistoryView(seq, build_index(seq, t), t)


def small_local(E=8, R=4, dim=6, m=3, layers=1, seed=0):
    torch.manual_seed(seed)
    model = LocalHistoryModule(E, R, dim=dim, time_dim=4, num_layers=layers, history_len=m, channels=3).double()
    return model.eval()


def test_init_states_is_entity_table():
    model = LocalHistoryModule(10, 4)
    h = model.init_states()
    assert h.shape == (10, 200)
    assert torch.equal(h, model.entity_emb)


def test_one_neighbour_message():
    d = 4
    layer = RelGraphLayer(d, activation=None).double()
    h = torch.randn(3, d, dtype=torch.float64)
    rel = torch.randn(2, d, dtype=torch.float64)
    out = layer(h, rel, torch.tensor([0]), torch.tensor([1]), torch.tensor([2]), torch.tensor([0.0, 0.0, 1.0], dtype=torch.float64))
    phi = torch.cat([h[0], rel[1], h[0] + rel[1], h[0] * rel[1]])
    assert torch.allclose(out[2], layer.w_msg.weight @ phi + layer.w_self.weight @ h[2])
    # isolated nodes only see the self-loop
    assert torch.allclose(out[1], layer.w_self.weight @ h[1])


@pytest.mark.parametrize("layers", [1, 2])
def test_gcn_matches_dense_oracle(layers):
    rng = np.random.default_rng(0)
    for case in range(30):
        model = small_local(layers=layers, seed=case)
        snap = np.unique(np.column_stack([rng.integers(0, 8, 12), rng.integers(0, 4, 12), rng.integers(0, 8, 12)]), axis=0)
        h = torch.randn(8, 6, dtype=torch.float64)
        got = model.gcn_forward(snap, h).detach().numpy()
        ws = [(l.w_msg.weight.detach().numpy(), l.w_self.weight.detach().numpy()) for l in model.layers]
        want = dense_gcn(h.numpy(), model.relation_emb.detach().numpy(), snap, ws)
        assert np.abs(got - want).max() < 1e-6


def test_gcn_permutation_equivariant():
    model = small_local()
    rng = np.random.default_rng(1)
    snap = np.column_stack([rng.integers(0, 8, 10), rng.integers(0, 4, 10), rng.integers(0, 8, 10)])
    h = torch.randn(8, 6, dtype=torch.float64)
    perm = rng.permutation(8)
    psnap = snap.copy()
    psnap[:, 0], psnap[:, 2] = perm[snap[:, 0]], perm[snap[:, 2]]
    ph = torch.empty_like(h)
    ph[torch.as_tensor(perm)] = h
    out = model.gcn_forward(snap, h)
    pout = model.gcn_forward(psnap, ph)
    assert (pout[torch.as_tensor(perm)] - out).abs().max() < 1e-9


def _seq(T=5):
    rng = np.random.default_rng(3)
    rows = [(int(rng.integers(8)), int(rng.integers(2)), int(rng.integers(8)), t) for t in range(T) for _ in range(6)]
    return add_reverse_relations(from_quadruples(rows, 8, 2, num_timestamps=T))


def test_evolve_window_lengths():
    seq = _seq()
    model = small_local(m=3)
    ts, states = model.evolve(view_at(seq, 4), 4)
    assert ts == [1, 2, 3] and len(states) == 4
    assert all(s.shape == (8, 6) for s in states)
    ts, _ = model.evolve(view_at(seq, 1), 1)
    assert ts == [0]
    one = small_local(m=1)
    ts, states = one.evolve(view_at(seq, 4), 4)
    assert ts == [3] and len(states) == 2


def test_evolve_runs_over_empty_snapshots():
    seq = add_reverse_relations(from_quadruples([(0, 0, 1, 4)], 8, 2, num_timestamps=5))
    model = small_local(m=3)
    ts, states = model.evolve(view_at(seq, 4), 4)
    assert len(ts) == 3
    assert not torch.equal(states[-1], states[0])


def test_attention_single_timestamp_is_candidate_mean():
    seq = _seq()
    model = small_local(m=1)
    view = view_at(seq, 4)
    queries = seq.snapshots[4][:, :2]
    ts, states = model.evolve(view, 4)
    ctx = model.candidate_attention(view, ts, states, queries, 4)
    snap = seq.snapshots[3]
    for q, (s, r) in enumerate(queries.tolist()):
        objs = snap[(snap[:, 0] == s) & (snap[:, 1] == r), 2]
        want = states[0][torch.as_tensor(objs)].mean(0) if objs.size else torch.zeros(6, dtype=torch.float64)
        assert torch.allclose(ctx[q], want)


def test_attention_empty_candidates_gives_zero():
    seq = add_reverse_relations(from_quadruples([(0, 0, 1, 0), (2, 1, 3, 4)], 8, 2, num_timestamps=5))
    model = small_local(m=3)
    view = view_at(seq, 4)
    ts, states = model.evolve(view, 4)
    ctx = model.candidate_attention(view, ts, states, np.array([[5, 1]]), 4)
    assert torch.count_nonzero(ctx) == 0


def test_softmax_weighting_arithmetic():
    u, v = torch.randn(6, dtype=torch.float64), torch.randn(6, dtype=torch.float64)
    logits = torch.tensor([[math.log(1.0), math.log(3.0)]], dtype=torch.float64)
    out = attention_pool(logits, torch.stack([u, v])[None])
    assert torch.allclose(out[0], 0.25 * u + 0.75 * v, atol=1e-12)


def test_module_attention_with_hand_set_logits(monkeypatch):
    seq = _seq()
    model = small_local(m=2)
    view = view_at(seq, 4)
    queries = seq.snapshots[4][:1, :2]
    ts, states = model.evolve(view, 4)
    logits = iter([torch.tensor([0.0], dtype=torch.float64), torch.tensor([math.log(3.0)], dtype=torch.float64)])
    means = []
    orig = model.attention_logits

    def fake(h_t, q, off, cand_mean):
        means.append(cand_mean)
        orig(h_t, q, off, cand_mean)
        return next(logits)

    monkeypatch.setattr(model, "attention_logits", fake)
    ctx = model.candidate_attention(view, ts, states, queries, 4)
    assert torch.allclose(ctx, 0.25 * means[0] + 0.75 * means[1])


def test_attention_weights_sum_to_one():
    w = masked_softmax(torch.randn(5, 7, dtype=torch.float64), dim=1)
    assert torch.allclose(w.sum(1), torch.ones(5, dtype=torch.float64), atol=1e-6)


def test_score_shape_and_causality():
    seq = _seq()
    model = small_local(m=3)
    view = view_at(seq, 3)
    scores = model.score(view, 3, seq.snapshots[3])
    assert scores.shape == (seq.snapshots[3].shape[0], 8)
    assert view.max_accessed == 2
    with pytest.raises(CausalityError):
        view.snapshot(3)


def test_window_invariance():
    seq = _seq(T=6)
    model = small_local(m=2)
    full = model.score(view_at(seq, 5), 5, seq.snapshots[5])
    cut = seq.subset(range(3, 6))
    part = model.score(view_at(cut, 2), 2, cut.snapshots[2])
    assert torch.equal(full, part)


def test_score_permutation_equivariant():
    seq = _seq()
    model = small_local(m=2)
    perm = np.random.default_rng(5).permutation(8)
    pmodel = small_local(m=2)
    pmodel.load_state_dict(model.state_dict())
    with torch.no_grad():
        pmodel.entity_emb[torch.as_tensor(perm)] = model.entity_emb
    snaps = []
    for s in seq.snapshots:
        p = s.copy()
        p[:, 0], p[:, 2] = perm[s[:, 0]], perm[s[:, 2]]
        snaps.append(p)
    pseq = type(seq)(tuple(snaps), 8, 2, seq.valid_start, seq.test_start, augmented=True)
    out = model.score(view_at(seq, 4), 4, seq.snapshots[4])
    pout = pmodel.score(view_at(pseq, 4), 4, pseq.snapshots[4])
    assert (pout[:, torch.as_tensor(perm)] - out).abs().max() < 1e-9


def test_gradients_all_parameters():
    seq = _seq()
    model = small_local(m=2)
    view = view_at(seq, 4)
    facts = seq.snapshots[4]
    target = torch.as_tensor(facts[:, 2])
    loss = lambda: torch.nn.functional.cross_entropy(model.score(view, 4, facts), target)  # noqa: E731
    errs = relative_errors(model, loss)
    assert max(errs.values()) < 1e-4, errs

import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from gradcheck import relative_errors
from rlgnet.numeric import NumericEmbedding


def test_zero_input_gives_bias_terms():
    e = NumericEmbedding(8)
    out = e(0.0)
    assert torch.allclose(out, torch.cat([torch.cos(e.b1), torch.tanh(e.b2)]))


@given(st.floats(-1e4, 1e4, allow_nan=False))
@settings(max_examples=100, deadline=None)
def test_ranges_and_shape(x):
    e = NumericEmbedding(200)
    out = e(x)
    assert out.shape == (200,)
    assert out[:100].abs().max() <= 1.0
    assert out[100:].abs().max() <= 1.0


def test_batched_shape():
    e = NumericEmbedding(48)
    assert e(torch.arange(6).reshape(2, 3)).shape == (2, 3, 48)


def test_integer_input_cast():
    e = NumericEmbedding(4)
    assert torch.equal(e(3), e(3.0))


def test_cosine_periodicity():
    e = NumericEmbedding(6).double()
    with torch.no_grad():
        e.w1.copy_(torch.tensor([0.5, 1.0, 2.0], dtype=torch.float64))
    for i, w in enumerate(e.w1.tolist()):
        a, b = e(1.3), e(1.3 + 2 * math.pi / w)
        assert abs(a[i].item() - b[i].item()) < 1e-9


def test_rejects_non_finite():
    e = NumericEmbedding(4)
    for bad in (float("nan"), float("inf")):
        with pytest.raises(ValueError):
            e(bad)


def test_odd_dim_rejected():
    with pytest.raises(ValueError):
        NumericEmbedding(7)


def test_gradients_match_finite_differences():
    torch.manual_seed(0)
    e = NumericEmbedding(10).double()
    x = torch.tensor([0.0, 1.5, -2.0, 7.0], dtype=torch.float64)
    weights = torch.randn(4, 10, dtype=torch.float64)
    errs = relative_errors(e, lambda: (e(x) * weights).sum())
    assert set(errs) == {"w1", "b1", "w2", "b2"}
    assert max(errs.values()) < 1e-4, errs

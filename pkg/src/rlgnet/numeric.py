"""Scalar-to-vector embedding with a periodic (cosine) and a saturating (tanh) half."""
import math

import torch
from torch import nn


class NumericEmbedding(nn.Module):
    """``x -> [cos(w1 * x + b1); tanh(w2 * x + b2)]``, elementwise in each half.

    Inputs are raw scalars (time offsets, absolute timestamps, counts) of any
    shape; the output gets a trailing dimension of size ``dim``.
    """

    def __init__(self, dim: int):
        super().__init__()
        if dim <= 0 or dim % 2:
            raise ValueError(f"embedding dimension must be a positive even number, got {dim}")
        half = dim // 2
        self.dim = dim
        self.w1 = nn.Parameter(torch.empty(half))
        self.b1 = nn.Parameter(torch.empty(half))
        self.w2 = nn.Parameter(torch.empty(half))
        self.b2 = nn.Parameter(torch.empty(half))
        self.reset_parameters()

    def reset_parameters(self):
        bound = 1.0 / math.sqrt(self.dim // 2)
        for p in (self.w1, self.b1, self.w2, self.b2):
            nn.init.uniform_(p, -bound, bound)

    def forward(self, x) -> torch.Tensor:
        x = torch.as_tensor(x, dtype=self.w1.dtype, device=self.w1.device)
        if not torch.isfinite(x).all():
            raise ValueError("numeric embedding input must be finite")
        x = x.unsqueeze(-1)
        return torch.cat([torch.cos(x * self.w1 + self.b1), torch.tanh(x * self.w2 + self.b2)], dim=-1)

"""Small tensor helpers shared by the scoring modules."""
import torch
from torch import nn


def masked_softmax(logits: torch.Tensor, mask: torch.Tensor | None = None, dim: int = -1) -> torch.Tensor:
    """Softmax over ``dim`` restricted to ``mask``; rows with nothing unmasked get all-zero weights."""
    if mask is None:
        return torch.softmax(logits, dim=dim)
    any_valid = mask.any(dim=dim, keepdim=True)
    safe = logits.masked_fill(~mask, float("-inf")).masked_fill(~any_valid, 0.0)
    return torch.softmax(safe, dim=dim) * mask


def attention_pool(logits: torch.Tensor, values: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
    """Weighted sum of ``values`` (Q, K, d) with softmax(``logits``) (Q, K) weights."""
    w = masked_softmax(logits, mask, dim=1)
    return torch.einsum("qk,qkd->qd", w, values)


def xavier_init(module: nn.Module) -> None:
    for m in module.modules():
        if isinstance(m, (nn.Linear, nn.Conv1d)):
            nn.init.xavier_uniform_(m.weight)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


def as_index(x, device=None) -> torch.Tensor:
    return torch.as_tensor(x, dtype=torch.long, device=device)

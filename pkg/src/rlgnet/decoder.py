"""ConvTransE-style decoder shared (as a class, never as weights) by the local and global modules."""
import torch
from torch import nn


class ConvTransEDecoder(nn.Module):
    """Stack ``channels`` query vectors, convolve along the embedding axis, project back to
    ``dim`` and score every entity by inner product.

    No batch normalisation: snapshot batches can hold a single query.
    """

    def __init__(self, in_channels: int, dim: int, channels: int = 50, kernel_size: int = 3, dropout: float = 0.2):
        super().__init__()
        self.in_channels = in_channels
        self.dim = dim
        self.drop_in = nn.Dropout(dropout)
        self.conv = nn.Conv1d(in_channels, channels, kernel_size, padding=(kernel_size - 1) // 2)
        self.drop_hidden = nn.Dropout(dropout)
        self.fc = nn.Linear(channels * dim, dim)
        self.drop_feat = nn.Dropout(dropout)

    def project(self, stacked: torch.Tensor) -> torch.Tensor:
        """(Q, in_channels, dim) -> (Q, dim)."""
        x = self.drop_in(stacked)
        x = torch.relu(self.conv(x))
        x = self.drop_hidden(x)
        x = self.fc(x.flatten(1))
        return torch.relu(self.drop_feat(x))

    def forward(self, stacked: torch.Tensor, entities: torch.Tensor) -> torch.Tensor:
        return self.project(stacked) @ entities.t()

"""
Parameter-free arithmetic blocks. They are modules, not inline tensor expressions, so that the
FLOPs counter can attach a rule to each of them.
"""
import torch
from torch import nn


class ElementwiseSum(nn.Module):
    def forward(self, *terms: torch.Tensor) -> torch.Tensor:
        out = terms[0]
        for term in terms[1:]:
            out = out + term
        return out


class ChannelScale(nn.Module):
    """x * gate, one gate value per (sample, channel) broadcast over the spatial dims."""

    def forward(self, x: torch.Tensor, gate: torch.Tensor) -> torch.Tensor:
        return x * gate[:, :, None, None]


class ScaledDotAttention(nn.Module):
    """softmax(q k^T / sqrt(d)) v over the last two dims."""

    def forward(self, q: torch.Tensor, k: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
        attention = torch.softmax(q @ k.transpose(-2, -1) / q.shape[-1] ** 0.5, dim=-1)
        return attention @ v

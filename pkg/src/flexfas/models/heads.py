from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import torch
from torch import nn


class HeadKind(Enum):
    BINARY_LOGIT = 'binary_logit'
    BINARY_MAP = 'binary_map'

    @classmethod
    def parse(cls, raw: 'str | HeadKind') -> 'HeadKind':
        if isinstance(raw, HeadKind):
            return raw
        aliases = {'logit': 'binary_logit', 'map': 'binary_map'}
        raw = raw.strip().lower()
        return cls(aliases.get(raw, raw))


@dataclass(frozen=True)
class HeadConfig:
    kind: HeadKind = HeadKind.BINARY_LOGIT
    map_size: Tuple[int, int] | None = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', HeadKind.parse(self.kind))
        if self.map_size is not None:
            object.__setattr__(self, 'map_size', tuple(int(s) for s in self.map_size))


class LogitHead(nn.Module):
    """Global average pool, then one linear layer to a scalar logit per sample."""

    def __init__(self, in_channels: int):
        super().__init__()
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.fc = nn.Linear(in_channels, 1)

    @property
    def final_layer(self) -> nn.Module:
        return self.fc

    def forward(self, fused: torch.Tensor) -> torch.Tensor:
        return self.fc(self.pool(fused).flatten(1)).squeeze(1)

    @staticmethod
    def to_score(output: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(output)


class MapHead(nn.Module):
    """1x1 conv to a one-channel live/spoof map, optionally pooled to a fixed grid first."""

    def __init__(self, in_channels: int, map_size: Tuple[int, int] | None = None):
        super().__init__()
        self.resize = nn.AdaptiveAvgPool2d(map_size) if map_size is not None else nn.Identity()
        self.conv = nn.Conv2d(in_channels, 1, kernel_size=1)

    @property
    def final_layer(self) -> nn.Module:
        return self.conv

    def forward(self, fused: torch.Tensor) -> torch.Tensor:
        return self.conv(self.resize(fused)).squeeze(1)

    @staticmethod
    def to_score(output: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(output).flatten(1).mean(dim=1)


def build_head(config: HeadConfig, in_channels: int) -> LogitHead | MapHead:
    if config.kind is HeadKind.BINARY_LOGIT:
        return LogitHead(in_channels)
    return MapHead(in_channels, config.map_size)

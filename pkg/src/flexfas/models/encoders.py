from abc import ABC, abstractmethod
from typing import Tuple

import torch
from torch import nn

from .ops import ElementwiseSum, ScaledDotAttention

ENCODER_IN_CHANNELS = 3


class BranchEncoder(nn.Module, ABC):
    """Maps a [B, 3, H, W] modality input to [B, C', H', W'] features."""

    def __init__(self, feature_channels: int, image_size: Tuple[int, int]):
        super().__init__()
        self.feature_channels = feature_channels
        self.image_size = tuple(image_size)

    @abstractmethod
    def output_grid(self) -> Tuple[int, int]:
        pass


def conv_bn_relu(in_channels: int, out_channels: int, stride: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=stride, padding=1, bias=False),
        nn.BatchNorm2d(out_channels),
        nn.ReLU(),
    )


def _halved(size: int, times: int) -> int:
    for _ in range(times):
        size = (size + 1) // 2
    return size


class ToyCNN(BranchEncoder):
    """Three stride-2 conv3x3-BN-ReLU blocks. Plain convolution stands in for central-difference conv."""

    def __init__(self, feature_channels: int, image_size: Tuple[int, int]):
        super().__init__(feature_channels, image_size)
        mid = max(8, feature_channels // 2)
        self.blocks = nn.Sequential(
            conv_bn_relu(ENCODER_IN_CHANNELS, mid, 2),
            conv_bn_relu(mid, mid, 2),
            conv_bn_relu(mid, feature_channels, 2),
        )

    def output_grid(self) -> Tuple[int, int]:
        return _halved(self.image_size[0], 3), _halved(self.image_size[1], 3)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.blocks(x)


class ResidualBlock(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, stride: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_channels)
        self.relu1 = nn.ReLU()
        self.conv2 = nn.Conv2d(out_channels, out_channels, kernel_size=3, stride=1, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_channels)
        self.relu2 = nn.ReLU()
        if stride != 1 or in_channels != out_channels:
            self.downsample = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, kernel_size=1, stride=stride, bias=False),
                nn.BatchNorm2d(out_channels),
            )
        else:
            self.downsample = nn.Identity()
        self.add = ElementwiseSum()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.relu1(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu2(self.add(out, self.downsample(x)))


class ToyResNet(BranchEncoder):
    """Stride-2 stem followed by two stride-2 residual blocks."""

    def __init__(self, feature_channels: int, image_size: Tuple[int, int]):
        super().__init__(feature_channels, image_size)
        mid = max(8, feature_channels // 2)
        self.stem = conv_bn_relu(ENCODER_IN_CHANNELS, mid, 2)
        self.layer1 = ResidualBlock(mid, mid, 2)
        self.layer2 = ResidualBlock(mid, feature_channels, 2)

    def output_grid(self) -> Tuple[int, int]:
        return _halved(self.image_size[0], 3), _halved(self.image_size[1], 3)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.layer2(self.layer1(self.stem(x)))


class SelfAttention(nn.Module):
    """Multi-head scaled dot-product self-attention over [B, N, C] tokens."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        assert dim % heads == 0, 'token width must be divisible by the head count'
        self.heads = heads
        self.head_dim = dim // heads
        self.qkv = nn.Linear(dim, dim * 3)
        self.attend = ScaledDotAttention()
        self.proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, n, c = x.shape
        qkv = self.qkv(x).reshape(b, n, 3, self.heads, self.head_dim).permute(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        out = self.attend(q, k, v).transpose(1, 2).reshape(b, n, c)
        return self.proj(out)


class TransformerLayer(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: int = 2):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = SelfAttention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, dim * mlp_ratio),
            nn.GELU(),
            nn.Linear(dim * mlp_ratio, dim),
        )
        self.add = ElementwiseSum()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.add(x, self.attn(self.norm1(x)))
        return self.add(x, self.mlp(self.norm2(x)))


class PositionEmbedding(nn.Module):
    """Adds a learned [N, C] table to a [B, N, C] token sequence."""

    def __init__(self, tokens: int, dim: int):
        super().__init__()
        self.weight = nn.Parameter(torch.zeros(1, tokens, dim))
        nn.init.trunc_normal_(self.weight, std=0.02)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        return tokens + self.weight


class ToyViT(BranchEncoder):
    """Patchify, learned position embedding, two pre-norm encoder layers, tokens folded back to the patch grid."""

    def __init__(self, feature_channels: int, image_size: Tuple[int, int], patch_size: int = 4, heads: int = 2):
        super().__init__(feature_channels, image_size)
        h, w = self.image_size
        if h % patch_size or w % patch_size:
            raise ValueError(f'Image size {h}x{w} is not divisible by patch size {patch_size}.')
        self.patch_size = patch_size
        self.patchify = nn.Conv2d(ENCODER_IN_CHANNELS, feature_channels, kernel_size=patch_size, stride=patch_size)
        grid = self.output_grid()
        self.position = PositionEmbedding(grid[0] * grid[1], feature_channels)
        self.layers = nn.Sequential(TransformerLayer(feature_channels, heads),
                                    TransformerLayer(feature_channels, heads))
        self.norm = nn.LayerNorm(feature_channels)

    def output_grid(self) -> Tuple[int, int]:
        return self.image_size[0] // self.patch_size, self.image_size[1] // self.patch_size

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        patches = self.patchify(x)
        b, c, gh, gw = patches.shape
        tokens = self.position(patches.flatten(2).transpose(1, 2))
        tokens = self.norm(self.layers(tokens))
        return tokens.transpose(1, 2).reshape(b, c, gh, gw)

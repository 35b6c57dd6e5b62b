"""Two-branch fully convolutional network: layout contours and surfaces.

A shared encoder feeds two heads: a one-channel contour head (sigmoid) and a
five-channel surface head (softmax over ceiling/floor/left/center/right).
The architecture is deliberately small; the adapter's contract is the output
file format, not the network. Weight files carry the architecture parameters
so loading never depends on code defaults.
"""

from __future__ import annotations

import torch
from torch import nn

ARCH_VERSION = 1
SURFACE_CHANNELS = 5


class TwoBranchNet(nn.Module):
    def __init__(self, base: int = 16):
        super().__init__()
        self.base = base
        self.encoder = nn.Sequential(
            nn.Conv2d(3, base, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(base, base * 2, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(base * 2, base * 2, 3, padding=1),
            nn.ReLU(inplace=True),
        )
        self.contour_head = nn.Conv2d(base * 2, 1, 3, padding=1)
        self.surface_head = nn.Conv2d(base * 2, SURFACE_CHANNELS, 3, padding=1)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        size = x.shape[-2:]
        feats = self.encoder(x)
        contour = torch.sigmoid(self.contour_head(feats))
        surfaces = torch.softmax(self.surface_head(feats), dim=1)
        contour = nn.functional.interpolate(
            contour, size=size, mode="bilinear", align_corners=False
        )
        surfaces = nn.functional.interpolate(
            surfaces, size=size, mode="bilinear", align_corners=False
        )
        # interpolation can nudge the softmax off unit sum; renormalize
        surfaces = surfaces.clamp(min=0.0)
        surfaces = surfaces / surfaces.sum(dim=1, keepdim=True).clamp(min=1e-8)
        return contour.clamp(0.0, 1.0), surfaces


def save_model(model: TwoBranchNet, path) -> None:
    torch.save(
        {
            "arch_version": ARCH_VERSION,
            "base": model.base,
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_model(path, device: str = "cpu") -> TwoBranchNet:
    try:
        payload = torch.load(path, map_location=device, weights_only=True)
    except Exception as exc:
        raise ValueError(f"{path}: cannot load weight file: {exc}") from exc
    if not isinstance(payload, dict) or "state_dict" not in payload:
        raise ValueError(f"{path}: not a coarse-net weight file")
    if payload.get("arch_version") != ARCH_VERSION:
        raise ValueError(f"{path}: unsupported architecture version")
    model = TwoBranchNet(base=int(payload["base"]))
    model.load_state_dict(payload["state_dict"])
    model.to(device)
    model.eval()
    return model


def init_model(seed: int = 0, base: int = 16) -> TwoBranchNet:
    torch.manual_seed(seed)
    model = TwoBranchNet(base=base)
    model.eval()
    return model

"""Map depth maps to and from the network's value range.

Valid depth maps linearly onto [-1, 1] over the rig's [near, far] window;
background (invalid) pixels sit at +1. Because the window carries slack
around the shape sphere, true surface codes stay below the background band,
so decoding can classify pixels by value alone.
"""

from __future__ import annotations

import numpy as np
import torch

from ..geometry import DepthMap

BACKGROUND_CODE = 1.0

# Codes within this distance of the background count as invalid on decode.
INVALID_BAND = 0.05


def depth_to_net(dmap: DepthMap, near: float, far: float) -> torch.Tensor:
    """Encode a depth map as a (1, H, W) float32 tensor in [-1, 1]."""
    code = 2.0 * (dmap.depth - near) / (far - near) - 1.0
    code = np.where(dmap.valid, code, BACKGROUND_CODE)
    return torch.from_numpy(code.astype(np.float32)).unsqueeze(0)


def net_to_depth(tensor: torch.Tensor, near: float, far: float, view_index: int = 0) -> DepthMap:
    """Decode a network output back into a depth map."""
    code = tensor.detach().cpu().numpy().astype(np.float64).squeeze()
    if code.ndim != 2:
        raise ValueError(f"expected a single-channel image, got shape {tuple(tensor.shape)}")
    code = np.clip(code, -1.0, 1.0)
    valid = code <= BACKGROUND_CODE - INVALID_BAND
    depth = near + (code + 1.0) / 2.0 * (far - near)
    return DepthMap(depth=np.where(valid, depth, 0.0), valid=valid, view_index=view_index)

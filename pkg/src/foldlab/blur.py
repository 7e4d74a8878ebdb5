"""Post-compositing degradations: uniform Gaussian and linear motion blur.

Both operate on the full composited image (float arrays in [0, 1]) with
edge-replicate padding and unit-sum kernels, so mean intensity is essentially
preserved and canonical parameters are exact identities.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class BlurKernel:
    weights: np.ndarray  # 2-D, non-negative, sums to 1
    anchor: tuple[int, int]  # center index (row, col)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] % 2 == 0 or w.shape[1] % 2 == 0:
            raise InvalidArgument("kernel must be 2-D with odd side lengths")
        if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidArgument("kernel weights must be non-negative and sum to 1")
        object.__setattr__(self, "weights", w)


def _kernel_extent(pct: float, shape) -> int:
    h, w = shape[0], shape[1]
    return int(round(pct / 100.0 * max(w, h)))


def gaussian_kernel(width: int) -> BlurKernel:
    if width % 2 == 0:
        width += 1
    sigma = width / 6.0
    x = np.arange(width) - width // 2
    g = np.exp(-0.5 * (x / sigma) ** 2) if sigma > 0 else np.ones(1)
    g /= g.sum()
    k = np.outer(g, g)
    k /= k.sum()
    return BlurKernel(k, (width // 2, width // 2))


def motion_kernel(length: int, angle: float) -> BlurKernel:
    """Rasterized line of `length` pixels at `angle`, uniform weights."""
    side = length if length % 2 == 1 else length + 1
    k = np.zeros((side, side))
    c = side // 2
    half = (length - 1) / 2.0
    # unit steps along the segment, rounded onto the grid; symmetric about the
    # center so the pi/2 kernel is the exact transpose of the 0 kernel
    steps = np.arange(length) - half
    xs = np.floor(c + steps * np.cos(angle) + 0.5).astype(int)
    ys = np.floor(c + steps * np.sin(angle) + 0.5).astype(int)
    k[ys, xs] = 1.0
    k /= k.sum()
    return BlurKernel(k, (c, c))


def _convolve(image: np.ndarray, kernel: BlurKernel) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    return cv2.filter2D(
        img, -1, cv2.flip(kernel.weights, -1), borderType=cv2.BORDER_REPLICATE
    )


def gaussian_blur(image: np.ndarray, kernel_pct: float) -> np.ndarray:
    if kernel_pct < 0:
        raise InvalidArgument("kernel_pct must be >= 0")
    width = _kernel_extent(kernel_pct, image.shape)
    if width <= 1 or kernel_pct == 0:
        return image.copy()
    return _convolve(image, gaussian_kernel(width))


def motion_blur(image: np.ndarray, length_pct: float, angle: float) -> np.ndarray:
    if length_pct < 0:
        raise InvalidArgument("length_pct must be >= 0")
    if not 0 <= angle <= np.pi:
        raise InvalidArgument("angle must lie in [0, pi]")
    length = _kernel_extent(length_pct, image.shape)
    if length <= 1:
        return image.copy()
    return _convolve(image, motion_kernel(length, angle))

"""Shift-invariant motion blur: random trajectory kernels and their application."""
from dataclasses import dataclass

import numpy as np

MAX_SUPPORT = 31


@dataclass
class BlurKernel:
    k: np.ndarray
    length: float = 0.0

    @property
    def support(self):
        return self.k.shape[0]


def delta_kernel(size=1):
    k = np.zeros((size, size))
    k[size // 2, size // 2] = 1.0
    return BlurKernel(k, 0.0)


def _trajectory(rng, n_steps, max_length):
    """Random-walk camera path with inertia; returns (n_steps, 2) points centred at 0."""
    length = rng.uniform(1.0, max_length)
    angle = rng.uniform(0, 2 * np.pi)
    direction = np.array([np.cos(angle), np.sin(angle)])
    step = length / (n_steps - 1)
    pts = [np.zeros(2)]
    velocity = direction * step
    for _ in range(n_steps - 1):
        velocity = 0.8 * velocity + 0.2 * rng.normal(0, step, 2)
        norm = np.linalg.norm(velocity)
        if norm > 0:
            velocity *= step / norm
        pts.append(pts[-1] + velocity)
    pts = np.asarray(pts)
    return pts - pts.mean(axis=0)


def random_blur_kernel(rng=None, seed=None, max_support=MAX_SUPPORT, n_steps=64):
    """Rasterize a random sub-pixel trajectory into a unit-sum PSF.

    Each trajectory sample is splatted bilinearly onto the grid. The support is
    the smallest odd square that holds the path, capped at ``max_support``.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    if max_support % 2 == 0:
        raise ValueError("max_support must be odd")
    pts = _trajectory(rng, n_steps, max_length=max_support - 3)
    extent = np.abs(pts).max()
    size = int(min(max_support, 2 * int(np.ceil(extent)) + 3))
    size += 1 - size % 2
    c = size // 2
    k = np.zeros((size, size))
    for x, y in pts + c:
        x0, y0 = int(np.floor(x)), int(np.floor(y))
        fx, fy = x - x0, y - y0
        for yy, xx, w in ((y0, x0, (1 - fx) * (1 - fy)), (y0, x0 + 1, fx * (1 - fy)),
                          (y0 + 1, x0, (1 - fx) * fy), (y0 + 1, x0 + 1, fx * fy)):
            if 0 <= yy < size and 0 <= xx < size:
                k[yy, xx] += w
    k /= k.sum()
    path_len = float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
    return BlurKernel(k, path_len)


def apply_blur(img, kernel):
    """Zero-padded "same" 2D convolution of a (C, H, W) or (H, W) image.

    Output pixel x is sum over kernel offsets z of k[z] * img[x - z + c],
    accumulated in raster order of the kernel; zero taps are skipped. The
    fixed order makes the result independent of where the kernel's mass sits
    inside its array, so shifting image and kernel in opposite directions
    reproduces the same floats.
    """
    k = kernel.k if isinstance(kernel, BlurKernel) else np.asarray(kernel)
    img = np.asarray(img, dtype=np.float64)
    kh, kw = k.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError("kernel extents must be odd")
    ch, cw = kh // 2, kw // 2
    H, W = img.shape[-2:]
    pad = [(0, 0)] * (img.ndim - 2) + [(ch, ch), (cw, cw)]
    padded = np.pad(img, pad)
    out = np.zeros_like(img)
    for i in range(kh):
        for j in range(kw):
            w = k[i, j]
            if w == 0:
                continue
            # tap (i, j) reads the input at offset (c - i, c - j)
            y0, x0 = kh - 1 - i, kw - 1 - j
            out += w * padded[..., y0:y0 + H, x0:x0 + W]
    return out

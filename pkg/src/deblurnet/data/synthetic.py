"""Synthetic high-frame-rate sequences with known motion.

These stand in for camera captures in tests and fixtures: every frame is the
sharp image translated by a known sub-pixel displacement, so ground-truth
flow is available for each adjacent pair.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage


@dataclass
class FrameSequence:
    frames: list
    nominal_fps: float = 240.0
    source_id: str = ""
    # per frame: (dx, dy) of each layer, shape (n_frames, n_layers, 2)
    displacements: np.ndarray = None
    masks: list = field(default_factory=list)

    def __post_init__(self):
        if self.frames:
            shape = np.shape(self.frames[0])
            for fr in self.frames:
                if np.shape(fr) != shape:
                    raise ValueError("all frames in a sequence must share one shape")

    def __len__(self):
        return len(self.frames)

    def true_flow(self, i):
        """Ground-truth (u, v) from frame i to i+1 for every layer."""
        return self.displacements[i + 1] - self.displacements[i]


def translate(img, dx, dy):
    """Shift a (C, H, W) or (H, W) image by (dx, dy) pixels with bilinear sampling.

    Content moves right/down for positive dx/dy; samples outside the frame
    repeat the nearest edge pixel.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        return np.stack([translate(c, dx, dy) for c in img])
    H, W = img.shape
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    return ndimage.map_coordinates(img, [yy - dy, xx - dx], order=1, mode="nearest")


def textured_image(shape, seed=0, channels=3, smoothness=1.5):
    """Random smooth texture with a few hard-edged shapes, values in [0.05, 0.95]."""
    rng = np.random.default_rng(seed)
    H, W = shape
    base = rng.random((channels, H, W))
    img = np.stack([ndimage.gaussian_filter(c, smoothness, mode="wrap") for c in base])
    img = (img - img.min()) / max(np.ptp(img), 1e-12)
    for _ in range(4):
        h, w = rng.integers(H // 8, H // 3 + 1), rng.integers(W // 8, W // 3 + 1)
        y, x = rng.integers(0, H - h), rng.integers(0, W - w)
        img[:, y:y + h, x:x + w] = rng.random((channels, 1, 1))
    return (0.05 + 0.9 * img).astype(np.float64)


def render_synthetic_sequence(sharp, velocities, n_frames, masks=None, fps=240.0,
                              source_id="synthetic", start=None):
    """Render ``n_frames`` frames of layers moving at constant per-frame velocity.

    ``velocities`` is a list of (vx, vy) pixel-per-frame pairs, one per layer.
    ``masks`` are matching (H, W) weights in [0, 1]; the first layer defaults
    to the full frame and later layers are composited over it. With a single
    layer the motion is a global translation.
    """
    sharp = np.asarray(sharp, dtype=np.float64)
    velocities = np.asarray(velocities, dtype=np.float64).reshape(-1, 2)
    n_layers = len(velocities)
    H, W = sharp.shape[-2:]
    if masks is None:
        if n_layers != 1:
            raise ValueError("masks are required for multi-layer motion")
        masks = [np.ones((H, W))]
    if start is None:
        start = np.zeros((n_layers, 2))
    t = np.arange(n_frames, dtype=np.float64)[:, None, None]
    disp = np.asarray(start, dtype=np.float64)[None] + t * velocities[None]

    frames = []
    for i in range(n_frames):
        frame = None
        for layer in range(n_layers):
            dx, dy = disp[i, layer]
            moved = translate(sharp, dx, dy)
            if frame is None:
                frame = moved
            else:
                m = translate(masks[layer], dx, dy)
                frame = m * moved + (1 - m) * frame
        frames.append(frame.astype(np.float32))
    return FrameSequence(frames, nominal_fps=fps, source_id=source_id,
                         displacements=disp, masks=list(masks))

"""Blurry/sharp pairs from high-frame-rate video by averaging flow-gated clips."""
import logging
from dataclasses import dataclass

import numpy as np

from deblurnet.data.flow import estimate_flow, warp
from deblurnet.data.imageio import grayscale
from deblurnet.data.synthetic import FrameSequence

logger = logging.getLogger(__name__)

NE_MIN, NE_MAX = 7, 23
FLOW_TOO_LARGE = "flow-too-large"
MATCHING_ERROR = "matching-error"


@dataclass
class ClipSpec:
    start: int
    ne: int
    accepted: bool = False
    reason: str = None

    def __post_init__(self):
        if self.ne % 2 == 0 or not NE_MIN <= self.ne <= NE_MAX:
            raise ValueError(f"ne must be odd and within [{NE_MIN}, {NE_MAX}], got {self.ne}")


@dataclass
class GateResult:
    accepted: bool
    reason: str
    max_flow: float
    matching_error: float
    flows: list


@dataclass
class ImagePair:
    g: np.ndarray
    f: np.ndarray
    mean_blur_size: float
    ne: int = 0
    start: int = 0

    def __post_init__(self):
        if self.g.shape != self.f.shape:
            raise ValueError("blurry and sharp images must share one shape")


def sample_ne(rng):
    """Odd clip length drawn uniformly from 7, 9, ..., 23."""
    return int(2 * rng.integers(NE_MIN // 2, NE_MAX // 2 + 1) + 1)


def downsample_frames(seq, factor=3):
    """Area-average every frame by ``factor``; extents are floored."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    frames = [downsample_image(fr, factor) for fr in seq.frames]
    disp = None if seq.displacements is None else seq.displacements / factor
    return FrameSequence(frames, nominal_fps=seq.nominal_fps, source_id=seq.source_id,
                         displacements=disp)


def downsample_image(img, factor):
    img = np.asarray(img)
    if factor == 1:
        return img.copy()
    H, W = img.shape[-2:]
    h, w = H // factor, W // factor
    crop = img[..., :h * factor, :w * factor]
    lead = crop.shape[:-2]
    blocks = crop.reshape(*lead, h, factor, w, factor)
    return blocks.mean(axis=(-3, -1)).astype(img.dtype)


def _interior(arr, border):
    if border <= 0 or min(arr.shape[-2:]) <= 2 * border:
        return arr
    return arr[..., border:-border, border:-border]


def _matching_error(a, b, flow, border):
    """RMS grayscale difference between ``a`` and ``b`` warped back by ``flow``."""
    ga, gb = grayscale(a), grayscale(b)
    diff = _interior(warp(gb, flow.u, flow.v) - ga, border)
    return float(np.sqrt(np.mean(diff ** 2)))


def gate_clip(frames, threshold=1.0, percentile=99.0, matching_bound=0.05, border=4):
    """Accept a clip when every adjacent-frame flow stays within ``threshold`` pixels.

    The per-pair statistic is the ``percentile`` of flow magnitudes over the
    frame interior (``border`` pixels are dropped on each side, where content
    enters or leaves the view). The frame matching error is reported for
    every clip; clips above ``matching_bound`` are rejected with their own
    reason so they can be counted separately.
    """
    if len(frames) < 2:
        raise ValueError("gating needs at least two frames")
    flows = [estimate_flow(a, b) for a, b in zip(frames[:-1], frames[1:])]
    stats = [float(np.percentile(_interior(fl.magnitude, border), percentile)) for fl in flows]
    max_flow = max(stats)
    match = max(_matching_error(a, b, fl, border)
                for a, b, fl in zip(frames[:-1], frames[1:], flows))
    if max_flow > threshold:
        return GateResult(False, FLOW_TOO_LARGE, max_flow, match, flows)
    if match > matching_bound:
        logger.info("clip rejected: matching error %.4g > %.4g", match, matching_bound)
        return GateResult(False, MATCHING_ERROR, max_flow, match, flows)
    return GateResult(True, None, max_flow, match, flows)


def average_frames(frames):
    return np.mean(np.stack([np.asarray(f, dtype=np.float64) for f in frames]), axis=0)


def estimate_blur_size(frames, flows=None, border=4):
    """Mean over interior pixels of the summed adjacent-frame flow magnitudes."""
    if flows is None:
        flows = [estimate_flow(a, b) for a, b in zip(frames[:-1], frames[1:])]
    if not flows:
        return 0.0
    total = np.zeros_like(flows[0].u)
    for fl in flows:
        total += fl.magnitude
    return float(_interior(total, border).mean())


def make_pair(frames, spec, flows=None, border=4):
    """Blurry image = mean of the clip, sharp image = its central frame."""
    clip = frames[spec.start:spec.start + spec.ne]
    if len(clip) != spec.ne:
        raise ValueError(f"clip at {spec.start} needs {spec.ne} frames, only {len(clip)} left")
    g = average_frames(clip).astype(np.float32)
    f = np.asarray(clip[(spec.ne - 1) // 2], dtype=np.float32).copy()
    return ImagePair(g=g, f=f, mean_blur_size=estimate_blur_size(clip, flows, border),
                     ne=spec.ne, start=spec.start)


def extract_pairs(seq, rng, threshold=1.0, percentile=99.0, matching_bound=0.05, border=4):
    """Walk a sequence in consecutive clips of random odd length and gate each one.

    Returns ``(pairs, clips)`` where ``clips`` lists every ClipSpec tried,
    accepted or not.
    """
    frames = seq.frames
    pairs, clips = [], []
    start = 0
    while True:
        ne = sample_ne(rng)
        if start + ne > len(frames):
            break
        clip = frames[start:start + ne]
        gate = gate_clip(clip, threshold, percentile, matching_bound, border)
        spec = ClipSpec(start=start, ne=ne, accepted=gate.accepted, reason=gate.reason)
        clips.append(spec)
        if gate.accepted:
            pairs.append(make_pair(frames, spec, gate.flows, border))
        start += ne
    return pairs, clips

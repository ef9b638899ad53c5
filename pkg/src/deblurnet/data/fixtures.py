"""Deterministic synthetic inputs for the CLI and the test suite."""
import os

import numpy as np

from deblurnet.data.imageio import write_image
from deblurnet.data.synthetic import render_synthetic_sequence, textured_image
from deblurnet.data.wild import ClipSpec, make_pair

# name -> per-frame velocity (px at capture resolution), frame count
FIXTURE_SEQUENCES = {
    "seq_static": ((0.0, 0.0), 24),
    "seq_slow": ((1.5, 0.0), 24),
    "seq_diagonal": ((1.0, 1.0), 24),
    "seq_fast": ((6.0, 0.0), 24),
}


def write_frame_fixture(root, size=192, seed=0):
    """Write numbered PNG frame directories, one per sequence, under ``root``.

    Motion is given at capture resolution, so after the default factor-3
    downsampling "seq_slow" moves 0.5 px/frame and "seq_fast" 2 px/frame.
    """
    os.makedirs(root, exist_ok=True)
    dirs = []
    for i, (name, (vel, n)) in enumerate(sorted(FIXTURE_SEQUENCES.items())):
        sharp = textured_image((size, size), seed=seed + i, smoothness=4.5)
        seq = render_synthetic_sequence(sharp, [vel], n, source_id=name)
        d = os.path.join(root, name)
        os.makedirs(d, exist_ok=True)
        for j, frame in enumerate(seq.frames):
            write_image(os.path.join(d, f"{j:05d}.png"), frame)
        dirs.append(d)
    return dirs


def write_sharp_fixture(root, n=4, size=64, seed=0):
    os.makedirs(root, exist_ok=True)
    paths = []
    for i in range(n):
        p = os.path.join(root, f"sharp_{i:03d}.png")
        write_image(p, textured_image((size, size), seed=seed + i))
        paths.append(p)
    return paths


def toy_pairs(n_small=4, n_large=4, size=64, seed=0, small_speed=0.1, large_speed=1.0,
              small_ne=7, large_ne=15):
    """Two clusters of frame-averaged pairs: barely blurred and strongly blurred.

    Returns ``(pairs, blur_sizes, labels)`` with pairs as float32 (3, H, W)
    arrays and labels 0 for the small-blur cluster, 1 for the large one.
    """
    rng = np.random.default_rng(seed)
    pairs, sizes, labels = [], [], []
    specs = [(small_speed, small_ne, 0)] * n_small + [(large_speed, large_ne, 1)] * n_large
    for i, (speed, ne, label) in enumerate(specs):
        sharp = textured_image((size, size), seed=seed * 1000 + i)
        angle = rng.uniform(0, 2 * np.pi)
        vel = (speed * np.cos(angle), speed * np.sin(angle))
        half = (ne - 1) / 2
        seq = render_synthetic_sequence(sharp, [vel], ne,
                                        start=[(-half * vel[0], -half * vel[1])])
        pair = make_pair(seq.frames, ClipSpec(start=0, ne=ne, accepted=True))
        pairs.append((pair.g, pair.f))
        sizes.append(pair.mean_blur_size)
        labels.append(label)
    return pairs, np.array(sizes), np.array(labels)

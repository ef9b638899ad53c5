"""8-bit sRGB file I/O and conversion to linear [0, 1] floats."""
import os
import re

import numpy as np
from PIL import Image

FRAME_EXTENSIONS = (".png", ".ppm")


def srgb_to_linear(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= 0.04045, x / 12.92, ((x + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(x):
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    return np.where(x <= 0.0031308, x * 12.92, 1.055 * np.power(x, 1 / 2.4) - 0.055)


def to_uint8(srgb):
    return np.round(np.clip(srgb, 0.0, 1.0) * 255.0).astype(np.uint8)


def read_image(path):
    """Load an 8-bit RGB file as a linear float32 array shaped (3, H, W)."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return srgb_to_linear(arr).transpose(2, 0, 1).astype(np.float32)


def write_image(path, img):
    """Write a linear (3, H, W) float image as an 8-bit sRGB file."""
    arr = to_uint8(linear_to_srgb(np.asarray(img).transpose(1, 2, 0)))
    Image.fromarray(arr, mode="RGB").save(path)


def grayscale(img):
    """Luma of a (3, H, W) image."""
    img = np.asarray(img, dtype=np.float64)
    return 0.299 * img[0] + 0.587 * img[1] + 0.114 * img[2]


def _natural_key(name):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", name)]


def list_frames(directory):
    names = [n for n in os.listdir(directory) if n.lower().endswith(FRAME_EXTENSIONS)]
    return [os.path.join(directory, n) for n in sorted(names, key=_natural_key)]

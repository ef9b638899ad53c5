"""Line-delimited JSON index of image pairs shared by the WILD and SI generators."""
import json
import os
from dataclasses import asdict, dataclass

from deblurnet.data.imageio import read_image, write_image

MANIFEST_NAME = "manifest.jsonl"


@dataclass
class ManifestEntry:
    id: str
    blur: str
    sharp: str
    ne: int = None
    mean_blur_size: float = None
    source: str = ""
    kind: str = "wild"


def write_manifest(path, entries):
    with open(path, "w") as fh:
        for e in entries:
            fh.write(json.dumps(asdict(e), sort_keys=True) + "\n")


def read_manifest(path):
    entries = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(ManifestEntry(**json.loads(line)))
    return entries


def write_pair(out_dir, pair_id, g, f):
    blur, sharp = f"{pair_id}_blur.png", f"{pair_id}_sharp.png"
    write_image(os.path.join(out_dir, blur), g)
    write_image(os.path.join(out_dir, sharp), f)
    return blur, sharp


def load_pairs(manifest_path):
    """Read every pair listed in a manifest as linear float32 (3, H, W) arrays."""
    root = os.path.dirname(os.path.abspath(manifest_path))
    entries = read_manifest(manifest_path)
    pairs = []
    for e in entries:
        g = read_image(os.path.join(root, e.blur))
        f = read_image(os.path.join(root, e.sharp))
        pairs.append((g, f))
    return entries, pairs


def manifest_path(path):
    return os.path.join(path, MANIFEST_NAME) if os.path.isdir(path) else path


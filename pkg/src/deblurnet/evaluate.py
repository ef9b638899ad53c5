"""PSNR evaluation, inference on arbitrary-size images and residual analysis."""
import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from deblurnet.data.imageio import read_image
from deblurnet.data.manifest import read_manifest
from deblurnet.network import forward_pyramid
from deblurnet.tensor import Tensor, no_grad

IDENTICAL = "identical"
PSNR_CAP = 100.0

EVAL_HEADER = ["id", "psnr_input", "psnr_output", "residual_l1", "mean_blur_size", "status"]
ANALYSIS_HEADER = ["id", "residual_l1", "mean_blur_size", "residual_l1_std", "blur_size_std"]


def psnr(a, b, peak=1.0):
    """10 log10(peak^2 / MSE) in dB; returns ``IDENTICAL`` when the images match."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return IDENTICAL
    return 10.0 * math.log10(peak * peak / mse)


def psnr_value(p):
    """Numeric PSNR for CSV output, capping the identical sentinel."""
    return PSNR_CAP if p == IDENTICAL else p


@dataclass
class DeblurResult:
    image: np.ndarray
    s4: np.ndarray
    s2: np.ndarray
    residual: np.ndarray


def _pad_to_multiple(img, m=4):
    H, W = img.shape[-2:]
    ph, pw = (-H) % m, (-W) % m
    if ph == 0 and pw == 0:
        return img, (H, W)
    mode = "reflect" if H > ph and W > pw else "edge"
    return np.pad(img, [(0, 0)] * (img.ndim - 2) + [(0, ph), (0, pw)], mode=mode), (H, W)


def deblur(params, image, return_scales=False):
    """Run the network in eval mode on a (3, H, W) image of any size.

    The image is reflect-padded on the bottom/right to a multiple of 4 and the
    padding is removed from the result, which is clamped to [0, 1].
    """
    image = np.asarray(image)
    padded, (H, W) = _pad_to_multiple(image.astype(params.dtype))
    with no_grad():
        out = forward_pyramid(Tensor(padded[None]), params, training=False)
    result = np.clip(out.s1.data[0, :, :H, :W], 0.0, 1.0)
    if not return_scales:
        return result
    return DeblurResult(image=result, s4=out.s4.data[0], s2=out.s2.data[0],
                        residual=out.r3.data[0, :, :H, :W])


@dataclass
class EvalRecord:
    id: str
    psnr_input: object
    psnr_output: object
    residual_l1: float
    mean_blur_size: float
    status: str = "ok"

    def row(self):
        def fmt(v):
            return "" if v is None else repr(float(psnr_value(v)))
        return [self.id, fmt(self.psnr_input), fmt(self.psnr_output), fmt(self.residual_l1),
                fmt(self.mean_blur_size), self.status]


@dataclass
class EvalSummary:
    records: list
    mean_psnr_input: float
    mean_psnr_output: float
    failed: int


def evaluate_pair(params, pair_id, g, f, mean_blur_size=None):
    res = deblur(params, g, return_scales=True)
    return EvalRecord(
        id=pair_id,
        psnr_input=psnr(np.clip(g, 0, 1), f),
        psnr_output=psnr(res.image, f),
        residual_l1=float(np.mean(np.abs(res.residual))),
        mean_blur_size=mean_blur_size,
    )


def evaluate(params, manifest_path):
    """Evaluate every pair of a manifest; pairs are processed in id order."""
    root = os.path.dirname(os.path.abspath(manifest_path))
    entries = sorted(read_manifest(manifest_path), key=lambda e: e.id)
    if not entries:
        raise ValueError(f"manifest {manifest_path} lists no pairs")
    records = []
    for e in entries:
        try:
            g = read_image(os.path.join(root, e.blur))
            f = read_image(os.path.join(root, e.sharp))
            records.append(evaluate_pair(params, e.id, g, f, e.mean_blur_size))
        except (OSError, ValueError) as exc:
            records.append(EvalRecord(e.id, None, None, None, e.mean_blur_size,
                                      status=f"failed: {exc}"))
    return summarize(records)


def summarize(records):
    ok = [r for r in records if r.status == "ok"]
    mean_in = float(np.mean([psnr_value(r.psnr_input) for r in ok])) if ok else float("nan")
    mean_out = float(np.mean([psnr_value(r.psnr_output) for r in ok])) if ok else float("nan")
    return EvalSummary(records, mean_in, mean_out, failed=len(records) - len(ok))


def write_eval_csv(path, summary):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVAL_HEADER)
        for r in summary.records:
            w.writerow(r.row())


def standardize(x):
    """Shift and scale a series to mean 0 and (population) std 1.

    Returns ``None`` when the series is constant.
    """
    x = np.asarray(x, dtype=np.float64)
    std = x.std()
    if std == 0 or not np.isfinite(std):
        return None
    return (x - x.mean()) / std


@dataclass
class ResidualAnalysis:
    ids: list
    residual_l1: np.ndarray
    blur_size: np.ndarray
    residual_std: np.ndarray
    blur_std: np.ndarray
    pearson_r: float
    flag: str = None


def residual_analysis(params, manifest_path=None, records=None):
    """Residual L1 norm versus estimated blur size, standardized, with Pearson r."""
    if records is None:
        records = evaluate(params, manifest_path).records
    records = [r for r in records if r.status == "ok"]
    missing = [r.id for r in records if r.mean_blur_size is None]
    if missing:
        raise ValueError(f"pairs without mean_blur_size: {missing[:5]}")
    res = np.array([r.residual_l1 for r in records], dtype=np.float64)
    blur = np.array([r.mean_blur_size for r in records], dtype=np.float64)
    rs, bs = standardize(res), standardize(blur)
    flag = None
    r = float("nan")
    if rs is None or bs is None:
        flag = "undefined: constant series"
    else:
        r = float(np.mean(rs * bs))
    return ResidualAnalysis([x.id for x in records], res, blur, rs, bs, r, flag)


def write_analysis_csv(path, analysis):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ANALYSIS_HEADER)
        for i, pid in enumerate(analysis.ids):
            rs = "" if analysis.residual_std is None else repr(float(analysis.residual_std[i]))
            bs = "" if analysis.blur_std is None else repr(float(analysis.blur_std[i]))
            w.writerow([pid, repr(float(analysis.residual_l1[i])),
                        repr(float(analysis.blur_size[i])), rs, bs])

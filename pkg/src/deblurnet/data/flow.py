"""Dense coarse-to-fine Lucas-Kanade optical flow."""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from deblurnet.data.imageio import grayscale


@dataclass
class FlowField:
    u: np.ndarray
    v: np.ndarray
    low_confidence: bool = False

    @property
    def magnitude(self):
        return np.hypot(self.u, self.v)


def _as_gray(img):
    img = np.asarray(img, dtype=np.float64)
    return grayscale(img) if img.ndim == 3 else img


def warp(img, u, v):
    """Sample ``img`` at (x + u, y + v) with bilinear interpolation and edge clamping."""
    H, W = img.shape
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    return ndimage.map_coordinates(img, [yy + v, xx + u], order=1, mode="nearest")


def _pyramid(img, levels, presmooth):
    pyr = [ndimage.gaussian_filter(img, presmooth, mode="nearest") if presmooth else img]
    for _ in range(levels - 1):
        smooth = ndimage.gaussian_filter(pyr[-1], 1.0, mode="nearest")
        pyr.append(smooth[::2, ::2])
    return pyr


def _upsample_flow(f, shape):
    zy = shape[0] / f.shape[0]
    zx = shape[1] / f.shape[1]
    up = ndimage.zoom(f, (zy, zx), order=1, mode="nearest", grid_mode=True)
    return up[:shape[0], :shape[1]]


def _fill(field, ok, sigma):
    """Replace unreliable entries by a Gaussian-weighted mean of reliable neighbours."""
    w = ndimage.gaussian_filter(ok.astype(np.float64), sigma, mode="nearest")
    num = ndimage.gaussian_filter(np.where(ok, field, 0.0), sigma, mode="nearest")
    filled = np.where(w > 1e-3, num / np.maximum(w, 1e-3), 0.0)
    return np.where(ok, field, filled)


def estimate_flow(a, b, levels=3, window=5, iterations=3, rel_eigen=0.02, median=5,
                  presmooth=1.5, damping=0.05):
    """Displacement field mapping pixels of ``a`` onto ``b``.

    ``b(x + u, y + v) ~= a(x, y)``. Inputs may be RGB (3, H, W) or grayscale.
    Pixels whose structure tensor has a small minimum eigenvalue (flat areas,
    straight edges) take the flow of confident neighbours. Samples that warp
    outside the frame are left out of the window sums, every solve is damped
    by ``damping`` times the level's largest minimum eigenvalue, and the flow
    is median filtered after each warp.
    """
    a = _as_gray(a)
    b = _as_gray(b)
    if a.shape != b.shape:
        raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")
    if np.ptp(a) == 0 and np.ptp(b) == 0:
        z = np.zeros_like(a)
        return FlowField(z, z.copy(), low_confidence=True)

    def box(x):
        return ndimage.uniform_filter(x, window, mode="nearest")

    levels = max(1, min(levels, int(np.log2(min(a.shape))) - 1))
    pa, pb = _pyramid(a, levels, presmooth), _pyramid(b, levels, presmooth)
    u = np.zeros_like(pa[-1])
    v = np.zeros_like(pa[-1])
    confident = np.zeros(a.shape, dtype=bool)
    for lvl in range(levels - 1, -1, -1):
        A, B = pa[lvl], pb[lvl]
        H, W = A.shape
        if u.shape != A.shape:
            u = _upsample_flow(u, A.shape) * 2.0
            v = _upsample_flow(v, A.shape) * 2.0
        yy, xx = np.mgrid[0:H, 0:W]
        iy, ix = np.gradient(A)
        for _ in range(iterations):
            inside = ((xx + u >= 0) & (xx + u <= W - 1) & (yy + v >= 0) & (yy + v <= H - 1))
            wx, wy = ix * inside, iy * inside
            sxx, syy, sxy = box(wx * ix), box(wy * iy), box(wx * iy)
            trace = sxx + syy
            det = sxx * syy - sxy * sxy
            min_eig = 0.5 * (trace - np.sqrt(np.maximum(trace * trace - 4 * det, 0.0)))
            ok = min_eig > max(rel_eigen * min_eig.max(), 1e-12)
            reg = damping * min_eig.max()
            rxx, ryy = sxx + reg, syy + reg
            safe = np.where(ok, rxx * ryy - sxy * sxy, 1.0)
            it = warp(B, u, v) - A
            sxt, syt = box(wx * it), box(wy * it)
            u = u + _fill(np.where(ok, (-ryy * sxt + sxy * syt) / safe, 0.0), ok, window)
            v = v + _fill(np.where(ok, (sxy * sxt - rxx * syt) / safe, 0.0), ok, window)
            if median:
                u = ndimage.median_filter(u, median, mode="nearest")
                v = ndimage.median_filter(v, median, mode="nearest")
        if lvl == 0:
            confident = ok
    return FlowField(u, v, low_confidence=not confident.any())

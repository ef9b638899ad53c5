"""Hot im2col/col2im kernels with a compiled core and a NumPy fallback.

The compiled extension ``deblurnet._kernels`` is used when it imports; set
``DEBLURNET_BACKEND=python`` to force the pure-NumPy path. Both paths fill
columns in ``(channel, ky, kx)`` row order, which matches a weight reshaped
from ``(Cout, Cin, k, k)`` to ``(Cout, Cin*k*k)``; columns run over
``(batch, out_y, out_x)`` so a whole batch is one matrix product.
"""
import os

import numpy as np


def im2col_numpy(x, k, stride, pad, ho, wo):
    B, C, H, W = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    xp = xp.transpose(1, 0, 2, 3)
    cols = np.empty((C, k, k, B, ho, wo), dtype=x.dtype)
    for i in range(k):
        hi = i + stride * ho
        for j in range(k):
            cols[:, i, j] = xp[:, :, i:hi:stride, j:j + stride * wo:stride]
    return cols.reshape(C * k * k, B * ho * wo)


def col2im_numpy(cols, B, C, H, W, k, stride, pad, ho, wo):
    cols = cols.reshape(C, k, k, B, ho, wo).transpose(3, 0, 1, 2, 4, 5)
    # room for the last window even when it overhangs the bottom/right pad
    hp = max(H + 2 * pad, stride * (ho - 1) + k)
    wp = max(W + 2 * pad, stride * (wo - 1) + k)
    xp = np.zeros((B, C, hp, wp), dtype=cols.dtype)
    for i in range(k):
        hi = i + stride * ho
        for j in range(k):
            xp[:, :, i:hi:stride, j:j + stride * wo:stride] += cols[:, :, i, j]
    return np.ascontiguousarray(xp[:, :, pad:pad + H, pad:pad + W])


try:
    from deblurnet import _kernels as _ext
except ImportError:  # extension not built
    _ext = None


def _compiled_im2col(x, k, stride, pad, ho, wo):
    return _ext.im2col(np.ascontiguousarray(x), k, stride, pad, ho, wo)


def _compiled_col2im(cols, B, C, H, W, k, stride, pad, ho, wo):
    return _ext.col2im(np.ascontiguousarray(cols), B, C, H, W, k, stride, pad, ho, wo)


HAVE_COMPILED = _ext is not None

if HAVE_COMPILED and os.environ.get("DEBLURNET_BACKEND", "").lower() != "python":
    BACKEND = "cython"
    im2col = _compiled_im2col
    col2im = _compiled_col2im
else:
    BACKEND = "python"
    im2col = im2col_numpy
    col2im = col2im_numpy


def implementations():
    """Return ``{name: (im2col, col2im)}`` for every available backend."""
    impls = {"python": (im2col_numpy, col2im_numpy)}
    if HAVE_COMPILED:
        impls["cython"] = (_compiled_im2col, _compiled_col2im)
    return impls


def set_backend(name):
    """Switch the active kernels at runtime; returns the previous backend name."""
    global BACKEND, im2col, col2im
    impls = implementations()
    if name not in impls:
        raise ValueError(f"backend {name!r} is not available (have {sorted(impls)})")
    previous = BACKEND
    BACKEND = name
    im2col, col2im = impls[name]
    return previous

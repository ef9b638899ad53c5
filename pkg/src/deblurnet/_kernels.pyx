# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled im2col/col2im kernels.

Loop order matches the NumPy fallback in ``kernels.py`` so both backends
accumulate every output element in the same order and agree bit for bit.
"""
import numpy as np
cimport numpy as cnp

ctypedef fused real:
    float
    double


def im2col(real[:, :, :, ::1] x, int k, int stride, int pad, int ho, int wo):
    """Unfold zero-padded ``x`` (B, C, H, W) into columns (C*k*k, B*ho*wo)."""
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t b, c, i, j, oh, ow, row, ih, iw, col
    dtype = np.float32 if real is float else np.float64
    out = np.zeros((C * k * k, B * ho * wo), dtype=dtype)
    cdef real[:, ::1] cols = out
    with nogil:
        for c in range(C):
            for i in range(k):
                for j in range(k):
                    row = (c * k + i) * k + j
                    for b in range(B):
                        for oh in range(ho):
                            ih = oh * stride + i - pad
                            if ih < 0 or ih >= H:
                                continue
                            col = (b * ho + oh) * wo
                            for ow in range(wo):
                                iw = ow * stride + j - pad
                                if 0 <= iw < W:
                                    cols[row, col + ow] = x[b, c, ih, iw]
    return out


def col2im(real[:, ::1] cols, int B, int C, int H, int W, int k, int stride, int pad,
           int ho, int wo):
    """Fold columns (C*k*k, B*ho*wo) back onto (B, C, H, W), summing overlaps."""
    cdef Py_ssize_t b, c, i, j, oh, ow, row, ih, iw, col
    dtype = np.float32 if real is float else np.float64
    out = np.zeros((B, C, H, W), dtype=dtype)
    cdef real[:, :, :, ::1] x = out
    with nogil:
        for c in range(C):
            for i in range(k):
                for j in range(k):
                    row = (c * k + i) * k + j
                    for b in range(B):
                        for oh in range(ho):
                            ih = oh * stride + i - pad
                            if ih < 0 or ih >= H:
                                continue
                            col = (b * ho + oh) * wo
                            for ow in range(wo):
                                iw = ow * stride + j - pad
                                if 0 <= iw < W:
                                    x[b, c, ih, iw] = x[b, c, ih, iw] + cols[row, col + ow]
    return out

import numpy as np
import pytest

from deblurnet import kernels


def naive_im2col(x, k, stride, pad, ho, wo):
    B, C, H, W = x.shape
    cols = np.zeros((C * k * k, B * ho * wo), dtype=x.dtype)
    for b in range(B):
        for c in range(C):
            for i in range(k):
                for j in range(k):
                    for oh in range(ho):
                        for ow in range(wo):
                            y, xx = oh * stride + i - pad, ow * stride + j - pad
                            if 0 <= y < H and 0 <= xx < W:
                                cols[(c * k + i) * k + j, (b * ho + oh) * wo + ow] = x[b, c, y, xx]
    return cols


CASES = [(2, 3, 7, 6, 3, 1), (1, 2, 8, 8, 5, 2), (2, 1, 5, 9, 3, 2), (1, 1, 4, 4, 11, 2)]


@pytest.mark.parametrize("B,C,H,W,k,s", CASES)
@pytest.mark.parametrize("name", sorted(kernels.implementations()))
def test_im2col_matches_naive_loops(name, B, C, H, W, k, s, rng):
    im2col, _ = kernels.implementations()[name]
    x = rng.standard_normal((B, C, H, W))
    p = (k - 1) // 2
    ho, wo = -(-H // s), -(-W // s)
    np.testing.assert_array_equal(im2col(x, k, s, p, ho, wo), naive_im2col(x, k, s, p, ho, wo))


@pytest.mark.parametrize("B,C,H,W,k,s", CASES)
@pytest.mark.parametrize("name", sorted(kernels.implementations()))
def test_col2im_is_adjoint_of_im2col(name, B, C, H, W, k, s, rng):
    im2col, col2im = kernels.implementations()[name]
    p = (k - 1) // 2
    ho, wo = -(-H // s), -(-W // s)
    x = rng.standard_normal((B, C, H, W))
    cols = rng.standard_normal((C * k * k, B * ho * wo))
    lhs = np.sum(im2col(x, k, s, p, ho, wo) * cols)
    rhs = np.sum(x * col2im(cols, B, C, H, W, k, s, p, ho, wo))
    assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.skipif(not kernels.HAVE_COMPILED, reason="compiled kernels not built")
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_backends_agree_bitwise(dtype, rng):
    impls = kernels.implementations()
    x = rng.standard_normal((2, 4, 12, 10)).astype(dtype)
    cols = rng.standard_normal((4 * 25, 2 * 6 * 5)).astype(dtype)
    a = impls["python"][0](x, 5, 2, 2, 6, 5)
    b = impls["cython"][0](x, 5, 2, 2, 6, 5)
    assert a.dtype == b.dtype == dtype
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(impls["python"][1](cols, 2, 4, 12, 10, 5, 2, 2, 6, 5),
                                  impls["cython"][1](cols, 2, 4, 12, 10, 5, 2, 2, 6, 5))


def test_backend_name_is_reported():
    assert kernels.BACKEND in kernels.implementations()


def test_set_backend_switches_and_restores():
    before = kernels.BACKEND
    prev = kernels.set_backend("python")
    try:
        assert prev == before
        assert kernels.im2col is kernels.im2col_numpy
    finally:
        kernels.set_backend(before)
    assert kernels.BACKEND == before
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")

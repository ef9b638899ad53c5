import numpy as np

FD_STEP = 1e-6


def numerical_grad(fn, arr, step=FD_STEP, indices=None):
    """Central finite differences of scalar ``fn()`` w.r.t. entries of ``arr`` (mutated in place)."""
    flat = arr.reshape(-1)
    if indices is None:
        indices = range(flat.size)
    out = {}
    for i in indices:
        orig = flat[i]
        flat[i] = orig + step
        fp = fn()
        flat[i] = orig - step
        fm = fn()
        flat[i] = orig
        out[i] = (fp - fm) / (2 * step)
    return out


def max_rel_error(analytic, numeric, floor=1e-3):
    """Largest elementwise |a - n| / max(|a|, |n|, floor * max|n|)."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor * max(np.abs(n).max(), 1e-12))
    return float(np.max(np.abs(a - n) / scale))


def check_grad(fn, tensor, analytic, indices=None, step=FD_STEP):
    """Relative error between ``analytic`` and finite differences at ``indices`` (all if None)."""
    num = numerical_grad(fn, tensor.data, step, indices)
    idx = sorted(num)
    a = np.asarray(analytic).reshape(-1)[idx]
    n = np.array([num[i] for i in idx])
    return max_rel_error(a, n)

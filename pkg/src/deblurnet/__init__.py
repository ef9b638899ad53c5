"""Multi-scale residual deblurring network built on a small NumPy autodiff core."""
from deblurnet.kernels import BACKEND
from deblurnet.tensor import Tensor, no_grad, set_debug

__version__ = "0.1.0"

__all__ = ["BACKEND", "Tensor", "no_grad", "set_debug"]

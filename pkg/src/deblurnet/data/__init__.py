"""Dataset generation: frame averaging, flow gating, synthetic scenes and blur kernels."""

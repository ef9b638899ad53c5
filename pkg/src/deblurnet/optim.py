"""Adam with a stepwise learning-rate decay."""
import math
from dataclasses import dataclass, field, fields

import numpy as np

from deblurnet.errors import NonFiniteGradientError


@dataclass
class TrainConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    initial_lr: float = 0.001
    lr_decay_factor: float = 0.75
    lr_decay_every: int = 10000
    batch_size: int = 10
    epsilon: float = 1e-8
    max_iterations: int = 100000
    seed: int = 0
    crop_size: int = 128
    width_multiplier: str = "1"
    hflip: bool = False
    log_every: int = 1
    checkpoint_every: int = 1000
    deterministic: bool = True

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.initial_lr <= 0:
            raise ValueError("initial_lr must be positive")
        if self.crop_size % 4:
            raise ValueError(f"crop_size {self.crop_size} is not divisible by 4")
        if self.batch_size < 1 or self.lr_decay_every < 1:
            raise ValueError("batch_size and lr_decay_every must be >= 1")

    @classmethod
    def field_types(cls):
        return {f.name: f.type for f in fields(cls)}

    @classmethod
    def from_mapping(cls, values):
        """Build a config from string values, coercing each to its field type."""
        types = cls.field_types()
        kwargs = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(raw, types[key])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, overrides=None):
        values = parse_kv_file(path)
        values.update(overrides or {})
        return cls.from_mapping(values)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_kv(self):
        return "".join(f"{k} = {_format(v)}\n" for k, v in self.to_dict().items())


def _coerce(raw, typ):
    if not isinstance(raw, str):
        return raw
    if typ in (bool, "bool"):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if typ in (int, "int"):
        return int(float(raw)) if "e" in raw.lower() else int(raw)
    if typ in (float, "float"):
        return float(raw)
    return raw.strip()


def _format(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def parse_kv_file(path):
    """Read ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def lr_at(iteration, cfg):
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    return cfg.initial_lr * cfg.lr_decay_factor ** (iteration // cfg.lr_decay_every)


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_params(cls, params):
        return cls(m=[np.zeros_like(p.data) for p in params],
                   v=[np.zeros_like(p.data) for p in params], t=0)


def adam_step(params, grads, state, lr, cfg, names=None, iteration=None):
    """Apply one bias-corrected Adam update in place.

    ``grads`` may contain ``None`` for parameters that received no gradient;
    those are treated as zero. All gradients are checked before any parameter
    moves, so a rejected step leaves params and state untouched.
    """
    if len(grads) != len(params):
        raise ValueError("grads and params differ in length")
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.data.shape}")
        if not np.all(np.isfinite(g)):
            name = names[i] if names else f"param[{i}]"
            raise NonFiniteGradientError(state.t if iteration is None else iteration, name)

    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    step = lr / bc1
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros_like(p.data)
        dt = p.data.dtype.type
        m *= dt(b1)
        m += dt(1 - b1) * g
        v *= dt(b2)
        v += dt(1 - b2) * (g * g)
        denom = np.sqrt(v) / dt(math.sqrt(bc2)) + dt(cfg.epsilon)
        p.data -= dt(step) * m / denom

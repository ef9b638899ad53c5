"""Training loop over (blurry, sharp) pairs with CSV logging and resumable checkpoints."""
import csv
import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from deblurnet import checkpoint as ckpt_io
from deblurnet.errors import DatasetError
from deblurnet.network import DeblurNetParams, loss_total
from deblurnet.optim import AdamState, adam_step, lr_at
from deblurnet.tensor import Tensor

logger = logging.getLogger(__name__)

LOG_HEADER = ["iteration", "loss1", "loss2", "loss3", "total", "lr"]


@dataclass
class TrainResult:
    params: DeblurNetParams
    adam: AdamState
    iteration: int
    log: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)


def sample_batch(pairs, cfg, rng, dtype=np.float32):
    """Draw a batch of random crops, optionally flipped horizontally."""
    n = len(pairs)
    if cfg.batch_size <= n:
        idx = rng.choice(n, size=cfg.batch_size, replace=False)
    else:
        idx = rng.integers(0, n, size=cfg.batch_size)
    c = cfg.crop_size
    gs, fs = [], []
    for i in idx:
        g, f = pairs[int(i)]
        H, W = g.shape[-2:]
        if H < c or W < c:
            raise DatasetError(f"pair {i} is {H}x{W}, smaller than crop_size {c}")
        y = int(rng.integers(0, H - c + 1))
        x = int(rng.integers(0, W - c + 1))
        gc, fc = g[:, y:y + c, x:x + c], f[:, y:y + c, x:x + c]
        if cfg.hflip and rng.random() < 0.5:
            gc, fc = gc[:, :, ::-1], fc[:, :, ::-1]
        gs.append(gc)
        fs.append(fc)
    return np.stack(gs).astype(dtype), np.stack(fs).astype(dtype)


def train(pairs, cfg, params=None, out_dir=None, resume=None, log_path=None):
    """Run Adam on the three-scale loss until ``cfg.max_iterations`` steps are done.

    ``pairs`` is a sequence of ``(g, f)`` arrays shaped (3, H, W). When
    ``resume`` is a :class:`~deblurnet.checkpoint.Checkpoint`, its parameters,
    optimizer moments, RNG state and iteration counter are restored and the run
    continues exactly where it stopped.
    """
    if len(pairs) == 0:
        raise DatasetError("training set is empty")

    if resume is not None:
        params = resume.params
        adam = resume.adam or AdamState.for_params(params.parameters())
        start = resume.iteration
        rng = np.random.default_rng()
        rng.bit_generator.state = resume.rng_state
    else:
        rng = np.random.default_rng(cfg.seed)
        if params is None:
            params = DeblurNetParams.create(Fraction(cfg.width_multiplier), rng=rng)
        adam = AdamState.for_params(params.parameters())
        start = 0

    names = [n for n, _ in params.named_parameters()]
    plist = params.parameters()
    result = TrainResult(params=params, adam=adam, iteration=start)

    log_fh = writer = None
    if log_path is None and out_dir is not None:
        log_path = os.path.join(out_dir, "loss_log.csv")
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    if log_path is not None:
        fresh = resume is None or not os.path.exists(log_path)
        log_fh = open(log_path, "w" if fresh else "a", newline="")
        writer = csv.writer(log_fh)
        if fresh:
            writer.writerow(LOG_HEADER)

    try:
        for it in range(start, cfg.max_iterations):
            g, f = sample_batch(pairs, cfg, rng, params.dtype)
            params.zero_grad()
            loss, parts, _ = loss_total(Tensor(g), Tensor(f), params, training=True)
            loss.backward()
            lr = lr_at(it, cfg)
            adam_step(plist, [p.grad for p in plist], adam, lr, cfg, names=names, iteration=it)

            if it % cfg.log_every == 0 or it == cfg.max_iterations - 1:
                row = [it, parts.l1, parts.l2, parts.l3, parts.total, lr]
                result.log.append(row)
                if writer is not None:
                    writer.writerow([it] + [repr(float(v)) for v in row[1:]])
                    log_fh.flush()
                logger.debug("iter %d loss %.6g lr %.3g", it, parts.total, lr)

            result.iteration = it + 1
            done = it + 1
            if out_dir is not None and (done % cfg.checkpoint_every == 0 or done == cfg.max_iterations):
                path = os.path.join(out_dir, f"ckpt_{done:07d}.bin")
                save_state(path, params, adam, done, cfg, rng)
                result.checkpoints.append(path)
    finally:
        if log_fh is not None:
            log_fh.close()
    return result


def save_state(path, params, adam, iteration, cfg, rng):
    ck = ckpt_io.Checkpoint(params=params, adam=adam, iteration=iteration,
                            config=cfg.to_dict(), rng_state=rng.bit_generator.state)
    return ckpt_io.save(ck, path)

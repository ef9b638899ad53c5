"""Command-line entry point: ``deblurnet <command> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import click
import numpy as np

from deblurnet import checkpoint as ckpt_io
from deblurnet.data import fixtures
from deblurnet.data.blur import apply_blur, delta_kernel, random_blur_kernel
from deblurnet.data.imageio import list_frames, read_image, write_image
from deblurnet.data.manifest import (MANIFEST_NAME, ManifestEntry, load_pairs, manifest_path,
                                     write_manifest, write_pair)
from deblurnet.data.synthetic import FrameSequence
from deblurnet.data.wild import downsample_frames, extract_pairs
from deblurnet.errors import DeblurError
from deblurnet.evaluate import (deblur, evaluate, residual_analysis, write_analysis_csv,
                                write_eval_csv)
from deblurnet.network import DeblurNetParams
from deblurnet.optim import TrainConfig, parse_kv_file
from deblurnet.train import train as run_training

logger = logging.getLogger("deblurnet")

CONTEXT = {"help_option_names": ["-h", "--help"]}


class Failure(click.ClickException):
    exit_code = 1


def _echo_config(command, cfg):
    click.echo(f"# {command} config: " + json.dumps(cfg, sort_keys=True, default=str))


def _resolve(root, path):
    if path is None or os.path.isabs(path) or root is None:
        return path
    return os.path.join(root, path)


@click.group(context_settings=CONTEXT)
@click.option("--root", envvar="DEBLURNET_ROOT", type=click.Path(file_okay=False),
              default=None, help="Workspace root that relative paths resolve against.")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def main(ctx, root, verbose):
    """Multi-scale residual deblurring: data synthesis, training and evaluation."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"root": root}


def _process_sequence(args):
    directory, seed, threshold, factor, percentile, matching_bound = args
    paths = list_frames(directory)
    frames = [read_image(p) for p in paths]
    seq = FrameSequence(frames, source_id=os.path.basename(directory.rstrip(os.sep)))
    if factor > 1:
        seq = downsample_frames(seq, factor)
    rng = np.random.default_rng(seed)
    return extract_pairs(seq, rng, threshold=threshold, percentile=percentile,
                         matching_bound=matching_bound)


def _sequence_dirs(frames_dir):
    subdirs = sorted(d for d in os.listdir(frames_dir)
                     if os.path.isdir(os.path.join(frames_dir, d)))
    dirs = [os.path.join(frames_dir, d) for d in subdirs if list_frames(os.path.join(frames_dir, d))]
    if not dirs and list_frames(frames_dir):
        dirs = [frames_dir]
    return dirs


@main.command("synth-wild", context_settings=CONTEXT)
@click.option("--frames", "frames_dir", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--threshold", default=1.0, show_default=True, type=float)
@click.option("--downsample", "factor", default=3, show_default=True, type=click.IntRange(min=1))
@click.option("--percentile", default=99.0, show_default=True, type=click.FloatRange(0, 100))
@click.option("--matching-bound", default=0.05, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--jobs", default=1, show_default=True, type=click.IntRange(min=1))
@click.option("--deterministic/--no-deterministic", default=True, show_default=True)
@click.pass_obj
def synth_wild(obj, frames_dir, out_dir, threshold, factor, percentile, matching_bound, seed,
               jobs, deterministic):
    """Average flow-gated clips of frame sequences into blurry/sharp pairs."""
    root = obj["root"]
    frames_dir, out_dir = _resolve(root, frames_dir), _resolve(root, out_dir)
    _echo_config("synth-wild", {"frames": frames_dir, "out": out_dir, "threshold": threshold,
                                "downsample": factor, "percentile": percentile,
                                "matching_bound": matching_bound, "seed": seed, "jobs": jobs,
                                "deterministic": deterministic})
    if not os.path.isdir(frames_dir):
        raise click.UsageError(f"frame directory {frames_dir} does not exist")
    dirs = _sequence_dirs(frames_dir)
    if not dirs:
        raise click.UsageError(f"no PNG/PPM frames found under {frames_dir}")

    seeds = np.random.SeedSequence(seed).spawn(len(dirs))
    tasks = [(d, s, threshold, factor, percentile, matching_bound) for d, s in zip(dirs, seeds)]
    if jobs > 1 and not deterministic:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_process_sequence, tasks))
    else:
        results = [_process_sequence(t) for t in tasks]

    os.makedirs(out_dir, exist_ok=True)
    entries = []
    counts = {"accepted": 0}
    for d, (pairs, clips) in zip(dirs, results):
        source = os.path.basename(d.rstrip(os.sep))
        for clip in clips:
            key = "accepted" if clip.accepted else f"rejected ({clip.reason})"
            counts[key] = counts.get(key, 0) + 1
        for pair in pairs:
            pid = f"{source}_{pair.start:06d}"
            blur, sharp = write_pair(out_dir, pid, pair.g, pair.f)
            entries.append(ManifestEntry(id=pid, blur=blur, sharp=sharp, ne=pair.ne,
                                         mean_blur_size=round(pair.mean_blur_size, 6),
                                         source=source, kind="wild"))
    write_manifest(os.path.join(out_dir, MANIFEST_NAME), entries)
    for key in sorted(counts):
        click.echo(f"{key}: {counts[key]}")
    click.echo(f"wrote {len(entries)} pairs to {out_dir}")


@main.command("synth-si", context_settings=CONTEXT)
@click.option("--sharp", "sharp_dir", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--num-kernels", default=1000, show_default=True, type=click.IntRange(min=1),
              help="Size of the random kernel bank (scaled down from 1e5).")
@click.option("--max-support", default=31, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--dump-kernels", is_flag=True, help="Save the kernel bank as kernels.npy.")
@click.option("--debug-delta-kernel", is_flag=True, help="Use only the identity kernel.")
@click.pass_obj
def synth_si(obj, sharp_dir, out_dir, num_kernels, max_support, seed, dump_kernels,
             debug_delta_kernel):
    """Blur sharp images with random shift-invariant motion kernels."""
    root = obj["root"]
    sharp_dir, out_dir = _resolve(root, sharp_dir), _resolve(root, out_dir)
    _echo_config("synth-si", {"sharp": sharp_dir, "out": out_dir, "num_kernels": num_kernels,
                              "max_support": max_support, "seed": seed,
                              "dump_kernels": dump_kernels,
                              "debug_delta_kernel": debug_delta_kernel})
    if not os.path.isdir(sharp_dir):
        raise click.UsageError(f"sharp image directory {sharp_dir} does not exist")
    paths = list_frames(sharp_dir)
    if not paths:
        raise click.UsageError(f"no PNG/PPM images found in {sharp_dir}")

    rng = np.random.default_rng(seed)
    if debug_delta_kernel:
        bank = [delta_kernel()] * num_kernels
    else:
        bank = [random_blur_kernel(rng, max_support=max_support) for _ in range(num_kernels)]
    os.makedirs(out_dir, exist_ok=True)
    if dump_kernels:
        stack = np.zeros((num_kernels, max_support, max_support))
        for i, k in enumerate(bank):
            s, o = k.support, (max_support - k.support) // 2
            stack[i, o:o + s, o:o + s] = k.k
        np.save(os.path.join(out_dir, "kernels.npy"), stack)

    entries = []
    for path in paths:
        idx = int(rng.integers(len(bank)))
        kernel = bank[idx]
        f = read_image(path)
        g = apply_blur(f, kernel).astype(np.float32)
        pid = f"{os.path.splitext(os.path.basename(path))[0]}_k{idx:05d}"
        blur, sharp = write_pair(out_dir, pid, g, f)
        entries.append(ManifestEntry(id=pid, blur=blur, sharp=sharp, ne=None,
                                     mean_blur_size=round(kernel.length, 6),
                                     source=os.path.basename(path), kind="si"))
    write_manifest(os.path.join(out_dir, MANIFEST_NAME), entries)
    click.echo(f"wrote {len(entries)} pairs to {out_dir}")


TRAIN_FIELDS = TrainConfig.field_types()


def _train_options(fn):
    for name in reversed(list(TRAIN_FIELDS)):
        flag = "--" + name.replace("_", "-")
        typ = TRAIN_FIELDS[name]
        if typ is bool:
            fn = click.option(flag + "/--no-" + name.replace("_", "-"), name, default=None)(fn)
        else:
            fn = click.option(flag, name, type=typ, default=None)(fn)
    return fn


@main.command("train", context_settings=CONTEXT)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Key = value file; command-line flags override it.")
@click.option("--data", "data_path", required=True, type=click.Path(),
              help="Pair directory or manifest file.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--resume", "resume_path", type=click.Path(dir_okay=False), default=None)
@_train_options
@click.pass_obj
def train_cmd(obj, config_path, data_path, out_dir, resume_path, **overrides):
    """Train the network on a pair manifest."""
    root = obj["root"]
    data_path, out_dir = _resolve(root, data_path), _resolve(root, out_dir)
    values = parse_kv_file(_resolve(root, config_path)) if config_path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = TrainConfig.from_mapping(values)
    except (TypeError, ValueError) as exc:
        raise click.UsageError(str(exc)) from exc
    _echo_config("train", {**cfg.to_dict(), "data": data_path, "out": out_dir,
                           "resume": resume_path})

    mpath = manifest_path(data_path)
    if not os.path.exists(mpath):
        raise click.UsageError(f"manifest {mpath} not found")
    _, pairs = load_pairs(mpath)
    resume = ckpt_io.load(_resolve(root, resume_path)) if resume_path else None
    result = run_training(pairs, cfg, out_dir=out_dir, resume=resume)
    last = result.log[-1] if result.log else None
    if last:
        click.echo(f"iteration {last[0]} total loss {last[4]:.6g} lr {last[5]:.6g}")
    click.echo(f"checkpoints: {len(result.checkpoints)} in {out_dir}")


def _load_params(path):
    return ckpt_io.load(path).params


@main.command("deblur", context_settings=CONTEXT)
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path(dir_okay=False))
@click.option("--input", "in_path", required=True, type=click.Path(dir_okay=False))
@click.option("--output", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--scales-dir", type=click.Path(file_okay=False), default=None,
              help="Also write the 1/4 and 1/2 scale outputs here.")
@click.pass_obj
def deblur_cmd(obj, ckpt_path, in_path, out_path, scales_dir):
    """Deblur a single image of any size."""
    root = obj["root"]
    ckpt_path, in_path, out_path = (_resolve(root, p) for p in (ckpt_path, in_path, out_path))
    _echo_config("deblur", {"checkpoint": ckpt_path, "input": in_path, "output": out_path,
                            "scales_dir": scales_dir})
    params = _load_params(ckpt_path)
    res = deblur(params, read_image(in_path), return_scales=True)
    write_image(out_path, res.image)
    if scales_dir:
        scales_dir = _resolve(root, scales_dir)
        os.makedirs(scales_dir, exist_ok=True)
        stem = os.path.splitext(os.path.basename(out_path))[0]
        write_image(os.path.join(scales_dir, f"{stem}_s4.png"), np.clip(res.s4, 0, 1))
        write_image(os.path.join(scales_dir, f"{stem}_s2.png"), np.clip(res.s2, 0, 1))
    click.echo(f"wrote {out_path}")


@main.command("eval", context_settings=CONTEXT)
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path(dir_okay=False))
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--out", "out_csv", required=True, type=click.Path(dir_okay=False))
@click.pass_obj
def eval_cmd(obj, ckpt_path, data_path, out_csv):
    """PSNR of network output and blurry input against the sharp reference."""
    root = obj["root"]
    ckpt_path, data_path, out_csv = (_resolve(root, p) for p in (ckpt_path, data_path, out_csv))
    _echo_config("eval", {"checkpoint": ckpt_path, "data": data_path, "out": out_csv})
    params = _load_params(ckpt_path)
    summary = evaluate(params, manifest_path(data_path))
    write_eval_csv(out_csv, summary)
    click.echo(f"pairs: {len(summary.records)} failed: {summary.failed}")
    click.echo(f"mean PSNR input: {summary.mean_psnr_input:.4f} dB")
    click.echo(f"mean PSNR output: {summary.mean_psnr_output:.4f} dB")
    if summary.failed:
        raise Failure(f"{summary.failed} pair(s) failed")


@main.command("analyze", context_settings=CONTEXT)
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path(dir_okay=False))
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--out", "out_csv", required=True, type=click.Path(dir_okay=False))
@click.pass_obj
def analyze_cmd(obj, ckpt_path, data_path, out_csv):
    """Residual L1 norm versus estimated blur size, standardized, with Pearson r."""
    root = obj["root"]
    ckpt_path, data_path, out_csv = (_resolve(root, p) for p in (ckpt_path, data_path, out_csv))
    _echo_config("analyze", {"checkpoint": ckpt_path, "data": data_path, "out": out_csv})
    params = _load_params(ckpt_path)
    summary = evaluate(params, manifest_path(data_path))
    analysis = residual_analysis(params, records=summary.records)
    write_analysis_csv(out_csv, analysis)
    if analysis.flag:
        click.echo(f"pearson r: {analysis.flag}")
    else:
        click.echo(f"pearson r: {analysis.pearson_r:.6f}")
    if summary.failed:
        raise Failure(f"{summary.failed} pair(s) failed")


@main.command("init", context_settings=CONTEXT)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--width-multiplier", default="1", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.pass_obj
def init_cmd(obj, out_path, width_multiplier, seed):
    """Write an untrained checkpoint (identity network)."""
    out_path = _resolve(obj["root"], out_path)
    _echo_config("init", {"out": out_path, "width_multiplier": width_multiplier, "seed": seed})
    params = DeblurNetParams.create(Fraction(width_multiplier), seed=seed)
    ckpt_io.save(ckpt_io.Checkpoint(params=params), out_path)
    click.echo(f"wrote {out_path} ({params.num_parameters()} parameters)")


@main.command("make-fixture", context_settings=CONTEXT)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--kind", type=click.Choice(["frames", "sharp", "toy"]), default="frames",
              show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.pass_obj
def make_fixture(obj, out_dir, kind, seed):
    """Write synthetic frame sequences, sharp images or the toy pair set."""
    out_dir = _resolve(obj["root"], out_dir)
    _echo_config("make-fixture", {"out": out_dir, "kind": kind, "seed": seed})
    if kind == "frames":
        dirs = fixtures.write_frame_fixture(out_dir, seed=seed)
        click.echo(f"wrote {len(dirs)} sequences to {out_dir}")
    elif kind == "sharp":
        paths = fixtures.write_sharp_fixture(out_dir, seed=seed)
        click.echo(f"wrote {len(paths)} images to {out_dir}")
    else:
        os.makedirs(out_dir, exist_ok=True)
        pairs, sizes, labels = fixtures.toy_pairs(seed=seed)
        entries = []
        for i, ((g, f), size, label) in enumerate(zip(pairs, sizes, labels)):
            pid = f"toy_{i:02d}"
            blur, sharp = write_pair(out_dir, pid, g, f)
            entries.append(ManifestEntry(id=pid, blur=blur, sharp=sharp,
                                         mean_blur_size=round(float(size), 6),
                                         source="large" if label else "small", kind="toy"))
        write_manifest(os.path.join(out_dir, MANIFEST_NAME), entries)
        click.echo(f"wrote {len(entries)} pairs to {out_dir}")


def run(argv=None):
    """Invoke the CLI, mapping library errors to exit code 1."""
    try:
        main.main(args=argv, prog_name="deblurnet", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        return 1
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except (DeblurError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


def entry():
    sys.exit(run())

import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from deblurnet import checkpoint
from deblurnet.cli import run
from deblurnet.data import manifest
from deblurnet.data.imageio import read_image

TOY_CFG = Path(__file__).resolve().parents[1] / "configs" / "toy.cfg"


def invoke(capsys, *argv):
    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert run(["make-fixture", "--out", str(root / "frames")]) == 0
    assert run(["synth-wild", "--frames", str(root / "frames"), "--out", str(root / "wild"),
                "--seed", "1"]) == 0
    return root


def clip_counts(out):
    counts = {}
    for line in out.splitlines():
        key, _, value = line.partition(": ")
        if key == "accepted" or key.startswith("rejected"):
            counts[key] = int(value)
    return counts


def test_synth_wild_accepts_slow_and_rejects_fast(workspace, capsys):
    code, out, _ = invoke(capsys, "synth-wild", "--frames", workspace / "frames",
                          "--out", workspace / "wild_again", "--seed", "1")
    assert code == 0
    assert out.startswith("# synth-wild config: {")
    counts = clip_counts(out)
    assert counts["accepted"] >= 1
    assert counts.get("rejected (flow-too-large)", 0) >= 1
    entries = manifest.read_manifest(workspace / "wild" / manifest.MANIFEST_NAME)
    assert len(entries) == counts["accepted"]
    sources = {e.source for e in entries}
    assert "seq_static" in sources and "seq_fast" not in sources
    for e in entries:
        assert e.ne % 2 == 1 and 7 <= e.ne <= 23


def test_synth_wild_is_deterministic(workspace):
    a = (workspace / "wild" / manifest.MANIFEST_NAME).read_bytes()
    b = (workspace / "wild_again" / manifest.MANIFEST_NAME).read_bytes()
    assert a == b
    for e in manifest.read_manifest(workspace / "wild" / manifest.MANIFEST_NAME):
        assert (workspace / "wild" / e.blur).read_bytes() == \
            (workspace / "wild_again" / e.blur).read_bytes()


def test_synth_wild_zero_threshold_rejects_moving_clips(workspace, capsys):
    code, out, _ = invoke(capsys, "synth-wild", "--frames", workspace / "frames",
                          "--out", workspace / "wild0", "--threshold", "0")
    assert code == 0
    entries = manifest.read_manifest(workspace / "wild0" / manifest.MANIFEST_NAME)
    assert {e.source for e in entries} <= {"seq_static"}


def test_synth_wild_input_errors(tmp_path, capsys):
    code, _, err = invoke(capsys, "synth-wild", "--frames", tmp_path / "nope", "--out", tmp_path / "o")
    assert code == 2 and "does not exist" in err
    (tmp_path / "empty").mkdir()
    code, _, err = invoke(capsys, "synth-wild", "--frames", tmp_path / "empty", "--out", tmp_path / "o")
    assert code == 2 and "no PNG/PPM" in err


def test_synth_si_delta_kernel_keeps_images_sharp(tmp_path, capsys):
    assert run(["make-fixture", "--kind", "sharp", "--out", str(tmp_path / "sharp")]) == 0
    code, out, _ = invoke(capsys, "synth-si", "--sharp", tmp_path / "sharp", "--out", tmp_path / "si",
                          "--debug-delta-kernel", "--num-kernels", "3")
    assert code == 0
    entries = manifest.read_manifest(tmp_path / "si" / manifest.MANIFEST_NAME)
    assert len(entries) == 4
    for e in entries:
        assert (tmp_path / "si" / e.blur).read_bytes() == (tmp_path / "si" / e.sharp).read_bytes()


def test_synth_si_random_kernels(tmp_path, capsys):
    run(["make-fixture", "--kind", "sharp", "--out", str(tmp_path / "sharp")])
    code, _, _ = invoke(capsys, "synth-si", "--sharp", tmp_path / "sharp", "--out", tmp_path / "si",
                        "--num-kernels", "5", "--max-support", "15", "--dump-kernels")
    assert code == 0
    bank = np.load(tmp_path / "si" / "kernels.npy")
    assert bank.shape == (5, 15, 15)
    np.testing.assert_allclose(bank.sum(axis=(1, 2)), 1.0, atol=1e-9)
    e = manifest.read_manifest(tmp_path / "si" / manifest.MANIFEST_NAME)[0]
    assert e.kind == "si"
    assert not np.array_equal(read_image(tmp_path / "si" / e.blur), read_image(tmp_path / "si" / e.sharp))


@pytest.fixture(scope="module")
def trained(workspace):
    out = workspace / "run"
    code = run(["train", "--data", str(workspace / "wild"), "--out", str(out),
                "--width-multiplier", "1/16", "--batch-size", "2", "--crop-size", "32",
                "--max-iterations", "4", "--checkpoint-every", "2", "--seed", "3"])
    assert code == 0
    return out


def test_train_writes_log_and_checkpoints(trained):
    rows = list(csv.reader(open(trained / "loss_log.csv")))
    assert rows[0] == ["iteration", "loss1", "loss2", "loss3", "total", "lr"]
    assert len(rows) == 5
    assert sorted(p.name for p in trained.glob("ckpt_*.bin")) == ["ckpt_0000002.bin",
                                                                 "ckpt_0000004.bin"]
    ck = checkpoint.load(trained / "ckpt_0000004.bin")
    assert ck.iteration == 4 and ck.config["crop_size"] == 32


def test_train_resume_and_config_file(workspace, trained, tmp_path, capsys):
    cfg = tmp_path / "train.cfg"
    cfg.write_text("width_multiplier = 1/16\nbatch_size = 2\ncrop_size = 32\n"
                   "max_iterations = 4\ncheckpoint_every = 2\nseed = 3\n")
    out = tmp_path / "resumed"
    assert run(["train", "--config", str(cfg), "--data", str(workspace / "wild"), "--out", str(out),
                "--max-iterations", "2"]) == 0
    capsys.readouterr()
    code, stdout, _ = invoke(capsys, "train", "--config", cfg, "--data", workspace / "wild",
                             "--out", out, "--resume", out / "ckpt_0000002.bin")
    assert code == 0
    assert json.loads(stdout.splitlines()[0].split("config: ", 1)[1])["max_iterations"] == 4
    assert (out / "ckpt_0000004.bin").read_bytes() == (trained / "ckpt_0000004.bin").read_bytes()


def test_train_rejects_bad_config(workspace, tmp_path, capsys):
    code, _, err = invoke(capsys, "train", "--data", workspace / "wild", "--out", tmp_path,
                          "--crop-size", "30")
    assert code == 2 and "divisible" in err


def test_deblur_any_size(trained, workspace, tmp_path, capsys):
    from deblurnet.data.imageio import write_image
    img = np.random.default_rng(0).random((3, 37, 50)).astype(np.float32)
    write_image(tmp_path / "in.png", img)
    code, _, _ = invoke(capsys, "deblur", "--checkpoint", trained / "ckpt_0000004.bin",
                        "--input", tmp_path / "in.png", "--output", tmp_path / "out.png",
                        "--scales-dir", tmp_path / "scales")
    assert code == 0
    assert read_image(tmp_path / "out.png").shape == (3, 37, 50)
    assert (tmp_path / "scales" / "out_s4.png").exists()


def test_eval_and_analyze(trained, workspace, tmp_path, capsys):
    ck = trained / "ckpt_0000004.bin"
    code, out, _ = invoke(capsys, "eval", "--checkpoint", ck, "--data", workspace / "wild",
                          "--out", tmp_path / "eval.csv")
    assert code == 0 and "mean PSNR output:" in out
    rows = list(csv.reader(open(tmp_path / "eval.csv")))
    assert rows[0][:3] == ["id", "psnr_input", "psnr_output"]
    assert all(r[5] == "ok" for r in rows[1:])
    code, out, _ = invoke(capsys, "analyze", "--checkpoint", ck, "--data", workspace / "wild",
                          "--out", tmp_path / "analysis.csv")
    assert code == 0 and "pearson r:" in out


def test_eval_exits_nonzero_when_a_pair_fails(trained, workspace, tmp_path, capsys):
    import shutil
    data = tmp_path / "data"
    shutil.copytree(workspace / "wild", data)
    first = manifest.read_manifest(data / manifest.MANIFEST_NAME)[0]
    (data / first.sharp).unlink()
    code, out, _ = invoke(capsys, "eval", "--checkpoint", trained / "ckpt_0000004.bin",
                          "--data", data, "--out", tmp_path / "eval.csv")
    assert code == 1 and "failed: 1" in out


def test_init_writes_identity_checkpoint(tmp_path, capsys):
    code, _, _ = invoke(capsys, "init", "--out", tmp_path / "c.bin", "--width-multiplier", "1/8")
    assert code == 0
    assert str(checkpoint.load(tmp_path / "c.bin").params.width_multiplier) == "1/8"


def test_missing_checkpoint_is_runtime_error(tmp_path, capsys):
    code, _, err = invoke(capsys, "eval", "--checkpoint", tmp_path / "none.bin",
                          "--data", tmp_path, "--out", tmp_path / "e.csv")
    assert code == 1 and "error" in err


def test_unknown_option_is_usage_error(capsys):
    code, _, _ = invoke(capsys, "train", "--bogus")
    assert code == 2


def test_root_resolves_relative_paths(tmp_path, capsys):
    code, _, _ = invoke(capsys, "--root", tmp_path, "init", "--out", "c.bin",
                        "--width-multiplier", "1/16")
    assert code == 0 and (tmp_path / "c.bin").exists()


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "deblurnet", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0
    for cmd in ("synth-wild", "synth-si", "train", "deblur", "eval", "analyze"):
        assert cmd in proc.stdout


def test_toy_fixture_trains_from_config(tmp_path, capsys):
    assert run(["make-fixture", "--kind", "toy", "--out", str(tmp_path / "toy")]) == 0
    entries = manifest.read_manifest(tmp_path / "toy" / manifest.MANIFEST_NAME)
    assert len(entries) == 8 and {e.source for e in entries} == {"small", "large"}
    capsys.readouterr()
    code, out, _ = invoke(capsys, "train", "--config", TOY_CFG, "--data", tmp_path / "toy",
                          "--out", tmp_path / "run", "--max-iterations", "2")
    assert code == 0 and '"batch_size": 8' in out

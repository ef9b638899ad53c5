import csv
from fractions import Fraction

import numpy as np
import pytest

from deblurnet import evaluate as ev
from deblurnet.data import manifest
from deblurnet.network import DeblurNetParams


@pytest.fixture(scope="module")
def identity_net():
    return DeblurNetParams.create(Fraction(1, 16), seed=0)


@pytest.fixture(scope="module")
def trained_like_net():
    net = DeblurNetParams.create(Fraction(1, 16), seed=0)
    r = np.random.default_rng(0)
    for _, layers in net.stages():
        layers[-1].weight.data[...] = r.standard_normal(layers[-1].weight.shape) * 0.01
    return net


def test_psnr_examples():
    a = np.zeros((3, 4, 4))
    assert ev.psnr(a, a + 0.1) == pytest.approx(20.0)
    assert ev.psnr(a, a + 0.01) == pytest.approx(40.0)
    assert ev.psnr(a, a) == ev.IDENTICAL
    assert ev.psnr_value(ev.IDENTICAL) == ev.PSNR_CAP
    with pytest.raises(ValueError):
        ev.psnr(a, a[:, :2])


@pytest.mark.parametrize("shape", [(3, 37, 53), (3, 16, 16), (3, 5, 7)])
def test_deblur_handles_any_size(identity_net, shape, rng):
    img = rng.random(shape).astype(np.float32)
    out = ev.deblur(identity_net, img)
    assert out.shape == shape
    np.testing.assert_array_equal(out, img)


def test_deblur_clamps_output(trained_like_net, rng):
    img = rng.random((3, 20, 24)).astype(np.float32)
    img[:, :4] = 1.0
    res = ev.deblur(trained_like_net, img, return_scales=True)
    assert res.image.min() >= 0.0 and res.image.max() <= 1.0
    assert res.residual.shape == img.shape
    assert res.s4.shape == (3, 5, 6) and res.s2.shape == (3, 10, 12)


def write_manifest(tmp_path, rng, n=4, missing=None):
    entries = []
    for i in range(n):
        f = rng.random((3, 16, 16)).astype(np.float32)
        g = (0.5 * f + 0.5 * np.roll(f, 1, axis=2)).astype(np.float32)
        blur, sharp = manifest.write_pair(tmp_path, f"p{i}", g, f)
        entries.append(manifest.ManifestEntry(f"p{i}", blur, sharp, mean_blur_size=float(i)))
    if missing is not None:
        (tmp_path / entries[missing].sharp).unlink()
    path = tmp_path / manifest.MANIFEST_NAME
    manifest.write_manifest(path, entries[::-1])
    return path


def test_evaluate_reports_each_pair_in_id_order(identity_net, tmp_path, rng):
    summary = ev.evaluate(identity_net, write_manifest(tmp_path, rng))
    assert [r.id for r in summary.records] == ["p0", "p1", "p2", "p3"]
    assert summary.failed == 0
    for r in summary.records:
        assert r.psnr_output == pytest.approx(r.psnr_input)
        assert r.residual_l1 == 0.0
    assert summary.mean_psnr_input == pytest.approx(np.mean([r.psnr_input for r in summary.records]))


def test_evaluate_records_failed_pairs(identity_net, tmp_path, rng):
    summary = ev.evaluate(identity_net, write_manifest(tmp_path, rng, missing=1))
    assert summary.failed == 1
    bad = summary.records[1]
    assert bad.id == "p1" and bad.status.startswith("failed")
    out = tmp_path / "eval.csv"
    ev.write_eval_csv(out, summary)
    rows = list(csv.reader(open(out)))
    assert rows[0] == ev.EVAL_HEADER and len(rows) == 5
    assert rows[2][1] == "" and rows[2][5].startswith("failed")


def test_identical_pair_is_capped_in_csv(tmp_path):
    rec = ev.EvalRecord("x", ev.IDENTICAL, ev.IDENTICAL, 0.0, 1.0)
    assert rec.row()[1:3] == ["100.0", "100.0"]


def test_standardize():
    z = ev.standardize([1.0, 2.0, 3.0, 4.0])
    assert z.mean() == pytest.approx(0.0, abs=1e-15)
    assert z.std() == pytest.approx(1.0)
    assert ev.standardize([2.0, 2.0, 2.0]) is None


def test_pearson_matches_numpy(rng):
    records = [ev.EvalRecord(f"p{i}", 20.0, 21.0, float(rng.random()), float(rng.random()))
               for i in range(12)]
    an = ev.residual_analysis(None, records=records)
    assert an.pearson_r == pytest.approx(np.corrcoef(an.residual_l1, an.blur_size)[0, 1], abs=1e-12)
    assert an.flag is None


def test_constant_series_is_flagged():
    records = [ev.EvalRecord(f"p{i}", 20.0, 20.0, 0.0, float(i)) for i in range(4)]
    an = ev.residual_analysis(None, records=records)
    assert an.flag.startswith("undefined") and np.isnan(an.pearson_r)


def test_analysis_requires_blur_sizes():
    with pytest.raises(ValueError, match="mean_blur_size"):
        ev.residual_analysis(None, records=[ev.EvalRecord("a", 1.0, 1.0, 0.1, None)])


def test_analysis_csv(tmp_path, rng):
    records = [ev.EvalRecord(f"p{i}", 20.0, 21.0, float(i), float(2 * i)) for i in range(3)]
    an = ev.residual_analysis(None, records=records)
    assert an.pearson_r == pytest.approx(1.0)
    ev.write_analysis_csv(tmp_path / "a.csv", an)
    rows = list(csv.reader(open(tmp_path / "a.csv")))
    assert rows[0] == ev.ANALYSIS_HEADER and len(rows) == 4

import math

import numpy as np
import pytest

import dpcc

TOY = {
    "C": 12,
    "C_z": 4,
    "S": 4,
    "k_enc": 5,
    "k_gen": 4,
    "heads": 2,
    "T": 6,
}


def sphere(n, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v


def test_version_and_metrics():
    assert dpcc.__version__
    a = sphere(32)
    assert dpcc.chamfer_distance(a, a) == 0.0
    assert dpcc.d1_psnr(a, a) == 100.0
    assert dpcc.compute_bpp(256, 2048) == 1.0


def test_model_roundtrip(tmp_path):
    model = dpcc.make_model(TOY, init_seed=3)
    assert model.config["C"] == 12
    assert model.n_parameters > 0
    assert model.trained_steps == 0

    path = str(tmp_path / "model.ckpt")
    dpcc.save_checkpoint(model, path)
    back = dpcc.load_checkpoint(path)
    assert back.config == model.config

    other = dpcc.make_model(TOY, init_seed=99)
    dpcc.load_weights(other, path)
    assert other.config == model.config

    wrong = dpcc.make_model({**TOY, "C": 18})
    with pytest.raises(dpcc.DpccError):
        dpcc.load_weights(wrong, path)


def test_encode_decode_deterministic():
    model = dpcc.make_model(TOY, init_seed=3)
    pts = sphere(48, seed=1)

    blob = dpcc.encode(model, pts, seed=5)
    assert isinstance(blob, bytes)
    assert dpcc.encode(model, pts, seed=5) == blob

    rec, label = dpcc.decode(model, blob)
    assert rec.shape == (48, 3)
    assert np.isfinite(rec).all()
    assert label is None

    rec2, _ = dpcc.decode(model, blob)
    assert np.array_equal(rec, rec2)

    labeled = dpcc.make_model({**TOY, "label_vocab": 8}, init_seed=3)
    blob2 = dpcc.encode(labeled, pts, seed=5, label=3)
    _, label2 = dpcc.decode(labeled, blob2)
    assert label2 == 3

    with pytest.raises(dpcc.DpccError):
        dpcc.decode(dpcc.make_model({**TOY, "C": 18}), blob)


def test_train_and_evaluate(tmp_path):
    model = dpcc.make_model(TOY, init_seed=8)
    clouds = [sphere(48, seed=s) for s in range(3)]

    history = dpcc.train(
        model,
        clouds,
        {"steps": 2, "batch": 2, "points_per_cloud": 64, "metrics_every": 1, "lambda": 0.1},
        checkpoint_path=str(tmp_path / "m.ckpt"),
    )
    assert len(history) == 2
    assert all(math.isfinite(row["loss"]) for row in history)
    assert model.trained_steps == 2
    assert (tmp_path / "m.ckpt").exists()

    rows = dpcc.evaluate([model], clouds, seed=4)
    assert len(rows) == 1
    assert rows[0]["bpp"] > 0
    assert math.isfinite(rows[0]["psnr_d1"])

    with pytest.raises(dpcc.DpccError):
        dpcc.train(model, [], {})


def test_bd_metrics():
    curve = [(0.25, 58.0), (0.5, 63.0), (1.0, 67.5), (2.0, 71.0)]
    assert dpcc.bd_psnr(curve, curve) == pytest.approx(0.0, abs=1e-9)
    up = [(b, p + 1.0) for b, p in curve]
    assert dpcc.bd_psnr(curve, up) == pytest.approx(1.0, abs=1e-6)
    half = [(b / 2, p) for b, p in curve]
    assert dpcc.bd_rate(curve, half) == pytest.approx(-50.0, abs=0.5)
    with pytest.raises(dpcc.DpccError):
        dpcc.bd_psnr(curve[:3], curve)

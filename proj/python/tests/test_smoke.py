import json
import math

import numpy as np
import pytest

import sqforge


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("sqforge")
    corpus = root / "corpus"
    sqforge.build_corpus(str(corpus), 110, 3)
    ckpt = root / "s.ckpt"
    sqforge.train_structure(corpus, ckpt, iterations=10, hidden=32, depth=2, seed=1)
    return corpus, ckpt


def test_codec_roundtrip_is_decode_of_encode():
    _, grid = sqforge.sample_shape("chair", 4)
    assert grid.shape == (32, 32, 32) and grid.dtype == np.bool_
    z = sqforge.encode(grid)
    assert z.shape == (8 * 8 * 8 * 8,)
    np.testing.assert_array_equal(sqforge.decode(z), sqforge.roundtrip(grid))
    assert sqforge.voxel_iou(grid, sqforge.roundtrip(grid)) > 0.5


def test_voxelize_matches_sampled_grid():
    scene, grid = sqforge.sample_shape("table", 9)
    np.testing.assert_array_equal(sqforge.voxelize(scene, normalize=False), grid)


def test_metrics_against_numpy():
    rng = np.random.default_rng(0)
    a, b = rng.random((40, 3)), rng.random((30, 3))
    d = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
    assert sqforge.chamfer(a, b) == pytest.approx(d.min(1).mean() + d.min(0).mean(), rel=1e-12)
    x = rng.normal(size=(200, 3))
    assert sqforge.frechet_distance(x, x + 2.0) == pytest.approx(12.0, rel=1e-8)


def test_bad_inputs_raise():
    with pytest.raises(ValueError):
        sqforge.encode(np.zeros((4, 4, 5), dtype=bool))
    with pytest.raises(ValueError):
        sqforge.sample_shape("spaceship", 1)


def test_generate_zero_step_returns_roundtrip(workspace):
    _, ckpt = workspace
    scene, _ = sqforge.sample_shape("chair", 21)
    grid, result = sqforge.generate(ckpt, scene, tau0=25, label="chair", seed=3)
    np.testing.assert_array_equal(grid, sqforge.roundtrip(sqforge.voxelize(scene)))
    assert result["metrics"]["iou_roundtrip"] == 1.0
    assert result["steps"] == 0
    again, result2 = sqforge.generate(ckpt, scene, tau0=10, label="chair", seed=3)
    assert json.dumps(result2, sort_keys=True) == json.dumps(sqforge.generate(ckpt, scene, 10, "chair", 3)[1], sort_keys=True)
    with pytest.raises(ValueError, match="tau0"):
        sqforge.generate(ckpt, scene, tau0=26, label="chair")


def test_sweep_rows(workspace):
    corpus, ckpt = workspace
    rows = sqforge.sweep(ckpt, corpus, tau0s=(25, 0), seed=2)
    assert [r["tau0"] for r in rows] == [0.0, 25.0]
    assert all(r["n"] == 33 for r in rows)
    assert rows[1]["t0"] == 0.0
    assert math.isnan(rows[1]["frechet"]) or rows[1]["frechet"] >= 0

import numpy as np
import pytest
from PIL import Image

from metaseg.errors import IoFailure
from metaseg.viz import render_heatmap, render_overlay


def _load(path):
    return np.asarray(Image.open(path))


def test_heatmap_extremes(tmp_path):
    render_heatmap(np.zeros((4, 4)), tmp_path / "lo.png")
    render_heatmap(np.ones((4, 4)), tmp_path / "hi.png")
    assert np.all(_load(tmp_path / "lo.png") == 255)  # zero dispersion -> white
    assert np.all(_load(tmp_path / "hi.png") == 0)  # full dispersion -> dark


def test_heatmap_checkerboard(tmp_path):
    v = np.indices((4, 4)).sum(axis=0) % 2
    render_heatmap(v.astype(float), tmp_path / "c.png")
    img = _load(tmp_path / "c.png")
    assert set(np.unique(img).tolist()) == {0, 255}
    assert img[0, 0] == 255 and img[0, 1] == 0


def test_heatmap_midpoint_rounding(tmp_path):
    render_heatmap(np.full((1, 1), 0.5), tmp_path / "m.png")
    # 255 * 0.5 = 127.5 rounds half-up to 128
    assert _load(tmp_path / "m.png")[0, 0] == 128


def test_overlay_colors(tmp_path):
    seg = np.array([[0, 0, 1, 1, 2, 2]])
    render_overlay(seg, {0: 1.0, 1: 0.0, 2: 0.5}, tmp_path / "o.png")
    img = _load(tmp_path / "o.png")
    assert img[0, 0].tolist() == [0, 255, 0]  # high score -> green
    assert img[0, 2].tolist() == [255, 0, 0]  # zero score -> red
    assert img[0, 4].tolist() == [128, 128, 0]  # midpoint, round half-up


def test_overlay_unscored_and_no_gt_render_white(tmp_path):
    seg = np.array([[0, 1], [0, 1]])
    no_gt = np.array([[False, False], [True, True]])
    render_overlay(seg, {0: 0.25}, tmp_path / "o.png", no_gt_mask=no_gt)
    img = _load(tmp_path / "o.png")
    assert img[0, 1].tolist() == [255, 255, 255]  # segment without a score
    assert img[1, 0].tolist() == [255, 255, 255]  # ignore region trumps score


def test_renders_are_deterministic(tmp_path):
    rng = np.random.default_rng(0)
    v = rng.random((16, 16))
    render_heatmap(v, tmp_path / "a.png")
    render_heatmap(v, tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_unwritable_path_raises(tmp_path):
    with pytest.raises(IoFailure):
        render_heatmap(np.zeros((2, 2)), tmp_path / "nope" / "x.png")

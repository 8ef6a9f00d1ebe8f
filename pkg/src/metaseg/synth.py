"""Synthetic scenes with known false-positive structure.

Ground truth is a set of painted shapes on background class 0. The
"prediction" repaints each shape with a small random offset and injects
spurious shapes on empty background; pixels where the prediction disagrees
with the ground truth get a much smaller softmax margin, so dispersion is
high exactly where the prediction is wrong. Boundary blur mixes each
class-edge pixel's distribution with its neighbors', concentrating
dispersion on segment boundaries. Spurious shapes are drawn smaller and
with a class bias, so segment size and mean class probabilities carry
signal beyond the entropy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import SpecInfeasible
from .io import save_label_map, save_tensor

__all__ = ["SceneSpec", "SyntheticScene", "generate_scene", "generate_corpus", "save_corpus", "corpus_balance"]

_WRONG_MARGIN = 0.35
_SPURIOUS_TRIES = 60


@dataclass
class SceneSpec:
    height: int = 128
    width: int = 128
    q: int = 5
    n_shapes: int = 14
    noise_temperature: float = 0.35
    spurious_rate: float = 0.6
    boundary_blur: int = 1
    shift_max: int = 3
    logit_noise: float = 0.25
    seed: int = 0


@dataclass
class SyntheticScene:
    scene_id: str
    gt: np.ndarray
    probs: np.ndarray
    # (row, col, class) anchors, one per injected false-positive shape
    injected_false: list = field(default_factory=list)


def _paint(canvas, kind, r0, c0, hh, ww, cls):
    if kind == 0:
        canvas[r0 : r0 + hh, c0 : c0 + ww] = cls
    else:
        rr, cc = np.ogrid[: canvas.shape[0], : canvas.shape[1]]
        cy, cx = r0 + (hh - 1) / 2.0, c0 + (ww - 1) / 2.0
        mask = ((rr - cy) / (hh / 2.0)) ** 2 + ((cc - cx) / (ww / 2.0)) ** 2 <= 1.0
        canvas[mask] = cls


def _box_clear(arr, cls, r0, c0, hh, ww, pad):
    h, w = arr.shape
    box = arr[max(r0 - pad, 0) : min(r0 + hh + pad, h), max(c0 - pad, 0) : min(c0 + ww + pad, w)]
    return not np.any(box == cls)


def generate_scene(spec: SceneSpec, scene_id="scene_0000"):
    h, w, q = spec.height, spec.width, spec.q
    if h < 16 or w < 16 or q < 2 or spec.n_shapes < 1 or spec.noise_temperature <= 0:
        raise SpecInfeasible(f"cannot place shapes on a {h}x{w} scene with q={q}")
    rng = np.random.default_rng(spec.seed)

    gt = np.zeros((h, w), dtype=np.int32)
    pred = np.zeros((h, w), dtype=np.int32)
    shapes = []
    for _ in range(spec.n_shapes):
        kind = int(rng.integers(0, 2))
        cls = int(rng.integers(1, q))
        hh = int(rng.integers(h // 8, h // 3 + 1))
        ww = int(rng.integers(w // 8, w // 3 + 1))
        r0 = int(rng.integers(0, h - hh + 1))
        c0 = int(rng.integers(0, w - ww + 1))
        shapes.append((kind, r0, c0, hh, ww, cls))
        _paint(gt, kind, r0, c0, hh, ww, cls)
    for kind, r0, c0, hh, ww, cls in shapes:
        dr = int(rng.integers(-spec.shift_max, spec.shift_max + 1))
        dc = int(rng.integers(-spec.shift_max, spec.shift_max + 1))
        _paint(pred, kind, min(max(r0 + dr, 0), h - hh), min(max(c0 + dc, 0), w - ww), hh, ww, cls)

    injected = []
    spurious_conf = np.ones((h, w))
    pad = spec.boundary_blur + 3
    spur_min = 2 * spec.boundary_blur + 3
    spur_max = max(spur_min + 1, h // 10)
    n_spurious = int(rng.binomial(spec.n_shapes, min(max(spec.spurious_rate, 0.0), 1.0)))
    for _ in range(n_spurious):
        # bias towards the high class indices so the class-probability
        # features are informative about false positives
        cls = int(q - 1 - min(rng.geometric(0.6) - 1, q - 2))
        kind = int(rng.integers(0, 2))
        for _try in range(_SPURIOUS_TRIES):
            hh = int(rng.integers(spur_min, spur_max + 1))
            ww = int(rng.integers(spur_min, spur_max + 1))
            r0 = int(rng.integers(0, h - hh + 1))
            c0 = int(rng.integers(0, w - ww + 1))
            if _box_clear(gt, cls, r0, c0, hh, ww, pad) and _box_clear(pred, cls, r0, c0, hh, ww, pad):
                _paint(pred, kind, r0, c0, hh, ww, cls)
                # some spurious shapes are confidently wrong: the network's
                # margin there rivals correct segments, so dispersion alone
                # cannot flag them
                _paint(spurious_conf, kind, r0, c0, hh, ww, float(rng.uniform(1.0, 2.8)))
                injected.append((r0 + hh // 2, c0 + ww // 2, cls))
                break

    margin = np.where(pred == gt, 1.0, _WRONG_MARGIN * spurious_conf)
    # per-shape confidence factor for the real shapes
    shape_map = np.zeros((h, w), dtype=np.int32)
    for idx, (kind, r0, c0, hh, ww, cls) in enumerate(shapes, start=1):
        _paint(shape_map, kind, r0, c0, hh, ww, idx)
    factors = rng.uniform(0.55, 1.4, spec.n_shapes + 1)
    factors[0] = 1.0
    margin = margin * factors[shape_map]

    # softmax of the temperature-scaled margin logits plus additive noise;
    # a hotter temperature shrinks the margin relative to the fixed noise
    # floor, so predictions degrade monotonically with it
    logits = np.zeros((h, w, q))
    np.put_along_axis(logits, pred[:, :, None], (margin / spec.noise_temperature)[:, :, None], axis=2)
    if spec.logit_noise > 0:
        logits += rng.normal(0.0, spec.logit_noise, logits.shape)
    logits -= logits.max(axis=2, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=2, keepdims=True)

    if spec.boundary_blur > 0:
        edges = np.zeros((h, w), dtype=bool)
        edges[:, 1:] |= pred[:, 1:] != pred[:, :-1]
        edges[:, :-1] |= pred[:, 1:] != pred[:, :-1]
        edges[1:, :] |= pred[1:, :] != pred[:-1, :]
        edges[:-1, :] |= pred[1:, :] != pred[:-1, :]
        zone = ndimage.binary_dilation(edges, np.ones((3, 3), dtype=bool), iterations=spec.boundary_blur)
        blurred = ndimage.uniform_filter(probs, size=(3, 3, 1), mode="nearest")
        probs[zone] = blurred[zone]

    probs = probs.astype(np.float32)
    probs /= probs.sum(axis=2, keepdims=True)
    return SyntheticScene(scene_id=scene_id, gt=gt, probs=probs, injected_false=injected)


def generate_corpus(spec: SceneSpec, n_scenes):
    """Independent scenes with per-scene derived seeds; same spec.seed gives
    an identical corpus."""
    if n_scenes < 1:
        raise SpecInfeasible("need at least one scene")
    children = np.random.SeedSequence(spec.seed).spawn(n_scenes)
    scenes = []
    for i in range(n_scenes):
        sub = SceneSpec(**{**spec.__dict__, "seed": children[i]})
        scenes.append(generate_scene(sub, scene_id=f"scene_{i:04d}"))
    return scenes


def save_corpus(scenes, out_dir):
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for sc in scenes:
        save_tensor(out / f"{sc.scene_id}.probs.mst", sc.probs)
        save_label_map(out / f"{sc.scene_id}.labels.mst", sc.gt)


def corpus_balance(scenes, ignore=255):
    """(I_0, I_1) counts of segments with vanishing / positive IoU_adj."""
    from .segmetrics import image_records

    i0 = i1 = 0
    for sc in scenes:
        records, _, _ = image_records(sc.scene_id, sc.probs, sc.gt, ignore=ignore)
        for r in records:
            if r.iou_adj > 0:
                i1 += 1
            else:
                i0 += 1
    return i0, i1

"""Ground-truth matching, IoU variants and per-segment metric aggregation.

For a predicted segment k of class c, K' is the union of ground-truth
components of class c that intersect k. IoU divides |k & K'| by |k | K'|;
the adjusted variant removes from the denominator those K' pixels already
covered by other predicted segments of the same class, so a ground-truth
region split across several good predictions does not drag every fragment's
score down. Ignore pixels count in neither numerator nor denominator.
"""

from __future__ import annotations

import numpy as np

from .components import Decomposition, decompose
from .dispersion import all_maps
from .errors import EmptyDataset, EmptyInterior
from .io import SegmentRecord

__all__ = [
    "overlap_scores",
    "aggregate_image",
    "image_records",
    "build_dataset",
    "FEATURE_E_MEAN",
]

# column index of the mean entropy within the 15-metric block
FEATURE_E_MEAN = 5


def overlap_scores(pred: Decomposition, gt: Decomposition, q_literal=False):
    """Per-predicted-segment (iou, iou_adj, ios, effective_size) arrays.

    `effective_size` is the number of the segment's pixels with ground truth
    available; segments with effective_size 0 lie entirely in ignore
    territory. With `q_literal` the coverage set Q contains predicted
    segments of any class (the degenerate reading under which every K'
    pixel is covered, collapsing the adjusted IoU to intersection over
    segment size).
    """
    n_pred, n_gt = pred.n_segments, gt.n_segments
    iou = np.zeros(n_pred)
    iou_adj = np.zeros(n_pred)
    ios = np.zeros(n_pred)
    valid = gt.segment_map >= 0
    s_eff = np.bincount(pred.segment_map[valid], minlength=n_pred).astype(np.int64)
    if n_gt == 0:
        return iou, iou_adj, ios, s_eff

    keys = pred.segment_map[valid].astype(np.int64) * n_gt + gt.segment_map[valid]
    cross = np.bincount(keys, minlength=n_pred * n_gt).reshape(n_pred, n_gt)

    # per gt component: pixels whose predicted class agrees with its class
    pred_cls = pred.classes[pred.segment_map[valid]]
    gt_ids = gt.segment_map[valid]
    agree_mask = pred_cls == gt.classes[gt_ids]
    agree = np.bincount(gt_ids[agree_mask], minlength=n_gt).astype(np.int64)
    covered = gt.sizes.astype(np.int64) if q_literal else agree

    for k in range(n_pred):
        if s_eff[k] == 0:
            continue
        j_mask = (cross[k] > 0) & (gt.classes == pred.classes[k])
        inter = int(cross[k][j_mask].sum())
        if inter == 0:
            continue
        k_prime = int(gt.sizes[j_mask].sum())
        iou[k] = inter / (s_eff[k] + k_prime - inter)
        iou_adj[k] = inter / (s_eff[k] + k_prime - int(covered[j_mask].sum()))
        ios[k] = inter / s_eff[k]
    return iou, iou_adj, ios, s_eff


def aggregate_image(image_id, probs, pred, ent, diff, iou, iou_adj, ios, s_eff):
    """Assemble SegmentRecords for one image; segments with empty interior or
    without any ground truth are dropped. Returns (records, n_empty_interior,
    n_all_ignore)."""
    h, w, q = probs.shape
    flat = pred.segment_map.ravel()
    n = pred.n_segments
    s = pred.sizes.astype(np.int64)
    s_in = pred.interior_sizes.astype(np.int64)
    s_bd = s - s_in

    inner = pred.interior.ravel()
    e_sum = np.bincount(flat, weights=ent.ravel(), minlength=n)
    e_in_sum = np.bincount(flat[inner], weights=ent.ravel()[inner], minlength=n)
    d_sum = np.bincount(flat, weights=diff.ravel(), minlength=n)
    d_in_sum = np.bincount(flat[inner], weights=diff.ravel()[inner], minlength=n)
    p_sum = np.empty((n, q))
    for j in range(q):
        p_sum[:, j] = np.bincount(flat, weights=probs[:, :, j].astype(np.float64).ravel(), minlength=n)

    records = []
    n_empty, n_ignored = 0, 0
    for k in range(n):
        if s_in[k] == 0:
            n_empty += 1
            continue
        if s_eff[k] == 0:
            n_ignored += 1
            continue
        sb = float(s_bd[k])
        e_mean = e_sum[k] / s[k]
        e_in = e_in_sum[k] / s_in[k]
        e_bd = (e_sum[k] - e_in_sum[k]) / sb
        d_mean = d_sum[k] / s[k]
        d_in = d_in_sum[k] / s_in[k]
        d_bd = (d_sum[k] - d_in_sum[k]) / sb
        s_rel = s[k] / sb
        s_in_rel = s_in[k] / sb
        records.append(
            SegmentRecord(
                image_id=image_id,
                segment_id=int(k),
                class_id=int(pred.classes[k]),
                s=int(s[k]),
                s_in=int(s_in[k]),
                s_bd=int(s_bd[k]),
                s_rel=float(s_rel),
                s_in_rel=float(s_in_rel),
                e_mean=float(e_mean),
                e_in=float(e_in),
                e_bd=float(e_bd),
                e_rel=float(e_mean * s_rel),
                e_in_rel=float(e_in * s_in_rel),
                d_mean=float(d_mean),
                d_in=float(d_in),
                d_bd=float(d_bd),
                d_rel=float(d_mean * s_rel),
                d_in_rel=float(d_in * s_in_rel),
                probs=p_sum[k] / s[k],
                iou=float(iou[k]),
                iou_adj=float(iou_adj[k]),
                ios=float(ios[k]),
            )
        )
    return records, n_empty, n_ignored


def image_records(image_id, probs, gt_labels, ignore=255, q_literal=False):
    """Full per-image pipeline: dispersion maps, decomposition of prediction
    and ground truth, matching and metric aggregation."""
    ent, diff, cls = all_maps(probs)
    pred = decompose(cls)
    gt = decompose(gt_labels, ignore=ignore)
    iou, iou_adj, ios, s_eff = overlap_scores(pred, gt, q_literal=q_literal)
    return aggregate_image(image_id, probs, pred, ent, diff, iou, iou_adj, ios, s_eff)


def build_dataset(records, target="iou_adj"):
    """Stack records into (X, y_cls, y_reg): X has the 15 metrics followed by
    the q segment-mean class probabilities; y_cls is 1 where iou_adj > 0."""
    if not records:
        raise EmptyDataset("no segment records")
    q = len(records[0].probs)
    if target not in ("iou_adj", "iou"):
        raise ValueError(f"unknown regression target {target!r}")
    X = np.empty((len(records), 15 + q))
    y_cls = np.empty(len(records))
    y_reg = np.empty(len(records))
    for i, r in enumerate(records):
        if r.s_in < 1:
            raise EmptyInterior(f"segment ({r.image_id}, {r.segment_id}) has empty interior")
        X[i, :15] = r.metric_values()
        X[i, 15:] = r.probs
        y_cls[i] = 1.0 if r.iou_adj > 0 else 0.0
        y_reg[i] = r.iou_adj if target == "iou_adj" else r.iou
    return X, y_cls, y_reg

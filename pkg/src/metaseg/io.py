"""Bit-exact file I/O: MST tensors, label maps and segment-metric CSV tables.

MST layout (little-endian): magic "MST1", u8 dtype code (1 = float32,
2 = int32), u8 rank (2 or 3), rank x u32 dims (H, W[, q]), then the
row-major payload with the class axis innermost. No padding, no compression.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    IoFailure,
    LabelOutOfRange,
    MalformedHeader,
    NotAProbability,
)

MAGIC = b"MST1"
DTYPE_F32 = 1
DTYPE_I32 = 2
PROB_SUM_TOL = 1e-4
DEFAULT_IGNORE = 255


@dataclass
class SegmentRecord:
    """All per-segment quantities: the 15 size/dispersion metrics, the
    segment-mean probability vector and the ground-truth overlap scores."""

    image_id: str
    segment_id: int
    class_id: int
    s: int
    s_in: int
    s_bd: int
    s_rel: float
    s_in_rel: float
    e_mean: float
    e_in: float
    e_bd: float
    e_rel: float
    e_in_rel: float
    d_mean: float
    d_in: float
    d_bd: float
    d_rel: float
    d_in_rel: float
    probs: np.ndarray = field(repr=False)
    iou: float = 0.0
    iou_adj: float = 0.0
    ios: float = 0.0

    METRIC_COLUMNS = (
        "S",
        "S_in",
        "S_bd",
        "S_rel",
        "S_in_rel",
        "E_mean",
        "E_in",
        "E_bd",
        "E_rel",
        "E_in_rel",
        "D_mean",
        "D_in",
        "D_bd",
        "D_rel",
        "D_in_rel",
    )

    def metric_values(self):
        return (
            self.s,
            self.s_in,
            self.s_bd,
            self.s_rel,
            self.s_in_rel,
            self.e_mean,
            self.e_in,
            self.e_bd,
            self.e_rel,
            self.e_in_rel,
            self.d_mean,
            self.d_in,
            self.d_bd,
            self.d_rel,
            self.d_in_rel,
        )


def _read_header(f, path):
    head = f.read(6)
    if len(head) != 6 or head[:4] != MAGIC:
        raise MalformedHeader(f"{path}: not an MST file")
    dtype_code, rank = head[4], head[5]
    if dtype_code not in (DTYPE_F32, DTYPE_I32):
        raise MalformedHeader(f"{path}: unknown dtype code {dtype_code}")
    if rank not in (2, 3):
        raise MalformedHeader(f"{path}: unsupported rank {rank}")
    raw = f.read(4 * rank)
    if len(raw) != 4 * rank:
        raise MalformedHeader(f"{path}: truncated dimension block")
    dims = struct.unpack(f"<{rank}I", raw)
    return dtype_code, rank, dims


def _read_payload(f, path, dtype_code, dims):
    count = int(np.prod(dims))
    np_dtype = np.dtype("<f4") if dtype_code == DTYPE_F32 else np.dtype("<i4")
    raw = f.read(count * 4 + 1)
    if len(raw) != count * 4:
        raise DimensionMismatch(f"{path}: payload size does not match header dims {dims}")
    return np.frombuffer(raw, dtype=np_dtype).reshape(dims)


def load_tensor(path):
    """Load an (H, W, q) float32 probability tensor, validating the simplex
    constraint per pixel (sum within 1e-4 of 1, entries in [0, 1], finite)."""
    try:
        with open(path, "rb") as f:
            dtype_code, rank, dims = _read_header(f, path)
            if rank != 3:
                raise DimensionMismatch(f"{path}: probability tensor must be rank 3, got {rank}")
            if dtype_code != DTYPE_F32:
                raise MalformedHeader(f"{path}: probability tensor must be float32")
            h, w, q = dims
            if h < 1 or w < 1 or q < 2:
                raise DimensionMismatch(f"{path}: invalid dims {dims}")
            values = _read_payload(f, path, dtype_code, dims)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    if not np.isfinite(values).all():
        raise NotAProbability(f"{path}: tensor contains NaN or Inf")
    if values.min() < 0.0 or values.max() > 1.0:
        raise NotAProbability(f"{path}: entries outside [0, 1]")
    sums = values.sum(axis=2, dtype=np.float64)
    bad = np.abs(sums - 1.0) > PROB_SUM_TOL
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise NotAProbability(f"{path}: pixel ({i}, {j}) sums to {sums[i, j]:.6f}")
    return values


def save_tensor(path, values):
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 3:
        raise DimensionMismatch(f"expected rank-3 tensor, got rank {values.ndim}")
    try:
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(bytes((DTYPE_F32, 3)))
            f.write(struct.pack("<3I", *values.shape))
            f.write(values.tobytes())
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def load_label_map(path, q, ignore=DEFAULT_IGNORE):
    """Load an (H, W) int32 label map; every non-ignore label must lie in
    [0, q)."""
    try:
        with open(path, "rb") as f:
            dtype_code, rank, dims = _read_header(f, path)
            if rank != 2:
                raise DimensionMismatch(f"{path}: label map must be rank 2, got {rank}")
            if dtype_code != DTYPE_I32:
                raise MalformedHeader(f"{path}: label map must be int32")
            labels = _read_payload(f, path, dtype_code, dims)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    valid = labels != ignore
    if valid.any():
        lo, hi = labels[valid].min(), labels[valid].max()
        if lo < 0 or hi >= q:
            raise LabelOutOfRange(f"{path}: label {hi if hi >= q else lo} outside [0, {q})")
    return labels.astype(np.int32)


def save_label_map(path, labels):
    labels = np.ascontiguousarray(labels, dtype="<i4")
    if labels.ndim != 2:
        raise DimensionMismatch(f"expected rank-2 label map, got rank {labels.ndim}")
    try:
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(bytes((DTYPE_I32, 2)))
            f.write(struct.pack("<2I", *labels.shape))
            f.write(labels.tobytes())
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def table_header(q):
    prob_cols = [f"P_{j}" for j in range(q)]
    return (
        ["image_id", "segment_id", "class"]
        + list(SegmentRecord.METRIC_COLUMNS)
        + prob_cols
        + ["iou", "iou_adj", "ios"]
    )


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.9g}"


def write_segment_table(records, path, q, comment=None):
    """Write segment records as CSV, sorted by (image_id, segment_id), floats
    at 9 significant digits. An optional leading '#' comment line carries
    provenance."""
    rows = sorted(records, key=lambda r: (r.image_id, r.segment_id))
    seen = set()
    for r in rows:
        key = (r.image_id, r.segment_id)
        if key in seen:
            raise IoFailure(f"duplicate segment key {key}")
        seen.add(key)
        if len(r.probs) != q:
            raise DimensionMismatch(f"segment {key}: expected {q} class probabilities")
    lines = []
    if comment:
        lines.append("# " + comment)
    lines.append(",".join(table_header(q)))
    for r in rows:
        cells = [r.image_id, str(r.segment_id), str(r.class_id)]
        cells += [_fmt(v) for v in r.metric_values()]
        cells += [_fmt(p) for p in r.probs]
        cells += [_fmt(r.iou), _fmt(r.iou_adj), _fmt(r.ios)]
        lines.append(",".join(cells))
    try:
        with open(path, "w", newline="\n") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def read_segment_table(path):
    """Parse a segment-table CSV back into records; returns (records, q)."""
    try:
        with open(path, "r") as f:
            lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    lines = [ln for ln in lines if not ln.startswith("#")]
    if not lines:
        raise MalformedHeader(f"{path}: empty table")
    header = lines[0].split(",")
    n_prob = sum(1 for c in header if c.startswith("P_"))
    if header != table_header(n_prob):
        raise MalformedHeader(f"{path}: unexpected column schema")
    records = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != len(header):
            raise MalformedHeader(f"{path}: row with {len(cells)} cells, expected {len(header)}")
        m = cells[3:18]
        probs = np.array([float(c) for c in cells[18 : 18 + n_prob]])
        records.append(
            SegmentRecord(
                image_id=cells[0],
                segment_id=int(cells[1]),
                class_id=int(cells[2]),
                s=int(m[0]),
                s_in=int(m[1]),
                s_bd=int(m[2]),
                s_rel=float(m[3]),
                s_in_rel=float(m[4]),
                e_mean=float(m[5]),
                e_in=float(m[6]),
                e_bd=float(m[7]),
                e_rel=float(m[8]),
                e_in_rel=float(m[9]),
                d_mean=float(m[10]),
                d_in=float(m[11]),
                d_bd=float(m[12]),
                d_rel=float(m[13]),
                d_in_rel=float(m[14]),
                probs=probs,
                iou=float(cells[-3]),
                iou_adj=float(cells[-2]),
                ios=float(cells[-1]),
            )
        )
    return records, n_prob

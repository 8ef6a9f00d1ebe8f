"""Command-line pipeline: synth -> metrics -> fit-eval, plus render.

Exit codes: 0 success, 1 usage error, 2 data/file error, 3 numerical
failure. Each text output starts with a '#' provenance line echoing the
run configuration, and every stage is deterministic for a fixed seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .components import decompose
from .dispersion import all_maps
from .errors import DataError, MetasegError, NumericalError
from .evaluation import SplitPlan, correlation_table, run_experiment
from .io import load_label_map, load_tensor, read_segment_table, write_segment_table
from .segmetrics import aggregate_image, overlap_scores
from .synth import SceneSpec, generate_corpus, save_corpus
from .viz import render_heatmap, render_overlay


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _provenance(cmd, **kwargs):
    args = " ".join(f"{k}={v}" for k, v in sorted(kwargs.items()))
    return f"metaseg {__version__} | {cmd} | {args}"


def cmd_synth(args):
    spec = SceneSpec(
        height=args.height,
        width=args.width,
        q=args.classes,
        n_shapes=args.shapes,
        noise_temperature=args.noise,
        spurious_rate=args.spurious,
        boundary_blur=args.blur,
        seed=args.seed,
    )
    scenes = generate_corpus(spec, args.scenes)
    save_corpus(scenes, args.out)
    print(f"wrote {len(scenes)} scenes to {args.out}")
    return 0


def _corpus_pairs(in_dir):
    in_dir = Path(in_dir)
    pairs = []
    for probs_path in sorted(in_dir.glob("*.probs.mst")):
        scene_id = probs_path.name[: -len(".probs.mst")]
        labels_path = in_dir / f"{scene_id}.labels.mst"
        if not labels_path.exists():
            raise DataError(f"missing label map for {probs_path}")
        pairs.append((scene_id, probs_path, labels_path))
    if not pairs:
        raise DataError(f"no *.probs.mst files in {in_dir}")
    return pairs


def cmd_metrics(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    count_lines = []
    q = None
    for scene_id, probs_path, labels_path in _corpus_pairs(args.in_dir):
        probs = load_tensor(probs_path)
        q = probs.shape[2]
        labels = load_label_map(labels_path, q, ignore=args.ignore)
        ent, diff, cls = all_maps(probs)
        pred = decompose(cls)
        gt = decompose(labels, ignore=args.ignore)
        iou, iou_adj, ios, s_eff = overlap_scores(pred, gt, q_literal=args.q_literal)
        recs, n_empty, n_ignored = aggregate_image(
            scene_id, probs, pred, ent, diff, iou, iou_adj, ios, s_eff
        )
        records.extend(recs)
        count_lines.append(f"{scene_id},{len(recs)},{n_empty},{n_ignored}")
    prov = _provenance("metrics", ignore=args.ignore, q_literal=args.q_literal, q=q)
    write_segment_table(records, out / "segments.csv", q, comment=prov)
    with open(out / "counts.csv", "w") as f:
        f.write("# " + prov + "\n")
        f.write("image_id,n_segments,n_empty_interior,n_all_ignore\n")
        f.write("\n".join(count_lines) + "\n")
    i1 = sum(1 for r in records if r.iou_adj > 0)
    print(f"{len(records)} segments (I_0={len(records) - i1}, I_1={i1}) -> {out / 'segments.csv'}")
    if not records:
        print("warning: no segments with ground truth; table is empty", file=sys.stderr)
    return 0


def cmd_fit_eval(args):
    records, _ = read_segment_table(args.table)
    plan = SplitPlan(seed=args.seed, n_runs=args.runs, fraction=args.split)
    report = run_experiment(
        records,
        plan,
        target=args.target,
        grid_points=args.lambda_points,
        min_ratio=args.lambda_min_ratio,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prov = _provenance(
        "fit-eval",
        seed=args.seed,
        runs=args.runs,
        split=args.split,
        target=args.target,
        lambda_points=args.lambda_points,
    )
    with open(out / "report.csv", "w") as f:
        f.write("# " + prov + "\n")
        f.write("\n".join(report.csv_lines()) + "\n")
    with open(out / "report.txt", "w") as f:
        f.write("# " + prov + "\n")
        f.write(report.text_table() + "\n")
    with open(out / "correlations.csv", "w") as f:
        f.write("# " + prov + "\n")
        f.write("metric,pearson_rho\n")
        for name, rho in correlation_table(records):
            f.write(f"{name},{rho:.9g}\n")
    print(report.text_table())
    return 0


def cmd_render(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    probs = load_tensor(args.probs)
    q = probs.shape[2]
    ent, diff, cls = all_maps(probs)
    render_heatmap(ent, out / "entropy.png")
    render_heatmap(diff, out / "diff.png")
    if args.labels:
        labels = load_label_map(args.labels, q, ignore=args.ignore)
        pred = decompose(cls)
        gt = decompose(labels, ignore=args.ignore)
        iou, iou_adj, _, s_eff = overlap_scores(pred, gt)
        values = {k: iou_adj[k] for k in range(pred.n_segments) if s_eff[k] > 0}
        render_overlay(pred.segment_map, values, out / "iou_adj.png", no_gt_mask=labels == args.ignore)
    print(f"wrote renderings to {out}")
    return 0


def build_parser():
    parser = _Parser(prog="metaseg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--scenes", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--shapes", type=int, default=14)
    p.add_argument("--noise", type=float, default=0.35)
    p.add_argument("--spurious", type=float, default=0.6)
    p.add_argument("--blur", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("metrics", help="compute per-segment metric tables")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ignore", type=int, default=255)
    p.add_argument("--q-literal", action="store_true", help="class-agnostic coverage set Q")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("fit-eval", help="fit meta-models and report metrics")
    p.add_argument("--table", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--split", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", choices=("iou_adj", "iou"), default="iou_adj")
    p.add_argument("--lambda-points", type=int, default=50)
    p.add_argument("--lambda-min-ratio", type=float, default=1e-4)
    p.set_defaults(func=cmd_fit_eval)

    p = sub.add_parser("render", help="render heat maps and score overlays")
    p.add_argument("--probs", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--ignore", type=int, default=255)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"metaseg: numerical failure: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"metaseg: data error: {exc}", file=sys.stderr)
        return 2
    except MetasegError as exc:
        print(f"metaseg: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

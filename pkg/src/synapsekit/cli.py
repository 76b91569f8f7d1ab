"""Command line interface: make-targets, detect, evaluate, similarity, synth, sweep.

Every subcommand writes ``<out>_manifest.json`` next to its outputs. The
manifest's ``volatile`` section (timings, thread count) is the only part
that may differ between otherwise identical runs.

Exit codes: 0 success, 2 validation / config / parse error, 1 internal error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import itertools
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .detect import DetectionConfig, detect
from .evaluation import EvalReport, evaluate
from .similarity import DEFAULT_BUDGET, DEFAULT_SEED, PATCH_SIZE, extract_patches, similarity_matrix
from .synthgen import SynthConfig, generate
from .targets import TargetConfig, compute_weight_map, render_targets
from .volcore import (POST, PRE, FormatError, ValidationError, Volume3D, read_pairs, read_points,
                      read_volume, volume_paths, write_pairs, write_points, write_volume)


def sha256(path) -> str:
    path = Path(path)
    h = hashlib.sha256()
    files = [path]
    if path.suffix == ".json" and path.with_suffix(".raw").exists():
        files.append(path.with_suffix(".raw"))
    for f in files:
        h.update(f.read_bytes())
    return h.hexdigest()


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


class Run:
    """Collects manifest fields for one subcommand invocation."""

    def __init__(self, subcommand: str, threads: int):
        self.t0 = time.perf_counter()
        self.manifest = {
            "tool": "synapsekit",
            "version": __version__,
            "subcommand": subcommand,
            "config": {},
            "inputs": {},
            "outputs": [],
            "thresholds": {},
            "counts": {},
            "seeds": {},
            "volatile": {"threads": threads, "timings": {}},
        }
        self._last = self.t0

    def input(self, name: str, path) -> None:
        self.manifest["inputs"][name] = {"path": str(path), "sha256": sha256(path)}

    def output(self, path) -> None:
        self.manifest["outputs"].append(Path(path).name)

    def stage(self, name: str) -> None:
        now = time.perf_counter()
        self.manifest["volatile"]["timings"][name] = now - self._last
        self._last = now

    def write(self, prefix: str) -> Path:
        self.manifest["volatile"]["timings"]["total"] = time.perf_counter() - self.t0
        path = Path(f"{prefix}_manifest.json")
        path.write_text(_dump(self.manifest), encoding="utf-8")
        return path


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def _config_section(doc: dict, key: str) -> dict:
    """Accept either a bare config or a run manifest that embeds one."""
    if "subcommand" in doc and "config" in doc:
        return doc["config"].get(key, {})
    return doc


def _write_volume(vol: Volume3D, prefix: str, run: Run) -> None:
    write_volume(vol, prefix)
    run.output(prefix + ".json")
    run.output(prefix + ".raw")


# ---------------------------------------------------------------------------
# make-targets
# ---------------------------------------------------------------------------


def cmd_make_targets(args) -> int:
    run = Run("make-targets", args.threads)
    pre = read_points(args.pre, PRE)
    post = read_points(args.post, POST)
    run.input("pre", args.pre)
    run.input("post", args.post)
    cfg = TargetConfig(args.radius)
    run.manifest["config"] = {"targets": {"radius_voxels": cfg.radius_voxels,
                                          "shape": list(args.shape),
                                          "voxel_size_nm": list(args.voxel_size)}}
    vols = render_targets(pre, post, args.shape, cfg, tuple(args.voxel_size))
    run.stage("render")
    for name, vol in zip((PRE, POST), vols):
        wm = compute_weight_map(vol)
        _write_volume(vol, f"{args.out}_{name}_target", run)
        _write_volume(Volume3D(wm.weights.astype(np.float32), vol.voxel_size_nm, "raw"),
                      f"{args.out}_{name}_weights", run)
        run.manifest["counts"][name] = {"points": len(pre if name == PRE else post),
                                        "foreground_voxels": int(vol.data.sum()),
                                        "w_fg": wm.w_fg, "w_bg": wm.w_bg}
    run.stage("write")
    run.write(args.out)
    return 0


# ---------------------------------------------------------------------------
# detect
# ---------------------------------------------------------------------------


def _set_path(doc: dict, dotted: str, value) -> None:
    *head, last = dotted.split(".")
    for key in head:
        doc = doc.setdefault(key, {})
    doc[last] = value


DETECT_OVERRIDES = {
    "threshold_mode": "threshold.mode",
    "tau": "threshold.tau",
    "rho": "threshold.rho",
    "peak_method": "peak.method",
    "min_distance": "peak.min_distance",
    "threshold_abs": "peak.threshold_abs",
    "sigma_min": "peak.sigma_min",
    "sigma_max": "peak.sigma_max",
    "num_sigma": "peak.num_sigma",
    "blob_threshold": "peak.blob_threshold",
    "filter_mode": "filter.mode",
    "d_min": "filter.d_min",
    "pairing_max_distance": "pairing_max_distance",
}


def resolve_detection_config(args) -> DetectionConfig:
    doc = DetectionConfig().to_dict()
    if getattr(args, "config", None):
        user = _config_section(_load_json(args.config), "detection")
        for section, values in user.items():
            if isinstance(values, dict) and isinstance(doc.get(section), dict):
                doc[section].update(values)
            else:
                doc[section] = values
    for attr, dotted in DETECT_OVERRIDES.items():
        value = getattr(args, attr, None)
        if value is not None:
            _set_path(doc, dotted, value)
    return DetectionConfig.from_dict(doc)


def run_detect(pre_path, post_path, cfg: DetectionConfig, out: str, threads: int,
               batch=None, subcommand: str = "detect") -> Run:
    run = Run(subcommand, threads)
    pre_prob, post_prob = read_volume(pre_path), read_volume(post_path)
    run.input("pre_prob", volume_paths(pre_path)[0])
    run.input("post_prob", volume_paths(post_path)[0])
    context = None
    if batch:
        context = [(read_volume(a), read_volume(b)) for a, b in batch]
        for k, (a, b) in enumerate(batch):
            run.input(f"batch_{k}_pre", volume_paths(a)[0])
            run.input(f"batch_{k}_post", volume_paths(b)[0])
    run.stage("read")
    run.manifest["config"] = {"detection": cfg.to_dict()}
    pre, post, pairs, info = detect(pre_prob, post_prob, cfg, context=context, threads=threads)
    run.stage("detect")
    run.manifest["thresholds"] = {ch: info["channels"][ch]["tau"] for ch in (PRE, POST)}
    run.manifest["counts"] = {"channels": info["channels"], "pairs": info["pairs"],
                              "unpaired_post": info["unpaired_post"]}
    for name, pts in ((PRE, pre), (POST, post)):
        path = f"{out}_{name}.csv"
        write_points(pts, path)
        run.output(path)
    write_pairs(pairs, f"{out}_pairs.json")
    run.output(f"{out}_pairs.json")
    run.stage("write")
    run.write(out)
    return run


def cmd_detect(args) -> int:
    cfg = resolve_detection_config(args)
    batch = list(zip(args.batch[0::2], args.batch[1::2])) if args.batch else None
    run_detect(args.pre_prob, args.post_prob, cfg, args.out, args.threads, batch)
    return 0


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def _write_report(report: EvalReport, out: str, run: Run) -> None:
    Path(f"{out}_report.json").write_text(_dump(report.to_dict()), encoding="utf-8")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=EvalReport.CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in report.csv_rows():
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    Path(f"{out}_report.csv").write_text(buf.getvalue(), encoding="utf-8", newline="")
    run.output(f"{out}_report.json")
    run.output(f"{out}_report.csv")


def cmd_evaluate(args) -> int:
    run = Run("evaluate", args.threads)
    det_pre = read_points(args.detected_pre, PRE)
    det_post = read_points(args.detected_post, POST)
    truth_pre = read_points(args.truth_pre, PRE)
    truth_post = read_points(args.truth_post, POST)
    for name in ("detected_pre", "detected_post", "truth_pre", "truth_post"):
        run.input(name, getattr(args, name))
    det_pairs = truth_pairs = None
    if args.detected_pairs:
        det_pairs = read_pairs(args.detected_pairs, det_pre, det_post)
        run.input("detected_pairs", args.detected_pairs)
    if args.truth_pairs:
        truth_pairs = read_pairs(args.truth_pairs, truth_pre, truth_post)
        run.input("truth_pairs", args.truth_pairs)
    threshold = args.threshold
    if args.threshold_nm is not None:
        threshold = args.threshold_nm / args.voxel_size_nm
    if not threshold > 0:
        raise ValidationError("threshold must be positive")
    run.manifest["config"] = {"evaluate": {"threshold_voxels": threshold,
                                           "clamp": not args.no_clamp,
                                           "volume": args.volume_name}}
    report = evaluate(det_pre, det_post, truth_pre, truth_post, det_pairs, truth_pairs,
                      threshold, clamp=not args.no_clamp, volume=args.volume_name)
    run.stage("evaluate")
    run.manifest["counts"] = {"f1_pre": report.f1_pre, "f1_post": report.f1_post,
                              "pairwise_f1": report.pairwise_f1}
    _write_report(report, args.out, run)
    run.write(args.out)
    return 0


# ---------------------------------------------------------------------------
# similarity
# ---------------------------------------------------------------------------


def cmd_similarity(args) -> int:
    run = Run("similarity", args.threads)
    groups, names = [], []
    for name, vol_path, pts_path in args.group:
        vol = read_volume(vol_path)
        pts = read_points(pts_path, args.channel)
        run.input(f"{name}_volume", volume_paths(vol_path)[0])
        run.input(f"{name}_points", pts_path)
        groups.append(extract_patches(vol, pts, args.size, normalize=not args.raw, source_id=name))
        names.append(name)
    run.stage("extract")
    meta = {"metric": args.metric, "seed": args.seed, "budget": args.budget,
            "normalisation": "raw" if args.raw else "minmax", "patch_size": args.size,
            "groups": names, "patches": [len(g) for g in groups],
            "skipped": [g.skipped for g in groups]}
    run.manifest["config"] = {"similarity": meta}
    run.manifest["seeds"] = {"sampling": args.seed}
    mat = similarity_matrix(groups, args.metric, args.budget, args.seed)
    run.stage("similarity")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["group"] + names)
    for name, row in zip(names, mat):
        writer.writerow([name] + ["" if np.isnan(v) else repr(float(v)) for v in row])
    Path(f"{args.out}_matrix.csv").write_text(buf.getvalue(), encoding="utf-8", newline="")
    meta["missing"] = [[i, j] for i, j in zip(*np.nonzero(np.isnan(mat)))]
    meta["missing"] = [[int(i), int(j)] for i, j in meta["missing"]]
    Path(f"{args.out}_meta.json").write_text(_dump(meta), encoding="utf-8")
    run.output(f"{args.out}_matrix.csv")
    run.output(f"{args.out}_meta.json")
    run.write(args.out)
    return 0


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    run = Run("synth", args.threads)
    doc = {}
    if args.config:
        doc = dict(_config_section(_load_json(args.config), "synth"))
        run.input("config", args.config)
    for attr in ("seed", "n_synapses", "shape", "noise_std", "blob_sigma_voxels",
                 "clutter_density"):
        value = getattr(args, attr)
        if value is not None:
            doc[attr] = value
    try:
        cfg = SynthConfig.from_dict(doc)
    except TypeError as exc:
        raise ValidationError(f"bad synth config: {exc}") from exc
    run.manifest["config"] = {"synth": cfg.to_dict()}
    run.manifest["seeds"] = {"synth": cfg.seed}
    res = generate(cfg)
    run.stage("generate")
    _write_volume(res.pre_prob, f"{args.out}_pre_prob", run)
    _write_volume(res.post_prob, f"{args.out}_post_prob", run)
    write_points(res.pre, f"{args.out}_pre.csv")
    write_points(res.post, f"{args.out}_post.csv")
    write_pairs(res.pairs, f"{args.out}_pairs.json")
    for suffix in ("pre.csv", "post.csv", "pairs.json"):
        run.output(f"{args.out}_{suffix}")
    run.manifest["counts"] = {"pre": len(res.pre), "post": len(res.post), "pairs": len(res.pairs)}
    run.stage("write")
    run.write(args.out)
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def expand_grid(grid: dict):
    """Cartesian product of ``{"section.field": [values...]}`` in sorted-key order."""
    keys = sorted(grid)
    for values in itertools.product(*(grid[k] for k in keys)):
        yield dict(zip(keys, values))


def cmd_sweep(args) -> int:
    """Diagnostic ablation sweep: one detect (and optional evaluate) run per grid cell."""
    sweep_run = Run("sweep", args.threads)
    base = resolve_detection_config(args).to_dict()
    grid = _load_json(args.grid)
    if not isinstance(grid, dict) or not all(isinstance(v, list) for v in grid.values()):
        raise ValidationError("grid must map dotted config fields to lists of values")
    sweep_run.input("grid", args.grid)
    sweep_run.input("pre_prob", volume_paths(args.pre_prob)[0])
    sweep_run.input("post_prob", volume_paths(args.post_prob)[0])
    sweep_run.manifest["config"] = {"detection": base, "grid": grid}
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    truth = None
    if args.truth_pre and args.truth_post:
        truth_pre = read_points(args.truth_pre, PRE)
        truth_post = read_points(args.truth_post, POST)
        truth_pairs = read_pairs(args.truth_pairs, truth_pre, truth_post) if args.truth_pairs else None
        truth = (truth_pre, truth_post, truth_pairs)
    rows = []
    for k, cell in enumerate(expand_grid(grid)):
        doc = copy.deepcopy(base)
        for dotted, value in cell.items():
            _set_path(doc, dotted, value)
        cfg = DetectionConfig.from_dict(doc)
        prefix = str(outdir / f"cell_{k:03d}")
        run = run_detect(args.pre_prob, args.post_prob, cfg, prefix, args.threads,
                         subcommand="sweep")
        row = {"cell": k, **{key: json.dumps(v) for key, v in cell.items()},
               "n_pre": run.manifest["counts"]["channels"][PRE]["filtered"],
               "n_post": run.manifest["counts"]["channels"][POST]["filtered"]}
        if truth is not None:
            det_pre = read_points(f"{prefix}_pre.csv", PRE)
            det_post = read_points(f"{prefix}_post.csv", POST)
            det_pairs = read_pairs(f"{prefix}_pairs.json", det_pre, det_post)
            rep = evaluate(det_pre, det_post, truth[0], truth[1], det_pairs, truth[2],
                           args.threshold)
            row.update(f1_pre=repr(rep.f1_pre), f1_post=repr(rep.f1_post),
                       pairwise_f1="" if rep.pairwise_f1 is None else repr(rep.pairwise_f1))
        rows.append(row)
    buf = io.StringIO()
    fields = list(rows[0]) if rows else ["cell"]
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    (outdir / "summary.csv").write_text(buf.getvalue(), encoding="utf-8", newline="")
    sweep_run.output(outdir / "summary.csv")
    sweep_run.manifest["counts"] = {"cells": len(rows)}
    sweep_run.write(str(outdir / "sweep"))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_detect_flags(p) -> None:
    p.add_argument("--config", help="detection config JSON (or a detect run manifest)")
    p.add_argument("--threshold-mode", choices=["manual", "auto", "relative", "relative_batch"])
    p.add_argument("--tau", type=float, help="manual threshold")
    p.add_argument("--rho", type=float, help="relative threshold fraction of the maximum")
    p.add_argument("--peak-method", choices=["peak_local_max", "blob_log"])
    p.add_argument("--min-distance", type=int)
    p.add_argument("--threshold-abs", type=float)
    p.add_argument("--sigma-min", type=float)
    p.add_argument("--sigma-max", type=float)
    p.add_argument("--num-sigma", type=int)
    p.add_argument("--blob-threshold", type=float)
    p.add_argument("--filter-mode", choices=["none", "by_distance", "by_distance_and_mask"])
    p.add_argument("--d-min", type=float)
    p.add_argument("--pairing-max-distance", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synapsekit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-targets", parents=[common], help="render sphere targets + weights")
    p.add_argument("pre")
    p.add_argument("post")
    p.add_argument("--shape", type=int, nargs=3, required=True, metavar=("Z", "Y", "X"))
    p.add_argument("--radius", type=float, default=TargetConfig().radius_voxels)
    p.add_argument("--voxel-size", type=float, nargs=3, default=[8.0, 8.0, 8.0])
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_make_targets)

    p = sub.add_parser("detect", parents=[common], help="decode probability maps")
    p.add_argument("pre_prob")
    p.add_argument("post_prob")
    _add_detect_flags(p)
    p.add_argument("--batch", nargs="+", metavar="VOL",
                   help="PRE POST volume pairs forming the relative_batch context")
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", parents=[common], help="score detections against truth")
    p.add_argument("--detected-pre", required=True)
    p.add_argument("--detected-post", required=True)
    p.add_argument("--truth-pre", required=True)
    p.add_argument("--truth-post", required=True)
    p.add_argument("--detected-pairs")
    p.add_argument("--truth-pairs")
    p.add_argument("--threshold", type=float, default=120.0, help="match radius in voxels")
    p.add_argument("--threshold-nm", type=float, help="match radius in nm (overrides --threshold)")
    p.add_argument("--voxel-size-nm", type=float, default=8.0)
    p.add_argument("--no-clamp", action="store_true",
                   help="match on raw distances and test the threshold afterwards")
    p.add_argument("--volume-name", default="volume")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("similarity", parents=[common], help="patch similarity matrix")
    p.add_argument("--group", nargs=3, action="append", required=True,
                   metavar=("NAME", "VOLUME", "POINTS"))
    p.add_argument("--metric", choices=["ssim", "cosine"], default="ssim")
    p.add_argument("--size", type=int, default=PATCH_SIZE)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--raw", action="store_true", help="skip min-max patch normalisation")
    p.add_argument("--channel", choices=[PRE, POST], default=PRE)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_similarity)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-synapses", type=int)
    p.add_argument("--shape", type=int, nargs=3)
    p.add_argument("--noise-std", type=float)
    p.add_argument("--blob-sigma-voxels", type=float)
    p.add_argument("--clutter-density", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep", parents=[common], help="diagnostic ablation grid over detect")
    p.add_argument("pre_prob")
    p.add_argument("post_prob")
    _add_detect_flags(p)
    p.add_argument("--grid", required=True, help='JSON {"section.field": [values, ...]}')
    p.add_argument("--truth-pre")
    p.add_argument("--truth-post")
    p.add_argument("--truth-pairs")
    p.add_argument("--threshold", type=float, default=120.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except (ValidationError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points.

Subcommands wrap one toolkit operation each: convert, evaluate,
baseline, train, generate, analyze, thumbnail. Option values resolve in
the order flags > SCANKIT_* environment variables > --config TOML file >
built-in defaults, and the fully resolved configuration (seed included)
is logged as one JSON line on stderr so any artifact can be reproduced
from its log. Errors leave a single machine-parsable line on stderr and
a nonzero exit code.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import behavior, io, metrics
from .gan import (
    TrainConfig,
    augment_longitudinal_shift,
    generate,
    load_params,
    save_params,
    train,
)
from .thumbnail import render_viewport, thumbnail_trajectory, upsample_trajectory


def _load_file_config(path, section):
    if path is None:
        return {}
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    merged = {k: v for k, v in data.items() if not isinstance(v, dict)}
    merged.update(data.get(section, {}))
    return merged


def resolve_options(args: argparse.Namespace, defaults: dict, section: str) -> dict:
    """flags > SCANKIT_<NAME> env vars > config file > defaults."""
    file_cfg = _load_file_config(getattr(args, "config", None), section)
    resolved = {}
    for key, default in defaults.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = flag_value
            continue
        env = os.environ.get("SCANKIT_" + key.upper())
        if env is not None:
            if isinstance(default, bool):
                resolved[key] = env.strip().lower() in ("1", "true", "yes", "on")
            elif default is not None:
                resolved[key] = type(default)(env)
            else:
                resolved[key] = env
            continue
        if key in file_cfg:
            resolved[key] = file_cfg[key]
            continue
        resolved[key] = default
    return resolved


def _log_config(command: str, resolved: dict) -> None:
    print("config: " + json.dumps({"command": command, **resolved}, sort_keys=True), file=sys.stderr)


def _write_reports(reports, out_path) -> None:
    docs = [r.to_json_dict() for r in reports]
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(docs, fh, indent=2)
        fh.write("\n")


# -- subcommands -------------------------------------------------------------

CONVERT_DEFAULTS = {"hz": 1.0, "T": 30, "short": "truncate", "degrees": False}


def cmd_convert(args) -> int:
    opt = resolve_options(args, CONVERT_DEFAULTS, "convert")
    _log_config("convert", {**opt, "infile": args.infile, "out": args.out})
    n = io.convert_file(
        args.infile, args.out, target_hz=opt["hz"], target_T=opt["T"],
        short=opt["short"], degrees=opt["degrees"],
    )
    print(f"wrote {n} records to {args.out}")
    return 0


EVALUATE_DEFAULTS = {
    "hz": 1.0, "T": 30, "grid_lat": 9, "grid_lon": 18,
    "rec_radius": 0.25, "rec_min_line": 2, "tde_k": 3, "tde_stride": 1, "text": None,
}


def cmd_evaluate(args) -> int:
    opt = resolve_options(args, EVALUATE_DEFAULTS, "evaluate")
    _log_config("evaluate", {**opt, "gen": args.gen, "gt": args.gt, "out": args.out})
    gen_sets = io.ingest(args.gen, opt["hz"], opt["T"])
    gt_sets = io.ingest(args.gt, opt["hz"], opt["T"])
    grid = metrics.QuantizationGrid(opt["grid_lat"], opt["grid_lon"])
    rec_cfg = metrics.RecurrenceConfig(opt["rec_radius"], opt["rec_min_line"])
    shared = sorted(set(gen_sets) & set(gt_sets))
    if not shared:
        raise ValueError("evaluate: no common image_id between --gen and --gt")
    reports = [
        metrics.compute_report(
            gen_sets[i], gt_sets[i], grid, rec_cfg, opt["tde_k"], opt["tde_stride"]
        )
        for i in shared
    ]
    _write_reports(reports, args.out)
    if opt["text"]:
        with open(opt["text"], "w", encoding="utf-8") as fh:
            for r in reports:
                fh.write(r.to_text() + "\n")
    print(f"evaluated {len(reports)} image(s) -> {args.out}")
    return 0


BASELINE_DEFAULTS = {
    "hz": 1.0, "T": 30, "mode": "both", "n": 100, "seed": 0,
    "grid_lat": 9, "grid_lon": 18, "rec_radius": 0.25, "rec_min_line": 2,
    "tde_k": 3, "tde_stride": 1,
}


def cmd_baseline(args) -> int:
    opt = resolve_options(args, BASELINE_DEFAULTS, "baseline")
    _log_config("baseline", {**opt, "gt": args.gt, "out": args.out})
    gt_sets = io.ingest(args.gt, opt["hz"], opt["T"])
    grid = metrics.QuantizationGrid(opt["grid_lat"], opt["grid_lon"])
    rec_cfg = metrics.RecurrenceConfig(opt["rec_radius"], opt["rec_min_line"])
    reports = []
    for image_id, gt in sorted(gt_sets.items()):
        if opt["mode"] in ("human", "both"):
            reports.append(
                metrics.compute_report(
                    gt, gt, grid, rec_cfg, opt["tde_k"], opt["tde_stride"], protocol="human"
                )
            )
        if opt["mode"] in ("random", "both"):
            rand = metrics.random_baseline(opt["T"], opt["n"], opt["seed"], opt["hz"], image_id)
            reports.append(
                metrics.compute_report(rand, gt, grid, rec_cfg, opt["tde_k"], opt["tde_stride"])
            )
    _write_reports(reports, args.out)
    print(f"wrote {len(reports)} baseline report(s) to {args.out}")
    return 0


TRAIN_DEFAULTS = {
    "hz": 1.0, "T": 30, "epochs": 10, "seed": 0, "image_h": 64,
    "batch": 8, "lambda_dtw": 0.1, "gamma": 1.0, "lr_g": 1e-4, "lr_d": 1e-5,
    "augment": 0, "val_ids": "", "max_steps": 0, "resume": False,
}


def cmd_train(args) -> int:
    opt = resolve_options(args, TRAIN_DEFAULTS, "train")
    _log_config("train", {**opt, "scanpaths": args.scanpaths, "images": args.images, "out": args.out})
    sets = io.ingest(args.scanpaths, opt["hz"], opt["T"])
    h = opt["image_h"]
    strides = (8, 2) if h % 16 == 0 else (max(2, h // 8), 2)
    cfg = TrainConfig(
        epochs=opt["epochs"], seed=opt["seed"], image_h=h, batch=opt["batch"],
        lambda_dtw=opt["lambda_dtw"], gamma=opt["gamma"], lr_g=opt["lr_g"], lr_d=opt["lr_d"],
        path_len=opt["T"], max_steps=opt["max_steps"] or None, conv_strides=strides,
    )
    val_ids = {s for s in opt["val_ids"].split(",") if s}
    dataset, val_dataset = [], []
    for image_id, sps in sorted(sets.items()):
        img = io.load_equirect_png(Path(args.images) / f"{image_id}.png", cfg.image_h, image_id)
        if image_id in val_ids:
            val_dataset.append((img, sps))
        else:
            dataset.append((img, sps))
            for aug_img, aug_sps in (
                augment_longitudinal_shift(img, sps, n=opt["augment"], seed=cfg.seed)
                if opt["augment"] else ()
            ):
                dataset.append((aug_img, aug_sps))
    store = load_params(args.out) if opt["resume"] and Path(args.out).exists() else None
    log_path = str(args.out) + ".log.jsonl"

    def progress(log):
        print(f"progress: {json.dumps(log.to_dict())}", file=sys.stderr)
        with open(log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(log.to_dict()) + "\n")

    try:
        store, _ = train(
            dataset, cfg, val_dataset or None, store=store,
            checkpoint_path=args.out, progress=progress,
        )
    except KeyboardInterrupt:
        print("error: interrupted; checkpoint retains the last finished epoch", file=sys.stderr)
        return 130
    save_params(store, args.out)
    print(f"trained {cfg.epochs} epoch(s) -> {args.out}")
    return 0


GENERATE_DEFAULTS = {"n": 100, "seed": 0, "image_id": ""}


def cmd_generate(args) -> int:
    opt = resolve_options(args, GENERATE_DEFAULTS, "generate")
    _log_config("generate", {**opt, "image": args.image, "params": args.params, "out": args.out})
    store = load_params(args.params)
    img = io.load_equirect_png(args.image, store.cfg.image_h, opt["image_id"])
    sps = generate(img, opt["n"], store, opt["seed"])
    io.write_records(args.out, io.scanpath_set_records(sps))
    print(f"generated {opt['n']} scanpaths for {img.image_id} -> {args.out}")
    return 0


ANALYZE_DEFAULTS = {
    "hz": 1.0, "T": 30, "H": 64, "W": 128, "blur": 10.0, "kappa": 80.0,
    "kde_t": "", "image_id": "", "roc": True,
}


def cmd_analyze(args) -> int:
    opt = resolve_options(args, ANALYZE_DEFAULTS, "analyze")
    _log_config("analyze", {**opt, "scanpaths": args.scanpaths, "out": args.out})
    sets = io.ingest(args.scanpaths, opt["hz"], opt["T"])
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    wanted = [s for s in [opt["image_id"]] if s] or sorted(sets)
    for image_id in wanted:
        sps = sets[image_id]
        prefix = out_dir / image_id
        amap = behavior.aggregate_map(sps, opt["H"], opt["W"], opt["blur"])
        np.save(f"{prefix}.aggregate.npy", amap)
        io.save_png(amap, f"{prefix}.aggregate.png")
        curve = behavior.exploration_time(sps)
        with open(f"{prefix}.exploration.json", "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "offsets_deg": curve.offsets_deg.tolist(),
                    "mean_time_s": [None if np.isnan(x) else x for x in curve.mean_time_s],
                    "coverage": curve.coverage.tolist(),
                },
                fh,
                indent=2,
            )
        if opt["roc"] and len(sps) >= 2:
            roc = behavior.roc_congruency(sps, opt["H"], opt["W"])
            with open(f"{prefix}.roc.json", "w", encoding="utf-8") as fh:
                json.dump(
                    {
                        "ladder_pct": roc.ladder_pct.tolist(),
                        "mean_hit_rate_pct": roc.mean_hit_rate_pct.tolist(),
                    },
                    fh,
                    indent=2,
                )
        for t_str in filter(None, opt["kde_t"].split(",")):
            d = behavior.kde_timestamp(sps, float(t_str), opt["kappa"], opt["H"], opt["W"])
            np.save(f"{prefix}.kde_t{t_str}.npy", d.values)
            io.save_png(d.values, f"{prefix}.kde_t{t_str}.png")
        print(f"analyzed {image_id} ({len(sps)} scanpaths) -> {out_dir}")
    return 0


THUMBNAIL_DEFAULTS = {
    "n": 100, "kappa": 80.0, "seed": 0, "frame_h": 180, "frame_w": 320,
    "fov_min": 30.0, "fov_max": 100.0, "upsample": 1,
}


def cmd_thumbnail(args) -> int:
    opt = resolve_options(args, THUMBNAIL_DEFAULTS, "thumbnail")
    _log_config("thumbnail", {**opt, "image": args.image, "params": args.params, "out": args.out})
    store = load_params(args.params)
    img = io.load_equirect_png(args.image, store.cfg.image_h)
    frames = thumbnail_trajectory(
        img, store, n=opt["n"], kappa=opt["kappa"], seed=opt["seed"],
        fov_min_deg=opt["fov_min"], fov_max_deg=opt["fov_max"],
    )
    if opt["upsample"] > 1:
        frames = upsample_trajectory(frames, opt["upsample"])
    full = io.load_equirect_png(args.image)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = []
    for i, frame in enumerate(frames):
        view = render_viewport(full, frame, opt["frame_h"], opt["frame_w"])
        io.save_png(view, out_dir / f"frame_{i:04d}.png")
        meta.append(
            {
                "t": frame.t,
                "lat": float(frame.center.lat),
                "lon": float(frame.center.lon),
                "fov_deg": frame.fov_deg,
            }
        )
    with open(out_dir / "trajectory.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
    print(f"rendered {len(frames)} frames -> {out_dir}")
    return 0


# -- parser ------------------------------------------------------------------


def _add_common(sub, *names):
    sub.add_argument("--config", default=None, help="TOML config file")
    for name in names:
        flag = "--" + name.replace("_", "-")
        if name in ("degrees", "resume"):
            sub.add_argument(flag, action="store_const", const=True, default=None)
        elif name == "roc":
            sub.add_argument("--no-roc", dest="roc", action="store_const", const=False, default=None)
        else:
            sub.add_argument(flag, default=None, type=_OPTION_TYPES.get(name, str))


_OPTION_TYPES = {
    "hz": float, "T": int, "grid_lat": int, "grid_lon": int,
    "rec_radius": float, "rec_min_line": int, "tde_k": int, "tde_stride": int,
    "n": int, "seed": int, "epochs": int, "image_h": int, "batch": int,
    "lambda_dtw": float, "gamma": float, "lr_g": float, "lr_d": float,
    "augment": int, "max_steps": int, "H": int, "W": int, "blur": float,
    "kappa": float, "frame_h": int, "frame_w": int, "fov_min": float, "fov_max": float,
    "upsample": int,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scankit",
        description="Spherical scanpath toolkit: conversion, metrics, training, "
        "generation, behavior analyses, and viewport thumbnails.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("convert", help="resample a scanpath file onto the canonical lattice")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    _add_common(p, *CONVERT_DEFAULTS)
    p.set_defaults(func=cmd_convert)

    p = subs.add_parser("evaluate", help="metric suite of generated vs ground-truth scanpaths")
    p.add_argument("--gen", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    _add_common(p, *EVALUATE_DEFAULTS)
    p.set_defaults(func=cmd_evaluate)

    p = subs.add_parser("baseline", help="human and random baselines for a ground-truth file")
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("human", "random", "both"), default=None)
    _add_common(p, *(k for k in BASELINE_DEFAULTS if k != "mode"))
    p.set_defaults(func=cmd_baseline)

    p = subs.add_parser("train", help="train the conditional generator")
    p.add_argument("--scanpaths", required=True)
    p.add_argument("--images", required=True, help="directory of <image_id>.png panoramas")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--val-ids", default=None, help="comma-separated image_ids held out")
    _add_common(p, *(k for k in TRAIN_DEFAULTS if k != "val_ids"))
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("generate", help="sample scanpaths for a panorama")
    p.add_argument("--image", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--image-id", default=None)
    _add_common(p, *(k for k in GENERATE_DEFAULTS if k != "image_id"))
    p.set_defaults(func=cmd_generate)

    p = subs.add_parser("analyze", help="aggregate map, exploration, ROC, and KDE exports")
    p.add_argument("--scanpaths", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--image-id", default=None)
    p.add_argument("--kde-t", default=None, help="comma-separated timestamps (seconds)")
    _add_common(p, *(k for k in ANALYZE_DEFAULTS if k not in ("image_id", "kde_t")))
    p.set_defaults(func=cmd_analyze)

    p = subs.add_parser("thumbnail", help="panning-viewport thumbnail frames")
    p.add_argument("--image", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p, *THUMBNAIL_DEFAULTS)
    p.set_defaults(func=cmd_thumbnail)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except (ValueError, OSError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

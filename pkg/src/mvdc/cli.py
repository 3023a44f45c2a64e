"""Batch command-line front end.

Every command is deterministic given --seed, exits non-zero on failure, and
reports failures as machine-readable `ERROR <code>: <message>` lines on
stderr.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import dataset as ds
from . import fusion, geometry, metrics
from .errors import ParseError, TrainingDiverged


class CliError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("USAGE", message)


_PIPELINE_KEYS = ("rig", "dataset", "train_config", "output_dir", "seed")


def load_pipeline_config(path) -> dict:
    """Pipeline config: key = value fallbacks for common command arguments.

    Keys: rig, dataset, train_config, output_dir, seed. Referenced paths
    must exist.
    """
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", path=path, line=lineno)
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _PIPELINE_KEYS:
                raise ParseError(f"unknown pipeline key {key!r}", path=path, line=lineno)
            values[key] = value.strip()
    for key in ("rig", "dataset", "train_config"):
        if key in values and not os.path.exists(values[key]):
            raise CliError("CONFIG", f"pipeline config {key} path does not exist: {values[key]}")
    return values


def _apply_pipeline_config(args) -> None:
    if not getattr(args, "config", None):
        args.pipeline = {}
        return
    cfg = load_pipeline_config(args.config)
    args.pipeline = cfg
    if getattr(args, "rig", None) is None and "rig" in cfg:
        args.rig = cfg["rig"]
    if getattr(args, "dataset", None) is None and "dataset" in cfg:
        args.dataset = cfg["dataset"]
    if getattr(args, "train_config", None) is None and "train_config" in cfg:
        args.train_config = cfg["train_config"]
    if getattr(args, "seed", None) is None and "seed" in cfg:
        args.seed = int(cfg["seed"])


def _resolve_out(args, default_name: str) -> str:
    if getattr(args, "out", None):
        return args.out
    out_dir = args.pipeline.get("output_dir")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        return os.path.join(out_dir, default_name)
    raise CliError("USAGE", "--out is required (or set output_dir in the pipeline config)")


def _load_rig(args) -> geometry.CameraRig:
    if getattr(args, "rig", None):
        return geometry.load_rig_config(args.rig)
    return geometry.build_rig()


def _read_maps(paths: list[str], rig: geometry.CameraRig) -> list[ds.DepthMap]:
    maps = []
    for path in paths:
        dmap, _, _ = ds.read_depth_pgm(path)
        maps.append(dmap)
    by_view = {m.view_index: m for m in maps}
    missing = [v for v in rig.view_ids if v not in by_view]
    if missing:
        raise CliError("INPUT", f"missing depth maps for views {missing}")
    return [by_view[v] for v in rig.view_ids]


def _map_paths(args) -> list[str]:
    if len(args.maps) == 1 and os.path.isdir(args.maps[0]):
        root = args.maps[0]
        return [os.path.join(root, name) for name in sorted(os.listdir(root)) if name.endswith(".pgm")]
    return args.maps


def _fuse_params(args) -> fusion.FuseParams:
    return fusion.FuseParams(
        vote_threshold=args.threshold,
        depth_tol=args.depth_tol,
        radius=args.radius,
        min_neighbors=args.min_neighbors,
        reject_occluded=args.reject_occluded,
    )


def cmd_gen_data(args) -> int:
    rig = _load_rig(args)
    out = _resolve_out(args, "dataset")
    seed = args.seed if args.seed is not None else 0
    splits: dict[str, list[str]] = {}
    entries = []
    with open(args.manifest, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(
                    "expected '<shape_id> <cloud_path> <split>'", path=args.manifest, line=lineno
                )
            entries.append(parts)
    os.makedirs(out, exist_ok=True)
    for shape_id, cloud_path, split in entries:
        cloud = ds.read_cloud(cloud_path)
        sample = ds.make_sample(cloud, rig, shape_id, ds.shape_seed(seed, shape_id))
        ds.save_sample(out, sample, rig)
        splits.setdefault(split, []).append(shape_id)
        if args.verbose:
            print(f"generated {shape_id} ({split})")
    ds.write_manifest(os.path.join(out, "manifest.txt"), splits)
    geometry.save_rig_config(os.path.join(out, "rig.cfg"), rig)
    return 0


def cmd_render(args) -> int:
    rig = _load_rig(args)
    cloud = ds.read_cloud(args.cloud)
    out = _resolve_out(args, "views")
    os.makedirs(out, exist_ok=True)
    for dmap in geometry.render_views(cloud, rig):
        path = os.path.join(out, f"{args.prefix}{dmap.view_index}.pgm")
        ds.write_depth_pgm(path, dmap, rig.near, rig.far)
        if args.verbose:
            print(f"wrote {path}")
    return 0


def cmd_backproject(args) -> int:
    rig = _load_rig(args)
    maps = _read_maps(_map_paths(args), rig)
    points = fusion.backproject_all(maps, rig)
    out = _resolve_out(args, "backprojected.xyz")
    ds.write_cloud(out, points.positions)
    if args.verbose:
        print(f"wrote {len(points)} points to {out}")
    return 0


def cmd_fuse(args) -> int:
    rig = _load_rig(args)
    maps = _read_maps(_map_paths(args), rig)
    cloud = fusion.fuse(maps, rig, _fuse_params(args))
    out = _resolve_out(args, "fused.xyz")
    ds.write_cloud(out, cloud)
    if args.verbose:
        print(f"wrote {cloud.shape[0]} points to {out}")
    return 0


def cmd_train(args) -> int:
    import torch

    from .net import TrainConfig, build_train_state, run_training, save_checkpoint
    from .net.train import examples_from_sample

    torch.set_num_threads(args.threads)
    if not args.train_config:
        raise CliError("USAGE", "--train-config is required (or set train_config in the pipeline config)")
    if not args.dataset:
        raise CliError("USAGE", "--dataset is required (or set dataset in the pipeline config)")
    config = TrainConfig.load(args.train_config)
    if args.seed is not None:
        config.seed = args.seed
    rig = geometry.load_rig_config(os.path.join(args.dataset, "rig.cfg"))
    if rig.resolution != config.resolution or rig.num_views != config.views:
        raise CliError(
            "CONFIG",
            f"dataset rig ({rig.resolution}px, {rig.num_views} views) does not match "
            f"train config ({config.resolution}px, {config.views} views)",
        )
    splits = ds.read_manifest(os.path.join(args.dataset, "manifest.txt"))
    shape_ids = splits.get(args.split, [])
    if not shape_ids:
        raise CliError("INPUT", f"no shapes in split {args.split!r}")
    examples = []
    for shape_id in shape_ids:
        sample = ds.load_sample(args.dataset, shape_id, rig)
        examples.extend(examples_from_sample(sample, rig.near, rig.far))
    state = build_train_state(config)
    out = _resolve_out(args, "model.ckpt")

    log_fh = None
    writer = None
    if args.log:
        log_fh = open(args.log, "w", newline="", encoding="utf-8")
        writer = csv.writer(log_fh)
        writer.writerow(["step", "loss_d", "loss_g_adv", "loss_l1"])

    def log(step, m):
        if writer is not None:
            writer.writerow([step, f"{m['loss_d']:.8f}", f"{m['loss_g_adv']:.8f}", f"{m['loss_l1']:.8f}"])
        if args.verbose and step % 50 == 0:
            print(
                f"step {step}: loss_d={m['loss_d']:.4f} "
                f"loss_g_adv={m['loss_g_adv']:.4f} loss_l1={m['loss_l1']:.4f}"
            )

    try:
        run_training(state, examples, log=log)
    finally:
        if log_fh is not None:
            log_fh.close()
    save_checkpoint(out, config, state.checkpoint_tensors())
    if args.verbose:
        print(f"wrote checkpoint {out}")
    return 0


def cmd_complete(args) -> int:
    import torch

    from .net import complete_shape, restore_train_state

    torch.set_num_threads(args.threads)
    state = restore_train_state(args.checkpoint)
    cfg = state.config
    if args.rig:
        rig = geometry.load_rig_config(args.rig)
    else:
        rig = geometry.build_rig(resolution=cfg.resolution, views=cfg.views)
    if rig.resolution != cfg.resolution or rig.num_views != cfg.views:
        raise CliError("CONFIG", "rig does not match the checkpoint's resolution/views")
    cloud = ds.read_cloud(args.cloud)
    normalized, record = geometry.normalize_shape(cloud)
    partial_maps = geometry.render_views(normalized, rig)
    completed = complete_shape(state, partial_maps, rig)
    if args.emit_views:
        os.makedirs(args.emit_views, exist_ok=True)
        for dmap in partial_maps:
            ds.write_depth_pgm(
                os.path.join(args.emit_views, f"input_{dmap.view_index}.pgm"), dmap, rig.near, rig.far
            )
        for dmap in completed:
            ds.write_depth_pgm(
                os.path.join(args.emit_views, f"completed_{dmap.view_index}.pgm"),
                dmap,
                rig.near,
                rig.far,
            )
    params = _fuse_params(args)
    fused = fusion.fuse(completed, rig, params)
    restored = geometry.denormalize_shape(fused, record)
    out = _resolve_out(args, "completed.xyz")
    ds.write_cloud(out, restored)
    if args.verbose:
        print(f"wrote {restored.shape[0]} points to {out}")
    return 0


def cmd_eval(args) -> int:
    if args.pred and args.truth:
        pred = ds.read_cloud(args.pred)
        truth = ds.read_cloud(args.truth)
        print(f"CD {metrics.chamfer(pred, truth):.6f}")
        return 0
    if args.pred_maps and args.truth_maps:
        pred_paths = sorted(os.listdir(args.pred_maps))
        values = []
        near = far = None
        for name in pred_paths:
            if not name.endswith(".pgm"):
                continue
            pmap, near, far = ds.read_depth_pgm(os.path.join(args.pred_maps, name))
            tmap, _, _ = ds.read_depth_pgm(os.path.join(args.truth_maps, name))
            values.append(metrics.avg_l1(pmap, tmap, near, far))
        if not values:
            raise CliError("INPUT", "no .pgm files to compare")
        print(f"AvgL1 {float(np.mean(values)):.6f}")
        return 0
    raise CliError("USAGE", "provide --pred/--truth clouds or --pred-maps/--truth-maps dirs")


def cmd_perturb(args) -> int:
    rig = _load_rig(args)
    cloud = ds.read_cloud(args.cloud)
    params = ds.PerturbParams(eta=args.eta, mu=args.mu, occlusion_fraction=args.occ)
    seed = args.seed if args.seed is not None else 0
    perturbed = ds.perturb_cloud(cloud, params, seed, rig.far - rig.near)
    ds.write_cloud(_resolve_out(args, "perturbed.xyz"), perturbed)
    return 0


def _add_common(p: argparse.ArgumentParser, rig: bool = True) -> None:
    p.add_argument("--config", help="pipeline config file with path/seed fallbacks")
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    p.add_argument("--threads", type=int, default=1, help="torch thread count")
    p.add_argument("--verbose", action="store_true")
    if rig:
        p.add_argument("--rig", help="rig config file (default: built-in 256px 8-view rig)")


def _add_fuse_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=int, default=7, help="vote threshold")
    p.add_argument("--depth-tol", type=float, default=None, dest="depth_tol")
    p.add_argument("--radius", type=float, default=0.006)
    p.add_argument("--min-neighbors", type=int, default=6, dest="min_neighbors")
    p.add_argument("--reject-occluded", action="store_true", dest="reject_occluded")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mvdc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate partial/truth depth-map samples")
    p.add_argument("--manifest", required=True, help="lines: <shape_id> <cloud_path> <split>")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("render", help="render a cloud into V depth maps")
    p.add_argument("--cloud", required=True)
    p.add_argument("--out")
    p.add_argument("--prefix", default="view_")
    _add_common(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("backproject", help="back-project depth maps to a cloud")
    p.add_argument("--maps", nargs="+", required=True, help="pgm files or one directory")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_backproject)

    p = sub.add_parser("fuse", help="back-project with voting and outlier removal")
    p.add_argument("--maps", nargs="+", required=True)
    p.add_argument("--out")
    _add_fuse_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("train", help="train the completion network")
    p.add_argument("--dataset")
    p.add_argument("--train-config", dest="train_config", help="training config file")
    p.add_argument("--out", help="checkpoint path")
    p.add_argument("--log", help="loss CSV path")
    p.add_argument("--split", default="train")
    _add_common(p, rig=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("complete", help="complete a partial cloud with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cloud", required=True)
    p.add_argument("--out")
    p.add_argument("--emit-views", dest="emit_views", help="dump input/completed maps here")
    _add_fuse_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("eval", help="Chamfer distance between clouds or avg L1 between maps")
    p.add_argument("--pred")
    p.add_argument("--truth")
    p.add_argument("--pred-maps", dest="pred_maps")
    p.add_argument("--truth-maps", dest="truth_maps")
    _add_common(p, rig=False)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("perturb", help="noise/subsample/occlude a cloud")
    p.add_argument("--cloud", required=True)
    p.add_argument("--out")
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--occ", type=float, default=0.0)
    _add_common(p)
    p.set_defaults(func=cmd_perturb)

    return parser


_ERROR_CODES = {
    ParseError: "PARSE",
    TrainingDiverged: "DIVERGED",
    FileNotFoundError: "IO",
    PermissionError: "IO",
    IsADirectoryError: "IO",
    ValueError: "INVALID",
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_pipeline_config(args)
        return args.func(args)
    except CliError as exc:
        print(f"ERROR {exc.code}: {exc}", file=sys.stderr)
        return 2
    except tuple(_ERROR_CODES) as exc:
        for klass in type(exc).__mro__:
            if klass in _ERROR_CODES:
                print(f"ERROR {_ERROR_CODES[klass]}: {exc}", file=sys.stderr)
                break
        return 1
    except OSError as exc:
        print(f"ERROR IO: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

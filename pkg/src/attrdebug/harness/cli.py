"""Command-line entry point.

Subcommands: gen-data, train, inject, attribute, evaluate, battery,
export. Every command reads the config file given by --config; selected
flags override config values (flags > ATTRDEBUG_OUTPUT_DIR env var >
config). Exit codes: 0 success, 1 one-line runtime error on stderr, 2
usage error.
"""

import argparse
import json
import os
import sys

import numpy as np

from .. import metrics as M
from ..bugs import Pipeline, inject
from ..datagen import save_dataset
from ..nn import save as save_model
from ..nn import serialize, train
from .battery import _derived, _resolve_datasets, _row_pipeline, _train_network, run_battery
from .config import battery_config_from_dict, load_config_file
from .heatmap import PALETTES, export_heatmap


def _build_parser():
    parser = argparse.ArgumentParser(prog="attrdebug", description="attribution debugging battery")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_common(p):
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--seed", type=int, default=None, help="override battery.seed")
        p.add_argument("--output-dir", default=None, help="override output directory")
        return p

    with_common(sub.add_parser("gen-data", help="generate and cache the configured datasets"))
    with_common(sub.add_parser("train", help="train the clean model and save it"))

    p = with_common(sub.add_parser("inject", help="apply one configured bug and save the changed artifact"))
    p.add_argument("--bug", required=True, help="bug name from the config")

    p = with_common(sub.add_parser("attribute", help="compute one attribution map"))
    p.add_argument("--method", required=True)
    p.add_argument("--input-index", type=int, default=0)
    p.add_argument("--steps", type=int, default=None, help="override interpolation steps")
    p.add_argument("--samples", type=int, default=None, help="override sample count")
    p.add_argument("--segments", type=int, default=None, help="override segment count")

    p = sub.add_parser("evaluate", help="compare two saved maps")
    p.add_argument("--map-a", required=True)
    p.add_argument("--map-b", required=True)
    p.add_argument("--metric", choices=["ssim", "spearman", "norm_diff"], default="ssim")
    p.add_argument("--use-abs", action="store_true")

    with_common(sub.add_parser("battery", help="run the full battery"))

    p = sub.add_parser("export", help="render a saved map as PGM/PPM")
    p.add_argument("--map", required=True, help=".npy attribution values")
    p.add_argument("--output", required=True)
    p.add_argument("--palette", choices=list(PALETTES), default="grayscale")
    return parser


def _load_cfg(args):
    raw = load_config_file(args.config)
    overrides = {"seed": getattr(args, "seed", None), "output_dir": getattr(args, "output_dir", None)}
    return battery_config_from_dict(raw, overrides)


def _cmd_gen_data(args):
    cfg = _load_cfg(args)
    os.makedirs(cfg.output_dir, exist_ok=True)
    for split, ds in _resolve_datasets(cfg).items():
        path = os.path.join(cfg.output_dir, f"{split}.adds")
        save_dataset(ds, path)
        print(f"wrote {path} ({len(ds)} examples)")
    return 0


def _cmd_train(args):
    cfg = _load_cfg(args)
    os.makedirs(cfg.output_dir, exist_ok=True)
    datasets = _resolve_datasets(cfg)
    net, report = _train_network(cfg, datasets)
    model_path = os.path.join(cfg.output_dir, "model.adnn")
    save_model(net, model_path)
    with open(os.path.join(cfg.output_dir, "train_report.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "loss_curve": report.loss_curve,
                "train_accuracy": report.train_accuracy,
                "val_accuracy": report.val_accuracy,
                "test_accuracy": report.test_accuracy,
            },
            fh,
            sort_keys=True,
            indent=2,
        )
        fh.write("\n")
    print(f"wrote {model_path} (test accuracy {report.test_accuracy:.3f})")
    return 0


def _cmd_inject(args):
    cfg = _load_cfg(args)
    spec = dict(cfg.bugs).get(args.bug)
    if spec is None:
        raise ValueError(f"no bug named {args.bug!r} in config (have: {sorted(dict(cfg.bugs))})")
    os.makedirs(cfg.output_dir, exist_ok=True)
    datasets = _resolve_datasets(cfg)
    clean_net, _ = _train_network(cfg, datasets)
    pipeline, _ = _row_pipeline(cfg, datasets, clean_net, args.bug, spec)
    wrote = []
    if spec.category == "data":
        path = os.path.join(cfg.output_dir, f"train_{args.bug}.adds")
        save_dataset(pipeline.train_data, path)
        wrote.append(path)
    if serialize(pipeline.net) != serialize(clean_net):
        path = os.path.join(cfg.output_dir, f"model_{args.bug}.adnn")
        save_model(pipeline.net, path)
        wrote.append(path)
    if pipeline.test_transform:
        path = os.path.join(cfg.output_dir, f"test_transform_{args.bug}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"transform": pipeline.test_transform}, fh)
            fh.write("\n")
        wrote.append(path)
    for path in wrote:
        print(f"wrote {path}")
    return 0


def _cmd_attribute(args):
    cfg = _load_cfg(args)
    spec = next((m for m in cfg.methods if m.method == args.method), None)
    if spec is None:
        from ..attributions import MethodSpec

        spec = MethodSpec(args.method)
    if args.steps is not None and "steps" in spec.params:
        spec.params["steps"] = args.steps
    if args.samples is not None:
        for key in ("num_samples", "n_samples"):
            if key in spec.params:
                spec.params[key] = args.samples
    if args.segments is not None and "segments" in spec.params:
        spec.params["segments"] = args.segments

    os.makedirs(cfg.output_dir, exist_ok=True)
    datasets = _resolve_datasets(cfg)
    net, _ = _train_network(cfg, datasets)
    test = datasets["test"]
    if not 0 <= args.input_index < len(test):
        raise ValueError(f"input index {args.input_index} out of range [0, {len(test)})")
    x = test.images_array()[args.input_index]
    cls = int(net.forward(x).score_vector.argmax())
    from ..attributions import compute_attribution

    amap = compute_attribution(spec, net, x, cls, baselines=datasets["train"].images_array())
    base = os.path.join(cfg.output_dir, f"map_{args.method}_{args.input_index}")
    np.save(base + ".npy", amap.values)
    export_heatmap(M.normalize(amap.values), base + ".pgm", "grayscale")
    print(f"wrote {base}.npy and {base}.pgm (class {cls}, params {spec.params})")
    return 0


def _cmd_evaluate(args):
    a = np.load(args.map_a)
    b = np.load(args.map_b)
    if a.shape != b.shape:
        raise ValueError(f"map shapes differ: {a.shape} vs {b.shape}")
    if args.metric == "ssim":
        value = M.ssim(M.normalize(a), M.normalize(b))
    elif args.metric == "spearman":
        value = M.spearman(a, b, use_abs=args.use_abs)
    else:
        value = M.norm_diff(a, b)
    print(f"{args.metric} = {value}")
    return 0


def _cmd_battery(args):
    cfg = _load_cfg(args)
    report = run_battery(cfg)
    n_cells = sum(len(m) for row in report["cells"].values() for m in row.values())
    print(f"wrote {os.path.join(cfg.output_dir, 'report.json')} ({n_cells} cells)")
    return 0


def _cmd_export(args):
    values = np.load(args.map)
    export_heatmap(M.normalize(values), args.output, args.palette)
    print(f"wrote {args.output}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "inject": _cmd_inject,
    "attribute": _cmd_attribute,
    "evaluate": _cmd_evaluate,
    "battery": _cmd_battery,
    "export": _cmd_export,
}


def cli_dispatch(argv) -> int:
    """Parse argv (without the program name) and run; returns exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # noqa: BLE001 - single-line machine-parseable contract
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()

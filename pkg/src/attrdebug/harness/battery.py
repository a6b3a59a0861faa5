"""Full test battery: train, inject, attribute, score, aggregate.

One battery run trains the clean model, realizes every configured bug in
its own pipeline (retraining when the bug touches training), computes
every method's attribution maps on the evaluation inputs, and scores
each (row, method, metric) cell. Rows are the clean baseline plus one
row per bug. Failures are recorded per cell and never abort the run.

Metric ids:
    ssim_gt1            SSIM against the background ground-truth mask
    ssim_gt2            SSIM against GT-1 weighted by the same method's
                        attribution of the object-free background
    ssim_vs_clean       SSIM between the row's map and the reference map
    spearman_vs_clean   rank correlation against the reference map
    norm_diff_vs_clean  normalized 2-norm difference vs the reference

For data/model bugs the reference maps come from the clean model on the
clean inputs; for preprocess bugs from the clean model on untransformed
inputs; for the ood bug from an in-domain model trained on the
replacement dataset. Ground-truth metrics target the example's label;
vs-clean comparisons share the reference model's predicted class.
"""

import csv
import json
import os

import numpy as np

from .. import metrics as M
from ..attributions import compute_attribution
from ..bugs import BugSpec, Pipeline, adapt_channels, apply_test_transform, cascading_randomization, inject
from ..datagen import background_image, gen_shapes, gt1_mask, load_idx
from ..nn import accuracy, build_network, train
from .config import BatteryConfig
from .heatmap import export_heatmap

REPORT_VERSION = 1

VS_CLEAN_METRICS = ("ssim_vs_clean", "spearman_vs_clean", "norm_diff_vs_clean")
GT_METRICS = ("ssim_gt1", "ssim_gt2")
KNOWN_METRICS = GT_METRICS + VS_CLEAN_METRICS


def _derived(seed, k):
    return int(np.random.SeedSequence([int(seed), int(k)]).generate_state(1)[0] & 0x7FFFFFFF)


def _resolve_datasets(cfg: BatteryConfig):
    d = cfg.dataset
    kind = d["kind"]
    if kind == "shapes":
        sizes = {"train": int(d.get("n_train", 400)), "val": int(d.get("n_val", 80)), "test": int(d.get("n_test", 200))}
        return {
            split: gen_shapes(
                _derived(cfg.seed, i),
                sizes[split],
                int(d.get("classes", 2)),
                int(d.get("image_size", 28)),
                int(d.get("channels", 3)),
                split,
            )
            for i, split in enumerate(("train", "val", "test"))
        }
    if kind == "idx":
        channels = int(d.get("channels", 1))
        train_ds = load_idx(d["train_images"], d["train_labels"], channels, "train")
        test_ds = load_idx(d["test_images"], d["test_labels"], channels, "test", class_count=train_ds.class_count)
        return {"train": train_ds, "val": test_ds, "test": test_ds}
    raise ValueError(f"unknown dataset kind {kind!r}")


def _train_network(cfg: BatteryConfig, datasets):
    net = build_network(cfg.architecture, datasets["train"].image_shape, datasets["train"].class_count, _derived(cfg.seed, 10))
    report = train(net, datasets["train"], cfg.train, val_data=datasets["val"], test_data=datasets["test"])
    return net, report


def _row_pipeline(cfg, datasets, clean_net, name, spec):
    pipeline = Pipeline(
        train_data=datasets["train"],
        val_data=datasets["val"],
        test_data=datasets["test"],
        net=clean_net,
        train_cfg=cfg.train,
    )
    if spec is None:
        return pipeline, None
    if spec.kind == "ood":
        ood_cfg = BatteryConfig(seed=_derived(cfg.seed, 20), dataset=dict(spec.params.get("dataset", {})), architecture=cfg.architecture, train=cfg.train)
        ood_sets = _resolve_datasets(ood_cfg)
        pipeline.ood_data = ood_sets["test"]
        pipeline = inject(spec, pipeline)
        in_domain_net, _ = _train_network(ood_cfg, ood_sets)
        return pipeline, in_domain_net
    pipeline = inject(spec, pipeline)
    if pipeline.needs_retraining():
        net = build_network(cfg.architecture, pipeline.train_data.image_shape, pipeline.train_data.class_count, _derived(cfg.seed, 10))
        train(net, pipeline.train_data, pipeline.train_cfg)
        pipeline.net = net
    return pipeline, None


def _eval_images(pipeline, cfg, target_channels):
    ds = pipeline.test_data
    count = min(cfg.sample_count, len(ds))
    images = adapt_channels(ds.images_array()[:count], target_channels)
    return ds, apply_test_transform(pipeline.test_transform, images), count


def _maps_for(net, images, classes, spec, baselines):
    return [compute_attribution(spec, net, x, int(c), baselines=baselines) for x, c in zip(images, classes)]


def _score_cell(metric, row_maps, ref_maps, eval_ds, bg_maps, count):
    scores = []
    for i in range(count):
        if metric == "ssim_gt1":
            scores.append(M.ssim(M.normalize(row_maps[i].values), M.NormalizedMap(gt1_mask(eval_ds.examples[i]))))
        elif metric == "ssim_gt2":
            gt2 = M.gt2_mask(gt1_mask(eval_ds.examples[i]), M.normalize(bg_maps[i].values))
            scores.append(M.ssim(M.normalize(row_maps[i].values), gt2))
        elif metric == "ssim_vs_clean":
            scores.append(M.ssim(M.normalize(row_maps[i].values), M.normalize(ref_maps[i].values)))
        elif metric == "spearman_vs_clean":
            rho = M.spearman(row_maps[i].values, ref_maps[i].values, use_abs=False)
            if rho is not None:
                scores.append(rho)
        elif metric == "norm_diff_vs_clean":
            scores.append(M.norm_diff(ref_maps[i].values, row_maps[i].values))
        else:
            raise ValueError(f"unknown metric {metric!r}")
    summary = M.summarize(metric, scores)
    return {"mean": summary.mean, "sem": summary.sem, "n": summary.n}


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, frozenset):
        return sorted(obj)
    return obj


def run_battery(cfg: BatteryConfig) -> dict:
    """Execute the configured battery; returns the report dict.

    Writes report.json, scores.csv, and (optionally) per-cell heatmaps
    into cfg.output_dir. The report is a pure function of the config.
    """
    os.makedirs(cfg.output_dir, exist_ok=True)
    datasets = _resolve_datasets(cfg)
    clean_net, clean_train_report = _train_network(cfg, datasets)
    channels = clean_net.input_shape[-1]

    rows = [("clean", None)] + list(cfg.bugs)
    accuracy_records = {}
    cells = {}
    stage_curves = {}
    manifest = []

    # clean-row maps double as the reference for data/model/preprocess bugs
    clean_ds, clean_images, clean_count = _eval_images(
        Pipeline(datasets["train"], datasets["val"], datasets["test"], clean_net, cfg.train), cfg, channels
    )
    clean_classes = clean_net.forward_batch(clean_images).scores.argmax(axis=1)
    clean_baselines = datasets["train"].images_array()
    clean_maps = {}

    for name, spec in rows:
        row_cells = {}
        try:
            pipeline, in_domain_net = _row_pipeline(cfg, datasets, clean_net, name, spec)
            row_net = pipeline.net
            eval_ds, images, count = _eval_images(pipeline, cfg, channels)
            baselines = pipeline.train_data.images_array()
            accuracy_records[name] = {
                "train": accuracy(row_net, pipeline.train_data.images_array(), pipeline.train_data.labels_array()),
                "test": accuracy(row_net, images, eval_ds.labels_array()[:count]),
            }
            if name == "clean":
                accuracy_records[name]["val"] = clean_train_report.val_accuracy
                accuracy_records[name]["loss_curve"] = clean_train_report.loss_curve

            ref_net = in_domain_net if in_domain_net is not None else clean_net
            ref_images = images if in_domain_net is not None else clean_images
            ref_count = min(count, clean_count) if in_domain_net is None else count
            if in_domain_net is not None:
                target_classes = in_domain_net.forward_batch(adapt_channels(images, in_domain_net.input_shape[-1])).scores.argmax(axis=1)
            else:
                target_classes = clean_classes
        except Exception as exc:  # noqa: BLE001 - row setup failed, fail all its cells
            cells[name] = {
                m.method: {metric: {"failed": f"{type(exc).__name__}: {exc}"} for metric in cfg.metrics}
                for m in cfg.methods
            }
            continue

        for mspec in cfg.methods:
            mid = mspec.method
            row_cells[mid] = {}
            try:
                row_maps = _maps_for(row_net, images, target_classes[:count], mspec, baselines)
                if name == "clean":
                    clean_maps[mid] = row_maps
                if in_domain_net is not None:
                    ref_maps = _maps_for(
                        in_domain_net,
                        adapt_channels(ref_images, in_domain_net.input_shape[-1]),
                        target_classes[:count],
                        mspec,
                        baselines,
                    )
                else:
                    ref_maps = clean_maps.get(mid)
                bg_maps = None
                if "ssim_gt2" in cfg.metrics:
                    try:
                        backgrounds = np.stack([background_image(eval_ds, i) for i in range(ref_count)])
                        bg_maps = _maps_for(row_net, adapt_channels(backgrounds, channels), target_classes[:ref_count], mspec, baselines)
                    except ValueError:
                        bg_maps = None  # per-cell failure surfaces below
            except Exception as exc:  # noqa: BLE001
                for metric in cfg.metrics:
                    row_cells[mid][metric] = {"failed": f"{type(exc).__name__}: {exc}"}
                continue

            for metric in cfg.metrics:
                try:
                    if metric in VS_CLEAN_METRICS and ref_maps is None:
                        raise ValueError("no reference maps for this row")
                    if metric == "ssim_gt2" and bg_maps is None:
                        raise ValueError("no background render available for this dataset")
                    row_cells[mid][metric] = _score_cell(metric, row_maps, ref_maps, eval_ds, bg_maps, ref_count)
                except Exception as exc:  # noqa: BLE001
                    row_cells[mid][metric] = {"failed": f"{type(exc).__name__}: {exc}"}

            if cfg.export_heatmaps and row_maps:
                hm_dir = os.path.join(cfg.output_dir, "heatmaps")
                os.makedirs(hm_dir, exist_ok=True)
                norm = M.normalize(row_maps[0].values)
                for palette, ext in (("grayscale", "pgm"), ("white-red", "ppm")):
                    rel = os.path.join("heatmaps", f"{name}__{mid}.{ext}")
                    export_heatmap(norm, os.path.join(cfg.output_dir, rel), palette)
                    manifest.append(rel)

        cells[name] = row_cells

        if spec is not None and spec.kind == "reinit" and spec.params.get("cascade"):
            stage_curves[name] = _cascade_curves(clean_net, images, cfg, spec, baselines)

    report = {
        "format_version": REPORT_VERSION,
        "config": cfg.echo(),
        "accuracy": accuracy_records,
        "cells": cells,
        "stage_curves": stage_curves,
        "manifest": sorted(manifest) + ["report.json", "scores.csv"],
    }
    report = _jsonify(report)
    _write_report_files(report, cfg.output_dir)
    return report


def _cascade_curves(clean_net, images, cfg, spec, baselines):
    table = cascading_randomization(
        clean_net, images, cfg.methods, spec.seed, baselines=baselines
    )
    curves = {}
    stage0 = table[0]
    for mspec in cfg.methods:
        mid = mspec.method
        ssim_curve, rank_curve = [], []
        for stage in sorted(table):
            pairs = zip(table[stage][mid], stage0[mid])
            ssim_vals, rank_vals = [], []
            for bug_map, base_map in pairs:
                ssim_vals.append(M.ssim(M.normalize(bug_map.values), M.normalize(base_map.values)))
                rho = M.spearman(bug_map.values, base_map.values)
                rank_vals.append(0.0 if rho is None else rho)
            ssim_curve.append(float(np.mean(ssim_vals)))
            rank_curve.append(float(np.mean(rank_vals)))
        curves[mid] = {"ssim": ssim_curve, "spearman": rank_curve}
    return curves


def _write_report_files(report, output_dir):
    with open(os.path.join(output_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(os.path.join(output_dir, "scores.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bug", "method", "metric", "mean", "sem", "n"])
        for bug in sorted(report["cells"]):
            for method in sorted(report["cells"][bug]):
                for metric in sorted(report["cells"][bug][method]):
                    cell = report["cells"][bug][method][metric]
                    if "failed" in cell:
                        writer.writerow([bug, method, metric, "failed", "", ""])
                    else:
                        writer.writerow([bug, method, metric, repr(cell["mean"]), repr(cell["sem"]), cell["n"]])

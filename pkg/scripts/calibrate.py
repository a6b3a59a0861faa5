#!/usr/bin/env python3
"""Calibration run for the empirical acceptance thresholds.

Trains the fixture models once, measures every quantity the acceptance
suite asserts, and prints them. Run from the repo root:

    python scripts/calibrate.py [--quick]

The SSIM-GT2 per-method means from the reference battery are written to
tests/golden/spurious_shapes_ssim_gt2.json (the committed golden file).
"""

import argparse
import json
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))

from attrdebug.bugs import cascading_randomization, ood_pairing
from attrdebug.datagen import (
    SpuriousSpec,
    compose_spurious,
    flip_labels,
    gen_shapes,
    load_idx,
    strip_objects,
    write_idx,
)
from attrdebug.harness import battery_config_from_dict, load_config_file, run_battery
from attrdebug.metrics import normalize, spearman, ssim
from attrdebug.nn import TrainConfig, accuracy, build_network, train
from attrdebug.attributions import MethodSpec, compute_attribution

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.normpath(os.path.join(HERE, ".."))

TRAIN_CFG = TrainConfig(learning_rate=0.001, epochs=20, batch_size=32, seed=101)

CHEAP_SPECS = [
    MethodSpec("grad"),
    MethodSpec("smoothgrad", {"n_samples": 25}),
    MethodSpec("smoothgrad_sq", {"n_samples": 25}),
    MethodSpec("vargrad", {"n_samples": 25}),
    MethodSpec("input_x_grad"),
    MethodSpec("intgrad", {"steps": 32}),
    MethodSpec("expected_grad", {"steps": 8, "baseline_count": 8}),
    MethodSpec("gbp"),
    MethodSpec("deconvnet"),
    MethodSpec("lrp_eps"),
    MethodSpec("lrp_ab"),
    MethodSpec("lrp_flat"),
]
SURROGATE_SPECS = [
    MethodSpec("lime", {"segments": 49, "num_samples": 600}),
    MethodSpec("kernel_shap", {"segments": 49, "num_samples": 600}),
]


def timed(label, fn, *args, **kwargs):
    t0 = time.time()
    out = fn(*args, **kwargs)
    print(f"  [{label}: {time.time() - t0:.1f}s]")
    return out


def make_shapes(classes=2, seed_base=201, n_train=600, n_val=100, n_test=200):
    return {
        "train": gen_shapes(seed_base, n_train, classes, 28, 3, "train"),
        "val": gen_shapes(seed_base + 1, n_val, classes, 28, 3, "val"),
        "test": gen_shapes(seed_base + 2, n_test, classes, 28, 3, "test"),
    }


def fit(arch, splits, seed, cfg=TRAIN_CFG):
    net = build_network(arch, splits["train"].image_shape, splits["train"].class_count, seed)
    report = train(net, splits["train"], cfg, val_data=splits.get("val"), test_data=splits.get("test"))
    return net, report


def mean_metric_between(maps_a, maps_b, use_abs=False):
    ssims, rhos = [], []
    for a, b in zip(maps_a, maps_b):
        ssims.append(ssim(normalize(a.values), normalize(b.values)))
        rho = spearman(a.values, b.values, use_abs=use_abs)
        rhos.append(0.0 if rho is None else rho)
    return float(np.mean(ssims)), float(np.mean(rhos))


def maps_for(net, images, classes, specs, baselines):
    return {
        spec.method: [compute_attribution(spec, net, x, int(c), baselines=baselines) for x, c in zip(images, classes)]
        for spec in specs
    }


def calibrate_mislabel(splits, clean_net, n_inputs, specs):
    print("\n== mislabeled-example experiment (clean vs flipped model SSIM) ==")
    flipped = flip_labels(splits["train"], 0.1, seed=301)
    flipped_net, rep = fit("bvd_small", {"train": flipped, "val": splits["val"], "test": splits["test"]}, seed=_seed_of(clean_net))
    print(f"  flipped-model acc: train {rep.train_accuracy:.3f} val {rep.val_accuracy:.3f} test {rep.test_accuracy:.3f}")
    images = splits["train"].images_array()[:n_inputs]
    classes = clean_net.forward_batch(images).scores.argmax(axis=1)
    baselines = splits["train"].images_array()
    a = maps_for(clean_net, images, classes, specs, baselines)
    b = maps_for(flipped_net, images, classes, specs, baselines)
    for spec in specs:
        s, _ = mean_metric_between(a[spec.method], b[spec.method])
        print(f"  {spec.method:15s} ssim(clean, flipped) = {s:.3f}")
    return flipped_net


def _seed_of(net):
    return net.seed


def calibrate_cascade(splits, net, n_inputs, label):
    print(f"\n== cascading randomization ({label}) ==")
    images = splits["test"].images_array()[:n_inputs]
    specs = [MethodSpec(m) for m in ("grad", "intgrad", "gbp", "deconvnet", "lrp_ab", "lrp_flat")]
    specs[1] = MethodSpec("intgrad", {"steps": 32})
    n_param = len(net.parameterized_indices)
    table = cascading_randomization(net, images, specs, seed=401, stages=range(0, n_param + 1))
    for spec in specs:
        line = [f"{spec.method:10s}"]
        for stage in range(1, n_param + 1):
            s, rho = mean_metric_between(table[0][spec.method], table[stage][spec.method])
            line.append(f"k={stage}: S{s:.2f}/r{rho:+.2f}")
        print("  " + "  ".join(line))
    return table


def calibrate_ood(splits, clean_net, n_inputs, tmpdir):
    print("\n== out-of-domain pairing (shapes inputs; digits-trained net) ==")
    digits = {
        "train": gen_shapes(501, 600, 2, 28, 1, "train", shape_offset=2),
        "val": gen_shapes(502, 80, 2, 28, 1, "val", shape_offset=2),
        "test": gen_shapes(503, 100, 2, 28, 1, "test", shape_offset=2),
    }
    # push the grayscale set through the IDX container, replicated to 3 channels
    os.makedirs(tmpdir, exist_ok=True)
    imgs = np.round(digits["train"].images_array()[:, :, :, 0] * 255).astype(np.uint8)
    labs = digits["train"].labels_array().astype(np.uint8)
    write_idx(imgs, labs, f"{tmpdir}/digits_img.idx", f"{tmpdir}/digits_lab.idx")
    digits_train = load_idx(f"{tmpdir}/digits_img.idx", f"{tmpdir}/digits_lab.idx", channels=3)
    digits_net, rep = fit("bvd_small", {"train": digits_train}, seed=601)
    print(f"  digits-model train acc {rep.train_accuracy:.3f}")

    specs = [
        MethodSpec("grad"),
        MethodSpec("smoothgrad", {"n_samples": 25}),
        MethodSpec("input_x_grad"),
        MethodSpec("intgrad", {"steps": 32}),
        MethodSpec("expected_grad", {"steps": 8, "baseline_count": 8}),
        MethodSpec("vargrad", {"n_samples": 25}),
        MethodSpec("gbp"),
        MethodSpec("lrp_ab"),
    ]
    table = ood_pairing(clean_net, [digits_net], splits["test"], specs, sample_count=n_inputs,
                        baselines=splits["train"].images_array()[:8])
    for spec in specs:
        s, rho = mean_metric_between(table["in_domain"][spec.method], table["out_domain_0"][spec.method])
        _, rho_abs = mean_metric_between(table["in_domain"][spec.method], table["out_domain_0"][spec.method], use_abs=True)
        print(f"  {spec.method:15s} ssim {s:.3f}  |rho| {abs(rho):.3f}  |rho_abs| {abs(rho_abs):.3f}")
    return digits_net


def calibrate_spurious(tmpdir):
    print("\n== reference battery (spurious shapes) ==")
    raw = load_config_file(os.path.join(ROOT, "configs", "spurious_shapes.toml"))
    cfg = battery_config_from_dict(raw, {"output_dir": f"{tmpdir}/battery"})
    t0 = time.time()
    report = run_battery(cfg)
    print(f"  battery runtime: {time.time() - t0:.1f}s")
    golden = {}
    for method, cells in sorted(report["cells"]["spurious"].items()):
        cell = cells.get("ssim_gt2", {})
        if "failed" in cell:
            print(f"  {method:15s} ssim_gt2 FAILED: {cell['failed']}")
        else:
            golden[method] = round(cell["mean"], 6)
            print(f"  {method:15s} ssim_gt2 {cell['mean']:.3f} (sem {cell['sem']:.3f})  gt1 {cells['ssim_gt1']['mean']:.3f}")
    print(f"  accuracy records: {report['accuracy']}")
    return golden


def calibrate_background_accuracy(splits, seed):
    print("\n== spurious model: background-only accuracy ==")
    spur = {
        "train": compose_spurious(splits["train"], SpuriousSpec(fraction=1.0, seed=701)),
        "val": compose_spurious(splits["val"], SpuriousSpec(fraction=1.0, seed=702)),
        "test": compose_spurious(splits["test"], SpuriousSpec(fraction=1.0, seed=703)),
    }
    net, rep = fit("bvd_small", spur, seed=seed)
    stripped = strip_objects(spur["test"])
    bg_acc = accuracy(net, stripped.images_array(), stripped.labels_array())
    print(f"  spurious test acc {rep.test_accuracy:.3f}; background-only acc {bg_acc:.3f}")
    return net, spur, bg_acc


def calibrate_noise_ssim(spur_net, spur):
    print("\n== gaussian-noise calibration SSIM ==")
    images = spur["test"].images_array()[:16]
    classes = spur_net.forward_batch(images).scores.argmax(axis=1)
    rng = np.random.default_rng(801)
    vals = []
    for spec in (MethodSpec("grad"), MethodSpec("smoothgrad", {"n_samples": 25}), MethodSpec("lrp_eps")):
        for x, c in zip(images, classes):
            amap = compute_attribution(spec, spur_net, x, int(c))
            noise = normalize(rng.normal(size=x.shape))
            vals.append(ssim(noise, normalize(amap.values)))
    print(f"  mean ssim(noise, attribution) = {np.mean(vals):.2e} (max |.| {np.max(np.abs(vals)):.2e})")
    return float(np.mean(vals))


def calibrate_preprocess(clean_net, splits):
    print("\n== preprocess mismatch accuracy drop ==")
    images = splits["test"].images_array()
    labels = splits["test"].labels_array()
    clean_acc = accuracy(clean_net, images, labels)
    for tid in ("scale_255", "channel_swap", "standardize"):
        from attrdebug.bugs import apply_test_transform

        acc = accuracy(clean_net, apply_test_transform(tid, images), labels)
        print(f"  {tid:15s} acc {acc:.3f} (clean {clean_acc:.3f}, drop {100 * (clean_acc - acc):.1f} pts)")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="skip the battery and surrogates")
    parser.add_argument("--tmpdir", default="/tmp/attrdebug_calibration")
    args = parser.parse_args()

    np.seterr(all="ignore")
    print("== fixtures ==")
    splits = make_shapes()
    clean_net, rep = timed("clean bvd_small", fit, "bvd_small", splits, seed=111)
    print(f"  clean acc: train {rep.train_accuracy:.3f} val {rep.val_accuracy:.3f} test {rep.test_accuracy:.3f}")

    splits4 = make_shapes(classes=4, seed_base=221, n_train=800)
    clean4_net, rep4 = timed("clean 4-class", fit, "bvd_small", splits4, seed=112)
    print(f"  4-class acc: train {rep4.train_accuracy:.3f} test {rep4.test_accuracy:.3f}")

    calibrate_preprocess(clean_net, splits)
    spur_net, spur, bg_acc = calibrate_background_accuracy(splits, seed=111)
    calibrate_noise_ssim(spur_net, spur)

    specs = list(CHEAP_SPECS) + ([] if args.quick else list(SURROGATE_SPECS))
    calibrate_mislabel(splits, clean_net, n_inputs=16, specs=specs)
    calibrate_cascade(splits, clean_net, 16, "2-class clean net")
    calibrate_cascade(splits4, clean4_net, 16, "4-class clean net")
    calibrate_ood(splits, clean_net, 24, args.tmpdir)

    if not args.quick:
        golden = calibrate_spurious(args.tmpdir)
        out = os.path.join(ROOT, "tests", "golden", "spurious_shapes_ssim_gt2.json")
        os.makedirs(os.path.dirname(out), exist_ok=True)
        with open(out, "w") as fh:
            json.dump(golden, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"\nwrote {out}")


if __name__ == "__main__":
    main()

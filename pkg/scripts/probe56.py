#!/usr/bin/env python3
"""Probe the 56x56 protocol for the cross-model similarity experiments."""

import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))

from attrdebug.attributions import MethodSpec, compute_attribution
from attrdebug.bugs import cascading_randomization, ood_pairing
from attrdebug.datagen import flip_labels, gen_shapes, load_idx, write_idx
from attrdebug.metrics import normalize, spearman, ssim
from attrdebug.nn import TrainConfig, build_network, train

SIZE = 56
RADIUS = (0.22, 0.38)
EPOCHS = int(sys.argv[1]) if len(sys.argv) > 1 else 12

def make(seed, n, split, channels=3, offset=0):
    return gen_shapes(seed, n, 2, SIZE, channels, split, shape_offset=offset, radius_range=RADIUS)

def fit(splits, seed, epochs=EPOCHS):
    cfg = TrainConfig(learning_rate=0.001, epochs=epochs, batch_size=32, seed=101)
    net = build_network("bvd_small", splits["train"].image_shape, 2, seed)
    rep = train(net, splits["train"], cfg, test_data=splits.get("test"))
    return net, rep

def mean_pair(maps_a, maps_b, use_abs=False):
    ssims, rhos = [], []
    for a, b in zip(maps_a, maps_b):
        ssims.append(ssim(normalize(a.values), normalize(b.values)))
        r = spearman(a.values, b.values, use_abs=use_abs)
        rhos.append(0.0 if r is None else r)
    return float(np.mean(ssims)), float(np.mean(rhos))

def maps_for(net, images, classes, specs, baselines=None):
    return {s.method: [compute_attribution(s, net, x, int(c), baselines=baselines)
                       for x, c in zip(images, classes)] for s in specs}

t0 = time.time()
splits = {"train": make(201, 600, "train"), "test": make(203, 120, "test")}
clean, rep = fit(splits, 111)
print(f"clean: train {rep.train_accuracy:.3f} test {rep.test_accuracy:.3f} loss {rep.loss_curve[-1]:.4f} ({time.time()-t0:.0f}s)")

flipped_ds = flip_labels(splits["train"], 0.1, seed=301)
flip_net, rep_f = fit({"train": flipped_ds, "test": splits["test"]}, 111)
print(f"flipped: train {rep_f.train_accuracy:.3f} test {rep_f.test_accuracy:.3f}")

specs = [
    MethodSpec("grad"), MethodSpec("smoothgrad"), MethodSpec("smoothgrad_sq"),
    MethodSpec("vargrad"), MethodSpec("input_x_grad"), MethodSpec("intgrad", {"steps": 32}),
    MethodSpec("expected_grad", {"steps": 8, "baseline_count": 8}),
    MethodSpec("gbp"), MethodSpec("deconvnet"), MethodSpec("lrp_z"), MethodSpec("lrp_eps"),
    MethodSpec("lrp_ab"), MethodSpec("lrp_flat"),
    MethodSpec("lime", {"segments": 49, "num_samples": 400}),
    MethodSpec("kernel_shap", {"segments": 49, "num_samples": 400}),
]
images = splits["train"].images_array()[:16]
classes = clean.forward_batch(images).scores.argmax(axis=1)
baselines = splits["train"].images_array()[:8]
t0 = time.time()
A = maps_for(clean, images, classes, specs, baselines)
B = maps_for(flip_net, images, classes, specs, baselines)
print(f"maps: {time.time()-t0:.0f}s")
print("\n== mislabel SSIM (clean vs flipped) ==")
for s in specs:
    v, _ = mean_pair(A[s.method], B[s.method])
    print(f"  {s.method:15s} {v:.3f}")

print("\n== cascade k=1 (top dense layer) ==")
cspecs = [MethodSpec("grad"), MethodSpec("intgrad", {"steps": 32}), MethodSpec("gbp"),
          MethodSpec("deconvnet"), MethodSpec("lrp_ab"), MethodSpec("lrp_flat")]
table = cascading_randomization(clean, splits["test"].images_array()[:16], cspecs, seed=401, stages=[0, 1])
for s in cspecs:
    v, rho = mean_pair(table[0][s.method], table[1][s.method])
    _, rho_abs = mean_pair(table[0][s.method], table[1][s.method], use_abs=True)
    print(f"  {s.method:12s} SSIM {v:.3f} rho {rho:+.3f} rho_abs {rho_abs:+.3f}")

print("\n== OOD (ring/triangle grayscale digits net) ==")
tmp = "/tmp/probe56"
os.makedirs(tmp, exist_ok=True)
dig = make(501, 600, "train", channels=1, offset=2)
imgs = np.round(dig.images_array()[:, :, :, 0] * 255).astype(np.uint8)
write_idx(imgs, dig.labels_array().astype(np.uint8), f"{tmp}/i.idx", f"{tmp}/l.idx")
dig3 = load_idx(f"{tmp}/i.idx", f"{tmp}/l.idx", channels=3)
dnet, drep = fit({"train": dig3}, 601)
print(f"digits train acc {drep.train_accuracy:.3f}")
ospecs = [MethodSpec("grad"), MethodSpec("smoothgrad"), MethodSpec("input_x_grad"),
          MethodSpec("intgrad", {"steps": 32}), MethodSpec("expected_grad", {"steps": 8, "baseline_count": 8}),
          MethodSpec("vargrad"), MethodSpec("gbp"), MethodSpec("lrp_ab"), MethodSpec("lrp_flat")]
table = ood_pairing(clean, [dnet], splits["test"], ospecs, sample_count=20, baselines=baselines)
for s in ospecs:
    v, rho = mean_pair(table["in_domain"][s.method], table["out_domain_0"][s.method])
    print(f"  {s.method:15s} SSIM {v:.3f} |rho| {abs(rho):.3f}")

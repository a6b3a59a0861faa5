from .maps import METHOD_DEFAULTS, METHOD_IDS, AttributionMap, MethodSpec, derive_seed
from .gradient_methods import (
    expected_gradients,
    grad,
    input_times_grad,
    integrated_gradients,
    smoothgrad_family,
)
from .surrogates import kernel_shap, lime, segment_grid
from .lrp import LRP_RULES, lrp, modified_backprop


def compute_attribution(spec: MethodSpec, net, x, class_index: int, baselines=None) -> AttributionMap:
    """Dispatch one MethodSpec to its implementation.

    `baselines` supplies the training-set sample that expected gradients
    averages over; other methods ignore it.
    """
    p = dict(spec.params)
    target = p.pop("target", "logit")
    m = spec.method
    if m == "grad":
        return grad(net, x, class_index, target=target)
    if m in ("smoothgrad", "smoothgrad_sq", "vargrad"):
        variant = {"smoothgrad": "mean", "smoothgrad_sq": "square", "vargrad": "variance"}[m]
        return smoothgrad_family(
            net, x, class_index, variant=variant,
            n_samples=p["n_samples"], sigma_fraction=p["sigma_fraction"], target=target,
        )
    if m == "input_x_grad":
        return input_times_grad(net, x, class_index, target=target)
    if m == "intgrad":
        return integrated_gradients(net, x, class_index, steps=p["steps"], target=target)
    if m == "expected_grad":
        if baselines is None:
            raise ValueError("expected_grad needs a baseline sample from the training set")
        take = min(int(p["baseline_count"]), len(baselines))
        return expected_gradients(net, x, class_index, baselines[:take], steps=p["steps"], target=target)
    if m == "lime":
        return lime(
            net, x, class_index, segments=p["segments"], num_samples=p["num_samples"],
            kernel_width=p["kernel_width"], ridge_lambda=p["ridge_lambda"], seed=p["seed"], target=target,
        )
    if m == "kernel_shap":
        return kernel_shap(
            net, x, class_index, segments=p["segments"], num_samples=p["num_samples"],
            seed=p["seed"], target=target,
        )
    if m in ("gbp", "deconvnet"):
        return modified_backprop(net, x, class_index, rule=m, target=target)
    if m == "lrp_z":
        return lrp(net, x, class_index, rule="z")
    if m == "lrp_eps":
        return lrp(net, x, class_index, rule="eps", eps=p["eps"])
    if m == "lrp_ab":
        return lrp(net, x, class_index, rule="alphabeta", alpha=p["alpha"], beta=p["beta"])
    if m == "lrp_flat":
        return lrp(net, x, class_index, rule="composite_flat", eps=p["eps"])
    raise ValueError(f"unhandled method {m!r}")


__all__ = [
    "AttributionMap",
    "LRP_RULES",
    "METHOD_DEFAULTS",
    "METHOD_IDS",
    "MethodSpec",
    "compute_attribution",
    "derive_seed",
    "expected_gradients",
    "grad",
    "input_times_grad",
    "integrated_gradients",
    "kernel_shap",
    "lime",
    "lrp",
    "modified_backprop",
    "segment_grid",
    "smoothgrad_family",
]

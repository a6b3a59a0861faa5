"""attrdebug: score feature-attribution methods against injected model bugs.

The package trains small sequential networks, injects data / model /
test-time contamination, computes a battery of attribution maps, and
quantifies how visibly each method exposes each bug.
"""

from . import attributions, bugs, datagen, harness, metrics, nn
from .attributions import AttributionMap, MethodSpec, compute_attribution
from .bugs import BugSpec, Pipeline, cascading_randomization, inject, ood_pairing
from .harness import BatteryConfig, run_battery
from .metrics import NormalizedMap, ScoreSummary, gt2_mask, norm_diff, normalize, spearman, ssim, summarize
from .nn import Network, TrainConfig, build_network, reinit_layers, train

__version__ = "0.1.0"

__all__ = [
    "AttributionMap",
    "BatteryConfig",
    "BugSpec",
    "MethodSpec",
    "Network",
    "NormalizedMap",
    "Pipeline",
    "ScoreSummary",
    "TrainConfig",
    "attributions",
    "bugs",
    "build_network",
    "cascading_randomization",
    "compute_attribution",
    "datagen",
    "gt2_mask",
    "harness",
    "inject",
    "metrics",
    "nn",
    "norm_diff",
    "normalize",
    "ood_pairing",
    "reinit_layers",
    "run_battery",
    "spearman",
    "ssim",
    "summarize",
    "train",
]

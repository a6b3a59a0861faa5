"""Attribution map record and per-method hyperparameter specs."""

import hashlib
from dataclasses import dataclass, field

import numpy as np

METHOD_IDS = (
    "grad",
    "smoothgrad",
    "smoothgrad_sq",
    "vargrad",
    "input_x_grad",
    "intgrad",
    "expected_grad",
    "lime",
    "kernel_shap",
    "gbp",
    "deconvnet",
    "lrp_z",
    "lrp_eps",
    "lrp_ab",
    "lrp_flat",
)

METHOD_DEFAULTS = {
    "grad": {},
    "smoothgrad": {"n_samples": 50, "sigma_fraction": 0.15},
    "smoothgrad_sq": {"n_samples": 50, "sigma_fraction": 0.15},
    "vargrad": {"n_samples": 50, "sigma_fraction": 0.15},
    "input_x_grad": {},
    "intgrad": {"steps": 50},
    "expected_grad": {"steps": 50, "baseline_count": 200},
    "lime": {"segments": 50, "num_samples": 1000, "kernel_width": 0.25, "ridge_lambda": 1.0, "seed": 0},
    "kernel_shap": {"segments": 50, "num_samples": 1000, "seed": 0},
    "gbp": {},
    "deconvnet": {},
    "lrp_z": {},
    "lrp_eps": {"eps": 1e-6},
    "lrp_ab": {"alpha": 1.0, "beta": 0.0},
    "lrp_flat": {"eps": 1e-6},
}


@dataclass
class AttributionMap:
    values: np.ndarray  # input-shaped, signed reals
    method: str
    params: dict
    target_class: int
    signed: bool  # whether negative relevance is meaningful


@dataclass
class MethodSpec:
    method: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHOD_IDS:
            raise ValueError(f"unknown method {self.method!r}; known: {METHOD_IDS}")
        merged = dict(METHOD_DEFAULTS[self.method])
        unknown = set(self.params) - set(merged) - {"target"}
        if unknown:
            raise ValueError(f"{self.method}: unknown hyperparameters {sorted(unknown)}")
        merged.update(self.params)
        self.params = merged
        self._validate()

    def _validate(self):
        p = self.params
        if self.method in ("smoothgrad", "smoothgrad_sq", "vargrad"):
            if p["n_samples"] < 1:
                raise ValueError("n_samples must be >= 1")
            if p["sigma_fraction"] < 0:
                raise ValueError("sigma_fraction must be >= 0")
        if self.method in ("intgrad", "expected_grad") and p["steps"] < 1:
            raise ValueError("steps must be >= 1")
        if self.method in ("lime", "kernel_shap"):
            if p["num_samples"] < p["segments"]:
                raise ValueError("num_samples must be >= segment count")
        if self.method == "lrp_ab" and abs(p["alpha"] - p["beta"] - 1.0) > 1e-12:
            raise ValueError("alpha - beta must equal 1")


def derive_seed(x: np.ndarray, *parts) -> int:
    """Deterministic seed from the input bytes plus discriminator parts."""
    digest = hashlib.sha256(np.ascontiguousarray(x, dtype=np.float64).tobytes())
    for part in parts:
        digest.update(repr(part).encode())
    return int.from_bytes(digest.digest()[:8], "little")

"""Plain-text run configuration.

Grammar (a TOML-compatible subset, one setting per line):

    # comment
    [section]            # sections nest with dots: [bug.spurious]
    key = value
    key = [v1, v2, v3]   # list of scalars

Scalars: integers, floats, true/false, "quoted strings" (bare words are
also read as strings). Parsed into nested dicts keyed by section path.
"""

from dataclasses import dataclass, field

from ..attributions import MethodSpec
from ..bugs import BugSpec
from ..nn.train import TrainConfig


class ConfigError(ValueError):
    pass


def _strip_comment(line):
    out = []
    in_str = False
    for ch in line:
        if ch == '"':
            in_str = not in_str
        if ch == "#" and not in_str:
            break
        out.append(ch)
    return "".join(out).strip()


def _parse_scalar(token, where):
    token = token.strip()
    if not token:
        raise ConfigError(f"{where}: empty value")
    if token.startswith('"'):
        if not token.endswith('"') or len(token) < 2:
            raise ConfigError(f"{where}: unterminated string {token!r}")
        return token[1:-1]
    low = token.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    return token


def parse_config_text(text: str) -> dict:
    root: dict = {}
    section = root
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        where = f"line {lineno}"
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{where}: malformed section header {line!r}")
            path = line[1:-1].strip()
            if not path:
                raise ConfigError(f"{where}: empty section name")
            section = root
            for part in path.split("."):
                section = section.setdefault(part, {})
                if not isinstance(section, dict):
                    raise ConfigError(f"{where}: section {path!r} collides with a key")
            continue
        if "=" not in line:
            raise ConfigError(f"{where}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if value.startswith("["):
            if not value.endswith("]"):
                raise ConfigError(f"{where}: unterminated list")
            inner = value[1:-1].strip()
            section[key] = [] if not inner else [_parse_scalar(t, where) for t in inner.split(",")]
        else:
            section[key] = _parse_scalar(value, where)
    return root


def load_config_file(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


DEFAULT_METRICS = ["ssim_gt1", "ssim_gt2", "ssim_vs_clean", "spearman_vs_clean", "norm_diff_vs_clean"]


@dataclass
class BatteryConfig:
    seed: int
    dataset: dict
    architecture: str = "cnn_tiny"
    train: TrainConfig = field(default_factory=TrainConfig)
    methods: list = field(default_factory=list)  # MethodSpec
    metrics: list = field(default_factory=lambda: list(DEFAULT_METRICS))
    bugs: list = field(default_factory=list)  # (name, BugSpec)
    sample_count: int = 190
    output_dir: str = "battery_out"
    export_heatmaps: bool = True

    def echo(self) -> dict:
        return {
            "seed": self.seed,
            "dataset": self.dataset,
            "architecture": self.architecture,
            "train": {
                "learning_rate": self.train.learning_rate,
                "epochs": self.train.epochs,
                "batch_size": self.train.batch_size,
                "optimizer": self.train.optimizer,
                "loss": self.train.loss,
                "seed": self.train.seed,
                "frozen_layers": sorted(self.train.frozen_layers),
            },
            "methods": [{"method": m.method, "params": m.params} for m in self.methods],
            "metrics": list(self.metrics),
            "bugs": [[name, spec.to_record()] for name, spec in self.bugs],
            "sample_count": self.sample_count,
            "export_heatmaps": self.export_heatmaps,
        }


def battery_config_from_dict(raw: dict, overrides: dict | None = None) -> BatteryConfig:
    """Build a validated BatteryConfig from parsed sections plus overrides."""
    overrides = overrides or {}
    battery = dict(raw.get("battery", {}))
    if "seed" in overrides and overrides["seed"] is not None:
        battery["seed"] = overrides["seed"]
    if "seed" not in battery:
        raise ConfigError("battery.seed is mandatory")
    seed = int(battery["seed"])

    dataset = dict(raw.get("dataset", {}))
    if "kind" not in dataset:
        raise ConfigError("dataset.kind is mandatory ('shapes' or 'idx')")

    train_raw = dict(raw.get("train", {}))
    train = TrainConfig(
        learning_rate=float(train_raw.get("learning_rate", 0.001)),
        epochs=int(train_raw.get("epochs", 10)),
        batch_size=int(train_raw.get("batch_size", 32)),
        optimizer=str(train_raw.get("optimizer", "adam")),
        loss=str(train_raw.get("loss", "cross_entropy")),
        seed=int(train_raw.get("seed", seed)),
        frozen_layers=frozenset(int(i) for i in train_raw.get("frozen_layers", [])),
    )

    method_overrides = raw.get("method", {})
    methods = []
    for mid in battery.get("methods", ["grad"]):
        params = dict(method_overrides.get(mid, {}))
        methods.append(MethodSpec(str(mid), params))

    bugs = []
    for name, body in raw.get("bug", {}).items():
        if not isinstance(body, dict) or "kind" not in body:
            raise ConfigError(f"bug.{name}: needs a 'kind' key")
        params = {k: v for k, v in body.items() if k not in ("kind", "seed", "category")}
        bugs.append((name, BugSpec(kind=body["kind"], params=params, seed=int(body.get("seed", seed)), category=body.get("category", ""))))

    import os

    output_dir = overrides.get("output_dir") or os.environ.get("ATTRDEBUG_OUTPUT_DIR") or battery.get("output_dir", "battery_out")

    return BatteryConfig(
        seed=seed,
        dataset=dataset,
        architecture=str(raw.get("network", {}).get("architecture", "cnn_tiny")),
        train=train,
        methods=methods,
        metrics=[str(m) for m in battery.get("metrics", DEFAULT_METRICS)],
        bugs=bugs,
        sample_count=int(battery.get("sample_count", 190)),
        output_dir=str(output_dir),
        export_heatmaps=bool(battery.get("export_heatmaps", True)),
    )

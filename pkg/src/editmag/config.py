"""Run configuration: one JSON file, every section optional, unknown keys rejected."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Any, Optional

from .embedding import EmbedderConfig
from .errors import ConfigError, InvalidInput
from .model import FeatureSpec, TrainConfig
from .perturb import PROFILES
from .simmetrics import BucketSpec, MetricKind, ScaleSpec, SoftNgramParams, default_scale


@dataclass(frozen=True)
class SplitConfig:
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0
    # which split each command reads; None means every record
    calibrate: Optional[str] = "val"
    evaluate: Optional[str] = "test"


@dataclass(frozen=True)
class PerturbConfig:
    profile: str = "paraphrase"
    lam: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")


@dataclass(frozen=True)
class TrajectoryConfig:
    steps: int = 5
    lam: float = 0.3
    profile: str = "paraphrase"
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        PerturbConfig(self.profile, self.lam, self.seed)


@dataclass(frozen=True)
class AgreementConfig:
    tie_mode: str = "strict"  # or "bucketed", using the run's bucket spec
    # "missing" treats a tie as an abstention, "value" keeps it as a third category.
    # Unset: abstention for strict comparison, category for bucketed comparison.
    ties: Optional[str] = None
    bootstrap_B: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.tie_mode not in ("strict", "bucketed"):
            raise ConfigError(f"tie_mode must be 'strict' or 'bucketed', got {self.tie_mode!r}")
        if self.ties is None:
            object.__setattr__(self, "ties", "missing" if self.tie_mode == "strict" else "value")
        if self.ties not in ("value", "missing"):
            raise ConfigError(f"ties must be 'value' or 'missing', got {self.ties!r}")


@dataclass(frozen=True)
class HistogramConfig:
    bins: int = 20
    range: tuple[float, float] = (0.0, 1.0)


@dataclass(frozen=True)
class RunConfig:
    metric: MetricKind = MetricKind.COSINE_DISTANCE
    scale: Optional[ScaleSpec] = None
    buckets: Optional[BucketSpec] = None
    soft_ngrams: SoftNgramParams = field(default_factory=SoftNgramParams)
    doc_embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    features: FeatureSpec = field(default_factory=FeatureSpec)
    head_kind: str = "classification"
    train: TrainConfig = field(default_factory=TrainConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    perturb: PerturbConfig = field(default_factory=PerturbConfig)
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    agreement: AgreementConfig = field(default_factory=AgreementConfig)
    histogram: HistogramConfig = field(default_factory=HistogramConfig)
    calibration_task: str = "ternary"
    model_path: Optional[str] = None
    calibration_path: Optional[str] = None
    train_log: Optional[str] = None

    def __post_init__(self):
        if self.head_kind not in ("classification", "regression"):
            raise ConfigError(f"unknown head_kind {self.head_kind!r}")
        if self.calibration_task not in ("ternary", "human_vs_any_ai", "fullyai_vs_rest"):
            raise ConfigError(f"unknown calibration_task {self.calibration_task!r}")
        scale = self.scale or default_scale(self.metric)
        object.__setattr__(self, "scale", scale)
        if self.buckets is None:
            object.__setattr__(self, "buckets", BucketSpec(4, scale.tau_low, scale.tau_high))

    def require(self, key: str) -> Any:
        value = getattr(self, key)
        if value is None:
            raise ConfigError(f"missing config key {key!r}")
        return value

    def with_seed(self, seed: int) -> "RunConfig":
        """Override every run seed. Embedder seeds are left alone: they name the embedding model."""
        r = dataclasses.replace
        return r(
            self,
            train=r(self.train, seed=seed), split=r(self.split, seed=seed), perturb=r(self.perturb, seed=seed),
            trajectory=r(self.trajectory, seed=seed), agreement=r(self.agreement, seed=seed),
        )

    def to_json(self) -> dict:
        return _dump(self)


# --------------------------------------------------------------------------
# (de)serialization


def _dump(obj) -> Any:
    if isinstance(obj, MetricKind):
        return obj.value
    if dataclasses.is_dataclass(obj):
        return {f.name: _dump(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (tuple, list)):
        return [_dump(v) for v in obj]
    return obj


# section name -> dataclass; "lambda" is accepted as the JSON spelling of "lam"
_SECTIONS = {
    "scale": ScaleSpec,
    "buckets": BucketSpec,
    "soft_ngrams": SoftNgramParams,
    "doc_embedder": EmbedderConfig,
    "features": FeatureSpec,
    "train": TrainConfig,
    "split": SplitConfig,
    "perturb": PerturbConfig,
    "trajectory": TrajectoryConfig,
    "agreement": AgreementConfig,
    "histogram": HistogramConfig,
}
_NESTED = {(SoftNgramParams, "phrase_embedder"): EmbedderConfig}
_ALIASES = {"lambda": "lam"}


def _build(cls, data: Any, where: str, defaults: Optional[dict] = None):
    if not isinstance(data, dict):
        raise ConfigError(f"config key {where!r} must be an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = dict(defaults or {})
    for key, value in data.items():
        name = _ALIASES.get(key, key)
        if name not in fields:
            raise ConfigError(f"unknown config key {where + '.' + key!r}")
        sub = _NESTED.get((cls, name))
        if sub is not None:
            value = _build(sub, value, f"{where}.{key}")
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[name] = value
    for name, f in fields.items():
        required = f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
        if required and name not in kwargs:
            raise ConfigError(f"missing config key {where + '.' + name!r}")
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad value under {where!r}: {exc}") from None


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    top = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - top
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]!r}")
    kwargs: dict = {}
    metric = MetricKind.parse(data.get("metric", MetricKind.COSINE_DISTANCE))
    kwargs["metric"] = metric
    scale = default_scale(metric)
    if "scale" in data:
        scale = _build(ScaleSpec, data["scale"], "scale")
        kwargs["scale"] = scale
    for key, value in data.items():
        if key in ("metric", "scale"):
            continue
        if key == "buckets":
            kwargs[key] = _build(BucketSpec, value, key, {"n": 4, "tau_min": scale.tau_low,
                                                          "tau_max": scale.tau_high})
        elif key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    return RunConfig(**kwargs)


def load_config(path: Optional[str], metric: Optional[str] = None) -> RunConfig:
    """Read ``path`` (or start from defaults); ``metric`` overrides the file's metric."""
    data: dict = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"{path}:{exc.lineno}: malformed config ({exc.msg})") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    if metric is not None:
        data = {**data, "metric": metric}
    return config_from_dict(data)

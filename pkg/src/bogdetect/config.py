"""Pipeline configuration: one YAML file plus ``key.sub=value`` overrides.

Every field has a shipped default; the comments in :data:`DEFAULT_YAML`
record where each default comes from.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Optional

import yaml

from .descriptor import DescriptorParams
from .detector import SmoothingParams
from .evaluation import EvalConfig
from .pipeline import TrainParams
from .sweep import RecognitionTask
from .synthetic import SyntheticSpec


class ConfigError(ValueError):
    """Invalid configuration file or override."""


@dataclass(frozen=True)
class DescriptorSection:
    alpha: float = 1.0
    beta: float = 1.0
    psi: float = 1.7
    window_half: int = 2


@dataclass(frozen=True)
class CodebookSection:
    K: int = 2500
    m: int = 3
    seed: int = 0
    subsample: float = 1.0
    max_iters: int = 100


@dataclass(frozen=True)
class ClassifierSection:
    reg: float = 1e-4
    epochs: int = 200
    pos_weight: float = 1.0
    hard_negatives: str = "instance_plus_pause"


@dataclass(frozen=True)
class DetectorSection:
    smoothing_window: int = 5
    anchor_weighted: bool = True
    patience: int = 1


@dataclass(frozen=True)
class EvaluationSection:
    protocol: str = "overlap"
    overlap_ratio: float = 0.2
    latency_frames: int = 10


@dataclass(frozen=True)
class SyntheticSection:
    n_classes: int = 3
    n_train: int = 12
    n_test: int = 8
    n_instances: int = 6
    instance_length: tuple[int, int] = (35, 60)
    pause_length: tuple[int, int] = (25, 45)
    noise: float = 0.004
    style_jitter: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class PathsSection:
    workdir: str = "work"
    topology: Optional[str] = None
    input_format: str = "skeleton_text"


@dataclass(frozen=True)
class SweepSection:
    # recognition task on pre-segmented synthetic clips
    n_classes: int = 6
    noise: float = 0.01
    style_jitter: float = 0.5
    instance_length: tuple[int, int] = (25, 50)
    train_clips: int = 8
    test_clips: int = 30
    data_seed: int = 1
    # swept values; the m sweep runs at codebook size m_sweep_K
    K_values: tuple[int, ...] = (50, 100, 200, 400, 600, 800)
    m_values: tuple[int, ...] = (1, 2, 3, 4, 5)
    m_sweep_K: int = 600
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class BenchSection:
    lengths: tuple[int, ...] = (10_000, 40_000)
    K: int = 200
    repeats: int = 3


@dataclass(frozen=True)
class PipelineConfig:
    descriptor: DescriptorSection = field(default_factory=DescriptorSection)
    codebook: CodebookSection = field(default_factory=CodebookSection)
    classifier: ClassifierSection = field(default_factory=ClassifierSection)
    detector: DetectorSection = field(default_factory=DetectorSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    synthetic: SyntheticSection = field(default_factory=SyntheticSection)
    paths: PathsSection = field(default_factory=PathsSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    bench: BenchSection = field(default_factory=BenchSection)

    def __post_init__(self) -> None:
        # run the owning modules' range checks eagerly
        try:
            self.descriptor_params()
            self.smoothing_params()
            self.eval_config()
            self.train_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.codebook.m < 1 or self.codebook.m > self.codebook.K:
            raise ConfigError("codebook.m must be in [1, K]")
        if not 0 < self.codebook.subsample <= 1:
            raise ConfigError("codebook.subsample must be in (0, 1]")
        if self.detector.patience < 1:
            raise ConfigError("detector.patience must be >= 1")
        if self.classifier.hard_negatives not in ("instance_plus_pause", "two_instance_concat", "none"):
            raise ConfigError(f"unknown hard_negatives mode {self.classifier.hard_negatives!r}")

    def descriptor_params(self) -> DescriptorParams:
        return DescriptorParams(**asdict(self.descriptor))

    def smoothing_params(self) -> SmoothingParams:
        return SmoothingParams(self.detector.smoothing_window, self.detector.anchor_weighted)

    def eval_config(self) -> EvalConfig:
        e = self.evaluation
        return EvalConfig(e.protocol, e.latency_frames, e.overlap_ratio)  # type: ignore[arg-type]

    def train_params(self) -> TrainParams:
        c, k = self.classifier, self.codebook
        return TrainParams(
            K=k.K,
            m=k.m,
            seed=k.seed,
            subsample=k.subsample,
            kmeans_iters=k.max_iters,
            reg=c.reg,
            epochs=c.epochs,
            pos_weight=c.pos_weight,
            hard_negatives=c.hard_negatives,  # type: ignore[arg-type]
            smoothing=self.smoothing_params(),
        )

    def synthetic_spec(self) -> SyntheticSpec:
        s = self.synthetic
        return SyntheticSpec(
            n_classes=s.n_classes,
            instance_length=tuple(s.instance_length),
            pause_length=tuple(s.pause_length),
            noise=s.noise,
            style_jitter=s.style_jitter,
            seed=s.seed,
            n_instances=s.n_instances,
        )

    def recognition_task(self) -> RecognitionTask:
        w = self.sweep
        spec = SyntheticSpec(
            n_classes=w.n_classes,
            noise=w.noise,
            style_jitter=w.style_jitter,
            instance_length=tuple(w.instance_length),
        )
        return RecognitionTask(spec, w.train_clips, w.test_clips, w.data_seed)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    @classmethod
    def msr_action3d(cls) -> "PipelineConfig":
        return cls(detector=DetectorSection(smoothing_window=3))

    @classmethod
    def msrc12(cls) -> "PipelineConfig":
        return cls(descriptor=DescriptorSection(0.375, 0.3, 0.2), detector=DetectorSection(smoothing_window=5))


def _plain(x: Any) -> Any:
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _coerce(value: Any, default: Any, key: str) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list, got {value!r}")
        if default:
            return tuple(_coerce(v, default[0], key) for v in value)
        return tuple(value)
    if isinstance(default, str) or default is None:
        if value is not None and not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    return value


def _build(cls, data: Any, prefix: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'}: expected a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {prefix or 'config'}")
    kwargs = {}
    proto = cls()
    for name in data:
        key = f"{prefix}.{name}" if prefix else name
        default = getattr(proto, name)
        if is_dataclass(default):
            kwargs[name] = _build(type(default), data[name], key)
        else:
            kwargs[name] = _coerce(data[name], default, key)
    return cls(**kwargs)


def _parse_override(text: str) -> tuple[list[str], Any]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {text!r}: {exc}") from None
    return path, value


def apply_overrides(data: dict, overrides: Iterable[str]) -> dict:
    """Set ``section.key=value`` entries (values parsed as YAML scalars or lists)."""
    data = dict(data)
    for text in overrides:
        path, value = _parse_override(text)
        node = data
        for p in path[:-1]:
            child = node.get(p)
            child = dict(child) if isinstance(child, dict) else {}
            node[p] = child
            node = child
        node[path[-1]] = value
    return data


def config_from_dict(data: Optional[dict], overrides: Iterable[str] = ()) -> PipelineConfig:
    merged = apply_overrides(data or {}, overrides)
    try:
        return _build(PipelineConfig, merged, "")
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: Optional[str | Path] = None, overrides: Iterable[str] = ()) -> PipelineConfig:
    data: dict = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data, overrides)


def dump_config(cfg: PipelineConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


def with_section(cfg: PipelineConfig, section: str, **changes: Any) -> PipelineConfig:
    return replace(cfg, **{section: replace(getattr(cfg, section), **changes)})


DEFAULT_YAML = """\
# bogdetect pipeline configuration.
# Override any entry on the command line: --override section.key=value

descriptor:
  alpha: 1.0        # MSR-Action3D weight on velocity block; MSRC-12 uses 0.375
  beta: 1.0         # MSR-Action3D weight on acceleration block; MSRC-12 uses 0.3
  psi: 1.7          # MSR-Action3D weight on angle blocks; MSRC-12 uses 0.2
  window_half: 2    # +-2 frame derivative stencil

codebook:
  K: 2500           # codebook size used for the recognition experiments
  m: 3              # soft-binning neighbours, weights 1/i
  seed: 0
  subsample: 1.0    # fraction of training frames used for k-means
  max_iters: 100

classifier:
  reg: 1.0e-4       # L2 regularisation (not given by the method; chosen here)
  epochs: 200       # solver passes (not given by the method; chosen here)
  pos_weight: 1.0   # extra hinge cost on positive examples
  hard_negatives: instance_plus_pause   # or two_instance_concat, none

detector:
  smoothing_window: 5   # MSRC-12 value; MSR-Action3D uses 3
  anchor_weighted: true # anchor frame weight = number of neighbours
  patience: 1           # fire at the first negative frame after arming

evaluation:
  protocol: overlap     # or action_point
  overlap_ratio: 0.2    # 0.2 and 0.5 are the reported operating points
  latency_frames: 10    # action-point window, 333 ms at 30 fps

synthetic:
  n_classes: 3
  n_train: 12
  n_test: 8
  n_instances: 6
  instance_length: [35, 60]
  pause_length: [25, 45]
  noise: 0.004
  style_jitter: 0.0
  seed: 0

paths:
  workdir: work
  topology: null        # YAML topology file; null selects the 20-joint Kinect default
  input_format: skeleton_text   # or msr_action3d, msrc12

sweep:                  # recognition on pre-segmented synthetic clips
  n_classes: 6
  noise: 0.01
  style_jitter: 0.5     # per-instance perturbation of the motion directions
  instance_length: [25, 50]
  train_clips: 8        # per class
  test_clips: 30        # per class
  data_seed: 1
  K_values: [50, 100, 200, 400, 600, 800]
  m_values: [1, 2, 3, 4, 5]
  m_sweep_K: 600        # codebook size for the m sweep
  seeds: [0, 1, 2, 3, 4]  # codebook seeds per point

bench:
  lengths: [10000, 40000]
  K: 200
  repeats: 3
"""

"""Run configuration: one flat JSON file, sections per component."""
import dataclasses
import json
from dataclasses import dataclass, field
from typing import Dict, Optional

from .abae import AbaeConfig
from .corpus import SplitRules
from .embeddings import SgnsConfig


class ConfigError(ValueError):
    pass


@dataclass
class PreprocessConfig:
    max_vocab: int = 9000
    min_ascii_ratio: Optional[float] = None


@dataclass
class KMeansConfig:
    max_iters: int = 300
    tol: float = 1e-6
    n_init: int = 1


@dataclass
class LdaConfig:
    n_topics: Optional[int] = None   # defaults to the ABAE aspect count
    alpha: Optional[float] = None
    beta: Optional[float] = None
    iterations: int = 200
    infer_iterations: int = 50


@dataclass
class EvalConfig:
    top_k: int = 3
    n_annotators: int = 3
    overlap_fraction: float = 795 / 4536
    coherence_sizes: tuple = (10, 30, 50)
    aggregation: str = "bos"
    methods: tuple = ("abae", "kmeans")


@dataclass
class Paths:
    corpus: str = "reviews.jsonl"
    work: str = "work"
    mappings: Dict[str, str] = field(default_factory=dict)
    judgments: Optional[str] = None


@dataclass
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    sgns: SgnsConfig = field(default_factory=SgnsConfig)
    abae: AbaeConfig = field(default_factory=AbaeConfig)
    kmeans: KMeansConfig = field(default_factory=KMeansConfig)
    lda: LdaConfig = field(default_factory=LdaConfig)
    split: SplitRules = field(default_factory=SplitRules)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 0

    def seeded(self):
        """Copy with ``seed`` pushed into every stochastic component."""
        c = dataclasses.replace(self)
        c.sgns = dataclasses.replace(self.sgns, seed=self.seed)
        c.abae = dataclasses.replace(self.abae, seed=self.seed)
        c.split = dataclasses.replace(self.split, seed=self.seed)
        return c

    def to_dict(self):
        return dataclasses.asdict(self)


_SECTIONS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")
    kwargs = {}
    for k, v in data.items():
        if isinstance(v, list):
            v = tuple(v)
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown config section(s) {unknown}")
    kwargs = {}
    for name, value in data.items():
        if name == "seed":
            if not isinstance(value, int):
                raise ConfigError("seed must be an integer")
            kwargs["seed"] = value
            continue
        cls = _SECTIONS[name].default_factory().__class__
        kwargs[name] = _build(cls, value, name)
    return RunConfig(**kwargs)


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def apply_override(cfg: RunConfig, dotted: str, raw: str) -> RunConfig:
    """``section.key=value`` override; the value is parsed as JSON when possible."""
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    if "." not in dotted:
        if dotted != "seed":
            raise ConfigError(f"override {dotted!r} must look like section.key")
        data = cfg.to_dict()
        data["seed"] = value
        return config_from_dict(data)
    section, key = dotted.split(".", 1)
    data = cfg.to_dict()
    if section not in data or not isinstance(data[section], dict):
        raise ConfigError(f"unknown config section {section!r}")
    if key not in data[section]:
        raise ConfigError(f"unknown key {key!r} in section {section!r}")
    data[section][key] = value
    return config_from_dict(data)

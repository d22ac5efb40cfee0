"""Pipeline configuration: nested dataclasses, INI-style config files, presets."""

from __future__ import annotations

import configparser
import dataclasses
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .crbm import RbmTrainConfig
from .dataset import RegressorConfig
from .errors import ConfigError
from .probcluster import ClusterConfig
from .probopt import OptimizeOptions

NORM_SCOPES = ("train", "all")
SOURCES = ("gas-furnace", "wh", "csv")


@dataclass(frozen=True)
class DataConfig:
    source: str = "gas-furnace"   # gas-furnace | wh | csv
    path: str | None = None
    u_column: str = "u"
    y_column: str = "y"
    n_train: int = 200
    n_test: int | None = None     # None -> every remaining row
    norm_scope: str = "train"
    surrogate_seed: int | None = None  # None -> the benchmark's default realization

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ConfigError(f"unknown data source {self.source!r}")
        if self.source == "csv" and not self.path:
            raise ConfigError("csv source needs a path")
        if self.norm_scope not in NORM_SCOPES:
            raise ConfigError(f"norm_scope must be one of {NORM_SCOPES}")
        if self.n_train < 1:
            raise ConfigError("n_train must be >= 1")
        if self.n_test is not None and self.n_test < 1:
            raise ConfigError("n_test must be >= 1")


@dataclass(frozen=True)
class FuzzyConfig:
    sigma_B_init: float = 0.1
    sigma_B_floor: float = 0.02

    def __post_init__(self):
        if not (self.sigma_B_init > 0 and self.sigma_B_floor > 0):
            raise ConfigError("consequent widths must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    data: DataConfig = field(default_factory=DataConfig)
    regressors: RegressorConfig = field(default_factory=RegressorConfig)
    rbm: RbmTrainConfig = field(default_factory=RbmTrainConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    fuzzy: FuzzyConfig = field(default_factory=FuzzyConfig)
    probopt: OptimizeOptions = field(default_factory=OptimizeOptions)
    use_rbm: bool = True
    use_prob_rules: bool = True
    resolve_w: bool = False
    seed: int = 0

    def __post_init__(self):
        # the run seed drives every stochastic stage
        object.__setattr__(self, "rbm", replace(self.rbm, seed=self.seed))
        object.__setattr__(self, "cluster", replace(self.cluster, seed=self.seed))

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(self, seed=seed)


# config-file section name -> PipelineConfig attribute
SECTIONS = {
    "dataset": "data",
    "regressors": "regressors",
    "crbm": "rbm",
    "probcluster": "cluster",
    "fuzzy": "fuzzy",
    "probopt": "probopt",
}
TOP_SECTION = "bench"


def gas_furnace_preset() -> PipelineConfig:
    return PipelineConfig()


def wh_preset(full: bool = False) -> PipelineConfig:
    data = DataConfig(source="wh", u_column="uBenchMark", y_column="yBenchMark",
                      n_train=100_000 if full else 10_000,
                      n_test=None if full else 5_000)
    return PipelineConfig(
        data=data,
        rbm=RbmTrainConfig(learning_rate=0.1),
        cluster=ClusterConfig(alpha=0.95, psi=100.0, feature_gain=6.0),
    )


def _field_types(cls):
    return typing.get_type_hints(cls)


def _coerce(raw: str, tp, key: str):
    raw = raw.strip()
    args = typing.get_args(tp)
    optional = type(None) in args
    if optional:
        if raw.lower() in ("none", ""):
            return None
        tp = next(a for a in args if a is not type(None))
    try:
        if tp is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        if tp is str:
            return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {tp.__name__}") from None
    raise ConfigError(f"{key}: unsupported field type {tp}")


def _update(obj, items: dict, where: str):
    types = _field_types(type(obj))
    names = {f.name for f in fields(obj)}
    kw = {}
    for key, raw in items.items():
        if key not in names:
            raise ConfigError(f"unknown key {where}.{key}")
        tp = types[key]
        if dataclasses.is_dataclass(tp):
            raise ConfigError(f"{where}.{key} is a section, not a value")
        kw[key] = raw if not isinstance(raw, str) else _coerce(raw, tp, f"{where}.{key}")
    try:
        return replace(obj, **kw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from None


def apply_overrides(cfg: PipelineConfig, overrides: dict) -> PipelineConfig:
    """``overrides`` maps ``section.key`` (or top-level ``key``) to a value
    (string values are parsed against the field type)."""
    by_section: dict[str, dict] = {}
    for dotted, value in overrides.items():
        section, _, key = dotted.rpartition(".")
        by_section.setdefault(section or TOP_SECTION, {})[key] = value
    for section, items in by_section.items():
        if section == TOP_SECTION:
            cfg = _update(cfg, items, TOP_SECTION)
        elif section in SECTIONS:
            attr = SECTIONS[section]
            cfg = replace(cfg, **{attr: _update(getattr(cfg, attr), items, section)})
        else:
            raise ConfigError(f"unknown config section [{section}]")
    return cfg


def parse_config_text(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    overrides = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            overrides[f"{section}.{key}"] = value
    return apply_overrides(base or PipelineConfig(), overrides)


def load_config(path, base: PipelineConfig | None = None) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), base)


def to_dict(cfg: PipelineConfig) -> dict:
    """Resolved config as ``{section: {key: value}}`` plus top-level switches."""
    out = {TOP_SECTION: {k: getattr(cfg, k) for k in ("use_rbm", "use_prob_rules", "resolve_w", "seed")}}
    for section, attr in SECTIONS.items():
        out[section] = dataclasses.asdict(getattr(cfg, attr))
    return out


def dumps_config(cfg: PipelineConfig) -> str:
    lines = []
    for section, items in to_dict(cfg).items():
        lines.append(f"[{section}]")
        lines += [f"{k} = {'none' if v is None else v}" for k, v in items.items()]
        lines.append("")
    return "\n".join(lines)

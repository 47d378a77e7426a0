"""Pipeline configuration: one TOML file plus ``section.key=value``
command-line overrides. Relative paths resolve against the config file's
directory."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from sentibreak.errors import ConfigError

DEFAULTS: dict[str, Any] = {
    "inputs": {"tweets_format": "jsonl"},
    "range": {"empty_days": "error"},
    "breaks": {"m_max": 5, "h_min_fraction": 0.15},
    "lag": {"k_max": 50},
    "classify": {
        "alpha": 1.0,
        "c_penalty": 1.0,
        "ratio": 0.8,
        "seed": 42,
        "epochs": 50,
        "min_df": 1,
        "stratify": False,
        "solver": "smo",
        "runs": ["whole", "A", "B"],
    },
    "output": {"dir": "out"},
}

PATH_KEYS = {
    "inputs": ("tweets", "market", "stoplist", "labeled"),
    "emotions": ("lexicon",),
    "simulate": ("lexicon",),
}


@dataclass(frozen=True)
class ScorerSpec:
    name: str
    mode: str
    lexicon: Path
    shifters: Path | None = None
    window: int = 4


@dataclass
class PipelineConfig:
    raw: dict[str, Any]
    base_dir: Path
    scorers: list[ScorerSpec] = field(default_factory=list)

    def get(self, section: str, key: str, default: Any = None) -> Any:
        return self.raw.get(section, {}).get(key, default)

    def path(self, section: str, key: str) -> Path | None:
        value = self.get(section, key)
        return None if value is None else self.base_dir / value

    def require_path(self, section: str, key: str) -> Path:
        p = self.path(section, key)
        if p is None:
            raise ConfigError(f"missing config key {section}.{key}")
        return p

    @property
    def start(self) -> date:
        return _date(self.get("range", "start"), "range.start")

    @property
    def end(self) -> date:
        return _date(self.get("range", "end"), "range.end")

    @property
    def output_dir(self) -> Path:
        return self.base_dir / self.get("output", "dir")


def _date(value: Any, key: str) -> date:
    if isinstance(value, date):
        return value
    if value is None:
        raise ConfigError(f"missing config key {key}")
    try:
        return date.fromisoformat(str(value))
    except ValueError as exc:
        raise ConfigError(f"{key}: not an ISO date: {value!r}") from exc


def _parse_value(text: str) -> Any:
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    out = copy.deepcopy(raw)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        section, name = key.strip().split(".", 1)
        out.setdefault(section, {})[name] = _parse_value(value.strip())
    return out


def _merge_defaults(raw: dict[str, Any]) -> dict[str, Any]:
    merged = copy.deepcopy(DEFAULTS)
    for section, values in raw.items():
        if isinstance(values, dict) and isinstance(merged.get(section), dict):
            merged[section].update(values)
        else:
            merged[section] = values
    return merged


def load_config(path: str | Path | None, overrides: list[str] = (), base_dir: Path | None = None) -> PipelineConfig:
    """Parse and validate a config file. Raises ``ConfigError`` on any
    problem, naming the offending key or path."""
    raw: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = tomllib.loads(path.read_text("utf-8"))
        except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        base_dir = path.parent if base_dir is None else base_dir
    raw = _merge_defaults(apply_overrides(raw, list(overrides)))
    cfg = PipelineConfig(raw, (base_dir or Path.cwd()).resolve())
    cfg.scorers = _scorers(cfg)
    _validate(cfg)
    return cfg


def _scorers(cfg: PipelineConfig) -> list[ScorerSpec]:
    specs = []
    seen = set()
    for i, entry in enumerate(cfg.raw.get("scorers", [])):
        if not isinstance(entry, dict):
            raise ConfigError(f"scorers[{i}] must be a table")
        try:
            name, mode, lexicon = entry["name"], entry["mode"], entry["lexicon"]
        except KeyError as exc:
            raise ConfigError(f"scorers[{i}] missing key {exc.args[0]}") from exc
        if mode not in ("unigram", "emotion", "shifted"):
            raise ConfigError(f"scorers[{i}].mode must be unigram, emotion or shifted, got {mode!r}")
        if name in seen:
            raise ConfigError(f"duplicate scorer name {name!r}")
        seen.add(name)
        shifters = entry.get("shifters")
        window = entry.get("window", 4)
        if not isinstance(window, int) or window < 0:
            raise ConfigError(f"scorers[{i}].window must be a non-negative integer")
        specs.append(
            ScorerSpec(
                str(name), mode, cfg.base_dir / lexicon, None if shifters is None else cfg.base_dir / shifters, window
            )
        )
    return specs


def _validate(cfg: PipelineConfig) -> None:
    for section, keys in PATH_KEYS.items():
        for key in keys:
            p = cfg.path(section, key)
            if p is not None and not p.exists():
                raise ConfigError(f"{section}.{key}: no such file: {p}")
    for s in cfg.scorers:
        for p in (s.lexicon, s.shifters):
            if p is not None and not p.exists():
                raise ConfigError(f"scorer {s.name!r}: no such file: {p}")
    k_max = cfg.get("lag", "k_max")
    if not isinstance(k_max, int) or k_max < 0:
        raise ConfigError("lag.k_max must be an integer >= 0")
    ratio = cfg.get("classify", "ratio")
    if not isinstance(ratio, (int, float)) or not 0 < ratio < 1:
        raise ConfigError("classify.ratio must lie strictly between 0 and 1")
    m_max = cfg.get("breaks", "m_max")
    if not isinstance(m_max, int) or m_max < 0:
        raise ConfigError("breaks.m_max must be an integer >= 0")
    frac = cfg.get("breaks", "h_min_fraction")
    if not isinstance(frac, (int, float)) or not 0 < frac < 1:
        raise ConfigError("breaks.h_min_fraction must lie in (0, 1)")
    if cfg.get("range", "empty_days") not in ("error", "linear"):
        raise ConfigError("range.empty_days must be 'error' or 'linear'")
    if cfg.get("inputs", "tweets_format") not in ("jsonl", "csv"):
        raise ConfigError("inputs.tweets_format must be 'jsonl' or 'csv'")
    if cfg.get("classify", "solver") not in ("smo", "subgradient"):
        raise ConfigError("classify.solver must be 'smo' or 'subgradient'")
    for key in ("start", "end"):
        if cfg.get("range", key) is not None:
            _date(cfg.get("range", key), f"range.{key}")
    if cfg.get("periods", "break_date") is not None:
        _date(cfg.get("periods", "break_date"), "periods.break_date")

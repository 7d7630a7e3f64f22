"""YAML pipeline configuration with defaults and strict key checking."""
from __future__ import annotations

import difflib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from .corpus import MIN_DF, MIN_WORDS, TOP_K as SELECT_TOP_K, RankingWeights
from .errors import ConfigError
from .kg import INTERSECTION_THRESHOLD
from .rag import SYSTEMS, TEMPERATURES, TOP_K

# Inputs that must exist when the config is loaded. Everything else under
# ``paths`` is produced by some stage, so only its parent directory is checked.
SOURCE_PATHS = ("corpus", "terms", "synonyms", "relations", "vague", "profiles")
DERIVED_PATHS = ("ranked", "triples", "intersection", "journal", "report_dir")
GRAPH_SYMBOLS = ("g1", "g2", "g3")


def _suggest(key: str, known) -> str:
    close = difflib.get_close_matches(key, list(known), n=1)
    return f"; did you mean {close[0]!r}?" if close else ""


def _check_keys(section: str, d: Mapping, known) -> None:
    for k in d:
        if k not in known:
            where = f" in {section!r}" if section else ""
            raise ConfigError(f"unknown config key {k!r}{where}{_suggest(str(k), known)}")


@dataclass
class Paths:
    corpus: Path | None = None
    terms: Path | None = None
    synonyms: Path | None = None
    relations: Path | None = None
    vague: Path | None = None
    profiles: Path | None = None
    ranked: Path | None = None
    triples: Path | None = None
    intersection: Path | None = None
    journal: Path | None = None
    report_dir: Path | None = None
    graphs: dict[str, Path] = field(default_factory=dict)
    probes: list[Path] = field(default_factory=list)


@dataclass
class PipelineConfig:
    paths: Paths = field(default_factory=Paths)
    weights: RankingWeights = field(default_factory=RankingWeights)
    min_words: int = MIN_WORDS
    min_df: int = MIN_DF
    select_top_k: int = SELECT_TOP_K
    top_k: int = TOP_K
    threshold: float = INTERSECTION_THRESHOLD
    temperatures: tuple[float, ...] = TEMPERATURES
    systems: tuple[str, ...] = SYSTEMS
    seed: int = 0
    n_probe1: int = 100
    n_probe2: int = 110
    replicates: int = 1
    max_in_flight: int = 1
    provider: str | None = None
    baseline: str = "no_rag"


_SCALAR_KEYS = {f.name for f in fields(PipelineConfig)} - {"paths"}
_PATH_KEYS = {f.name for f in fields(Paths)}


def _int(name: str, v: Any, lo: int) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ConfigError(f"{name} must be an integer >= {lo}, got {v!r}")
    return v


def _float(name: str, v: Any) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name} must be a number, got {v!r}")
    return float(v)


def _load_paths(raw: Mapping, base: Path) -> Paths:
    _check_keys("paths", raw, _PATH_KEYS)
    p = Paths()

    def resolve(v) -> Path:
        if not isinstance(v, str) or not v:
            raise ConfigError(f"path values must be non-empty strings, got {v!r}")
        path = Path(v)
        return path if path.is_absolute() else base / path

    for name in SOURCE_PATHS:
        if raw.get(name) is not None:
            path = resolve(raw[name])
            if not path.is_file():
                raise ConfigError(f"paths.{name}: file not found: {path}")
            setattr(p, name, path)
    for name in DERIVED_PATHS:
        if raw.get(name) is not None:
            path = resolve(raw[name])
            if not path.parent.is_dir():
                raise ConfigError(f"paths.{name}: directory {path.parent} does not exist")
            setattr(p, name, path)
    graphs = raw.get("graphs") or {}
    if not isinstance(graphs, Mapping):
        raise ConfigError("paths.graphs must map g1/g2/g3 to files")
    _check_keys("paths.graphs", graphs, GRAPH_SYMBOLS)
    p.graphs = {k: resolve(v) for k, v in graphs.items()}
    probes = raw.get("probes") or []
    if isinstance(probes, str):
        probes = [probes]
    p.probes = [resolve(v) for v in probes]
    for path in [*p.graphs.values(), *p.probes]:
        if not path.parent.is_dir():
            raise ConfigError(f"directory {path.parent} does not exist (for {path})")
    return p


def config_from_dict(raw: Mapping | None, base: Path | str = ".") -> PipelineConfig:
    """Validate a parsed config mapping; relative paths resolve against ``base``."""
    raw = dict(raw or {})
    _check_keys("", raw, _SCALAR_KEYS | {"paths"})
    cfg = PipelineConfig()
    cfg.paths = _load_paths(raw.pop("paths", None) or {}, Path(base))
    if "weights" in raw:
        w = raw.pop("weights")
        if isinstance(w, str):
            cfg.weights = RankingWeights.parse(w)
        elif isinstance(w, Mapping):
            _check_keys("weights", w, ("w_caus", "w_pheno", "w_biom", "w_kw"))
            cfg.weights = RankingWeights(**{k: _float(f"weights.{k}", v) for k, v in w.items()})
        else:
            raise ConfigError("weights must be 'a,b,c,d' or a mapping of w_caus/w_pheno/w_biom/w_kw")
    for name in ("min_words", "min_df", "select_top_k", "top_k", "n_probe1", "n_probe2",
                 "replicates", "max_in_flight", "seed"):
        if name in raw:
            lo = {"min_df": 1, "replicates": 1, "max_in_flight": 1}.get(name, 0)
            setattr(cfg, name, _int(name, raw.pop(name), lo))
    if "threshold" in raw:
        t = _float("threshold", raw.pop("threshold"))
        if not 0.0 < t <= 1.0:
            raise ConfigError(f"threshold must lie in (0, 1], got {t}")
        cfg.threshold = t
    if "temperatures" in raw:
        temps = raw.pop("temperatures")
        if not isinstance(temps, (list, tuple)) or not temps:
            raise ConfigError("temperatures must be a non-empty list of numbers")
        temps = tuple(_float("temperatures", v) for v in temps)
        if any(t < 0 for t in temps):
            raise ConfigError(f"temperatures must be >= 0, got {list(temps)}")
        cfg.temperatures = temps
    if "systems" in raw:
        systems = raw.pop("systems")
        if isinstance(systems, str):
            systems = systems.split(",")
        for s in systems:
            if s not in SYSTEMS:
                raise ConfigError(f"unknown system {s!r}{_suggest(s, SYSTEMS)}")
        cfg.systems = tuple(systems)
    for name in ("provider", "baseline"):
        if name in raw:
            v = raw.pop(name)
            if v is not None and not isinstance(v, str):
                raise ConfigError(f"{name} must be a string")
            setattr(cfg, name, v)
    if cfg.baseline not in SYSTEMS:
        raise ConfigError(f"unknown baseline {cfg.baseline!r}{_suggest(cfg.baseline, SYSTEMS)}")
    return cfg


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" (line {mark.line + 1})" if mark is not None else ""
        raise ConfigError(f"{path}: malformed YAML{where}") from None
    if raw is not None and not isinstance(raw, Mapping):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(raw, path.parent)

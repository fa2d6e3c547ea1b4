"""Engine configuration: one ``key = value`` text file, overridable from the CLI.

Lines starting with ``#`` are comments. Unknown keys are rejected so typos
do not silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class EngineConfig:
    store_path: str = "siterank-data"   # directory holding every engine artifact
    stopword_path: str | None = None
    min_doc_freq: int = 2
    model_kind: str = "nmf"
    k: int = 50
    max_iters: int = 200
    tol: float = 1e-4
    alpha: float | None = None          # LDA; None means 50 / k
    eta: float = 0.01
    n_sweeps: int = 200
    burn_in: int = 100
    seed: int = 0
    similarity_threshold: float = 0.5
    price_direction: str = "descending"
    n_trees: int = 100
    m: int | None = None                # None means floor(sqrt(n_features))
    min_leaf: int = 2
    forest_seed: int | None = None      # None means reuse ``seed``

    def validate(self) -> None:
        if self.model_kind not in ("nmf", "lda"):
            raise ConfigError(f"model_kind must be nmf or lda, got {self.model_kind!r}")
        if self.k < 1 or self.n_trees < 1 or self.min_doc_freq < 1:
            raise ConfigError("k, n_trees and min_doc_freq must be >= 1")
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ConfigError("similarity_threshold must be in [0, 1]")
        if self.price_direction not in ("descending", "ascending"):
            raise ConfigError("price_direction must be descending or ascending")
        if self.stopword_path and not Path(self.stopword_path).is_file():
            raise ConfigError(f"stopword file not found: {self.stopword_path}")

    @property
    def workdir(self) -> Path:
        return Path(self.store_path)

    def update(self, **overrides) -> "EngineConfig":
        for key, value in overrides.items():
            if value is not None:
                setattr(self, key, _coerce(key, value))
        return self


_TYPES = {f.name: f.type for f in fields(EngineConfig)}


def _coerce(key: str, value):
    if key not in _TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    if not isinstance(value, str):
        return value
    kind = _TYPES[key]
    if value.lower() in ("none", "") and "None" in kind:
        return None
    try:
        if kind.startswith("int"):
            return int(value)
        if kind.startswith("float"):
            return float(value)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {value!r} as {kind}") from None
    return value


def load_config(path: str | Path | None) -> EngineConfig:
    cfg = EngineConfig()
    if path is None:
        return cfg
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            try:
                setattr(cfg, key, _coerce(key, value))
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return cfg

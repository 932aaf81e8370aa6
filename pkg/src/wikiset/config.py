"""Pipeline configuration.

Configuration files are TOML. Every key is optional; command-line flags
override the file. Example::

    threads = 0                 # top-level, before any table; 0 = all cores

    [input]
    path = "articles.jsonl"
    format = "jsonl"            # or "wikitext" (directory or TSV stream)

    [output]
    dir = "dataset"

    [dataset]
    query_source = "title"      # or "first-sentence"
    min_rel = 5
    max_query_words = 10
    min_doc_tokens = 10
    lowercase = true
    fractions = [0.8, 0.1, 0.1]
    seed = 0

    [bm25]
    k1 = 1.5
    b = 0.75
    top_k = 100

    [eval]
    alpha = 0.01
    bonferroni_m = 0            # 0: number of comparisons in the invocation
"""

from __future__ import annotations

import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .bm25 import Bm25Params
from .dataset import ConfigError, DatasetConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["EvalConfig", "PipelineConfig", "default_threads"]

THREADS_ENV = "WIKISET_THREADS"


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError(f"{THREADS_ENV} must be >= 0")
    return n


@dataclass
class EvalConfig:
    alpha: float = 0.01
    bonferroni_m: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.bonferroni_m < 0:
            raise ConfigError("bonferroni_m must be >= 0")


@dataclass
class PipelineConfig:
    input_path: str | None = None
    input_format: str = "jsonl"
    output_dir: str | None = None
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    bm25: Bm25Params = field(default_factory=Bm25Params)
    eval: EvalConfig = field(default_factory=EvalConfig)
    threads: int = field(default_factory=default_threads)

    def __post_init__(self):
        if self.input_format not in ("jsonl", "wikitext"):
            raise ConfigError(f"input format must be jsonl or wikitext, got {self.input_format!r}")

    @classmethod
    def from_toml(cls, path: str | Path) -> "PipelineConfig":
        with open(path, "rb") as f:
            try:
                doc = tomllib.load(f)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        known = {"input", "output", "dataset", "bm25", "eval", "threads"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        inp = doc.get("input", {})
        kwargs = {}
        if "path" in inp:
            kwargs["input_path"] = inp["path"]
        if "format" in inp:
            kwargs["input_format"] = inp["format"]
        if "dir" in doc.get("output", {}):
            kwargs["output_dir"] = doc["output"]["dir"]
        if "threads" in doc:
            kwargs["threads"] = int(doc["threads"])
        try:
            kwargs["dataset"] = _section(DatasetConfig, doc.get("dataset", {}))
            kwargs["bm25"] = _section(Bm25Params, doc.get("bm25", {}))
            kwargs["eval"] = _section(EvalConfig, doc.get("eval", {}))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cls(**kwargs)

    def with_overrides(self, **overrides) -> "PipelineConfig":
        """Apply flag values; ``None`` means the flag was not given."""
        top, ds, bm, ev = {}, {}, {}, {}
        ds_keys = {f.name for f in fields(DatasetConfig)}
        bm_keys = {f.name for f in fields(Bm25Params)}
        ev_keys = {f.name for f in fields(EvalConfig)}
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ds_keys:
                ds[key] = value
            elif key in bm_keys:
                bm[key] = value
            elif key in ev_keys:
                ev[key] = value
            else:
                top[key] = value
        try:
            return replace(
                self,
                dataset=replace(self.dataset, **ds),
                bm25=replace(self.bm25, **bm),
                eval=replace(self.eval, **ev),
                **top,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return {
            "input": {"path": self.input_path, "format": self.input_format},
            "output": {"dir": self.output_dir},
            "dataset": self.dataset.to_dict(),
            "bm25": asdict(self.bm25),
            "eval": asdict(self.eval),
            "threads": self.threads,
        }


def _section(cls, values: dict):
    names = {f.name for f in fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown key(s) for {cls.__name__}: {', '.join(sorted(unknown))}")
    if "fractions" in values:
        values = dict(values, fractions=tuple(values["fractions"]))
    return cls(**values)

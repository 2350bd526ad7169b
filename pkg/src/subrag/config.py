"""Strict JSON configuration shared by the CLI and the bindings surface.

One canonical format: a JSON object with the sections ``graph``, ``index``,
``retrieval``, ``prompt``, ``generation``, and ``bench``. Unknown keys are
rejected with the offending dotted key named, so typos fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .bench import BenchConfig
from .generation import HttpClient, MockClient, RetryPolicy
from .prompt import DEFAULT_TEMPLATE, PromptTemplate, load_template
from .retrieval import NodeFilter, RetrievalConfig

__all__ = ["ConfigError", "CliConfig", "load_config", "DEFAULTS"]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


DEFAULTS: dict = {
    "graph": {
        "directed": False,
    },
    "index": {
        "metric": "cosine",
        "hash_dim": 64,
    },
    "retrieval": {
        "method": "bfs",
        "hops": 2,
        "fanout_cap": None,
        "max_nodes": None,
        "filter": {"kind": "none", "k": None, "threshold": None},
        "ppr": {"alpha": 0.15, "iters": 50},
    },
    "prompt": {
        "template_path": None,
        "budget": 1024,
        "chars_per_token": 4,
        "order": "score_desc",
    },
    "generation": {
        "client": "mock",
        "endpoint": None,
        "model": "default",
        "timeout": 30.0,
        "max_output_tokens": 256,
        "temperature": 0.0,
        "api_key_env": None,
        "max_concurrency": 4,
        "retry": {"max_attempts": 3, "backoff_base": 0.5},
    },
    "bench": {
        "methods": ["bfs", "steiner"],
        "hops": 2,
        "fanout_cap": None,
        "max_nodes": None,
        "terminals": 3,
        "terminal_hops": 2,
        "reps": 1,
        "seed": 0,
        "warmup": True,
        "cooldown_seconds": 0.0,
        "workers": 1,
        "learning_seconds": 0.0,
    },
}


def _merge(defaults: dict, override: dict, path: str) -> dict:
    merged = {}
    for key, default_val in defaults.items():
        if key in override:
            val = override[key]
            if isinstance(default_val, dict) and default_val and isinstance(val, dict):
                merged[key] = _merge(default_val, val, f"{path}{key}.")
            else:
                merged[key] = val
        else:
            merged[key] = default_val
    for key in override:
        if key not in defaults:
            raise ConfigError(f"unknown config key '{path}{key}'")
    return merged


@dataclass(frozen=True)
class CliConfig:
    """Validated union of all module config sections."""

    raw: dict = field(default_factory=dict)

    @property
    def sections(self) -> dict:
        return self.raw

    def retrieval_config(self) -> RetrievalConfig:
        sec = self.raw["retrieval"]
        fsec = sec["filter"]
        try:
            flt = NodeFilter(
                kind=fsec["kind"], k=fsec["k"], threshold=fsec["threshold"]
            )
            return RetrievalConfig(
                method=sec["method"],
                hops=sec["hops"],
                fanout_cap=sec["fanout_cap"],
                max_nodes=sec["max_nodes"],
                filter=flt,
                ppr_alpha=sec["ppr"]["alpha"],
                ppr_iters=sec["ppr"]["iters"],
            )
        except ValueError as exc:
            raise ConfigError(f"retrieval: {exc}") from exc

    def template(self) -> PromptTemplate:
        path = self.raw["prompt"]["template_path"]
        if path is None:
            return DEFAULT_TEMPLATE
        try:
            return load_template(path)
        except ValueError as exc:
            raise ConfigError(f"prompt.template_path: {exc}") from exc

    def client(self, force_mock: bool = False):
        sec = self.raw["generation"]
        if force_mock or sec["client"] == "mock":
            return MockClient(chars_per_token=self.raw["prompt"]["chars_per_token"])
        if sec["client"] != "http":
            raise ConfigError(f"generation.client must be 'mock' or 'http', got {sec['client']!r}")
        if not sec["endpoint"]:
            raise ConfigError("generation.endpoint is required for the http client")
        try:
            retry = RetryPolicy(
                max_attempts=sec["retry"]["max_attempts"],
                backoff_base=sec["retry"]["backoff_base"],
            )
        except ValueError as exc:
            raise ConfigError(f"generation.retry: {exc}") from exc
        return HttpClient(
            endpoint=sec["endpoint"],
            timeout=sec["timeout"],
            retry=retry,
            api_key_env=sec["api_key_env"],
            max_concurrency=sec["max_concurrency"],
        )

    def bench_config(self) -> BenchConfig:
        sec = self.raw["bench"]
        try:
            return BenchConfig(
                methods=tuple(sec["methods"]),
                hops=sec["hops"],
                fanout_cap=sec["fanout_cap"],
                max_nodes=sec["max_nodes"],
                terminals=sec["terminals"],
                terminal_hops=sec["terminal_hops"],
                reps=sec["reps"],
                seed=sec["seed"],
                warmup=sec["warmup"],
                cooldown_seconds=sec["cooldown_seconds"],
                workers=sec["workers"],
                learning_seconds=sec["learning_seconds"],
            )
        except ValueError as exc:
            raise ConfigError(f"bench: {exc}") from exc


def load_config(path: Optional[str] = None) -> CliConfig:
    """Load and validate a config file; None gives pure defaults."""
    if path is None:
        return CliConfig(raw=_merge(DEFAULTS, {}, ""))
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return CliConfig(raw=_merge(DEFAULTS, data, ""))

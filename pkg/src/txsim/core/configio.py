"""Load a DesignConfig from a key-value/section file or its JSON equivalent.

The plain-text form is INI-style with a ``[design]`` section holding the
top-level fields and a ``[cost_model]`` section for the cost knobs; keys
mirror the DesignConfig field names exactly and enum values are lowercase
strings.  The JSON form is one object with the same field names and a nested
``cost_model`` object.  Both parse to the same DesignConfig.
"""

from __future__ import annotations

import configparser
import dataclasses
import json

from .types import (
    ConcurrencyMode,
    CostModel,
    DesignConfig,
    FailureModel,
    IndexKind,
    ReplicationApproach,
    ReplicationModel,
    ShardingMode,
)

_ENUM_FIELDS = {
    "replication_model": ReplicationModel,
    "replication_approach": ReplicationApproach,
    "failure_model": FailureModel,
    "concurrency_mode": ConcurrencyMode,
    "index": IndexKind,
    "sharding_mode": ShardingMode,
}
_INT_FIELDS = {"reconfiguration_interval", "node_count", "tolerated_failures"}
_BOOL_FIELDS = {"ledger_enabled"}

_COST_FIELDS = {f.name: f.type for f in dataclasses.fields(CostModel)}


class ConfigError(ValueError):
    """A config file that cannot be parsed into a DesignConfig."""


def _coerce_bool(raw) -> bool:
    if isinstance(raw, bool):
        return raw
    text = str(raw).strip().lower()
    if text in ("true", "1", "yes", "on"):
        return True
    if text in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {raw!r}")


def _build_config(design: dict, cost: dict) -> DesignConfig:
    kwargs = {}
    for key, raw in design.items():
        if key in _ENUM_FIELDS:
            enum_cls = _ENUM_FIELDS[key]
            try:
                kwargs[key] = enum_cls(str(raw).strip().lower())
            except ValueError:
                valid = ", ".join(m.value for m in enum_cls)
                raise ConfigError(f"{key}: {raw!r} is not one of: {valid}") from None
        elif key in _INT_FIELDS:
            kwargs[key] = int(raw)
        elif key in _BOOL_FIELDS:
            kwargs[key] = _coerce_bool(raw)
        else:
            raise ConfigError(f"unknown design field: {key}")
    cost_kwargs = {}
    for key, raw in cost.items():
        if key not in _COST_FIELDS:
            raise ConfigError(f"unknown cost_model field: {key}")
        cost_kwargs[key] = float(raw) if key == "hash_time_per_byte" else int(raw)
    return DesignConfig(cost_model=CostModel(**cost_kwargs), **kwargs)


def config_from_text(text: str) -> DesignConfig:
    """Parse config text, auto-detecting the JSON vs key-value form."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        cost = data.pop("cost_model", {})
        return _build_config(data, cost)
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"bad config file: {exc}") from exc
    design = dict(parser["design"]) if parser.has_section("design") else {}
    cost = dict(parser["cost_model"]) if parser.has_section("cost_model") else {}
    if not design and not cost:
        raise ConfigError("config file has neither [design] nor [cost_model] sections")
    return _build_config(design, cost)


def config_from_file(path) -> DesignConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_text(fh.read())


def config_to_dict(cfg: DesignConfig) -> dict:
    """Flat JSON-compatible dict, the inverse of the JSON input form."""
    out = {}
    for f in dataclasses.fields(DesignConfig):
        value = getattr(cfg, f.name)
        if f.name == "cost_model":
            out[f.name] = dataclasses.asdict(value)
        elif f.name in _ENUM_FIELDS:
            out[f.name] = value.value
        else:
            out[f.name] = value
    return out

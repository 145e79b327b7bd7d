"""Flat dotted key-value run configuration with lossless round-tripping.

Format: one `key = value` per line, `#` comments, blank lines ignored. Keys
carry section prefixes (model.mu, grid.dr). Unknown keys are rejected by
name; values are validated by the domain types they feed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .exponents import ModelParams
from .solver import GridSpec

__all__ = ["ConfigError", "RunConfig", "parse_config", "config_to_text"]


class ConfigError(ValueError):
    """Malformed, unknown, or inconsistent configuration input."""


@dataclass(frozen=True)
class QuadratureSettings:
    lambda_rel_tol: float = 1e-9
    lambda_nodes: int = 24
    angle_nodes: int = 128


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    grid: GridSpec = field(default_factory=GridSpec)
    testfn: QuadratureSettings = field(default_factory=QuadratureSettings)
    output_dir: str = "out"
    emit_snapshots: tuple = ()


_SCHEMA = {
    "model.n": int,
    "model.mu": float,
    "model.alpha": float,
    "model.p": float,
    "model.epsilon": float,
    "grid.r_max": float,
    "grid.dr": float,
    "grid.cfl": float,
    "grid.t_budget": float,
    "grid.blowup_threshold": float,
    "testfn.lambda_rel_tol": float,
    "testfn.lambda_nodes": int,
    "testfn.angle_nodes": int,
    "output.dir": str,
    "output.snapshots": str,
}

_DEFAULT_MODEL = ModelParams()
_DEFAULT_GRID = GridSpec()
_DEFAULT_QUAD = QuadratureSettings()


def _parse_lines(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key: {key}")
        values[key] = val
    return values


def _coerce(key: str, val: str):
    kind = _SCHEMA[key]
    try:
        return kind(val)
    except ValueError as exc:
        raise ConfigError(f"config key {key}: cannot parse {val!r}") from exc


def _snapshot_list(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError(
            f"output.snapshots: expected comma-separated times, got {text!r}"
        ) from exc


def parse_config(text: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from file text plus flag overrides (flags win).

    Overrides use the same dotted keys, with values given as strings or
    already-typed objects. Empty input yields the canonical defaults.
    """
    values = _parse_lines(text) if text else {}
    for key, val in (overrides or {}).items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key: {key}")
        values[key] = val if not isinstance(val, str) else val

    def get(key, fallback):
        if key not in values:
            return fallback
        val = values[key]
        return _coerce(key, val) if isinstance(val, str) else _SCHEMA[key](val)

    try:
        model = ModelParams(
            n=get("model.n", _DEFAULT_MODEL.n),
            mu=get("model.mu", _DEFAULT_MODEL.mu),
            alpha=get("model.alpha", _DEFAULT_MODEL.alpha),
            p=get("model.p", _DEFAULT_MODEL.p),
            epsilon=get("model.epsilon", _DEFAULT_MODEL.epsilon),
        )
        grid = GridSpec(
            r_max=get("grid.r_max", _DEFAULT_GRID.r_max),
            dr=get("grid.dr", _DEFAULT_GRID.dr),
            cfl=get("grid.cfl", _DEFAULT_GRID.cfl),
            t_budget=get("grid.t_budget", _DEFAULT_GRID.t_budget),
            blowup_threshold=get("grid.blowup_threshold",
                                 _DEFAULT_GRID.blowup_threshold),
        )
        testfn = QuadratureSettings(
            lambda_rel_tol=get("testfn.lambda_rel_tol",
                               _DEFAULT_QUAD.lambda_rel_tol),
            lambda_nodes=get("testfn.lambda_nodes", _DEFAULT_QUAD.lambda_nodes),
            angle_nodes=get("testfn.angle_nodes", _DEFAULT_QUAD.angle_nodes),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    snapshots = values.get("output.snapshots", "")
    return RunConfig(
        model=model,
        grid=grid,
        testfn=testfn,
        output_dir=str(values.get("output.dir", "out")),
        emit_snapshots=_snapshot_list(snapshots)
        if isinstance(snapshots, str) else tuple(snapshots),
    )


def config_to_text(config: RunConfig) -> str:
    """Serialize; parse_config(config_to_text(c)) == c."""
    pairs = [
        ("model.n", config.model.n),
        ("model.mu", config.model.mu),
        ("model.alpha", config.model.alpha),
        ("model.p", config.model.p),
        ("model.epsilon", config.model.epsilon),
        ("grid.r_max", config.grid.r_max),
        ("grid.dr", config.grid.dr),
        ("grid.cfl", config.grid.cfl),
        ("grid.t_budget", config.grid.t_budget),
        ("grid.blowup_threshold", config.grid.blowup_threshold),
        ("testfn.lambda_rel_tol", config.testfn.lambda_rel_tol),
        ("testfn.lambda_nodes", config.testfn.lambda_nodes),
        ("testfn.angle_nodes", config.testfn.angle_nodes),
        ("output.dir", config.output_dir),
        ("output.snapshots", ",".join(format(t, ".17g")
                                      for t in config.emit_snapshots)),
    ]
    lines = []
    for key, val in pairs:
        if isinstance(val, float):
            lines.append(f"{key} = {format(val, '.17g')}")
        else:
            lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"

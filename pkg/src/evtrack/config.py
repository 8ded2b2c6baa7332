"""Run configuration: one JSON document covering every pipeline stage.

Defaults here are the single source of truth for the command-line
tools; each section mirrors the corresponding module's config
dataclass, and unknown keys are rejected rather than ignored so typos
fail loudly.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, replace
from typing import Any

from .ceot import CeotConfig
from .eot import EotConfig
from .errors import InvalidConfig
from .evaluation import default_thresholds
from .framer import FramerConfig

__all__ = ["RunConfig", "load_config", "dump_config", "default_config_json"]

DEFAULT_SEED = 7


@dataclass(frozen=True)
class RunConfig:
    """Everything an end-to-end run needs, minus file paths."""

    seed: int = DEFAULT_SEED
    framer: FramerConfig = field(default_factory=FramerConfig)
    eot: EotConfig = field(default_factory=EotConfig)
    ceot: CeotConfig = field(default_factory=CeotConfig)
    thresholds: tuple[float, ...] = field(
        default_factory=lambda: tuple(default_thresholds())
    )
    include_tracking: bool = False

    def with_seed(self, seed: int) -> "RunConfig":
        """Override every seeded component at once."""
        return replace(self, seed=seed, ceot=replace(self.ceot, rng_seed=seed))


def _build_section(cls: type, data: dict[str, Any], path: str) -> Any:
    if not isinstance(data, dict):
        raise InvalidConfig(f"{path}: expected an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise InvalidConfig(f"{path}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"{path}: {exc}") from exc


def from_dict(data: dict[str, Any]) -> RunConfig:
    """Build a RunConfig from parsed JSON, rejecting unknown keys.

    A ceot section without an explicit rng_seed inherits the top-level
    seed, so one "seed" key controls every random component.
    """
    if not isinstance(data, dict):
        raise InvalidConfig("top level: expected an object")
    known = {"seed", "framer", "eot", "ceot", "evaluation"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise InvalidConfig(f"top level: unknown key(s) {', '.join(unknown)}")

    seed = data.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise InvalidConfig("seed: expected an integer")

    framer = _build_section(FramerConfig, data.get("framer", {}), "framer")
    eot = _build_section(EotConfig, data.get("eot", {}), "eot")
    ceot_data = dict(data.get("ceot", {}))
    if isinstance(ceot_data, dict) and "rng_seed" not in ceot_data:
        ceot_data["rng_seed"] = seed
    ceot = _build_section(CeotConfig, ceot_data, "ceot")

    eval_data = data.get("evaluation", {})
    if not isinstance(eval_data, dict):
        raise InvalidConfig("evaluation: expected an object")
    unknown = sorted(set(eval_data) - {"thresholds", "include_tracking"})
    if unknown:
        raise InvalidConfig(f"evaluation: unknown key(s) {', '.join(unknown)}")
    thresholds = eval_data.get("thresholds", default_thresholds())
    try:
        thresholds = tuple(float(v) for v in thresholds)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"evaluation.thresholds: {exc}") from exc
    include_tracking = eval_data.get("include_tracking", False)
    if not isinstance(include_tracking, bool):
        raise InvalidConfig("evaluation.include_tracking: expected a boolean")

    return RunConfig(
        seed=seed,
        framer=framer,
        eot=eot,
        ceot=ceot,
        thresholds=thresholds,
        include_tracking=include_tracking,
    )


def to_dict(cfg: RunConfig) -> dict[str, Any]:
    """Inverse of from_dict; key order is the canonical dump order."""
    return {
        "seed": cfg.seed,
        "framer": dataclasses.asdict(cfg.framer),
        "eot": dataclasses.asdict(cfg.eot),
        "ceot": dataclasses.asdict(cfg.ceot),
        "evaluation": {
            "thresholds": list(cfg.thresholds),
            "include_tracking": cfg.include_tracking,
        },
    }


def load_config(path: str) -> RunConfig:
    """Read and validate a JSON config file."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path!r}: {exc}") from exc
    except (ValueError, UnicodeDecodeError) as exc:
        raise InvalidConfig(f"config {path!r} is not valid JSON: {exc}") from exc
    return from_dict(data)


def dump_config(cfg: RunConfig) -> str:
    """Canonical JSON rendering (fixed key order, two-space indent)."""
    return json.dumps(to_dict(cfg), indent=2) + "\n"


def default_config_json() -> str:
    """The JSON every field of which matches the module defaults."""
    return dump_config(RunConfig())

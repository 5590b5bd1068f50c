"""Run configuration: INI files with one section per concern, overridden by flags.

Example file::

    [run]
    system = example2
    depth = 12
    seed = 42
    output_dir = out
    sample_size = 500
    anchors = 5

    [system]
    alpha = 0.1
    s = 0.5, 0.5, 0.5, 0.5

    [geometry]
    epsilon_ladder = 0.125, 0.0625, 0.03125, 0.015625

    [pressure]
    omega = 1

    [budgets]
    words = 100000000
    grid = 1000000000000
    images = 10000000

``omega`` is a number, a comma-separated per-symbol table, ``minorant``
(build one from sampled multiplicities) or a path to a JSON file holding a
serialized minorant.
"""
from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional

from .errors import ValidationError
from .geometry import DEFAULT_IMAGE_BUDGET
from .pressure import DEFAULT_GRID_BUDGET
from .symbolic import DEFAULT_WORD_BUDGET
from .systems import (HorseshoeParams, SkewSystem, build_example1, build_example2, build_ifs,
                      generic_tau)

SYSTEMS = ("example1", "example2", "ifs")
DEFAULT_DEPTH = {"example1": 9, "example2": 12, "ifs": 10}


class ConfigError(ValidationError):
    """Malformed or inconsistent run configuration."""


def parse_floats(text) -> List[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from exc


@dataclass
class RunConfig:
    system: str = "ifs"
    params: Dict[str, object] = field(default_factory=dict)
    depth: Optional[int] = None
    epsilon_ladder: Optional[List[float]] = None
    omega: str = "1"
    seed: int = 42
    output_dir: str = "bowen_dim_out"
    sample_size: int = 500
    anchors: int = 5
    word_budget: int = DEFAULT_WORD_BUDGET
    grid_budget: int = DEFAULT_GRID_BUDGET
    image_budget: int = DEFAULT_IMAGE_BUDGET

    def validate(self) -> SkewSystem:
        """Check every field and build the system; raises ConfigError."""
        if self.system not in SYSTEMS:
            raise ConfigError(f"unknown system {self.system!r}; choose one of {', '.join(SYSTEMS)}")
        if self.depth is None:
            self.depth = DEFAULT_DEPTH[self.system]
        for name in ("depth", "sample_size", "anchors", "word_budget", "grid_budget", "image_budget"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.epsilon_ladder is not None:
            lad = self.epsilon_ladder
            if any(e <= 0 for e in lad) or any(b >= a for a, b in zip(lad, lad[1:])):
                raise ConfigError("epsilon_ladder must be positive and strictly decreasing")
        try:
            return build_system(self.system, self.params)
        except ValidationError as exc:
            raise ConfigError(f"invalid {self.system} parameters: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "system": self.system, "params": dict(self.params), "depth": self.depth,
            "epsilon_ladder": self.epsilon_ladder, "omega": self.omega, "seed": self.seed,
            "sample_size": self.sample_size, "anchors": self.anchors,
            "budgets": {"words": self.word_budget, "grid": self.grid_budget, "images": self.image_budget},
        }


def build_system(name: str, params: Dict[str, object]) -> SkewSystem:
    p = dict(params)
    if name == "ifs":
        ratios = parse_floats(p.get("ratios", "0.3333333333333333,0.3333333333333333"))
        offsets = p.get("offsets")
        if offsets is None:
            # evenly spread, no overlaps when the ratios allow it
            m = len(ratios)
            offsets = [k * (1.0 - ratios[-1]) / max(m - 1, 1) for k in range(m)]
        return build_ifs(ratios, parse_floats(offsets))
    if name == "example2":
        kwargs = {}
        if "s" in p:
            kwargs["s"] = tuple(parse_floats(p["s"]))
        if "eps0" in p:
            kwargs["eps0"] = float(p["eps0"])
        if "half_width" in p:
            kwargs["half_width"] = float(p["half_width"])
        return build_example2(float(p.get("alpha", 0.1)), **kwargs)
    if name == "example1":
        m = int(float(p.get("m", 3)))
        lam = float(p.get("lambda", 1.0 / m))
        if "tau" in p:
            flat = parse_floats(p["tau"])
            if len(flat) != 2 * m:
                raise ConfigError(f"tau needs {2 * m} numbers (pairs per branch), got {len(flat)}")
            tau = tuple(zip(flat[0::2], flat[1::2]))
        else:
            tau = generic_tau(m, lam)
        return build_example1(HorseshoeParams(m, lam, tau), float(p.get("z_coupling", 0.0)))
    raise ConfigError(f"unknown system {name!r}")


_RUN_KEYS = {"system": str, "depth": int, "seed": int, "output_dir": str,
             "sample_size": int, "anchors": int}
_BUDGET_KEYS = {"words": "word_budget", "grid": "grid_budget", "images": "image_budget"}


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = RunConfig()
    known = {"run", "system", "geometry", "pressure", "budgets"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")
    try:
        if parser.has_section("run"):
            for key, value in parser.items("run"):
                if key not in _RUN_KEYS:
                    raise ConfigError(f"unknown key [run] {key}")
                setattr(cfg, key, _RUN_KEYS[key](value))
        if parser.has_section("system"):
            cfg.params = dict(parser.items("system"))
        if parser.has_option("geometry", "epsilon_ladder"):
            cfg.epsilon_ladder = parse_floats(parser.get("geometry", "epsilon_ladder"))
        if parser.has_option("pressure", "omega"):
            cfg.omega = parser.get("pressure", "omega")
        if parser.has_section("budgets"):
            for key, value in parser.items("budgets"):
                if key not in _BUDGET_KEYS:
                    raise ConfigError(f"unknown key [budgets] {key}")
                setattr(cfg, _BUDGET_KEYS[key], int(float(value)))
    except ValueError as exc:
        raise ConfigError(f"malformed value in {path}: {exc}") from exc
    return cfg


def merge_overrides(cfg: RunConfig, overrides: Dict[str, object], params: Dict[str, object]) -> RunConfig:
    """Flags win over file values; ``None`` means the flag was not given."""
    fields = {k: v for k, v in overrides.items() if v is not None}
    merged = dict(cfg.params)
    merged.update({k: v for k, v in params.items() if v is not None})
    if "system" in fields and fields["system"] != cfg.system:
        merged = {k: v for k, v in params.items() if v is not None}
    return replace(cfg, params=merged, **fields)


def load_omega(spec: str):
    """Resolve the omega setting to a number, a table or a loaded minorant dict.

    Returns ``("constant", float)``, ``("table", list)``, ``("minorant", None)``
    or ``("file", dict)``.
    """
    text = str(spec).strip()
    if text == "minorant":
        return "minorant", None
    try:
        vals = parse_floats(text)
    except ConfigError:
        vals = None
    if vals:
        if len(vals) == 1:
            return "constant", vals[0]
        return "table", vals
    path = Path(text)
    try:
        with open(path) as fh:
            return "file", json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"omega {text!r} is neither a number, a table, 'minorant' nor a readable JSON file") from exc

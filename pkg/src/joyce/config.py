"""Run configuration: one JSON file (``//`` line comments allowed) per run.

Every section is validated against a fixed key set, unknown keys are
rejected, and :meth:`RunConfig.resolved` returns the fully defaulted form
that reports embed.  Feeding that form back in reproduces the run.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .jets import Potential
from .lattice import CentralCharge, Lattice
from .torus import ConeTruncation


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "lattice": {"eta": [[0, 1], [-1, 0]]},
    "charge": None,
    "truncation": {"generators": None, "degree": 8},
    "potential": {"terms": []},
    "checks": ["J1", "J2", "J3", "J4", "J5"],
    "j5_relax": False,
    "sample_plan": {
        "seed": 0,
        "n_random": 20,
        "z_center": None,
        "z_radius": 0.3,
        "theta_radius": 1.0,
        "exclusion": 1e-3,
        "n_zero_section": 3,
    },
    "tolerances": {"exact": 1e-12, "fd": 1e-5, "float": 1e-12, "loop_factor": 10.0, "stokes": 1e-6, "iso_stokes": 1e-4},
    "wallcross": {"before": None, "after": None, "sector": None, "mode": "exact", "twisted": True},
    "flow": {"F": [], "path": None, "loop": None, "rhs": "classical", "hbar": None, "rtol": 1e-10},
    "gl": {"u": None, "V": None, "offset": 0.05, "rays": None, "deform_to": None, "rh3": None},
    "moyal": {"series": {}, "hbar": "formal"},
    "output": "out",
}

_SECTIONS_WITH_KEYS = ("truncation", "sample_plan", "tolerances", "wallcross", "flow", "gl", "moyal")
_BUILDER_KEYS = {"F", "symmetrize"}
_SIDE_KEYS = {"charge", "omega", "dt"}


def strip_comments(text: str) -> str:
    """Drop ``//`` comments that sit outside JSON strings."""
    pattern = re.compile(r'"(?:\\.|[^"\\])*"|//[^\n]*')
    return pattern.sub(lambda m: m.group(0) if m.group(0).startswith('"') else "", text)


def _complex(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ConfigError(f"complex numbers are [re, im] pairs, got {x!r}")
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, (int, float)):
        return complex(x)
    raise ConfigError(f"not a number: {x!r}")


def _merge(name: str, given, default):
    if given is None:
        return copy.deepcopy(default)
    if not isinstance(given, dict):
        raise ConfigError(f"section '{name}' must be an object")
    extra = set(given) - set(default)
    if extra:
        raise ConfigError(f"unknown keys in '{name}': {sorted(extra)}")
    out = copy.deepcopy(default)
    out.update(copy.deepcopy(given))
    return out


@dataclass
class RunConfig:
    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        extra = set(raw) - set(DEFAULTS)
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        data = {}
        for key, default in DEFAULTS.items():
            if key in _SECTIONS_WITH_KEYS:
                data[key] = _merge(key, raw.get(key), default)
            elif key == "lattice":
                data[key] = _merge(key, raw.get(key), default)
            elif key == "potential":
                pot = raw.get(key, default)
                if not isinstance(pot, dict) or len(pot) != 1 or not ({"terms", "builder"} & set(pot)):
                    raise ConfigError("potential must be {\"terms\": [...]} or {\"builder\": {...}}")
                if "builder" in pot:
                    extra = set(pot["builder"]) - _BUILDER_KEYS
                    if extra:
                        raise ConfigError(f"unknown keys in 'potential.builder': {sorted(extra)}")
                data[key] = copy.deepcopy(pot)
            else:
                data[key] = copy.deepcopy(raw.get(key, default))
        for side in ("before", "after"):
            s = data["wallcross"][side]
            if s is not None:
                if not isinstance(s, dict) or set(s) - _SIDE_KEYS:
                    raise ConfigError(f"wallcross.{side} takes keys {sorted(_SIDE_KEYS)}")
        cfg = cls(data)
        cfg.lattice()  # validate early
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from e
        try:
            raw = json.loads(strip_comments(text))
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON: {e}") from e
        return cls.from_dict(raw)

    def resolved(self) -> dict:
        return copy.deepcopy(self.data)

    def override(self, *, tolerance=None, truncation=None, seed=None, checks=None, out=None) -> "RunConfig":
        d = self.resolved()
        if tolerance is not None:
            d["tolerances"]["exact"] = tolerance
            d["tolerances"]["float"] = tolerance
        if truncation is not None:
            d["truncation"]["degree"] = truncation
        if seed is not None:
            d["sample_plan"]["seed"] = seed
        if checks is not None:
            d["checks"] = checks
        if out is not None:
            d["output"] = out
        return RunConfig.from_dict(d)

    # -- typed accessors

    def lattice(self) -> Lattice:
        try:
            return Lattice(self.data["lattice"]["eta"])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad lattice: {e}") from e

    @property
    def rank(self) -> int:
        return len(self.data["lattice"]["eta"])

    def charge_values(self, values=None) -> list[complex]:
        values = self.data["charge"] if values is None else values
        if values is None:
            raise ConfigError("this command needs 'charge'")
        z = [_complex(x) for x in values]
        if len(z) != self.rank:
            raise ConfigError(f"charge has {len(z)} entries for a rank {self.rank} lattice")
        return z

    def central_charge(self, values=None) -> CentralCharge:
        return CentralCharge(self.charge_values(values))

    def truncation(self) -> ConeTruncation:
        t = self.data["truncation"]
        gens = t["generators"]
        if gens is None:
            gens = [list(b) for b in self.lattice().basis()]
        try:
            return ConeTruncation(self.lattice(), gens, int(t["degree"]))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad truncation: {e}") from e

    def literal_potential(self) -> Potential:
        try:
            return Potential.from_json(self.data["potential"]["terms"], self.lattice())
        except (TypeError, KeyError, ValueError) as e:
            raise ConfigError(f"bad potential: {e}") from e

    def flow_values(self, entries) -> dict[tuple, complex]:
        out = {}
        for e in entries:
            if set(e) - {"gamma", "value"}:
                raise ConfigError(f"F entries take 'gamma' and 'value', got {sorted(e)}")
            g = tuple(int(x) for x in e["gamma"])
            if len(g) != self.rank:
                raise ConfigError(f"class {list(g)} has the wrong rank")
            out[g] = _complex(e["value"])
        return out


def parse_complex(x) -> complex:
    return _complex(x)

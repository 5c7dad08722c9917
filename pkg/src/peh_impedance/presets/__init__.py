"""System documents: JSON parameter blocks with explicit units.

Every physical quantity is written as ``{"value": ..., "unit": "..."}``.  A
system is given either by its electrical analog (R, L, C) or mechanically
(M, K, D); alpha and Cp are always required.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Any

import jsonschema

from ..model import PehSystem

SCHEMA_VERSION = 1

# unit -> SI multiplier, grouped by quantity kind
UNITS: dict[str, dict[str, float]] = {
    "resistance": {"Ohm": 1.0, "kOhm": 1e3, "MOhm": 1e6},
    "inductance": {"H": 1.0, "mH": 1e-3, "kH": 1e3},
    "capacitance": {"F": 1.0, "mF": 1e-3, "uF": 1e-6, "nF": 1e-9, "pF": 1e-12},
    "mass": {"kg": 1.0, "g": 1e-3},
    "stiffness": {"N/m": 1.0},
    "damping": {"N*s/m": 1.0},
    "coupling": {"N/V": 1.0},
    "frequency": {"Hz": 2.0 * math.pi, "rad/s": 1.0},
    "acceleration": {"m/s^2": 1.0},
    "force": {"N": 1.0, "mN": 1e-3},
    "dimensionless": {"1": 1.0},
}

FIELDS: dict[str, str] = {
    "R": "resistance",
    "L": "inductance",
    "C": "capacitance",
    "M": "mass",
    "K": "stiffness",
    "D": "damping",
    "alpha": "coupling",
    "Cp": "capacitance",
    "Rp": "resistance",
    "gamma": "dimensionless",
    "Li": "inductance",
    "Cr": "capacitance",
    "freq": "frequency",
    "accel": "acceleration",
    "force": "force",
}


def _quantity_schema(kind: str) -> dict:
    return {
        "type": "object",
        "properties": {
            "value": {"oneOf": [{"type": "number"}, {"enum": ["inf"]}]},
            "unit": {"enum": sorted(UNITS[kind])},
        },
        "required": ["value", "unit"],
        "additionalProperties": False,
    }


SYSTEM_SCHEMA: dict = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        **{key: _quantity_schema(kind) for key, kind in FIELDS.items()},
    },
    "required": ["alpha", "Cp"],
    "oneOf": [
        {"required": ["R", "L", "C"], "not": {"anyOf": [{"required": ["M"]}, {"required": ["K"]}, {"required": ["D"]}]}},
        {"required": ["M", "K", "D"], "not": {"anyOf": [{"required": ["R"]}, {"required": ["L"]}, {"required": ["C"]}]}},
    ],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class Preset:
    name: str
    system: PehSystem
    omega: float | None
    document: dict


def quantity(doc: dict, key: str) -> float:
    """SI value of ``doc[key]``."""
    entry = doc[key]
    value = math.inf if entry["value"] == "inf" else float(entry["value"])
    return value * UNITS[FIELDS[key]][entry["unit"]]


def validate_system_document(doc: dict) -> None:
    jsonschema.validate(doc, SYSTEM_SCHEMA)


def system_from_document(doc: dict[str, Any]) -> Preset:
    validate_system_document(doc)
    opt = {k: quantity(doc, k) for k in ("Rp", "gamma", "Li", "Cr", "accel", "force") if k in doc}
    if "accel" not in opt and "force" not in opt:
        raise ValueError("system document needs either 'accel' or 'force'")
    name = doc.get("name", "custom")
    alpha, cp = quantity(doc, "alpha"), quantity(doc, "Cp")
    if "R" in doc:
        sys = PehSystem.from_electrical(
            quantity(doc, "R"), quantity(doc, "L"), quantity(doc, "C"), alpha, cp, name=name, **opt
        )
    else:
        sys = PehSystem(
            M=quantity(doc, "M"), K=quantity(doc, "K"), D=quantity(doc, "D"),
            alpha=alpha, Cp=cp, name=name, **opt,
        )
    omega = quantity(doc, "freq") if "freq" in doc else None
    return Preset(name=name, system=sys, omega=omega, document=doc)


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files(__name__).iterdir() if p.name.endswith(".json"))


def preset_document(name: str) -> dict:
    path = resources.files(__name__) / f"{name}.json"
    if not path.is_file():
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return json.loads(path.read_text())


def load_preset(name: str) -> Preset:
    """Load one of the shipped presets (``strong`` or ``weak``)."""
    return system_from_document(preset_document(name))

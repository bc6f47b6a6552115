"""Named model presets shipped as JSON package data.

A preset bundles dimensions, hyperparameters, and capacity limits under
a well-known name. The shipped numeric values are artifact defaults
(each file says so in its ``note`` field). ``sigma_f`` and ``sigma_n``
are standard deviations; the kernel squares them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from ..gp import Hyperparameters
from ..tree import TreeConfig

# listing order follows the GUI's dataset menu, Toy last
_SHIPPED = ("SARCOS", "KIN40K", "POL", "PUMADYN32NM", "Control", "Toy")

_FIELDS = {
    "name": str,
    "d_in": int,
    "d_out": int,
    "sigma_f": (int, float),
    "sigma_n": (int, float),
    "max_leaves": int,
    "max_local_data": int,
}


class PresetNotFoundError(KeyError):
    """Unknown preset name; carries the available names."""

    def __init__(self, name: str, available: Sequence[str]):
        super().__init__(f"unknown preset {name!r}; available: {', '.join(available)}")
        self.name = name
        self.available = tuple(available)


@dataclass(frozen=True)
class Preset:
    name: str
    d_in: int
    d_out: int
    sigma_f: float
    length_scales: tuple
    sigma_n: float
    max_leaves: int
    max_local_data: int
    note: str = ""

    def __post_init__(self):
        # constructing the real configs runs their validation
        self.tree_config()

    def hyperparameters(self) -> Hyperparameters:
        return Hyperparameters(
            sigma_f=self.sigma_f,
            length_scales=np.asarray(self.length_scales, dtype=np.float64),
            sigma_n=self.sigma_n,
            d_in=self.d_in,
            d_out=self.d_out,
        )

    def tree_config(self, rng_seed: int = 0) -> TreeConfig:
        return TreeConfig(
            max_leaves=self.max_leaves,
            max_local_data=self.max_local_data,
            hp=self.hyperparameters(),
            rng_seed=rng_seed,
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "note": self.note,
            "d_in": self.d_in,
            "d_out": self.d_out,
            "sigma_f": self.sigma_f,
            "length_scales": list(self.length_scales),
            "sigma_n": self.sigma_n,
            "max_leaves": self.max_leaves,
            "max_local_data": self.max_local_data,
        }


def parse_preset(doc: Mapping) -> Preset:
    """Validate a preset mapping; raises ValueError on schema violations."""
    if not isinstance(doc, Mapping):
        raise ValueError("preset document must be a mapping")
    for key, types in _FIELDS.items():
        if key not in doc:
            raise ValueError(f"preset is missing required field {key!r}")
        if not isinstance(doc[key], types) or isinstance(doc[key], bool):
            raise ValueError(f"preset field {key!r} has the wrong type")
    scales = doc.get("length_scales")
    if not isinstance(scales, Sequence) or isinstance(scales, (str, bytes)):
        raise ValueError("preset field 'length_scales' must be a list of reals")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in scales):
        raise ValueError("preset field 'length_scales' must be a list of reals")
    note = doc.get("note", "")
    if not isinstance(note, str):
        raise ValueError("preset field 'note' must be text")
    try:
        return Preset(
            name=doc["name"],
            d_in=doc["d_in"],
            d_out=doc["d_out"],
            sigma_f=float(doc["sigma_f"]),
            length_scales=tuple(float(v) for v in scales),
            sigma_n=float(doc["sigma_n"]),
            max_leaves=doc["max_leaves"],
            max_local_data=doc["max_local_data"],
            note=note,
        )
    except ValueError:
        raise
    except Exception as exc:  # validation errors from the config types
        raise ValueError(str(exc)) from exc


def available_presets() -> tuple:
    """Names of the shipped presets in menu order."""
    return _SHIPPED


def load_preset(name: str) -> Preset:
    """Load a shipped preset by name (case-insensitive)."""
    canonical = {n.lower(): n for n in _SHIPPED}.get(name.lower())
    if canonical is None:
        raise PresetNotFoundError(name, _SHIPPED)
    path = resources.files("gpnode.presets") / f"{canonical.lower()}.json"
    with path.open("r", encoding="utf-8") as f:
        doc = json.load(f)
    preset = parse_preset(doc)
    if preset.name != canonical:
        raise ValueError(f"preset file for {canonical!r} declares name {preset.name!r}")
    return preset

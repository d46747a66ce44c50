"""Sectioned key-value run configuration with a strict schema.

Unknown sections or keys are errors, not warnings, and every value is
materialized (defaults included) into a plain nested dict so that the run
hash covers the complete resolved configuration.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ConfigError

SCHEMA_VERSION = 1

_REQUIRED = object()


@dataclass(frozen=True)
class Key:
    type: type
    default: Any = _REQUIRED
    choices: tuple | None = None


SCHEMA: dict[str, dict[str, Key]] = {
    "run": {
        "schema_version": Key(int),
    },
    "geometry": {
        "L_m": Key(float, 0.01),
        "h_over_L": Key(float, 0.5),
        "d_over_L": Key(float, 0.0),
        "l_pml_over_L": Key(float, 0.4),
        "eta": Key(float, 1.0),
        "profile": Key(str, "confocal_arc", choices=("confocal_arc", "plane")),
        "mirror_model": Key(str, "ideal_pec", choices=("ideal_pec", "dielectric_stack")),
    },
    "solver": {
        "shift_ghz": Key(float, 45.2),
        "n_modes": Key(int, 10),
        "seed": Key(int, 0),
        "ppw": Key(float, 30.0),
        "pml_order": Key(float, 3.0),
        "pml_target_reflection": Key(float, 1e-4),
        "max_pml_energy_fraction": Key(float, 0.2),
        "target_m": Key(int, 1),
        "target_k": Key(int, 2),
        "refine": Key(bool, True),
    },
    "mirror": {
        "n_h": Key(float, 6.0),
        "k_h": Key(float, 0.0),
        "n_l": Key(float, 1.2),
        "k_l": Key(float, 0.0),
        "n_pairs": Key(int, 8),
        "n_sub": Key(float, 1.0),
        "lambda0_mm": Key(float, 6.633),
        "lambda_scan": Key(str, None),
        "kappa_mirror_hz": Key(float, None),
    },
    "qed": {
        "omega_ghz": Key(float, 45.2),
        "gamma_hz": Key(float, 2.5e3),
        "g_over_gamma": Key(float, None),
        "derive_g_from_V": Key(bool, False),
        "kappa_hz": Key(float, None),
        "derive_kappa_from_pipeline": Key(bool, False),
        "from_run_id": Key(str, None),
        "row_d_over_L": Key(float, None),
        "omega_drive_over_gamma": Key(float, 0.0),
        "n_max": Key(int, 10),
        "rel_tol": Key(float, 1e-8),
        "t_end_s": Key(float, None),
        "delta_over_gamma": Key(str, None),
    },
    "sweep": {
        "stage": Key(str, None, choices=(
            "modes", "mirror", "qed-dynamics", "qed-spectrum", "pipeline", None)),
        "mode": Key(str, "cartesian", choices=("cartesian",)),
        "budget": Key(int, 10000),
        "output_path": Key(str, None),
        # axis_1 .. axis_9 handled separately
    },
}

_AXIS_PREFIX = "axis_"


def _convert(section: str, key: str, raw: str, spec: Key):
    path = f"{section}.{key}"
    try:
        if spec.type is bool:
            low = raw.strip().lower()
            if low in ("true", "yes", "on", "1"):
                value: Any = True
            elif low in ("false", "no", "off", "0"):
                value = False
            else:
                raise ValueError(raw)
        elif spec.type is int:
            value = int(raw)
        elif spec.type is float:
            value = float(raw)
        else:
            value = raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{path}: cannot parse {raw!r} as {spec.type.__name__}") from exc
    if spec.choices is not None and value not in spec.choices:
        raise ConfigError(f"{path}: {value!r} not one of {spec.choices}")
    return value


def load_config(path) -> dict:
    """Parse and validate a config file into a fully resolved nested dict."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive (L_m, derive_g_from_V)
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")

    resolved: dict[str, dict[str, Any]] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
    for section, keys in SCHEMA.items():
        resolved[section] = {}
        present = dict(parser.items(section)) if parser.has_section(section) else {}
        for key, raw in present.items():
            if section == "sweep" and key.startswith(_AXIS_PREFIX):
                continue
            if key not in keys:
                raise ConfigError(f"unknown key {section}.{key}")
        for key, spec in keys.items():
            if key in present:
                resolved[section][key] = _convert(section, key, present[key], spec)
            elif spec.default is _REQUIRED:
                raise ConfigError(f"missing required key {section}.{key}")
            else:
                resolved[section][key] = spec.default
        if section == "sweep":
            axes = []
            axis_keys = sorted(
                (k for k in present if k.startswith(_AXIS_PREFIX)),
                key=lambda k: int(k[len(_AXIS_PREFIX):]))
            for k in axis_keys:
                axes.append(present[k].strip())
            resolved[section]["axes"] = axes

    if resolved["run"]["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"run.schema_version = {resolved['run']['schema_version']} "
            f"(this build expects {SCHEMA_VERSION})")
    return resolved


def parse_axis(text: str) -> tuple[str, str, list]:
    """One sweep axis: 'section.key: v1, v2, ...' -> (section, key, values)."""
    head, sep, tail = text.partition(":")
    if not sep:
        raise ConfigError(f"sweep axis {text!r} needs 'section.key: values'")
    path = head.strip()
    section, dot, key = path.partition(".")
    if not dot or section not in SCHEMA or key not in SCHEMA[section]:
        raise ConfigError(f"sweep axis targets unknown parameter {path!r}")
    spec = SCHEMA[section][key]
    values = [_convert(section, key, v.strip(), spec) for v in tail.split(",") if v.strip()]
    if not values:
        raise ConfigError(f"sweep axis {path!r} has no values")
    return section, key, values


def parse_grid_spec(text: str, what: str) -> np.ndarray:
    """Numeric grid: either 'start:stop:count' (inclusive linspace) or a
    comma-separated list."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            return np.linspace(float(start), float(stop), int(count))
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise ConfigError(f"{what}: cannot parse grid {text!r}") from exc

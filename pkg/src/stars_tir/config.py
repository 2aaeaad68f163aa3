"""Sectioned ``key = value`` configuration for the tracker and its solvers."""
from __future__ import annotations

import configparser
import difflib
import hashlib
from dataclasses import fields, replace
from pathlib import Path
from typing import Union

from .errors import InvalidConfig, TypeMismatch, UnknownKey
from .tracker import TrackerConfig

# section name -> attribute of TrackerConfig holding that sub-config (None: top level)
SECTIONS = {
    "astf": "astf",
    "spatial": "sp",
    "temporal": "tp",
    "epsr": "epsr",
    "gesr": "gesr",
    "features": "features",
    "tracker": None,
}
_NESTED = {a for a in SECTIONS.values() if a}


def _keys(section: str, base: TrackerConfig) -> dict:
    attr = SECTIONS[section]
    if attr is None:
        return {f.name: getattr(base, f.name) for f in fields(base) if f.name not in _NESTED}
    sub = getattr(base, attr)
    return {f.name: getattr(sub, f.name) for f in fields(sub)}


def _parse(raw: str, default, key: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(float(v) for v in raw.replace(",", " ").split())
    except ValueError:
        raise TypeMismatch(f"{key} = {raw!r}: expected {type(default).__name__}") from None
    raise TypeMismatch(f"{key}: unsupported type {type(default).__name__}")


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text: str, base: TrackerConfig = None) -> TrackerConfig:
    """Overlay the keys found in ``text`` on ``base`` (default: built-in defaults)."""
    base = TrackerConfig() if base is None else base
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise TypeMismatch(f"malformed config: {exc}") from None
    top, nested = {}, {}
    for section in cp.sections():
        if section not in SECTIONS:
            raise UnknownKey(section, None, difflib.get_close_matches(section, SECTIONS, n=3, cutoff=0.0))
        known = _keys(section, base)
        vals = {}
        for key, raw in cp.items(section):
            if key not in known:
                raise UnknownKey(key, section, difflib.get_close_matches(key, known, n=3, cutoff=0.0))
            vals[key] = _parse(raw, known[key], f"[{section}] {key}")
        attr = SECTIONS[section]
        if attr is None:
            top.update(vals)
        elif vals:
            try:
                nested[attr] = replace(getattr(base, attr), **vals)
            except ValueError as exc:
                raise InvalidConfig(f"[{section}] {exc}") from exc
    return replace(base, **nested, **top)


def load_config(path: Union[str, Path, None]) -> TrackerConfig:
    if path is None:
        return TrackerConfig()
    return parse_config(Path(path).read_text())


def serialize_config(cfg: TrackerConfig) -> str:
    """Canonical text form; parsing it gives back an equal config."""
    out = []
    for section in SECTIONS:
        out.append(f"[{section}]")
        for key, value in _keys(section, cfg).items():
            out.append(f"{key} = {_format(value)}")
        out.append("")
    return "\n".join(out)


def config_hash(cfg: TrackerConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()

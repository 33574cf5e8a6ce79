"""Run configuration: line-oriented ``key = value`` files with ``[section]`` headers.

Every key lives in exactly one section. Unknown keys, duplicates, type
mismatches and a missing case name are reported with the key and line.
Command-line overrides use ``key=value`` or ``section.key=value``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

CASE_NAMES = ("sod", "lax", "toro4", "dmr", "freestream", "smooth_wave")
CHOICES = {
    "case": CASE_NAMES,
    "scheme": ("modal_dg", "dgsem"),
    "mode": ("none", "pos", "idp", "idploc"),
    "flux": ("rusanov", "hll", "suliciu"),
    "wave_mode": ("default", "guaranteed"),
}
REQUIRED = ("case",)


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.key = key
        self.line = line


def _meta(section, kind):
    return {"section": section, "kind": kind}


@dataclass
class CaseConfig:
    """Effective run configuration. ``None`` means "case default"."""

    case: str = dataclasses.field(default="", metadata=_meta("case", "str"))
    # mesh
    n: int | None = dataclasses.field(default=None, metadata=_meta("mesh", "int?"))
    nx: int | None = dataclasses.field(default=None, metadata=_meta("mesh", "int?"))
    ny: int | None = dataclasses.field(default=None, metadata=_meta("mesh", "int?"))
    domain: tuple | None = dataclasses.field(default=None, metadata=_meta("mesh", "floats?"))
    distortion: float = dataclasses.field(default=0.0, metadata=_meta("mesh", "float"))
    mapping_degree: int = dataclasses.field(default=1, metadata=_meta("mesh", "int"))
    # discretization
    scheme: str = dataclasses.field(default="dgsem", metadata=_meta("scheme", "str"))
    p: int = dataclasses.field(default=3, metadata=_meta("scheme", "int"))
    flux: str = dataclasses.field(default="suliciu", metadata=_meta("scheme", "str"))
    wave_mode: str = dataclasses.field(default="default", metadata=_meta("scheme", "str"))
    # limiting
    mode: str = dataclasses.field(default="idp", metadata=_meta("limiter", "str"))
    rho_min: float = dataclasses.field(default=1e-12, metadata=_meta("limiter", "float"))
    rhoe_min: float = dataclasses.field(default=1e-12, metadata=_meta("limiter", "float"))
    gate: bool = dataclasses.field(default=True, metadata=_meta("limiter", "bool"))
    gate_offset: float = dataclasses.field(default=-2.5, metadata=_meta("limiter", "float"))
    gate_slope: float = dataclasses.field(default=4.0, metadata=_meta("limiter", "float"))
    tol: float = dataclasses.field(default=1e-12, metadata=_meta("limiter", "float"))
    max_iter: int = dataclasses.field(default=50, metadata=_meta("limiter", "int"))
    # time
    t_final: float | None = dataclasses.field(default=None, metadata=_meta("time", "float?"))
    cfl: float = dataclasses.field(default=0.9, metadata=_meta("time", "float"))
    rk_order: int = dataclasses.field(default=3, metadata=_meta("time", "int"))
    max_steps: int | None = dataclasses.field(default=None, metadata=_meta("time", "int?"))
    max_retries: int = dataclasses.field(default=3, metadata=_meta("time", "int"))
    # output
    output: str = dataclasses.field(default="output", metadata=_meta("output", "str"))
    samples: int = dataclasses.field(default=10, metadata=_meta("output", "int"))
    verify: bool = dataclasses.field(default=False, metadata=_meta("output", "bool"))

    def validate(self) -> "CaseConfig":
        for name, allowed in CHOICES.items():
            if getattr(self, name) not in allowed:
                raise ConfigError(f"expected one of {', '.join(allowed)}, got {getattr(self, name)!r}", name)
        positive = {"p": self.p, "samples": self.samples, "cfl": self.cfl, "max_iter": self.max_iter}
        for k in ("n", "nx", "ny"):
            if getattr(self, k) is not None:
                positive[k] = getattr(self, k)
        for k, v in positive.items():
            if v <= 0:
                raise ConfigError("must be positive", k)
        if self.rk_order not in (1, 2, 3):
            raise ConfigError("must be 1, 2 or 3", "rk_order")
        if self.mapping_degree not in (1, 2):
            raise ConfigError("must be 1 or 2", "mapping_degree")
        if self.t_final is not None and self.t_final < 0:
            raise ConfigError("must be >= 0", "t_final")
        if self.domain is not None and len(self.domain) not in (2, 4):
            raise ConfigError("needs 2 (1D) or 4 (2D) numbers", "domain")
        return self


FIELDS = {f.name: f for f in fields(CaseConfig)}
SECTIONS: dict[str, list[str]] = {}
for _f in fields(CaseConfig):
    SECTIONS.setdefault(_f.metadata["section"], []).append(_f.name)


def _parse_value(key: str, text: str, line: int | None):
    kind = FIELDS[key].metadata["kind"]
    optional = kind.endswith("?")
    kind = kind.rstrip("?")
    text = text.strip()
    if optional and text.lower() in ("auto", ""):
        return None
    try:
        if kind == "str":
            if not text:
                raise ValueError
            return text
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError
        if kind == "floats":
            return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"cannot read {text!r} as {kind}", key, line) from None
    raise AssertionError(kind)


def parse_config(text: str, overrides=()) -> CaseConfig:
    """Parse config text, apply ``key=value`` overrides and validate."""
    values: dict[str, object] = {}
    seen: dict[str, int] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", line=lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", line=lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in FIELDS:
            raise ConfigError("unknown key", key, lineno)
        home = FIELDS[key].metadata["section"]
        if section is not None and section != home:
            raise ConfigError(f"belongs in section [{home}], found in [{section}]", key, lineno)
        if key in seen:
            raise ConfigError(f"duplicate (first set on line {seen[key]})", key, lineno)
        seen[key] = lineno
        values[key] = _parse_value(key, value, lineno)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        if "." in key:
            sec, key = key.split(".", 1)
            if key in FIELDS and FIELDS[key].metadata["section"] != sec:
                raise ConfigError(f"belongs in section [{FIELDS[key].metadata['section']}]", key)
        if key not in FIELDS:
            raise ConfigError("unknown key", key)
        values[key] = _parse_value(key, value, None)
    for key in REQUIRED:
        if not values.get(key):
            raise ConfigError("missing required key", key)
    cfg = CaseConfig(**values)
    try:
        return cfg.validate()
    except ConfigError as err:
        if err.key in seen:
            raise ConfigError(str(err).rsplit(" (", 1)[0], err.key, seen[err.key]) from None
        raise


def load_config(path=None, overrides=()) -> CaseConfig:
    text = Path(path).read_text() if path is not None else ""
    return parse_config(text, overrides)


def _format(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(repr(float(v)) for v in value)
    return str(value)


def echo_config(cfg: CaseConfig) -> str:
    """Full effective configuration in the file format (round-trips through parse_config)."""
    out = []
    for section, keys in SECTIONS.items():
        out.append(f"[{section}]")
        out.extend(f"{k} = {_format(getattr(cfg, k))}" for k in keys)
        out.append("")
    return "\n".join(out)

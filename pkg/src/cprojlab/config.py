"""Scenario configuration: a flat key/section text format.

Top-level lines are ``key = value``; repeated ``[section]`` headers open
list entries (blocks, constant blocks).  Values are typed scalars
(int/float/bool/string) or whitespace-separated numeric lists; polynomial
coefficient lists are written lowest degree first.  Parsing errors carry
line numbers; serialization round-trips to an equal config.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["ConfigError", "ScenarioConfig", "parse_config",
           "parse_config_text", "serialize_config", "SCENARIO_KINDS"]

SCENARIO_KINDS = ("quotient-pair", "lift", "main-example", "mobility2",
                  "jordan", "flows", "appendix")


class ConfigError(ValueError):
    pass


def _parse_scalar(tok: str):
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        pass
    if tok in ("true", "false"):
        return tok == "true"
    return tok


def _parse_value(text: str):
    toks = text.split()
    if not toks:
        return ""
    if len(toks) == 1:
        return _parse_scalar(toks[0])
    vals = [_parse_scalar(t) for t in toks]
    if all(isinstance(v, (int, float)) for v in vals):
        return [float(v) for v in vals]
    return vals


@dataclass
class ScenarioConfig:
    kind: str = ""
    options: dict = field(default_factory=dict)
    sections: list = field(default_factory=list)   # (name, dict) pairs

    def opt(self, key, default=None):
        return self.options.get(key, default)

    def blocks(self, name="block"):
        return [d for n, d in self.sections if n == name]

    def __eq__(self, other):
        return (self.kind == other.kind and self.options == other.options
                and self.sections == other.sections)


def parse_config_text(text: str) -> ScenarioConfig:
    cfg = ScenarioConfig()
    current = cfg.options
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: unterminated section "
                                  f"header {raw!r}")
            name = line[1:-1].strip()
            if not name:
                raise ConfigError(f"line {lineno}: empty section name")
            current = {}
            cfg.sections.append((name, current))
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', "
                              f"got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        current[key] = _parse_value(val.strip())
    cfg.kind = cfg.options.get("scenario", "")
    if cfg.kind not in SCENARIO_KINDS:
        raise ConfigError(
            f"scenario kind {cfg.kind!r} not one of {SCENARIO_KINDS}")
    return cfg


def parse_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_fmt_value(x) for x in v)
    return str(v)


def serialize_config(cfg: ScenarioConfig) -> str:
    lines = []
    for k in sorted(cfg.options):
        lines.append(f"{k} = {_fmt_value(cfg.options[k])}")
    for name, d in cfg.sections:
        lines.append("")
        lines.append(f"[{name}]")
        for k in sorted(d):
            lines.append(f"{k} = {_fmt_value(d[k])}")
    return "\n".join(lines) + "\n"

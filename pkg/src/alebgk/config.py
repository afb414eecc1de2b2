"""Sectioned ``key = value`` run files.

Layout (``#`` and ``;`` start comments)::

    [run]         dims, mode, L, n_per_axis, dt, n_steps, workers
    [velocity]    N_v, v_max
    [gas]         d, k_b, R
    [initial]     rho0, T0, U0
    [walls]       T_wall, lid_velocity, lid
    [management]  enabled, r_merge, m_min
    [output]      snapshot_every, format

Vectors are comma separated. Unknown sections or keys are rejected.
"""
from __future__ import annotations

import configparser
from pathlib import Path

from .phase_space import GasProperties
from .solver import RunConfig


class ConfigError(ValueError):
    def __init__(self, message, key=None, line=None, path=None):
        self.key, self.line, self.path = key, line, path
        where = f"{path}:" if path else ""
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


def _vec(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt(conv):
    return lambda t: None if t.strip().lower() in ("", "none", "auto") else conv(t)


# (section, key) -> (RunConfig field or "gas.<field>", parser, required)
KEYS = {
    ("run", "dims"): ("dims", int, False),
    ("run", "mode"): ("mode", str.strip, False),
    ("run", "L"): ("L", float, True),
    ("run", "n_per_axis"): ("n_per_axis", int, True),
    ("run", "dt"): ("dt", float, True),
    ("run", "n_steps"): ("n_steps", int, True),
    ("run", "workers"): ("workers", _opt(int), False),
    ("velocity", "N_v"): ("N_v", int, True),
    ("velocity", "v_max"): ("v_max", _opt(float), False),
    ("gas", "d"): ("gas.d", float, False),
    ("gas", "k_b"): ("gas.k_b", float, False),
    ("gas", "R"): ("gas.R", float, False),
    ("initial", "rho0"): ("rho0", float, False),
    ("initial", "T0"): ("T0", float, False),
    ("initial", "U0"): ("U0", _vec, False),
    ("walls", "T_wall"): ("T_wall", _opt(float), False),
    ("walls", "lid_velocity"): ("lid_velocity", _vec, False),
    ("walls", "lid"): ("lid", _opt(str.strip), False),
    ("management", "enabled"): ("manage", _bool, False),
    ("management", "r_merge"): ("r_merge", float, False),
    ("management", "m_min"): ("m_min", _opt(int), False),
    ("output", "snapshot_every"): ("snapshot_every", int, False),
    ("output", "format"): ("snapshot_format", str.strip, False),
}
SECTIONS = tuple(dict.fromkeys(s for s, _ in KEYS))


def _key_lines(text):
    """Line number of every ``(section, key)`` for error messages."""
    out, section = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            out.setdefault((section, None), n)
        elif s and s[0] not in "#;" and "=" in s and section:
            out[(section, s.split("=", 1)[0].strip())] = n
    return out


def parse_config(text: str, path=None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (N_v, T0, R)
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("key outside any section", line=e.lineno, path=path) from None
    except configparser.ParsingError as e:
        line, raw = e.errors[0]
        raise ConfigError(f"cannot parse {raw.strip()!r}", line=line, path=path) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as e:
        raise ConfigError(str(e).splitlines()[0], line=e.lineno, path=path) from None
    lines = _key_lines(text)
    kw, gas = {}, {}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", path=path,
                              line=lines.get((section, None)))
        for key, raw in cp.items(section):
            spec = KEYS.get((section, key))
            where = lines.get((section, key))
            if spec is None:
                raise ConfigError(f"unknown key {key!r} in [{section}]", key=key, line=where, path=path)
            name, conv, _ = spec
            try:
                value = conv(raw)
            except ValueError as e:
                raise ConfigError(f"{key}: {e}", key=key, line=where, path=path) from None
            if name.startswith("gas."):
                gas[name[4:]] = value
            else:
                kw[name] = value
    for (section, key), (name, _, required) in KEYS.items():
        if required and name not in kw:
            raise ConfigError(f"missing required key {key!r} in [{section}]", key=key, path=path)
    try:
        return RunConfig(gas=GasProperties(**gas), **kw)
    except ValueError as e:
        field = str(e).split(":", 1)[0]
        found = [sk for sk, spec in KEYS.items() if spec[0] in (field, f"gas.{field}")]
        key = found[0][1] if found else field
        line = lines.get(found[0]) if found else None
        raise ConfigError(f"invalid value: {e}", key=key, line=line, path=path) from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise OSError(f"{path}: {e.strerror or e}") from e
    return parse_config(text, path=str(path))


def _fmt(value):
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def dump_config(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_config(dump_config(c))`` reproduces ``c``."""
    blocks = []
    for section in SECTIONS:
        rows = [f"[{section}]"]
        for (s, key), (name, _, _) in KEYS.items():
            if s != section:
                continue
            value = getattr(cfg.gas, name[4:]) if name.startswith("gas.") else getattr(cfg, name)
            rows.append(f"{key} = {_fmt(value)}")
        blocks.append("\n".join(rows))
    return "\n\n".join(blocks) + "\n"

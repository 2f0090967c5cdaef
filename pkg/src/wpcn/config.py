"""Flat ``key = value`` configuration files.

Keys are :class:`~wpcn.experiments.ScenarioConfig` field names, plus a few
unit-converting aliases handled at parse time:

``p_avg_dbm``, ``p_peak_dbm``
    budgets in dBm, stored in mW;
``gamma_gap_db``, ``phi_db``, ``eps_db``, ``beta_db``
    ratios in dB, stored linear;
``sigma2``
    total noise power, stored as ``noise_psd = sigma2 / bandwidth``.

Lists are comma separated.  ``#`` starts a comment.
"""

import math
from dataclasses import replace

from .experiments import ScenarioConfig, config_fields

DB_KEYS = {
    "gamma_gap_db": "gap",
    "phi_db": "phi",
    "eps_db": "eps",
    "beta_db": "beta",
}
DBM_KEYS = {"p_avg_dbm": "p_avg", "p_peak_dbm": "p_peak"}
_INT_LISTS = {"sweep_num_users"}
_STR_LISTS = {"modes"}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def _float(text):
    v = float(text)
    if math.isnan(v):
        raise ValueError("nan is not allowed")
    return v


def _bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _list(text, item):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    return tuple(item(p) for p in parts)


def _convert(key, text):
    spec = config_fields()[key]
    if key in _STR_LISTS:
        return _list(text, str)
    if key in _INT_LISTS:
        return _list(text, int)
    if spec.type is tuple:
        if text.lower() in ("none", ""):
            return None if spec.default is None else ()
        return _list(text, _float)
    if text.lower() == "none" and spec.default is None:
        return None
    if spec.type is bool:
        return _bool(text)
    if spec.type is int:
        return int(text)
    if spec.type is str:
        return text
    return _float(text)


def parse_pairs(pairs, source="<config>"):
    """Raw ``(line_no, key, value)`` triples to ScenarioConfig keyword values."""
    known = config_fields()
    raw = {}
    for line_no, key, text in pairs:
        where = f"{source}:{line_no}" if line_no else source
        if key in DBM_KEYS or key in DB_KEYS or key == "sigma2":
            try:
                raw[key] = _float(text)
            except ValueError as exc:
                raise ConfigError(f"{where}: invalid value for {key!r}: {exc}") from None
            continue
        if key not in known:
            raise ConfigError(f"{where}: unknown config key {key!r}")
        try:
            raw[key] = _convert(key, text)
        except ValueError as exc:
            raise ConfigError(f"{where}: invalid value for {key!r}: {exc}") from None
    out = {}
    for key, value in raw.items():
        if key in DBM_KEYS:
            out[DBM_KEYS[key]] = 10.0 ** (value / 10.0)
        elif key in DB_KEYS:
            out[DB_KEYS[key]] = 10.0 ** (value / 10.0)
        elif key != "sigma2":
            out[key] = value
    for alias, target in {**DBM_KEYS, **DB_KEYS}.items():
        if alias in raw and target in raw:
            raise ConfigError(f"{source}: both {alias!r} and {target!r} are set")
    if "sigma2" in raw:
        bandwidth = out.get("bandwidth", ScenarioConfig.bandwidth)
        out["noise_psd"] = raw["sigma2"] / bandwidth
    return out


def split_lines(text, source="<config>"):
    pairs = []
    for no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{no}: malformed line, expected 'key = value'")
        key, value = body.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{no}: missing key")
        pairs.append((no, key, value.strip()))
    return pairs


def build_config(values, base=None):
    """Apply parsed values to ``base`` (defaults when omitted)."""
    base = base or ScenarioConfig()
    values = dict(values)
    ratio = values.get("peak_ratio", base.peak_ratio)
    if ratio is not None and "p_peak" not in values:
        values["p_peak"] = ratio * values.get("p_avg", base.p_avg)
    try:
        return replace(base, **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def parse_config(text, source="<config>", base=None):
    return build_config(parse_pairs(split_lines(text, source), source), base)


def load_config(path, overrides=()):
    """Read a config file and apply ``key=value`` overrides.

    Raises
    ------
    ConfigError
        With the file name in the message when the file is missing or bad.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    pairs = split_lines(text, str(path))
    pairs += override_pairs(overrides)
    return build_config(parse_pairs(pairs, str(path)))


def override_pairs(overrides):
    pairs = []
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        pairs.append((0, key.strip(), value.strip()))
    return pairs

"""Flat ``key=value`` run configuration files.

One setting per line, ``#`` starts a comment, blank lines are ignored. Keys
are the long option names of the CLI with dashes or underscores, e.g.::

    # toy training run
    kind = acnn
    s = 1
    epochs = 30
    lr-start = 1e-4
"""

from pathlib import Path


class ConfigError(ValueError):
    pass


def normalize_key(key):
    return key.strip().replace("-", "_")


def read_config(path):
    """Parse a config file into a ``{key: str}`` dict (keys use underscores)."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = normalize_key(key)
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = value.strip()
    return values


def format_value(value):
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    if value is None:
        return ""
    return str(value)


def write_config(path, values, header=None):
    """Write ``values`` sorted by key; the output is readable by :func:`read_config`."""
    lines = [f"# {header}"] if header else []
    lines += [f"{k} = {format_value(v)}" for k, v in sorted(values.items())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

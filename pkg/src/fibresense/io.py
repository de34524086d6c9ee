"""Config loading and deterministic, atomic file output."""

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np
import yaml


class ConfigError(ValueError):
    pass


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header, rows):
    """Write rows with round-trip float formatting (``repr``)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    atomic_write_text(path, buf.getvalue())


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_yaml(path, data):
    atomic_write_text(path, yaml.safe_dump(data, sort_keys=False, default_flow_style=None))


def load_yaml(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return {} if data is None else data


def resolve_section(value, base):
    """A manifest entry is either an inline mapping or a path relative to the manifest."""
    if value is None or isinstance(value, dict):
        return value
    if isinstance(value, str):
        return load_yaml(Path(base) / value)
    raise ConfigError(f"expected a mapping or a file name, got {value!r}")


def load_manifest(path):
    """Load a run manifest and inline every referenced config file."""
    path = Path(path)
    raw = load_yaml(path)
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: manifest must be a mapping")
    out = dict(raw)
    for key in ("model", "excitation", "noise", "protocol", "train", "sweep"):
        if key in raw:
            out[key] = resolve_section(raw[key], path.parent)
    return out

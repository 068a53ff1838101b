"""Run configuration and result files.

Config files are flat ``key = value`` text (an optional ``[run]`` header is
allowed); command-line flags override file keys. Series are written as CSV at
nine significant digits with a JSON provenance sidecar.
"""

import configparser
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .model import DriveSchedule, InitialState, SystemParams
from .validation import ConfigError

CSV_COLUMNS = ("t", "E_re", "E_im", "P", "P_sem", "G2", "G2_sem", "g2", "g2_lo", "g2_hi",
               "S2", "S2_sem", "beyond_tlimit")
FLOAT_FORMAT = "%.9g"
MODES = ("simulate", "oracle", "dicke", "compare", "sample-check")

ALIASES = {"trajectories": "n_trajectories", "n": "n_atoms", "atoms": "n_atoms", "t-end": "t_end",
           "initial_state": "initial", "init": "initial", "stride": "output_stride"}


@dataclass
class RunConfig:
    mode: str = "simulate"
    n_atoms: int = 10
    beta: list = field(default_factory=lambda: [1.0])
    drive: DriveSchedule = field(default_factory=DriveSchedule)
    dt: float = 1e-3
    t_end: float = 3.0
    output_stride: int = 10
    n_trajectories: int = 10_000
    seed: int = 0
    theta_min: float = 1e-6
    initial: str = "inverted"
    out: str = "series.csv"
    format: str = "csv"
    workers: int = None
    resamples: int = 400
    dt_oracle: float = 1e-3
    oracle: str = "exact"
    path: str = "auto"
    threshold: float = 3.0
    compare_t_max: float = None

    def system_params(self):
        beta = self.beta[0] if len(self.beta) == 1 else self.beta
        return SystemParams(
            n_atoms=self.n_atoms, beta=beta, drive=self.drive, dt=self.dt, t_end=self.t_end,
            output_stride=self.output_stride, n_trajectories=self.n_trajectories, seed=self.seed,
            theta_min=self.theta_min,
        )

    def initial_state(self):
        return InitialState.from_shorthand(_parse_initial(self.initial), self.n_atoms)

    def echo(self):
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, DriveSchedule):
                value = [[a, b, [c.real, c.imag]] for a, b, c in value.segments]
            out[f.name] = value
        return out


def _parse_initial(text):
    if not isinstance(text, str):
        return text
    text = text.strip()
    if "," in text:
        try:
            rows = [[float(x) for x in row.split(",")] for row in text.split(";") if row.strip()]
        except ValueError:
            raise ConfigError(f"bad Bloch vector list {text!r}") from None
        if any(len(r) != 3 for r in rows):
            raise ConfigError("Bloch vectors need three components u,v,w")
        return np.array(rows)
    try:
        return float(text)
    except ValueError:
        return text


def parse_complex(text):
    try:
        return complex(str(text).replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ConfigError(f"bad complex amplitude {text!r}") from None


def parse_drive(text):
    """``alpha`` for a constant drive, or ``t0:t1:alpha`` segments separated by ``;``."""
    text = str(text).strip()
    if not text:
        return DriveSchedule()
    if ":" not in text:
        alpha = parse_complex(text)
        return DriveSchedule() if alpha == 0 else DriveSchedule.constant(alpha)
    segments = []
    for part in text.split(";"):
        if not part.strip():
            continue
        bits = part.split(":")
        if len(bits) != 3:
            raise ConfigError(f"drive segment {part!r} is not t0:t1:alpha")
        try:
            segments.append((float(bits[0]), float(bits[1]), parse_complex(bits[2])))
        except ValueError:
            raise ConfigError(f"bad drive segment {part!r}") from None
    drive = DriveSchedule(tuple(segments))
    drive.check()
    return drive


def _convert(key, value):
    typed = {f.name: f.type for f in fields(RunConfig)}
    if key == "beta":
        try:
            return [float(x) for x in str(value).replace(";", ",").split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"bad beta list {value!r}") from None
    if key in ("drive", "alpha"):
        return parse_drive(value)
    if key in ("initial", "mode", "out", "format", "oracle", "path"):
        return str(value).strip()
    if value is None or str(value).strip().lower() in ("", "none"):
        return None
    kind = typed[key]
    try:
        if kind is int:
            number = float(value)
            if number != int(number):
                raise ValueError
            return int(number)
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {value!r}") from None


def read_config_file(path):
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    raw = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            raw[key] = value
    return raw


def build_config(raw, overrides=None, mode=None):
    """Merge file keys with flag overrides (flags win) into a :class:`RunConfig`."""
    known = {f.name for f in fields(RunConfig)} | {"alpha"}
    merged = {}
    for source in (raw or {}, overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            key = ALIASES.get(key.strip().lower().replace("-", "_"), key.strip().lower().replace("-", "_"))
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            merged["drive" if key == "alpha" else key] = _convert(key, value)
    if mode is not None:
        merged["mode"] = mode
    cfg = RunConfig(**merged)
    if cfg.mode not in MODES:
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    if cfg.format not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg.format!r}")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return cfg


def series_table(series):
    """Columns of the CSV schema as a float array, shape ``(T, 13)``."""
    E = np.asarray(series.E, dtype=complex)
    return np.column_stack([
        series.t, E.real, E.imag, series.P, series.sem_P, series.G2, series.sem_G2,
        series.g2, series.g2_lo, series.g2_hi, series.S2, series.sem_S2,
        np.asarray(series.beyond_limit, dtype=float),
    ])


def write_series_csv(series, path):
    table = series_table(series)
    lines = [",".join(CSV_COLUMNS)]
    for row in table:
        cells = [FLOAT_FORMAT % v for v in row[:-1]] + [str(int(row[-1]))]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_series_json(series, path, meta=None):
    table = series_table(series)
    payload = {"columns": list(CSV_COLUMNS),
               "rows": [[float(FLOAT_FORMAT % v) for v in row] for row in table]}
    if meta is not None:
        payload["meta"] = meta
    Path(path).write_text(json.dumps(payload, indent=1, allow_nan=True) + "\n")


def read_series_csv(path):
    """Return a dict of column arrays from a file written by :func:`write_series_csv`."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return {name: data[:, i] for i, name in enumerate(header)}


def sidecar_path(out):
    out = Path(out)
    return out.with_name(out.name + ".json") if out.suffix != ".json" else out.with_suffix(".meta.json")


def write_sidecar(path, payload):
    def default(obj):
        if isinstance(obj, np.generic):
            return obj.item()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, complex):
            return [obj.real, obj.imag]
        raise TypeError(f"cannot serialise {type(obj).__name__}")

    Path(path).write_text(json.dumps(payload, indent=2, default=default, sort_keys=True) + "\n")

"""Experiment configuration: a flat key-value text file with sections.

Every schedule and learning rate is configurable; defaults are the
desk-scale geometry (64x64, T=16) with the published training constants.
``seed`` is mandatory so no run is silently irreproducible.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

MODES = ("sensing-fixed-ratio", "sensing-learned-ratio",
         "fixed-sensing-link", "joint-sensing-link")
PIPELINES = ("SemCom", "SemCom+noRAN", "Compr+Cap", "Compr+LDPC", "Sensordata+JSCC")


@dataclass
class ExperimentConfig:
    seed: int
    # dataset
    scene_kind: str = "mixed"
    velocity: float = 1.0
    n_train: int = 200
    n_test: int = 50
    # geometry
    height: int = 64
    width: int = 64
    frames: int = 16
    # experiment
    mode: str = "sensing-learned-ratio"
    pipeline: str = "SemCom"
    mask_enabled: bool = False
    # schedules
    lambdas: tuple[float, ...] = (5e-3, 5e-2, 0.5)
    mus: tuple[float, ...] = (1e-3, 0.3, 1.0)
    betas: tuple[float, ...] = (1e-7, 1e-6, 1e-5)
    channel_dims: tuple[int, ...] = (16, 32, 48)
    fixed_ratio_counts: tuple[int, ...] = (1, 2, 4, 8)
    epochs: int = 30
    pretrain_epochs: int = 30
    lr_policy: float = 0.5
    lr_recon: float = 1e-3
    lr_coders: float = 1e-3
    lr_ran: float = 0.05
    # channel / link budget
    channel_kind: str = "awgn"
    snr_db: float = 10.0
    code_rate: float = 2 / 3
    modulation_order: int = 16
    symbols_per_unit: int = 12
    # output
    out_dir: str = "runs"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode {self.mode!r} not one of {MODES}")
        if self.pipeline not in PIPELINES:
            raise ValueError(f"pipeline {self.pipeline!r} not one of {PIPELINES}")
        for name in ("lambdas", "mus", "betas", "channel_dims", "fixed_ratio_counts"):
            if not getattr(self, name):
                raise ValueError(f"schedule {name} must be non-empty")
        if self.height % 8 or self.width % 8:
            raise ValueError("geometry must be divisible by 8")


_SECTIONS = {
    "dataset": ("scene_kind", "velocity", "n_train", "n_test"),
    "geometry": ("height", "width", "frames"),
    "experiment": ("mode", "pipeline", "seed", "mask_enabled"),
    "schedules": ("lambdas", "mus", "betas", "channel_dims", "fixed_ratio_counts",
                  "epochs", "pretrain_epochs",
                  "lr_policy", "lr_recon", "lr_coders", "lr_ran"),
    "channel": ("channel_kind", "snr_db"),
    "link": ("code_rate", "modulation_order", "symbols_per_unit"),
    "output": ("out_dir",),
}

_TUPLE_FIELDS = {"lambdas": float, "mus": float, "betas": float,
                 "channel_dims": int, "fixed_ratio_counts": int}


def _parse_value(name: str, raw: str, kind):
    raw = raw.strip()
    if name in _TUPLE_FIELDS:
        return tuple(_TUPLE_FIELDS[name](tok) for tok in raw.split())
    if kind is bool:
        if raw.lower() in ("true", "yes", "1", "on"):
            return True
        if raw.lower() in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"{name}: not a boolean: {raw!r}")
    if name == "code_rate" and "/" in raw:
        num, den = raw.split("/")
        return float(num) / float(den)
    return kind(raw)


def load_config(path: str | Path, *, seed: int | None = None,
                out_dir: str | None = None) -> ExperimentConfig:
    """Read a config file; ``seed`` and ``out_dir`` override the file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(path)
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    type_map = {"int": int, "float": float, "str": str, "bool": bool}
    values: dict = {}
    for section, names in _SECTIONS.items():
        if not parser.has_section(section):
            continue
        for name in names:
            if parser.has_option(section, name):
                kind = type_map.get(kinds[name], str)
                values[name] = _parse_value(name, parser.get(section, name), kind)
    if seed is not None:
        values["seed"] = seed
    if out_dir is not None:
        values["out_dir"] = out_dir
    if "seed" not in values:
        raise ValueError(f"{path}: [experiment] seed is mandatory")
    return ExperimentConfig(**values)


def write_config(cfg: ExperimentConfig, path: str | Path) -> None:
    """Serialize a config in the section layout ``load_config`` reads."""
    parser = configparser.ConfigParser()
    for section, names in _SECTIONS.items():
        parser.add_section(section)
        for name in names:
            value = getattr(cfg, name)
            if isinstance(value, tuple):
                value = " ".join(repr(v) for v in value)
            parser.set(section, name, str(value))
    with open(path, "w") as fh:
        parser.write(fh)

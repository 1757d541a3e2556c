"""Experiment configuration: flat ``key = value`` files with # comments.

Command-line ``--set key=value`` pairs override file keys, which override
the defaults below. Unknown keys are rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np


def _triple(text: str) -> tuple:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated values, got {text!r}")
    return tuple(parts)


def _int_tuple(text: str) -> tuple:
    return tuple(int(v) for v in text.split(","))


_PARSERS = {
    "hover_height": float,
    "amplitude": float,
    "p2p_distance": float,
    "total_span": float,
    "speed": float,
    "sample_rate": float,
    "heading": float,
    "num_trajectories": int,
    "accel_bias": _triple,
    "gyro_bias": _triple,
    "accel_noise_std": float,
    "gyro_noise_std": float,
    "seed": int,
    "window_size": int,
    "stride": int,
    "batch_size": int,
    "lr": float,
    "epochs": int,
    "runs": int,
    "dropout": float,
    "test_fraction": float,
    "conv_channels": _int_tuple,
    "dense_widths": _int_tuple,
    "out_dir": str,
}


@dataclass(frozen=True)
class ExperimentConfig:
    # trajectory profile
    hover_height: float = 0.7
    amplitude: float = 0.1
    p2p_distance: float = 0.7
    total_span: float = 3.6
    speed: float = 0.18
    sample_rate: float = 100.0
    heading: float = 0.0
    num_trajectories: int = 8
    # IMU error model
    accel_bias: tuple = (0.0, 0.0, 0.0)
    gyro_bias: tuple = (0.0, 0.0, 0.0)
    accel_noise_std: float = 0.05
    gyro_noise_std: float = 0.002
    seed: int = 17
    # windowing
    window_size: int = 100
    stride: int = 50
    # training
    batch_size: int = 64
    lr: float = 1e-3
    epochs: int = 30
    runs: int = 3
    dropout: float = 0.2
    test_fraction: float = 0.25
    conv_channels: tuple = ()   # empty = architecture default
    dense_widths: tuple = ()    # empty = architecture default
    # output
    out_dir: str = "runs/exp"


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into typed values."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _PARSERS:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _PARSERS[key](val)
    return values


def load_config(path=None, overrides=None) -> ExperimentConfig:
    """Defaults, overridden by a config file, overridden by CLI pairs."""
    cfg = ExperimentConfig()
    if path is not None:
        with open(path) as fh:
            cfg = replace(cfg, **parse_config_text(fh.read()))
    if overrides:
        parsed = {}
        for item in overrides:
            key, _, val = item.partition("=")
            key = key.strip()
            if key not in _PARSERS:
                raise ValueError(f"unknown config key {key!r}")
            parsed[key] = _PARSERS[key](val.strip())
        cfg = replace(cfg, **parsed)
    return cfg

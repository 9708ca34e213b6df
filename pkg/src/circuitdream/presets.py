"""Named training/dreaming configurations shipped as JSON files in ``presets/``."""

from __future__ import annotations

import json
from dataclasses import replace
from importlib import resources
from typing import Iterator

from .dreaming import DreamConfig
from .neuralnet import TrainConfig

PRESET_NAMES = ("A_s", "B_s", "C_s", "A_l", "B_l", "C_l", "ry_cnot", "xy_y")


def load_preset(name: str) -> dict:
    if name not in PRESET_NAMES:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    text = resources.files(__package__).joinpath("presets", f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


def train_config(preset: dict, desk: bool = False, **overrides) -> TrainConfig:
    """Training config of a preset; ``desk`` applies the small-scale overrides."""
    values = dict(preset["train"])
    if desk:
        values.update(preset["desk"]["train"])
    values.update(overrides)
    values["hidden"] = tuple(values["hidden"])
    values["noise"] = tuple(values["noise"])
    return TrainConfig(**values)


def dream_config(preset: dict, **overrides) -> DreamConfig:
    values = dict(preset["dream"])
    values.update(overrides)
    values["noise"] = tuple(values["noise"])
    return DreamConfig(**values)


def sweep_configs(preset: dict, base: TrainConfig) -> Iterator[tuple[str, TrainConfig]]:
    """Every grid point of the preset's search, each varying one group from ``base``.

    Yields ``(label, config)`` for the architecture, learning-rate and noise
    rounds, then the loss/optimizer/weight-decay grid.
    """
    grid = preset["search"]
    for hidden in grid["architectures"]:
        yield f"arch-{'x'.join(map(str, hidden))}", replace(base, hidden=tuple(hidden))
    for lr in grid["learning_rates"]:
        yield f"lr-{lr:.0e}", replace(base, lr=lr)
    for upper in grid["noise_upper"]:
        yield f"noise-{upper:.2f}", replace(base, noise=(base.noise[0], upper))
    for loss in grid["losses"]:
        yield f"{loss}-adam", replace(base, loss=loss, optimizer="adam", weight_decay=0.0)
        for wd in grid["weight_decays"]:
            yield f"{loss}-adamw-wd{wd:g}", replace(base, loss=loss, optimizer="adamw", weight_decay=wd)

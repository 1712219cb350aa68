"""Figure specs: JSON files naming the inputs, axis scales, and output image.

Input entries may be glob patterns (resolved against the data directory and
sorted), so one checked-in spec serves both desk-scale and full-scale data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

KINDS = ("snapshots", "error_curves", "min_nodes_fit", "velocity_times", "size_scaling")
SCALES = ("linear", "log")


@dataclass(frozen=True)
class PlotSpec:
    figure: str
    kind: str
    inputs: tuple[str, ...]
    x_scale: str
    y_scale: str
    output: str
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown plot kind {self.kind!r}; known: {', '.join(KINDS)}")
        if self.x_scale not in SCALES or self.y_scale not in SCALES:
            raise ValueError(f"axis scales must be one of {SCALES}")
        if not self.inputs:
            raise ValueError("spec needs at least one input")


def load_spec(path) -> PlotSpec:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot load plot spec {path}: {exc}")
    try:
        return PlotSpec(
            figure=raw["figure"],
            kind=raw["kind"],
            inputs=tuple(raw["inputs"]),
            x_scale=raw.get("x_scale", "linear"),
            y_scale=raw.get("y_scale", "linear"),
            output=raw.get("output", f"{raw['figure']}.png"),
            title=raw.get("title", ""),
        )
    except KeyError as exc:
        raise ValueError(f"{path}: spec is missing required field {exc}")


def resolve_inputs(spec: PlotSpec, data_dir) -> list[Path]:
    """Expand each input (name or glob) against data_dir; every entry must hit."""
    data_dir = Path(data_dir)
    out: list[Path] = []
    for entry in spec.inputs:
        if any(ch in entry for ch in "*?["):
            matches = sorted(data_dir.glob(entry))
            if not matches:
                raise FileNotFoundError(f"{spec.figure}: no input matches {entry!r} in {data_dir}")
            out.extend(matches)
        else:
            path = data_dir / entry
            if not path.exists():
                raise FileNotFoundError(f"{spec.figure}: missing input {path}")
            out.append(path)
    return out

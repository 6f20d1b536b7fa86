"""Synthetic grayscale videos of a moving bright square, plus raw frame IO.

File format: one ASCII header line ``width height frames`` followed by the
raw 8-bit frames back to back, row-major.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .rng import SubStream

BACKGROUND = 30
FOREGROUND = 200


@dataclass(frozen=True)
class VideoSpec:
    width: int = 64
    height: int = 64
    frames: int = 30
    vx: float = 2.0
    vy: float = 0.0
    noise: float = 0.0
    start_x: float | None = None  # defaults to width / 4
    start_y: float | None = None  # defaults to height / 2
    square_half: int = 4

    def start(self) -> tuple[float, float]:
        x = self.width / 4 if self.start_x is None else self.start_x
        y = self.height / 2 if self.start_y is None else self.start_y
        return x, y


def square_position(spec: VideoSpec, t: int) -> tuple[int, int]:
    """Analytic integer center of the square in frame t."""
    x0, y0 = spec.start()
    return int(round(x0 + spec.vx * t)), int(round(y0 + spec.vy * t))


def gen_video(spec: VideoSpec, seed: int) -> np.ndarray:
    if spec.width < 2 or spec.height < 2 or spec.frames < 1:
        raise ConfigError("video needs positive dimensions and at least one frame")
    if spec.square_half < 1:
        raise ConfigError("square_half must be >= 1")
    if spec.noise < 0:
        raise ConfigError("noise must be >= 0")
    stream = SubStream(seed, "video-noise")
    frames = np.empty((spec.frames, spec.height, spec.width), dtype=np.uint8)
    for t in range(spec.frames):
        frame = np.full((spec.height, spec.width), BACKGROUND, dtype=np.int64)
        cx, cy = square_position(spec, t)
        x0, x1 = max(0, cx - spec.square_half), min(spec.width - 1, cx + spec.square_half)
        y0, y1 = max(0, cy - spec.square_half), min(spec.height - 1, cy + spec.square_half)
        if x0 <= x1 and y0 <= y1:
            frame[y0 : y1 + 1, x0 : x1 + 1] = FOREGROUND
        if spec.noise > 0:
            g = stream.generator(t)
            frame = frame + np.rint(g.standard_normal(frame.shape) * spec.noise).astype(np.int64)
        frames[t] = np.clip(frame, 0, 255).astype(np.uint8)
    return frames


def write_video(path, frames: np.ndarray) -> None:
    n, height, width = frames.shape
    with open(path, "wb") as fh:
        fh.write(f"{width} {height} {n}\n".encode())
        fh.write(frames.tobytes())


def read_video(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().decode()
        try:
            width, height, n = (int(v) for v in header.split())
        except ValueError as exc:
            raise ConfigError(f"bad video header {header!r}") from exc
        data = fh.read()
    expected = width * height * n
    if len(data) != expected:
        raise ConfigError(f"video payload is {len(data)} bytes, expected {expected}")
    return np.frombuffer(data, dtype=np.uint8).reshape(n, height, width).copy()

"""Camera-shake and light-streak trajectories.

A trajectory is a time-ordered list of subpixel (dx, dy) displacements
relative to the start pose.  It is produced by a velocity-driven Markov
random walk: at each step the velocity receives a Gaussian perturbation,
a centripetal pull back toward the origin, and (with small probability)
an impulsive jerk, then the position integrates the velocity.  The walk
is rescaled at the end so the largest per-axis displacement stays within
a configured pixel bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import ConfigurationError, rng_from

IMPULSE_SCALE = 5.0  # jerk sigma relative to step_sigma


@dataclass(frozen=True)
class MotionConfig:
    """Parameters of the random-walk generator."""

    num_samples: int = 100
    max_shift: float = 30.0
    step_sigma: float = 0.5
    centripetal_gain: float = 0.1
    impulse_prob: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if int(self.num_samples) != self.num_samples or self.num_samples < 1:
            raise ConfigurationError(f"num_samples must be an integer >= 1, got {self.num_samples}")
        if not self.max_shift > 0:
            raise ConfigurationError(f"max_shift must be > 0, got {self.max_shift}")
        if self.step_sigma < 0:
            raise ConfigurationError(f"step_sigma must be >= 0, got {self.step_sigma}")
        if not 0.0 <= self.impulse_prob <= 1.0:
            raise ConfigurationError(f"impulse_prob must lie in [0, 1], got {self.impulse_prob}")


@dataclass(frozen=True)
class Trajectory:
    """Ordered (dx, dy) displacement samples; samples[0] is always (0, 0)."""

    samples: np.ndarray = field(default_factory=lambda: np.zeros((1, 2)))

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64).reshape(-1, 2)
        if arr.shape[0] < 1:
            raise ValueError("trajectory needs at least one sample")
        if not np.all(np.isfinite(arr)):
            raise ValueError("trajectory samples must be finite")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def max_abs_shift(self) -> float:
        """Largest per-axis displacement over the whole trajectory."""
        return float(np.abs(self.samples).max())

    @property
    def mean_displacement(self) -> tuple[float, float]:
        m = self.samples.mean(axis=0)
        return float(m[0]), float(m[1])

    def to_list(self) -> list[float]:
        """Flat [dx0, dy0, dx1, dy1, ...] list for manifests."""
        return [float(v) for v in self.samples.ravel()]

    @classmethod
    def from_list(cls, flat) -> "Trajectory":
        return cls(np.asarray(flat, dtype=np.float64).reshape(-1, 2))


def simulate_walk(rng: np.random.Generator, config: MotionConfig, steps: int,
                  p0=(0.0, 0.0), v0=(0.0, 0.0)):
    """Advance the walk ``steps`` times from state (p0, v0).

    Returns (positions after each step as an (steps, 2) array, final
    position, final velocity).  The next state depends only on the
    current (position, velocity) and the generator, which is what makes
    the process Markovian and the suffix reproducible from any
    intermediate state.
    """
    p = np.asarray(p0, dtype=np.float64).copy()
    v = np.asarray(v0, dtype=np.float64).copy()
    out = np.empty((steps, 2))
    for t in range(steps):
        dv = rng.normal(0.0, config.step_sigma, size=2)
        if rng.random() < config.impulse_prob:
            dv += rng.normal(0.0, IMPULSE_SCALE * config.step_sigma, size=2)
        v = v + dv - config.centripetal_gain * p
        p = p + v
        out[t] = p
    return out, p, v


def generate_trajectory(config: MotionConfig) -> Trajectory:
    """Run the seeded walk and rescale it into the max_shift bound."""
    config.validate()
    rng = rng_from(config.seed)
    positions, _, _ = simulate_walk(rng, config, config.num_samples - 1)
    samples = np.vstack([np.zeros((1, 2)), positions])
    return rescale_trajectory(Trajectory(samples), config.max_shift)


def rescale_trajectory(traj: Trajectory, max_shift: float) -> Trajectory:
    """Uniformly scale so the max-norm displacement equals min(current, bound).

    The bound is per-axis (max-norm) because flow shifts are constrained
    per axis in pixels.  An all-zero trajectory is returned unchanged.
    """
    current = traj.max_abs_shift
    if current <= max_shift or current == 0.0:
        return traj
    return Trajectory(traj.samples * (max_shift / current))

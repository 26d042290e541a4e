"""Straight line through the origin, ``y = theta * x``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LinearModel:
    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        if not np.all(np.isfinite(x)):
            raise ValueError("evaluation points must be finite")
        object.__setattr__(self, "x", x)

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        return theta[0] * self.x

    def evaluate_batch(self, thetas) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return thetas[:, :1] * self.x[None, :]


def linear_eval(t: float, sigma_b: float, x) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form moments of ``(t + sigma_b * xi) * x``; measurement noise excluded."""
    if sigma_b < 0:
        raise ValueError("sigma_b must be >= 0")
    x = np.asarray(x, dtype=float)
    return t * x, sigma_b * np.abs(x)

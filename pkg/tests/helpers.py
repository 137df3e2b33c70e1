"""Shared test utilities: hand-built paths and a bounded-support test family."""

from __future__ import annotations

import numpy as np

from balkwise.model import ParamSpace, ValueFamily
from balkwise.simulator import QueuePath


def make_path(states, holds=None, price: float = 0.0) -> QueuePath:
    """QueuePath from a raw state sequence (unit holds unless given)."""
    states = np.asarray(states, dtype=np.int64)
    ups = states[1:] > states[:-1]
    if holds is None:
        holds = np.ones(len(ups))
    holds = np.asarray(holds, dtype=float)
    return QueuePath(
        states=states,
        ups=ups,
        holds=holds,
        revenue=price * int(ups.sum()),
        total_time=float(holds.sum()),
    )


class UniformValueFamily(ValueFamily):
    """Service values uniform on [theta, theta + width]; parameter is the offset.

    Attains cdf values of exactly 0 (below the support) and 1 (above it), so
    it exercises the structurally-deterministic transition handling that the
    exponential family never reaches.
    """

    def __init__(self, width: float, lower: float, upper: float):
        self.width = float(width)
        self.param_space = ParamSpace([lower], [upper])

    def cdf(self, r, theta):
        loc = self.param_space.require(theta)[0]
        r = np.asarray(r, dtype=float)
        out = np.clip((r - loc) / self.width, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def grad_cdf(self, r, theta):
        loc = self.param_space.require(theta)[0]
        r = np.asarray(r, dtype=float)
        inside = (r > loc) & (r < loc + self.width)
        g = np.where(inside, -1.0 / self.width, 0.0)
        if g.ndim == 0:
            return np.array([float(g)])
        return g[:, None]

    def hess_cdf(self, r, theta):
        self.param_space.require(theta)
        r = np.asarray(r, dtype=float)
        if r.ndim == 0:
            return np.zeros((1, 1))
        return np.zeros((len(r), 1, 1))

    def quantile(self, u, theta):
        loc = self.param_space.require(theta)[0]
        return loc + u * self.width

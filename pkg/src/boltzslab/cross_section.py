"""Collision cross sections B(|V|, theta) = |V|^gamma * beta(theta).

Hard potentials only (0 < gamma <= 1).  The angular factor beta must obey
the cutoff bound beta(theta) <= C cos(theta) sin(theta), which keeps the
gain and loss parts of the collision integral separately integrable; the
bound is enforced on a dense sample at construction time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class CutoffReport:
    ok: bool
    max_ratio: float
    worst_theta: float
    n_samples: int


@dataclass(frozen=True)
class CrossSectionModel:
    """Velocity exponent gamma, angular factor beta, and cutoff constant C."""

    gamma: float
    beta: Callable[[float], float]
    cutoff_const: float
    name: str = "custom"
    validate_samples: int = field(default=1024, repr=False)

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not self.cutoff_const > 0.0:
            raise ValueError("cutoff_const must be > 0")
        thetas = np.linspace(0.0, HALF_PI, self.validate_samples)
        vals = np.array([self.beta(t) for t in thetas])
        if np.any(vals < -1e-15):
            raise ValueError("beta(theta) must be nonnegative on [0, pi/2]")
        ok, _ = check_grad_cutoff(self, self.validate_samples, _skip_construction_check=True)
        if not ok:
            raise ValueError(
                "beta(theta) violates the angular cutoff bound "
                "beta <= C cos(theta) sin(theta)"
            )


def hard_sphere() -> CrossSectionModel:
    """gamma = 1, beta = cos(theta) sin(theta), C = 1."""
    return CrossSectionModel(
        gamma=1.0,
        beta=lambda t: math.cos(t) * math.sin(t),
        cutoff_const=1.0,
        name="hard_sphere",
    )


def evaluate_B(model: CrossSectionModel, v_rel: float, theta: float) -> float:
    """B(|V|, theta) = v_rel^gamma * beta(theta); zero iff v_rel or beta is zero."""
    if v_rel < 0.0:
        raise ValueError(f"relative speed must be >= 0, got {v_rel}")
    if not 0.0 <= theta <= HALF_PI + 1e-15:
        raise ValueError(f"theta must be in [0, pi/2], got {theta}")
    if v_rel == 0.0:
        return 0.0
    return v_rel**model.gamma * model.beta(theta)


def check_grad_cutoff(
    model: CrossSectionModel,
    n_samples: int = 1024,
    _skip_construction_check: bool = False,
) -> tuple[bool, CutoffReport]:
    """Sampled check of beta(theta) <= C cos(theta) sin(theta) on [0, pi/2].

    The returned report carries the maximum of beta/(cos sin) over interior
    samples (the endpoints are excluded since cos*sin vanishes there).
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    thetas = np.linspace(0.0, HALF_PI, n_samples)
    ok = True
    max_ratio = 0.0
    worst = 0.0
    for t in thetas:
        cs = math.cos(t) * math.sin(t)
        b = model.beta(t)
        bound = model.cutoff_const * cs
        if b > bound + 1e-12 * max(1.0, abs(bound)):
            ok = False
        if cs > 1e-12:
            r = b / cs
            if r > max_ratio:
                max_ratio = r
                worst = t
    return ok, CutoffReport(ok=ok, max_ratio=max_ratio, worst_theta=worst, n_samples=n_samples)


def beta_from_table(path: str) -> Callable[[float], float]:
    """Angular factor from a two-column text file (theta, beta), linearly interpolated."""
    data = np.loadtxt(path)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError(f"expected two columns (theta, beta) in {path}")
    th, bv = data[:, 0], data[:, 1]
    order = np.argsort(th)
    th, bv = th[order], bv[order]
    if th[0] < -1e-12 or th[-1] > HALF_PI + 1e-12:
        raise ValueError("tabulated theta values must lie in [0, pi/2]")

    def beta(t: float) -> float:
        return float(np.interp(t, th, bv))

    return beta


def model_from_config(kind: str, gamma: float = 1.0, cutoff_const: float = 1.0,
                      table_path: str | None = None) -> CrossSectionModel:
    """Build a model from a config selection: 'hard_sphere' or 'table'."""
    if kind == "hard_sphere":
        return hard_sphere()
    if kind == "table":
        if table_path is None:
            raise ValueError("table cross section requires a file path")
        return CrossSectionModel(
            gamma=gamma, beta=beta_from_table(table_path),
            cutoff_const=cutoff_const, name=f"table:{table_path}",
        )
    raise ValueError(f"unknown cross-section selection {kind!r}")

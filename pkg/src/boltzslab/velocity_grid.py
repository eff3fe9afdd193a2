"""Axisymmetric velocity grid: tensor product of an axial grid in zeta1 and
a radial grid in zeta_r, with quadrature weights carrying the 2 pi zeta_r
azimuthal Jacobian.

The axial grid is symmetric about zeta1 = 0 with no node at 0; each half is
a Gauss-Legendre rule mapped exponentially toward the origin so the
smallest |zeta1| node sits near min_frac * zeta_max.  That clustering is
what resolves the grazing-velocity boundary layer that drives the
logarithmic behaviour of moment gradients at the walls.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

PI32 = math.pi ** 1.5


@dataclass
class VelocityGrid:
    """Discrete velocity nodes (zeta1_i, zeta_r_i) and quadrature weights."""

    z1_levels: np.ndarray      # (n1,) sorted, symmetric about 0, no zero
    zr_levels: np.ndarray      # (nr,) sorted, in (0, zeta_max)
    w1: np.ndarray             # (n1,) axial weights
    wr: np.ndarray             # (nr,) radial weights, include 2 pi zeta_r
    azimuthal_order: int
    zeta_max: float
    mass_tol: float = 1e-3
    zeta1: np.ndarray = field(init=False)
    zeta_r: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)
    mass_defect: float = field(init=False)

    def __post_init__(self):
        n1, nr = len(self.z1_levels), len(self.zr_levels)
        if np.any(self.z1_levels == 0.0):
            raise ValueError("axial grid must not contain zeta1 = 0")
        if not np.all(np.diff(self.z1_levels) > 0):
            raise ValueError("axial levels must be strictly increasing")
        if np.any(self.zr_levels < 0):
            raise ValueError("radial levels must be >= 0")
        Z1, ZR = np.meshgrid(self.z1_levels, self.zr_levels, indexing="ij")
        W = np.outer(self.w1, self.wr)
        self.zeta1 = Z1.ravel()
        self.zeta_r = ZR.ravel()
        self.weights = W.ravel()
        if np.any(self.weights <= 0):
            raise ValueError("all quadrature weights must be positive")
        # Maxwellian mass check: the discrete integral of w = pi^{-3/2} e^{-|zeta|^2}
        # must sit in [1 - mass_tol, 1]. If the raw rule lands epsilon above 1,
        # scale the weights down so the one-sided invariant holds exactly.
        mass = float(np.sum(self.weights * self.maxwellian()))
        if mass > 1.0:
            scale = (1.0 - 1e-12) / mass
            self.w1 = self.w1 * scale
            self.weights = self.weights * scale
            mass = float(np.sum(self.weights * self.maxwellian()))
        self.mass_defect = 1.0 - mass
        if not (0.0 <= self.mass_defect <= self.mass_tol):
            raise ValueError(
                f"Maxwellian mass defect {self.mass_defect:.3e} outside [0, {self.mass_tol}]"
            )

    @property
    def n_nodes(self) -> int:
        return self.zeta1.size

    def speed(self) -> np.ndarray:
        return np.hypot(self.zeta1, self.zeta_r)

    def maxwellian(self) -> np.ndarray:
        """w(zeta) = pi^{-3/2} exp(-|zeta|^2) at the nodes."""
        return np.exp(-(self.zeta1**2 + self.zeta_r**2)) / PI32

    def sqrt_maxwellian(self) -> np.ndarray:
        return np.exp(-0.5 * (self.zeta1**2 + self.zeta_r**2)) / math.pi**0.75

    def node_index(self, i1: int, ir: int) -> int:
        return i1 * len(self.zr_levels) + ir

    def positive_mask(self) -> np.ndarray:
        return self.zeta1 > 0

    def reflect_index(self) -> np.ndarray:
        """Node permutation mapping zeta1 -> -zeta1 (grid is symmetric)."""
        n1, nr = len(self.z1_levels), len(self.zr_levels)
        idx = np.arange(n1 * nr).reshape(n1, nr)
        return idx[::-1, :].ravel()

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for arr in (self.z1_levels, self.zr_levels, self.w1, self.wr):
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        h.update(np.int64(self.azimuthal_order).tobytes())
        h.update(np.float64(self.zeta_max).tobytes())
        return h.hexdigest()


def _half_axis(n_half: int, zeta_max: float, min_frac: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule on (0, zeta_max] under the map z = zmax * t * e^(kappa(t-1)).

    The map covers the whole interval (z -> 0 with t -> 0, so no mass is
    lost near the origin) while clustering nodes geometrically toward 0;
    kappa is chosen so the innermost node lands at min_frac * zeta_max.
    Weights glw * dz/dt are strictly positive.
    """
    t, glw = np.polynomial.legendre.leggauss(n_half)
    t = 0.5 * (t + 1.0)
    glw = 0.5 * glw
    kappa = max(0.0, math.log(t[0] / min_frac) / (1.0 - t[0]))
    expf = np.exp(kappa * (t - 1.0))
    z = zeta_max * t * expf
    w = glw * zeta_max * expf * (1.0 + kappa * t)
    return z, w


def make_grid(
    n_zeta1: int = 32,
    n_zeta_r: int = 16,
    zeta_max: float = 6.0,
    min_frac: float = 1e-3,
    azimuthal_order: int = 12,
    mass_tol: float = 1e-3,
) -> VelocityGrid:
    """Default grid factory.

    n_zeta1 is the total axial count (split evenly over the two signs),
    n_zeta_r the radial count.  zeta_max = 6 puts the Gaussian tail below
    1e-15.
    """
    if n_zeta1 % 2 != 0:
        raise ValueError("n_zeta1 must be even (symmetric halves)")
    if n_zeta1 < 6 or n_zeta_r < 2:
        raise ValueError("grid too small")
    zp, wp = _half_axis(n_zeta1 // 2, zeta_max, min_frac)
    z1 = np.concatenate([-zp[::-1], zp])
    w1 = np.concatenate([wp[::-1], wp])
    tr, wtr = np.polynomial.legendre.leggauss(n_zeta_r)
    zr = 0.5 * zeta_max * (tr + 1.0)
    wr = 0.5 * zeta_max * wtr * 2.0 * math.pi * zr
    return VelocityGrid(
        z1_levels=z1, zr_levels=zr, w1=w1, wr=wr,
        azimuthal_order=azimuthal_order, zeta_max=zeta_max, mass_tol=mass_tol,
    )


def refine(grid: VelocityGrid, factor: float = 1.5) -> VelocityGrid:
    """New grid with node counts scaled by `factor` (same domain)."""
    n1 = 2 * max(3, int(round(len(grid.z1_levels) * factor / 2)))
    nr = max(2, int(round(len(grid.zr_levels) * factor)))
    min_frac = abs(grid.z1_levels[np.argmin(np.abs(grid.z1_levels))]) / grid.zeta_max
    return make_grid(
        n_zeta1=n1, n_zeta_r=nr, zeta_max=grid.zeta_max,
        min_frac=min_frac, azimuthal_order=grid.azimuthal_order,
        mass_tol=grid.mass_tol,
    )


def stencil_1d(levels: np.ndarray, p: float, order: int = 3) -> tuple[int, np.ndarray]:
    """Lagrange stencil of `order` consecutive levels bracketing p.

    Returns (start index, weights).  Points outside the level range are
    extrapolated with the nearest stencil; the weights reproduce
    polynomials of degree < order exactly, which is what makes the
    collision invariants annihilate at machine precision downstream.
    """
    n = len(levels)
    order = min(order, n)
    k = int(np.searchsorted(levels, p)) - 1
    start = min(max(k - (order - 1) // 2, 0), n - order)
    pts = levels[start:start + order]
    w = np.ones(order)
    for a in range(order):
        for b in range(order):
            if a != b:
                w[a] *= (p - pts[b]) / (pts[a] - pts[b])
    return start, w

"""Velocity moments, their x-derivatives, and the boundary log-singularity.

The moment of index alpha weighs the perturbation with
phi_alpha = pi^(-3/4) zeta1^a1 zeta2^a2 zeta3^a3 exp(-|zeta|^2/2).
Its x-derivative is evaluated from the reorganized derivative identity for
the mild solution,

  d/dx f = e^(-nu x/z1)/z1 * L(f)(0) + e^(-nu x/z1)/z1 * (Kf(x) - Kf(0))
         + int_0^x nu/z1^2 e^(-nu (x-s)/z1) (Kf(x) - Kf(s)) ds      (z1 > 0)

plus the mirrored z1 < 0 terms anchored at x = l.  The first two terms are
integrated in zeta1 cell-by-cell with the exponential weight handled in
closed form through exponential integrals, so the -ln x divergence of the
first term is captured uniformly as x -> 0: that is where the logarithmic
singularity of the moment gradient comes from, with coefficient equal to
the transverse-plane integral of phi_alpha(0, .) * L(f)(0, 0+, .).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .collision_operator import LinearizedOperator, _radial_J
from .slab_solver import BoundaryData, DistributionField, _exp_cell, kf_slices
from .special_functions import exp_integral_E1, exp_integral_En
from .velocity_grid import VelocityGrid

PI34 = math.pi ** 0.75

# below this wall distance the streamed term of the derivative identity
# switches from the nodal rule to cell-exact exponential-integral form
STREAM_NODAL_DEPTH = 0.05


# ---------------------------------------------------------------------------
# moment indices and test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentIndex:
    alpha: tuple

    def __post_init__(self):
        a = self.alpha
        if len(a) != 3 or any(int(k) != k or k < 0 for k in a):
            raise ValueError("alpha must be a triple of nonnegative integers")
        object.__setattr__(self, "alpha", tuple(int(k) for k in a))

    @property
    def a_alpha(self) -> float:
        """(2 a1)^(a1/2) (2 a2)^(a2/2) (2 a3)^(a3/2) e^(-|alpha|/2), 0^0 = 1."""
        out = 1.0
        for k in self.alpha:
            if k > 0:
                out *= (2.0 * k) ** (0.5 * k)
        return out * math.exp(-0.5 * sum(self.alpha))

    @property
    def transverse_even(self) -> bool:
        return self.alpha[1] % 2 == 0 and self.alpha[2] % 2 == 0


def _as_index(alpha) -> MomentIndex:
    return alpha if isinstance(alpha, MomentIndex) else MomentIndex(tuple(alpha))


def phi_alpha(alpha, zeta):
    """Gaussian-weighted monomial test function at a 3-component velocity."""
    alpha = _as_index(alpha)
    z = np.asarray(zeta, dtype=float)
    z1, z2, z3 = z[..., 0], z[..., 1], z[..., 2]
    a1, a2, a3 = alpha.alpha
    r2 = z1**2 + z2**2 + z3**2
    return (z1**a1 * z2**a2 * z3**a3) * np.exp(-0.5 * r2) / PI34


@lru_cache(maxsize=128)
def _azimuthal_monomial_average(a2: int, a3: int, n: int = 256) -> float:
    """(1/2pi) integral of cos^a2(phi) sin^a3(phi); identically zero for odd
    powers, otherwise evaluated by the (here exact) periodic rule."""
    if a2 % 2 or a3 % 2:
        return 0.0
    phi = 2.0 * math.pi * np.arange(n) / n
    return float(np.mean(np.cos(phi) ** a2 * np.sin(phi) ** a3))


def phi_alpha_ring(alpha, zeta1, zeta_r):
    """Azimuthal average of phi_alpha on the ring (zeta1, zeta_r)."""
    alpha = _as_index(alpha)
    a1, a2, a3 = alpha.alpha
    z1 = np.asarray(zeta1, dtype=float)
    zr = np.asarray(zeta_r, dtype=float)
    avg = _azimuthal_monomial_average(a2, a3)
    return (z1**a1) * (zr ** (a2 + a3)) * avg * np.exp(-0.5 * (z1**2 + zr**2)) / PI34


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def moment(f: DistributionField, alpha, x_index: int) -> float:
    """sigma_alpha(x_k): grid quadrature of f * phi_alpha over velocity."""
    alpha = _as_index(alpha)
    g = f.grid
    ph = phi_alpha_ring(alpha, g.zeta1, g.zeta_r)
    return float(np.sum(g.weights * ph * f.values[x_index]))


def half_moments(f: DistributionField, alpha, x_index: int) -> tuple[float, float]:
    """(sigma_plus, sigma_minus): zeta1 > 0 and zeta1 < 0 contributions."""
    alpha = _as_index(alpha)
    g = f.grid
    vals = g.weights * phi_alpha_ring(alpha, g.zeta1, g.zeta_r) * f.values[x_index]
    pos = g.zeta1 > 0
    return float(np.sum(vals[pos])), float(np.sum(vals[~pos]))


def macroscopic_variables(f: DistributionField, x_index: int) -> tuple[float, float, float]:
    """(density, velocity_1, temperature) from the low-order moments."""
    dens = moment(f, (0, 0, 0), x_index)
    vel1 = moment(f, (1, 0, 0), x_index)
    tr = (moment(f, (2, 0, 0), x_index) + moment(f, (0, 2, 0), x_index)
          + moment(f, (0, 0, 2), x_index))
    return dens, vel1, (2.0 / 3.0) * tr - dens


# ---------------------------------------------------------------------------
# collision frequency lookup at off-node speeds
# ---------------------------------------------------------------------------

def nu_of_speed(op: LinearizedOperator, speed) -> np.ndarray:
    """nu at arbitrary speeds via a dense interpolation table.

    The angular mass of the cross section is recovered once by calibrating
    against op.nu at a grid node; the radial factor is requadratured.
    """
    tab = getattr(op, "_nu_table", None)
    if tab is None:
        s0 = float(op.grid.speed()[0])
        am = op.nu[0] / _radial_J(op.gamma, s0, 60, 80)
        smax = float(np.max(op.grid.speed())) * 1.05 + 1.0
        s = np.linspace(0.0, smax, 600)
        vals = am * np.array([_radial_J(op.gamma, x, 60, 80) for x in s])
        tab = (s, vals)
        op._nu_table = tab
    return np.interp(speed, tab[0], tab[1])


# ---------------------------------------------------------------------------
# derivative of moments via the reorganized identity
# ---------------------------------------------------------------------------

def _extrap_to_zero(z: np.ndarray, v: np.ndarray) -> float:
    """Polynomial extrapolation to 0 through the points (z_k, v_k)."""
    out = 0.0
    n = len(z)
    for a in range(n):
        w = 1.0
        for b in range(n):
            if b != a:
                w *= z[b] / (z[b] - z[a])
        out += w * v[a]
    return out


def _kf_interp(f: DistributionField, kf: np.ndarray, x: float) -> np.ndarray:
    xs = f.x_nodes
    k = min(max(int(np.searchsorted(xs, x)) - 1, 0), len(xs) - 2)
    t = (x - xs[k]) / (xs[k + 1] - xs[k])
    return (1 - t) * kf[k] + t * kf[k + 1]


def _e1v(c_over_z: float) -> float:
    if c_over_z > 700.0:
        return 0.0
    return exp_integral_E1(c_over_z).value


def _stream_log_integral(z_levels, gvals, g0, zr, op, x, nsub: int = 8) -> float:
    """integral over (0, z_top] of e^(-nu x / z) g(z) / z dz.

    The profile g carries the Maxwellian envelope e^(-(z^2+zr^2)/2); the
    stripped factor p = g * e^(+(z^2+zr^2)/2) varies polynomially, so p is
    interpolated linearly on the level cells (anchored at p(0) from g0),
    resampled on nsub sub-cells where the envelope and the frozen nu are
    re-evaluated, and the weight against a linear-in-g sub-cell is
    integrated exactly:

      int_[a,b] e^(-c/z) (p + q z)/z dz
        = p (E1(c/b) - E1(c/a)) + q (b E2(c/b) - a E2(c/a)).

    The innermost sub-cell starts at z = 0 where both primitives vanish;
    E1(c/b) there carries the -ln x growth analytically.
    """
    env = np.exp(-0.5 * (z_levels**2 + zr**2))
    pvals = gvals / env
    p_edges = np.concatenate([[g0 * math.exp(0.5 * zr**2)], pvals])
    edges = np.concatenate([[0.0], z_levels])
    total = 0.0
    for k in range(len(z_levels)):
        za, zb = edges[k], edges[k + 1]
        pslope = (p_edges[k + 1] - p_edges[k]) / (zb - za)
        sub = np.linspace(za, zb, nsub + 1)
        gsub = ((p_edges[k] + pslope * (sub - za))
                * np.exp(-0.5 * (sub**2 + zr**2)))
        for j in range(nsub):
            a, b = sub[j], sub[j + 1]
            mid = 0.5 * (a + b)
            c = float(nu_of_speed(op, math.hypot(mid, zr))) * x
            slope = (gsub[j + 1] - gsub[j]) / (b - a)
            p = gsub[j] - slope * a
            t_b = _e1v(c / b)
            e2_b = exp_integral_En(2, c / b)
            if a == 0.0:
                t_a, e2a_term = 0.0, 0.0
            else:
                t_a = _e1v(c / a)
                e2a_term = a * exp_integral_En(2, c / a)
            total += p * (t_b - t_a) + slope * (b * e2_b - e2a_term)
    return total


def _dsigma_half(f: DistributionField, op: LinearizedOperator, kf: np.ndarray,
                 alpha: MomentIndex, x: float, side: str) -> tuple[float, float]:
    """(streamed term, memory term) of d(sigma_alpha)/dx from one half grid.

    side "+" takes zeta1 > 0 anchored at the x = 0 wall; side "-" mirrors
    to zeta1 < 0 anchored at x = l (overall sign flipped).
    """
    g = f.grid
    n1, nr = len(g.z1_levels), len(g.zr_levels)
    nhalf = n1 // 2
    xs = f.x_nodes
    kx = _kf_interp(f, kf, x)

    if side == "+":
        lvl_idx = np.arange(nhalf, n1)            # positive levels, ascending
        wall_idx = 0
        depth = x
        sign = 1.0
    else:
        lvl_idx = np.arange(nhalf - 1, -1, -1)    # negative levels, |z| ascending
        wall_idx = len(xs) - 1
        depth = xs[-1] - x
        sign = -1.0

    zabs = np.abs(g.z1_levels[lvl_idx])
    lw = -op.nu * f.values[wall_idx] + kf[wall_idx]   # L(f) at the anchoring wall
    bracket = lw + kx - kf[wall_idx]

    node = lvl_idx[:, None] * nr + np.arange(nr)[None, :]
    ph = phi_alpha_ring(alpha, g.zeta1[node.ravel()],
                        g.zeta_r[node.ravel()]).reshape(node.shape)
    gmat = ph * bracket[node]                     # (nhalf, nr)

    # Streamed part.  In the bulk (depth above the grazing-resolution scale)
    # the nodal rule matches the quadrature used for the moments themselves,
    # making the identity the exact derivative of the discrete solution; near
    # the wall the weight e^(-nu depth/z)/z varies below the smallest level
    # and the ring-by-ring cell-exact form takes over to capture the log.
    a1 = alpha.alpha[0]
    streamed = 0.0
    if depth >= STREAM_NODAL_DEPTH:
        nu_node = op.nu[node]
        wgt = np.exp(-nu_node * depth / zabs[:, None]) / zabs[:, None]
        streamed = float(np.sum(g.w1[lvl_idx][:, None] * g.wr[None, :]
                                * wgt * gmat))
    else:
        ph0 = phi_alpha_ring(alpha, 0.0, g.zr_levels)
        for ir in range(nr):
            if a1 > 0:
                g0 = 0.0
            else:
                g0 = float(ph0[ir]) * _extrap_to_zero(zabs[:3], bracket[node[:3, ir]])
            streamed += g.wr[ir] * _stream_log_integral(
                zabs, gmat[:, ir], g0, g.zr_levels[ir], op, depth)

    # memory term: nodal velocity quadrature; the s-integral against the
    # piecewise-linear K differences is exact per x cell
    nodes_flat = node.reshape(-1)
    tau = (op.nu[nodes_flat] / np.repeat(zabs, nr))
    kf_nodes = kf[:, nodes_flat]
    kx_nodes = kx[nodes_flat]
    acc = np.zeros(nodes_flat.size)
    if side == "+":
        for k in range(len(xs) - 1):
            if xs[k + 1] <= x:
                acc += _exp_cell(tau, x - xs[k], x - xs[k + 1],
                                 kx_nodes - kf_nodes[k], kx_nodes - kf_nodes[k + 1])
            elif xs[k] < x:
                acc += _exp_cell(tau, x - xs[k], 0.0,
                                 kx_nodes - kf_nodes[k], np.zeros_like(kx_nodes))
                break
    else:
        for k in range(len(xs) - 1, 0, -1):
            if xs[k - 1] >= x:
                acc += _exp_cell(tau, xs[k] - x, xs[k - 1] - x,
                                 kx_nodes - kf_nodes[k], kx_nodes - kf_nodes[k - 1])
            elif xs[k] > x:
                acc += _exp_cell(tau, xs[k] - x, 0.0,
                                 kx_nodes - kf_nodes[k], np.zeros_like(kx_nodes))
                break
    wnode = (g.w1[lvl_idx][:, None] * g.wr[None, :]).reshape(-1)
    mem = float(np.sum(wnode * ph.reshape(-1) * (tau / op.nu[nodes_flat]) * acc))
    return sign * streamed, sign * mem


def d_moment_dx(f: DistributionField, bc: BoundaryData, op: LinearizedOperator,
                alpha, x: float) -> float:
    """d(sigma_alpha)/dx at interior x from the reorganized identity."""
    alpha = _as_index(alpha)
    l = f.x_nodes[-1]
    if not 0.0 < x < l:
        raise ValueError(f"x must lie strictly inside (0, {l}), got {x}")
    kf = kf_slices(f, op)
    sp, mp = _dsigma_half(f, op, kf, alpha, x, "+")
    sm, mm = _dsigma_half(f, op, kf, alpha, x, "-")
    return sp + mp + sm + mm


# ---------------------------------------------------------------------------
# singular coefficient: three routes
# ---------------------------------------------------------------------------

@dataclass
class CoefficientResult:
    value: float
    value_linear: float
    unstable: bool
    ring_limit: np.ndarray


def boundary_L_limit(f: DistributionField, op: LinearizedOperator,
                     wall: str = "left") -> tuple[np.ndarray, np.ndarray]:
    """L(f) at the wall extrapolated to the grazing limit zeta1 -> 0, ring
    by ring: (quadratic over the 3 smallest levels, linear over 2)."""
    g = f.grid
    n1, nr = len(g.z1_levels), len(g.zr_levels)
    nhalf = n1 // 2
    kf = kf_slices(f, op)
    if wall == "left":
        lw = -op.nu * f.values[0] + kf[0]
        lvl = [nhalf, nhalf + 1, nhalf + 2]
    else:
        lw = -op.nu * f.values[-1] + kf[-1]
        lvl = [nhalf - 1, nhalf - 2, nhalf - 3]
    z = np.abs(g.z1_levels[lvl])
    ring_quad = np.empty(nr)
    ring_lin = np.empty(nr)
    for ir in range(nr):
        vals = np.array([lw[i1 * nr + ir] for i1 in lvl])
        ring_quad[ir] = _extrap_to_zero(z, vals)
        ring_lin[ir] = _extrap_to_zero(z[:2], vals[:2])
    return ring_quad, ring_lin


def singular_coefficient(f: DistributionField, op: LinearizedOperator,
                         alpha, wall: str = "left") -> CoefficientResult:
    """Theoretical log coefficient: transverse-plane integral of
    phi_alpha(0, zeta2, zeta3) * L(f)(wall, 0+, zeta2, zeta3).

    Identically zero whenever alpha_1 > 0 (the test function carries the
    factor zeta1^alpha_1).  Extrapolation instability (quadratic vs linear
    limits disagreeing by > 5 percent) is reported on the result.
    """
    alpha = _as_index(alpha)
    g = f.grid
    ring_quad, ring_lin = boundary_L_limit(f, op, wall)
    ph0 = phi_alpha_ring(alpha, 0.0, g.zr_levels)
    c_quad = float(np.sum(g.wr * ph0 * ring_quad))
    c_lin = float(np.sum(g.wr * ph0 * ring_lin))
    unstable = abs(c_quad - c_lin) > 0.05 * max(abs(c_quad), 1e-12)
    return CoefficientResult(value=c_quad, value_linear=c_lin,
                             unstable=unstable, ring_limit=ring_quad)


def singular_term_I(f: DistributionField, op: LinearizedOperator, alpha,
                    x: float, ring_limit: np.ndarray | None = None) -> float:
    """Spherical-coordinate boundary term
    I(x) = iint E1(nu(rho) x / rho) F(rho, 0, phi) e^(-rho^2/2) rho dphi drho,
    an independent route to the coefficient: I(x)/(-ln x) -> c as x -> 0."""
    alpha = _as_index(alpha)
    if not x > 0:
        raise ValueError("x must be > 0")
    g = f.grid
    if ring_limit is None:
        ring_limit = singular_coefficient(f, op, alpha).ring_limit
    ph0 = phi_alpha_ring(alpha, 0.0, g.zr_levels)
    nus = nu_of_speed(op, g.zr_levels)
    out = 0.0
    for ir, rho in enumerate(g.zr_levels):
        out += g.wr[ir] * ph0[ir] * _e1v(nus[ir] * x / rho) * ring_limit[ir]
    return out


def singular_term_I_limit(f: DistributionField, op: LinearizedOperator, alpha,
                          ks=range(8, 15)) -> tuple[float, float]:
    """lim I(x)/(-ln x) estimated by a linear fit of I against -ln x over
    dyadic abscissae (single ratios carry an O(1/ln x) bias)."""
    alpha = _as_index(alpha)
    ring = singular_coefficient(f, op, alpha).ring_limit
    xs = np.array([2.0 ** (-k) for k in ks])
    iv = np.array([singular_term_I(f, op, alpha, x, ring_limit=ring) for x in xs])
    b, a, _ = fit_log_singularity(list(zip(xs, iv)), min_ratio=1.0)
    return b, a


def rho0_cutoff(op: LinearizedOperator, x: float, rho_max: float = 60.0) -> float:
    """sup of rho with nu(rho) x / rho > 1 (grazing/bulk split radius)."""
    if not x > 0:
        raise ValueError("x must be > 0")
    rho = np.geomspace(1e-9, rho_max, 2000)
    above = nu_of_speed(op, rho) * x / rho > 1.0
    if above.all():
        return float("inf")
    if not above.any():
        return 0.0
    k = int(np.nonzero(above)[0][-1])
    lo, hi = rho[k], rho[min(k + 1, len(rho) - 1)]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if float(nu_of_speed(op, mid)) * x / mid > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# log fit
# ---------------------------------------------------------------------------

@dataclass
class SingularityReport:
    alpha: MomentIndex
    c_theory: float
    b_fit: float
    a_fit: float
    fit_residual: float
    x_range: tuple
    rho0_values: list = field(default_factory=list)
    b_fit_abs: float = float("nan")
    i_route_limit: float = float("nan")
    extrapolation_unstable: bool = False
    samples: list = field(default_factory=list)


def fit_log_singularity(samples, min_ratio: float = 50.0) -> tuple[float, float, float]:
    """Least squares fit d_sigma ~ a + b (-ln x); returns (b, a, rms residual).

    Needs >= 6 samples spanning about two decades in x (abscissae ratio
    >= min_ratio; the default dyadic window 2^-8 .. 2^-14 has ratio 64).
    """
    xs = np.array([s[0] for s in samples], dtype=float)
    ds = np.array([s[1] for s in samples], dtype=float)
    if len(xs) < 6:
        raise ValueError("need at least 6 samples")
    if np.all(xs == xs[0]):
        raise ValueError("degenerate design matrix: all abscissae equal")
    if xs.max() / xs.min() < min_ratio:
        raise ValueError("abscissae must span about two decades")
    A = np.vstack([np.ones_like(xs), -np.log(xs)]).T
    coef, *_ = np.linalg.lstsq(A, ds, rcond=None)
    resid = ds - A @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    return float(coef[1]), float(coef[0]), rms


def analyze_singularity(f: DistributionField, bc: BoundaryData,
                        op: LinearizedOperator, alpha,
                        ks=range(8, 15)) -> SingularityReport:
    """Full per-alpha pipeline: derivative samples at dyadic x, the log fit,
    the theoretical coefficient, and the spherical-route limit."""
    alpha = _as_index(alpha)
    xs = [2.0 ** (-k) for k in ks]
    ds = [d_moment_dx(f, bc, op, alpha, x) for x in xs]
    b, a, rms = fit_log_singularity(list(zip(xs, ds)))
    b_abs, _, _ = fit_log_singularity(list(zip(xs, np.abs(ds))))
    coef = singular_coefficient(f, op, alpha)
    i_lim, _ = singular_term_I_limit(f, op, alpha, ks=ks)
    rho0s = [rho0_cutoff(op, x) for x in (max(xs), min(xs))]
    return SingularityReport(
        alpha=alpha, c_theory=coef.value, b_fit=b, a_fit=a, fit_residual=rms,
        x_range=(min(xs), max(xs)), rho0_values=rho0s, b_fit_abs=b_abs,
        i_route_limit=i_lim, extrapolation_unstable=coef.unstable,
        samples=list(zip(xs, ds)),
    )

"""Discrete linearized collision operator L = -nu + K on a velocity grid.

nu is evaluated per node by high-order quadrature of the collision
frequency integral; K is assembled from the weak-form quadrature of the
collision integral (see _assembly) and stored as a dense symmetric kernel
matrix: (L f)_i = -nu_i f_i + sum_j K_ij w_j f_j with w the grid weights.
"""

from __future__ import annotations

import hashlib
import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _assembly
from .cross_section import CrossSectionModel
from .velocity_grid import VelocityGrid

PI32 = math.pi ** 1.5


class QuadratureError(RuntimeError):
    """Collision-frequency quadrature failed to converge."""

    def __init__(self, msg, est_error=None):
        super().__init__(msg)
        self.est_error = est_error


class AssemblyError(RuntimeError):
    pass


@dataclass(frozen=True)
class AngularQuadrature:
    """Resolution of the (relative azimuth, theta, eps) quadratures."""

    n_phi: int = 12
    n_theta: int = 12
    n_eps: int = 8
    ww_cutoff: float = 1e-26   # skip velocity pairs with w(z)w(z*) below this
    s_order: int = 2           # radial interpolation order (in zeta_r^2)
    # trusted-kernel region: speed <= frac * zeta_max; None picks a
    # resolution-aware default (coarser grids trust a smaller ball)
    core_speed_frac: float | None = None

    def resolved_core_frac(self, grid) -> float:
        if self.core_speed_frac is not None:
            return self.core_speed_frac
        nr = len(grid.zr_levels)
        if nr < 8:
            return 0.0   # too few radial cells to trust any assembled block
        return 0.583 * min(1.0, nr / 16.0)

    def signature(self) -> bytes:
        return struct.pack("<iiidid", self.n_phi, self.n_theta,
                           self.n_eps, self.ww_cutoff, self.s_order,
                           -1.0 if self.core_speed_frac is None else self.core_speed_frac)


@dataclass
class LinearizedOperator:
    """nu vector, symmetric kernel matrix K, and fitted frequency bounds."""

    nu: np.ndarray
    K: np.ndarray
    grid: VelocityGrid
    nu0_fit: float
    nu1_fit: float
    gamma: float
    model_name: str = ""
    est_truncation: float = 0.0
    L_action: np.ndarray = field(default=None, repr=False)
    _KW: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self._KW is None:
            self._KW = self.K * self.grid.weights[None, :]
        if self.L_action is None:
            self.L_action = self._KW - np.diag(self.nu)

    def kw_matrix(self) -> np.ndarray:
        return self._KW


# ---------------------------------------------------------------------------
# collision frequency
# ---------------------------------------------------------------------------

def _beta_angular_mass(model: CrossSectionModel, n_gl: int = 128) -> float:
    """2 pi * integral of beta(theta) over [0, pi/2] (Gauss-Legendre)."""
    t, w = np.polynomial.legendre.leggauss(n_gl)
    th = 0.25 * math.pi * (t + 1.0)
    wt = 0.25 * math.pi * w
    bvals = np.array([model.beta(x) for x in th])
    return 2.0 * math.pi * float(np.sum(wt * bvals))


def _radial_J(gamma: float, rho: float, n_inner: int, n_outer: int) -> float:
    """J(rho) = pi^{-3/2} * integral of |zeta - zeta*|^gamma w-weighted over R^3.

    After integrating the angle exactly this reduces to a 1-D radial
    integral split at r = rho where the integrand loses smoothness:

        J = (2 pi^{-1/2} / (rho (gamma+2))) *
            int_0^inf r e^{-r^2} [(rho+r)^(g+2) - |rho-r|^(g+2)] dr
    """
    g2 = gamma + 2.0
    # the factors |rho - r|^(g2) are only finitely differentiable at r = rho
    # for fractional gamma; substituting r = rho -+ u^2 restores smoothness
    # at the segment endpoints so Gauss-Legendre converges spectrally
    if rho < 1e-8:
        # degenerate limit: [(rho+r)^g2 - |rho-r|^g2] / rho -> 2 g2 r^(g2-1)
        t, w = np.polynomial.legendre.leggauss(n_outer)
        u = 0.5 * math.sqrt(12.0) * (t + 1.0)
        wu = 0.5 * math.sqrt(12.0) * w
        r = u * u
        integrand = 2.0 * r ** g2 * np.exp(-r * r) * 2.0 * u
        return (2.0 / math.sqrt(math.pi)) * float(np.sum(wu * integrand))
    total = 0.0
    t_in, w_in = np.polynomial.legendre.leggauss(n_inner)
    u = 0.5 * math.sqrt(rho) * (t_in + 1.0)
    wu = 0.5 * math.sqrt(rho) * w_in
    r = rho - u * u
    total += float(np.sum(wu * 2.0 * u * r * np.exp(-r * r)
                          * ((rho + r) ** g2 - (rho - r) ** g2)))
    t_out, w_out = np.polynomial.legendre.leggauss(n_outer)
    span = 12.0
    u = 0.5 * math.sqrt(span) * (t_out + 1.0)
    wu = 0.5 * math.sqrt(span) * w_out
    r = rho + u * u
    total += float(np.sum(wu * 2.0 * u * r * np.exp(-r * r)
                          * ((rho + r) ** g2 - (r - rho) ** g2)))
    return 2.0 / (math.sqrt(math.pi) * rho * g2) * total


def compute_nu(model: CrossSectionModel, speed: float,
               rtol: float = 1e-9) -> float:
    """Collision frequency nu(|zeta|) against the standard Maxwellian.

    Quadrature error is estimated by comparing two radial resolutions; a
    disagreement above rtol raises QuadratureError.
    """
    if speed < 0.0:
        raise ValueError("speed must be >= 0")
    am = _beta_angular_mass(model)
    coarse = _radial_J(model.gamma, speed, 40, 56)
    fine = _radial_J(model.gamma, speed, 60, 80)
    est = abs(fine - coarse) / max(abs(fine), 1e-300)
    if est > rtol:
        raise QuadratureError(
            f"collision frequency quadrature not converged at speed {speed}",
            est_error=est,
        )
    return am * fine


def _nu_on_grid(model: CrossSectionModel, grid: VelocityGrid) -> np.ndarray:
    speeds = grid.speed()
    return np.array([compute_nu(model, s) for s in speeds])


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def assemble_operator(
    model: CrossSectionModel,
    grid: VelocityGrid,
    angular: AngularQuadrature | None = None,
    cache_dir: str | None = None,
    n_chunks: int | None = None,
) -> LinearizedOperator:
    """Build the discrete operator; optionally round-trip through a disk cache."""
    angular = angular or AngularQuadrature(n_phi=grid.azimuthal_order)
    if cache_dir is None:
        cache_dir = os.environ.get("BOLTZSLAB_CACHE_DIR")
    key = _cache_key(model, grid, angular)
    if cache_dir:
        path = os.path.join(cache_dir, f"op_{key}.bin")
        if os.path.exists(path):
            return load_operator(path, grid)

    nu = _nu_on_grid(model, grid)
    D = _assemble_dirichlet_matrix(model, grid, angular, n_chunks)
    omega = grid.weights
    sw = grid.sqrt_maxwellian()
    denom = omega[:, None] * sw[:, None] * sw[None, :]
    L_action = D / denom
    L_action = _regularize_action(L_action, nu, grid,
                                  angular.resolved_core_frac(grid))
    K = L_action / omega[None, :]
    K = 0.5 * (K + K.T)
    K[np.diag_indices_from(K)] += nu / omega
    L_action = K * omega[None, :] - np.diag(nu)

    n_dropped, drop_bound = _truncation_bound(grid, angular)
    if drop_bound > 1e-8:
        raise AssemblyError(
            f"pair-cutoff truncation bound {drop_bound:.2e} exceeds 1e-8; "
            "lower ww_cutoff"
        )

    speeds = grid.speed()
    ratio = nu / (1.0 + speeds) ** model.gamma
    op = LinearizedOperator(
        nu=nu, K=K, grid=grid,
        nu0_fit=float(ratio.min()), nu1_fit=float(ratio.max()),
        gamma=model.gamma, model_name=model.name,
        est_truncation=drop_bound, L_action=L_action,
    )
    if cache_dir:
        os.makedirs(cache_dir, exist_ok=True)
        save_operator(op, os.path.join(cache_dir, f"op_{key}.bin"))
    return op


def _w_orthonormal(vectors, w):
    """Gram-Schmidt in the weighted inner product <f, g> = sum w f g."""
    ortho = []
    for b in vectors:
        v = np.asarray(b, dtype=float).copy()
        for q in ortho:
            v -= q * np.sum(w * q * v)
        v /= np.sqrt(np.sum(w * v * v))
        ortho.append(v)
    return np.array(ortho)


def _regularize_action(L_action: np.ndarray, nu: np.ndarray,
                       grid: VelocityGrid, core_speed_frac: float) -> np.ndarray:
    """Keep the assembled kernel on the trusted core speed <= frac * zeta_max;
    give the Gaussian tail a symmetric relaxation toward the conserved
    directions; re-impose the exact null space globally.

    Rescaling the weak-form matrix to the f representation divides by
    sqrt(Maxwellian) ~ e^(+|zeta|^2/2), which amplifies interpolation noise
    at high-speed nodes enough to destabilize the source iteration (their
    own physics is exponentially negligible).  Tail nodes therefore relax as
    -nu^(1/2) (I - Pi) nu^(1/2) with Pi the weighted projector onto the
    nu^(1/2)-scaled collision invariants: symmetric, negative semidefinite,
    invariant-preserving, and contractive row by row.  The final projection
    Q L Q with Q = I - (projector on the invariants) makes the null space
    machine-exact for the composite operator.
    """
    w = grid.weights
    speed = grid.speed()
    core = speed <= core_speed_frac * grid.zeta_max + 1e-12
    tail = ~core
    sw = grid.sqrt_maxwellian()
    invariants = [sw, grid.zeta1 * sw, (grid.zeta1**2 + grid.zeta_r**2) * sw]

    L = np.zeros_like(L_action)
    L[np.ix_(core, core)] = L_action[np.ix_(core, core)]
    if tail.any():
        rnu = np.sqrt(nu)
        Phi = _w_orthonormal([rnu * v for v in invariants], w)
        bgk = -(rnu[:, None] * (np.eye(len(nu)) - Phi.T @ (Phi * w[None, :]))
                * rnu[None, :])
        L[np.ix_(tail, tail)] += bgk[np.ix_(tail, tail)]

    Psi = _w_orthonormal(invariants, w)
    Q = np.eye(len(nu)) - Psi.T @ (Psi * w[None, :])
    return Q @ L @ Q


def _assemble_dirichlet_matrix(model, grid, angular, n_chunks):
    import numba

    tt, tw = np.polynomial.legendre.leggauss(angular.n_theta)
    theta = 0.25 * math.pi * (tt + 1.0)
    wtheta = 0.25 * math.pi * tw
    wtb = wtheta * np.array([model.beta(t) for t in theta])
    ct = np.cos(theta)
    st = np.sin(theta)
    phis = 2.0 * math.pi * (np.arange(angular.n_phi) + 0.5) / angular.n_phi
    eps = 2.0 * math.pi * (np.arange(angular.n_eps) + 0.5) / angular.n_eps
    weps = 2.0 * math.pi / angular.n_eps
    if n_chunks is None:
        n_chunks = max(1, numba.get_num_threads())

    sr = grid.zr_levels ** 2
    Draw = _assembly.assemble_dirichlet(
        grid.z1_levels, sr, grid.zeta1, grid.zeta_r,
        grid.weights, grid.maxwellian(),
        np.cos(phis), np.sin(phis), ct, st, wtb,
        np.cos(eps), np.sin(eps), weps,
        model.gamma, angular.ww_cutoff, n_chunks, angular.s_order,
    )
    D = -0.25 * 0.5 * (Draw + Draw.T)
    # enforce the exact zeta1 -> -zeta1 reflection symmetry of the operator
    refl = grid.reflect_index()
    D = 0.5 * (D + D[np.ix_(refl, refl)])
    return D


def _truncation_bound(grid, angular):
    """Bound on the action error from skipping low-weight velocity pairs."""
    wmx = grid.maxwellian()
    ww = np.outer(wmx, wmx)
    dropped = ww < angular.ww_cutoff
    n_dropped = int(dropped.sum())
    if n_dropped == 0:
        return 0, 0.0
    om = grid.weights
    sw = grid.sqrt_maxwellian()
    # each dropped pair contributes at most omega_i omega_j ww * O(B_max);
    # translated to operator action per unit f this is bounded by the sum
    # over dropped partners divided by the row scaling.
    bmax = (2.0 * grid.zeta_max) * 2.0 * math.pi ** 2  # |V|^gamma <= 2 zmax, angular mass
    per_row = (np.where(dropped, ww, 0.0) * om[None, :]).sum(axis=1) * bmax
    bound = float(np.max(per_row / np.maximum(sw, 1e-300)))
    return n_dropped, bound


_ASSEMBLY_VERSION = 3


def _cache_key(model, grid, angular) -> str:
    h = hashlib.sha256()
    h.update(struct.pack("<i", _ASSEMBLY_VERSION))
    h.update(grid.content_hash().encode())
    h.update(angular.signature())
    h.update(struct.pack("<dd", model.gamma, model.cutoff_const))
    th = np.linspace(0.0, 0.5 * math.pi, 64)
    h.update(np.array([model.beta(t) for t in th]).tobytes())
    return h.hexdigest()[:32]


# ---------------------------------------------------------------------------
# application and norms
# ---------------------------------------------------------------------------

def apply_L(op: LinearizedOperator, f: np.ndarray) -> np.ndarray:
    """(Lf)_i = -nu_i f_i + (Kf)_i."""
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != op.grid.n_nodes:
        raise ValueError("grid function has wrong length")
    return f @ op.L_action.T


def apply_K(op: LinearizedOperator, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != op.grid.n_nodes:
        raise ValueError("grid function has wrong length")
    return f @ op.kw_matrix().T


def grid_inner(grid: VelocityGrid, f: np.ndarray, g: np.ndarray) -> float:
    return float(np.sum(grid.weights * f * g))


def norm_star(f: np.ndarray, op: LinearizedOperator) -> float:
    """nu-weighted L2 norm (integral of nu f^2)^(1/2)."""
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != op.grid.n_nodes:
        raise ValueError("grid function has wrong length")
    return float(np.sqrt(np.sum(op.grid.weights * op.nu * f * f, axis=-1)))


def norm_L2(f: np.ndarray, grid: VelocityGrid) -> float:
    return float(np.sqrt(np.sum(grid.weights * f * f)))


def norm_Linf_weighted(f: np.ndarray, a: float, grid: VelocityGrid) -> float:
    """sup over nodes of (1 + |zeta|)^a |f|."""
    if a < 0:
        raise ValueError("a must be >= 0")
    return float(np.max((1.0 + grid.speed()) ** a * np.abs(f)))


def collision_invariants(grid: VelocityGrid) -> dict[str, np.ndarray]:
    """The five conserved directions restricted to the axisymmetric grid.

    The transverse momenta zeta_2 w^(1/2), zeta_3 w^(1/2) have zero
    azimuthal average, so their grid restriction is identically zero.
    """
    sw = grid.sqrt_maxwellian()
    sp2 = grid.zeta1**2 + grid.zeta_r**2
    return {
        "mass": sw,
        "momentum_1": grid.zeta1 * sw,
        "momentum_2": np.zeros_like(sw),
        "momentum_3": np.zeros_like(sw),
        "energy": sp2 * sw,
    }


# ---------------------------------------------------------------------------
# smoothing diagnostics
# ---------------------------------------------------------------------------

@dataclass
class SmoothingReport:
    c1: float                  # sup ||Kf||_{inf,3/2-gamma} / ||f||_{L2}
    c2: dict                   # a -> sup ||Kf||_{inf,2+a-gamma} / ||f||_{inf,a}
    n_samples: int
    seed: int


def _random_test_family(grid: VelocityGrid, n: int, rng) -> list[np.ndarray]:
    """Smooth Gaussian-envelope functions with random polynomial prefactors."""
    out = []
    z1 = grid.zeta1
    s = grid.zeta_r**2
    sp2 = z1**2 + s
    for _ in range(n):
        c = rng.normal(size=6)
        decay = rng.uniform(0.3, 0.7)
        poly = c[0] + c[1] * z1 + c[2] * s + c[3] * z1**2 + c[4] * z1 * s + c[5] * sp2
        out.append(poly * np.exp(-decay * sp2))
    return out


def smoothing_report(op: LinearizedOperator, n_samples: int = 32,
                     seed: int = 1234) -> SmoothingReport:
    """Empirical constants for the decay-improving estimates of K."""
    rng = np.random.default_rng(seed)
    fam = _random_test_family(op.grid, n_samples, rng)
    g = op.gamma
    c1 = 0.0
    c2 = {0.0: 0.0, 2.0: 0.0, 4.0: 0.0}
    for f in fam:
        l2 = norm_L2(f, op.grid)
        if l2 < 1e-12:
            continue
        kf = apply_K(op, f)
        c1 = max(c1, norm_Linf_weighted(kf, 1.5 - g, op.grid) / l2)
        for a in c2:
            na = norm_Linf_weighted(f, a, op.grid)
            if na < 1e-12:
                continue
            c2[a] = max(c2[a], norm_Linf_weighted(kf, 2.0 + a - g, op.grid) / na)
    return SmoothingReport(c1=c1, c2=c2, n_samples=n_samples, seed=seed)


# ---------------------------------------------------------------------------
# binary cache
# ---------------------------------------------------------------------------

_MAGIC = b"BSLB\x01"


def save_operator(op: LinearizedOperator, path: str) -> None:
    """Header (magic, grid hash, N) + nu + row-major K and L matrices."""
    ghash = op.grid.content_hash().encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<H", len(ghash)))
        fh.write(ghash)
        fh.write(struct.pack("<qddd", op.grid.n_nodes, op.nu0_fit,
                             op.nu1_fit, op.gamma))
        fh.write(np.ascontiguousarray(op.nu).tobytes())
        fh.write(np.ascontiguousarray(op.K).tobytes())
        fh.write(np.ascontiguousarray(op.L_action).tobytes())


def load_operator(path: str, grid: VelocityGrid) -> LinearizedOperator:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise AssemblyError(f"{path}: not an operator cache file")
        (hlen,) = struct.unpack("<H", fh.read(2))
        ghash = fh.read(hlen).decode()
        if ghash != grid.content_hash():
            raise AssemblyError(f"{path}: cache was built for a different grid")
        n, nu0, nu1, gamma = struct.unpack("<qddd", fh.read(8 * 4))
        nu = np.frombuffer(fh.read(8 * n), dtype=np.float64).copy()
        K = np.frombuffer(fh.read(8 * n * n), dtype=np.float64).reshape(n, n).copy()
        L = np.frombuffer(fh.read(8 * n * n), dtype=np.float64).reshape(n, n).copy()
    return LinearizedOperator(
        nu=nu, K=K, grid=grid, nu0_fit=nu0, nu1_fit=nu1,
        gamma=gamma, L_action=L,
    )

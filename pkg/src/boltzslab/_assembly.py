"""Quadrature assembly of the linearized collision operator.

The operator is assembled in its symmetric bilinear (weak) form.  Writing
f = w^(1/2) u and g = w^(1/2) v, the action satisfies

    <g, L f> = -(1/4) iint B(|V|, theta) w(zeta) w(zeta*)
               * [u' + u*' - u - u*] [v' + v*' - v - v*]
               d(eps) d(theta) d(zeta*) d(zeta),

where primes denote post-collision velocities.  Discretizing this form by
quadrature and interpolation gives, by construction, (a) an exactly
symmetric matrix, (b) a negative-semidefinite quadratic form (the weights
are positive and the integrand is a weighted square), and (c) machine-zero
rows/columns on the collision invariants, because the interpolation
stencils reproduce {1, zeta1, zeta1^2, zeta_r^2} exactly and
u' + u*' - u - u* vanishes pointwise for conserved quantities.

Velocity pairs are sampled on the tensor grid (the azimuth of the first
velocity is fixed, the relative azimuth averaged over M points); the
scattering hemisphere uses Gauss-Legendre in theta and a uniform periodic
rule in the azimuth eps.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True)
def _bracket(levels, p, order):
    n = levels.shape[0]
    lo = 0
    hi = n
    while lo < hi:
        mid = (lo + hi) // 2
        if levels[mid] <= p:
            lo = mid + 1
        else:
            hi = mid
    start = lo - 1 - (order - 1) // 2
    if start < 0:
        start = 0
    if start > n - order:
        start = n - order
    return start


@njit(cache=True)
def _lagrange_weights(levels, start, order, p, out):
    for a in range(order):
        w = 1.0
        xa = levels[start + a]
        for b in range(order):
            if b != a:
                xb = levels[start + b]
                w *= (p - xb) / (xa - xb)
        out[a] = w


@njit(parallel=True, cache=True)
def assemble_dirichlet(z1, sr, node_z1, node_zr, omega, wmx,
                       cphi, sphi, ct, st, wtb, ce, se, weps,
                       gamma, ww_cutoff, n_chunks, s_order):
    """Accumulate the (positive) quadratic form; caller applies the -1/4.

    z1 : axial levels, sr : squared radial levels. node_* / omega / wmx are
    per-node coordinates, quadrature weights and Maxwellian values.  The
    chunked private accumulators make the parallel reduction deterministic.
    """
    nr = sr.shape[0]
    n1m1 = z1.shape[0] - 1
    N = node_z1.shape[0]
    M = cphi.shape[0]
    ntheta = ct.shape[0]
    neps = ce.shape[0]
    inv_M = 1.0 / M
    nsten = 3 * s_order
    ncoef = 2 * nsten + 2

    Dp = np.zeros((n_chunks, N, N))
    for chunk in prange(n_chunks):
        D = Dp[chunk]
        idx = np.empty(ncoef, np.int64)
        cw = np.empty(ncoef, np.float64)
        wz = np.empty(3, np.float64)
        ws = np.empty(3, np.float64)
        for i in range(chunk, N, n_chunks):
            z1i = node_z1[i]
            zri = node_zr[i]
            for j in range(i, N):
                wm_ij = wmx[i] * wmx[j]
                if wm_ij < ww_cutoff:
                    continue
                pair = 1.0 if j == i else 2.0
                base = omega[i] * omega[j] * wm_ij * pair * inv_M
                z1j = node_z1[j]
                zrj = node_zr[j]
                for m in range(M):
                    s2y = zrj * cphi[m]
                    s2z = zrj * sphi[m]
                    vx = z1j - z1i
                    vy = s2y - zri
                    vz = s2z
                    V2 = vx * vx + vy * vy + vz * vz
                    if V2 < 1e-28:
                        continue
                    Vabs = np.sqrt(V2)
                    vhx = vx / Vabs
                    vhy = vy / Vabs
                    vhz = vz / Vabs
                    # frame (e1, e2) orthogonal to V: cross with the axis
                    # least aligned with V for robustness
                    avx = abs(vhx)
                    avy = abs(vhy)
                    avz = abs(vhz)
                    ax = 0.0
                    ay = 0.0
                    az = 0.0
                    if avx <= avy and avx <= avz:
                        ax = 1.0
                    elif avy <= avz:
                        ay = 1.0
                    else:
                        az = 1.0
                    e1x = vhy * az - vhz * ay
                    e1y = vhz * ax - vhx * az
                    e1z = vhx * ay - vhy * ax
                    en = np.sqrt(e1x * e1x + e1y * e1y + e1z * e1z)
                    e1x /= en
                    e1y /= en
                    e1z /= en
                    e2x = vhy * e1z - vhz * e1y
                    e2y = vhz * e1x - vhx * e1z
                    e2z = vhx * e1y - vhy * e1x
                    Bfac = Vabs ** gamma
                    z1lo = z1[0]
                    z1hi = z1[n1m1]
                    srhi = sr[nr - 1]
                    for k in range(ntheta):
                        d = Vabs * ct[k]
                        wk = base * wtb[k] * Bfac * weps
                        ctk = ct[k]
                        stk = st[k]
                        for p in range(neps):
                            apx = ctk * vhx + stk * (ce[p] * e1x + se[p] * e2x)
                            apy = ctk * vhy + stk * (ce[p] * e1y + se[p] * e2y)
                            apz = ctk * vhz + stk * (ce[p] * e1z + se[p] * e2z)
                            px = z1i + d * apx
                            py = zri + d * apy
                            pz = d * apz
                            qx = z1j - d * apx
                            qy = s2y - d * apy
                            qz = s2z - d * apz
                            sp = py * py + pz * pz
                            sq = qy * qy + qz * qz
                            # clamp post-collision points onto the grid hull:
                            # outward extrapolation would amplify noise at the
                            # exponentially weighted tail nodes; the affected
                            # configurations carry weight w(z)w(z*) <= e^-zmax^2
                            if px < z1lo:
                                px = z1lo
                            elif px > z1hi:
                                px = z1hi
                            if qx < z1lo:
                                qx = z1lo
                            elif qx > z1hi:
                                qx = z1hi
                            if sp > srhi:
                                sp = srhi
                            if sq > srhi:
                                sq = srhi

                            nn = 0
                            st1 = _bracket(z1, px, 3)
                            _lagrange_weights(z1, st1, 3, px, wz)
                            st2 = _bracket(sr, sp, s_order)
                            _lagrange_weights(sr, st2, s_order, sp, ws)
                            for a in range(3):
                                rowbase = (st1 + a) * nr + st2
                                for b in range(s_order):
                                    idx[nn] = rowbase + b
                                    cw[nn] = wz[a] * ws[b]
                                    nn += 1
                            st1 = _bracket(z1, qx, 3)
                            _lagrange_weights(z1, st1, 3, qx, wz)
                            st2 = _bracket(sr, sq, s_order)
                            _lagrange_weights(sr, st2, s_order, sq, ws)
                            for a in range(3):
                                rowbase = (st1 + a) * nr + st2
                                for b in range(s_order):
                                    idx[nn] = rowbase + b
                                    cw[nn] = wz[a] * ws[b]
                                    nn += 1
                            idx[nn] = i
                            cw[nn] = -1.0
                            nn += 1
                            idx[nn] = j
                            cw[nn] = -1.0
                            nn += 1

                            for a in range(nn):
                                ca = cw[a] * wk
                                ia = idx[a]
                                for b in range(nn):
                                    D[ia, idx[b]] += ca * cw[b]

    Dout = np.zeros((N, N))
    for c in range(n_chunks):
        Dout += Dp[c]
    return Dout


@njit(parallel=True, cache=True)
def grid_collision_frequency(node_z1, node_zr, omega, wmx, cphi, sphi,
                             gamma, angular_mass):
    """Damping frequency implied by the grid quadrature itself:
    nu_grid(zeta_i) = angular_mass * sum_j omega_j <|zeta_i - zeta_j|^gamma>_phi w(zeta_j).

    Used only as a diagnostic of assembly quadrature quality (compare with
    the high-accuracy radial quadrature).
    """
    N = node_z1.shape[0]
    M = cphi.shape[0]
    out = np.zeros(N)
    for i in prange(N):
        acc = 0.0
        for j in range(N):
            s = 0.0
            for m in range(M):
                dx = node_z1[j] - node_z1[i]
                dy = node_zr[j] * cphi[m] - node_zr[i]
                dz = node_zr[j] * sphi[m]
                s += (dx * dx + dy * dy + dz * dz) ** (0.5 * gamma)
            acc += omega[j] * wmx[j] * s / M
        out[i] = angular_mass * acc
    return out

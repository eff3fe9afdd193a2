"""Exponential integrals E1/En and the streaming kernel H(z, x).

E1(x) = integral over z in (0, 1] of exp(-x/z)/z dz, equivalently the
integral of exp(-t)/t over [x, inf).  Small arguments use the classical
series -gamma - ln x + sum_k (-1)^(k+1) x^k / (k * k!); large arguments use
a continued fraction.  Both branches are validated against adaptive
quadrature in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Euler-Mascheroni constant, 20 digits.
EULER_GAMMA = 0.57721566490153286061

# Above this argument exp(-x) underflows and E1 is indistinguishable from 0.
UNDERFLOW_X = 700.0

_SERIES_CF_SWITCH = 1.0


@dataclass(frozen=True)
class E1Result:
    """Value of E1 plus which branch produced it and an error estimate."""

    value: float
    branch: str  # "series" or "continued_fraction"
    est_error: float
    underflow: bool = False


def _e1_series_full(x: float) -> tuple[float, float]:
    """Series branch, summed until the next term is below roundoff."""
    total = -EULER_GAMMA - math.log(x)
    term = 1.0
    k = 0
    while True:
        k += 1
        term *= -x / k
        contrib = -term / k  # equals (-1)^(k+1) x^k / (k * k!)
        total += contrib
        nxt = abs(term * x / ((k + 1) * (k + 1)))
        if nxt < 1e-18 * max(abs(total), 1e-300) or k > 200:
            break
    # Alternating tail plus accumulated roundoff.
    err = nxt + 5e-16 * (abs(total) + abs(math.log(x)) + 1.0)
    return total, err


def _e1_continued_fraction(x: float) -> tuple[float, float]:
    """Modified Lentz evaluation of E1(x) = e^-x / (x+1 - 1/(x+3 - 4/(...)))."""
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    f = d
    delta = 0.0
    for n in range(1, 300):
        a = -(n * n)
        b += 2.0
        d = b + a * d
        if d == 0.0:
            d = tiny
        c = b + a / c
        if c == 0.0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    val = math.exp(-x) * f
    err = abs(delta - 1.0) * abs(val) + 5e-16 * abs(val)
    return val, err


def exp_integral_E1(x: float) -> E1Result:
    """Evaluate E1(x) for x > 0.

    Relative accuracy is ~1e-14; strictly positive and decreasing.  For
    x > 700 the result underflows to 0 and is flagged.
    """
    if not x > 0.0:
        raise ValueError(f"E1 requires x > 0, got {x}")
    if x > UNDERFLOW_X:
        return E1Result(0.0, "continued_fraction", 0.0, underflow=True)
    if x <= _SERIES_CF_SWITCH:
        val, err = _e1_series_full(x)
        return E1Result(val, "series", err)
    val, err = _e1_continued_fraction(x)
    return E1Result(val, "continued_fraction", err)


def e1_series(x: float, n_terms: int) -> float:
    """Truncated series -gamma - ln x + sum_{k=1}^{n_terms} (-1)^(k+1) x^k/(k k!).

    Only valid on (0, 1] where the expansion is useful.
    """
    if not 0.0 < x <= 1.0:
        raise ValueError(f"series expansion restricted to (0, 1], got x={x}")
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    total = -EULER_GAMMA - math.log(x)
    term = 1.0
    for k in range(1, n_terms + 1):
        term *= -x / k
        total -= term / k
    return total


def e1_sum_only(x: float, n_terms: int) -> float:
    """The pure power-series part (without -gamma - ln x)."""
    term = 1.0
    total = 0.0
    for k in range(1, n_terms + 1):
        term *= -x / k
        total -= term / k
    return total


def e1_bounds(x: float) -> tuple[float, float]:
    """Two-sided envelope (1/2) e^-x ln(1 + 2/x) <= E1(x) <= e^-x ln(1 + 1/x)."""
    if not x > 0.0:
        raise ValueError(f"bounds require x > 0, got {x}")
    ex = math.exp(-x)
    lower = 0.5 * ex * math.log1p(2.0 / x)
    upper = ex * math.log1p(1.0 / x)
    return lower, upper


def exp_integral_En(n: int, x: float) -> float:
    """Generalized exponential integral E_n(x) = int_1^inf e^{-x t} t^{-n} dt.

    Built from E1 by the upward recurrence E_{k+1} = (e^-x - x E_k)/k,
    which is stable for the small n (<= 4) used here.  E_n(0) = 1/(n-1)
    for n >= 2.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if x < 0.0:
        raise ValueError("x must be >= 0")
    if x == 0.0:
        if n == 1:
            raise ValueError("E1 diverges at x = 0")
        return 1.0 / (n - 1)
    if x > UNDERFLOW_X:
        return 0.0
    val = exp_integral_E1(x).value
    if n == 1:
        return val
    ex = math.exp(-x)
    for k in range(1, n):
        val = (ex - x * val) / k
    return val


def h_kernel(z: float, x: float, nu_over_rho: float) -> float:
    """Attenuation kernel H(z, x) = -int_z^1 exp(-(nu_over_rho) x / u) / u du.

    Closed form via exponential integrals: H = E1(c/z) - E1(c) with
    c = nu_over_rho * x.  Always <= 0, H(1, x) = 0, H(z, 0) = ln z and
    |H(z, x)| <= |ln z|.
    """
    if not 0.0 < z <= 1.0:
        raise ValueError(f"z must be in (0, 1], got {z}")
    if x < 0.0:
        raise ValueError(f"x must be >= 0, got {x}")
    if not nu_over_rho > 0.0:
        raise ValueError(f"nu_over_rho must be > 0, got {nu_over_rho}")
    if z == 1.0:
        return 0.0
    if x == 0.0:
        return math.log(z)
    c = nu_over_rho * x
    if c > UNDERFLOW_X:
        return 0.0
    big = c / z
    e_big = exp_integral_E1(big).value if big <= UNDERFLOW_X else 0.0
    return e_big - exp_integral_E1(c).value

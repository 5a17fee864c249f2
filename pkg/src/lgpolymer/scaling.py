"""Special functions, model constants and lattice scaling maps.

The polygamma-type functions are evaluated by the classic scheme: shift the
argument up by the recurrence until it is large, then apply the de Moivre
asymptotic expansion.  Everything here is deterministic scalar math; the
Monte Carlo side of the package only consumes the frozen constants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

_EULER_GAMMA = 0.5772156649015328606065120900824024

# Bernoulli-number coefficients B_2k / 2k for the digamma tail
_DIGAMMA_TAIL = (
    (2, 1.0 / 12.0),
    (4, -1.0 / 120.0),
    (6, 1.0 / 252.0),
    (8, -1.0 / 240.0),
    (10, 1.0 / 132.0),
    (12, -691.0 / 32760.0),
    (14, 1.0 / 12.0),
)

# B_2k coefficients for the trigamma tail: psi'(x) ~ 1/x + 1/(2x^2) + sum B_2k x^(-2k-1)
_TRIGAMMA_TAIL = (
    (3, 1.0 / 6.0),
    (5, -1.0 / 30.0),
    (7, 1.0 / 42.0),
    (9, -1.0 / 30.0),
    (11, 5.0 / 66.0),
    (13, -691.0 / 2730.0),
    (15, 7.0 / 6.0),
)

# tail of S(a) = sum_{n>=0} (n+a)^-3 ~ 1/(2a^2) + 1/(2a^3) + sum (2k+1) B_2k / (2 a^(2k+2))
_CUBE_TAIL = (
    (4, 3.0 / 12.0),
    (6, -5.0 / 60.0),
    (8, 7.0 / 84.0),
    (10, -9.0 / 60.0),
    (12, 55.0 / 132.0),
)

_SHIFT_AT = 16.0


def digamma(x: float) -> float:
    """Logarithmic derivative of the gamma function on (0, inf)."""
    if not x > 0.0:
        raise ValueError(f"digamma defined here for x > 0, got {x}")
    acc = 0.0
    while x < _SHIFT_AT:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    tail = 0.0
    power = inv2
    for _, coef in _DIGAMMA_TAIL:
        tail += coef * power
        power *= inv2
    return acc + math.log(x) - 0.5 / x - tail


def trigamma(x: float) -> float:
    """Derivative of :func:`digamma`; strictly decreasing and positive."""
    if not x > 0.0:
        raise ValueError(f"trigamma defined here for x > 0, got {x}")
    acc = 0.0
    while x < _SHIFT_AT:
        acc += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    tail = inv + 0.5 * inv2
    power = inv2 * inv
    for _, coef in _TRIGAMMA_TAIL:
        tail += coef * power
        power *= inv2
    return acc + tail


def inverse_cube_sum(a: float) -> float:
    """sum_{n >= 0} 1/(n + a)^3 by recurrence shift plus asymptotic tail."""
    if not a > 0.0:
        raise ValueError(f"need a > 0, got {a}")
    acc = 0.0
    while a < _SHIFT_AT:
        acc += 1.0 / (a * a * a)
        a += 1.0
    inv = 1.0 / a
    inv2 = inv * inv
    tail = 0.5 * inv2 + 0.5 * inv2 * inv
    power = inv2 * inv2
    for _, coef in _CUBE_TAIL:
        tail += coef * power
        power *= inv2
    return acc + tail


def temperature_ratio(theta: float, z: float) -> float:
    """trigamma(theta - z) / trigamma(z): increasing bijection (0,theta) -> (0,inf)."""
    if not 0.0 < z < theta:
        raise ValueError(f"need 0 < z < theta, got z={z}, theta={theta}")
    return trigamma(theta - z) / trigamma(z)


def temperature_ratio_inverse(theta: float, x: float) -> float:
    """Inverse of :func:`temperature_ratio` for x > 0, by bisection.

    The midpoint ``theta/2`` maps to 1 exactly, so the bracket halves are
    chosen from the sign of ``x - 1``.
    """
    if not x > 0.0:
        raise ValueError(f"need x > 0, got {x}")
    if x == 1.0:
        return 0.5 * theta
    lo, hi = (0.0, 0.5 * theta) if x < 1.0 else (0.5 * theta, theta)
    # g(z) -> 0 at z -> 0+ and -> inf at z -> theta-, so the open bracket is valid;
    # evaluate at interior points only.
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if temperature_ratio(theta, mid) < x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def tilt_free_energy(theta: float, x: float) -> float:
    """x * digamma(z) + digamma(theta - z) at z = ratio-inverse of x."""
    z = temperature_ratio_inverse(theta, x)
    return x * digamma(z) + digamma(theta - z)


def curvature_scale(theta: float, x: float) -> float:
    """Cube root of x * (cube-sum at z) + x * (cube-sum at theta - z)."""
    z = temperature_ratio_inverse(theta, x)
    return (x * inverse_cube_sum(z) + x * inverse_cube_sum(theta - z)) ** (1.0 / 3.0)


@dataclass(frozen=True)
class ThetaConstants:
    """Frozen per-theta constants used by the scaling maps and drift terms."""

    theta: float
    p: float          # linear drift rate: -digamma(theta/2)
    sigma_p: float    # trigamma(theta/2) ** -1/2
    d1: float         # curvature scale at argument 1
    q: float          # 2^(-5/6) * sigma_p / d1
    h1: float         # tilt free energy at 1 (= 2 * digamma(theta/2))


def constants(theta: float) -> ThetaConstants:
    if not theta > 0.0:
        raise ValueError(f"theta must be positive, got {theta}")
    half = 0.5 * theta
    p = -digamma(half)
    sigma_p = trigamma(half) ** -0.5
    d1 = curvature_scale(theta, 1.0)
    q = 2.0 ** (-5.0 / 6.0) * sigma_p / d1
    return ThetaConstants(theta=theta, p=p, sigma_p=sigma_p, d1=d1, q=q,
                          h1=tilt_free_energy(theta, 1.0))


# ---------------------------------------------------------------------------
# lattice scaling maps
# ---------------------------------------------------------------------------

_ULPS = 8.0
_EPS = 2.0 ** -52


def guarded_floor(t: float) -> int:
    """floor with a snap-to-integer guard a few ulps wide.

    Products like N^(2/3) * x / q^2 can land half an ulp below an exact
    integer; values within ``8 ulp`` of an integer are treated as that
    integer before flooring.
    """
    r = round(t)
    if abs(t - r) <= _ULPS * _EPS * max(1.0, abs(t)):
        return int(r)
    return math.floor(t)


def spatial_index(N: int, x: float, consts: ThetaConstants) -> int:
    """floor(N^(2/3) x / q^2) + 1: start-side column map."""
    return guarded_floor(float(N) ** (2.0 / 3.0) * x / (consts.q * consts.q)) + 1


def spatial_index_far(N: int, y: float, consts: ThetaConstants) -> int:
    """floor(N^(2/3) y / q^2) + 2N: end-side column map on the 2N-line strip."""
    return guarded_floor(float(N) ** (2.0 / 3.0) * y / (consts.q * consts.q)) + 2 * N


def temporal_index(N: int, t: float) -> int:
    """floor(2 N t): row map for the time axis."""
    return guarded_floor(2.0 * float(N) * t)


def fluctuation_scale(N: int, consts: ThetaConstants) -> float:
    """2^(-1/2) q sigma_p N^(-1/3): the factor taking raw values to scaled ones."""
    return 2.0 ** -0.5 * consts.q * consts.sigma_p * float(N) ** (-1.0 / 3.0)


# ---------------------------------------------------------------------------
# direction parametrization and the limiting free-energy density
# ---------------------------------------------------------------------------

def characteristic_direction(theta: float, rho: float) -> tuple[float, float]:
    """Unit-sum direction (xi1, xi2) attached to parameter rho in (0, theta)."""
    if not 0.0 < rho < theta:
        raise ValueError(f"need 0 < rho < theta, got rho={rho}")
    a = trigamma(rho)
    b = trigamma(theta - rho)
    s = a + b
    return a / s, b / s

#: which closed form the free-energy density uses; embedded in reports.
SHAPE_FORM = "-(xi1 * digamma(theta - rho) + xi2 * digamma(rho))"


def shape(theta: float, rho: float) -> float:
    """Limiting free energy per unit of |w|_1 in direction xi(rho).

    The two digamma slots pair with the *opposite* component of the
    direction; this is the unique assignment that is stationary on the
    diagonal and agrees with the variational (stationary-boundary) form
    ``min over r of -xi1 digamma(r) - xi2 digamma(theta - r)``, whose
    minimizer for direction xi(rho) is ``r = theta - rho``.
    """
    xi1, xi2 = characteristic_direction(theta, rho)
    return -(xi1 * digamma(theta - rho) + xi2 * digamma(rho))


def shape_at_lattice(theta: float, w1: float, w2: float) -> float:
    """Free-energy density scaled to the lattice vector (w1, w2), both > 0."""
    if not (w1 > 0 and w2 > 0):
        raise ValueError(f"need positive lattice vector, got ({w1}, {w2})")
    # xi1/xi2 = w1/w2  <=>  trigamma(rho)/trigamma(theta-rho) = w1/w2
    #                  <=>  temperature_ratio(rho) = w2/w1
    rho = temperature_ratio_inverse(theta, w2 / w1)
    return (w1 + w2) * shape(theta, rho)

"""Real roots of polynomials of degree <= 3.

Closed forms pick the roots (trigonometric form for three real roots,
Cardano for one), then each root gets a Newton polish in long double,
which recovers the digits Cardano loses near multiple roots.
"""

import math

import numpy as np

__all__ = ["real_roots"]


def _poly(c, x):
    a, b, cc, d = c
    return ((a * x + b) * x + cc) * x + d


def _dpoly(c, x):
    a, b, cc, _ = c
    return (3 * a * x + 2 * b) * x + cc


def _polish(c, x, steps=4):
    cl = tuple(np.longdouble(v) for v in c)
    xl = np.longdouble(x)
    best, fbest = xl, abs(_poly(cl, xl))
    for _ in range(steps):
        d = _dpoly(cl, xl)
        if d == 0:
            break
        xl = xl - _poly(cl, xl) / d
        fx = abs(_poly(cl, xl))
        if fx < fbest:
            best, fbest = xl, fx
    return float(best)


def _quadratic(b, c, d):
    if b == 0:
        return [] if c == 0 else [-d / c]
    disc = c * c - 4 * b * d
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    # avoid cancellation
    t = -0.5 * (c + math.copysign(sq, c))
    if t == 0:
        return [0.0, 0.0]
    return sorted([t / b, d / t])


def real_roots(a, b, c, d, rel_eps=1e-14):
    """Sorted real roots of a x^3 + b x^2 + c x + d (multiple roots repeated)."""
    scale = max(abs(a), abs(b), abs(c), abs(d))
    if scale == 0:
        raise ValueError("zero polynomial")
    if abs(a) < rel_eps * scale:
        return _quadratic(b, c, d)

    B, C, D = b / a, c / a, d / a
    shift = B / 3.0
    p = C - B * B / 3.0
    q = 2.0 * B ** 3 / 27.0 - B * C / 3.0 + D
    disc = -(4.0 * p ** 3 + 27.0 * q * q)
    disc_scale = max(abs(4.0 * p ** 3), 27.0 * q * q, 1e-300)

    if abs(disc) <= 1e-12 * disc_scale:
        if abs(p) <= 1e-15 * max(1.0, abs(B)) ** 2:
            ts = [0.0, 0.0, 0.0]
        else:
            ts = [3.0 * q / p, -1.5 * q / p, -1.5 * q / p]
    elif disc > 0:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        phi = math.acos(max(-1.0, min(1.0, arg)))
        ts = [m * math.cos((phi - 2.0 * math.pi * k) / 3.0) for k in range(3)]
    else:
        sq = math.sqrt(q * q / 4.0 + p ** 3 / 27.0)
        ts = [math.copysign(abs(-q / 2.0 + sq) ** (1 / 3), -q / 2.0 + sq)
              + math.copysign(abs(-q / 2.0 - sq) ** (1 / 3), -q / 2.0 - sq)]

    coeffs = (a, b, c, d)
    return sorted(_polish(coeffs, t - shift) for t in ts)

"""Vectorized double-double arithmetic (~31 significant digits).

Each value is an unevaluated sum hi + lo of two float64 arrays with
|lo| <= ulp(hi)/2.  The error-free transforms (two_sum, two_prod with a
Dekker split) follow the classic compensated-arithmetic recipes; they
hold in IEEE round-to-nearest, which numpy guarantees.

The finite-difference oracles in phase_geometry run their stencil sums
in this representation: high-order stencils divide by tiny step products,
so float64 (and even extended precision) evaluation noise dominates the
result long before truncation does.  Double-double pushes the noise floor
to ~1e-31 relative while staying fully vectorized.

Values are plain (hi, lo) tuples of equal-shape ndarrays (scalars work
too); no wrapper class, since these sit on the hot path.
"""

from __future__ import annotations

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def _fast_two_sum(a, b):
    # requires |a| >= |b| elementwise
    s = a + b
    err = b - (s - a)
    return s, err


def _two_prod(a, b):
    p = a * b
    ca = _SPLITTER * a
    ahi = ca - (ca - a)
    alo = a - ahi
    cb = _SPLITTER * b
    bhi = cb - (cb - b)
    blo = b - bhi
    err = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, err


def from_f64(a):
    a = np.asarray(a, dtype=np.float64)
    return a, np.zeros_like(a)


def to_f64(x):
    return x[0] + x[1]


def add(x, y):
    s1, s2 = _two_sum(x[0], y[0])
    t1, t2 = _two_sum(x[1], y[1])
    s2 = s2 + t1
    s1, s2 = _fast_two_sum(s1, s2)
    s2 = s2 + t2
    return _fast_two_sum(s1, s2)


def neg(x):
    return -x[0], -x[1]


def sub(x, y):
    return add(x, neg(y))


def add_f64(x, b):
    s1, s2 = _two_sum(x[0], b)
    s2 = s2 + x[1]
    return _fast_two_sum(s1, s2)


def mul(x, y):
    p1, p2 = _two_prod(x[0], y[0])
    p2 = p2 + (x[0] * y[1] + x[1] * y[0])
    return _fast_two_sum(p1, p2)


def mul_f64(x, b):
    p1, p2 = _two_prod(x[0], b)
    p2 = p2 + x[1] * b
    return _fast_two_sum(p1, p2)


def mul_pwr2(x, b):
    # b must be a power of two: exact rescale
    return x[0] * b, x[1] * b


def div(x, y):
    q1 = x[0] / y[0]
    r = sub(x, mul_f64(y, q1))
    q2 = r[0] / y[0]
    r = sub(r, mul_f64(y, q2))
    q3 = r[0] / y[0]
    s1, s2 = _fast_two_sum(q1, q2)
    return add_f64((s1, s2), q3)


def sqr(x):
    p1, p2 = _two_prod(x[0], x[0])
    p2 = p2 + 2.0 * (x[0] * x[1])
    return _fast_two_sum(p1, p2)


def sqrt(x):
    """Elementwise square root (Karp-Markstein correction step).

    Requires x > 0 (the callers guard the domain); hi = 0 maps to 0.
    """
    hi = x[0]
    inv = np.where(hi > 0.0, 1.0 / np.sqrt(np.where(hi > 0.0, hi, 1.0)), 0.0)
    ax = hi * inv
    err = sub(x, sqr((ax, np.zeros_like(ax))))
    return _fast_two_sum(ax, err[0] * (inv * 0.5))

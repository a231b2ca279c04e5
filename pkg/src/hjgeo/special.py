"""Incomplete elliptic integrals via Carlson's symmetric forms.

The Legendre functions take the *sine* of the amplitude as first argument
and the *parameter* m = kappa^2 as the modulus argument by default, e.g.

    F(z, m) = int_0^z dt / sqrt((1 - t^2)(1 - m t^2)).

This is the convention under which :func:`mtt_reduced_closed_form` agrees
with direct quadrature of the reduced equation; the other conventions stay
selectable for comparison.

Duplication algorithms follow B. C. Carlson, "Numerical computation of real
or complex elliptic integrals", Numer. Algorithms 10 (1995).
"""

from __future__ import annotations

import math

RTOL = 1e-16


class EllipticDomainError(ValueError):
    pass


def _sum_abs_max(a0, *vals):
    return max(abs(a0 - v) for v in vals)


def carlson_rc(x: float, y: float, rtol: float = RTOL) -> float:
    """R_C(x, y) for x >= 0, y > 0."""
    if x < 0 or y <= 0:
        raise EllipticDomainError(f"R_C requires x >= 0, y > 0 (got {x}, {y})")
    a0 = (x + 2.0 * y) / 3.0
    q = (3.0 * rtol) ** (-1.0 / 8.0) * abs(a0 - x)
    a, xm, ym = a0, x, y
    pow4 = 1.0
    while pow4 * q >= abs(a):
        lam = 2.0 * math.sqrt(xm) * math.sqrt(ym) + ym
        a = (a + lam) / 4.0
        xm = (xm + lam) / 4.0
        ym = (ym + lam) / 4.0
        pow4 /= 4.0
    s = (y - a0) * pow4 / a
    return (1.0 + s * s * (3.0 / 10.0 + s * (1.0 / 7.0 + s * (3.0 / 8.0 + s * (9.0 / 22.0
            + s * (159.0 / 208.0 + s * 9.0 / 8.0)))))) / math.sqrt(a)


def carlson_rf(x: float, y: float, z: float, rtol: float = RTOL) -> float:
    """R_F(x, y, z); arguments non-negative, at most one zero."""
    if min(x, y, z) < 0 or (x == 0) + (y == 0) + (z == 0) > 1:
        raise EllipticDomainError(f"R_F requires non-negative arguments, at most one zero (got {x}, {y}, {z})")
    a0 = (x + y + z) / 3.0
    q = (3.0 * rtol) ** (-1.0 / 6.0) * _sum_abs_max(a0, x, y, z)
    a, xm, ym, zm = a0, x, y, z
    pow4 = 1.0
    while pow4 * q >= abs(a):
        sx, sy, sz = math.sqrt(xm), math.sqrt(ym), math.sqrt(zm)
        lam = sx * sy + sy * sz + sz * sx
        a = (a + lam) / 4.0
        xm, ym, zm = (xm + lam) / 4.0, (ym + lam) / 4.0, (zm + lam) / 4.0
        pow4 /= 4.0
    X = (a0 - x) * pow4 / a
    Y = (a0 - y) * pow4 / a
    Z = -X - Y
    e2 = X * Y - Z * Z
    e3 = X * Y * Z
    return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) / math.sqrt(a)


def carlson_rd(x: float, y: float, z: float, rtol: float = RTOL) -> float:
    """R_D(x, y, z); x, y >= 0 not both zero, z > 0."""
    if min(x, y) < 0 or z <= 0 or x + y == 0:
        raise EllipticDomainError(f"R_D domain violated (got {x}, {y}, {z})")
    a0 = (x + y + 3.0 * z) / 5.0
    q = (rtol / 4.0) ** (-1.0 / 6.0) * _sum_abs_max(a0, x, y, z)
    a, xm, ym, zm = a0, x, y, z
    pow4 = 1.0
    acc = 0.0
    while pow4 * q >= abs(a):
        sx, sy, sz = math.sqrt(xm), math.sqrt(ym), math.sqrt(zm)
        lam = sx * sy + sy * sz + sz * sx
        acc += pow4 / (sz * (zm + lam))
        a = (a + lam) / 4.0
        xm, ym, zm = (xm + lam) / 4.0, (ym + lam) / 4.0, (zm + lam) / 4.0
        pow4 /= 4.0
    X = (a0 - x) * pow4 / a
    Y = (a0 - y) * pow4 / a
    Z = -(X + Y) / 3.0
    e2 = X * Y - 6.0 * Z * Z
    e3 = (3.0 * X * Y - 8.0 * Z * Z) * Z
    e4 = 3.0 * (X * Y - Z * Z) * Z * Z
    e5 = X * Y * Z * Z * Z
    series = (1.0 - 3.0 * e2 / 14.0 + e3 / 6.0 + 9.0 * e2 * e2 / 88.0 - 3.0 * e4 / 22.0
              - 9.0 * e2 * e3 / 52.0 + 3.0 * e5 / 26.0)
    return pow4 * series / (a * math.sqrt(a)) + 3.0 * acc


def carlson_rj(x: float, y: float, z: float, p: float, rtol: float = RTOL) -> float:
    """R_J(x, y, z, p); x, y, z >= 0 with at most one zero, p > 0."""
    if min(x, y, z) < 0 or (x == 0) + (y == 0) + (z == 0) > 1 or p <= 0:
        raise EllipticDomainError(f"R_J domain violated (got {x}, {y}, {z}, {p})")
    a0 = (x + y + z + 2.0 * p) / 5.0
    delta = (p - x) * (p - y) * (p - z)
    q = (rtol / 4.0) ** (-1.0 / 6.0) * _sum_abs_max(a0, x, y, z, p)
    a, xm, ym, zm, pm = a0, x, y, z, p
    pow4 = 1.0
    acc = 0.0
    while pow4 * q >= abs(a):
        sx, sy, sz, sp = math.sqrt(xm), math.sqrt(ym), math.sqrt(zm), math.sqrt(pm)
        lam = sx * sy + sy * sz + sz * sx
        d = (sp + sx) * (sp + sy) * (sp + sz)
        e = delta * pow4 ** 3 / (d * d)
        acc += pow4 / d * carlson_rc(1.0, 1.0 + e, rtol)
        a = (a + lam) / 4.0
        xm, ym, zm, pm = (xm + lam) / 4.0, (ym + lam) / 4.0, (zm + lam) / 4.0, (pm + lam) / 4.0
        pow4 /= 4.0
    X = (a0 - x) * pow4 / a
    Y = (a0 - y) * pow4 / a
    Z = (a0 - z) * pow4 / a
    P = -(X + Y + Z) / 2.0
    e2 = X * Y + X * Z + Y * Z - 3.0 * P * P
    e3 = X * Y * Z + 2.0 * e2 * P + 4.0 * P ** 3
    e4 = (2.0 * X * Y * Z + e2 * P + 3.0 * P ** 3) * P
    e5 = X * Y * Z * P * P
    series = (1.0 - 3.0 * e2 / 14.0 + e3 / 6.0 + 9.0 * e2 * e2 / 88.0 - 3.0 * e4 / 22.0
              - 9.0 * e2 * e3 / 52.0 + 3.0 * e5 / 26.0)
    return pow4 * series / (a * math.sqrt(a)) + 6.0 * acc


# -- Legendre forms ----------------------------------------------------------

def _legendre_args(z: float, kappa: float, first: str, second: str):
    if first == "sine":
        s = z
    elif first == "amplitude":
        s = math.sin(z)
    else:
        raise ValueError(f"first must be 'sine' or 'amplitude', got {first!r}")
    if second == "parameter":
        m = kappa
    elif second == "modulus":
        m = kappa * kappa
    else:
        raise ValueError(f"second must be 'parameter' or 'modulus', got {second!r}")
    if first == "sine" and not -1.0 <= s <= 1.0:
        raise EllipticDomainError(f"sine argument {z} outside [-1, 1]")
    c2 = 1.0 - s * s
    d2 = 1.0 - m * s * s
    if d2 < 0.0:
        raise EllipticDomainError(f"1 - m sin^2 < 0 (m = {m}, sin = {s})")
    return s, m, max(c2, 0.0), d2


def ellip_F(z: float, kappa: float, *, first: str = "sine", second: str = "parameter") -> float:
    """Incomplete elliptic integral of the first kind."""
    s, m, c2, d2 = _legendre_args(z, kappa, first, second)
    if s == 0.0:
        return 0.0
    return s * carlson_rf(c2, d2, 1.0)


def ellip_E(z: float, kappa: float, *, first: str = "sine", second: str = "parameter") -> float:
    """Incomplete elliptic integral of the second kind."""
    s, m, c2, d2 = _legendre_args(z, kappa, first, second)
    if s == 0.0:
        return 0.0
    rf = carlson_rf(c2, d2, 1.0)
    if m == 0.0:
        return s * rf
    return s * rf - m * s ** 3 * carlson_rd(c2, d2, 1.0) / 3.0


def ellip_Pi(z: float, a: float, kappa: float, *, first: str = "sine", second: str = "parameter") -> float:
    """Incomplete elliptic integral of the third kind,

    int_0^z dt / ((1 - a t^2) sqrt((1 - t^2)(1 - m t^2))) in the default convention.
    """
    s, m, c2, d2 = _legendre_args(z, kappa, first, second)
    if s == 0.0:
        return 0.0
    p = 1.0 - a * s * s
    if p <= 0.0:
        raise EllipticDomainError(f"characteristic {a} puts a pole inside the integration range")
    rf = carlson_rf(c2, d2, 1.0)
    if a == 0.0:
        return s * rf
    return s * rf + a * s ** 3 * carlson_rj(c2, d2, 1.0, p) / 3.0


# -- the closed-form reduced solution for the MTT spacetime ------------------

def mtt_discriminant_roots(j1: float, j2: float, m: float) -> tuple[float, float]:
    """Roots (theta_plus, theta_minus) of D(theta) = -j1^2 th^2 - (m^2 + 3 j1^2) th - 4 (m^2 + 2 j1 j2 + j2^2).

    Raises :class:`EllipticDomainError` unless Delta >= 0 and sqrt(Delta) > m^2 + 3 j1^2.
    """
    if j1 == 0.0:
        raise EllipticDomainError("j1 must be non-zero")
    m2 = m * m
    delta = (m2 - j1 * j1 + 4 * j1 * j2) * (m2 - 9 * j1 * j1 - 4 * j1 * j2)
    b = m2 + 3 * j1 * j1
    if delta < 0 or not math.sqrt(delta) > b:
        raise EllipticDomainError(f"inadmissible parameters j = ({j1}, {j2}), m = {m}: Delta = {delta:.6g}")
    sd = math.sqrt(delta)
    return (sd - b) / (2 * j1 * j1), -(sd + b) / (2 * j1 * j1)


def mtt_reduced_derivative(q: float, j1: float, j2: float, m: float, k: float) -> float:
    """dS~/dq on the + branch, (2k(j1+j2)q + 2 sqrt(D(k^2 q^2))) / (4 + k^2 q^2)."""
    th = k * k * q * q
    D = -j1 * j1 * th * th - (m * m + 3 * j1 * j1) * th - 4 * (m * m + 2 * j1 * j2 + j2 * j2)
    if D < 0:
        raise EllipticDomainError(f"q = {q} outside the reduced domain")
    return (2 * k * (j1 + j2) * q + 2 * math.sqrt(D)) / (4 + th)


def _mtt_bracket(q, j1, j2, m, k, first, second):
    tp, tm = mtt_discriminant_roots(j1, j2, m)
    u = 1.0 - k * k * q * q / tp
    if u < 0:
        raise EllipticDomainError(f"|q| = {abs(q)} beyond the turning point sqrt(theta+)/k = {math.sqrt(tp) / k}")
    z = math.sqrt(u)
    par = tp / (tp - tm)
    w = math.sqrt(tp - tm)
    kw = dict(first=first, second=second)
    return (w * ellip_E(z, par, **kw) - (4 + tp) / w * ellip_F(z, par, **kw)
            + (4 + tm) / w * ellip_Pi(z, tp / (4 + tp), par, **kw))


def mtt_reduced_closed_form(q: float, j1: float, j2: float, m: float, k: float, *,
                            literal: bool = False, first: str = "sine", second: str = "parameter") -> float:
    """Closed-form S~(q) for the MTT reduced equation, normalized to S~(0) = 0.

    The bracket of elliptic integrals is even in q and scales with j1, while
    the integral of the square-root term is odd in q and scales with |j1|.
    By default the bracket is therefore weighted by 2|j1| sign(q) / k, which
    is correct on the whole domain; ``literal=True`` keeps the printed
    weight 2 j1 / k, valid only for j1 q > 0.
    """
    if k <= 0:
        raise EllipticDomainError("k must be positive")
    log_term = (j1 + j2) / k * math.log1p(k * k * q * q / 4.0)
    if q == 0.0:
        return 0.0
    bracket = _mtt_bracket(q, j1, j2, m, k, first, second) - _mtt_bracket(0.0, j1, j2, m, k, first, second)
    weight = 2 * j1 / k if literal else 2 * abs(j1) * math.copysign(1.0, q) / k
    return log_term + weight * bracket

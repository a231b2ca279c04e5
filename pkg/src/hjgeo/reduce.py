"""The reduced Hamilton-Jacobi equation on Q.

For one-dimensional Q the reduced equation is a quadratic in p = dS~/dq and
is solved by quadrature.  For higher-dimensional Q only verification of a
user-supplied solution is offered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .chart import CanonicalChart
from .frame import FrameMetric
from .report import Report

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-12
GRID_POINTS = 10_000
ENDPOINT_TOL = 1e-12
ENDPOINT_INSET = 1e-10
MAX_WIDENINGS = 8


class EmptyDomainError(ValueError):
    """No interval with a positive discriminant; (j, m) is inadmissible."""

    def __init__(self, message: str, max_discriminant: float):
        self.max_discriminant = max_discriminant
        super().__init__(f"{message} (max discriminant {max_discriminant:.6g})")


@dataclass(frozen=True, eq=False)
class ReducedQuadratic:
    """A(q) p^2 + B(q) p + Cc(q) = orientation * (G^ij f_i f_j - m^2).

    ``orientation`` (+1 or -1) is fixed so that A(0) > 0; with that choice the
    ``+`` branch is the root carrying ``+sqrt(discriminant)``.
    """

    chart: CanonicalChart
    metric: FrameMetric
    j: tuple
    m: float
    orientation: float
    interval: tuple = (-1.0, 1.0)

    def coefficients(self, q: float) -> tuple[float, float, float]:
        q = np.atleast_1d(q)
        z = self.chart.zeta(q)[:, 0]
        chi = self.chart.chi(q, self.j)
        Gi = self.metric.Ginv
        s = self.orientation
        return (s * float(z @ Gi @ z), s * 2.0 * float(z @ Gi @ chi), s * (float(chi @ Gi @ chi) - self.m ** 2))

    def A(self, q):
        return self.coefficients(q)[0]

    def B(self, q):
        return self.coefficients(q)[1]

    def Cc(self, q):
        return self.coefficients(q)[2]

    def discriminant(self, q: float) -> float:
        a, b, c = self.coefficients(q)
        return b * b - 4.0 * a * c

    def discriminant_many(self, qs) -> np.ndarray:
        """Discriminant on an array of q; NaN where the chart data is undefined."""
        qs = np.asarray(qs, dtype=float)
        Z = self.chart.zeta_many(qs[:, None])[:, :, 0]
        X = self.chart.chi_many(qs[:, None], self.j)
        Gi = self.metric.Ginv
        a = np.einsum("ni,ij,nj->n", Z, Gi, Z)
        b = 2.0 * np.einsum("ni,ij,nj->n", Z, Gi, X)
        c = np.einsum("ni,ij,nj->n", X, Gi, X) - self.m ** 2
        return b * b - 4.0 * a * c

    def hamiltonian_residual(self, q: float, p: float) -> float:
        """G^ij f_i f_j - m^2 at (q, p), computed from f directly."""
        f = self.chart.f_eval(np.atleast_1d(q), np.atleast_1d(p), self.j)
        return float(f @ self.metric.Ginv @ f) - self.m ** 2


def assemble_quadratic(ch: CanonicalChart, G: FrameMetric, j, m: float, interval=(-1.0, 1.0)) -> ReducedQuadratic:
    """Contract the chart with G^ij into the quadratic in p."""
    if ch.r != 1:
        raise ValueError(f"assemble_quadratic needs a one-dimensional Q, chart has r = {ch.r}")
    j = tuple(float(v) for v in np.atleast_1d(j))
    z0 = ch.zeta(np.zeros(1))[:, 0]
    a0 = float(z0 @ G.Ginv @ z0)
    if a0 == 0.0:
        raise ValueError("leading coefficient vanishes at q = 0; the reduced equation is not quadratic there")
    orientation = 1.0 if a0 > 0 else -1.0
    return ReducedQuadratic(ch, G, j, float(m), orientation, tuple(map(float, interval)))


@dataclass(eq=False)
class ReducedSolution:
    """One branch of dS~/dq and its integral S~(q) = int_0^q p(u) du."""

    quadratic: ReducedQuadratic
    branch: int
    domain: tuple[float, float]
    epsabs: float = QUAD_EPSABS
    epsrel: float = QUAD_EPSREL
    shift: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def params(self):
        return self.quadratic.j, self.quadratic.m

    def contains(self, q: float, margin: float = 0.0) -> bool:
        lo, hi = self.domain
        w = (hi - lo) * margin
        return lo + w < q < hi - w

    def derivative(self, q: float) -> float:
        a, b, c = self.quadratic.coefficients(q)
        disc = max(b * b - 4.0 * a * c, 0.0)
        return (-b + self.branch * math.sqrt(disc)) / (2.0 * a)

    def second_derivative(self, q: float, h: float = 1e-6) -> float:
        return (self.derivative(q + h) - self.derivative(q - h)) / (2 * h)

    def value_with_error(self, q: float, epsabs: float | None = None, epsrel: float | None = None):
        """(S~(q), quadrature error estimate)."""
        q = float(q)
        lo, hi = self.domain
        if not lo - ENDPOINT_INSET <= q <= hi + ENDPOINT_INSET:
            raise ValueError(f"q = {q} outside the reduced domain {self.domain}")
        q = min(max(q, lo + ENDPOINT_INSET), hi - ENDPOINT_INSET)
        ea = self.epsabs if epsabs is None else epsabs
        er = self.epsrel if epsrel is None else epsrel
        key = (q, ea, er)
        if key not in self._cache:
            if q == 0.0:
                self._cache[key] = (0.0, 0.0)
            else:
                val, err = integrate.quad(self.derivative, 0.0, q, epsabs=ea, epsrel=er, limit=200)
                self._cache[key] = (val, err)
        val, err = self._cache[key]
        return val + self.shift, err

    def value(self, q: float) -> float:
        return self.value_with_error(q)[0]

    def unshifted_value(self, q: float) -> float:
        return self.value_with_error(q)[0] if self.shift == 0.0 else self.shifted(-self.shift).value(q)

    def __call__(self, q: float) -> float:
        return self.value(q)

    def gradient(self, q) -> np.ndarray:
        return np.array([self.derivative(float(np.atleast_1d(q)[0]))])

    def shifted(self, constant: float) -> "ReducedSolution":
        """Same solution plus an additive constant."""
        # the cache holds unshifted values, so it can be shared
        return ReducedSolution(self.quadratic, self.branch, self.domain, self.epsabs, self.epsrel,
                               self.shift + constant, self._cache)


def _refine(disc, inside: float, outside: float, tol: float = ENDPOINT_TOL) -> float:
    """Bisect for the sign change of ``disc`` between an inside and outside point."""
    a, b = inside, outside
    while abs(b - a) > tol:
        mid = 0.5 * (a + b)
        if mid == a or mid == b:
            break
        if disc(mid) > 0.0:
            a = mid
        else:
            b = mid
    return a if disc(b) <= 0.0 else b


def find_domain(rq: ReducedQuadratic, interval=None, points: int = GRID_POINTS) -> tuple[float, float]:
    """The open interval around q = 0 where the discriminant is positive.

    The search grid covers ``interval`` and is widened while the positive
    region reaches its edges.
    """
    lo, hi = rq.interval if interval is None else interval
    disc = rq.discriminant
    for _ in range(MAX_WIDENINGS + 1):
        grid = np.linspace(lo, hi, points)
        if 0.0 not in grid:
            grid = np.sort(np.append(grid, 0.0))
        d = rq.discriminant_many(grid)
        pos = d > 0.0
        if not pos.any():
            raise EmptyDomainError("no real solution of the reduced equation", float(np.nanmax(d)))
        i0 = int(np.searchsorted(grid, 0.0))
        if not pos[i0]:
            raise EmptyDomainError("discriminant is not positive at q = 0", float(np.nanmax(d)))
        left = i0
        while left > 0 and pos[left - 1]:
            left -= 1
        right = i0
        while right < len(grid) - 1 and pos[right + 1]:
            right += 1
        widen_left = left == 0
        widen_right = right == len(grid) - 1
        if not (widen_left or widen_right):
            q_lo = _refine(disc, grid[left], grid[left - 1])
            q_hi = _refine(disc, grid[right], grid[right + 1])
            return q_lo, q_hi
        width = hi - lo
        if widen_left:
            lo -= width
        if widen_right:
            hi += width
    # still positive at the edges of a very wide search: treat as unbounded there
    return (-math.inf if widen_left else _refine(disc, grid[left], grid[left - 1]),
            math.inf if widen_right else _refine(disc, grid[right], grid[right + 1]))


def solve_branch(rq: ReducedQuadratic, branch: int | str = +1, interval=None) -> ReducedSolution:
    """Solve for p(q) on the given branch and wrap it as a :class:`ReducedSolution`."""
    if branch in ("+", "+1"):
        branch = 1
    elif branch in ("-", "-1"):
        branch = -1
    if branch not in (1, -1):
        raise ValueError(f"branch must be +1 or -1, got {branch!r}")
    return ReducedSolution(rq, int(branch), find_domain(rq, interval))


def verify_reduced(ch: CanonicalChart, G: FrameMetric, j, m: float, gradient, samples: int = 100,
                   seed: int = 0, q_box=None, tol: float = 1e-10) -> Report:
    """Residual of G^ij f_i(q, dS~/dq) f_j(q, dS~/dq) - m^2 at random q.

    ``gradient(q)`` returns dS~/dq as an r-vector.
    """
    rng = np.random.default_rng(seed)
    box = np.tile([-1.0, 1.0], (ch.r, 1)) if q_box is None else np.asarray(q_box, dtype=float)
    worst = 0.0
    for _ in range(samples):
        q = rng.uniform(box[:, 0], box[:, 1])
        p = np.atleast_1d(gradient(q))
        f = ch.f_eval(q, p, j)
        worst = max(worst, abs(float(f @ G.Ginv @ f) - m * m))
    rep = Report("reduced equation")
    rep.check("reduced HJ residual", worst, tol)
    return rep

"""The complete integral S(x; alpha) = S~(phi(x, q)) + int_x0^x chi_k(phi(., q); j) omega^k.

For a one-dimensional Q the parameters are alpha = (q, j1..js, m).  For a
zero-dimensional Q (abelian case, every orbit a point) alpha = (j1..js) and
m^2 = G^ij chi_i chi_j is derived.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .chart import CanonicalChart
from .frame import FrameField, coframe_at, metric_contravariant
from .reduce import QUAD_EPSABS, QUAD_EPSREL, ReducedSolution, assemble_quadratic, solve_branch
from .report import Report

CLOSEDNESS_H = 1e-5
CLOSEDNESS_TOL = 1e-6
CLOSEDNESS_SAMPLES = 20
FD_H = 1e-3  # step for the fourth-order x-gradient stencil
ALPHA_H = 1e-6
NONDEG_H = 1e-5
DOMAIN_SHRINK = 0.05


class ClosednessError(ValueError):
    """The one-form chi_k omega^k is not closed, so the line integral is path dependent."""


class OutsideDomainError(ValueError):
    """phi(x, q) is outside the domain of the reduced solution."""


# -- the one-form and its line integral ------------------------------------

def one_form(ch: CanonicalChart, F: FrameField, x, q, j) -> np.ndarray:
    """a_l(x) = sum_k chi_k(phi(x, q); j) omega^k_l(x)."""
    x = np.asarray(x, dtype=float)
    # a = omega^T chi = Xi^{-1} chi
    return np.linalg.solve(F.matrix(x), ch.chi(ch.phi(x, q), j))


def line_integral(ch: CanonicalChart, F: FrameField, x0, x, q, j, epsabs=QUAD_EPSABS,
                  epsrel=QUAD_EPSREL) -> float:
    """int of chi_k omega^k along the straight segment x0 -> x."""
    x0 = np.asarray(x0, dtype=float)
    dx = np.asarray(x, dtype=float) - x0
    if not dx.any():
        return 0.0
    val, _ = integrate.quad(lambda t: float(one_form(ch, F, x0 + t * dx, q, j) @ dx), 0.0, 1.0,
                            epsabs=epsabs, epsrel=epsrel, limit=200)
    return val


def loop_integral(ch: CanonicalChart, F: FrameField, points, q, j) -> float:
    """Sum of segment integrals around the closed polygon through ``points``."""
    pts = [np.asarray(p, dtype=float) for p in points]
    return sum(line_integral(ch, F, a, b, q, j) for a, b in zip(pts, pts[1:] + pts[:1]))


def closedness_residual(ch: CanonicalChart, F: FrameField, x, q, j, h: float = CLOSEDNESS_H) -> float:
    """max_{i,l} |d_i a_l - d_l a_i| at x by central differences."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    D = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        D[i] = (one_form(ch, F, x + e, q, j) - one_form(ch, F, x - e, q, j)) / (2 * h)
    return float(np.abs(D - D.T).max(initial=0.0))


def closedness_check(ch: CanonicalChart, F: FrameField, q, j, samples: int = CLOSEDNESS_SAMPLES,
                     seed: int = 0, box=None, tol: float = CLOSEDNESS_TOL) -> Report:
    rng = np.random.default_rng(seed)
    box = np.tile([-1.0, 1.0], (ch.n, 1)) if box is None else np.asarray(box, dtype=float)
    worst = 0.0
    for x in rng.uniform(box[:, 0], box[:, 1], size=(samples, ch.n)):
        worst = max(worst, closedness_residual(ch, F, x, q, j))
    rep = Report("closedness")
    rep.check("d(chi_k omega^k) = 0", worst, tol)
    return rep


# -- the complete integral ---------------------------------------------------

def split_alpha(model, alpha):
    """(q, j, m) from the parameter vector; m is None when derived."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    r, s, n = model.r, model.s, model.n
    if r == 0:
        if len(alpha) != s:
            raise ValueError(f"alpha must have {s} entries (j1..j{s}), got {len(alpha)}")
        return np.zeros(0), alpha, None
    if r + s + 1 != n:
        raise ValueError(f"parameters (q, j, m) need r + s + 1 = n, got r={r}, s={s}, n={n}")
    if len(alpha) != n:
        raise ValueError(f"alpha must have {n} entries (q, j, m), got {len(alpha)}")
    return alpha[:r], alpha[r:r + s], float(alpha[-1])


def alpha_names(model) -> list[str]:
    q = [f"q{a}" for a in range(1, model.r + 1)]
    j = [f"j{a}" for a in range(1, model.s + 1)]
    return q + j + (["m"] if model.r else [])


@dataclass(frozen=True, eq=False)
class CompleteIntegral:
    model: object
    alpha: np.ndarray
    branch: int = 1
    reduced: ReducedSolution | None = None
    shift: float = 0.0
    _neighbours: dict = field(default_factory=dict, repr=False)
    _lines: dict = field(default_factory=dict, repr=False)  # keyed by (q, j, x); shared with neighbours

    @classmethod
    def build(cls, model, alpha, branch=1, check_closed: bool = True, interval=None) -> "CompleteIntegral":
        """Solve the reduced equation for ``alpha`` and assemble S.

        With ``check_closed`` the one-form is tested for closedness first and
        a :class:`ClosednessError` is raised if it fails.
        """
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float)).copy()
        q, j, m = split_alpha(model, alpha)
        if check_closed:
            rep = closedness_check(model.chart, model.frame_field, q, j, box=model.x_box)
            if not rep.passed:
                raise ClosednessError(f"chi_k omega^k is not closed: {rep.checks[0].line()}")
        reduced = None
        if model.r == 1:
            rq = assemble_quadratic(model.chart, model.metric, j, m)
            reduced = solve_branch(rq, branch, interval)
            if not reduced.contains(float(q[0])):
                raise OutsideDomainError(f"q = {q[0]} outside the reduced domain {reduced.domain}")
        elif model.r > 1:
            raise NotImplementedError("reduced solver only handles one-dimensional Q")
        alpha.setflags(write=False)
        return cls(model, alpha, int(branch) if branch in (1, -1) else (1 if branch == "+" else -1), reduced)

    # parameters
    @property
    def q(self):
        return split_alpha(self.model, self.alpha)[0]

    @property
    def j(self):
        return split_alpha(self.model, self.alpha)[1]

    @property
    def m2(self) -> float:
        q, j, m = split_alpha(self.model, self.alpha)
        if m is not None:
            return m * m
        chi = self.model.chart.chi(q, j)
        return float(chi @ self.model.metric.Ginv @ chi)

    @property
    def m(self) -> float:
        return math.sqrt(max(self.m2, 0.0))

    def shifted(self, constant: float) -> "CompleteIntegral":
        """Gauge shift: the same integral plus a constant."""
        red = None if self.reduced is None else self.reduced.shifted(constant)
        return CompleteIntegral(self.model, self.alpha, self.branch, red,
                                self.shift + (constant if red is None else 0.0), _lines=self._lines)

    def with_alpha(self, alpha, check_closed: bool = False) -> "CompleteIntegral":
        out = CompleteIntegral.build(self.model, alpha, self.branch, check_closed)
        out = out.shifted(self.total_shift) if self.total_shift else out
        object.__setattr__(out, "_lines", self._lines)
        return out

    @property
    def total_shift(self) -> float:
        return self.shift + (self.reduced.shift if self.reduced is not None else 0.0)

    # evaluation
    def phi(self, x) -> np.ndarray:
        return self.model.chart.phi(np.asarray(x, dtype=float), self.q)

    def admissible(self, x, margin: float = 0.0) -> bool:
        if self.reduced is None:
            return True
        try:
            return self.reduced.contains(float(self.phi(x)[0]), margin)
        except (ArithmeticError, ValueError):
            return False

    def _phi_checked(self, x) -> np.ndarray:
        ph = self.phi(x)
        if self.reduced is not None and not self.reduced.contains(float(ph[0])):
            raise OutsideDomainError(f"phi(x, q) = {ph[0]:.6g} outside the reduced domain {self.reduced.domain}")
        return ph

    def reduced_value(self, qq) -> float:
        if self.reduced is None:
            return self.shift
        return self.reduced.value(float(np.atleast_1d(qq)[0]))

    def reduced_gradient(self, qq) -> np.ndarray:
        if self.reduced is None:
            return np.zeros(0)
        return self.reduced.gradient(qq)

    def line_term(self, x) -> float:
        m = self.model
        x = np.asarray(x, dtype=float)
        key = (self.q.tobytes(), self.j.tobytes(), x.tobytes())
        if key not in self._lines:
            self._lines[key] = line_integral(m.chart, m.frame_field, m.x0, x, self.q, self.j)
        return self._lines[key]

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return self.reduced_value(self._phi_checked(x)) + self.line_term(x)

    def __call__(self, x) -> float:
        return self.value(x)

    def unshifted_value(self, x) -> float:
        """S without its gauge constant; finite differences use this to avoid cancellation."""
        x = np.asarray(x, dtype=float)
        red = 0.0 if self.reduced is None else self.reduced.unshifted_value(float(self._phi_checked(x)[0]))
        return red + self.line_term(x)

    def frame_derivatives(self, x) -> np.ndarray:
        """xi_i S = f_i(phi(x, q), dS~/dq at phi(x, q); j)."""
        ph = self._phi_checked(x)
        return self.model.chart.f_eval(ph, self.reduced_gradient(ph), self.j)

    def grad_x(self, x) -> np.ndarray:
        """Coordinate gradient through the frame identity: omega^T (xi S)."""
        x = np.asarray(x, dtype=float)
        return coframe_at(self.model.frame_field, x).T @ self.frame_derivatives(x)

    def grad_x_chain(self, x) -> np.ndarray:
        """Coordinate gradient by the chain rule: p(phi) dphi/dx + chi_k omega^k.

        Independent of the equivariance of phi, so it cross-checks grad_x.
        """
        x = np.asarray(x, dtype=float)
        ph = self._phi_checked(x)
        ch = self.model.chart
        g = ch.chi(ph, self.j) @ coframe_at(self.model.frame_field, x)
        if ch.r:
            g = g + self.reduced_gradient(ph) @ ch.phi_dx(x, self.q)
        return g

    def grad_x_fd(self, x, h: float = FD_H) -> np.ndarray:
        """Fourth-order central differences of S in x."""
        x = np.asarray(x, dtype=float)
        out = np.empty(len(x))
        for i in range(len(x)):
            e = np.zeros(len(x))
            e[i] = h
            out[i] = (-self.value(x + 2 * e) + 8 * self.value(x + e)
                      - 8 * self.value(x - e) + self.value(x - 2 * e)) / (12 * h)
        return out

    def neighbours(self, h: float | None = None):
        """Integrals at alpha +- h_j e_j, built once and cached."""
        key = h
        if key not in self._neighbours:
            out = []
            for a in range(len(self.alpha)):
                step = ALPHA_H * (1.0 + abs(self.alpha[a])) if h is None else h
                pair = []
                for sgn in (1.0, -1.0):
                    al = np.array(self.alpha)
                    al[a] += sgn * step
                    pair.append(self.with_alpha(al))
                out.append((step, pair[0], pair[1]))
            self._neighbours[key] = out
        return self._neighbours[key]

    def grad_alpha(self, x, h: float | None = None) -> np.ndarray:
        """dS/dalpha_j by central differences, step 1e-6 (1 + |alpha_j|) by default."""
        return np.array([(plus.value(x) - minus.value(x)) / (2 * step) for step, plus, minus in self.neighbours(h)])

    def m2_gradient(self, h: float = 1e-6) -> np.ndarray:
        """d(m^2 / 2)/d alpha_j: the rate at which dS/dalpha_j advances along a geodesic."""
        out = np.empty(len(self.alpha))
        for a in range(len(self.alpha)):
            out[a] = (_m2(self.model, self.alpha, a, h) - _m2(self.model, self.alpha, a, -h)) / (4 * h)
        return out


def _m2(model, alpha, a, h):
    al = np.array(alpha, dtype=float)
    al[a] += h
    q, j, m = split_alpha(model, al)
    if m is not None:
        return m * m
    chi = model.chart.chi(q, j)
    return float(chi @ model.metric.Ginv @ chi)


# -- residuals ------------------------------------------------------------------

@dataclass(frozen=True)
class HJResidual:
    frame: float
    coordinate: float
    discrepancy: float

    @property
    def value(self) -> float:
        return max(self.frame, self.coordinate)


def hj_residual(S: CompleteIntegral, x, m: float | None = None) -> HJResidual:
    """|G^ij (xi_i S)(xi_j S) - m^2| two ways, and the mismatch of the two xi S."""
    x = np.asarray(x, dtype=float)
    model = S.model
    m2 = S.m2 if m is None else m * m
    u = S.frame_derivatives(x)
    frame_res = abs(float(u @ model.metric.Ginv @ u) - m2)
    g = S.grad_x_chain(x)
    ginv = metric_contravariant(model.frame_field, model.metric, x)
    coord_res = abs(float(g @ ginv @ g) - m2)
    disc = float(np.abs(model.frame_field.matrix(x) @ g - u).max(initial=0.0))
    return HJResidual(frame_res, coord_res, disc)


def frame_identity_residual(S: CompleteIntegral, x, h: float = FD_H) -> float:
    """max_i |xi_i^k dS/dx^k (finite differences) - f_i(phi, p(phi); j)|."""
    x = np.asarray(x, dtype=float)
    return float(np.abs(S.model.frame_field.matrix(x) @ S.grad_x_fd(x, h) - S.frame_derivatives(x)).max())


@dataclass(frozen=True)
class Nondegeneracy:
    det: float
    reliable: bool
    matrix: np.ndarray = field(repr=False, default=None)


def nondegeneracy(S: CompleteIntegral, x, method: str = "fd", h: float = NONDEG_H) -> Nondegeneracy:
    """det of d^2 S / dx^i d alpha_j.

    ``method="fd"`` differences S in both x and alpha with step h;
    ``method="gradient"`` differences the chain-rule x-gradient in alpha.
    The result is marked unreliable when a stencil point leaves the reduced
    domain or sits within 100 h of its boundary, where p(q) blows up.
    """
    x = np.asarray(x, dtype=float)
    n, na = len(x), len(S.alpha)
    reliable = True
    try:
        nbrs = S.neighbours(h)
    except (ValueError, ArithmeticError):
        return Nondegeneracy(math.nan, False)
    H = np.empty((n, na))
    try:
        for a, (step, plus, minus) in enumerate(nbrs):
            for Sx in (S, plus, minus):
                if Sx.reduced is not None:
                    lo, hi = Sx.reduced.domain
                    qq = float(Sx.phi(x)[0])
                    if min(qq - lo, hi - qq) < 100 * h or min(Sx.q[0] - lo, hi - Sx.q[0]) < 100 * h:
                        reliable = False
            if method == "gradient":
                H[:, a] = (plus.grad_x_chain(x) - minus.grad_x_chain(x)) / (2 * step)
            elif method == "fd":
                for i in range(n):
                    e = np.zeros(n)
                    e[i] = h
                    v = lambda T, y: T.unshifted_value(y)  # noqa: E731
                    H[i, a] = ((v(plus, x + e) - v(minus, x + e)) - (v(plus, x - e) - v(minus, x - e))) \
                        / (4 * h * step)
            else:
                raise ValueError(f"unknown method {method!r}")
    except (OutsideDomainError, ArithmeticError):
        return Nondegeneracy(math.nan, False)
    return Nondegeneracy(float(np.linalg.det(H)), reliable, H)


# -- sampling --------------------------------------------------------------------

def sample_admissible(model, rng, branch=1, shrink: float = DOMAIN_SHRINK, tries: int = 200):
    """A random (x, alpha) with q and phi(x, q) inside the reduced domain shrunk by ``shrink``.

    Returns (x, CompleteIntegral).
    """
    xb = model.x_box
    for _ in range(tries):
        j = rng.uniform(model.j_box[:, 0], model.j_box[:, 1])
        if model.r == 0:
            S = CompleteIntegral.build(model, j, branch, check_closed=False)
            return rng.uniform(xb[:, 0], xb[:, 1]), S
        mlo, mhi = model.m_box
        m = rng.uniform(mlo, mhi)
        try:
            rq = assemble_quadratic(model.chart, model.metric, j, m)
            red = solve_branch(rq, branch)
        except ValueError:
            continue
        lo, hi = red.domain
        if not (math.isfinite(lo) and math.isfinite(hi)):
            lo, hi = max(lo, model.q_box[0, 0]), min(hi, model.q_box[0, 1])
        w = (hi - lo) * shrink
        q = rng.uniform(lo + w, hi - w)
        S = CompleteIntegral(model, _frozen(np.concatenate([[q], j, [m]])), int(red.branch), red)
        for _ in range(50):
            x = rng.uniform(xb[:, 0], xb[:, 1])
            if S.admissible(x, shrink):
                return x, S
    raise ValueError(f"no admissible (x, alpha) found for {model.name} after {tries} tries")


def _frozen(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


def sweep_line(x, alpha, residual: float, det: float) -> str:
    """One structured output line per sample."""
    xs = " ".join(f"{v:+.12e}" for v in x)
    al = " ".join(f"{v:+.12e}" for v in alpha)
    return f"x {xs} alpha {al} residual {residual:.6e} det {det:+.6e}"

"""Canonical charts on coadjoint orbits, linear in the momenta, and the map phi.

A chart is given by f_i(q, p; lam(j)) = zeta_i^a(q) p_a + chi_i(q; j) together
with phi(x, q), the induced action of the point x on Q.  Variables follow the
convention q1..qr, j1..js, x1..xn.
"""

from __future__ import annotations

import numpy as np

from .exprdsl import ExprArray
from .frame import FrameField, coordinate_names, default_box, sample_points
from .liealg import StructureConstants, corank, lie_poisson_matrix, rank
from .report import Report

CHART_TOL = 1e-9
BASEPOINT_TOL = 1e-12


class ChartError(ValueError):
    pass


def q_names(r: int) -> tuple[str, ...]:
    return tuple(f"q{a}" for a in range(1, r + 1))


def j_names(s: int) -> tuple[str, ...]:
    return tuple(f"j{a}" for a in range(1, s + 1))


class OrbitParametrization:
    """lam(j): a local section through regular coadjoint orbits."""

    def __init__(self, lam, s: int, constants=None):
        self.s = int(s)
        self._lam = ExprArray(lam, j_names(self.s), constants)
        if len(self._lam.shape) != 1:
            raise ChartError("orbit parametrization must be a vector of expressions")

    @property
    def n(self) -> int:
        return self._lam.shape[0]

    def entries(self):
        return self._lam.entries()

    def __call__(self, j) -> np.ndarray:
        j = np.atleast_1d(np.asarray(j, dtype=float))
        if len(j) != self.s:
            raise ChartError(f"expected {self.s} orbit parameters, got {len(j)}")
        return self._lam(*j)

    def regularity(self, C: StructureConstants, j) -> int:
        """Corank of the Lie-Poisson matrix at lam(j)."""
        return corank(lie_poisson_matrix(C, self(j)))


class CanonicalChart:
    """Transition functions f_i = zeta_i^a(q) p_a + chi_i(q; j) and the map phi(x, q)."""

    def __init__(self, zeta, chi, phi, n: int, r: int, s: int, constants=None):
        self.n, self.r, self.s = int(n), int(r), int(s)
        self.qv, self.jv, self.xv = q_names(self.r), j_names(self.s), coordinate_names(self.n)
        zeta = np.asarray(zeta, dtype=object).reshape(self.n, self.r) if self.r == 0 else zeta
        self._zeta = ExprArray(zeta, self.qv, constants)
        self._chi = ExprArray(chi, self.qv + self.jv, constants)
        self._phi = ExprArray(phi if self.r else np.empty(0, dtype=object), self.xv + self.qv, constants)
        if self._zeta.shape != (self.n, self.r):
            raise ChartError(f"zeta must be {self.n} x {self.r}, got {self._zeta.shape}")
        if self._chi.shape != (self.n,):
            raise ChartError(f"chi must have {self.n} entries, got {self._chi.shape}")
        if self._phi.shape != (self.r,):
            raise ChartError(f"phi must have {self.r} entries, got {self._phi.shape}")
        self._zeta_dq = self._zeta.derivative(self.qv)
        self._chi_dq = self._chi.derivative(self.qv)
        self._chi_dj = self._chi.derivative(self.jv)
        self._phi_dx = self._phi.derivative(self.xv)
        self._phi_dq = self._phi.derivative(self.qv)

    # raw expressions, for saving models
    def zeta_entries(self):
        return self._zeta.entries()

    def chi_entries(self):
        return self._chi.entries()

    def phi_entries(self):
        return self._phi.entries()

    def zeta(self, q) -> np.ndarray:
        return self._zeta(*_vec(q, self.r))

    def zeta_jacobian(self, q) -> np.ndarray:
        """Z[i, a, b] = d zeta_i^a / d q^b."""
        return self._zeta_dq(*_vec(q, self.r))

    def chi(self, q, j) -> np.ndarray:
        return self._chi(*_vec(q, self.r), *_vec(j, self.s))

    def chi_grad(self, q, j) -> np.ndarray:
        """X[i, a] = d chi_i / d q^a."""
        return self._chi_dq(*_vec(q, self.r), *_vec(j, self.s))

    def chi_dj(self, q, j) -> np.ndarray:
        return self._chi_dj(*_vec(q, self.r), *_vec(j, self.s))

    def zeta_many(self, Q) -> np.ndarray:
        """zeta at each row of Q (N x r); result N x n x r."""
        Q = np.asarray(Q, dtype=float).reshape(-1, self.r)
        return np.moveaxis(self._zeta.vectorized(*Q.T), -1, 0)

    def chi_many(self, Q, j) -> np.ndarray:
        """chi at each row of Q for fixed j; result N x n."""
        Q = np.asarray(Q, dtype=float).reshape(-1, self.r)
        j = _vec(j, self.s)
        cols = [Q[:, a] for a in range(self.r)] + [np.full(len(Q), v) for v in j]
        return np.moveaxis(self._chi.vectorized(*cols), -1, 0)

    def f_eval(self, q, p, j) -> np.ndarray:
        """f_i(q, p; lam(j))."""
        return self.zeta(q) @ _vec(p, self.r) + self.chi(q, j)

    def f_jacobian(self, q, p, j) -> tuple[np.ndarray, np.ndarray]:
        """(df/dq, df/dp), each n x r."""
        p = _vec(p, self.r)
        dq = np.einsum("iab,a->ib", self.zeta_jacobian(q), p) + self.chi_grad(q, j)
        return dq, self.zeta(q)

    def phi(self, x, q) -> np.ndarray:
        return self._phi(*_vec(x, self.n), *_vec(q, self.r))

    def phi_dx(self, x, q) -> np.ndarray:
        """r x n Jacobian of phi in x."""
        return self._phi_dx(*_vec(x, self.n), *_vec(q, self.r))

    def phi_dq(self, x, q) -> np.ndarray:
        return self._phi_dq(*_vec(x, self.n), *_vec(q, self.r))


def _vec(v, size: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (size,):
        raise ChartError(f"expected a vector of length {size}, got shape {v.shape}")
    return v


def f_eval(ch: CanonicalChart, q, p, j) -> np.ndarray:
    return ch.f_eval(q, p, j)


def phi_eval(ch: CanonicalChart, x, q) -> np.ndarray:
    return ch.phi(x, q)


def poisson_residual(ch: CanonicalChart, C: StructureConstants, q, p, j) -> float:
    """max |{f_i, f_j} - C_ij^k f_k| with the canonical bracket in (q, p)."""
    dq, dp = ch.f_jacobian(q, p, j)
    pb = dp @ dq.T - dq @ dp.T
    f = ch.f_eval(q, p, j)
    return float(np.abs(pb - np.einsum("ijk,k->ij", C.C, f)).max(initial=0.0))


def zeta_bracket_residual(ch: CanonicalChart, C: StructureConstants, q) -> float:
    Z = ch.zeta(q)
    DZ = ch.zeta_jacobian(q)
    br = np.einsum("ia,jba->ijb", Z, DZ) - np.einsum("ja,iba->ijb", Z, DZ)
    return float(np.abs(br - np.einsum("ijk,kb->ijb", C.C, Z)).max(initial=0.0))


def chi_residual(ch: CanonicalChart, C: StructureConstants, q, j) -> float:
    Z = ch.zeta(q)
    D = Z @ ch.chi_grad(q, j).T  # D[i, j] = zeta_i^a d_a chi_j
    return float(np.abs(D - D.T - np.einsum("ijk,k->ij", C.C, ch.chi(q, j))).max(initial=0.0))


def equivariance_residual(ch: CanonicalChart, F: FrameField, x, q) -> float:
    """max_i,a |xi_i^j d phi^a / dx^j - zeta_i^a(phi(x, q))|."""
    if ch.r == 0:
        return 0.0
    lhs = F.matrix(x) @ ch.phi_dx(x, q).T
    return float(np.abs(lhs - ch.zeta(ch.phi(x, q))).max(initial=0.0))


def verify_chart(ch: CanonicalChart, C: StructureConstants, orbit: OrbitParametrization | None = None,
                 frame: FrameField | None = None, samples: int = 100, seed: int = 0,
                 q_box=None, j_box=None, x_box=None, x0=None) -> Report:
    """Run every chart condition at random (x, q, p, j) and report max residuals."""
    rng = np.random.default_rng(seed)
    n, r, s = ch.n, ch.r, ch.s
    Q = sample_points(default_box(r) if q_box is None else q_box, samples, rng)
    P = rng.uniform(-1.0, 1.0, size=(samples, r))
    J = sample_points(default_box(s) if j_box is None else j_box, samples, rng)
    X = sample_points(default_box(n) if x_box is None else x_box, samples, rng)
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)

    res = dict.fromkeys(["16", "16a", "19", "20", "28", "base"], 0.0)
    rank_fail = rank19a_fail = regular_fail = jac_fail = 0
    for q, p, j, x in zip(Q, P, J, X):
        res["16"] = max(res["16"], poisson_residual(ch, C, q, p, j))
        if orbit is not None:
            res["16a"] = max(res["16a"], float(np.abs(ch.chi(np.zeros(r), j) - orbit(j)).max(initial=0.0)))
            if orbit.regularity(C, j) != s:
                regular_fail += 1
        dq, dp = ch.f_jacobian(q, p, j)
        if rank(np.hstack([dq, dp])) != 2 * r:
            rank_fail += 1
        if rank(ch.zeta(q)) != r:
            rank19a_fail += 1
        res["19"] = max(res["19"], zeta_bracket_residual(ch, C, q))
        res["20"] = max(res["20"], chi_residual(ch, C, q, j))
        if r:
            res["base"] = max(res["base"], float(np.abs(ch.phi(x0, q) - q).max()))
            if rank(ch.phi_dq(x, q)) != r:
                jac_fail += 1
        if frame is not None:
            res["28"] = max(res["28"], equivariance_residual(ch, frame, x, q))

    rep = Report("chart")
    if orbit is not None:
        rep.add("orbit regular (corank = s)", regular_fail == 0, regular_fail, detail=f"{regular_fail} irregular samples")
        rep.check("chi(0; j) = lam(j)", res["16a"], BASEPOINT_TOL)
    rep.check("Poisson brackets of f", res["16"], CHART_TOL)
    rep.add("rank (df/dq, df/dp) = 2r", rank_fail == 0, rank_fail, detail=f"{rank_fail} rank-deficient samples")
    rep.check("zeta brackets", res["19"], CHART_TOL)
    rep.add("rank zeta = r", rank19a_fail == 0, rank19a_fail, detail=f"{rank19a_fail} rank-deficient samples")
    rep.check("chi compatibility", res["20"], CHART_TOL)
    if frame is not None:
        rep.check("phi equivariance", res["28"], CHART_TOL)
    rep.check("phi(x0, q) = q", res["base"], BASEPOINT_TOL)
    rep.add("d phi / d q invertible", jac_fail == 0, jac_fail, detail=f"{jac_fail} singular samples")
    return rep

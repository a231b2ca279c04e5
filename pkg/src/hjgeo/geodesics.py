"""Geodesics from Hamilton's equations for H = g^ij p_i p_j / 2, and the Jacobi test.

The inverse metric is g^ij = G^ab xi_a^i xi_b^j, so the flow only needs the
frame and its exact Jacobian.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .reconstruct import CompleteIntegral, OutsideDomainError, alpha_names
from .report import Report

DEFAULT_DT = 1e-3
JACOBI_TOL = 1e-5
MATCH_TOL = 1e-8
SHEET_TOL = 1e-6


@dataclass(frozen=True)
class GeodesicState:
    t: float
    x: np.ndarray
    p: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray  # (N,)
    x: np.ndarray  # (N, n)
    p: np.ndarray  # (N, n)
    H: np.ndarray  # (N,)

    def __len__(self):
        return len(self.t)

    def state(self, i: int) -> GeodesicState:
        return GeodesicState(float(self.t[i]), self.x[i], self.p[i])

    def truncated(self, count: int) -> "Trajectory":
        return Trajectory(self.t[:count], self.x[:count], self.p[:count], self.H[:count])


class GeodesicSystem:
    def __init__(self, model):
        self.model = model
        self.F = model.frame_field
        self.Ginv = np.array(model.metric.Ginv)

    def hamiltonian(self, x, p) -> float:
        u = self.F.matrix(x) @ p
        return 0.5 * float(u @ self.Ginv @ u)

    def rhs(self, x, p):
        X = self.F.matrix(x)
        J = self.F.jacobian(x)  # J[a, i, l] = d xi_a^i / d x^l
        w = self.Ginv @ (X @ p)  # G^ab u_b
        xdot = X.T @ w
        pdot = -np.einsum("ail,i,a->l", J, p, w)
        return xdot, pdot


def hamiltonian(model, x, p) -> float:
    return GeodesicSystem(model).hamiltonian(np.asarray(x, float), np.asarray(p, float))


def integrate(model, state0: GeodesicState, t_max: float, dt: float = DEFAULT_DT) -> Trajectory:
    """Classic fixed-step RK4, one sample per step."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_max < 0:
        raise ValueError(f"t_max must be non-negative, got {t_max}")
    sys_ = GeodesicSystem(model)
    steps = int(round(t_max / dt))
    n = model.n
    x = np.array(state0.x, dtype=float)
    p = np.array(state0.p, dtype=float)
    if x.shape != (n,) or p.shape != (n,):
        raise ValueError(f"state must hold {n}-vectors")
    X = np.empty((steps + 1, n))
    P = np.empty((steps + 1, n))
    X[0], P[0] = x, p
    f = sys_.rhs
    for s in range(steps):
        k1x, k1p = f(x, p)
        k2x, k2p = f(x + 0.5 * dt * k1x, p + 0.5 * dt * k1p)
        k3x, k3p = f(x + 0.5 * dt * k2x, p + 0.5 * dt * k2p)
        k4x, k4p = f(x + dt * k3x, p + dt * k3p)
        x = x + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        p = p + (dt / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        X[s + 1], P[s + 1] = x, p
    T = state0.t + dt * np.arange(steps + 1)
    H = np.array([sys_.hamiltonian(a, b) for a, b in zip(X, P)])
    return Trajectory(T, X, P, H)


def killing_momenta(model, traj: Trajectory) -> np.ndarray:
    """<eta_i, p> at every sample, shape (N, number of Killing fields)."""
    K = model.killing_set
    if K is None:
        raise ValueError(f"model {model.name} has no Killing fields")
    return np.array([K.matrix(x) @ p for x, p in zip(traj.x, traj.p)])


def matched_state(S: CompleteIntegral, x0) -> GeodesicState:
    """Initial state with p = grad_x S, so that 2H = m^2."""
    x0 = np.asarray(x0, dtype=float)
    return GeodesicState(0.0, x0, S.grad_x(x0))


@dataclass
class JacobiResult:
    report: Report
    drift: np.ndarray  # corrected drift per parameter
    raw_drift: np.ndarray  # drift without the m t term
    samples_used: int
    truncated: bool


def jacobi_consistency(S: CompleteIntegral, traj: Trajectory, tol: float = JACOBI_TOL,
                       stride: int = 1) -> JacobiResult:
    """Drift of dS/dalpha_j along a trajectory.

    Along a geodesic with p = grad S, d/dt (dS/dalpha_j) = d(m^2/2)/dalpha_j,
    which is zero except for the parameter carrying m.  That linear term is
    removed before measuring the drift.  The trajectory is truncated at the
    first sample outside the admissible domain and, for matched initial data,
    where p stops equal to grad S (the orbit passed a turning point onto the
    other branch).
    """
    model = S.model
    rep = Report("jacobi constants")
    x0, p0 = traj.x[0], traj.p[0]
    try:
        grad0 = S.grad_x(x0)
        mismatch = float(np.abs(p0 - grad0).max())
    except OutsideDomainError:
        mismatch = np.inf
    h0 = float(traj.H[0])
    rate = S.m2_gradient()
    idx = list(range(0, len(traj), stride))
    if idx[-1] != len(traj) - 1:
        idx.append(len(traj) - 1)
    base = S.grad_alpha(x0)
    raw = np.zeros(len(S.alpha))
    cor = np.zeros(len(S.alpha))
    matched = mismatch < MATCH_TOL
    used = 1
    truncated = ""
    for i in idx[1:]:
        x = traj.x[i]
        if not S.admissible(x):
            truncated = "left the admissible domain"
            break
        try:
            if matched and np.abs(traj.p[i] - S.grad_x(x)).max() > SHEET_TOL:
                truncated = "momentum left the graph of grad S"
                break
            d = S.grad_alpha(x) - base
        except (OutsideDomainError, ArithmeticError, ValueError):
            truncated = "left the admissible domain"
            break
        raw = np.maximum(raw, np.abs(d))
        cor = np.maximum(cor, np.abs(d - rate * (traj.t[i] - traj.t[0])))
        used += 1
    rep.add("initial momentum matches grad S", matched, mismatch, MATCH_TOL)
    rep.add("2H = m^2 at t = 0", abs(2 * h0 - S.m2) < 1e-8, abs(2 * h0 - S.m2), 1e-8)
    for name, r, c in zip(alpha_names(model), raw, cor):
        rep.check(f"dS/d{name} constant", c, tol, detail=f"raw drift {r:.3e}")
    if truncated:
        rep.add("trajectory inside domain", False, detail=f"{truncated} after {used} samples")
    return JacobiResult(rep, cor, raw, used, bool(truncated))


def write_csv(traj: Trajectory, out) -> None:
    """Header t,x1..xn,p1..pn,H and one row per sample at 17 significant digits."""
    n = traj.x.shape[1]
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t"] + [f"x{i}" for i in range(1, n + 1)] + [f"p{i}" for i in range(1, n + 1)] + ["H"])
    for t, x, p, h in zip(traj.t, traj.x, traj.p, traj.H):
        w.writerow([f"{v:.17g}" for v in (t, *x, *p, h)])


def to_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    write_csv(traj, buf)
    return buf.getvalue()


def read_csv(text: str) -> Trajectory:
    rows = list(csv.reader(io.StringIO(text)))
    data = np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    n = (data.shape[1] - 2) // 2
    return Trajectory(data[:, 0], data[:, 1:1 + n], data[:, 1 + n:1 + 2 * n], data[:, -1])


__all__ = ["GeodesicState", "Trajectory", "integrate", "killing_momenta", "matched_state",
           "jacobi_consistency", "write_csv", "to_csv", "read_csv", "hamiltonian"]

"""Invariant frames, dual coframes and the metric in frame form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exprdsl import ExprArray
from .liealg import StructureConstants
from .report import Report

BRACKET_TOL = 1e-9
DET_RTOL = 1e-10
DUALITY_TOL = 1e-12


class FrameError(ValueError):
    pass


def coordinate_names(n: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(1, n + 1))


class VectorFields:
    """n_fields vector fields on an n-dimensional chart, entry [i][j] = v_i^j(x)."""

    def __init__(self, components, coords=None, constants=None):
        comps = ExprArray(components, coords or coordinate_names(len(components[0]) if len(components) else 0),
                          constants)
        if len(comps.shape) != 2:
            raise FrameError(f"vector field components must be a matrix, got shape {comps.shape}")
        self._arr = comps
        self.coords = comps.argnames
        if comps.shape[1] != len(self.coords):
            raise FrameError(f"fields have {comps.shape[1]} components but {len(self.coords)} coordinates")
        self._jac = comps.derivative(self.coords)

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def count(self) -> int:
        return self._arr.shape[0]

    @property
    def constants(self):
        return self._arr.constants

    def entries(self):
        return self._arr.entries()

    def matrix(self, x) -> np.ndarray:
        return self._arr(*x)

    def jacobian(self, x) -> np.ndarray:
        """J[i, j, l] = d v_i^j / d x^l."""
        return self._jac(*x)

    def apply(self, x, grad) -> np.ndarray:
        """Directional derivatives v_i f from the coordinate gradient of f."""
        return self.matrix(x) @ np.asarray(grad, dtype=float)


class FrameField(VectorFields):
    """Invariant frame {xi_i}; row i of :meth:`matrix` is xi_i."""


class KillingSet(VectorFields):
    """Killing fields eta_i of the group action."""


def lie_bracket(A, JA, B, JB) -> np.ndarray:
    """[A_a, B_b]^l at a point from components and Jacobians (see VectorFields.jacobian)."""
    return np.einsum("am,blm->abl", A, JB) - np.einsum("bm,alm->abl", B, JA)


@dataclass(frozen=True, eq=False)
class FrameMetric:
    G: np.ndarray
    Ginv: np.ndarray

    @classmethod
    def from_matrix(cls, G) -> "FrameMetric":
        G = np.array(G, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise FrameError(f"frame metric must be square, got shape {G.shape}")
        if not np.allclose(G, G.T, rtol=0, atol=1e-14):
            raise FrameError("frame metric is not symmetric")
        try:
            Ginv = np.linalg.inv(G)
        except np.linalg.LinAlgError:
            raise FrameError("frame metric is singular") from None
        Ginv = 0.5 * (Ginv + Ginv.T)
        G.setflags(write=False)
        Ginv.setflags(write=False)
        return cls(G, Ginv)

    @property
    def n(self) -> int:
        return self.G.shape[0]

    def inverse_residual(self) -> float:
        return float(np.abs(self.G @ self.Ginv - np.eye(self.n)).max())


def frame_determinant_ratio(F: VectorFields, x) -> float:
    """|det Xi| relative to the product of row norms (1 for orthogonal rows)."""
    M = F.matrix(x)
    norms = np.prod(np.linalg.norm(M, axis=1))
    if norms == 0.0:
        return 0.0
    return abs(np.linalg.det(M)) / norms


def coframe_at(F: FrameField, x) -> np.ndarray:
    """Matrix whose row i is omega^i, the dual basis to the frame at x."""
    M = F.matrix(x)
    if frame_determinant_ratio(F, x) <= DET_RTOL:
        raise FrameError(f"frame is singular at x = {list(map(float, x))}")
    return np.linalg.inv(M).T


def metric_contravariant(F: FrameField, M: FrameMetric, x) -> np.ndarray:
    """g^{ij}(x) = G^{kl} xi_k^i xi_l^j."""
    X = F.matrix(x)
    return X.T @ M.Ginv @ X


def metric_covariant(F: FrameField, M: FrameMetric, x) -> np.ndarray:
    """g_{ij}(x) = G_{kl} omega^k_i omega^l_j."""
    W = coframe_at(F, x)
    return W.T @ M.G @ W


def metric_contravariant_derivative(F: FrameField, M: FrameMetric, x) -> np.ndarray:
    """D[i, j, l] = d g^{ij} / d x^l."""
    X = F.matrix(x)
    J = F.jacobian(x)
    t = np.einsum("kil,km,mj->ijl", J, M.Ginv, X)
    return t + t.transpose(1, 0, 2)


def sample_points(box, count: int, rng) -> np.ndarray:
    box = np.asarray(box, dtype=float)
    return rng.uniform(box[:, 0], box[:, 1], size=(count, len(box)))


def default_box(n: int) -> np.ndarray:
    return np.tile([-1.0, 1.0], (n, 1))


def bracket_residual(F: FrameField, C: StructureConstants, x) -> float:
    X = F.matrix(x)
    J = F.jacobian(x)
    br = lie_bracket(X, J, X, J)
    want = np.einsum("ijk,kl->ijl", C.C, X)
    return float(np.abs(br - want).max(initial=0.0))


def verify_frame(F: FrameField, C: StructureConstants, samples: int = 100, seed: int = 0,
                 box=None, x0=None) -> Report:
    """Check nondegeneracy, duality and [xi_i, xi_j] = C_ij^k xi_k at random points."""
    if C.n != F.n or F.count != F.n:
        raise FrameError(f"frame has {F.count} fields in dimension {F.n}; algebra has dimension {C.n}")
    rng = np.random.default_rng(seed)
    pts = sample_points(default_box(F.n) if box is None else box, samples, rng)
    if x0 is not None:
        pts = np.vstack([np.asarray(x0, dtype=float)[None, :], pts])
    worst_br = 0.0
    min_det = np.inf
    worst_dual = 0.0
    for x in pts:
        worst_br = max(worst_br, bracket_residual(F, C, x))
        d = frame_determinant_ratio(F, x)
        min_det = min(min_det, d)
        if d > DET_RTOL:
            W = coframe_at(F, x)
            worst_dual = max(worst_dual, float(np.abs(W @ F.matrix(x).T - np.eye(F.n)).max()))
    rep = Report("frame")
    rep.add("frame nondegenerate", min_det > DET_RTOL, min_det, DET_RTOL, "min relative |det|")
    rep.check("coframe duality", worst_dual, DUALITY_TOL)
    rep.check("frame brackets", worst_br, BRACKET_TOL)
    return rep


def verify_killing(K: KillingSet, F: FrameField, C: StructureConstants, M: FrameMetric | None = None,
                   samples: int = 100, seed: int = 0, box=None) -> Report:
    """[eta_i, xi_j] = 0, [eta_i, eta_j] = C_ij^k eta_k, and (optionally) L_eta g = 0."""
    rng = np.random.default_rng(seed)
    pts = sample_points(default_box(F.n) if box is None else box, samples, rng)
    comm = algebra = killing = 0.0
    for x in pts:
        E, JE = K.matrix(x), K.jacobian(x)
        X, JX = F.matrix(x), F.jacobian(x)
        comm = max(comm, float(np.abs(lie_bracket(E, JE, X, JX)).max(initial=0.0)))
        want = np.einsum("ijk,kl->ijl", C.C, E)
        algebra = max(algebra, float(np.abs(lie_bracket(E, JE, E, JE) - want).max(initial=0.0)))
        if M is not None:
            g = metric_contravariant(F, M, x)
            dg = metric_contravariant_derivative(F, M, x)
            # Lie derivative of the inverse metric along each eta
            L = (np.einsum("ak,ijk->aij", E, dg)
                 - np.einsum("kj,aik->aij", g, JE)
                 - np.einsum("ik,ajk->aij", g, JE))
            killing = max(killing, float(np.abs(L).max(initial=0.0)))
    rep = Report("killing")
    rep.check("[eta_i, xi_j] = 0", comm, BRACKET_TOL)
    rep.check("[eta_i, eta_j] = C_ij^k eta_k", algebra, BRACKET_TOL)
    if M is not None:
        rep.check("Killing equation", killing, BRACKET_TOL)
    return rep

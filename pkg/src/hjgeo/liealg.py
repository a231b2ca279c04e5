"""Lie algebra structure: brackets, Lie-Poisson matrix, index, polarizations."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .report import Report

ANTISYM_TOL = 1e-12
JACOBI_TOL = 1e-12
RANK_RTOL = 1e-9
CLOSURE_TOL = 1e-10
SUBORDINATION_TOL = 1e-10


class StructureError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StructureConstants:
    """C[i, j, k] = C_ij^k, zero-based indices."""

    C: np.ndarray

    def __post_init__(self):
        C = np.array(self.C, dtype=float)
        if C.ndim != 3 or not (C.shape[0] == C.shape[1] == C.shape[2]):
            raise StructureError(f"structure constants must be n x n x n, got shape {C.shape}")
        C.setflags(write=False)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @classmethod
    def from_brackets(cls, n: int, entries) -> "StructureConstants":
        """Build from ``(i, j, k, value)`` with 1-based indices, i.e. [e_i, e_j] ∋ value e_k.

        The antisymmetric partner C_ji^k = -C_ij^k is filled in.
        """
        C = np.zeros((n, n, n))
        for i, j, k, v in entries:
            i, j, k = i - 1, j - 1, k - 1
            if i == j:
                if v != 0:
                    raise StructureError(f"[e{i+1}, e{i+1}] must vanish")
                continue
            C[i, j, k] = v
            C[j, i, k] = -v
        return cls(C)

    @classmethod
    def abelian(cls, n: int) -> "StructureConstants":
        return cls(np.zeros((n, n, n)))

    def bracket(self, u, v) -> np.ndarray:
        return np.einsum("i,j,ijk->k", np.asarray(u, float), np.asarray(v, float), self.C)

    def permuted(self, perm) -> "StructureConstants":
        """Constants in the relabelled basis e'_a = e_perm[a]."""
        perm = np.asarray(perm)
        return StructureConstants(self.C[np.ix_(perm, perm, perm)])


def antisymmetry_residual(C: StructureConstants):
    """Max |C_ij^k + C_ji^k| and the worst index triple (1-based)."""
    R = np.abs(C.C + C.C.transpose(1, 0, 2))
    idx = np.unravel_index(np.argmax(R), R.shape) if R.size else (0, 0, 0)
    return float(R.max(initial=0.0)), tuple(int(i) + 1 for i in idx)


def jacobi_tensor(C: StructureConstants) -> np.ndarray:
    """J[i,j,l,k] = sum_m C_ij^m C_ml^k + C_jl^m C_mi^k + C_li^m C_mj^k."""
    c = C.C
    t = np.einsum("ijm,mlk->ijlk", c, c)
    return t + t.transpose(1, 2, 0, 3) + t.transpose(2, 0, 1, 3)


def validate_structure(C: StructureConstants, tol: float = JACOBI_TOL) -> Report:
    rep = Report("structure constants")
    res, where = antisymmetry_residual(C)
    rep.add("antisymmetry", res < ANTISYM_TOL, res, ANTISYM_TOL,
            "" if res < ANTISYM_TOL else f"worst at (i,j,k)={where}")
    J = np.abs(jacobi_tensor(C))
    jres = float(J.max(initial=0.0))
    detail = ""
    if not jres < tol:
        bad = np.argwhere(J >= tol)[:5] + 1
        detail = "offending (i,j,l,k): " + ", ".join(str(tuple(int(v) for v in b)) for b in bad)
    rep.add("jacobi", jres < tol, jres, tol, detail)
    return rep


def lie_poisson_matrix(C: StructureConstants, f) -> np.ndarray:
    """M[i, j] = sum_k C_ij^k f_k."""
    return np.einsum("ijk,k->ij", C.C, np.asarray(f, dtype=float))


def rank(M, rtol: float = RANK_RTOL) -> int:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def corank(M, rtol: float = RANK_RTOL) -> int:
    return np.shape(M)[0] - rank(M, rtol)


def orbit_dimension(C: StructureConstants, lam) -> int:
    return rank(lie_poisson_matrix(C, lam))


def lie_index(C: StructureConstants, trials: int = 20, seed: int = 0) -> int:
    """Minimal corank of the Lie-Poisson matrix over random covectors in [-1, 1]^n.

    Unlucky sampling can only overestimate the index.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    best = C.n
    for _ in range(trials):
        f = rng.uniform(-1.0, 1.0, C.n)
        best = min(best, corank(lie_poisson_matrix(C, f)))
    return best


def _orthonormal_basis(vectors, rtol: float = RANK_RTOL) -> np.ndarray:
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    if V.size == 0:
        return np.zeros((0, V.shape[-1] if V.ndim == 2 else 0))
    U, s, Vt = np.linalg.svd(V, full_matrices=False)
    keep = s > rtol * s[0] if s.size and s[0] > 0 else np.zeros_like(s, dtype=bool)
    return Vt[keep]


def subalgebra_closure_residual(C: StructureConstants, basis) -> float:
    """Max distance of [u, v] from span(basis) over basis pairs."""
    Q = _orthonormal_basis(basis)
    worst = 0.0
    B = np.atleast_2d(np.asarray(basis, dtype=float))
    for u, v in itertools.combinations(B, 2):
        w = C.bracket(u, v)
        resid = w - Q.T @ (Q @ w)
        worst = max(worst, float(np.linalg.norm(resid)))
    return worst


def is_subalgebra(C: StructureConstants, basis, tol: float = CLOSURE_TOL) -> bool:
    return subalgebra_closure_residual(C, basis) < tol


def check_polarization(C: StructureConstants, h, lam, orbit_dim: int | None = None):
    """Decide whether span(h) is a polarization of ``lam``.

    Returns ``(ok, report)``; the report has the closure, dimension and
    subordination checks.  An odd orbit dimension is a structural error.
    """
    lam = np.asarray(lam, dtype=float)
    if orbit_dim is None:
        orbit_dim = orbit_dimension(C, lam)
    if orbit_dim % 2:
        raise StructureError(f"orbit dimension {orbit_dim} is odd; coadjoint orbits are even-dimensional")
    B = np.atleast_2d(np.asarray(h, dtype=float)) if len(h) else np.zeros((0, C.n))
    rep = Report("polarization")
    rep.check("subalgebra closure", subalgebra_closure_residual(C, B) if len(B) else 0.0, CLOSURE_TOL)
    dim_h = len(_orthonormal_basis(B)) if len(B) else 0
    want = C.n - orbit_dim // 2
    rep.add("dimension", dim_h == want, abs(dim_h - want), detail=f"dim h = {dim_h}, required {want}")
    sub = 0.0
    for u, v in itertools.combinations(B, 2):
        sub = max(sub, abs(float(lam @ C.bracket(u, v))))
    rep.check("subordination <lam,[h,h]>", sub, SUBORDINATION_TOL)
    return rep.passed, rep


def find_polarizations(C: StructureConstants, lam) -> list[tuple[int, ...]]:
    """All subsets of basis vectors (0-based index tuples) polarizing ``lam``."""
    lam = np.asarray(lam, dtype=float)
    r2 = orbit_dimension(C, lam)
    size = C.n - r2 // 2
    eye = np.eye(C.n)
    found = []
    for combo in itertools.combinations(range(C.n), size):
        ok, _ = check_polarization(C, eye[list(combo)], lam, r2)
        if ok:
            found.append(combo)
    return found


def coadjoint_generator(C: StructureConstants, i: int) -> np.ndarray:
    """Matrix A with (df/dt)_j = (A f)_j = -sum_k C_ij^k f_k (zero-based i)."""
    return -C.C[i]


def coadjoint_flow(C: StructureConstants, lam, direction: int, t: float, steps: int = 1000) -> np.ndarray:
    """Flow ``lam`` along the coadjoint generator of e_direction (zero-based) for time t.

    Classic RK4 with step t/steps.
    """
    f = np.array(lam, dtype=float)
    if t == 0.0:
        return f
    A = coadjoint_generator(C, direction)
    h = t / steps
    for _ in range(steps):
        k1 = A @ f
        k2 = A @ (f + 0.5 * h * k1)
        k3 = A @ (f + 0.5 * h * k2)
        k4 = A @ (f + h * k3)
        f = f + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return f

"""Model specifications: schema, YAML file ingestion, bundled fixtures, validation.

A model file is a single YAML document.  Every mathematical entry is a string
in the expression language (plain numbers are accepted too).  Indices in
files are 1-based.  Keys:

    name          str
    dimension     n
    constants     map name -> number (e.g. k)
    structure     list of [i, j, l, value]: [e_i, e_j] = value e_l
    frame_metric  n x n  (G_ij, constants only)
    frame         n x n  (row i = components of xi_i along d/dx1..d/dxn)
    killing       n x n  (optional, same layout as frame)
    base_point    n numbers
    orbit         {parameters: s, lambda: n expressions in j1..js}
    polarization  list of n-vectors spanning the subalgebra
    chart         {dimension: r, zeta: n x r in q, chi: n in q and j,
                   phi: r in x and q}
    sample_box    map variable -> [lo, hi] for x1.., q1.., j1.., m
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from ..chart import CanonicalChart, OrbitParametrization, verify_chart
from ..exprdsl import Expr, ParseError, as_expr
from ..frame import FrameField, FrameMetric, KillingSet, verify_frame, verify_killing
from ..liealg import StructureConstants, check_polarization, lie_index, validate_structure
from ..report import Report

BUILTINS = ("mtt", "flat4")
VALIDATION_TOL = 1e-9


class ModelError(ValueError):
    """Schema violation in a model description; the message names the field."""


@dataclass(frozen=True, eq=False)
class ModelSpec:
    name: str
    n: int
    constants: dict
    structure: tuple  # of (i, j, l, Expr), 1-based
    frame_metric: tuple  # n x n Expr
    frame: tuple  # n x n Expr
    killing: tuple | None
    base_point: tuple
    s: int
    orbit_lambda: tuple
    polarization: tuple
    r: int
    zeta: tuple  # n x r
    chi: tuple
    phi: tuple
    sample_box: dict = field(default_factory=dict)

    # -- derived objects ----------------------------------------------------

    def _const(self, e: Expr) -> float:
        return e.eval(self.constants)

    @cached_property
    def structure_constants(self) -> StructureConstants:
        return StructureConstants.from_brackets(
            self.n, [(i, j, l, self._const(v)) for i, j, l, v in self.structure])

    @cached_property
    def metric(self) -> FrameMetric:
        return FrameMetric.from_matrix([[self._const(e) for e in row] for row in self.frame_metric])

    @cached_property
    def frame_field(self) -> FrameField:
        return FrameField(self.frame, constants=self.constants)

    @cached_property
    def killing_set(self) -> KillingSet | None:
        return None if self.killing is None else KillingSet(self.killing, constants=self.constants)

    @cached_property
    def x0(self) -> np.ndarray:
        return np.array(self.base_point, dtype=float)

    @cached_property
    def orbit(self) -> OrbitParametrization:
        return OrbitParametrization(list(self.orbit_lambda), self.s, self.constants)

    @cached_property
    def chart(self) -> CanonicalChart:
        return CanonicalChart(np.array(self.zeta, dtype=object).reshape(self.n, self.r), list(self.chi),
                              list(self.phi), self.n, self.r, self.s, self.constants)

    @cached_property
    def polarization_basis(self) -> np.ndarray:
        return np.array([[self._const(e) for e in v] for v in self.polarization], dtype=float).reshape(-1, self.n)

    def box(self, names) -> np.ndarray:
        """Sampling intervals for the named variables, default [-1, 1]."""
        return np.array([self.sample_box.get(v, (-1.0, 1.0)) for v in names], dtype=float).reshape(-1, 2)

    @property
    def x_box(self):
        return self.box([f"x{i}" for i in range(1, self.n + 1)])

    @property
    def q_box(self):
        return self.box([f"q{i}" for i in range(1, self.r + 1)])

    @property
    def j_box(self):
        return self.box([f"j{i}" for i in range(1, self.s + 1)])

    @property
    def m_box(self):
        return tuple(self.sample_box.get("m", (0.0, 1.0)))

    def with_constants(self, **overrides) -> "ModelSpec":
        unknown = set(overrides) - set(self.constants)
        if unknown:
            raise ModelError(f"constants: unknown constant(s) {sorted(unknown)} for model {self.name!r}")
        consts = dict(self.constants)
        consts.update({k: float(v) for k, v in overrides.items()})
        return dataclasses.replace(self, constants=consts)

    def to_dict(self) -> dict:
        s = lambda e: str(e)  # noqa: E731
        d = {
            "name": self.name,
            "dimension": self.n,
            "constants": dict(self.constants),
            "structure": [[i, j, l, s(v)] for i, j, l, v in self.structure],
            "frame_metric": [[s(e) for e in row] for row in self.frame_metric],
            "frame": [[s(e) for e in row] for row in self.frame],
        }
        if self.killing is not None:
            d["killing"] = [[s(e) for e in row] for row in self.killing]
        d["base_point"] = [float(v) for v in self.base_point]
        d["orbit"] = {"parameters": self.s, "lambda": [s(e) for e in self.orbit_lambda]}
        d["polarization"] = [[s(e) for e in v] for v in self.polarization]
        d["chart"] = {"dimension": self.r, "zeta": [[s(e) for e in row] for row in self.zeta],
                      "chi": [s(e) for e in self.chi], "phi": [s(e) for e in self.phi]}
        d["sample_box"] = {k: [float(a), float(b)] for k, (a, b) in self.sample_box.items()}
        return d


# -- parsing -------------------------------------------------------------------

def _require(doc: dict, key: str, where: str = ""):
    if key not in doc:
        raise ModelError(f"{where}{key}: missing required key")
    return doc[key]


def _expr(value, where: str) -> Expr:
    try:
        return as_expr(value)
    except ParseError as err:
        raise ModelError(f"{where}: {err}") from None
    except TypeError as err:
        raise ModelError(f"{where}: {err}") from None


def _vector(value, length: int, where: str) -> tuple:
    if not isinstance(value, (list, tuple)):
        raise ModelError(f"{where}: expected a list of {length} entries")
    if len(value) != length:
        raise ModelError(f"{where}: dimension mismatch, expected {length} entries, got {len(value)}")
    return tuple(_expr(v, f"{where}[{i}]") for i, v in enumerate(value, 1))


def _matrix(value, rows: int, cols: int, where: str) -> tuple:
    if not isinstance(value, (list, tuple)) or len(value) != rows:
        got = len(value) if isinstance(value, (list, tuple)) else "a scalar"
        raise ModelError(f"{where}: dimension mismatch, expected {rows} x {cols}, got {got} rows")
    out = []
    for i, row in enumerate(value):
        if not isinstance(row, (list, tuple)) or len(row) != cols:
            got = len(row) if isinstance(row, (list, tuple)) else "a scalar"
            raise ModelError(f"{where}: dimension mismatch, expected {rows} x {cols}, row {i + 1} has {got} columns")
        out.append(tuple(_expr(v, f"{where}[{i + 1}][{c}]") for c, v in enumerate(row, 1)))
    return tuple(out)


def from_dict(doc: dict, constants: dict | None = None) -> ModelSpec:
    if not isinstance(doc, dict):
        raise ModelError("model: top level must be a mapping")
    n = _require(doc, "dimension")
    if not isinstance(n, int) or n < 1:
        raise ModelError(f"dimension: expected a positive integer, got {n!r}")
    consts = {str(k): float(v) for k, v in (doc.get("constants") or {}).items()}

    structure = []
    for idx, entry in enumerate(doc.get("structure") or [], 1):
        where = f"structure[{idx}]"
        if not isinstance(entry, (list, tuple)) or len(entry) != 4:
            raise ModelError(f"{where}: expected [i, j, l, value]")
        i, j, l = entry[:3]
        for v in (i, j, l):
            if not isinstance(v, int) or not 1 <= v <= n:
                raise ModelError(f"{where}: index {v!r} outside 1..{n}")
        structure.append((i, j, l, _expr(entry[3], where)))

    frame_metric = _matrix(_require(doc, "frame_metric"), n, n, "frame_metric")
    frame = _matrix(_require(doc, "frame"), n, n, "frame")
    killing = _matrix(doc["killing"], n, n, "killing") if doc.get("killing") is not None else None
    base = doc.get("base_point", [0] * n)
    if not isinstance(base, (list, tuple)) or len(base) != n:
        raise ModelError(f"base_point: dimension mismatch, expected {n} entries")
    base_point = tuple(float(v) for v in base)

    orbit = _require(doc, "orbit")
    s = _require(orbit, "parameters", "orbit.")
    lam = _vector(_require(orbit, "lambda", "orbit."), n, "orbit.lambda")

    pol = doc.get("polarization") or []
    polarization = tuple(_vector(v, n, f"polarization[{i}]") for i, v in enumerate(pol, 1))

    chart = _require(doc, "chart")
    r = _require(chart, "dimension", "chart.")
    if not isinstance(r, int) or r < 0 or not isinstance(s, int) or s < 0:
        raise ModelError("chart.dimension / orbit.parameters: expected non-negative integers")
    if 2 * r + s != n:
        raise ModelError(f"chart.dimension: 2r + s must equal n, got r={r}, s={s}, n={n}")
    zeta = _matrix(_require(chart, "zeta", "chart."), n, r, "chart.zeta")
    chi = _vector(_require(chart, "chi", "chart."), n, "chart.chi")
    phi = _vector(chart.get("phi") or [], r, "chart.phi")

    box = {}
    for k, v in (doc.get("sample_box") or {}).items():
        if not isinstance(v, (list, tuple)) or len(v) != 2 or not float(v[0]) <= float(v[1]):
            raise ModelError(f"sample_box.{k}: expected [lo, hi] with lo <= hi")
        box[str(k)] = (float(v[0]), float(v[1]))

    spec = ModelSpec(str(doc.get("name", "model")), n, consts, tuple(structure), frame_metric, frame,
                     killing, base_point, s, lam, polarization, r, zeta, chi, phi, box)
    # force construction of the derived objects so errors surface at load time
    try:
        spec.chart, spec.frame_field, spec.orbit, spec.metric, spec.structure_constants  # noqa: B018
        spec.killing_set  # noqa: B018
    except ModelError:
        raise
    except Exception as err:  # unbound variables, singular G, ...
        raise ModelError(f"{spec.name}: {err}") from err
    return spec.with_constants(**constants) if constants else spec


def loads(text: str, constants: dict | None = None) -> ModelSpec:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ModelError(f"model: not valid YAML: {err}") from None
    return from_dict(doc, constants)


def load(path, constants: dict | None = None, strict: bool = False) -> ModelSpec:
    """Read a ``.model`` file.  ``strict`` additionally requires validate_all to pass."""
    path = Path(path)
    spec = loads(path.read_text(encoding="utf-8"), constants)
    if strict:
        rep = validate_all(spec)
        if not rep.passed:
            names = ", ".join(c.name for c in rep.failures())
            raise ModelError(f"{path}: validation failed: {names}")
    return spec


def dumps(spec: ModelSpec) -> str:
    return yaml.safe_dump(spec.to_dict(), sort_keys=False, default_flow_style=None, allow_unicode=True)


def save(spec: ModelSpec, path) -> None:
    Path(path).write_text(dumps(spec), encoding="utf-8")


def bundled_path(name: str) -> Path:
    return Path(str(resources.files(__name__).joinpath(f"{name}.model")))


def builtin(name: str, **overrides) -> ModelSpec:
    """Bundled fixture ``mtt`` (constant k, default 1) or ``flat4``."""
    if name not in BUILTINS:
        raise ModelError(f"unknown builtin model {name!r}; choose from {', '.join(BUILTINS)}")
    spec = load(bundled_path(name))
    return spec.with_constants(**overrides) if overrides else spec


def resolve(ref: str, constants: dict | None = None) -> ModelSpec:
    """A builtin name, a path to a model file, or ``models/<name>.model`` of a builtin."""
    p = Path(ref)
    if ref in BUILTINS:
        return builtin(ref, **(constants or {}))
    if p.exists():
        return load(p, constants)
    if p.suffix == ".model" and p.stem in BUILTINS:
        return builtin(p.stem, **(constants or {}))
    raise ModelError(f"model {ref!r}: no such builtin or file")


# -- whole-pipeline validation -----------------------------------------------

def validate_all(spec: ModelSpec, samples: int = 100, seed: int = 0, tol: float = VALIDATION_TOL) -> Report:
    """Structure, frame, Killing fields, index, polarization and chart checks."""
    C = spec.structure_constants
    rep = Report(f"validate {spec.name} " + " ".join(f"{k}={v:g}" for k, v in sorted(spec.constants.items())))
    rep.extend(validate_structure(C), "structure: ")

    G = spec.metric
    rep.check("frame metric: inverse", G.inverse_residual(), tol)
    rep.extend(verify_frame(spec.frame_field, C, samples, seed, spec.x_box, spec.x0), "frame: ")
    if spec.killing_set is not None:
        rep.extend(verify_killing(spec.killing_set, spec.frame_field, C, G, samples, seed, spec.x_box),
                   "killing: ")

    ind = lie_index(C, trials=20, seed=seed)
    rep.add("index = number of orbit parameters", ind == spec.s, abs(ind - spec.s),
            detail=f"ind g = {ind}, s = {spec.s}")

    rng = np.random.default_rng(seed)
    J = rng.uniform(spec.j_box[:, 0], spec.j_box[:, 1], size=(min(samples, 20), spec.s))
    pol_ok = True
    worst = None
    for j in J:
        ok, prep = check_polarization(C, spec.polarization_basis, spec.orbit(j))
        if not ok:
            pol_ok = False
            worst = prep
            break
    rep.add("polarization", pol_ok, 0.0 if pol_ok else 1.0,
            detail="" if pol_ok else "; ".join(c.name for c in worst.failures()))

    rep.extend(verify_chart(spec.chart, C, spec.orbit, spec.frame_field, samples, seed,
                            spec.q_box, spec.j_box, spec.x_box, spec.x0), "chart: ")
    return rep

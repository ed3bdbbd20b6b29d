"""A posteriori estimator of the defeaturing error.

Each boundary piece of a removed feature where the defeatured solution's
flux or traction is wrong contributes a term that splits into a fluctuation
part and an average part.  Pieces are grouped per feature and per kind:
the hole boundary (``GammaN``), the interface of a protrusion with the
defeatured domain (``Gamma0P``) and the protrusion boundary inside its
extension (``GammaR``).
"""
from __future__ import annotations

import csv
import dataclasses
import functools
import io
import math

import numpy as np

from . import fem
from .errors import LabelNotInSigma, MissingBoundaryData, NonpositiveMeasure
from .fem import BoundaryData, CompositeField, ProblemKind
from .geometry import BoundaryArc, BoundaryLabel, Status
from .mesh import QuadRule, TriMesh, edges_on, quad_rule

SIGMA_LABELS = (BoundaryLabel.GAMMA_N, BoundaryLabel.GAMMA_0P, BoundaryLabel.GAMMA_R)
DEFAULT_PREFACTOR = 1.0
DEFECT_QUAD_ORDER = 5


@functools.lru_cache(maxsize=None)
def omega_constant(tol: float = 1e-14) -> float:
    """Root of eta + log(eta) = 0 by Newton's method from 0.5."""
    eta = 0.5
    for _ in range(100):
        step = (eta + math.log(eta)) / (1.0 + 1.0 / eta)
        eta -= step
        if abs(step) < tol:
            break
    return eta


def c_gamma(measure: float, n: int = 2) -> float:
    if not measure > 0:
        raise NonpositiveMeasure(f"boundary measure must be positive, got {measure}")
    if n == 3:
        return 1.0
    if n != 2:
        raise ValueError("dimension must be 2 or 3")
    return math.sqrt(max(-math.log(measure), omega_constant()))


@dataclasses.dataclass(frozen=True)
class DefectTrace:
    gamma_id: str
    label: BoundaryLabel
    feature_id: int
    samples: np.ndarray  # (m, components)
    weights: np.ndarray  # (m,)
    measure: float
    points: np.ndarray | None = None

    def scaled(self, s: float) -> "DefectTrace":
        return dataclasses.replace(self, samples=s * self.samples)


@dataclasses.dataclass(frozen=True)
class BoundaryEstimate:
    gamma_id: str
    feature_id: int
    label: BoundaryLabel
    measure: float
    c_gamma: float
    fluct_term: float
    avg_term: float
    value: float
    mean: np.ndarray
    tilde_term: float


@dataclasses.dataclass
class EstimatorReport:
    per_gamma: list
    per_feature: dict
    total: float
    tilde_total: float
    weight: float
    flux_residuals: dict = dataclasses.field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["gamma_id", "feature_id", "label", "measure", "c_gamma", "fluct_term", "avg_term", "estimate"])
        for e in self.per_gamma:
            w.writerow([e.gamma_id, e.feature_id, e.label.value, f"{e.measure:.12e}", f"{e.c_gamma:.12e}",
                        f"{e.fluct_term:.12e}", f"{e.avg_term:.12e}", f"{e.value:.12e}"])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"estimator total      {self.total:.6e}",
                 f"estimator tilde      {self.tilde_total:.6e}",
                 f"weight               {self.weight:.6e}"]
        for k in sorted(self.per_feature):
            lines.append(f"feature {k:<4d}         {self.per_feature[k]:.6e}")
        for k in sorted(self.flux_residuals):
            pos, neg, ext = (np.linalg.norm(np.atleast_1d(r)) for r in self.flux_residuals[k])
            lines.append(f"flux residuals {k:<4d}  positive {pos:.3e}  negative {neg:.3e}  extension {ext:.3e}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- defects

def _gamma_key(gamma):
    if isinstance(gamma, BoundaryArc):
        return gamma.label, gamma.feature_id
    label, k = gamma
    return BoundaryLabel.parse(label), k


def gamma_id(label: BoundaryLabel, k: int) -> str:
    return f"{label.value}:{k}"


def _sides(mesh: TriMesh, edges: np.ndarray, keep) -> np.ndarray:
    """True where the Plus triangle of an edge is the one to evaluate on."""
    plus, minus = mesh.edge_tris[edges, 0], mesh.edge_tris[edges, 1]
    ok_plus = (plus >= 0) & keep(np.maximum(plus, 0))
    ok_minus = (minus >= 0) & keep(np.maximum(minus, 0))
    if np.any(~ok_plus & ~ok_minus):
        raise LabelNotInSigma("edge without a triangle on the evaluation side")
    return ok_plus


def defect(gamma, composite: CompositeField, bc: BoundaryData, problem: ProblemKind,
           qr: QuadRule | None = None) -> DefectTrace:
    """Neumann defect of the glued solution on one estimator boundary."""
    label, k = _gamma_key(gamma)
    if label not in SIGMA_LABELS or k is None:
        raise LabelNotInSigma(f"{label.value} carries no defect")
    qr = qr or quad_rule("Edge", DEFECT_QUAD_ORDER)
    if label is BoundaryLabel.GAMMA_N:
        field = composite.base
        neg = field.mesh.tri_tags["neg"]
        keep = lambda t: neg[t] != k  # noqa: E731  (the side away from the hole)
    else:
        if k not in composite.extensions:
            raise LabelNotInSigma(f"feature {k} has no extension solve")
        field = composite.extensions[k]
        pos = field.mesh.tri_tags["pos"]
        keep = lambda t: pos[t] == k  # noqa: E731
    mesh = field.mesh
    edges = edges_on(mesh, label, k)
    comps = field.components
    if len(edges) == 0:
        return DefectTrace(gamma_id(label, k), label, k, np.zeros((0, comps)), np.zeros(0), 0.0)
    plus = _sides(mesh, edges, keep)
    pts, _, traction = fem.boundary_tractions(field, edges, plus, qr)
    flat = pts.reshape(-1, 2)
    data = fem._values(bc.neumann_fn(label, k), flat, comps).reshape(len(flat), comps)
    traction = traction.reshape(len(flat), comps)
    samples = -(data + traction) if label is BoundaryLabel.GAMMA_0P else data - traction
    weights = (mesh.edge_lengths[edges][:, None] * qr.weights[None, :]).ravel()
    return DefectTrace(gamma_id(label, k), label, k, samples, weights, float(mesh.edge_lengths[edges].sum()), flat)


def estimate_gamma(trace: DefectTrace, weight: float = 1.0, n: int = 2) -> BoundaryEstimate:
    measure = trace.measure
    cg = c_gamma(measure, n)
    w = trace.weights
    mean = (w[:, None] * trace.samples).sum(axis=0) / w.sum()
    fluct = measure ** (1.0 / (n - 1)) * float(np.sum(w[:, None] * (trace.samples - mean) ** 2))
    avg = cg ** 2 * measure ** (n / (n - 1)) * float(np.sum(mean ** 2))
    tilde = cg ** 2 * measure ** (1.0 / (n - 1)) * float(np.sum(w[:, None] * trace.samples ** 2))
    value = weight * math.sqrt(fluct + avg)
    return BoundaryEstimate(trace.gamma_id, trace.feature_id, trace.label, measure, cg, fluct, avg, value, mean, tilde)


def sigma(composite: CompositeField) -> list:
    """The (label, feature) pairs carrying a defect for the current model."""
    out = []
    for f in composite.model.features:
        if f.status is not Status.REMOVED:
            continue
        if len(edges_on(composite.base.mesh, BoundaryLabel.GAMMA_N, f.id)):
            out.append((BoundaryLabel.GAMMA_N, f.id))
        if f.id in composite.extensions:
            m = composite.extensions[f.id].mesh
            for lab in (BoundaryLabel.GAMMA_0P, BoundaryLabel.GAMMA_R):
                if len(edges_on(m, lab, f.id)):
                    out.append((lab, f.id))
    return out


def aggregate(estimates: list, weight: float, feature_ids=()) -> EstimatorReport:
    """Feature-wise and total estimators from per-boundary estimates."""
    per_feature = {k: 0.0 for k in feature_ids}
    tilde = 0.0
    for e in estimates:
        per_feature[e.feature_id] = per_feature.get(e.feature_id, 0.0) + e.value ** 2
        tilde += e.tilde_term
    total = math.sqrt(sum(e.value ** 2 for e in estimates))
    return EstimatorReport(
        list(estimates), {k: math.sqrt(v) for k, v in per_feature.items()}, total, weight * math.sqrt(tilde), weight
    )


def report(state, bc: BoundaryData, problem: ProblemKind, prefactor: float = DEFAULT_PREFACTOR,
           qr: QuadRule | None = None, with_flux: bool = True) -> EstimatorReport:
    """Estimator report for a completed defeatured solve."""
    composite = state.composite
    weight = prefactor * problem.weight
    traces = [defect(g, composite, bc, problem, qr) for g in sigma(composite)]
    estimates = [estimate_gamma(t, weight) for t in traces if t.measure > 0]
    rep = aggregate(estimates, weight, state.model.removed_ids)
    if with_flux:
        rep.flux_residuals = flux_residuals(state, bc, problem)
    return rep


# ---------------------------------------------------------------- flux balance

def _labelled_master_edges(master: TriMesh, model) -> dict:
    """Master edges per static (label, feature) tag."""
    cache = master._cache.setdefault("tagged_edges", {})
    if "all" not in cache:
        table: dict = {}
        for e in np.flatnonzero(master.edge_piece >= 0):
            for tag in model.piece_labels[int(master.edge_piece[e])]:
                table.setdefault(tag, []).append(e)
        cache["all"] = {tag: np.asarray(v) for tag, v in table.items()}
    return cache["all"]


def _edge_integral(master: TriMesh, model, label, k, fn, comps) -> np.ndarray:
    edges = _labelled_master_edges(master, model).get((label, k))
    if fn is None or edges is None:
        return np.zeros(comps)
    qr = quad_rule("Edge", 7)
    pts = fem.edge_points(master, edges, qr.points).reshape(-1, 2)
    vals = fem._values(fn, pts, comps).reshape(len(edges), -1, comps)
    return np.einsum("e,q,eqc->c", master.edge_lengths[edges], qr.weights, vals)


def _area_integral(master: TriMesh, mask: np.ndarray, fn, comps) -> np.ndarray:
    if fn is None or not mask.any():
        return np.zeros(comps)
    tris = np.flatnonzero(mask)
    qr = quad_rule("Triangle", 6)
    pts = np.einsum("qi,tic->tqc", qr.points, master.vertices[master.triangles[tris]]).reshape(-1, 2)
    vals = fem._values(fn, pts, comps).reshape(len(tris), -1, comps)
    return np.einsum("t,q,tqc->c", 2.0 * master.areas[tris], qr.weights, vals)


def flux_residuals(state, bc: BoundaryData, problem: ProblemKind) -> dict:
    """Per removed feature: (positive, negative, extension) flux balance residuals."""
    master = state.meshes.master
    model = state.model
    comps = problem.components
    tags = master.tri_tags
    L = BoundaryLabel
    out = {}
    for f in model.features:
        if f.status is not Status.REMOVED:
            continue
        k = f.id

        def edge(label):
            try:
                fn = bc.neumann_fn(label, k)
            except MissingBoundaryData:
                fn = None
            return _edge_integral(master, model, label, k, fn, comps)

        positive = (edge(L.GAMMA_0P) - edge(L.GAMMA_S) - edge(L.GAMMA_R)
                    - _area_integral(master, tags["pos"] == k, bc.source, comps))
        negative = (edge(L.GAMMA_0N) - edge(L.GAMMA_N)
                    + _area_integral(master, tags["neg"] == k, bc.source, comps))
        extension = (edge(L.GAMMA_TILDE) - edge(L.GAMMA_R)
                     + _area_integral(master, (tags["ext"] == k) & (tags["pos"] != k), bc.source, comps))
        if comps == 1:
            positive, negative, extension = float(positive[0]), float(negative[0]), float(extension[0])
        out[k] = (positive, negative, extension)
    return out


__all__ = [
    "BoundaryEstimate", "DefectTrace", "EstimatorReport", "aggregate", "c_gamma", "defect",
    "estimate_gamma", "flux_residuals", "omega_constant", "report", "sigma",
]

"""Geometric refinement: solve, estimate, mark, insert features, repeat."""
from __future__ import annotations

import csv
import dataclasses
import io
from typing import Callable

from . import fem, pipeline
from .errors import NoFeatures
from .estimator import DEFAULT_PREFACTOR, EstimatorReport, report
from .fem import BoundaryData, DiscreteField, ProblemKind
from .geometry import GeometryModel, insert_features
from .mesh import ModelMesh, Sizing, mesh_model


@dataclasses.dataclass(frozen=True)
class AdaptiveConfig:
    theta: float = 0.95
    tol: float = 0.0
    max_iter: int = 100

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if not self.tol >= 0:
            raise ValueError("tol must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclasses.dataclass
class IterationRecord:
    iteration: int
    marked: frozenset
    estimator_total: float
    per_feature: dict
    n_remaining: int
    n_inserted: int
    true_error: float | None = None
    report: EstimatorReport | None = dataclasses.field(default=None, repr=False)

    @property
    def effectivity(self) -> float | None:
        # with every feature inserted both the error and the estimator vanish
        if self.true_error is None or self.true_error == 0 or self.n_remaining == 0:
            return None
        return self.estimator_total / self.true_error


def mark(report: EstimatorReport, theta: float, remaining=None) -> set:
    """Maximum strategy: every feature whose contribution reaches theta times the largest one."""
    contributions = dict(report.per_feature)
    if remaining is not None:
        contributions = {k: contributions.get(k, 0.0) for k in remaining}
    if not contributions:
        raise NoFeatures("no feature left to mark")
    top = max(contributions.values())
    if top == 0:
        return set(contributions)
    return {k for k, v in contributions.items() if v >= theta * top}


def run(model: GeometryModel, problem: ProblemKind, bc: BoundaryData, config: AdaptiveConfig,
        reference: DiscreteField | None = None, meshes: ModelMesh | None = None,
        sizing: Sizing | None = None, prefactor: float = DEFAULT_PREFACTOR,
        callback: Callable | None = None) -> list:
    """Adaptive loop; ``reference`` (an exact-domain solution) enables true errors.

    Every iteration re-cuts its meshes from one master triangulation of all
    feature boundaries, so consecutive defeatured meshes stay matched.
    """
    meshes = meshes or mesh_model(model, sizing or pipeline.DEFAULT_SIZING)
    records = []
    inserted = 0
    for it in range(config.max_iter):
        state = pipeline.solve_all(model, problem, bc, meshes)
        rep = report(state, bc, problem, prefactor=prefactor, with_flux=False)
        err = fem.energy_norm_error(reference, state.composite) if reference is not None else None
        remaining = model.removed_ids
        rec = IterationRecord(it, frozenset(), rep.total, dict(rep.per_feature), len(remaining), inserted, err, rep)
        records.append(rec)
        if callback is not None:
            callback(rec)
        if not remaining or rep.total <= config.tol or it == config.max_iter - 1:
            break
        marked = mark(rep, config.theta, remaining)
        rec.marked = frozenset(marked)
        inserted += len(marked)
        model = insert_features(model, marked)
    return records


def trace_csv(records: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "n_features_added_cumulative", "estimator", "true_error", "marked_ids"])
    for r in records:
        err = "" if r.true_error is None else f"{r.true_error:.12e}"
        w.writerow([r.iteration, r.n_inserted, f"{r.estimator_total:.12e}", err,
                    " ".join(str(k) for k in sorted(r.marked))])
    return buf.getvalue()


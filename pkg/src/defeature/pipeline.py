"""Defeatured solve, local extension solves and the glued solution."""
from __future__ import annotations

import dataclasses

import numpy as np

from . import fem
from .errors import EmptyPositivePart, MissingExtension
from .fem import BoundaryData, CompositeField, DiscreteField, ProblemKind
from .geometry import BoundaryLabel, GeometryModel, Status
from .mesh import ModelMesh, Sizing, TriMesh, edges_on, mesh_model, quad_rule

DEFAULT_SIZING = Sizing(h_max=1.0 / 64)


@dataclasses.dataclass(eq=False)
class DefeaturedSolve:
    model: GeometryModel
    mesh0: TriMesh
    field0: DiscreteField
    meshes: ModelMesh
    ext_meshes: dict = dataclasses.field(default_factory=dict)
    ext_fields: dict = dataclasses.field(default_factory=dict)
    composite: CompositeField | None = None

    @property
    def needs_extension(self) -> list[int]:
        return [f.id for f in self.model.features if f.status is Status.REMOVED and f.has_positive]


def _meshes_for(model: GeometryModel, meshes: ModelMesh | None, sizing: Sizing | None) -> ModelMesh:
    if meshes is not None:
        return meshes
    return mesh_model(model, sizing or DEFAULT_SIZING)


def solve_defeatured(model: GeometryModel, problem: ProblemKind, bc: BoundaryData,
                     meshes: ModelMesh | None = None, sizing: Sizing | None = None) -> DefeaturedSolve:
    """Solve on the (partially) defeatured domain of ``model``."""
    meshes = _meshes_for(model, meshes, sizing)
    mesh0 = meshes.submesh(model, "defeatured")
    field0 = fem.solve(mesh0, problem, bc)
    return DefeaturedSolve(model, mesh0, field0, meshes)


def solve_extension(state: DefeaturedSolve, k: int, problem: ProblemKind, bc: BoundaryData) -> DiscreteField:
    """Extend the defeatured solution into the positive part of feature ``k``."""
    feature = state.model.feature(k)
    if not feature.has_positive:
        raise EmptyPositivePart(f"feature {k} has no positive part")
    mesh = state.meshes.submesh(state.model, "extension", k)
    base = state.field0
    loc = fem.locator(base.mesh)

    def trace(points):
        tri, bary = loc.locate(points)
        vals = base.values_at(tri, bary[:, None, :])[:, 0, :]
        return vals[:, 0] if base.components == 1 else vals

    local_bc = bc.with_dirichlet((BoundaryLabel.GAMMA_0P, k), trace)
    field = fem.solve(mesh, problem, local_bc)
    state.ext_meshes[k] = mesh
    state.ext_fields[k] = field
    return field


def compose(state: DefeaturedSolve) -> CompositeField:
    missing = [k for k in state.needs_extension if k not in state.ext_fields]
    if missing:
        raise MissingExtension(f"no extension solve for feature(s) {missing}")
    state.composite = CompositeField(state.field0, dict(state.ext_fields), state.model)
    return state.composite


def solve_all(model: GeometryModel, problem: ProblemKind, bc: BoundaryData,
              meshes: ModelMesh | None = None, sizing: Sizing | None = None) -> DefeaturedSolve:
    """Defeatured solve, every extension solve, then composition."""
    state = solve_defeatured(model, problem, bc, meshes, sizing)
    for k in state.needs_extension:
        solve_extension(state, k, problem, bc)
    compose(state)
    return state


def solve_exact(model: GeometryModel, problem: ProblemKind, bc: BoundaryData, meshes: ModelMesh) -> DiscreteField:
    """Solve on the exact domain (used as the reference solution)."""
    return fem.solve(meshes.submesh(model, "exact"), problem, bc)


def _primal(field, pts) -> np.ndarray:
    vals = fem.evaluate(field, pts)
    if field.space == "TaylorHood":
        vals = vals[0]
    return np.asarray(vals).reshape(len(pts), -1)


def trace_mismatch(state: DefeaturedSolve, k: int) -> tuple[float, float]:
    """L2 norms of u_k - u_0 and of u_0 on the Dirichlet interface of extension ``k``."""
    mesh = state.ext_meshes[k]
    edges = edges_on(mesh, BoundaryLabel.GAMMA_0P, k)
    qr = quad_rule("Edge", 5)
    pts = fem.edge_points(mesh, edges, qr.points).reshape(-1, 2)
    w = (mesh.edge_lengths[edges][:, None] * qr.weights[None, :]).reshape(-1, 1)
    uk = _primal(state.ext_fields[k], pts)
    u0 = _primal(state.field0, pts)
    return float(np.sqrt(np.sum(w * (uk - u0) ** 2))), float(np.sqrt(np.sum(w * u0 ** 2)))

"""P2 / Taylor-Hood finite elements for Poisson, linear elasticity and Stokes.

Degrees of freedom of a P2 field are numbered vertices first, then edge
midpoints (``n_vertices + edge``).  Vector fields are stored blocked: all x
components followed by all y components.  Taylor-Hood pressures live on the
mesh vertices (P1) and are appended after the velocity block.
"""
from __future__ import annotations

import dataclasses
from typing import Callable, Mapping

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import shapely

from .errors import (
    IncompatibleData,
    MissingBoundaryData,
    MissingSide,
    PointOutsideDomain,
    SingularSystem,
    SolverDivergence,
)
from .geometry import BoundaryLabel, GeometryModel, Status
from .mesh import LABELS, QuadRule, TriMesh, quad_rule

RESIDUAL_TOL = 1e-10
AMG_TOL = 1e-12
STOKES_RTOL = 1e-12
STOKES_RESTARTS = 6
DIRECT_LIMIT = 60_000  # unknowns; larger SPD systems go to AMG-preconditioned CG
LOCATE_SLACK = 1e-12


# ---------------------------------------------------------------- problem data

@dataclasses.dataclass(frozen=True)
class ProblemKind:
    variant: str
    mu: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        if self.variant not in ("poisson", "elasticity", "stokes"):
            raise ValueError(f"unknown problem {self.variant!r}")
        if self.variant != "poisson" and self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.variant == "elasticity" and self.lam + 2.0 / 3.0 * self.mu <= 0:
            raise ValueError("lambda + 2 mu / 3 must be positive")

    @classmethod
    def poisson(cls):
        return cls("poisson")

    @classmethod
    def elasticity(cls, lam, mu):
        return cls("elasticity", mu=mu, lam=lam)

    @classmethod
    def stokes(cls, mu=1.0):
        return cls("stokes", mu=mu)

    @property
    def components(self) -> int:
        return 1 if self.variant == "poisson" else 2

    @property
    def rho(self) -> float:
        """Coercivity constant of the elastic bilinear form."""
        if self.lam >= 0:
            return self.mu
        return min(self.mu, 1.5 * self.lam + self.mu)

    @property
    def weight(self) -> float:
        if self.variant == "poisson":
            return 1.0
        if self.variant == "stokes":
            return self.mu ** -0.5
        return self.rho ** -0.5


Fn = Callable[[np.ndarray], np.ndarray]


def constant(value) -> Fn:
    """Constant boundary/source datum (scalar or 2-vector)."""
    v = np.asarray(value, dtype=float)

    def fn(points):
        n = len(points)
        return np.full(n, float(v)) if v.ndim == 0 else np.tile(v, (n, 1))

    return fn


ZERO = constant(0.0)


def _key(label, k):
    return (BoundaryLabel.parse(label), k)


@dataclasses.dataclass
class BoundaryData:
    """Problem data keyed by boundary label.

    Keys of ``dirichlet`` and ``neumann`` are labels or ``(label, k)`` pairs;
    a feature-specific entry overrides the label-wide one.  Functions map an
    (n, 2) point array to (n,) values (scalar problems) or (n, 2) values.
    """

    dirichlet: dict = dataclasses.field(default_factory=dict)
    neumann: dict = dataclasses.field(default_factory=dict)
    source: Fn | None = None
    source_div: Fn | None = None

    def __post_init__(self):
        self.dirichlet = {self._norm(k): v for k, v in self.dirichlet.items()}
        self.neumann = {self._norm(k): v for k, v in self.neumann.items()}

    @staticmethod
    def _norm(key):
        if isinstance(key, tuple):
            return (BoundaryLabel.parse(key[0]), key[1])
        return (BoundaryLabel.parse(key), None)

    @classmethod
    def standard(cls, g_dirichlet=None, g_neumann=None, source=None, g_feature=None,
                 g_zero=None, g_tilde=None, source_div=None):
        """Data for every label from the usual ingredients (missing ones are zero)."""
        g_feature = g_feature or ZERO
        neumann = {
            BoundaryLabel.NEUMANN_OUTER: g_neumann or ZERO,
            BoundaryLabel.GAMMA_N: g_feature,
            BoundaryLabel.GAMMA_P: g_feature,
            BoundaryLabel.GAMMA_S: g_feature,
            BoundaryLabel.GAMMA_R: g_feature,
            BoundaryLabel.GAMMA_0N: g_zero or ZERO,
            BoundaryLabel.GAMMA_0P: g_zero or ZERO,
            BoundaryLabel.GAMMA_TILDE: g_tilde or ZERO,
        }
        dirichlet = {BoundaryLabel.DIRICHLET_OUTER: g_dirichlet or ZERO}
        return cls(dirichlet, neumann, source or ZERO, source_div)

    def _find(self, table, label, k):
        label = BoundaryLabel.parse(label)
        if (label, k) in table:
            return table[(label, k)]
        return table.get((label, None))

    def dirichlet_fn(self, label, k=None):
        return self._find(self.dirichlet, label, k)

    def neumann_fn(self, label, k=None):
        fn = self._find(self.neumann, label, k)
        if fn is None:
            raise MissingBoundaryData(f"no Neumann datum for {BoundaryLabel.parse(label).value} (feature {k})")
        return fn

    def with_dirichlet(self, label, fn) -> "BoundaryData":
        d = dict(self.dirichlet)
        d[self._norm(label)] = fn
        return dataclasses.replace(self, dirichlet=d)


def _values(fn: Fn, points: np.ndarray, comps: int) -> np.ndarray:
    if fn is ZERO:
        # the default datum serves scalar and vector problems alike
        return np.zeros(len(points)) if comps == 1 else np.zeros((len(points), 2))
    v = np.asarray(fn(points), dtype=float)
    if comps == 1:
        if v.ndim == 0:
            v = np.full(len(points), float(v))
        return v.reshape(len(points))
    if v.ndim == 1 and v.shape[0] == 2 and len(points) != 2:
        v = np.tile(v, (len(points), 1))
    return v.reshape(len(points), 2)


# ---------------------------------------------------------------- P2 basis

def p2_values(bary: np.ndarray) -> np.ndarray:
    """P2 shape functions at barycentric points, shape (..., 6)."""
    l0, l1, l2 = bary[..., 0], bary[..., 1], bary[..., 2]
    return np.stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0],
        axis=-1,
    )


def p2_bary_derivatives(bary: np.ndarray) -> np.ndarray:
    """d N_i / d lambda_j, shape (..., 6, 3)."""
    l0, l1, l2 = bary[..., 0], bary[..., 1], bary[..., 2]
    z = np.zeros_like(l0)
    rows = [
        [4 * l0 - 1, z, z],
        [z, 4 * l1 - 1, z],
        [z, z, 4 * l2 - 1],
        [4 * l1, 4 * l0, z],
        [z, 4 * l2, 4 * l1],
        [4 * l2, z, 4 * l0],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def bary_gradients(mesh: TriMesh, tris=None) -> np.ndarray:
    """Gradients of the barycentric coordinates, shape (nt, 3, 2)."""
    t = mesh.triangles if tris is None else mesh.triangles[tris]
    p = mesh.vertices[t]
    area2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (
        p[:, 2, 0] - p[:, 0, 0]
    )
    g = np.empty((len(t), 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        g[:, i, 0] = (p[:, j, 1] - p[:, k, 1]) / area2
        g[:, i, 1] = (p[:, k, 0] - p[:, j, 0]) / area2
    return g


def p2_gradients(mesh: TriMesh, tris: np.ndarray, bary: np.ndarray) -> np.ndarray:
    """Physical gradients of the 6 shape functions.

    ``bary`` is (nq, 3) shared by all triangles or (len(tris), nq, 3);
    result is (len(tris), nq, 6, 2).
    """
    gl = bary_gradients(mesh, tris)
    d = p2_bary_derivatives(bary)
    if d.ndim == 3:
        return np.einsum("qij,tjc->tqic", d, gl)
    return np.einsum("tqij,tjc->tqic", d, gl)


def p2_dofs(mesh: TriMesh) -> np.ndarray:
    return np.concatenate([mesh.triangles, mesh.n_vertices + mesh.tri_edges], axis=1)


def p2_nodes(mesh: TriMesh) -> np.ndarray:
    mid = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    return np.concatenate([mesh.vertices, mid])


def n_p2(mesh: TriMesh) -> int:
    return mesh.n_vertices + mesh.n_edges


# ---------------------------------------------------------------- fields

@dataclasses.dataclass(eq=False)
class DiscreteField:
    """Finite-element coefficients on a mesh.

    ``space`` is ``ScalarP2``, ``VectorP2`` or ``TaylorHood``.
    """

    space: str
    coefficients: np.ndarray
    mesh: TriMesh
    problem: ProblemKind

    def __post_init__(self):
        n = n_p2(self.mesh)
        expected = {"ScalarP2": n, "VectorP2": 2 * n, "TaylorHood": 2 * n + self.mesh.n_vertices}[self.space]
        if len(self.coefficients) != expected:
            raise ValueError(f"{self.space} needs {expected} coefficients, got {len(self.coefficients)}")
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("non-finite coefficients")

    @property
    def components(self) -> int:
        return 1 if self.space == "ScalarP2" else 2

    def component_coefficients(self) -> np.ndarray:
        """P2 coefficients as (n_p2, components)."""
        n = n_p2(self.mesh)
        if self.space == "ScalarP2":
            return self.coefficients[:n, None]
        return np.column_stack([self.coefficients[:n], self.coefficients[n:2 * n]])

    @property
    def pressure(self) -> np.ndarray | None:
        if self.space != "TaylorHood":
            return None
        return self.coefficients[2 * n_p2(self.mesh):]

    def values_at(self, tris, bary) -> np.ndarray:
        """Values at barycentric points, (len(tris), nq, components)."""
        c = self.component_coefficients()[p2_dofs(self.mesh)[tris]]  # (t, 6, comps)
        phi = p2_values(bary)
        if phi.ndim == 2:
            return np.einsum("qi,tic->tqc", phi, c)
        return np.einsum("tqi,tic->tqc", phi, c)

    def gradients_at(self, tris, bary) -> np.ndarray:
        """Gradients, (len(tris), nq, components, 2)."""
        c = self.component_coefficients()[p2_dofs(self.mesh)[tris]]
        g = p2_gradients(self.mesh, tris, bary)
        return np.einsum("tqid,tic->tqcd", g, c)

    def pressure_at(self, tris, bary) -> np.ndarray:
        p = self.pressure
        if p is None:
            return None
        b = bary if bary.ndim == 3 else np.broadcast_to(bary, (len(tris),) + bary.shape)
        return np.einsum("tqi,ti->tq", b, p[self.mesh.triangles[tris]])

    def nodal_values(self) -> np.ndarray:
        v = self.component_coefficients()[: self.mesh.n_vertices]
        return v[:, 0] if self.components == 1 else v


# ---------------------------------------------------------------- point location

class PointLocator:
    """Uniform grid bucketing of triangles, then barycentric containment."""

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        p = mesh.vertices[mesh.triangles]
        lo = p.min(axis=1)
        hi = p.max(axis=1)
        self.origin = mesh.vertices.min(axis=0)
        span = np.maximum(mesh.vertices.max(axis=0) - self.origin, 1e-300)
        n = max(1, int(np.sqrt(mesh.n_triangles)))
        self.cell = span / n * (1 + 1e-12)
        self.shape = (n, n)
        i0 = self._cell_index(lo)
        i1 = self._cell_index(hi)
        counts = (i1[:, 0] - i0[:, 0] + 1) * (i1[:, 1] - i0[:, 1] + 1)
        tri = np.repeat(np.arange(mesh.n_triangles), counts)
        offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        w = np.repeat(i1[:, 1] - i0[:, 1] + 1, counts)
        cx = np.repeat(i0[:, 0], counts) + offs // w
        cy = np.repeat(i0[:, 1], counts) + offs % w
        cid = cx * n + cy
        order = np.argsort(cid, kind="stable")
        self.cand = tri[order]
        self.start = np.searchsorted(cid[order], np.arange(n * n))
        self.count = np.diff(np.append(self.start, len(cid)))
        self.bgrad = bary_gradients(mesh)

    def _cell_index(self, pts):
        idx = np.floor((pts - self.origin) / self.cell).astype(np.int64)
        return np.clip(idx, 0, np.array(self.shape) - 1)

    def barycentric(self, tris, pts) -> np.ndarray:
        v0 = self.mesh.vertices[self.mesh.triangles[tris, 0]]
        g = self.bgrad[tris]
        l1 = np.einsum("nc,nc->n", g[:, 1], pts - v0)
        l2 = np.einsum("nc,nc->n", g[:, 2], pts - v0)
        return np.column_stack([1.0 - l1 - l2, l1, l2])

    def locate(self, pts, raise_missing=True):
        """Containing triangle and barycentric coordinates for each point."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        ci = self._cell_index(pts)
        cid = ci[:, 0] * self.shape[1] + ci[:, 1]
        tri = -np.ones(len(pts), dtype=np.int64)
        bary = np.zeros((len(pts), 3))
        best = np.full(len(pts), -np.inf)
        active = np.flatnonzero(self.count[cid] > 0)
        j = 0
        while len(active):
            cand = self.cand[self.start[cid[active]] + j]
            b = self.barycentric(cand, pts[active])
            score = b.min(axis=1)
            better = score > best[active]
            upd = active[better]
            best[upd] = score[better]
            tri[upd] = cand[better]
            bary[upd] = b[better]
            done = score >= -LOCATE_SLACK
            j += 1
            active = active[~done & (self.count[cid[active]] > j)]
        missing = best < -LOCATE_SLACK
        if raise_missing and missing.any():
            raise PointOutsideDomain(f"{missing.sum()} point(s) outside the mesh, e.g. {pts[missing][0].tolist()}")
        tri[missing] = -1
        return tri, bary


def locator(mesh: TriMesh) -> PointLocator:
    if "locator" not in mesh._cache:
        mesh._cache["locator"] = PointLocator(mesh)
    return mesh._cache["locator"]


# ---------------------------------------------------------------- composite fields

@dataclasses.dataclass(eq=False)
class CompositeField:
    """Defeatured solution glued with the extension solutions on positive parts."""

    base: DiscreteField
    extensions: Mapping[int, DiscreteField]
    model: GeometryModel

    def component_for_points(self, pts) -> np.ndarray:
        owner = np.zeros(len(pts), dtype=np.int64)
        for k in self.extensions:
            fp = self.model.feature(k).positive_part
            owner[shapely.contains_xy(fp, pts[:, 0], pts[:, 1])] = k
        return owner

    def field(self, k: int) -> DiscreteField:
        return self.base if k == 0 else self.extensions[k]


def evaluate(field, points):
    """Field values at points: (n,) scalar or (n, 2) vector; Stokes also returns pressure."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if isinstance(field, CompositeField):
        owner = field.component_for_points(pts)
        comps = field.base.components
        vals = np.zeros((len(pts), comps))
        pres = np.zeros(len(pts))
        for k in np.unique(owner):
            sel = owner == k
            v, p = _evaluate_plain(field.field(int(k)), pts[sel])
            vals[sel] = v
            if p is not None:
                pres[sel] = p
        vals = vals[:, 0] if comps == 1 else vals
        return (vals, pres) if field.base.space == "TaylorHood" else vals
    v, p = _evaluate_plain(field, pts)
    v = v[:, 0] if field.components == 1 else v
    return (v, p) if field.space == "TaylorHood" else v


def _evaluate_plain(field: DiscreteField, pts):
    tri, bary = locator(field.mesh).locate(pts)
    v = field.values_at(tri, bary[:, None, :])[:, 0, :]
    p = field.pressure_at(tri, bary[:, None, :])
    return v, (None if p is None else p[:, 0])


# ---------------------------------------------------------------- assembly

def _coo(rows, cols, vals, shape):
    return sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()


def _element_geometry(mesh: TriMesh, qr: QuadRule):
    g = p2_gradients(mesh, np.arange(mesh.n_triangles), qr.points)  # (t, q, 6, 2)
    jw = 2.0 * mesh.areas[:, None] * qr.weights[None, :]  # (t, q)
    return g, jw


def assemble_stiffness(mesh: TriMesh, problem: ProblemKind) -> sp.csr_matrix:
    """Stiffness matrix of the energy bilinear form (velocity block for Stokes)."""
    qr = quad_rule("Triangle", 2)
    g, jw = _element_geometry(mesh, qr)
    dofs = p2_dofs(mesh)
    n = n_p2(mesh)
    if problem.variant == "poisson":
        ke = np.einsum("tq,tqia,tqja->tij", jw, g, g)
        return _coo(np.repeat(dofs, 6, axis=1), np.tile(dofs, (1, 6)), ke, (n, n))
    mu, lam = problem.mu, (problem.lam if problem.variant == "elasticity" else 0.0)
    gx, gy = g[..., 0], g[..., 1]
    xx = np.einsum("tq,tqi,tqj->tij", jw, gx, gx)
    yy = np.einsum("tq,tqi,tqj->tij", jw, gy, gy)
    xy = np.einsum("tq,tqi,tqj->tij", jw, gx, gy)  # int dphi_i/dx dphi_j/dy
    kxx = mu * (2 * xx + yy) + lam * xx
    kyy = mu * (xx + 2 * yy) + lam * yy
    kxy = mu * xy.transpose(0, 2, 1) + lam * xy
    ke = np.block([[kxx, kxy], [kxy.transpose(0, 2, 1), kyy]])
    vd = np.concatenate([dofs, dofs + n], axis=1)
    return _coo(np.repeat(vd, 12, axis=1), np.tile(vd, (1, 12)), ke, (2 * n, 2 * n))


def assemble_divergence(mesh: TriMesh) -> sp.csr_matrix:
    """B[m, v] = -int psi_m div(phi_v) for P1 pressure and P2 velocity."""
    qr = quad_rule("Triangle", 2)
    g, jw = _element_geometry(mesh, qr)
    psi = qr.points  # P1 basis = barycentric coordinates
    bx = -np.einsum("tq,qm,tqi->tmi", jw, psi, g[..., 0])
    by = -np.einsum("tq,qm,tqi->tmi", jw, psi, g[..., 1])
    dofs = p2_dofs(mesh)
    n = n_p2(mesh)
    be = np.concatenate([bx, by], axis=2)
    vd = np.concatenate([dofs, dofs + n], axis=1)
    rows = np.repeat(mesh.triangles, 12, axis=1).reshape(-1, 3, 12)
    cols = np.broadcast_to(vd[:, None, :], (mesh.n_triangles, 3, 12))
    return _coo(rows, cols, be, (mesh.n_vertices, 2 * n))


def assemble_load(mesh: TriMesh, fn: Fn | None, comps: int, order: int = 5) -> np.ndarray:
    n = n_p2(mesh)
    out = np.zeros(comps * n)
    if fn is None:
        return out
    qr = quad_rule("Triangle", order)
    phi = p2_values(qr.points)  # (q, 6)
    p = mesh.vertices[mesh.triangles]
    xq = np.einsum("qi,tic->tqc", qr.points, p)
    f = _values(fn, xq.reshape(-1, 2), comps).reshape(mesh.n_triangles, len(qr.weights), comps)
    jw = 2.0 * mesh.areas[:, None] * qr.weights[None, :]
    fe = np.einsum("tq,qi,tqc->tic", jw, phi, f)
    dofs = p2_dofs(mesh)
    for c in range(comps):
        np.add.at(out, dofs + c * n, fe[:, :, c])
    return out


def p1_load(mesh: TriMesh, fn: Fn | None, order: int = 4) -> np.ndarray:
    out = np.zeros(mesh.n_vertices)
    if fn is None:
        return out
    qr = quad_rule("Triangle", order)
    p = mesh.vertices[mesh.triangles]
    xq = np.einsum("qi,tic->tqc", qr.points, p)
    f = _values(fn, xq.reshape(-1, 2), 1).reshape(mesh.n_triangles, -1)
    jw = 2.0 * mesh.areas[:, None] * qr.weights[None, :]
    np.add.at(out, mesh.triangles, np.einsum("tq,qm,tq->tm", jw, qr.points, f))
    return out


def edge_nodes(mesh: TriMesh, edges: np.ndarray) -> np.ndarray:
    """P2 dofs of edges as (start, end, midpoint)."""
    return np.column_stack([mesh.edges[edges, 0], mesh.edges[edges, 1], mesh.n_vertices + edges])


def edge_points(mesh: TriMesh, edges, t) -> np.ndarray:
    a = mesh.vertices[mesh.edges[edges, 0]]
    b = mesh.vertices[mesh.edges[edges, 1]]
    return a[:, None, :] + np.asarray(t)[None, :, None] * (b - a)[:, None, :]


def _boundary_classes(mesh: TriMesh, bc: BoundaryData):
    """Split boundary edges into Dirichlet / Neumann groups keyed by (label, k)."""
    if mesh.edge_label is None:
        raise MissingBoundaryData("mesh has no boundary labels")
    bnd = mesh.boundary_edges
    dirichlet: dict = {}
    neumann: dict = {}
    for e in bnd:
        code = mesh.edge_label[e]
        if code < 0:
            raise MissingBoundaryData(f"unlabeled boundary edge {mesh.edges[e].tolist()}")
        key = (LABELS[code], int(mesh.edge_feature[e]) or None)
        if bc.dirichlet_fn(*key) is not None:
            dirichlet.setdefault(key, []).append(e)
        else:
            bc.neumann_fn(*key)
            neumann.setdefault(key, []).append(e)
    return ({k: np.asarray(v) for k, v in dirichlet.items()}, {k: np.asarray(v) for k, v in neumann.items()})


def neumann_load(mesh: TriMesh, groups: dict, bc: BoundaryData, comps: int, order: int = 5) -> np.ndarray:
    n = n_p2(mesh)
    out = np.zeros(comps * n)
    qr = quad_rule("Edge", order)
    t = qr.points
    shape = np.column_stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)])  # (q, 3)
    for key, edges in groups.items():
        fn = bc.neumann_fn(*key)
        x = edge_points(mesh, edges, t)
        g = _values(fn, x.reshape(-1, 2), comps).reshape(len(edges), len(t), comps)
        le = mesh.edge_lengths[edges]
        fe = np.einsum("e,q,qi,eqc->eic", le, qr.weights, shape, g)
        nodes = edge_nodes(mesh, edges)
        for c in range(comps):
            np.add.at(out, nodes + c * n, fe[:, :, c])
    return out


def _dirichlet_values(mesh: TriMesh, groups: dict, bc: BoundaryData, comps: int):
    n = n_p2(mesh)
    nodes_xy = p2_nodes(mesh)
    fixed = {}
    for key, edges in groups.items():
        fn = bc.dirichlet_fn(*key)
        nodes = np.unique(edge_nodes(mesh, edges))
        vals = _values(fn, nodes_xy[nodes], comps).reshape(len(nodes), comps)
        for c in range(comps):
            fixed.update(zip((nodes + c * n).tolist(), vals[:, c].tolist()))
    idx = np.fromiter(fixed.keys(), dtype=np.int64, count=len(fixed))
    val = np.fromiter(fixed.values(), dtype=float, count=len(fixed))
    order = np.argsort(idx)
    return idx[order], val[order]


@dataclasses.dataclass
class LinearSystem:
    """Assembled system kept for verification (residuals, orthogonality)."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    solution: np.ndarray
    fixed: np.ndarray
    free: np.ndarray
    n_velocity: int
    divergence: sp.csr_matrix | None = None
    div_rhs: np.ndarray | None = None


def _amg_solve(a: sp.csr_matrix, b: np.ndarray, near_null) -> np.ndarray:
    ml = pyamg.smoothed_aggregation_solver(a, B=near_null, symmetry="hermitian")
    residuals: list = []
    x = ml.solve(b, tol=AMG_TOL, accel="cg", maxiter=500, residuals=residuals)
    nb = np.linalg.norm(b)
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite solution")
    if nb > 0 and np.linalg.norm(b - a @ x) > RESIDUAL_TOL * nb:
        return _direct_solve(a, b)
    return x


def _linear_solve(a: sp.csr_matrix, b: np.ndarray, spd: bool, near_null=None) -> np.ndarray:
    if spd and a.shape[0] > DIRECT_LIMIT:
        return _amg_solve(a, b, near_null)
    return _direct_solve(a, b)


def _direct_solve(a: sp.csr_matrix, b: np.ndarray) -> np.ndarray:
    try:
        lu = spla.splu(a.tocsc(), permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc
    x = lu.solve(b)
    nb = np.linalg.norm(b)
    for _ in range(3):
        r = b - a @ x
        if not np.all(np.isfinite(x)):
            raise SingularSystem("non-finite solution")
        if nb == 0 or np.linalg.norm(r) <= RESIDUAL_TOL * nb:
            return x
        x = x + lu.solve(r)
    r = b - a @ x
    if nb > 0 and np.linalg.norm(r) > RESIDUAL_TOL * nb:
        raise SolverDivergence(f"relative residual {np.linalg.norm(r) / nb:.3e}")
    return x


def solve(mesh: TriMesh, problem: ProblemKind, bc: BoundaryData, keep_system: bool = False):
    """Galerkin solution of the problem on ``mesh``; returns a DiscreteField.

    With ``keep_system`` the assembled ``LinearSystem`` is returned as well.
    """
    comps = problem.components
    dgroups, ngroups = _boundary_classes(mesh, bc)
    nvel = comps * n_p2(mesh)
    fixed, values = _dirichlet_values(mesh, dgroups, bc, comps)
    if problem.variant != "stokes" and len(fixed) == 0:
        raise SingularSystem("no Dirichlet boundary: the problem is not uniquely solvable")

    a = assemble_stiffness(mesh, problem)
    f = assemble_load(mesh, bc.source, comps) + neumann_load(mesh, ngroups, bc, comps)
    div = div_rhs = None
    if problem.variant == "stokes":
        div = assemble_divergence(mesh)
        div_rhs = -p1_load(mesh, bc.source_div)
        blocks = [[a, div.T], [div, None]]
        rhs = np.concatenate([f, div_rhs])
        pure = len(ngroups) == 0
        if pure:
            _check_compatibility(mesh, dgroups, bc)
        k = sp.bmat(blocks, format="csr")
        ntot = k.shape[0]
        if ntot - len(fixed) > DIRECT_LIMIT:
            x = _stokes_iterative(k, rhs, fixed, values, nvel, mesh, problem.mu, pure)
            full = k
        else:
            full = k
            if pure:
                m = p1_load(mesh, constant(1.0))
                col = sp.csr_matrix(np.concatenate([np.zeros(nvel), m])[:, None])
                full = sp.bmat([[k, col], [col.T, None]], format="csr")
                rhs = np.concatenate([rhs, [0.0]])
            x = _eliminated_solve(full, rhs, fixed, values, False, None)
    else:
        full = a
        rhs = f
        near_null = _rigid_modes(mesh) if problem.variant == "elasticity" else None
        x = _eliminated_solve(full, rhs, fixed, values, True, near_null)
    free = np.setdiff1d(np.arange(full.shape[0]), fixed)
    space = {"poisson": "ScalarP2", "elasticity": "VectorP2", "stokes": "TaylorHood"}[problem.variant]
    coeffs = x[: nvel + (mesh.n_vertices if problem.variant == "stokes" else 0)]
    field = DiscreteField(space, coeffs, mesh, problem)
    if keep_system:
        return field, LinearSystem(full, rhs, x, fixed, free, nvel, div, div_rhs)
    return field


def _eliminated_solve(full, rhs, fixed, values, spd, near_null):
    """Solve with Dirichlet rows and columns eliminated."""
    ntot = full.shape[0]
    free = np.setdiff1d(np.arange(ntot), fixed)
    x = np.zeros(ntot)
    x[fixed] = values
    reduced_rhs = rhs[free] - full[free][:, fixed] @ values
    x[free] = _linear_solve(full[free][:, free].tocsr(), reduced_rhs, spd,
                            None if near_null is None else near_null[free])
    return x


def _stokes_iterative(k, rhs, fixed, values, nvel, mesh, mu, pure):
    """Preconditioned MINRES for large Taylor-Hood systems.

    Velocity block: one smoothed-aggregation V-cycle; pressure block: the
    lumped pressure mass scaled by 1/mu.  A pure Dirichlet problem leaves the
    pressure defined up to a constant, which is fixed to zero mean afterwards.
    """
    ntot = k.shape[0]
    free = np.setdiff1d(np.arange(ntot), fixed)
    x = np.zeros(ntot)
    x[fixed] = values
    b = rhs[free] - k[free][:, fixed] @ values
    kf = k[free][:, free].tocsr()
    nu = int(np.sum(free < nvel))
    mass = p1_load(mesh, constant(1.0))
    if pure:
        # consistency with the constant-pressure kernel
        b[nu:] -= mass * (b[nu:].sum() / mass.sum())
    amg = pyamg.smoothed_aggregation_solver(kf[:nu, :nu], B=_rigid_modes(mesh)[free[:nu]], symmetry="hermitian")
    vcycle = amg.aspreconditioner(cycle="V")
    pinv = mu / mass

    def apply(r):
        return np.concatenate([vcycle @ r[:nu], pinv * r[nu:]])

    prec = spla.LinearOperator(kf.shape, matvec=apply, dtype=float)
    nb = np.linalg.norm(b)
    sol = np.zeros_like(b)
    res = nb
    info = 0
    # restart on the true residual: MINRES monitors a preconditioned norm
    for _ in range(STOKES_RESTARTS):
        if res <= RESIDUAL_TOL * nb:
            break
        step, info = spla.minres(kf, b - kf @ sol, rtol=STOKES_RTOL, maxiter=5000, M=prec)
        sol += step
        res = np.linalg.norm(b - kf @ sol)
    if not np.all(np.isfinite(sol)) or (nb > 0 and res > RESIDUAL_TOL * nb):
        raise SolverDivergence(f"MINRES relative residual {res / max(nb, 1e-300):.3e} (info {info})")
    if pure:
        p = sol[nu:]
        sol[nu:] = p - mass @ p / mass.sum()
    x[free] = sol
    return x


def _rigid_modes(mesh: TriMesh) -> np.ndarray:
    xy = p2_nodes(mesh)
    n = len(xy)
    modes = np.zeros((2 * n, 3))
    modes[:n, 0] = 1.0
    modes[n:, 1] = 1.0
    modes[:n, 2] = -xy[:, 1]
    modes[n:, 2] = xy[:, 0]
    return modes


def _check_compatibility(mesh, dgroups, bc):
    inflow = 0.0
    qr = quad_rule("Edge", 5)
    for key, edges in dgroups.items():
        fn = bc.dirichlet_fn(*key)
        x = edge_points(mesh, edges, qr.points)
        g = _values(fn, x.reshape(-1, 2), 2).reshape(len(edges), -1, 2)
        normals, _ = outward_normals(mesh, edges)
        inflow += float(np.einsum("e,q,eqc,ec->", mesh.edge_lengths[edges], qr.weights, g, normals))
    source = float(p1_load(mesh, bc.source_div).sum()) if bc.source_div is not None else 0.0
    if abs(source - inflow) > 1e-8 * max(1.0, abs(source), abs(inflow)):
        raise IncompatibleData(f"int f_c = {source:.3e} but boundary flux = {inflow:.3e}")


def outward_normals(mesh: TriMesh, edges, side=None):
    """Unit outward normals of the triangle on ``side`` (default: the existing one)."""
    et = mesh.edge_tris[edges]
    if side is None:
        plus = et[:, 0] >= 0
    else:
        plus = np.full(len(edges), side == "Plus") if isinstance(side, str) else np.asarray(side)
    d = mesh.vertices[mesh.edges[edges, 1]] - mesh.vertices[mesh.edges[edges, 0]]
    d = d / np.hypot(d[:, 0], d[:, 1])[:, None]
    right = np.column_stack([d[:, 1], -d[:, 0]])
    normals = np.where(plus[:, None], right, -right)
    tris = np.where(plus, et[:, 0], et[:, 1])
    return normals, tris


# ---------------------------------------------------------------- tractions

def boundary_tractions(field: DiscreteField, edges, plus_side, qr: QuadRule | None = None):
    """Normal flux / traction on many edges at once.

    ``plus_side`` is a boolean per edge selecting the Plus triangle.  Returns
    ``(points, normals, values)`` with shapes (e, q, 2), (e, 2), (e, q, comps).
    """
    qr = qr or quad_rule("Edge", 5)
    mesh = field.mesh
    edges = np.asarray(edges, dtype=np.int64)
    plus_side = np.asarray(plus_side, dtype=bool)
    normals, tris = outward_normals(mesh, edges, plus_side)
    if np.any(tris < 0):
        raise MissingSide(f"edge {edges[tris < 0][0]} has no triangle on the requested side")
    pts = edge_points(mesh, edges, qr.points)
    loc = locator(mesh)
    bary = loc.barycentric(np.repeat(tris, len(qr.points)), pts.reshape(-1, 2)).reshape(len(edges), -1, 3)
    grads = field.gradients_at(tris, bary)  # (e, q, c, 2)
    prob = field.problem
    if prob.variant == "poisson":
        vals = np.einsum("eqcd,ed->eqc", grads, normals)
    else:
        eps = 0.5 * (grads + np.swapaxes(grads, -1, -2))
        sigma = 2.0 * prob.mu * eps
        if prob.variant == "elasticity":
            div = grads[..., 0, 0] + grads[..., 1, 1]
            sigma = sigma + prob.lam * div[..., None, None] * np.eye(2)
        vals = np.einsum("eqcd,ed->eqc", sigma, normals)
        if prob.variant == "stokes":
            p = field.pressure_at(tris, bary)
            vals = vals - p[..., None] * normals[:, None, :]
    return pts, normals, vals


def boundary_traction(field: DiscreteField, edge: int, side: str, problem: ProblemKind | None = None,
                      qp: QuadRule | None = None) -> np.ndarray:
    """Flux (Poisson) or traction samples at the quadrature points of one edge."""
    if side not in ("Plus", "Minus"):
        raise ValueError("side must be 'Plus' or 'Minus'")
    _, _, vals = boundary_tractions(field, [edge], [side == "Plus"], qp)
    return vals[0, :, 0] if field.components == 1 else vals[0]


# ---------------------------------------------------------------- error norms

def _component_lookup(approx: CompositeField, mesh: TriMesh):
    """Map each triangle of ``mesh`` to (component, local triangle) when all share a master."""
    root = mesh.root
    parts = [(0, approx.base)] + list(approx.extensions.items())
    if any(f.mesh.root is not root or f.mesh.parent_tri is None for _, f in parts) or mesh.parent_tri is None:
        return None
    owner = np.zeros(mesh.n_triangles, dtype=np.int64)
    pos = mesh.tri_tags.get("pos")
    if pos is not None:
        for k in approx.extensions:
            owner[pos == k] = k
    local = -np.ones(mesh.n_triangles, dtype=np.int64)
    for k, f in parts:
        inv = -np.ones(root.n_triangles, dtype=np.int64)
        inv[f.mesh.parent_tri] = np.arange(f.mesh.n_triangles)
        sel = owner == k
        local[sel] = inv[mesh.parent_tri[sel]]
    if np.any(local < 0):
        return None
    return owner, local


def energy_error_terms(exact: DiscreteField, approx: CompositeField, order: int = 4):
    """Squared strain/gradient term and squared pressure L2 term of exact - approx."""
    mesh = exact.mesh
    qr = quad_rule("Triangle", order)
    all_t = np.arange(mesh.n_triangles)
    ge = exact.gradients_at(all_t, qr.points)
    pe = exact.pressure_at(all_t, qr.points)
    ga = np.zeros_like(ge)
    pa = None if pe is None else np.zeros_like(pe)
    lookup = _component_lookup(approx, mesh)
    if lookup is not None:
        owner, local = lookup
        for k in np.unique(owner):
            sel = owner == k
            f = approx.field(int(k))
            ga[sel] = f.gradients_at(local[sel], qr.points)
            if pa is not None:
                pa[sel] = f.pressure_at(local[sel], qr.points)
    else:
        xq = np.einsum("qi,tic->tqc", qr.points, mesh.vertices[mesh.triangles]).reshape(-1, 2)
        owner = approx.component_for_points(xq)
        flat_g = ga.reshape(-1, *ge.shape[2:])
        flat_p = None if pa is None else pa.reshape(-1)
        for k in np.unique(owner):
            sel = np.flatnonzero(owner == k)
            f = approx.field(int(k))
            tri, bary = locator(f.mesh).locate(xq[sel])
            flat_g[sel] = f.gradients_at(tri, bary[:, None, :])[:, 0]
            if flat_p is not None:
                flat_p[sel] = f.pressure_at(tri, bary[:, None, :])[:, 0]
    jw = 2.0 * mesh.areas[:, None] * qr.weights[None, :]
    de = ge - ga
    prob = exact.problem
    if prob.variant == "poisson":
        strain = np.einsum("tq,tqcd,tqcd->", jw, de, de)
    else:
        eps = 0.5 * (de + np.swapaxes(de, -1, -2))
        dens = 2.0 * prob.mu * np.einsum("tqcd,tqcd->tq", eps, eps)
        if prob.variant == "elasticity":
            dens = dens + prob.lam * (eps[..., 0, 0] + eps[..., 1, 1]) ** 2
        strain = float(np.sum(jw * dens))
    pressure = 0.0 if pe is None else float(np.sum(jw * (pe - pa) ** 2))
    return float(strain), pressure


def energy_norm_error(exact: DiscreteField, approx, problem: ProblemKind | None = None) -> float:
    """Energy norm of exact - approx over the exact mesh.

    For Stokes this is the strain term plus mu^{-1/2} times the pressure L2
    norm; see ``energy_error_split`` for the two parts.
    """
    if isinstance(approx, DiscreteField):
        approx = CompositeField(approx, {}, None)
    strain, pressure = energy_error_terms(exact, approx)
    if exact.problem.variant == "stokes":
        return float(np.sqrt(strain) + exact.problem.mu ** -0.5 * np.sqrt(pressure))
    return float(np.sqrt(strain))


def energy_error_split(exact: DiscreteField, approx) -> tuple[float, float]:
    if isinstance(approx, DiscreteField):
        approx = CompositeField(approx, {}, None)
    strain, pressure = energy_error_terms(exact, approx)
    return float(np.sqrt(strain)), float(exact.problem.mu ** -0.5 * np.sqrt(pressure))


def interpolate(mesh: TriMesh, problem: ProblemKind, fn: Fn, pressure: Fn | None = None) -> DiscreteField:
    """Nodal P2 (and P1 pressure) interpolant of closed-form functions."""
    nodes = p2_nodes(mesh)
    v = _values(fn, nodes, problem.components)
    coeffs = v.T.ravel() if problem.components == 2 else v
    if problem.variant == "stokes":
        p = np.zeros(mesh.n_vertices) if pressure is None else _values(pressure, mesh.vertices, 1)
        coeffs = np.concatenate([coeffs, p])
    space = {"poisson": "ScalarP2", "elasticity": "VectorP2", "stokes": "TaylorHood"}[problem.variant]
    return DiscreteField(space, np.asarray(coeffs, dtype=float), mesh, problem)

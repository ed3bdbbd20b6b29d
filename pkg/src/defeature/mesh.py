"""Triangle meshes with labeled edges, quadrature rules and VTK export.

Meshing is delegated to Shewchuk's Triangle (through the ``triangle``
package).  A model is meshed once as a whole, with every feature boundary as
a constrained segment; the meshes of the exact domain, of the defeatured
domain and of each extension are then cut out of that master triangulation.
Sub-meshes therefore coincide wherever their domains overlap.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Callable

import numpy as np
import shapely
import triangle as _triangle
from numpy.polynomial.legendre import leggauss
from shapely.geometry import Polygon
from shapely.ops import unary_union

from .errors import NonconvergentRefinement, SmallAngleInput, UnknownLabel, UnsupportedOrder
from .geometry import BoundaryLabel, GeometryModel, Status

MAX_TRIANGLES = 3_000_000
LABELS = tuple(BoundaryLabel)
LABEL_CODES = {lab: i for i, lab in enumerate(LABELS)}
SMALL_INPUT_ANGLE_DEG = 0.5


# ---------------------------------------------------------------- quadrature

@dataclasses.dataclass(frozen=True, eq=False)
class QuadRule:
    """Points are barycentric (Triangle, shape (q, 3)) or parametric in [0, 1] (Edge, shape (q,))."""

    kind: str
    points: np.ndarray
    weights: np.ndarray
    order: int


_DUNAVANT = {
    2: ([(1 / 6, 1 / 6)], [], [1 / 3]),
    4: (
        [(0.445948490915965, 0.445948490915965), (0.091576213509771, 0.091576213509771)],
        [],
        [0.223381589678011, 0.109951743655322],
    ),
    5: (
        [(0.470142064105115, 0.470142064105115), (0.101286507323456, 0.101286507323456)],
        [0.225],
        [0.132394152788506, 0.125939180544827],
    ),
}


def _symmetric_rule(order):
    orbits, centroid_w, orbit_w = _DUNAVANT[order]
    pts, wts = [], []
    if centroid_w:
        pts.append((1 / 3, 1 / 3, 1 / 3))
        wts.append(centroid_w[0])
    for (a, _), w in zip(orbits, orbit_w):
        b = 1.0 - 2.0 * a
        for p in ((a, a, b), (a, b, a), (b, a, a)):
            pts.append(p)
            wts.append(w)
    w = np.asarray(wts)
    return np.asarray(pts), 0.5 * w / w.sum()


def _collapsed_rule(order):
    n = (order + 2) // 2 + 1
    x, w = leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    xi = u.ravel()
    eta = (v * (1.0 - u)).ravel()
    weights = (wu * wv * (1.0 - u)).ravel()
    return np.column_stack([1.0 - xi - eta, xi, eta]), weights


def quad_rule(kind: str, order: int) -> QuadRule:
    """Quadrature exact up to polynomial degree ``order`` on the reference element.

    Reference triangle is (0,0), (1,0), (0,1) with measure 1/2; the reference
    edge is [0, 1].
    """
    if not 1 <= order <= 10:
        raise UnsupportedOrder(f"order {order} outside [1, 10]")
    kind = kind.capitalize()
    if kind == "Edge":
        x, w = leggauss(int(math.ceil((order + 1) / 2)))
        return QuadRule("Edge", 0.5 * (x + 1.0), 0.5 * w, order)
    if kind != "Triangle":
        raise UnsupportedOrder(f"unknown element kind {kind!r}")
    if order == 1:
        return QuadRule("Triangle", np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([0.5]), 1)
    if order in _DUNAVANT:
        p, w = _symmetric_rule(order)
    elif order == 3:
        p, w = _symmetric_rule(4)
    else:
        p, w = _collapsed_rule(order)
    return QuadRule("Triangle", p, w, order)


# ---------------------------------------------------------------- meshes

@dataclasses.dataclass(eq=False)
class TriMesh:
    """Conforming triangle mesh.

    ``edges`` are sorted vertex pairs; ``edge_label`` holds indices into
    ``LABELS`` (-1 for unlabeled edges).  ``edge_tris[e] = (plus, minus)`` where
    ``plus`` is the triangle that traverses the edge from its lower to its
    higher vertex counterclockwise (the triangle on the left), ``minus`` the
    other one; ``-1`` marks a missing side.  ``tri_edges[t, i]`` is the edge
    from local vertex ``i`` to ``i + 1``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    edge_tris: np.ndarray
    edge_piece: np.ndarray
    h_max: float
    edge_label: np.ndarray | None = None
    edge_feature: np.ndarray | None = None
    edge_arc: np.ndarray | None = None
    arcs: tuple = ()
    tri_tags: dict = dataclasses.field(default_factory=dict)
    parent: "TriMesh | None" = None
    parent_tri: np.ndarray | None = None
    parent_vertex: np.ndarray | None = None
    role: str = "plain"
    _cache: dict = dataclasses.field(default_factory=dict, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def root(self) -> "TriMesh":
        return self if self.parent is None else self.parent

    @property
    def areas(self) -> np.ndarray:
        if "areas" not in self._cache:
            p = self.vertices[self.triangles]
            d1 = p[:, 1] - p[:, 0]
            d2 = p[:, 2] - p[:, 0]
            self._cache["areas"] = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        return self._cache["areas"]

    @property
    def edge_lengths(self) -> np.ndarray:
        if "edge_lengths" not in self._cache:
            d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
            self._cache["edge_lengths"] = np.hypot(d[:, 0], d[:, 1])
        return self._cache["edge_lengths"]

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero((self.edge_tris[:, 0] < 0) | (self.edge_tris[:, 1] < 0))

    def min_angle_deg(self) -> float:
        p = self.vertices[self.triangles]
        angles = []
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            c = np.sum(a * b, axis=1) / (np.hypot(*a.T) * np.hypot(*b.T))
            angles.append(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))
        return float(np.min(angles))


def _topology(vertices, triangles):
    nt = len(triangles)
    local = np.array([[0, 1], [1, 2], [2, 0]])
    pairs = triangles[:, local].reshape(-1, 2)
    lo = pairs.min(axis=1)
    hi = pairs.max(axis=1)
    keys = lo.astype(np.int64) * len(vertices) + hi
    uniq, inv = np.unique(keys, return_inverse=True)
    edges = np.column_stack([uniq // len(vertices), uniq % len(vertices)]).astype(np.int64)
    tri_edges = inv.reshape(nt, 3)
    edge_tris = -np.ones((len(edges), 2), dtype=np.int64)
    forward = (pairs[:, 0] < pairs[:, 1]).reshape(nt, 3)
    tids = np.repeat(np.arange(nt), 3).reshape(nt, 3)
    edge_tris[tri_edges[forward], 0] = tids[forward]
    edge_tris[tri_edges[~forward], 1] = tids[~forward]
    return edges, tri_edges, edge_tris


def _morton_order(points: np.ndarray) -> np.ndarray:
    lo = points.min(axis=0)
    span = np.maximum(points.max(axis=0) - lo, 1e-300)
    q = ((points - lo) / span * 65535).astype(np.uint64)

    def spread(v):
        v = (v | (v << np.uint64(8))) & np.uint64(0x00FF00FF)
        v = (v | (v << np.uint64(4))) & np.uint64(0x0F0F0F0F)
        v = (v | (v << np.uint64(2))) & np.uint64(0x33333333)
        v = (v | (v << np.uint64(1))) & np.uint64(0x55555555)
        return v

    key = spread(q[:, 0]) | (spread(q[:, 1]) << np.uint64(1))
    return np.argsort(key, kind="stable")


def _check_input_angles(points, segments):
    incident: dict[int, list[int]] = {}
    for s, (a, b) in enumerate(segments):
        incident.setdefault(int(a), []).append(s)
        incident.setdefault(int(b), []).append(s)
    for v, segs in incident.items():
        if len(segs) < 2:
            continue
        dirs = []
        for s in segs:
            a, b = segments[s]
            w = b if a == v else a
            d = points[w] - points[v]
            dirs.append(math.atan2(d[1], d[0]))
        dirs = np.sort(np.asarray(dirs))
        gaps = np.diff(np.concatenate([dirs, [dirs[0] + 2 * math.pi]]))
        if np.degrees(gaps.min()) < SMALL_INPUT_ANGLE_DEG:
            raise SmallAngleInput(f"input angle {np.degrees(gaps.min()):.3g} deg at {points[v].tolist()}")


def _build_pslg(segments: np.ndarray, markers: np.ndarray, size: Callable, snap: float):
    """Split segments to the local size and merge coincident endpoints."""
    pts = []
    segs = []
    marks = []
    index: dict = {}
    scale = 1.0 / snap

    def vid(p):
        key = (round(p[0] * scale), round(p[1] * scale))
        if key not in index:
            index[key] = len(pts)
            pts.append(p)
        return index[key]

    mids = segments.mean(axis=1)
    target = size(mids)
    for (p0, p1), m, h in zip(segments, markers, target):
        length = float(np.hypot(*(p1 - p0)))
        n = max(1, int(math.ceil(length / h - 1e-9)))
        t = np.linspace(0.0, 1.0, n + 1)
        chain = [vid(p0)] + [vid(p0 + ti * (p1 - p0)) for ti in t[1:-1]] + [vid(p1)]
        for a, b in zip(chain[:-1], chain[1:]):
            if a != b:
                segs.append((a, b))
                marks.append(m)
    return np.asarray(pts, dtype=float), np.asarray(segs, dtype=np.int64), np.asarray(marks, dtype=np.int64)


def _hole_points(outline) -> list:
    holes = []
    for poly in getattr(outline, "geoms", [outline]):
        for ring in poly.interiors:
            hp = Polygon(ring).representative_point()
            holes.append((hp.x, hp.y))
    return holes


def _equilateral_area(h):
    return math.sqrt(3.0) / 4.0 * h * h


def triangulate(
    outline,
    constraints=None,
    h_max: float = 0.1,
    min_angle_deg: float = 22.0,
    size_field: Callable | None = None,
    segment_markers=None,
) -> TriMesh:
    """Constrained quality triangulation of ``outline``.

    ``constraints`` is an (m, 2, 2) array of internal segments.  Markers, when
    given, label the boundary segments of the outline followed by the
    constraints (one integer per input segment, 0 for none).  ``size_field``
    maps (n, 2) points to local target sizes; it is capped by ``h_max``.
    """
    if min_angle_deg > 28:
        raise ValueError("min_angle_deg must be <= 28")
    boundary = []
    for poly in getattr(outline, "geoms", [outline]):
        for ring in [poly.exterior, *poly.interiors]:
            c = np.asarray(ring.coords)
            boundary += [(c[i], c[i + 1]) for i in range(len(c) - 1)]
    segs = np.asarray(boundary, dtype=float).reshape(-1, 2, 2)
    if constraints is not None and len(constraints):
        segs = np.concatenate([segs, np.asarray(constraints, dtype=float).reshape(-1, 2, 2)])
    markers = np.zeros(len(segs), dtype=np.int64) if segment_markers is None else np.asarray(segment_markers)
    return _mesh_segments(segs, markers, _hole_points(outline), h_max, min_angle_deg, size_field)


def _mesh_segments(segs, markers, holes, h_max, min_angle_deg, size_field):
    x0, y0 = segs.reshape(-1, 2).min(axis=0)
    x1, y1 = segs.reshape(-1, 2).max(axis=0)
    diam = math.hypot(x1 - x0, y1 - y0)
    snap = 1e-12 * diam

    def size(p):
        s = np.full(len(p), h_max, dtype=float)
        if size_field is not None:
            s = np.minimum(s, size_field(p))
        return s

    pts, seg_idx, seg_mark = _build_pslg(segs, markers, size, snap)
    _check_input_angles(pts, seg_idx)
    order = _morton_order(pts)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    data = {
        "vertices": pts[order],
        "segments": rank[seg_idx],
        "segment_markers": (seg_mark + 2).reshape(-1, 1),
    }
    if holes:
        data["holes"] = np.asarray(holes, dtype=float)
    q = f"pq{min_angle_deg:g}"
    out = _triangle.triangulate(data, q + f"a{_equilateral_area(h_max):.17g}Q")
    for _ in range(30):
        p = out["vertices"]
        t = out["triangles"]
        if len(t) > MAX_TRIANGLES:
            raise NonconvergentRefinement(f"more than {MAX_TRIANGLES} triangles")
        target = size(p[t].mean(axis=1))
        e = p[t[:, [1, 2, 0]]] - p[t]
        longest = np.max(np.hypot(e[..., 0], e[..., 1]), axis=1)
        bad = longest > target * (1.0 + 1e-9)
        if not bad.any():
            break
        e2 = p[t[:, 1]] - p[t[:, 0]]
        e3 = p[t[:, 2]] - p[t[:, 0]]
        current = 0.5 * np.abs(e2[:, 0] * e3[:, 1] - e2[:, 1] * e3[:, 0])
        limit = np.minimum(0.5 * _equilateral_area(1.0) * target ** 2, 0.6 * current)
        area = np.where(bad, limit, -1.0)
        out = _triangle.triangulate(dict(out, triangle_max_area=area), q + "raQ")
    else:
        raise NonconvergentRefinement("size field not met after 30 refinement passes")

    vertices = np.asarray(out["vertices"], dtype=float)
    triangles = np.asarray(out["triangles"], dtype=np.int64)
    a = vertices[triangles]
    signed = (a[:, 1, 0] - a[:, 0, 0]) * (a[:, 2, 1] - a[:, 0, 1]) - (a[:, 1, 1] - a[:, 0, 1]) * (
        a[:, 2, 0] - a[:, 0, 0]
    )
    flip = signed < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    edges, tri_edges, edge_tris = _topology(vertices, triangles)
    edge_piece = -np.ones(len(edges), dtype=np.int64)
    s = np.asarray(out["segments"], dtype=np.int64)
    m = np.asarray(out["segment_markers"], dtype=np.int64).ravel() - 2
    keys = np.minimum(s[:, 0], s[:, 1]) * len(vertices) + np.maximum(s[:, 0], s[:, 1])
    ekeys = edges[:, 0] * len(vertices) + edges[:, 1]
    pos = np.searchsorted(ekeys, keys)
    edge_piece[pos] = m
    return TriMesh(vertices, triangles, edges, tri_edges, edge_tris, edge_piece, h_max)


# ---------------------------------------------------------------- model meshes

@dataclasses.dataclass(frozen=True)
class Sizing:
    """Target element sizes for meshing a model.

    Near each feature the size is ``min(perimeter / 8, h_max) / near_factor``
    and it grows linearly with the distance to the feature at rate ``grading``.
    """

    h_max: float
    near_factor: float = 1.0
    grading: float = 0.25
    min_angle_deg: float = 22.0

    def field(self, model: GeometryModel) -> Callable:
        centers, radii, near = [], [], []
        for f in model.features:
            reg = f.region
            if f.has_positive:
                reg = unary_union([reg, f.extension])
            x0, y0, x1, y1 = reg.bounds
            centers.append(((x0 + x1) / 2, (y0 + y1) / 2))
            radii.append(0.5 * math.hypot(x1 - x0, y1 - y0))
            near.append(min(reg.boundary.length / 8.0, self.h_max) / self.near_factor)
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        radii = np.asarray(radii)
        near = np.asarray(near)
        h, g = self.h_max, self.grading

        def size(p):
            s = np.full(len(p), h)
            for c, r, n in zip(centers, radii, near):
                d = np.maximum(np.hypot(p[:, 0] - c[0], p[:, 1] - c[1]) - r, 0.0)
                s = np.minimum(s, n + g * d)
            return s

        return size


@dataclasses.dataclass(eq=False)
class ModelMesh:
    """Master triangulation of a model plus region tags for every triangle."""

    model: GeometryModel
    master: TriMesh
    sizing: Sizing

    def submesh(self, model: GeometryModel, role: str, k: int | None = None) -> TriMesh:
        """Cut the mesh of the exact domain, the defeatured domain or extension ``k``."""
        key = (role, k, _status_key(model))
        cache = self.master._cache.setdefault("submeshes", {})
        if key not in cache:
            tags = self.master.tri_tags
            if role == "exact":
                mask = tags["exact"]
            elif role == "defeatured":
                mask = _contains(model.defeatured, self.master)
            elif role == "extension":
                mask = tags["ext"] == k
            else:
                raise ValueError(f"unknown role {role!r}")
            cache[key] = extract(self.master, mask, model, role, k)
        return cache[key]


def _status_key(model):
    return tuple(f.status is Status.INSERTED for f in model.features)


def _contains(region, mesh: TriMesh) -> np.ndarray:
    c = mesh.vertices[mesh.triangles].mean(axis=1)
    return shapely.contains_xy(region, c[:, 0], c[:, 1])


def mesh_model(model: GeometryModel, sizing: Sizing) -> ModelMesh:
    """Triangulate the union of every region of ``model`` with all feature boundaries constrained."""
    hull = model.hull
    pieces = model.pieces
    markers = np.arange(len(pieces), dtype=np.int64)
    master = _mesh_segments(
        pieces, markers, _hole_points(hull), sizing.h_max, sizing.min_angle_deg, sizing.field(model)
    )
    c = master.vertices[master.triangles].mean(axis=1)
    tags = {"exact": shapely.contains_xy(model.exact, c[:, 0], c[:, 1])}
    for name, attr in (("neg", "negative_part"), ("pos", "positive_part"), ("ext", "extension")):
        lab = np.zeros(len(c), dtype=np.int64)
        for f in model.features:
            g = getattr(f, attr)
            if not g.is_empty:
                lab[shapely.contains_xy(g, c[:, 0], c[:, 1])] = f.id
        tags[name] = lab
    master.tri_tags = tags
    master.role = "master"
    return ModelMesh(model, master, sizing)


_ROLE_LABELS = {
    "defeatured": {
        BoundaryLabel.DIRICHLET_OUTER, BoundaryLabel.NEUMANN_OUTER, BoundaryLabel.GAMMA_N,
        BoundaryLabel.GAMMA_0N, BoundaryLabel.GAMMA_0P, BoundaryLabel.GAMMA_P,
    },
    "exact": {
        BoundaryLabel.DIRICHLET_OUTER, BoundaryLabel.NEUMANN_OUTER, BoundaryLabel.GAMMA_N,
        BoundaryLabel.GAMMA_S, BoundaryLabel.GAMMA_R, BoundaryLabel.GAMMA_P,
    },
    "extension": {BoundaryLabel.GAMMA_0P, BoundaryLabel.GAMMA_S, BoundaryLabel.GAMMA_TILDE, BoundaryLabel.GAMMA_R},
}


def _resolve(label, k, role, ext_k, status):
    """Label a piece carries in the given role, or None."""
    if k is not None and status.get(k) is Status.INSERTED:
        if label in (BoundaryLabel.GAMMA_S, BoundaryLabel.GAMMA_R):
            label = BoundaryLabel.GAMMA_P
        elif label is not BoundaryLabel.GAMMA_N:
            return None
        if role == "extension":
            return None
    if label not in _ROLE_LABELS[role]:
        return None
    if role == "extension" and k != ext_k:
        return None
    return label


def extract(master: TriMesh, mask: np.ndarray, model: GeometryModel, role: str, k: int | None = None) -> TriMesh:
    tri_ids = np.flatnonzero(mask)
    tris = master.triangles[tri_ids]
    used = np.unique(tris)
    remap = -np.ones(master.n_vertices, dtype=np.int64)
    remap[used] = np.arange(len(used))
    vertices = master.vertices[used]
    triangles = remap[tris]
    edges, tri_edges, edge_tris = _topology(vertices, triangles)
    # edges of the sub-mesh are a subset of master edges with identical orientation
    gv = used[edges]
    mkeys = master.edges[:, 0] * master.n_vertices + master.edges[:, 1]
    pos = np.searchsorted(mkeys, gv[:, 0] * master.n_vertices + gv[:, 1])
    edge_piece = master.edge_piece[pos]

    status = {f.id: f.status for f in model.features}
    arcs = tuple(a for a in model.arcs if _resolve(a.label, a.feature_id, role, k, status) is a.label)
    arc_of = {}
    for i, a in enumerate(arcs):
        for p in a.pieces:
            arc_of[(p, a.label, a.feature_id)] = i
    edge_label = -np.ones(len(edges), dtype=np.int64)
    edge_feature = np.zeros(len(edges), dtype=np.int64)
    edge_arc = -np.ones(len(edges), dtype=np.int64)
    for e in np.flatnonzero(edge_piece >= 0):
        p = int(edge_piece[e])
        for label, kk in model.piece_labels[p]:
            lab = _resolve(label, kk, role, k, status)
            if lab is not None:
                edge_label[e] = LABEL_CODES[lab]
                edge_feature[e] = kk or 0
                edge_arc[e] = arc_of.get((p, lab, kk), -1)
                break
    sub = TriMesh(
        vertices, triangles, edges, tri_edges, edge_tris, edge_piece, master.h_max,
        edge_label=edge_label, edge_feature=edge_feature, edge_arc=edge_arc, arcs=arcs,
        tri_tags={name: v[tri_ids] for name, v in master.tri_tags.items()},
        parent=master, parent_tri=tri_ids, parent_vertex=used, role=role,
    )
    return sub


def edges_on(mesh: TriMesh, label, k: int | None = None) -> np.ndarray:
    """Indices of mesh edges carrying ``label`` (restricted to feature ``k`` if given)."""
    label = BoundaryLabel.parse(label)
    if mesh.edge_label is None:
        return np.zeros(0, dtype=np.int64)
    sel = mesh.edge_label == LABEL_CODES[label]
    if k is not None:
        sel &= mesh.edge_feature == k
    return np.flatnonzero(sel)


# ---------------------------------------------------------------- export

def write_vtk(path, mesh: TriMesh, point_data: dict | None = None, title: str = "defeature") -> None:
    """Legacy ASCII VTK unstructured grid; fields are sampled at mesh vertices."""
    nv, nt = mesh.n_vertices, mesh.n_triangles
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {nv} double")
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    if point_data:
        lines.append(f"POINT_DATA {nv}")
        for name, values in point_data.items():
            v = np.asarray(values, dtype=float)
            if v.ndim == 1:
                lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                lines += [f"{x:.17g}" for x in v]
            else:
                lines.append(f"VECTORS {name} double")
                lines += [f"{a:.17g} {b:.17g} 0" for a, b in v[:, :2]]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def label_boundary(mesh: TriMesh, labeller: Callable) -> TriMesh:
    """Attach labels to the boundary edges of a plain mesh.

    ``labeller`` maps the (n, 2) midpoints of boundary edges to label names.
    """
    bnd = mesh.boundary_edges
    mid = 0.5 * (mesh.vertices[mesh.edges[bnd, 0]] + mesh.vertices[mesh.edges[bnd, 1]])
    mesh.edge_label = -np.ones(mesh.n_edges, dtype=np.int64)
    mesh.edge_feature = np.zeros(mesh.n_edges, dtype=np.int64)
    mesh.edge_label[bnd] = [LABEL_CODES[BoundaryLabel.parse(s)] for s in labeller(mid)]
    return mesh

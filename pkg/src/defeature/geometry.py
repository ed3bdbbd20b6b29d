"""Exact and defeatured domains, features, boundary-piece classification.

A geometry is described by the fully defeatured outer domain (a polygon whose
sides carry Dirichlet or Neumann tags) plus a list of features.  Each feature
owns a negative part (material removed from the outer domain, i.e. a hole or
notch), a positive part (material added outside of it, i.e. a protrusion) and,
when the positive part is nonempty, an extension polygon that contains it.

All boolean work is delegated to shapely.  Classification of feature
boundaries is done on a globally noded set of segments, so that every piece
is either entirely on or entirely off each parent boundary.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from typing import Iterable, Sequence

import numpy as np
import shapely
from shapely.geometry import LineString, MultiPolygon, Polygon, box
from shapely.ops import unary_union

from .errors import (
    AlreadyInserted,
    BooleanOpFailure,
    ExtensionViolation,
    FeatureOutsideDomain,
    InvalidPolygon,
    UnclassifiableArc,
)

DEFAULT_CIRCLE_SEGMENTS = 64
SNAP_RELATIVE = 1e-9


class BoundaryLabel(str, enum.Enum):
    DIRICHLET_OUTER = "DirichletOuter"
    NEUMANN_OUTER = "NeumannOuter"
    GAMMA_N = "GammaN"
    GAMMA_P = "GammaP"
    GAMMA_0N = "Gamma0N"
    GAMMA_0P = "Gamma0P"
    GAMMA_R = "GammaR"
    GAMMA_S = "GammaS"
    GAMMA_TILDE = "GammaTilde"

    @property
    def is_outer(self) -> bool:
        return self in (BoundaryLabel.DIRICHLET_OUTER, BoundaryLabel.NEUMANN_OUTER)

    @classmethod
    def parse(cls, value) -> "BoundaryLabel":
        from .errors import UnknownLabel

        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            raise UnknownLabel(f"unknown boundary label {value!r}") from None


class Status(str, enum.Enum):
    REMOVED = "Removed"
    INSERTED = "Inserted"


class ExtensionPolicy(str, enum.Enum):
    BOUNDING_BOX = "BoundingBox"
    IDENTITY = "Identity"


@dataclasses.dataclass(frozen=True, eq=False)
class BoundaryArc:
    """Open polyline carrying one boundary label."""

    vertices: np.ndarray
    label: BoundaryLabel
    feature_id: int | None
    length: float
    pieces: tuple[int, ...] = ()

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2:
            raise ValueError("an arc needs at least two vertices")
        if self.label.is_outer and self.feature_id is not None:
            raise ValueError(f"{self.label.value} cannot carry a feature id")
        if not self.label.is_outer and self.feature_id is None:
            raise ValueError(f"{self.label.value} needs a feature id")


def polyline_length(vertices: np.ndarray) -> float:
    v = np.asarray(vertices, dtype=float)
    return float(np.sum(np.hypot(*np.diff(v, axis=0).T)))


def circle_polygon(center, radius, segments: int = DEFAULT_CIRCLE_SEGMENTS) -> Polygon:
    """Inscribed regular polygon approximating a circle."""
    t = 2.0 * np.pi * np.arange(segments) / segments
    cx, cy = center
    return Polygon(np.column_stack([cx + radius * np.cos(t), cy + radius * np.sin(t)]))


def square_polygon(center, side) -> Polygon:
    cx, cy = center
    h = 0.5 * side
    return box(cx - h, cy - h, cx + h, cy + h)


def _as_region(geom) -> Polygon | MultiPolygon:
    if geom is None:
        return Polygon()
    if isinstance(geom, (Polygon, MultiPolygon)):
        return geom
    if isinstance(geom, shapely.geometry.base.BaseGeometry):
        polys = [g for g in getattr(geom, "geoms", [geom]) if isinstance(g, Polygon)]
        return MultiPolygon(polys) if len(polys) > 1 else (polys[0] if polys else Polygon())
    return Polygon(np.asarray(geom, dtype=float))


def _check_polygon(geom, what: str):
    if geom.is_empty:
        return
    if not geom.is_valid:
        raise InvalidPolygon(f"{what}: {shapely.is_valid_reason(geom)}")
    if geom.area <= 0:
        raise InvalidPolygon(f"{what}: nonpositive area")


@dataclasses.dataclass(frozen=True, eq=False)
class Feature:
    id: int
    negative_part: Polygon | MultiPolygon = dataclasses.field(default_factory=Polygon)
    positive_part: Polygon | MultiPolygon = dataclasses.field(default_factory=Polygon)
    extension: Polygon | MultiPolygon = dataclasses.field(default_factory=Polygon)
    status: Status = Status.REMOVED

    def __post_init__(self):
        object.__setattr__(self, "negative_part", _as_region(self.negative_part))
        object.__setattr__(self, "positive_part", _as_region(self.positive_part))
        object.__setattr__(self, "extension", _as_region(self.extension))
        if self.negative_part.is_empty and self.positive_part.is_empty:
            raise InvalidPolygon(f"feature {self.id} has neither a negative nor a positive part")

    @property
    def has_positive(self) -> bool:
        return not self.positive_part.is_empty

    @property
    def has_negative(self) -> bool:
        return not self.negative_part.is_empty

    @property
    def region(self):
        """Closure union of both parts."""
        return unary_union([self.negative_part, self.positive_part])

    @property
    def void(self):
        """G_p: the part of the extension not covered by the positive part."""
        if not self.has_positive:
            return Polygon()
        return self.extension.difference(self.positive_part)


@dataclasses.dataclass(frozen=True, eq=False)
class OuterDomain:
    """Fully defeatured outer polygon with one boundary tag per side.

    ``side_labels[i]`` tags the side from ``exterior[i]`` to ``exterior[i+1]``;
    it is ``"D"`` (Dirichlet) or ``"N"`` (Neumann).  ``holes`` are genuine
    holes of the domain (not features), each with its own side tags.
    """

    exterior: np.ndarray
    side_labels: tuple[str, ...]
    holes: tuple[tuple[np.ndarray, tuple[str, ...]], ...] = ()

    def __post_init__(self):
        ext = np.asarray(self.exterior, dtype=float)
        object.__setattr__(self, "exterior", ext)
        if len(self.side_labels) != len(ext):
            raise InvalidPolygon("one side label is required per exterior side")
        for ring, labels in self.holes:
            if len(labels) != len(ring):
                raise InvalidPolygon("one side label is required per hole side")
        for lab in list(self.side_labels) + [l for _, ls in self.holes for l in ls]:
            if lab not in ("D", "N"):
                raise InvalidPolygon(f"side label must be D or N, got {lab!r}")

    @property
    def polygon(self) -> Polygon:
        return Polygon(self.exterior, [np.asarray(r, dtype=float) for r, _ in self.holes])

    def sides(self) -> list[tuple[np.ndarray, np.ndarray, str]]:
        out = []
        for ring, labels in [(self.exterior, self.side_labels)] + [
            (np.asarray(r, dtype=float), ls) for r, ls in self.holes
        ]:
            n = len(ring)
            for i in range(n):
                out.append((ring[i], ring[(i + 1) % n], labels[i]))
        return out


def unit_square(side_labels=("D", "N", "N", "D")) -> OuterDomain:
    """Unit square; the default tags put Dirichlet data on the bottom and left sides."""
    return OuterDomain(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]), tuple(side_labels))


@dataclasses.dataclass(frozen=True)
class SeparationReport:
    pairwise_ok: bool
    min_gap: float
    overlap_pairs: list


@dataclasses.dataclass(frozen=True, eq=False)
class GeometryModel:
    """Immutable snapshot of the geometric state at one adaptive iteration.

    ``pieces`` holds the globally noded boundary segments, ``piece_labels[j]``
    the list of ``(label, feature_id)`` tags piece ``j`` carries for the
    *static* classification (the one every Removed feature uses).  The arcs
    exposed in ``arcs`` depend on the status of each feature.
    """

    outer: OuterDomain
    exact: Polygon | MultiPolygon
    defeatured: Polygon | MultiPolygon
    omega_star: Polygon | MultiPolygon
    features: tuple[Feature, ...]
    arcs: tuple[BoundaryArc, ...]
    iteration: int
    pieces: np.ndarray
    piece_labels: tuple[tuple[tuple[BoundaryLabel, int | None], ...], ...]
    tol: float

    @property
    def n_removed(self) -> int:
        return sum(f.status is Status.REMOVED for f in self.features)

    def feature(self, k: int) -> Feature:
        for f in self.features:
            if f.id == k:
                return f
        raise KeyError(k)

    @property
    def removed_ids(self) -> list[int]:
        return [f.id for f in self.features if f.status is Status.REMOVED]

    @property
    def hull(self):
        """Union of every region any sub-problem lives on."""
        parts = [self.outer.polygon, self.exact]
        for f in self.features:
            parts += [f.positive_part, f.extension]
        return unary_union([p for p in parts if not p.is_empty])

    def arcs_with(self, label, k: int | None = None) -> list[BoundaryArc]:
        label = BoundaryLabel.parse(label)
        return [a for a in self.arcs if a.label is label and (k is None or a.feature_id == k)]

    def measure(self, label, k: int | None = None) -> float:
        return float(sum(a.length for a in self.arcs_with(label, k)))


def _diameter(geom) -> float:
    x0, y0, x1, y1 = geom.bounds
    return math.hypot(x1 - x0, y1 - y0)


def _boolean(op, *args):
    try:
        out = op(*args)
    except shapely.errors.GEOSException as exc:  # pragma: no cover - GEOS failure path
        raise BooleanOpFailure(str(exc)) from exc
    return _as_region(out)


def _boundary(geom):
    return geom.boundary if not geom.is_empty else LineString()


def _segments_of(lines) -> np.ndarray:
    segs = []
    for g in getattr(lines, "geoms", [lines]):
        if g.is_empty:
            continue
        c = np.asarray(g.coords)
        for i in range(len(c) - 1):
            if np.any(c[i] != c[i + 1]):
                segs.append((c[i], c[i + 1]))
    return np.asarray(segs, dtype=float).reshape(-1, 2, 2)


def _near(points: np.ndarray, geom, tol: float) -> np.ndarray:
    if geom.is_empty:
        return np.zeros(len(points), dtype=bool)
    return shapely.dwithin(shapely.points(points), geom, tol)


def _classify(outer: OuterDomain, features: Sequence[Feature], exact, omega_star, tol):
    """Node all boundaries and tag every piece with its static labels."""
    outer_poly = outer.polygon
    lines = [_boundary(outer_poly)]
    for f in features:
        lines += [_boundary(f.negative_part), _boundary(f.positive_part), _boundary(f.extension)]
    noded = unary_union([l for l in lines if not l.is_empty])
    pieces = _segments_of(noded)
    mids = pieces.mean(axis=1)

    on_outer = _near(mids, _boundary(outer_poly), tol)
    on_star = _near(mids, _boundary(omega_star), tol)
    on_exact = _near(mids, _boundary(exact), tol)
    labels: list[list[tuple[BoundaryLabel, int | None]]] = [[] for _ in range(len(pieces))]
    covered_by_gamma0 = np.zeros(len(pieces), dtype=bool)

    for f in features:
        k = f.id
        on_n = _near(mids, _boundary(f.negative_part), tol)
        on_p = _near(mids, _boundary(f.positive_part), tol)
        on_t = _near(mids, _boundary(f.extension), tol)
        for j in np.flatnonzero(on_n):
            if on_star[j]:
                labels[j].append((BoundaryLabel.GAMMA_N, k))
            else:
                labels[j].append((BoundaryLabel.GAMMA_0N, k))
                covered_by_gamma0[j] = True
        for j in np.flatnonzero(on_p):
            if on_exact[j]:
                labels[j].append((BoundaryLabel.GAMMA_S if on_t[j] else BoundaryLabel.GAMMA_R, k))
            else:
                if not on_t[j]:
                    raise ExtensionViolation(
                        f"feature {k}: interface with the defeatured domain is not on the extension boundary"
                    )
                labels[j].append((BoundaryLabel.GAMMA_0P, k))
                covered_by_gamma0[j] = True
        for j in np.flatnonzero(on_t & ~on_p):
            labels[j].append((BoundaryLabel.GAMMA_TILDE, k))

    sides = outer.sides()
    side_lines = [LineString([a, b]) for a, b, _ in sides]
    for j in np.flatnonzero(on_outer & ~covered_by_gamma0):
        d = [line.distance(shapely.Point(mids[j])) for line in side_lines]
        tag = sides[int(np.argmin(d))][2]
        labels[j].append(
            (BoundaryLabel.DIRICHLET_OUTER if tag == "D" else BoundaryLabel.NEUMANN_OUTER, None)
        )
    for j, labs in enumerate(labels):
        if not labs:
            raise UnclassifiableArc(f"boundary piece {pieces[j].tolist()} lies on no parent boundary")
    return pieces, tuple(tuple(l) for l in labels)


def _chain(pieces: np.ndarray, ids: Sequence[int]) -> list[list[int]]:
    """Group piece ids into maximal connected, consistently ordered chains."""
    key = lambda p: (round(p[0], 12), round(p[1], 12))
    remaining = list(ids)
    by_point: dict = {}
    for j in remaining:
        for e in (0, 1):
            by_point.setdefault(key(pieces[j, e]), []).append(j)
    used = set()
    chains = []
    for start in remaining:
        if start in used:
            continue
        used.add(start)
        chain = [(start, False)]
        # extend forward from the end of the chain, then backward from its start
        for forward in (True, False):
            while True:
                j, flipped = chain[-1] if forward else chain[0]
                end = pieces[j, 1 - int(flipped)] if forward else pieces[j, int(flipped)]
                nxt = [m for m in by_point.get(key(end), []) if m not in used]
                if len(by_point.get(key(end), [])) != 2 or not nxt:
                    break
                m = nxt[0]
                used.add(m)
                if forward:
                    flip = key(pieces[m, 0]) != key(end)
                    chain.append((m, flip))
                else:
                    flip = key(pieces[m, 1]) != key(end)
                    chain.insert(0, (m, flip))
        chains.append(chain)
    return chains


def _arcs_from(pieces, selection: dict) -> list[BoundaryArc]:
    arcs = []
    for (label, k), ids in sorted(selection.items(), key=lambda t: (t[0][1] or 0, t[0][0].value)):
        for chain in _chain(pieces, ids):
            pts = [pieces[j, 1] if f else pieces[j, 0] for j, f in chain]
            j, f = chain[-1]
            pts.append(pieces[j, 0] if f else pieces[j, 1])
            v = np.asarray(pts)
            arcs.append(
                BoundaryArc(v, label, k, float(np.sum(np.hypot(*np.diff(v, axis=0).T))),
                            tuple(j for j, _ in chain))
            )
    return arcs


def _derive_arcs(pieces, piece_labels, features) -> tuple[BoundaryArc, ...]:
    status = {f.id: f.status for f in features}
    selection: dict = {}
    for j, labs in enumerate(piece_labels):
        for label, k in labs:
            if k is not None and status[k] is Status.INSERTED:
                if label is BoundaryLabel.GAMMA_N:
                    pass
                elif label in (BoundaryLabel.GAMMA_S, BoundaryLabel.GAMMA_R):
                    label = BoundaryLabel.GAMMA_P
                else:
                    continue
            selection.setdefault((label, k), []).append(j)
    return tuple(_arcs_from(pieces, selection))


def _defeatured_domain(outer_poly, features) -> Polygon | MultiPolygon:
    inserted = [f for f in features if f.status is Status.INSERTED]
    neg = [f.negative_part for f in inserted if f.has_negative]
    pos = [f.positive_part for f in inserted if f.has_positive]
    dom = outer_poly
    if neg:
        dom = _boolean(shapely.difference, dom, unary_union(neg))
    if pos:
        dom = _boolean(shapely.union, dom, unary_union(pos))
    return _as_region(dom)


def build_model(outer: OuterDomain, features: Iterable[Feature]) -> GeometryModel:
    """Construct the model with every feature Removed.

    ``outer`` is the fully defeatured domain; the exact domain is obtained by
    cutting the negative parts out of it and gluing the positive parts on.
    """
    features = tuple(sorted(features, key=lambda f: f.id))
    if len({f.id for f in features}) != len(features):
        raise InvalidPolygon("feature ids must be unique")
    outer_poly = outer.polygon
    _check_polygon(outer_poly, "outer domain")
    tol = SNAP_RELATIVE * _diameter(outer_poly)
    atol = tol * _diameter(outer_poly)
    for f in features:
        _check_polygon(f.negative_part, f"feature {f.id} negative part")
        _check_polygon(f.positive_part, f"feature {f.id} positive part")
        _check_polygon(f.extension, f"feature {f.id} extension")
        if f.has_negative and f.negative_part.difference(outer_poly).area > atol:
            raise FeatureOutsideDomain(f"feature {f.id}: negative part leaves the domain")
        if f.has_positive:
            if f.positive_part.intersection(outer_poly).area > atol:
                raise FeatureOutsideDomain(f"feature {f.id}: positive part overlaps the defeatured domain")
            if f.positive_part.distance(outer_poly) > tol:
                raise FeatureOutsideDomain(f"feature {f.id}: positive part is detached from the domain")
            if f.extension.is_empty:
                raise ExtensionViolation(f"feature {f.id}: positive part without extension")
            if f.positive_part.difference(f.extension).area > atol:
                raise ExtensionViolation(f"feature {f.id}: extension does not contain the positive part")
        if f.has_negative and f.has_positive:
            if f.negative_part.intersection(f.positive_part).area > atol:
                raise InvalidPolygon(f"feature {f.id}: negative and positive parts overlap")
        if f.status is not Status.REMOVED:
            raise AlreadyInserted(f"feature {f.id} must start Removed")

    neg = [f.negative_part for f in features if f.has_negative]
    pos = [f.positive_part for f in features if f.has_positive]
    omega_star = _boolean(shapely.difference, outer_poly, unary_union(neg)) if neg else outer_poly
    exact = _boolean(shapely.union, omega_star, unary_union(pos)) if pos else omega_star
    if exact.area <= 0 or omega_star.area <= 0:
        raise BooleanOpFailure("degenerate domain after boolean operations")
    for f in features:
        if f.has_positive and f.extension.intersection(omega_star).area > atol:
            raise ExtensionViolation(f"feature {f.id}: extension overlaps the untouched domain")
    pieces, piece_labels = _classify(outer, features, exact, omega_star, tol)
    return GeometryModel(
        outer=outer,
        exact=_as_region(exact),
        defeatured=outer_poly,
        omega_star=_as_region(omega_star),
        features=features,
        arcs=_derive_arcs(pieces, piece_labels, features),
        iteration=0,
        pieces=pieces,
        piece_labels=piece_labels,
        tol=tol,
    )


def classify_boundaries(model: GeometryModel, k: int) -> list[BoundaryArc]:
    """Static classification of feature ``k`` (as if it were Removed)."""
    f = model.feature(k)
    if f.status is not Status.REMOVED:
        raise AlreadyInserted(f"feature {k} is inserted")
    selection: dict = {}
    for j, labs in enumerate(model.piece_labels):
        for label, kk in labs:
            if kk == k:
                selection.setdefault((label, k), []).append(j)
    return _arcs_from(model.pieces, selection)


def make_extension(feature: Feature, policy=ExtensionPolicy.BOUNDING_BOX, domain=None) -> Feature:
    """Attach an extension polygon to a feature's positive part.

    With ``domain`` given (the defeatured outer polygon), the interface between
    the positive part and the domain is computed; if that interface is a single
    straight line the bounding box is clipped to the half-plane on the
    protrusion's side so that the interface stays on the extension boundary.
    """
    from .errors import EmptyPositivePart

    policy = ExtensionPolicy(policy)
    if not feature.has_positive:
        raise EmptyPositivePart(f"feature {feature.id} has no positive part")
    fp = feature.positive_part
    if policy is ExtensionPolicy.IDENTITY:
        ext = fp
    else:
        ext = box(*fp.bounds)
        if domain is not None:
            ext = _clip_to_interface(ext, fp, domain)
    out = dataclasses.replace(feature, extension=ext)
    if domain is not None:
        tol = SNAP_RELATIVE * _diameter(domain)
        iface = _boundary(fp).intersection(_boundary(domain))
        segs = _segments_of(_line_parts(iface))
        if len(segs) and not np.all(_near(segs.mean(axis=1), _boundary(ext), tol)):
            raise ExtensionViolation(f"feature {feature.id}: interface not on the extension boundary")
    return out


def _line_parts(geom):
    parts = [g for g in getattr(geom, "geoms", [geom]) if isinstance(g, LineString) and not g.is_empty]
    return shapely.MultiLineString(parts) if parts else LineString()


def _clip_to_interface(ext, fp, domain):
    iface = _segments_of(_line_parts(_boundary(fp).intersection(_boundary(domain))))
    if not len(iface):
        return ext
    p0 = iface[0, 0]
    d = iface[0, 1] - iface[0, 0]
    normal = np.array([-d[1], d[0]]) / np.hypot(*d)
    if np.any(np.abs((iface.reshape(-1, 2) - p0) @ normal) > 1e-12 * _diameter(ext)):
        return ext
    c = np.asarray(fp.representative_point().coords[0])
    if (c - p0) @ normal < 0:
        normal = -normal
    big = 4.0 * _diameter(ext) + 4.0 * float(np.max(np.abs(p0)))
    t = d / np.hypot(*d)
    half = Polygon([p0 - big * t, p0 + big * t, p0 + big * t + big * normal, p0 - big * t + big * normal])
    return _as_region(ext.intersection(half))


def validate_separation(model: GeometryModel) -> SeparationReport:
    """Check pairwise feature separation and extension admissibility.

    A pair ``(k, 0)`` in ``overlap_pairs`` flags an extension that overlaps
    the part of the domain left untouched by defeaturing.
    """
    feats = model.features
    pairs = []
    min_gap = math.inf
    tol = model.tol
    atol = tol * _diameter(model.outer.polygon)
    for i, a in enumerate(feats):
        for b in feats[i + 1:]:
            gap = a.region.distance(b.region)
            min_gap = min(min_gap, gap)
            ext_overlap = (
                a.has_positive and b.has_positive and a.extension.intersection(b.extension).area > atol
            )
            if gap <= tol or ext_overlap:
                pairs.append((a.id, b.id))
    for f in feats:
        if f.has_positive and f.extension.intersection(model.omega_star).area > atol:
            pairs.append((f.id, 0))
    return SeparationReport(pairwise_ok=not pairs, min_gap=min_gap, overlap_pairs=pairs)


def insert_features(model: GeometryModel, marked: Iterable[int]) -> GeometryModel:
    """Return the next model with the marked features put back into the geometry."""
    marked = set(marked)
    ids = {f.id for f in model.features}
    unknown = marked - ids
    if unknown:
        raise KeyError(f"unknown feature ids {sorted(unknown)}")
    for f in model.features:
        if f.id in marked and f.status is not Status.REMOVED:
            raise AlreadyInserted(f"feature {f.id} is already inserted")
    if not marked:
        return dataclasses.replace(model, iteration=model.iteration + 1)
    features = tuple(
        dataclasses.replace(f, status=Status.INSERTED) if f.id in marked else f for f in model.features
    )
    return dataclasses.replace(
        model,
        features=features,
        defeatured=_defeatured_domain(model.outer.polygon, features),
        omega_star=_omega_star(model.exact, features),
        arcs=_derive_arcs(model.pieces, model.piece_labels, features),
        iteration=model.iteration + 1,
    )


def _omega_star(exact, features):
    pos = [f.positive_part for f in features if f.status is Status.REMOVED and f.has_positive]
    return _as_region(_boolean(shapely.difference, exact, unary_union(pos))) if pos else exact


def shoelace_area(ring) -> float:
    """Signed area of a closed ring given as an (n, 2) vertex array."""
    v = np.asarray(ring, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

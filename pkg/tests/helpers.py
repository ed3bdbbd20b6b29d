"""Shared builders for the test-suite."""
import numpy as np
import shapely

from defeature.fem import BoundaryData
from defeature.geometry import ExtensionPolicy, Feature, build_model, make_extension, unit_square
from defeature.mesh import label_boundary, triangulate


def square_mesh(h, dirichlet=("left", "bottom"), min_angle=25):
    """Unit square mesh; sides listed in ``dirichlet`` are Dirichlet, the rest Neumann."""
    def labeller(mid):
        side = np.where(mid[:, 0] < 1e-12, "left", np.where(mid[:, 0] > 1 - 1e-12, "right",
                        np.where(mid[:, 1] < 1e-12, "bottom", "top")))
        return np.where(np.isin(side, dirichlet), "DirichletOuter", "NeumannOuter")
    return label_boundary(triangulate(shapely.box(0, 0, 1, 1), h_max=h, min_angle_deg=min_angle), labeller)


def square_normals(x):
    n = np.zeros_like(x)
    n[np.abs(x[:, 0] - 1) < 1e-9, 0] = 1
    n[np.abs(x[:, 0]) < 1e-9, 0] = -1
    n[np.abs(x[:, 1] - 1) < 1e-9, 1] = 1
    n[np.abs(x[:, 1]) < 1e-9, 1] = -1
    return n


def stress(problem, grad, p=None, x=None):
    """Flux or Cauchy stress from a gradient array (n, c, 2)."""
    if problem.variant == "poisson":
        return grad[:, 0, :]
    eps = 0.5 * (grad + grad.transpose(0, 2, 1))
    s = 2 * problem.mu * eps
    if problem.variant == "elasticity":
        s = s + problem.lam * np.trace(grad, axis1=1, axis2=2)[:, None, None] * np.eye(2)
    if p is not None:
        s = s - p(x)[:, None, None] * np.eye(2)
    return s


def manufactured_bc(problem, u, grad, f, p=None):
    def g(x):
        n = square_normals(x)
        s = stress(problem, grad(x), p, x)
        if problem.variant == "poisson":
            return np.einsum("nd,nd->n", s, n)
        return np.einsum("ncd,nd->nc", s, n)
    return BoundaryData({"DirichletOuter": u}, {"NeumannOuter": g}, f)


def delta_model(delta):
    """Unit square with a protrusion on the top side and a notch next to it."""
    outer = unit_square(("D", "N", "N", "N"))
    fp = shapely.box(0.4 - delta / 2, 1.0, 0.5 - delta / 2, 1.1)
    fn = shapely.box(0.5 + delta / 2, 0.9, 0.6 + delta / 2, 1.0)
    if delta > 0:
        f1 = make_extension(Feature(1, positive_part=fp), ExtensionPolicy.IDENTITY, outer.polygon)
        feats = [f1, Feature(2, fn)]
    else:
        feats = [make_extension(Feature(1, fn, fp), ExtensionPolicy.IDENTITY, outer.polygon)]
    return build_model(outer, feats)


# ---------------------------------------------------------------- flux-compatible data

def outward_normal(poly, pts):
    """Outward unit normal of ``poly`` at boundary points (nearest segment)."""
    ring = shapely.geometry.polygon.orient(poly, 1.0).exterior
    c = np.asarray(ring.coords)
    a, b = c[:-1], c[1:]
    d = b - a
    t = np.clip(np.einsum("psd,sd->ps", pts[:, None, :] - a[None], d) / np.einsum("sd,sd->s", d, d), 0, 1)
    dist = np.linalg.norm(pts[:, None, :] - (a[None] + t[..., None] * d[None]), axis=2)
    s = np.argmin(dist, axis=1)
    n = np.column_stack([d[s, 1], -d[s, 0]])
    return n / np.linalg.norm(n, axis=1)[:, None]


def arc_mean(arcs, fn):
    """Exact mean of a polynomial of degree <= 5 over polyline arcs."""
    x, w = np.polynomial.legendre.leggauss(4)
    x, w = 0.5 * (x + 1), 0.5 * w
    total = length = 0.0
    for arc in arcs:
        v = arc.vertices
        for p, q in zip(v[:-1], v[1:]):
            seg = np.hypot(*(q - p))
            total += seg * np.dot(w, fn(p + x[:, None] * (q - p)))
            length += seg
    return total / length


class CompatibleData:
    """Poisson data satisfying the three flux balance equalities exactly.

    The defeatured solution is the quadratic ``u`` and each extension solution
    is ``u + w_k`` with ``w_k`` harmonic, zero on the interface and with a
    zero-mean normal derivative there.  Feature boundaries carry the exact
    flux plus a zero-mean perturbation.
    """

    def __init__(self, model, coeffs, perturb):
        from defeature.geometry import BoundaryLabel as L
        self.model = model
        a, b, c, d, e = coeffs
        self.u = lambda x: a * x[:, 0] ** 2 + b * x[:, 0] * x[:, 1] + c * x[:, 1] ** 2 + d * x[:, 0] + e * x[:, 1]
        self.grad_u = lambda x: np.column_stack([2 * a * x[:, 0] + b * x[:, 1] + d, b * x[:, 0] + 2 * c * x[:, 1] + e])
        f_value = -(2 * a + 2 * c)
        self.f = lambda x: np.full(len(x), f_value)
        neumann = {}
        for feat in model.features:
            k = feat.id
            psi = lambda x, s=perturb * (1 + k): s * (x[:, 0] ** 2 + 2 * x[:, 0] * x[:, 1] - x[:, 1])
            if feat.has_negative:
                hole = feat.negative_part
                shift = arc_mean(model.arcs_with(L.GAMMA_N, k), psi)
                neumann[(L.GAMMA_N, k)] = self._flux(self.grad_u, hole, -1.0, psi, shift)
            if feat.has_positive:
                fp, ext = feat.positive_part, feat.extension
                iface = model.arcs_with(L.GAMMA_0P, k)[0].vertices
                p0, p1 = iface[0], iface[-1]
                tangent = (p1 - p0) / np.hypot(*(p1 - p0))
                normal = np.array([-tangent[1], tangent[0]])
                mid = 0.5 * (p0 + p1)
                amp = perturb * (2 + k)
                # w = amp * s * t with s along the interface from its midpoint and t across it
                grad_w = lambda x, m=mid, tg=tangent, nm=normal, A=amp: A * (
                    ((x - m) @ nm)[:, None] * tg + ((x - m) @ tg)[:, None] * nm)
                grad_k = lambda x, gw=grad_w: self.grad_u(x) + gw(x)
                shift = arc_mean(model.arcs_with(L.GAMMA_R, k), psi) if model.arcs_with(L.GAMMA_R, k) else 0.0
                neumann[(L.GAMMA_R, k)] = self._flux(grad_k, fp, 1.0, psi, shift)
                neumann[(L.GAMMA_S, k)] = self._flux(grad_k, fp, 1.0)
                neumann[(L.GAMMA_P, k)] = self._flux(grad_k, fp, 1.0)
                neumann[(L.GAMMA_TILDE, k)] = self._flux(grad_k, ext, 1.0)
                neumann[(L.GAMMA_0P, k)] = self._flux(self.grad_u, fp, -1.0)
        neumann[L.NEUMANN_OUTER] = lambda x: np.einsum("nd,nd->n", self.grad_u(x), square_normals(x))
        neumann[L.GAMMA_0N] = neumann[L.NEUMANN_OUTER]
        self.bc = BoundaryData({L.DIRICHLET_OUTER: self.u}, neumann, self.f)

    @staticmethod
    def _flux(grad, poly, sign, psi=None, shift=0.0):
        def fn(x):
            g = sign * np.einsum("nd,nd->n", grad(x), outward_normal(poly, x))
            return g if psi is None else g + psi(x) - shift
        return fn


def random_compatible_model(rng):
    """Interior polygonal hole plus a polygonal protrusion standing on the top side."""
    from defeature.geometry import ExtensionPolicy, Feature, build_model, make_extension
    outer = unit_square(("D", "D", "D", "D"))
    n = int(rng.integers(3, 9))
    r = rng.uniform(0.05, 0.2)
    cx, cy = rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.6)
    ang = rng.uniform(0, 2 * np.pi) + np.linspace(0, 2 * np.pi, n, endpoint=False)
    hole = shapely.Polygon(np.column_stack([cx + r * np.cos(ang), cy + r * np.sin(ang)]))
    x0 = rng.uniform(0.1, 0.5)
    x1 = x0 + rng.uniform(0.1, 0.35)
    w = x1 - x0
    top = 1 + rng.uniform(0.05, 0.2)
    if rng.random() < 0.5:
        apex = [(rng.uniform(x0 + 0.25 * w, x1 - 0.25 * w), top)]
    else:
        a = rng.uniform(x0 + 0.2 * w, x0 + 0.45 * w)
        apex = [(x1 - (a - x0), top), (a, top)]
    fp = shapely.Polygon([(x0, 1.0), (x1, 1.0)] + apex)
    protrusion = make_extension(Feature(2, positive_part=fp), ExtensionPolicy.BOUNDING_BOX, outer.polygon)
    return build_model(outer, [Feature(1, hole), protrusion])


# ---------------------------------------------------------------- estimator algebra

def random_traces(rng, n_features=None):
    """Random defect traces over a few features, each with one to three boundary pieces."""
    from defeature.estimator import DefectTrace
    from defeature.geometry import BoundaryLabel as L
    labels = (L.GAMMA_N, L.GAMMA_0P, L.GAMMA_R)
    n_features = n_features or int(rng.integers(1, 6))
    comps = int(rng.integers(1, 3))
    traces = []
    for k in range(1, n_features + 1):
        for lab in labels[: int(rng.integers(1, 4))]:
            m = int(rng.integers(3, 40))
            w = rng.uniform(0.1, 1.0, m)
            measure = float(rng.uniform(1e-4, 2.0))
            w *= measure / w.sum()
            samples = rng.normal(size=(m, comps)) * 10 ** rng.uniform(-3, 3)
            traces.append(DefectTrace(f"{lab.value}:{k}", lab, k, samples, w, measure))
    return traces


def direct_gamma_value(trace, weight):
    """Per-piece estimate from the expanded form |g| * (int d^2 - |g| mean^2) + c^2 |g|^2 mean^2."""
    from defeature.estimator import c_gamma
    w, d, g = trace.weights, trace.samples, trace.measure
    mean = np.average(d, axis=0, weights=w)
    fluct = g * (np.einsum("m,mc->", w, d ** 2) - g * np.dot(mean, mean))
    avg = c_gamma(g) ** 2 * g ** 2 * np.dot(mean, mean)
    return weight * np.sqrt(max(fluct, 0.0) + avg)


def algebra_errors(rng):
    """Relative errors of the three decompositions of the squared estimator, one random case."""
    from defeature.estimator import aggregate, estimate_gamma
    traces = random_traces(rng)
    weight = float(rng.uniform(0.2, 3.0))
    est = [estimate_gamma(t, weight) for t in traces]
    rep = aggregate(est, weight, sorted({t.feature_id for t in traces}))
    total2 = rep.total ** 2
    by_feature = sum(v ** 2 for v in rep.per_feature.values())
    by_gamma = sum(direct_gamma_value(t, weight) ** 2 for t in traces)
    errs = [abs(total2 - by_feature) / total2, abs(total2 - by_gamma) / total2]
    for s in (2.0, 10.0):
        scaled = aggregate([estimate_gamma(t.scaled(s), weight) for t in traces], weight)
        errs.append(abs(scaled.total - s * rep.total) / (s * rep.total))
    return errs


def flux_compat_ratios(seed, perturb=0.5, h=1 / 16):
    """Flux residuals and avg/estimate ratios for one random flux-compatible geometry."""
    from defeature import estimator, pipeline
    from defeature.fem import ProblemKind
    from defeature.mesh import Sizing, mesh_model
    rng = np.random.default_rng(seed)
    problem = ProblemKind.poisson()
    model = random_compatible_model(rng)
    data = CompatibleData(model, rng.uniform(-1, 1, 5), perturb)
    state = pipeline.solve_all(model, problem, data.bc, mesh_model(model, Sizing(h)))
    rep = estimator.report(state, data.bc, problem)
    residual = max(abs(v) for r in rep.flux_residuals.values() for v in r)
    ratios = [e.avg_term / (e.avg_term + e.fluct_term) for e in rep.per_gamma]
    return residual, ratios, state, data

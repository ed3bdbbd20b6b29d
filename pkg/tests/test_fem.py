import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from defeature import fem
from defeature.errors import IncompatibleData, MissingBoundaryData, PointOutsideDomain, SingularSystem
from defeature.fem import BoundaryData, ProblemKind
from defeature.mesh import quad_rule

from helpers import manufactured_bc, square_mesh, stress

P = ProblemKind.poisson()
MU, LAM = 1.5, 2.0
E = ProblemKind.elasticity(LAM, MU)
S = ProblemKind.stokes(1.0)


def h1_error(field, grad_exact):
    """Gradient L2 error against a closed-form gradient, by element quadrature."""
    m = field.mesh
    qr = quad_rule("Triangle", 6)
    xq = np.einsum("qi,tic->tqc", qr.points, m.vertices[m.triangles])
    g = field.gradients_at(np.arange(m.n_triangles), qr.points)
    ge = grad_exact(xq.reshape(-1, 2)).reshape(g.shape)
    jw = 2 * m.areas[:, None] * qr.weights
    return float(np.sqrt(np.sum(jw[..., None, None] * (g - ge) ** 2)))


def solve_manufactured(h, problem, u, grad, f, p=None, **kw):
    mesh = square_mesh(h)
    return fem.solve(mesh, problem, manufactured_bc(problem, u, grad, f, p), **kw)


def u_smooth(x):
    return np.sin(3 * x[:, 0]) * np.exp(x[:, 1])


def grad_smooth(x):
    return np.stack([3 * np.cos(3 * x[:, 0]) * np.exp(x[:, 1]), np.sin(3 * x[:, 0]) * np.exp(x[:, 1])], 1)[:, None, :]


def f_smooth(x):
    return 8 * np.sin(3 * x[:, 0]) * np.exp(x[:, 1])


def u_elastic(x):
    return np.stack([np.sin(x[:, 0]) * np.cos(x[:, 1]), x[:, 0] * np.exp(x[:, 1])], 1)


def grad_elastic(x):
    s, c = np.sin(x[:, 0]), np.cos(x[:, 1])
    return np.stack([np.stack([np.cos(x[:, 0]) * c, -np.sin(x[:, 0]) * np.sin(x[:, 1])], 1),
                     np.stack([np.exp(x[:, 1]), x[:, 0] * np.exp(x[:, 1])], 1)], 1)


def f_elastic(x):
    # -div(2 mu eps(u) + lam div(u) I) for u_elastic, worked out by hand
    sx, cx, sy, cy, ey = np.sin(x[:, 0]), np.cos(x[:, 0]), np.sin(x[:, 1]), np.cos(x[:, 1]), np.exp(x[:, 1])
    x0 = x[:, 0]
    u1_xx, u1_yy, u1_xy = -sx * cy, -sx * cy, -cx * sy
    u2_xx, u2_yy, u2_xy = 0 * x0, x0 * ey, ey
    fx = -(MU * (2 * u1_xx + u1_yy + u2_xy) + LAM * (u1_xx + u2_xy))
    fy = -(MU * (u2_xx + u1_xy + 2 * u2_yy) + LAM * (u1_xy + u2_yy))
    return np.stack([fx, fy], 1)


def test_problem_kind_weights():
    assert P.components == 1 and P.weight == 1.0
    assert E.components == 2 and E.weight == pytest.approx(MU ** -0.5)
    assert ProblemKind.elasticity(-0.5, 1.0).rho == pytest.approx(0.25)
    assert ProblemKind.stokes(4.0).weight == pytest.approx(0.5)


def test_linear_and_quadratic_poisson_exact():
    for u, g, f in [
        (lambda x: x[:, 0] + 2 * x[:, 1], lambda x: np.tile([[[1.0, 2.0]]], (len(x), 1, 1)), None),
        (lambda x: x[:, 0] ** 2 - x[:, 0] * x[:, 1],
         lambda x: np.stack([2 * x[:, 0] - x[:, 1], -x[:, 0]], 1)[:, None, :], lambda x: -2.0 + 0 * x[:, 0]),
    ]:
        assert h1_error(solve_manufactured(0.2, P, u, g, f), g) < 1e-11


def test_quadratic_elasticity_exact():
    u = lambda x: np.stack([x[:, 0] ** 2 + x[:, 1], x[:, 0] * x[:, 1]], 1)
    g = lambda x: np.stack([np.stack([2 * x[:, 0], np.ones(len(x))], 1), np.stack([x[:, 1], x[:, 0]], 1)], 1)
    f = lambda x: np.tile([-(5 * MU + 3 * LAM), 0.0], (len(x), 1))
    assert h1_error(solve_manufactured(0.2, E, u, g, f), g) < 1e-10


def test_quadratic_stokes_exact():
    u = lambda x: np.stack([x[:, 0] ** 2, -2 * x[:, 0] * x[:, 1]], 1)
    g = lambda x: np.stack([np.stack([2 * x[:, 0], 0 * x[:, 0]], 1), np.stack([-2 * x[:, 1], -2 * x[:, 0]], 1)], 1)
    f = lambda x: np.tile([-1.0, 0.0], (len(x), 1))
    p = lambda x: x[:, 0]
    field = solve_manufactured(0.2, S, u, g, f, p)
    assert h1_error(field, g) < 1e-10
    m = field.mesh
    assert np.max(np.abs(field.pressure - m.vertices[:, 0])) < 1e-10


def convergence_rates(problem, u, grad, f, hs=(0.2, 0.1, 0.05)):
    errs = [h1_error(solve_manufactured(h, problem, u, grad, f), grad) for h in hs]
    return [np.log(errs[i] / errs[i + 1]) / np.log(hs[i] / hs[i + 1]) for i in range(len(hs) - 1)], errs


def test_poisson_h1_rate():
    rates, _ = convergence_rates(P, u_smooth, grad_smooth, f_smooth)
    assert min(rates) >= 1.8


def test_elasticity_h1_rate():
    rates, _ = convergence_rates(E, u_elastic, grad_elastic, f_elastic)
    assert min(rates) >= 1.8


def test_stokes_discrete_divergence_residual():
    mesh = square_mesh(0.08, dirichlet=("left", "bottom", "right", "top"))
    bc = BoundaryData({"DirichletOuter": lambda x: np.stack([np.sin(np.pi * x[:, 0]) * x[:, 1] ** 2, 0 * x[:, 0]], 1)
                       * (np.abs(x[:, 1] - 1) < 1e-9)[:, None]},
                      {}, lambda x: np.stack([np.cos(4 * x[:, 1]), np.exp(x[:, 0])], 1))
    field, system = fem.solve(mesh, S, bc, keep_system=True)
    u = system.solution[: system.n_velocity]
    assert np.linalg.norm(system.divergence @ u - system.div_rhs) < 1e-10
    assert abs(fem.p1_load(mesh, fem.constant(1.0)) @ field.pressure) < 1e-10


def test_pure_dirichlet_stokes_rejects_incompatible_data():
    mesh = square_mesh(0.25, dirichlet=("left", "bottom", "right", "top"))
    bc = BoundaryData({"DirichletOuter": lambda x: np.stack([x[:, 0], 0 * x[:, 0]], 1)}, {}, None)
    with pytest.raises(IncompatibleData):
        fem.solve(mesh, S, bc)


def test_missing_data_errors():
    with pytest.raises(SingularSystem):
        fem.solve(square_mesh(0.25, dirichlet=()), P, BoundaryData({}, {"NeumannOuter": fem.ZERO}, None))
    with pytest.raises(MissingBoundaryData):
        fem.solve(square_mesh(0.25), P, BoundaryData({"DirichletOuter": fem.ZERO}, {}, None))


def fd_traction(field, edge, h=1e-6):
    """Traction from centred finite differences of the element polynomial."""
    mesh = field.mesh
    normals, tris = fem.outward_normals(mesh, [edge])
    qr = quad_rule("Edge", 5)
    pts = fem.edge_points(mesh, np.array([edge]), qr.points)[0]
    loc = fem.locator(mesh)
    out = []
    for x in pts:
        grad = np.zeros((field.components, 2))
        for d in range(2):
            e = np.zeros(2)
            e[d] = h
            vals = []
            for y in (x + e, x - e):
                bary = loc.barycentric(tris, y[None, :])
                vals.append(field.values_at(tris, bary[:, None, :])[0, 0])
            grad[:, d] = (vals[0] - vals[1]) / (2 * h)
        p = None
        if field.space == "TaylorHood":
            bary = loc.barycentric(tris, x[None, :])
            pv = field.pressure_at(tris, bary[:, None, :])[0, 0]
            p = lambda _: np.array([pv])
        s = stress(field.problem, grad[None], p, x[None])[0]
        out.append(s @ normals[0])
    return np.asarray(out)


@pytest.mark.parametrize("problem", [P, E, S], ids=["poisson", "elasticity", "stokes"])
def test_boundary_traction_matches_finite_differences(problem):
    comps = problem.components
    u = (lambda x: np.sin(2 * x[:, 0]) * np.cosh(x[:, 1])) if comps == 1 else u_elastic
    bc = BoundaryData({"DirichletOuter": u}, {"NeumannOuter": fem.constant(np.ones(comps) * 0.3)},
                      fem.constant(np.ones(comps)))
    field = fem.solve(square_mesh(0.1), problem, bc)
    mesh = field.mesh
    for edge in mesh.boundary_edges[::7]:
        side = "Plus" if mesh.edge_tris[edge, 0] >= 0 else "Minus"
        t = fem.boundary_traction(field, int(edge), side, problem)
        assert np.max(np.abs(t - fd_traction(field, int(edge)))) < 1e-4


def test_locator_and_interpolation():
    mesh = square_mesh(0.1)
    fn = lambda x: 1 + x[:, 0] ** 2 - 3 * x[:, 0] * x[:, 1]
    field = fem.interpolate(mesh, P, fn)
    pts = np.random.default_rng(0).random((200, 2))
    assert np.allclose(fem.evaluate(field, pts), fn(pts), atol=1e-12)
    with pytest.raises(PointOutsideDomain):
        fem.evaluate(field, np.array([[1.5, 0.5]]))


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_quadratics_are_reproduced(a, b, c, d, e):
    u = lambda x: a * x[:, 0] ** 2 + b * x[:, 0] * x[:, 1] + c * x[:, 1] ** 2 + d * x[:, 0] + e
    grad = lambda x: np.stack([2 * a * x[:, 0] + b * x[:, 1] + d, b * x[:, 0] + 2 * c * x[:, 1]], 1)[:, None, :]
    f = lambda x: -(2 * a + 2 * c) + 0 * x[:, 0]
    field = solve_manufactured(0.34, P, u, grad, f)
    assert h1_error(field, grad) < 1e-9 * (1 + abs(a) + abs(b) + abs(c) + abs(d))


def test_energy_error_of_identical_fields_is_zero():
    mesh = square_mesh(0.2)
    f = fem.interpolate(mesh, S, lambda x: np.stack([x[:, 1], -x[:, 0]], 1), lambda x: x[:, 0])
    assert fem.energy_norm_error(f, f) < 1e-12
    g = fem.interpolate(mesh, S, lambda x: np.stack([x[:, 1], -x[:, 0]], 1), lambda x: x[:, 0] + 1)
    strain, pres = fem.energy_error_split(f, g)
    assert strain < 1e-12 and pres == pytest.approx(1.0, rel=1e-12)


def test_default_data_serves_vector_problems():
    # omitted data default to zero for every component count
    bc = BoundaryData.standard(source=fem.constant([0.0, -1.0]))
    field = fem.solve(square_mesh(0.25), E, bc)
    assert field.coefficients.size > 0 and np.all(np.isfinite(field.coefficients))
    assert np.max(np.abs(fem.evaluate(field, np.array([[0.0, 0.5]])))) < 1e-12


def test_energy_error_of_linear_perturbation():
    mesh = square_mesh(0.2)
    exact = fem.interpolate(mesh, P, lambda x: x[:, 0] ** 2)
    approx = fem.interpolate(mesh, P, lambda x: x[:, 0] ** 2 + 0.01 * x[:, 0])
    assert fem.energy_norm_error(exact, approx) == pytest.approx(0.01, abs=1e-10)


def test_shear_flow_traction():
    # u = (y, 0), p = 0: 2 mu eps(u) n on the top edge is (1, 0)
    mesh = square_mesh(0.25)
    field = fem.interpolate(mesh, S, lambda x: np.stack([x[:, 1], 0 * x[:, 0]], 1), lambda x: 0 * x[:, 0])
    top = [e for e in mesh.boundary_edges if np.all(mesh.vertices[mesh.edges[e], 1] > 1 - 1e-12)]
    for e in top:
        side = "Plus" if mesh.edge_tris[e, 0] >= 0 else "Minus"
        assert np.allclose(fem.boundary_traction(field, int(e), side, S), [1.0, 0.0], atol=1e-12)

from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from hcsk import realmm, toric
from hcsk.errors import (
    BoundaryPoint,
    DegenerateProbe,
    NotConvex,
    NotDelzant,
    TooCloseToBoundary,
)
from hcsk.torus import TorusGrid

SQUARE = [["0", "0"], ["1", "0"], ["1", "1"], ["0", "1"]]
POLYGONS = {
    "square": SQUARE,
    "simplex": [[0, 0], [1, 0], [0, 1]],
    "trapezoid": [[0, 0], [3, 0], [2, 1], [0, 1]],
    "hexagon": [[1, 0], [2, 0], [2, 1], [1, 2], [0, 2], [0, 1]],
    "rational": [["0", "0"], ["1/2", "0"], ["1/2", "1/3"], ["0", "1/3"]],
}


@pytest.fixture
def square():
    return toric.build_polygon(SQUARE)


def test_square_faces(square):
    assert square.normals == ((0, 1), (-1, 0), (0, -1), (1, 0))
    assert square.constants == (0, 1, 1, 0)


def test_rational_vertices_exact():
    P = toric.build_polygon(POLYGONS["rational"])
    assert P.constants[1] == Fraction(1, 2)
    assert P.area == pytest.approx(1 / 6)


def test_not_delzant_reports_vertex_and_determinant():
    with pytest.raises(NotDelzant) as e:
        toric.build_polygon([[0, 0], [1, 0], [0, 2]])
    assert e.value.det in (2, -2)
    assert "1" in str(e.value.vertex)


def test_not_convex():
    with pytest.raises(NotConvex):
        toric.build_polygon([[0, 0], [2, 0], [1, 0], [0, 1]])
    with pytest.raises(NotConvex):
        toric.build_polygon([[0, 0], [2, 0], [1, 1], [2, 2], [0, 2]])


def test_clockwise_input_reoriented():
    P = toric.build_polygon(SQUARE[::-1])
    assert P.area == pytest.approx(1.0)


def test_guillemin_at_centre(square):
    u, G = toric.guillemin(square, np.array([0.5, 0.5]))
    assert abs(u - (-2 * np.log(2))) <= 1e-12
    assert np.abs(G - np.diag([4.0, 4.0])).max() <= 1e-12
    with pytest.raises(BoundaryPoint):
        toric.guillemin(square, np.array([0.0, 0.5]))


@pytest.mark.parametrize("name", list(POLYGONS))
def test_guillemin_hessian_matches_differences(name):
    P = toric.build_polygon(POLYGONS[name])
    y = P.V.mean(axis=0)
    u = lambda z: toric.guillemin(P, z)[0]

    def fd(h):
        H = np.empty((2, 2))
        E = np.eye(2) * h
        for a in range(2):
            for b in range(2):
                H[a, b] = (u(y + E[a] + E[b]) - u(y + E[a] - E[b])
                           - u(y - E[a] + E[b]) + u(y - E[a] - E[b])) / (4 * h * h)
        return H

    H = (4 * fd(5e-4) - fd(1e-3)) / 3  # Richardson, fourth order
    assert np.abs(H - toric.guillemin(P, y)[1]).max() <= 1e-6


def test_l_functional_square_values(square):
    assert abs(toric.l_functional(square, toric.Affine(0, 0, 1))) <= 1e-10
    assert abs(toric.l_functional(square, toric.Affine(1, 0, 0))) <= 1e-10
    q = toric.Quadratic(((1, 0), (0, 0)), (-1, 0), 0.25)
    assert abs(toric.l_functional(square, q) - 1 / 3) <= 1e-10
    assert toric.boundary_integral(square, q) == pytest.approx(2 / 3, abs=1e-12)
    assert toric.area_integral(square, q) == pytest.approx(1 / 12, abs=1e-12)


@pytest.mark.parametrize("name", list(POLYGONS))
def test_boundary_measure_matches_sympy(name):
    P = toric.build_polygon(POLYGONS[name])
    total = 0
    V = [(sp.Rational(str(x)), sp.Rational(str(y))) for x, y in P.vertices]
    for i, (nx, ny) in enumerate(P.normals):
        (x0, y0), (x1, y1) = V[i], V[(i + 1) % len(V)]
        total += sp.sqrt((x1 - x0) ** 2 + (y1 - y0) ** 2) / (nx**2 + ny**2)
    assert P.boundary_measure == pytest.approx(float(total), rel=1e-14)


@pytest.mark.parametrize("name", list(POLYGONS))
def test_quadratic_integrals_match_sympy(name):
    P = toric.build_polygon(POLYGONS[name])
    x, y = sp.symbols("x y")
    f_expr = 3 * x**2 - x * y + 2 * y**2 + x - 5 * y + 1
    f = toric.Quadratic(((3, -0.5), (-0.5, 2)), (1, -5), 1)
    V = [(sp.Rational(str(a)), sp.Rational(str(b))) for a, b in P.vertices]
    # area integral via Green: integral of f = boundary integral of F dy with F_x = f
    Fx = sp.integrate(f_expr, x)
    t = sp.symbols("t")
    area, bnd = 0, 0
    for i, (nx, ny) in enumerate(P.normals):
        (x0, y0), (x1, y1) = V[i], V[(i + 1) % len(V)]
        X, Y = x0 + t * (x1 - x0), y0 + t * (y1 - y0)
        area += sp.integrate(Fx.subs({x: X, y: Y}) * (y1 - y0), (t, 0, 1))
        L = sp.sqrt((x1 - x0) ** 2 + (y1 - y0) ** 2)
        bnd += sp.integrate(f_expr.subs({x: X, y: Y}), (t, 0, 1)) * L / (nx**2 + ny**2)
    assert toric.area_integral(P, f) == pytest.approx(float(area), rel=1e-12, abs=1e-13)
    assert toric.boundary_integral(P, f) == pytest.approx(float(bnd), rel=1e-12, abs=1e-13)


@pytest.mark.parametrize("name", list(POLYGONS))
def test_l_functional_vanishes_on_constants(name):
    P = toric.build_polygon(POLYGONS[name])
    assert abs(toric.l_functional(P, toric.Affine(0, 0, 1))) <= 1e-10


coef = st.floats(-3, 3, allow_nan=False)


@given(coef, coef, coef, coef)
def test_l_functional_linear(a, b, c, d):
    P = toric.build_polygon(POLYGONS["trapezoid"])
    f = toric.Quadratic(((1, 0.2), (0.2, 0.5)), (c, 0), 0)
    g = toric.Quadratic(((0, 0), (0, 1)), (0, d), 1)
    fg = toric.Quadratic(tuple(map(tuple, a * np.array(f.A) + b * np.array(g.A))),
                         tuple(a * np.array(f.b) + b * np.array(g.b)), a * f.c + b * g.c)
    lhs = toric.l_functional(P, fg)
    rhs = a * toric.l_functional(P, f) + b * toric.l_functional(P, g)
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(a) + abs(b)) * 10)


def test_pl_integration_is_exact():
    P = toric.build_polygon(POLYGONS["hexagon"])
    f = toric.PLConvex(((1, -1, 0), (-1, 1, 0), (0.5, 0.5, -1.5)))
    # refined quadrature converges to the clipped exact value
    from hcsk.toric import _triangle_points
    pts, w = _triangle_points(P, level=7)
    assert toric.area_integral(P, f) == pytest.approx(float(np.sum(w * f(pts))), abs=1e-5)
    B = sum(np.mean(f(p + (np.arange(20000)[:, None] + 0.5) / 20000 * (q - p))) * np.linalg.norm(q - p)
            / float(n @ n) for (p, q), n in zip(P.edges(), P.nu))
    assert toric.boundary_integral(P, f) == pytest.approx(B, abs=1e-8)


def test_stability_probe_square():
    P = toric.build_polygon(SQUARE)
    probes = [toric.Quadratic(((1, 0), (0, 0))), toric.Quadratic(((0, 0), (0, 1))),
              toric.PLConvex(((1, -1, 0), (-1, 1, 0)))]
    lam, worst = toric.stability_probe(P, probes, p0=[0.5, 0.5])
    assert lam > 0
    assert worst in probes


@given(st.floats(0.1, 10))
def test_ratio_scale_invariant(s):
    P = toric.build_polygon(POLYGONS["hexagon"])
    f = toric.PLConvex(((1, 0, -1), (0, 0, 0)))
    r1 = toric.probe_ratios(P, [f])[0]
    r2 = toric.probe_ratios(P, [f.scaled(s)])[0]
    assert r1 == pytest.approx(r2, rel=1e-12)


def test_normalized_affine_is_degenerate(square):
    with pytest.raises(DegenerateProbe):
        toric.stability_probe(square, [toric.Affine(1, 2, 3)], p0=[0.5, 0.5])


def test_normalization_properties():
    f = toric.Quadratic(((1, 0.3), (0.3, 2)), (1, -1), 4)
    g = toric.normalize(f, [0.3, 0.6])
    assert abs(g(np.array([0.3, 0.6]))) <= 1e-14
    assert np.abs(g.gradient(np.array([0.3, 0.6]))).max() <= 1e-14
    pl = toric.normalize(toric.PLConvex(((1, -1, 0), (-1, 1, 0))), [0.5, 0.5])
    assert pl(np.array([0.5, 0.5])) == 0.0


def _const(P, Phi):
    return lambda y: np.broadcast_to(Phi, np.shape(y)[:-1] + (2, 2))


def test_xi_boundary_check_cases():
    P = toric.build_polygon(POLYGONS["simplex"])
    Phi = np.array([[0.1, 0.05j], [0.05j, 0.1]])

    def conj(y):
        Gi = np.linalg.inv(toric.guillemin_hessian(P, y))
        return Gi @ Phi @ Gi

    assert toric.xi_boundary_check(P, conj).passed
    assert toric.xi_boundary_check(P, _const(P, np.zeros((2, 2)))).passed
    rep = toric.xi_boundary_check(P, _const(P, Phi))
    assert not rep.passed and rep.face is not None
    assert max(rep.ratios) > 3


def test_det_times_face_product_bounded_on_shells(square):
    vals = []
    for m in (0.1, 0.05, 0.025, 0.0125, 0.00625):
        pts, _ = toric.shell_points(square, m)
        G = toric.guillemin_hessian(square, pts)
        v = np.linalg.det(G) * np.prod(square.ell(pts), axis=-1)
        vals.append((v.min(), v.max()))
    lo, hi = min(v[0] for v in vals), max(v[1] for v in vals)
    assert lo > 0.5 and hi < 2.0


def test_positivity_certificate_interior(square, rng):
    from hcsk import matfun
    for _ in range(200):
        y = rng.uniform(0.05, 0.95, 2)
        G = toric.guillemin_hessian(square, y)
        X = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        X = X + X.T
        d = matfun.spectrum(G, X).delta.max()
        X *= np.sqrt(rng.uniform(0, 0.95) / d)
        assert matfun.positivity_certificate(G, X)[0] > 0


def _zero_xi(y):
    return np.zeros(np.shape(y)[:-1] + (2, 2), dtype=complex)


def test_residual_square_guillemin(square):
    pts, vals = toric.toric_residual_interior(square, _zero_xi, 0.0, 0.1)
    assert np.abs(vals + 4.0).max() <= 1e-8
    _, vals = toric.toric_residual_interior(square, _zero_xi, 4.0, 0.1)
    assert np.abs(vals).max() <= 1e-8


def test_residual_margin_errors(square):
    with pytest.raises(TooCloseToBoundary):
        toric.toric_residual_interior(square, _zero_xi, 0.0, 0.0)
    with pytest.raises(TooCloseToBoundary):
        toric.toric_residual_interior(square, _zero_xi, 0.0, 0.1, step=0.05)
    with pytest.raises(TooCloseToBoundary):
        toric.toric_residual_interior(square, _zero_xi, 0.0, 0.6)


def test_residual_matches_symbolic_abreu_operator():
    P = toric.build_polygon(POLYGONS["trapezoid"])
    x, y = sp.symbols("x y")
    u = sum(sp.Rational(str(n[0])) * 0 + (n[0] * x + n[1] * y + sp.Rational(str(c)))
            * sp.log(n[0] * x + n[1] * y + sp.Rational(str(c)))
            for n, c in zip(P.normals, P.constants))
    h = sp.Rational(1, 20) * (x**3 * y - x * y**2 + x**2)
    H = sp.hessian(u + h, (x, y))
    Hi = H.inv()
    expr = sum(sp.diff(Hi[a, b], (x, y)[a], (x, y)[b]) for a in range(2) for b in range(2))
    f = sp.lambdify((x, y), expr, "numpy")
    hh = sp.lambdify((x, y), sp.hessian(h, (x, y)), "numpy")

    def h_hess(p):
        return np.moveaxis(np.array(hh(p[..., 0], p[..., 1]), dtype=float)
                           * np.ones((2, 2) + p.shape[:-1]), (0, 1), (-2, -1))

    pts, vals = toric.toric_residual_interior(P, _zero_xi, 0.0, 0.15, h_hessian=h_hess, step=0.002)
    ref = f(pts[:, 0], pts[:, 1])
    assert np.abs(vals - ref).max() <= 1e-6 * max(1.0, np.abs(ref).max())


def test_residual_cross_check_with_periodic_evaluator():
    N = 64
    xi = np.array([[0.3, 0.1j], [0.1j, 0.2]])
    y1, y2 = TorusGrid(N).coords()
    k = (1, 2)
    a = 0.001
    phi = a * np.cos(2 * np.pi * (k[0] * y1 + k[1] * y2))

    def G_of(p):
        c = np.cos(2 * np.pi * (k[0] * p[..., 0] + k[1] * p[..., 1]))
        out = np.empty(p.shape[:-1] + (2, 2))
        for i in range(2):
            for j in range(2):
                out[..., i, j] = (i == j) - a * (2 * np.pi) ** 2 * k[i] * k[j] * c
        return out

    pts = np.stack([y1.ravel(), y2.ravel()], -1)
    fd = toric.moment_divergence_fd(pts, G_of, lambda p: np.broadcast_to(xi, p.shape[:-1] + (2, 2)), 1e-3)
    ref = realmm.residual_real(phi, np.broadcast_to(xi, (N, N, 2, 2)))
    assert np.abs(fd.real - ref.ravel()).max() <= 1e-6


def test_integrability_orthogonality():
    P = toric.build_polygon(SQUARE)
    x, y = sp.symbols("x y")
    b = (x * (1 - x) * y * (1 - y)) ** 2
    w = [b * (1 + x), b * (2 - y + sp.I * x)]
    # T^{a01} = -T^{a10} = w_a, xi^{ab} = d_c T^{abc} + d_c T^{bac}
    T = {}
    for a in range(2):
        T[(a, 0, 1)] = w[a]
        T[(a, 1, 0)] = -w[a]
    get = lambda a, b_, c: T.get((a, b_, c), 0)
    X = [[sum(sp.diff(get(a, b_, c), (x, y)[c]) + sp.diff(get(b_, a, c), (x, y)[c]) for c in range(2))
          for b_ in range(2)] for a in range(2)]
    fx = sp.lambdify((x, y), sp.Matrix(X), "numpy")

    def xi(p):
        return np.moveaxis(np.array(fx(p[..., 0], p[..., 1]), dtype=complex)
                           * np.ones((2, 2) + p.shape[:-1]), (0, 1), (-2, -1))

    def f_hess(p):
        H = np.zeros(p.shape[:-1] + (2, 2))
        H[..., 0, 0] = 2.0
        return H

    assert abs(toric.toric_integrability_orthogonality(P, xi, f_hess)) <= 1e-6
    assert toric.toric_integrability_orthogonality(P, _zero_xi, f_hess) == 0
    assert toric.toric_integrability_orthogonality(
        P, xi, lambda p: np.zeros(p.shape[:-1] + (2, 2))) == 0


def test_parse_probe_and_polygon():
    P = toric.parse_polygon({"vertices": SQUARE})
    assert len(P.normals) == 4
    assert isinstance(toric.parse_probe({"pieces": [[1, 0, 0]]}), toric.Affine)
    assert isinstance(toric.parse_probe({"pieces": [[1, 0, 0], [0, 0, 0]]}), toric.PLConvex)
    q = toric.parse_probe({"quadratic": [[1, 0], [0, 0]], "linear": ["-1", 0], "constant": "1/4"})
    assert q(np.array([0.5, 0.0])) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        toric.parse_probe({"cubic": 1})
    with pytest.raises(ValueError):
        toric.parse_polygon({"vertices": SQUARE, "colour": "red"})

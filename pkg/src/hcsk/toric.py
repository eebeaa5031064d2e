"""Delzant polygons: Guillemin potential, boundary measure, the L_C functional,
Higgs boundary behaviour and interior residual evaluation.

Faces are l_r(y) = <nu_r, y> + lambda_r >= 0 with nu_r the primitive inward
integer normal.  The boundary measure on face r is Lebesgue / |nu_r|^2.
"""

from dataclasses import dataclass
from fractions import Fraction
from math import gcd

import numpy as np

from . import kernels
from .errors import (
    BoundaryPoint,
    DegenerateProbe,
    NotConvex,
    NotDelzant,
    TooCloseToBoundary,
)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W

# degree-4 six-point triangle rule, barycentric coordinates, weights sum to 1
_A1, _W1 = 0.445948490915965, 0.223381589678011
_A2, _W2 = 0.091576213509771, 0.109951743655322
_TRI_BARY = np.array([
    [_A1, _A1, 1 - 2 * _A1], [_A1, 1 - 2 * _A1, _A1], [1 - 2 * _A1, _A1, _A1],
    [_A2, _A2, 1 - 2 * _A2], [_A2, 1 - 2 * _A2, _A2], [1 - 2 * _A2, _A2, _A2],
])
_TRI_W = np.array([_W1] * 3 + [_W2] * 3)


def _rational(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        return Fraction(v.strip())
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    return Fraction(str(v))


def _lcm(a, b):
    return a * b // gcd(a, b)


@dataclass(frozen=True)
class DelzantPolygon:
    vertices: tuple
    normals: tuple
    constants: tuple

    @property
    def V(self):
        return np.array([[float(x), float(y)] for x, y in self.vertices])

    @property
    def nu(self):
        return np.array(self.normals, dtype=float)

    @property
    def lam(self):
        return np.array([float(c) for c in self.constants])

    def ell(self, y):
        """Face values l_r(y), shape (..., r)."""
        y = np.asarray(y, dtype=float)
        return y @ self.nu.T + self.lam

    def edges(self):
        V = self.V
        return [(V[i], V[(i + 1) % len(V)]) for i in range(len(V))]

    @property
    def area(self):
        V = self.V
        x, y = V[:, 0], V[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def boundary_measure(self):
        return float(sum(np.linalg.norm(q - p) / float(np.dot(n, n))
                         for (p, q), n in zip(self.edges(), self.nu)))

    @property
    def diameter(self):
        V = self.V
        return float(np.max(np.linalg.norm(V[:, None] - V[None, :], axis=-1)))

    def distance_to_boundary(self, y):
        return np.min(self.ell(y) / np.linalg.norm(self.nu, axis=1), axis=-1)


def build_polygon(vertices):
    """Faces with primitive inward normals; checks strict convexity and the Delzant condition.

    Clockwise input is reoriented.
    """
    V = [(_rational(x), _rational(y)) for x, y in vertices]
    if len(V) < 3:
        raise NotConvex("input", "(need at least three vertices)")
    area2 = sum(V[i][0] * V[(i + 1) % len(V)][1] - V[(i + 1) % len(V)][0] * V[i][1]
                for i in range(len(V)))
    if area2 == 0:
        raise NotConvex("input", "(zero area)")
    if area2 < 0:
        V = V[::-1]
    m = len(V)
    normals, consts = [], []
    for i in range(m):
        (x0, y0), (x1, y1) = V[i], V[(i + 1) % m]
        dx, dy = x1 - x0, y1 - y0
        if dx == 0 and dy == 0:
            raise NotConvex(tuple(str(c) for c in V[i]), "(repeated vertex)")
        nx, ny = -dy, dx
        den = _lcm(nx.denominator, ny.denominator)
        ix, iy = int(nx * den), int(ny * den)
        g = gcd(abs(ix), abs(iy))
        ix, iy = ix // g, iy // g
        normals.append((ix, iy))
        consts.append(-(ix * x0 + iy * y0))
    for i in range(m):
        a, b = normals[i - 1], normals[i]
        turn = a[0] * b[1] - a[1] * b[0]
        if turn <= 0:
            raise NotConvex(tuple(str(c) for c in V[i]), "(not strictly convex)")
    for i in range(m):
        a, b = normals[i - 1], normals[i]
        det = a[0] * b[1] - a[1] * b[0]
        if abs(det) != 1:
            raise NotDelzant(tuple(str(c) for c in V[i]), det)
    return DelzantPolygon(tuple(V), tuple(normals), tuple(consts))


def guillemin(P, y):
    """(u_P(y), D^2 u_P(y)) with u_P = sum_r l_r log l_r."""
    y = np.asarray(y, dtype=float)
    ell = P.ell(y)
    if np.any(ell <= 0):
        raise BoundaryPoint(f"{y.tolist()} is not interior")
    nu = P.nu
    u = np.sum(ell * np.log(ell), axis=-1)
    G = np.einsum("...r,ra,rb->...ab", 1.0 / ell, nu, nu)
    return u, G


def guillemin_hessian(P, y):
    return guillemin(P, y)[1]


def boundary_constant(P):
    """C = sigma(dP) / area(P)."""
    return P.boundary_measure / P.area


def scalar_constant(s_hat):
    return 4.0 * s_hat


# ------------------------------------------------------------------ probes

@dataclass(frozen=True)
class Affine:
    a: float
    b: float
    c: float = 0.0

    @property
    def pieces(self):
        return ((self.a, self.b, self.c),)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return self.a * y[..., 0] + self.b * y[..., 1] + self.c

    def gradient(self, y):
        return np.array([self.a, self.b])

    def hessian(self, y):
        return np.zeros(np.shape(y)[:-1] + (2, 2))

    def scaled(self, s):
        return Affine(s * self.a, s * self.b, s * self.c)


@dataclass(frozen=True)
class PLConvex:
    pieces: tuple

    def __post_init__(self):
        if not self.pieces:
            raise ValueError("PLConvex needs at least one affine piece")
        object.__setattr__(self, "pieces", tuple(tuple(float(v) for v in p) for p in self.pieces))

    def _values(self, y):
        y = np.asarray(y, dtype=float)
        A = np.array(self.pieces)
        return y[..., 0, None] * A[:, 0] + y[..., 1, None] * A[:, 1] + A[:, 2]

    def __call__(self, y):
        return np.max(self._values(y), axis=-1)

    def gradient(self, y):
        """Mean gradient of the active pieces, a subgradient also at kinks."""
        v = self._values(y)
        active = v >= v.max() - 1e-12 * (1.0 + abs(v.max()))
        return np.array(self.pieces)[active, :2].mean(axis=0)

    def hessian(self, y):
        return np.zeros(np.shape(y)[:-1] + (2, 2))

    def scaled(self, s):
        if s <= 0:
            raise ValueError("PL convex probes scale by positive factors only")
        return PLConvex(tuple((s * a, s * b, s * c) for a, b, c in self.pieces))


@dataclass(frozen=True)
class Quadratic:
    """f(y) = y^T A y + b . y + c."""

    A: tuple
    b: tuple = (0.0, 0.0)
    c: float = 0.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        A = 0.5 * (A + A.T)
        object.__setattr__(self, "A", tuple(map(tuple, A)))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        A, b = np.array(self.A), np.array(self.b)
        return np.einsum("...a,ab,...b->...", y, A, y) + y @ b + self.c

    def gradient(self, y):
        return 2.0 * np.array(self.A) @ np.asarray(y, dtype=float) + np.array(self.b)

    def hessian(self, y):
        return np.broadcast_to(2.0 * np.array(self.A), np.shape(y)[:-1] + (2, 2))

    def scaled(self, s):
        return Quadratic(tuple(map(tuple, s * np.array(self.A))), tuple(s * np.array(self.b)), s * self.c)


def normalize(f, p0):
    """Subtract the supporting affine function at p0, so f(p0) = 0 and df(p0) = 0."""
    p0 = np.asarray(p0, dtype=float)
    val = float(f(p0))
    g = f.gradient(p0)
    a, b = float(g[0]), float(g[1])
    c = val - a * p0[0] - b * p0[1]
    if isinstance(f, Affine):
        return Affine(0.0, 0.0, 0.0)
    if isinstance(f, PLConvex):
        return PLConvex(tuple((pa - a, pb - b, pc - c) for pa, pb, pc in f.pieces))
    if isinstance(f, Quadratic):
        return Quadratic(f.A, (f.b[0] - a, f.b[1] - b), f.c - c)
    raise TypeError(type(f))


# ------------------------------------------------------------------ quadrature

def _clip(poly, a, b, c):
    """Sutherland-Hodgman clip of a convex polygon to {a x + b y + c >= 0}."""
    out = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        fp = a * p[0] + b * p[1] + c
        fq = a * q[0] + b * q[1] + c
        if fp >= 0:
            out.append(p)
        if (fp >= 0) != (fq >= 0):
            t = fp / (fp - fq)
            out.append(p + t * (q - p))
    return out


def _poly_area_centroid(poly):
    if len(poly) < 3:
        return 0.0, np.zeros(2)
    P = np.array(poly)
    x, y = P[:, 0], P[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    A = 0.5 * np.sum(cross)
    if A == 0:
        return 0.0, np.zeros(2)
    cx = np.sum((x + xn) * cross) / (6 * A)
    cy = np.sum((y + yn) * cross) / (6 * A)
    return float(A), np.array([cx, cy])


def _fan(P, level=0):
    """Triangles (a, b, c) of the fan from vertex 0, each split into 4**level pieces."""
    V = P.V
    tris = [(V[0], V[i], V[i + 1]) for i in range(1, len(V) - 1)]
    for _ in range(level):
        nxt = []
        for a, b, c in tris:
            ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
            nxt += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        tris = nxt
    return tris


def _triangle_points(P, level=0):
    pts, wts = [], []
    for a, b, c in _fan(P, level):
        area = 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
        pts.append(_TRI_BARY @ np.array([a, b, c]))
        wts.append(area * _TRI_W)
    return np.concatenate(pts), np.concatenate(wts)


def area_integral(P, f, level=0):
    if isinstance(f, PLConvex):
        total = 0.0
        pieces = f.pieces
        for j, (a, b, c) in enumerate(pieces):
            poly = list(P.V)
            for m, (am, bm, cm) in enumerate(pieces):
                if m != j:
                    poly = _clip(poly, a - am, b - bm, c - cm)
                    if len(poly) < 3:
                        break
            A, cen = _poly_area_centroid(poly)
            total += A * (a * cen[0] + b * cen[1] + c)
        return total
    pts, wts = _triangle_points(P, level)
    return float(np.sum(wts * f(pts)))


def _segment_integral(f, p, q):
    L = float(np.linalg.norm(q - p))
    if isinstance(f, PLConvex):
        A = np.array(f.pieces)
        vp = A[:, :2] @ p + A[:, 2]
        vq = A[:, :2] @ q + A[:, 2]
        ts = [0.0, 1.0]
        for i in range(len(A)):
            for j in range(i + 1, len(A)):
                d0, d1 = vp[i] - vp[j], vq[i] - vq[j]
                if d0 != d1:
                    t = d0 / (d0 - d1)
                    if 0.0 < t < 1.0:
                        ts.append(t)
        ts = np.sort(ts)
        mids = 0.5 * (ts[1:] + ts[:-1])
        pts = p + mids[:, None] * (q - p)
        return L * float(np.sum(np.diff(ts) * f(pts)))
    pts = p + _GL_X[:, None] * (q - p)
    return L * float(np.sum(_GL_W * f(pts)))


def boundary_integral(P, f):
    """Integral of f against the boundary measure."""
    return float(sum(_segment_integral(f, p, q) / float(np.dot(n, n))
                     for (p, q), n in zip(P.edges(), P.nu)))


def l_functional(P, f, C=None):
    """L_C(f) = boundary integral - C * area integral, C = sigma(dP)/area by default."""
    C = boundary_constant(P) if C is None else C
    return boundary_integral(P, f) - C * area_integral(P, f)


def probe_ratios(P, probes, p0=None):
    """Ratios L_C(f) / boundary integral for each probe, normalised at p0 when given."""
    out = []
    for f in probes:
        g = normalize(f, p0) if p0 is not None else f
        B = boundary_integral(P, g)
        if B <= 1e-14:
            raise DegenerateProbe(f"boundary integral {B:.3g} for probe {f}")
        out.append(l_functional(P, g) / B)
    return out


def stability_probe(P, probes, p0=None):
    """(lambda_hat, worst probe).

    lambda_hat < 0 is an instability witness; lambda_hat > 0 is evidence only.
    """
    ratios = probe_ratios(P, probes, p0)
    j = int(np.argmin(ratios))
    return float(ratios[j]), probes[j]


# ------------------------------------------------------------------ boundary behaviour

def _offset_polygon(P, d):
    """Vertices of {l_r >= d |nu_r|} (assumes d below the inradius)."""
    nu, lam = P.nu, P.lam
    shift = lam - d * np.linalg.norm(nu, axis=1)
    m = len(nu)
    pts = []
    for i in range(m):
        A = np.array([nu[i - 1], nu[i]])
        pts.append(np.linalg.solve(A, -np.array([shift[i - 1], shift[i]])))
    return np.array(pts)


def shell_points(P, margin, per_edge=16):
    """Points at distance margin * diam(P) from the boundary, with the face each is nearest to."""
    d = margin * P.diameter
    Q = _offset_polygon(P, d)
    m = len(Q)
    t = (np.arange(per_edge) + 0.5) / per_edge
    pts, faces = [], []
    for i in range(m):
        p, q = Q[i], Q[(i + 1) % m]
        pts.append(p + t[:, None] * (q - p))
        faces.append(np.full(per_edge, i))
    pts = np.concatenate(pts)
    if np.any(P.distance_to_boundary(pts) < 0.999 * d):
        raise TooCloseToBoundary(f"margin {margin} exceeds the inradius")
    return pts, np.concatenate(faces)


@dataclass(frozen=True)
class BoundaryReport:
    passed: bool
    margins: tuple
    sups: tuple
    ratios: tuple
    face: object


def xi_boundary_check(P, xi, margins=(0.1, 0.05, 0.025, 0.0125), per_edge=16, growth=1.1):
    """Check that G_P xi G_P stays bounded on shells approaching the boundary.

    ``xi`` maps an array of points (..., 2) to matrices (..., 2, 2).
    """
    sups, face_sups = [], []
    for m in margins:
        pts, faces = shell_points(P, m, per_edge)
        G = guillemin_hessian(P, pts)
        H = G @ np.asarray(xi(pts), dtype=complex) @ G
        vals = np.linalg.norm(H, ord=2, axis=(-2, -1))
        sups.append(float(vals.max()))
        face_sups.append(np.array([vals[faces == r].max() for r in range(len(P.nu))]))
    ratios = []
    for a, b in zip(sups[:-1], sups[1:]):
        ratios.append(1.0 if a == 0.0 and b == 0.0 else (b / a if a > 0 else np.inf))
    passed = all(r <= growth for r in ratios)
    face = None
    if not passed:
        fa, fb = face_sups[-2], face_sups[-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            grow = np.where(fa > 0, fb / fa, np.inf)
        r = int(np.argmax(grow))
        face = {"index": r, "normal": P.normals[r], "constant": str(P.constants[r])}
    return BoundaryReport(passed, tuple(margins), tuple(sups), tuple(ratios), face)


# ------------------------------------------------------------------ interior residual

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_OFF = np.arange(-2, 3)


def interior_lattice(P, margin, spacing=None):
    """Lattice points of P at distance >= margin from every face."""
    spacing = spacing or margin
    V = P.V
    lo, hi = V.min(axis=0), V.max(axis=0)
    xs = np.arange(lo[0], hi[0] + 0.5 * spacing, spacing)
    ys = np.arange(lo[1], hi[1] + 0.5 * spacing, spacing)
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    return pts[P.distance_to_boundary(pts) >= margin * (1 - 1e-12)]


def moment_divergence_fd(points, G_of, xi_of, step):
    """sum_ab d_a d_b ((1 - M)^{1/2} G^{-1})^{ab} at ``points`` by 4th-order differences."""
    points = np.asarray(points, dtype=float)
    ox, oy = np.meshgrid(_OFF, _OFF, indexing="ij")
    offs = np.stack([ox, oy], axis=-1).reshape(-1, 2) * step
    sample = points[:, None, :] + offs[None, :, :]
    G = np.asarray(G_of(sample), dtype=float)
    X = np.broadcast_to(np.asarray(xi_of(sample), dtype=complex), G.shape)
    fr = kernels.frame(G, X)
    kernels.check_admissible(fr)
    T = kernels.moment_tensor(fr).reshape(len(points), 5, 5, 2, 2)
    h2 = step * step
    d11 = np.einsum("i,pi->p", _D2, T[:, :, 2, 0, 0]) / h2
    d22 = np.einsum("j,pj->p", _D2, T[:, 2, :, 1, 1]) / h2
    d12 = np.einsum("i,j,pij->p", _D1, _D1, T[:, :, :, 0, 1] + T[:, :, :, 1, 0]) / h2
    return d11 + d22 + d12


def toric_residual_interior(P, xi, C, margin, h_hessian=None, step=None, spacing=None):
    """Residual of the real moment map for u = u_P + h on an interior lattice.

    Returns (points, values).  ``xi`` and ``h_hessian`` map points (..., 2) to
    matrices (..., 2, 2).
    """
    if margin <= 0:
        raise TooCloseToBoundary("margin must be positive")
    step = margin / 8.0 if step is None else step
    if step > margin / 8.0:
        raise TooCloseToBoundary(f"step {step} exceeds margin/8")
    pts = interior_lattice(P, margin, spacing)
    if pts.size == 0:
        raise TooCloseToBoundary(f"no lattice points at distance {margin} from the boundary")

    def G_of(y):
        G = guillemin_hessian(P, y)
        return G if h_hessian is None else G + h_hessian(y)

    vals = moment_divergence_fd(pts, G_of, xi, step)
    return pts, vals.real + C


def toric_integrability_orthogonality(P, xi, f_hessian, level=3):
    """Integral over P of sum_ij xi^{ij} f_{,ij}."""
    pts, wts = _triangle_points(P, level)
    X = np.asarray(xi(pts), dtype=complex)
    H = np.asarray(f_hessian(pts), dtype=float)
    return complex(np.sum(wts * np.einsum("pab,pab->p", X, H)))


def parse_polygon(data):
    """Polygon from a mapping {"vertices": [[x, y], ...]} with entries like "1/2"."""
    if set(data) - {"vertices"}:
        raise ValueError(f"unknown polygon keys {sorted(set(data) - {'vertices'})}")
    return build_polygon(data["vertices"])


def parse_probe(entry):
    """Probe from {"pieces": [[a, b, c], ...]} or {"quadratic": A, "linear": b, "constant": c}."""
    keys = set(entry) - {"id"}
    if keys == {"pieces"}:
        pieces = [tuple(float(_rational(v)) for v in p) for p in entry["pieces"]]
        return Affine(*pieces[0]) if len(pieces) == 1 else PLConvex(tuple(pieces))
    if keys and keys <= {"quadratic", "linear", "constant"} and "quadratic" in keys:
        A = [[float(_rational(v)) for v in row] for row in entry["quadratic"]]
        b = [float(_rational(v)) for v in entry.get("linear", [0, 0])]
        return Quadratic(tuple(map(tuple, A)), tuple(b), float(_rational(entry.get("constant", 0))))
    raise ValueError(f"unrecognised probe entry {entry}")

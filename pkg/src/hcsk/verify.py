"""Invariant suites run by ``hcsk verify`` and reused by the tests."""

from dataclasses import asdict, dataclass

import numpy as np

from . import complexmm, matfun, realmm
from .errors import HcskError
from .torus import TorusGrid, hessian, hessian_of


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    defect: float
    threshold: float
    samples: int

    def as_dict(self):
        return asdict(self)


def random_smooth(rng, N, amp=1.0, kmax=3, n=2):
    """Real zero-mean trigonometric polynomial with modes |k_i| <= kmax."""
    y = TorusGrid(N, n).coords()
    f = np.zeros((N,) * n)
    ks = np.arange(-kmax, kmax + 1)
    for k in np.stack(np.meshgrid(*([ks] * n), indexing="ij"), -1).reshape(-1, n):
        if not k.any():
            continue
        phase = 2 * np.pi * sum(ki * yi for ki, yi in zip(k, y))
        f += rng.normal() * np.cos(phase + rng.uniform(0, 2 * np.pi)) / (1 + k @ k) ** 2
    return amp * f


def random_spd(rng, n=2, floor=0.3):
    A = rng.normal(size=(n, n))
    return A @ A.T + floor * np.eye(n)


def random_sym(rng, n=2):
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return X + X.T


def scale_to_radius(G, X, target):
    """Rescale X so that the spectral radius of X G conj(X) G equals ``target``."""
    d = matfun.spectrum(G, X).delta.max()
    return X * np.sqrt(target / d) if d > 0 else X


def random_field_point(rng, N, phi_amp=0.01, xi_amp=0.2, target=0.6, kmax=3):
    """(phi, xi) admissible on an N-grid, with max spectral radius ``target``."""
    phi = random_smooth(rng, N, phi_amp, kmax)
    xi = np.zeros((N, N, 2, 2), dtype=complex)
    for a, b in ((0, 0), (0, 1), (1, 1)):
        v = (0.15 * (rng.normal() + 1j * rng.normal())
             + random_smooth(rng, N, xi_amp, kmax) + 1j * random_smooth(rng, N, xi_amp, kmax))
        xi[..., a, b] = v
        xi[..., b, a] = v
    G = hessian(phi)
    M = xi @ G @ xi.conj() @ G
    lam = np.abs(np.linalg.eigvals(M)).max()
    return phi, xi * np.sqrt(target / lam)


def unit_direction(rng, N, kmax=3):
    """Smooth direction psi with max |D^2 psi| = 1."""
    psi = random_smooth(rng, N, 1.0, kmax)
    return psi / np.abs(hessian_of(psi)).max()


def gradient_suite(rng, count=10, N=16, h=1e-5, threshold=1e-6):
    worst = 0.0
    for _ in range(count):
        phi, xi = random_field_point(rng, N)
        psi = unit_direction(rng, N)
        g = realmm.hk_gradient(phi, xi)
        fd = (realmm.hk_energy(phi + h * psi, xi)[2] - realmm.hk_energy(phi - h * psi, xi)[2]) / (2 * h)
        an = float(np.mean(g * psi))
        worst = max(worst, abs(an - fd) / max(abs(fd), 1e-300))
    return SuiteResult("gradient", worst <= threshold, worst, threshold, count)


def _admissible(phi, xi):
    try:
        realmm._state(phi, xi)
    except HcskError:
        return False
    return True


def convexity_suite(rng, paths=100, N=16, points=11, pointwise=1000, threshold=-1e-10):
    """Second differences of the HK energy along linear paths, plus pointwise Hessian forms."""
    worst = np.inf
    done = 0
    ts = np.linspace(0.0, 1.0, points)
    while done < paths:
        phi0, xi = random_field_point(rng, N, target=0.5)
        phi1 = random_smooth(rng, N, 0.01)
        path = [phi0 + t * (phi1 - phi0) for t in ts]
        if not all(_admissible(p, xi) for p in path):
            continue
        E = np.array([realmm.hk_energy(p, xi)[2] for p in path])
        worst = min(worst, float(np.min(E[:-2] - 2 * E[1:-1] + E[2:])))
        done += 1
    for _ in range(pointwise):
        G = random_spd(rng)
        X = scale_to_radius(G, random_sym(rng), rng.uniform(0.0, 0.95))
        Gd = rng.normal(size=(2, 2))
        worst = min(worst, matfun.hessian_quadratic_form(G, Gd + Gd.T, X))
    return SuiteResult("convexity", worst >= threshold, worst, threshold, paths + pointwise)


def takagi_suite(rng, count=1000, threshold=1e-10):
    worst = 0.0
    I = np.eye(2)
    for _ in range(count):
        S = random_sym(rng)
        U, D = matfun.takagi(S)
        worst = max(worst,
                    float(np.abs(U @ np.diag(D) @ U.T - S).max() / max(np.abs(S).max(), 1.0)),
                    float(np.abs(U.conj().T @ U - I).max()))
    return SuiteResult("takagi", worst <= threshold, worst, threshold, count)


def projection_suite(rng, count=10, N=16, threshold=1e-12):
    worst = 0.0
    kap = complexmm._kappa(N)
    for _ in range(count):
        xi = rng.normal(size=(N, N, 2, 2)) + 1j * rng.normal(size=(N, N, 2, 2))
        xi = xi + np.swapaxes(xi, -1, -2)
        P1 = complexmm.fourier_project(xi)
        P2 = complexmm.fourier_project(P1)
        V = complexmm.to_modes(P1)
        cons = np.abs(np.sum(kap * complexmm.WEIGHTS[:, None, None] * V, axis=0)).max()
        worst = max(worst, float(np.abs(P2 - P1).max()), float(cons))
    return SuiteResult("projection", worst <= threshold, worst, threshold, count)


SUITES = {
    "gradient": gradient_suite,
    "convexity": convexity_suite,
    "takagi": takagi_suite,
    "projection": projection_suite,
}


def run_all(seed=0, counts=None, only=None):
    """Run each suite with its own child generator so results do not depend on suite order."""
    counts = counts or {}
    names = list(SUITES) if only is None else list(only)
    children = np.random.SeedSequence(seed).spawn(len(SUITES))
    seeds = dict(zip(SUITES, children))
    out = []
    for name in names:
        rng = np.random.default_rng(seeds[name])
        kw = {}
        if name in counts:
            kw["paths" if name == "convexity" else "count"] = int(counts[name])
        out.append(SUITES[name](rng, **kw))
    return out

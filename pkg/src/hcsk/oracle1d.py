"""Translation-invariant solutions on the torus with det(xi) = 0.

For u = |y|^2/2 + f(y^1) the Hessian is G = diag(g, 1) with g = 1 + f''.  For
the rank-one field xi = [[c, F], [F, F^2/c]] the only non-trivial entry of the
real moment map is d_1 d_1 of

    (S G^{-1})^{11} = 1/g - q(p),   q(p) = p / (1 + sqrt(1 - p^2/|c|^2)),
    p = g |c|^2 + |F|^2,

so it holds iff 1/g + k = q(p) for a real constant k, fixed by mean(f'') = 0.
Equivalently, with x = 1/g + k,

    |F/c|^2 + g = 2 x / (|c|^2 + x^2),   0 <= x <= |c|.

For F = 0 this gives g = 1 and 1 + k = 1 - sqrt(1 - |c|^2).
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import BranchLost, ConstraintViolated
from .torus import TorusGrid, antiderivative2

C_BOUND = 0.3
NONSING_EPS = 0.01


def _samples(F, samples):
    if callable(F):
        y = np.arange(samples) / samples
        return np.asarray(F(y), dtype=complex) * np.ones(samples)
    F = np.asarray(F, dtype=complex)
    if F.ndim == 1 and F.size > samples and F.size % samples == 0:
        return F[:: F.size // samples]
    if F.ndim != 1 or F.size != samples:
        raise ValueError(f"expected {samples} samples, got shape {F.shape}")
    return F


@dataclass(frozen=True)
class FirstType:
    """xi = diag(0, xi22(y^1))."""

    xi22: object


@dataclass(frozen=True)
class SecondType:
    """xi = [[c, F(y^1)], [F(y^1), F(y^1)^2 / c]]."""

    c: complex
    F: object


@dataclass(frozen=True)
class Oracle1DResult:
    y: np.ndarray
    fpp: np.ndarray
    k: float
    p: np.ndarray
    residual: np.ndarray
    kind: str

    @property
    def residual_sup(self):
        return float(np.max(np.abs(self.residual)))


def _q(g, c2, a2):
    p = g * c2 + a2
    return p / (1.0 + np.sqrt(np.maximum(1.0 - p * p / c2, 0.0))), p


def _dq_dp(p, c2):
    s = np.sqrt(1.0 - p * p / c2)
    return 1.0 / (1.0 + s) + p * p / (c2 * s * (1.0 + s) ** 2)


def _solve_g(k, c2, a2, cabs):
    """Root of 1/g - q(g) + k = 0 for every sample (strictly decreasing in g)."""
    gmax = (cabs - a2) / c2
    lo = np.full_like(a2, 1.0 / (cabs - k))
    hi = np.minimum(gmax, -1.0 / k) if k < 0 else gmax.copy()
    lo = np.minimum(lo, hi)
    qh, _ = _q(hi, c2, a2)
    saturated = 1.0 / hi - qh + k > 0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        qm, _ = _q(mid, c2, a2)
        pos = 1.0 / mid - qm + k > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.all(hi - lo <= 2e-16 * hi):
            break
    g = 0.5 * (lo + hi)
    for _ in range(2):
        qg, p = _q(g, c2, a2)
        ok = p * p < c2 * (1 - 1e-14)
        f = 1.0 / g - qg + k
        df = -1.0 / g**2 - c2 * _dq_dp(np.where(ok, p, 0.0), c2)
        g = np.where(ok & ~saturated, g - f / df, g)
    return g, saturated


def _check(h):
    c = complex(h.c)
    cabs = abs(c)
    if cabs == 0.0:
        raise ConstraintViolated("c must be nonzero")
    if cabs >= C_BOUND:
        raise ConstraintViolated(f"|c| = {cabs:.6g} must be below {C_BOUND}")
    return c, cabs


def solve_translation_invariant(h, samples=1024):
    y = np.arange(samples) / samples
    if isinstance(h, FirstType):
        _samples(h.xi22, samples)
        zeros = np.zeros(samples)
        return Oracle1DResult(y=y, fpp=zeros, k=0.0, p=zeros.copy(),
                              residual=zeros.copy(), kind="first")
    c, cabs = _check(h)
    F = _samples(h.F, samples)
    if np.max(np.abs(F)) > cabs:
        raise ConstraintViolated(f"max |F| = {np.max(np.abs(F)):.6g} exceeds |c| = {cabs:.6g}")
    c2 = cabs * cabs
    a2 = np.abs(F) ** 2
    q1, _ = _q(np.ones(samples), c2, a2)
    k_lo, k_hi = float(q1.min()) - 1.0, float(q1.max()) - 1.0

    def excess(k):
        g, _ = _solve_g(k, c2, a2, cabs)
        return float(np.mean(g)) - 1.0

    if k_hi - k_lo <= 1e-15:
        k = 0.5 * (k_lo + k_hi)
    else:
        k = brentq(excess, k_lo, k_hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    g, saturated = _solve_g(k, c2, a2, cabs)
    if saturated.any():
        raise BranchLost(f"no root inside the nonsingular range at sample {int(np.argmax(saturated))}")
    qg, p = _q(g, c2, a2)
    x = 1.0 / g + k
    if np.any(x < 0) or np.any(x > cabs):
        raise BranchLost("root left the branch 0 <= 1/g + k <= |c|")
    if np.any(p * p > c2 * (1.0 - NONSING_EPS)):
        raise BranchLost("uniform nonsingularity margin violated")
    alg = a2 / c2 + g - 2.0 * x / (c2 + x * x)
    direct = 1.0 / g - qg + k
    residual = np.where(np.abs(alg) > np.abs(direct), alg, direct)
    fpp = g - 1.0
    return Oracle1DResult(y=y, fpp=fpp, k=float(k), p=p, residual=residual, kind="second")


def xi_field(h, grid):
    """The (N, N, 2, 2) Higgs field of ``h`` (constant in y^2)."""
    N = grid.N
    out = np.zeros((N, N, 2, 2), dtype=complex)
    if isinstance(h, FirstType):
        out[..., 1, 1] = _samples(h.xi22, N)[:, None]
        return out
    c = complex(h.c)
    F = _samples(h.F, N)[:, None]
    out[..., 0, 0] = c
    out[..., 0, 1] = F
    out[..., 1, 0] = F
    out[..., 1, 1] = F * F / c
    return out


def lift_to_2d(r, h, grid=None):
    """(phi, xi) on the 2D grid with phi(y) = f(y^1) and d_1^2 f = fpp at the nodes."""
    grid = grid or TorusGrid(64)
    N = grid.N
    if r.fpp.size % N:
        raise ValueError(f"{r.fpp.size} samples cannot be restricted to N={N}")
    fpp = r.fpp[:: r.fpp.size // N]
    f = antiderivative2(fpp, axis=0, n=1)
    phi = np.repeat(f[:, None], N, axis=1)
    return phi, xi_field(h, grid)

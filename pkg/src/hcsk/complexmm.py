"""Linear complex moment map sum_ab d_a d_b xi^{ab} = 0 on the 2-torus.

Mode by mode the equation reads k1^2 xi11 + 2 k1 k2 xi12 + k2^2 xi22 = 0.  On
the grid the mixed coefficient uses the first-derivative wavenumbers, which
drop the Nyquist mode, so every statement here is exact for the discrete
operator and not only for resolved modes.
"""

import numpy as np

from .errors import AntisymmetryViolated, ModeObstructed
from .torus import (
    _wavenumbers,
    derivative_symbol,
    double_divergence,
    hessian,
    spectral_derivative,
)

WEIGHTS = np.array([1.0, 2.0, 1.0])
_PAIRS = ((0, 0), (0, 1), (1, 1))


def residual_complex(xi):
    return double_divergence(np.asarray(xi, dtype=complex))


def mode_constraint(k, xi_k):
    k1, k2 = k
    xi_k = np.asarray(xi_k)
    if xi_k.shape == (2, 2):
        a, b, c = xi_k[0, 0], xi_k[0, 1], xi_k[1, 1]
    else:
        a, b, c = xi_k
    return k1 * k1 * a + 2 * k1 * k2 * b + k2 * k2 * c


def _kappa(N):
    """Discrete constraint coefficients (kappa11, kappa12, kappa22) per mode."""
    s = [[derivative_symbol(N, 2, (a, b)).real / -(2 * np.pi) ** 2 for b in range(2)]
         for a in range(2)]
    return np.stack([s[0][0], s[0][1], s[1][1]])


def to_modes(xi):
    """(3, N, N) Fourier coefficients of (xi11, xi12, xi22), normalised so the field is their sum."""
    xi = np.asarray(xi, dtype=complex)
    N = xi.shape[0]
    return np.stack([np.fft.fft2(xi[..., a, b]) for a, b in _PAIRS]) / N**2


def from_modes(V):
    N = V.shape[-1]
    out = np.empty((N, N, 2, 2), dtype=complex)
    for (a, b), v in zip(_PAIRS, V):
        f = np.fft.ifft2(v * N**2)
        out[..., a, b] = f
        out[..., b, a] = f
    return out


def wave_vectors(N):
    k = _wavenumbers(N).astype(int)
    return np.meshgrid(k, k, indexing="ij")


def fourier_project(xi):
    """L^2-orthogonal projection onto the discrete kernel of the complex moment map."""
    xi = np.asarray(xi, dtype=complex)
    V = to_modes(xi)
    kap = _kappa(xi.shape[0])
    c = kap * WEIGHTS[:, None, None]
    norm = np.sum(c * kap, axis=0)
    cv = np.sum(c * V, axis=0)
    coef = np.zeros_like(cv)
    nz = norm > 0
    coef[nz] = cv[nz] / norm[nz]
    return from_modes(V - coef * kap)


def check_antisymmetric(T, tol=1e-12):
    T = np.asarray(T)
    err = np.max(np.abs(T + np.swapaxes(T, -1, -2)))
    if err > tol * max(1.0, float(np.max(np.abs(T)))):
        raise AntisymmetryViolated(f"|T^abc + T^acb| up to {err:.3g}")


def from_T_tensor(T):
    """xi^{ab} = d_c T^{abc} + d_c T^{bac} for T of shape (N, N, 2, 2, 2), antisymmetric in b, c.

    Nyquist modes of T are removed first: there the grid operators for d_a d_b
    and d_a d_c no longer commute with the antisymmetry.
    """
    T = np.asarray(T, dtype=complex)
    check_antisymmetric(T)
    N = T.shape[0]
    keep = np.ones(N, dtype=bool)
    keep[N // 2] = False
    mask = (keep[:, None] & keep[None, :])[..., None, None, None]
    T = np.fft.ifft2(np.fft.fft2(T, axes=(0, 1)) * mask, axes=(0, 1))
    D = np.empty(T.shape, dtype=complex)
    for c in range(2):
        D[..., c] = spectral_derivative(T[..., c], (c,), n=2)
    div = D.sum(axis=-1)
    return div + np.swapaxes(div, -1, -2)


def det_linearization_solve(xi0, f, tol=1e-12):
    """Minimal-norm kernel field xi with Tr(adj(xi0) xi) = f at every node.

    Raises ModeObstructed(k) when a mode with nonzero f_k admits no solution.
    """
    xi0 = np.asarray(xi0, dtype=complex)
    alpha, beta, gamma = xi0[0, 0], 0.5 * (xi0[0, 1] + xi0[1, 0]), xi0[1, 1]
    f = np.asarray(f, dtype=complex)
    N = f.shape[0]
    fk = np.fft.fft2(f) / N**2
    kap = _kappa(N)
    c = kap * WEIGHTS[:, None, None]
    a = np.array([gamma, -2.0 * beta, alpha])[:, None, None] * np.ones((1, N, N))
    winv = (1.0 / WEIGHTS)[:, None, None]
    g11 = np.sum(c * winv * c, axis=0)
    g12 = np.sum(c * winv * np.conj(a), axis=0)
    g22 = np.sum(np.abs(a) ** 2 * winv, axis=0).real
    det = g11 * g22 - np.abs(g12) ** 2
    fscale = max(float(np.max(np.abs(fk))), 1e-300)
    zero_c = g11 == 0
    degenerate = np.where(zero_c, g22 <= tol * (1 + g22), np.abs(det) <= tol * g11 * g22)
    live = np.abs(fk) > tol * fscale
    bad = degenerate & live
    if bad.any():
        k1, k2 = wave_vectors(N)
        idx = tuple(np.argwhere(bad)[0])
        raise ModeObstructed((k1[idx], k2[idx]))
    ok = ~degenerate
    lam1 = np.zeros_like(fk)
    lam2 = np.zeros_like(fk)
    # rows (c, a), right-hand side (0, f_k): Gram solve
    two = ok & ~zero_c
    lam1[two] = -g12[two] * fk[two] / det[two]
    lam2[two] = g11[two] * fk[two] / det[two]
    one = ok & zero_c
    lam2[one] = fk[one] / g22[one]
    V = winv * (c * lam1 + np.conj(a) * lam2)
    return from_modes(V)


def integrability_defect(phi, xi):
    """max |d_c H_ab - d_a H_cb| with H = G xi G."""
    G = hessian(phi)
    Hm = G @ np.asarray(xi, dtype=complex) @ G
    dH = np.empty((2,) + Hm.shape, dtype=complex)
    for c in range(2):
        dH[c] = spectral_derivative(Hm, (c,), n=2)
    # dH[c, ..., a, b] vs dH[a, ..., c, b]
    worst = 0.0
    for c in range(2):
        for a in range(2):
            for b in range(2):
                worst = max(worst, float(np.max(np.abs(dH[c][..., a, b] - dH[a][..., c, b]))))
    return worst


def modes_table(xi, tol=0.0):
    """Rows (k1, k2, xi11, xi12, xi22) for modes with any coefficient above ``tol``."""
    V = to_modes(xi)
    k1, k2 = wave_vectors(V.shape[-1])
    rows = []
    for idx in np.ndindex(V.shape[1:]):
        v = V[(slice(None),) + idx]
        if np.max(np.abs(v)) > tol:
            rows.append((int(k1[idx]), int(k2[idx]), complex(v[0]), complex(v[1]), complex(v[2])))
    return rows


def from_modes_table(rows, N):
    V = np.zeros((3, N, N), dtype=complex)
    for k1, k2, a, b, c in rows:
        if not (-N // 2 <= k1 < N // 2 and -N // 2 <= k2 < N // 2):
            raise ValueError(f"mode ({k1}, {k2}) not resolved at N={N}")
        V[:, k1 % N, k2 % N] = (a, b, c)
    return from_modes(V)

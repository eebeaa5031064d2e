"""Periodic fields on the unit torus with pseudo-spectral derivatives.

Fields are numpy arrays whose leading ``n`` axes index grid nodes, y^a = i_a / N
(``indexing='ij'``); matrix fields carry two trailing axes.  Axis numbers in
derivative multi-indices are 0-based, so axis 0 is y^1.

Per-axis derivative multipliers are (2 pi i k)^m, with the Nyquist mode
dropped when m is odd.  That keeps every operator real-preserving and
self-adjoint, so discrete gradients are exact derivatives of discrete energies.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import NotConvex


@dataclass(frozen=True)
class TorusGrid:
    N: int = 64
    n: int = 2

    def __post_init__(self):
        N = self.N
        if N < 8 or N & (N - 1):
            raise ValueError(f"N must be a power of two >= 8, got {N}")
        if self.n not in (1, 2, 3):
            raise ValueError(f"n must be 1, 2 or 3, got {self.n}")

    @property
    def h(self):
        return 1.0 / self.N

    @property
    def shape(self):
        return (self.N,) * self.n

    def coords(self):
        y = np.arange(self.N) / self.N
        return np.meshgrid(*([y] * self.n), indexing="ij")

    def zeros(self):
        return np.zeros(self.shape)

    @classmethod
    def of(cls, field, n=2):
        N = field.shape[0]
        if field.shape[:n] != (N,) * n:
            raise ValueError(f"field shape {field.shape} is not an n={n} grid")
        return cls(N, n)


@lru_cache(maxsize=None)
def _wavenumbers(N):
    return np.fft.fftfreq(N, 1.0 / N)


@lru_cache(maxsize=None)
def _axis_multiplier(N, order):
    k = _wavenumbers(N)
    m = (2j * np.pi * k) ** order
    if order % 2 == 1:
        m = m.copy()
        m[N // 2] = 0.0
    return m


def derivative_symbol(N, n, axes):
    """Fourier multiplier of the derivative along the multi-index ``axes``."""
    counts = [0] * n
    for a in axes:
        counts[a] += 1
    sym = np.ones((N,) * n, dtype=complex)
    for a, c in enumerate(counts):
        if c:
            shape = [1] * n
            shape[a] = N
            sym = sym * _axis_multiplier(N, c).reshape(shape)
    return sym


@lru_cache(maxsize=None)
def second_symbols(N, n):
    """Real multipliers s[a][b] of d_a d_b (read-only, cached)."""
    out = np.empty((n, n) + (N,) * n)
    for a in range(n):
        for b in range(n):
            out[a, b] = derivative_symbol(N, n, (a, b)).real
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def bilaplacian_symbol(N, n):
    """Multiplier of sum_ab d_a d_b d_a d_b, the discrete Delta^2."""
    s = second_symbols(N, n)
    out = np.sum(s * s, axis=(0, 1))
    out.setflags(write=False)
    return out


def _fft(f, n):
    return np.fft.fftn(f, axes=tuple(range(n)))


def _ifft(F, n):
    return np.fft.ifftn(F, axes=tuple(range(n)))


def spectral_derivative(f, axes, n=None):
    """Derivative of a periodic field along a multi-index of at most 4 axes."""
    f = np.asarray(f)
    n = f.ndim if n is None else n
    axes = tuple(axes)
    if len(axes) > 4:
        raise ValueError("at most four derivative axes")
    if any(a < 0 or a >= n for a in axes):
        raise ValueError(f"axes {axes} out of range for n={n}")
    N = f.shape[0]
    sym = derivative_symbol(N, n, axes)
    sym = sym.reshape(sym.shape + (1,) * (f.ndim - n))
    out = _ifft(_fft(f, n) * sym, n)
    return out if np.iscomplexobj(f) else out.real


def hessian_of(f, n=2):
    """D^2 f as an (N,...,N,n,n) field."""
    f = np.asarray(f)
    N = f.shape[0]
    F = _fft(f, n)
    s = second_symbols(N, n)
    out = np.empty(f.shape + (n, n), dtype=np.result_type(f.dtype, float))
    for a in range(n):
        for b in range(a, n):
            v = _ifft(F * s[a, b], n)
            v = v if np.iscomplexobj(f) else v.real
            out[..., a, b] = v
            out[..., b, a] = v
    return out


def hessian(phi, check=True):
    """G = 1 + D^2 phi; raises NotConvex at the first node where G is not positive definite."""
    phi = np.asarray(phi, dtype=float)
    n = phi.ndim
    G = hessian_of(phi, n) + np.eye(n)
    if check:
        bad = np.linalg.eigvalsh(G)[..., 0] <= 0
        if bad.any():
            node = tuple(int(i) for i in np.argwhere(bad)[0])
            raise NotConvex(node, "(D^2 u not positive definite)")
    return G


def double_divergence(A, n=None):
    """sum_ab d_a d_b A^{ab} for a matrix field A of shape (N,...,N,n,n)."""
    A = np.asarray(A)
    n = A.shape[-1] if n is None else n
    N = A.shape[0]
    s = second_symbols(N, n)
    acc = np.zeros((N,) * n, dtype=complex)
    for a in range(n):
        for b in range(n):
            acc += s[a, b] * _fft(A[..., a, b], n)
    out = _ifft(acc, n)
    return out if np.iscomplexobj(A) else out.real


def spec_rad_max(phi, xi):
    """(max spectral radius of xi G conj(xi) G, max of its trace) over all nodes."""
    G = hessian(phi)
    fr = kernels.frame(G, np.broadcast_to(xi, G.shape))
    return float(fr.delta.max()), float(fr.delta.sum(axis=-1).max())


def mean_zero(f):
    return f - f.mean()


def l2_norm(f):
    """sqrt(mean |f|^2), the L^2 norm for the unit-volume torus measure."""
    return float(np.sqrt(np.mean(np.abs(f) ** 2)))


def mode_norm(f, n=None):
    """The same norm computed from Fourier coefficients (Parseval)."""
    f = np.asarray(f)
    n = f.ndim if n is None else n
    F = _fft(f, n) / f.shape[0] ** n
    return float(np.sqrt(np.sum(np.abs(F) ** 2)))


def dealias(f, n=None):
    """Zero modes outside the 2/3 band |k_a| < N/3."""
    f = np.asarray(f)
    n = f.ndim if n is None else n
    N = f.shape[0]
    keep = np.abs(_wavenumbers(N)) < N / 3.0
    mask = np.ones((N,) * n, dtype=bool)
    for a in range(n):
        shape = [1] * n
        shape[a] = N
        mask = mask & keep.reshape(shape)
    mask = mask.reshape(mask.shape + (1,) * (f.ndim - n))
    out = _ifft(_fft(f, n) * mask, n)
    return out if np.iscomplexobj(f) else out.real


def antiderivative2(g, axis=0, n=None):
    """Zero-mean f with d_axis^2 f = g - mean(g) (Fourier inverse of the second derivative)."""
    g = np.asarray(g)
    n = g.ndim if n is None else n
    N = g.shape[0]
    sym = derivative_symbol(N, n, (axis, axis))
    inv = np.zeros_like(sym)
    nz = sym != 0
    inv[nz] = 1.0 / sym[nz]
    out = _ifft(_fft(g, n) * inv, n)
    return out if np.iscomplexobj(g) else out.real

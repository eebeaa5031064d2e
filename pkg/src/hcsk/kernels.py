"""Pointwise matrix kernels over all grid nodes.

Inputs are stacks G (P, n, n) real and xi (P, n, n) complex.  The numba path is
specialised to n = 2 (closed-form Hermitian eigen-data); the numpy path uses
batched ``eigh`` and works for any n.  Both return the same quantities.
"""

from collections import namedtuple

import numpy as np

from . import _backend
from ._backend import njit, prange
from .errors import NegativeEigenvalue, NotConvex, SpectralRadiusExceeded

CLAMP_TOL = 1e-12

# delta ascending, M = Q diag(delta) Qinv, Ginv = G^{-1}, logdet = log det G
Frame = namedtuple("Frame", "delta Q Qinv Ginv logdet")


def _mm(A, B):
    return np.matmul(A, B)


def _herm(A):
    return np.conj(np.swapaxes(A, -1, -2))


# ---------------------------------------------------------------- numpy path

def _frame_numpy(G, X):
    lam, U = np.linalg.eigh(G)
    bad = lam[:, 0] <= 0
    if bad.any():
        return None, np.flatnonzero(bad)
    r = np.sqrt(lam)
    Ut = np.swapaxes(U, -1, -2)
    W = _mm(U * r[:, None, :], Ut)
    Winv = _mm(U / r[:, None, :], Ut)
    N = _mm(_mm(W, X), W)
    A = _mm(N, _herm(N))
    A = 0.5 * (A + _herm(A))
    delta, V = np.linalg.eigh(A)
    Q = _mm(Winv, V)
    Qinv = _mm(_herm(V), W)
    Ginv = _mm(Winv, Winv)
    logdet = np.sum(np.log(lam), axis=1)
    return Frame(delta, Q, Qinv, Ginv, logdet), None


def _tensor_derivative_numpy(G, X, Q, Qinv, s, Ginv, T, Gdot):
    Xb = np.conj(X)
    Mdot = _mm(_mm(_mm(X, Gdot), Xb), G) + _mm(_mm(_mm(X, G), Xb), Gdot)
    K = _mm(_mm(Qinv, Mdot), Q)
    K = K * (-1.0 / (s[:, :, None] + s[:, None, :]))
    dS = _mm(_mm(Q, K), Qinv)
    return _mm(dS, Ginv) - _mm(_mm(T, Gdot), Ginv)


# ---------------------------------------------------------------- numba path

@njit(cache=True, parallel=True)
def _frame_numba(G, X, delta, Q, Qinv, Ginv, logdet, status):
    P = G.shape[0]
    for p in prange(P):
        g11 = G[p, 0, 0]
        g12 = 0.5 * (G[p, 0, 1] + G[p, 1, 0])
        g22 = G[p, 1, 1]
        dg = g11 * g22 - g12 * g12
        if not (g11 > 0.0 and dg > 0.0):
            status[p] = 1
            continue
        status[p] = 0
        logdet[p] = np.log(dg)
        Ginv[p, 0, 0] = g22 / dg
        Ginv[p, 0, 1] = -g12 / dg
        Ginv[p, 1, 0] = -g12 / dg
        Ginv[p, 1, 1] = g11 / dg
        # closed-form square root of a 2x2 SPD matrix
        sd = np.sqrt(dg)
        t = np.sqrt(g11 + g22 + 2.0 * sd)
        w11 = (g11 + sd) / t
        w12 = g12 / t
        w22 = (g22 + sd) / t
        dw = w11 * w22 - w12 * w12
        i11 = w22 / dw
        i12 = -w12 / dw
        i22 = w11 / dw
        x11 = X[p, 0, 0]
        x12 = 0.5 * (X[p, 0, 1] + X[p, 1, 0])
        x22 = X[p, 1, 1]
        # N = W xi W
        a11 = w11 * x11 + w12 * x12
        a12 = w11 * x12 + w12 * x22
        a21 = w12 * x11 + w22 * x12
        a22 = w12 * x12 + w22 * x22
        n11 = a11 * w11 + a12 * w12
        n12 = a11 * w12 + a12 * w22
        n21 = a21 * w11 + a22 * w12
        n22 = a21 * w12 + a22 * w22
        # A = N N^*
        a = (n11 * n11.conjugate() + n12 * n12.conjugate()).real
        d = (n21 * n21.conjugate() + n22 * n22.conjugate()).real
        b = n11 * n21.conjugate() + n12 * n22.conjugate()
        detn = n11 * n22 - n12 * n21
        half = 0.5 * (a - d)
        r = np.sqrt(half * half + (b * b.conjugate()).real)
        lam2 = 0.5 * (a + d) + r
        if lam2 > 0.0:
            lam1 = (detn * detn.conjugate()).real / lam2
        else:
            lam1 = 0.0
        delta[p, 0] = lam1
        delta[p, 1] = lam2
        # eigenvector of lam1: the better conditioned of two candidate columns
        u1 = b
        u2 = lam1 - a + 0j
        v1 = lam1 - d + 0j
        v2 = b.conjugate()
        nu = (u1 * u1.conjugate() + u2 * u2.conjugate()).real
        nv = (v1 * v1.conjugate() + v2 * v2.conjugate()).real
        if nu >= nv:
            e1, e2, nn = u1, u2, nu
        else:
            e1, e2, nn = v1, v2, nv
        if nn > 0.0:
            nn = np.sqrt(nn)
            e1 = e1 / nn
            e2 = e2 / nn
        else:
            e1 = 1.0 + 0j
            e2 = 0.0 + 0j
        f1 = -e2.conjugate()
        f2 = e1.conjugate()
        # Q = W^{-1} V, Qinv = V^* W, V = [[e1, f1], [e2, f2]]
        Q[p, 0, 0] = i11 * e1 + i12 * e2
        Q[p, 1, 0] = i12 * e1 + i22 * e2
        Q[p, 0, 1] = i11 * f1 + i12 * f2
        Q[p, 1, 1] = i12 * f1 + i22 * f2
        c1 = e1.conjugate()
        c2 = e2.conjugate()
        Qinv[p, 0, 0] = c1 * w11 + c2 * w12
        Qinv[p, 0, 1] = c1 * w12 + c2 * w22
        c1 = f1.conjugate()
        c2 = f2.conjugate()
        Qinv[p, 1, 0] = c1 * w11 + c2 * w12
        Qinv[p, 1, 1] = c1 * w12 + c2 * w22


@njit(cache=True)
def _mul2(A, B, C):
    for i in range(2):
        for j in range(2):
            C[i, j] = A[i, 0] * B[0, j] + A[i, 1] * B[1, j]


@njit(cache=True, parallel=True)
def _tensor_derivative_numba(G, X, Q, Qinv, s, Ginv, T, Gdot, out):
    P = G.shape[0]
    for p in prange(P):
        Xb = np.conj(X[p])
        t1 = np.empty((2, 2), dtype=np.complex128)
        t2 = np.empty((2, 2), dtype=np.complex128)
        Md = np.empty((2, 2), dtype=np.complex128)
        Gd = Gdot[p].astype(np.complex128)
        Gc = G[p].astype(np.complex128)
        Gi = Ginv[p].astype(np.complex128)
        # Mdot = X Gd Xb G + X G Xb Gd
        _mul2(X[p], Gd, t1)
        _mul2(t1, Xb, t2)
        _mul2(t2, Gc, Md)
        _mul2(X[p], Gc, t1)
        _mul2(t1, Xb, t2)
        _mul2(t2, Gd, t1)
        for i in range(2):
            for j in range(2):
                Md[i, j] += t1[i, j]
        _mul2(Qinv[p], Md, t1)
        _mul2(t1, Q[p], t2)
        for i in range(2):
            for j in range(2):
                t2[i, j] *= -1.0 / (s[p, i] + s[p, j])
        _mul2(Q[p], t2, t1)
        _mul2(t1, Qinv[p], t2)
        _mul2(t2, Gi, t1)
        _mul2(T[p], Gd, t2)
        _mul2(t2, Gi, Md)
        for i in range(2):
            for j in range(2):
                out[p, i, j] = t1[i, j] - Md[i, j]


# ---------------------------------------------------------------- dispatch

def _flatten(G, X):
    n = G.shape[-1]
    shape = G.shape[:-2]
    Gf = np.ascontiguousarray(G, dtype=np.float64).reshape(-1, n, n)
    Xf = np.ascontiguousarray(X, dtype=np.complex128).reshape(-1, n, n)
    return Gf, Xf, shape


def _use_numba(n):
    return _backend.active() == "numba" and n == 2


def frame(G, X):
    """Eigen-data of xi G conj(xi) G at every node.

    Raises NotConvex if G fails positive definiteness at some node and
    NegativeEigenvalue for eigenvalues below -1e-12 (others are clamped to 0).
    """
    Gf, Xf, shape = _flatten(G, X)
    n = Gf.shape[-1]
    if _use_numba(n):
        P = Gf.shape[0]
        delta = np.zeros((P, 2))
        Q = np.zeros((P, 2, 2), dtype=np.complex128)
        Qinv = np.zeros((P, 2, 2), dtype=np.complex128)
        Ginv = np.zeros((P, 2, 2))
        logdet = np.zeros(P)
        status = np.zeros(P, dtype=np.int64)
        _frame_numba(Gf, Xf, delta, Q, Qinv, Ginv, logdet, status)
        bad = np.flatnonzero(status)
        fr = None if bad.size else Frame(delta, Q, Qinv, Ginv, logdet)
    else:
        fr, bad = _frame_numpy(Gf, Xf)
    if fr is None:
        node = np.unravel_index(int(bad[0]), shape) if shape else ()
        raise NotConvex(tuple(int(i) for i in node), "(D^2 u not positive definite)")
    dmin = fr.delta.min()
    if dmin < -CLAMP_TOL:
        raise NegativeEigenvalue(f"eigenvalue {dmin:.3g}")
    np.maximum(fr.delta, 0.0, out=fr.delta)
    return fr


def check_admissible(fr, margin=0.0):
    dmax = float(fr.delta.max())
    if dmax >= 1.0 - margin:
        raise SpectralRadiusExceeded(dmax, where=int(np.argmax(fr.delta.max(axis=1))))
    return dmax


def apply_diag(fr, values):
    """Q diag(values) Qinv per node."""
    return _mm(fr.Q * values[:, None, :], fr.Qinv)


def moment_tensor(fr):
    """(1 - M)^{1/2} G^{-1} per node; Hermitian."""
    s = np.sqrt(1.0 - fr.delta)
    return _mm(apply_diag(fr, s), fr.Ginv)


def rho_density(fr):
    s = np.sqrt(1.0 - fr.delta)
    d = fr.delta
    return np.sum(d / (1.0 + s) + np.log1p(-d / (2.0 * (1.0 + s))), axis=1)


def hat_tensor(fr, G, X):
    """alpha-check xi G conj(xi) per node, with alpha-check = 1/2 (1 + S)^{-1}."""
    Gf, Xf, _ = _flatten(G, X)
    s = np.sqrt(1.0 - fr.delta)
    alpha = apply_diag(fr, 0.5 / (1.0 + s))
    return _mm(_mm(_mm(alpha, Xf), Gf), np.conj(Xf))


class Linearization:
    """Directional derivative of (1 - M)^{1/2} G^{-1} with respect to G.

    Daleckii-Krein in the eigenbasis of M with the closed-form divided
    difference -1/(s_i + s_j) of sqrt(1 - x); valid for coincident eigenvalues.
    """

    def __init__(self, G, X, fr=None):
        self.G, self.X, self.shape = _flatten(G, X)
        self.fr = fr if fr is not None else frame(G, X)
        self.s = np.sqrt(1.0 - self.fr.delta)
        self.T = moment_tensor(self.fr)

    def __call__(self, Gdot):
        n = self.G.shape[-1]
        Gd = np.ascontiguousarray(Gdot, dtype=np.float64).reshape(-1, n, n)
        fr = self.fr
        if _use_numba(n):
            out = np.empty(Gd.shape, dtype=np.complex128)
            _tensor_derivative_numba(self.G, self.X, fr.Q, fr.Qinv, self.s, fr.Ginv,
                                     self.T, Gd, out)
            return out
        return _tensor_derivative_numpy(self.G, self.X, fr.Q, fr.Qinv, self.s, fr.Ginv,
                                        self.T, Gd)

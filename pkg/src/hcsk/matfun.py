"""Pointwise calculus for M = xi G conj(xi) G.

Here G is real symmetric positive definite and xi complex symmetric.
M is similar to the Hermitian matrix N N*, N = W xi W, W = G^{1/2}, so every
spectral function is evaluated as f(M) = W^{-1} f(N N*) W.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSpectrum,
    NegativeEigenvalue,
    NonPositiveDefinite,
    SpectralRadiusExceeded,
)

CLAMP_TOL = 1e-12
GAP_THRESHOLD = 1e-8


@dataclass(frozen=True)
class Spectrum:
    """Eigen-data of M = xi G conj(xi) G.

    ``transform`` is Q with M = Q diag(delta) Q^{-1}; ``inverse`` holds Q^{-1}.
    """

    delta: np.ndarray
    transform: np.ndarray
    inverse: np.ndarray
    whitener: np.ndarray
    G: np.ndarray
    xi: np.ndarray

    @property
    def M(self):
        return self.transform @ np.diag(self.delta) @ self.inverse

    def apply(self, values):
        """Q diag(values) Q^{-1}."""
        return (self.transform * np.asarray(values)) @ self.inverse

    def min_gap(self):
        d = self.delta
        if d.size < 2:
            return np.inf
        return float(np.min(np.abs(d[:, None] - d[None, :])[~np.eye(d.size, dtype=bool)]))


def _as_spd(G):
    G = np.asarray(G, dtype=float)
    G = 0.5 * (G + G.T)
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise NonPositiveDefinite("G failed Cholesky factorisation") from None
    return G


def _as_sym(xi):
    xi = np.asarray(xi, dtype=complex)
    return 0.5 * (xi + xi.T)


def sqrtm_spd(G):
    """Return (G^{1/2}, G^{-1/2}) for symmetric positive definite G."""
    lam, V = np.linalg.eigh(G)
    if lam[0] <= 0:
        raise NonPositiveDefinite("G has a non-positive eigenvalue")
    r = np.sqrt(lam)
    return (V * r) @ V.T, (V / r) @ V.T


def spectrum(G, xi):
    G = _as_spd(G)
    xi = _as_sym(xi)
    W, Winv = sqrtm_spd(G)
    N = W @ xi @ W
    A = N @ N.conj().T
    A = 0.5 * (A + A.conj().T)
    delta, V = np.linalg.eigh(A)
    if delta[0] < -CLAMP_TOL:
        raise NegativeEigenvalue(f"eigenvalue {delta[0]:.3g} of N N*")
    delta = np.where(delta < 0, 0.0, delta)
    return Spectrum(delta=delta, transform=Winv @ V, inverse=V.conj().T @ W,
                    whitener=W, G=G, xi=xi)


def _check_admissible(delta):
    dmax = float(np.max(delta))
    if dmax >= 1.0:
        raise SpectralRadiusExceeded(dmax)


def _root(delta):
    return np.sqrt(1.0 - np.asarray(delta, dtype=float))


# scalar spectral function and its derivatives

def rho_terms(delta):
    """1 - sqrt(1-d) + log((1+sqrt(1-d))/2), written without cancellation."""
    delta = np.asarray(delta, dtype=float)
    s = _root(delta)
    return delta / (1.0 + s) + np.log1p(-delta / (2.0 * (1.0 + s)))


def rho_prime(delta):
    return 0.5 / (1.0 + _root(delta))


def rho_second(delta):
    s = _root(delta)
    return 0.25 / (s * (1.0 + s) ** 2)


def rho_prime_divided(a, b):
    """Divided difference of rho_prime; equals rho_second on the diagonal."""
    sa, sb = _root(a), _root(b)
    return 0.5 / ((1.0 + sa) * (1.0 + sb) * (sa + sb))


def bg_rho(s):
    """Spectral function rho(M) = sum of rho_terms over the eigenvalues."""
    delta = s.delta if isinstance(s, Spectrum) else np.asarray(s, dtype=float)
    _check_admissible(delta)
    return float(np.sum(rho_terms(delta)))


def hat_transform(G, xi):
    """alpha-check = 1/2 (1 + (1 - M)^{1/2})^{-1}."""
    s = spectrum(G, xi)
    _check_admissible(s.delta)
    return s.apply(rho_prime(s.delta))


def sqrt_one_minus(G, xi):
    s = spectrum(G, xi)
    _check_admissible(s.delta)
    return s.apply(_root(s.delta))


def positivity_certificate(G, xi):
    """Smallest eigenvalue of the Hermitian part of (1-M)^{1/2} G^{-1}.

    Also returns the size of its anti-Hermitian part.
    """
    T = sqrt_one_minus(G, xi) @ np.linalg.inv(_as_spd(G))
    H = 0.5 * (T + T.conj().T)
    return float(np.linalg.eigvalsh(H)[0]), float(np.max(np.abs(T - H)))


def takagi(N):
    """Takagi factorisation N = U diag(D) U^T of a complex symmetric matrix.

    SVD N = V diag(D) W^*, then the left factor is corrected by the square root
    of the symmetric unitary V^* conj(W), which commutes with diag(D).
    """
    N = np.asarray(N, dtype=complex)
    V, D, Wh = np.linalg.svd(N)
    Phi = V.conj().T @ Wh.T
    return V @ _unitary_symmetric_sqrt(0.5 * (Phi + Phi.T)), D


def _unitary_symmetric_sqrt(Phi):
    """Symmetric square root of a symmetric unitary matrix as a function of it.

    Re(Phi) and Im(Phi) commute, so a real orthogonal O diagonalises both; a
    generic real combination finds it.  sqrtm is avoided because it may pick a
    non-primary root when Phi has eigenvalue -1 (e.g. Phi = -1).
    """
    n = Phi.shape[0]
    for c in (np.sqrt(2.0), np.pi, np.e):
        _, O = np.linalg.eigh(Phi.real + c * Phi.imag)
        E = O.T @ Phi @ O
        off = np.abs(E - np.diag(np.diag(E))).max() if n > 1 else 0.0
        if off <= 1e-12:
            break
    theta = np.angle(np.diag(E))
    return (O * np.exp(0.5j * theta)) @ O.T


def shifted_pseudoinverse(s, i, threshold=GAP_THRESHOLD):
    gap = s.min_gap()
    if gap < threshold:
        raise DegenerateSpectrum(gap)
    d = s.delta
    diff = d[i] - d
    diff[i] = 1.0
    inv = 1.0 / diff
    inv[i] = 0.0
    return s.apply(inv)


def projector(s, i):
    return np.outer(s.transform[:, i], s.inverse[i, :])


def _m_derivatives(G, Gdot, xi):
    xib = xi.conj()
    Mdot = xi @ Gdot @ xib @ G + xi @ G @ xib @ Gdot
    Mddot = 2.0 * xi @ Gdot @ xib @ Gdot
    return Mdot, Mddot


def eig_first_variation(G, Gdot, xi):
    s = spectrum(G, xi)
    Mdot, _ = _m_derivatives(s.G, np.asarray(Gdot, dtype=float), s.xi)
    return np.real(np.diag(s.inverse @ Mdot @ s.transform))


def eig_second_variation(G, Gdot, xi, threshold=GAP_THRESHOLD):
    """Second t-derivative of each eigenvalue along G + t Gdot."""
    s = spectrum(G, xi)
    Gdot = np.asarray(Gdot, dtype=float)
    Mdot, Mddot = _m_derivatives(s.G, Gdot, s.xi)
    n = s.delta.size
    eye = np.eye(n)
    out = np.empty(n)
    for i in range(n):
        P = projector(s, i)
        R = shifted_pseudoinverse(s, i, threshold)
        C = eye - P
        out[i] = np.real(np.trace(P @ Mddot) + 2.0 * np.trace(P @ Mdot @ C @ R @ C @ Mdot))
    return out


def rho_second_variation_two_trace(G, Gdot, xi, threshold=GAP_THRESHOLD):
    """sum_i rho'(d_i) d_i'' as a trace of (1+S)^{-1} xi Gdot conj(xi) Gdot plus pseudoinverse terms."""
    s = spectrum(G, xi)
    _check_admissible(s.delta)
    Gdot = np.asarray(Gdot, dtype=float)
    Mdot, _ = _m_derivatives(s.G, Gdot, s.xi)
    root = _root(s.delta)
    inv_one_plus_S = s.apply(1.0 / (1.0 + root))
    total = np.trace(inv_one_plus_S @ s.xi @ Gdot @ s.xi.conj() @ Gdot)
    eye = np.eye(s.delta.size)
    for i in range(s.delta.size):
        P = projector(s, i)
        C = eye - P
        R = shifted_pseudoinverse(s, i, threshold)
        total += np.trace(P @ Mdot @ C @ R @ C @ Mdot) / (1.0 + root[i])
    return float(np.real(total))


def hessian_quadratic_form(G, Gdot, xi, threshold=GAP_THRESHOLD):
    """d^2/dt^2 of [-log det G_t + rho(M_t)] at t=0 with G_t = G + t Gdot.

    Distinct spectra use the eigenvalue second-variation formula; near
    coincidence the divided-difference form of the same quantity is used.
    """
    s = spectrum(G, xi)
    _check_admissible(s.delta)
    Gdot = np.asarray(Gdot, dtype=float)
    Ginv = np.linalg.inv(s.G)
    metric = float(np.trace(Ginv @ Gdot @ Ginv @ Gdot))
    Mdot, Mddot = _m_derivatives(s.G, Gdot, s.xi)
    if s.min_gap() >= threshold:
        d1 = np.real(np.diag(s.inverse @ Mdot @ s.transform))
        d2 = eig_second_variation(G, Gdot, xi, threshold)
        return metric + float(rho_prime(s.delta) @ d2 + rho_second(s.delta) @ d1**2)
    K = s.inverse @ Mdot @ s.transform
    L = s.inverse @ Mddot @ s.transform
    dd = rho_prime_divided(s.delta[:, None], s.delta[None, :])
    return metric + float(np.real(rho_prime(s.delta) @ np.diag(L) + np.sum(dd * K * K.T)))


def sum_ab_coefficients(delta):
    """Pair coefficients of the real/imaginary parts of R in the convexity sum.

    Returns (diag, A, B): diag[i] multiplies A_ii^2, A[i, j] and B[i, j] (i < j)
    multiply A_ij^2 and B_ij^2.  Both are written in cancellation-free form.
    """
    delta = np.asarray(delta, dtype=float)
    x = np.sqrt(delta)
    s = _root(delta)
    n = delta.size
    diag = 1.0 + delta / (1.0 + s)
    A = np.zeros((n, n))
    B = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            den = x[i] * s[j] + x[j] * s[i]
            if x[i] + x[j] == 0.0:
                A[i, j] = B[i, j] = 2.0
                continue
            # 2 (x_i s_j - x_j s_i)/(x_i - x_j) rationalised
            A[i, j] = 2.0 * (x[i] + x[j]) / den
            B[i, j] = 2.0 * den / (x[i] + x[j])
    return diag, A, B


def convexity_terms(G, Gdot, xi):
    """Split the Hessian integrand into the Takagi-frame quadratic sum plus the D^2 rho term.

    R = Q^T Gdot conj(Q) with Q = W^{-1} U from the Takagi factor of W xi W.
    """
    G = _as_spd(G)
    xi = _as_sym(xi)
    Gdot = np.asarray(Gdot, dtype=float)
    W, Winv = sqrtm_spd(G)
    U, D = takagi(W @ xi @ W)
    delta = D**2
    _check_admissible(delta)
    Q = Winv @ U
    R = Q.T @ Gdot @ Q.conj()
    diag, Ac, Bc = sum_ab_coefficients(delta)
    Are, Bim = R.real, R.imag
    quad = float(diag @ np.diag(Are) ** 2 + np.sum(Ac * Are**2) + np.sum(Bc * Bim**2))
    s = spectrum(G, xi)
    Mdot, _ = _m_derivatives(s.G, Gdot, s.xi)
    d1 = np.real(np.diag(s.inverse @ Mdot @ s.transform))
    third = float(rho_second(s.delta) @ d1**2)
    return {"delta": delta, "R": R, "diag": diag, "A": Ac, "B": Bc,
            "quadratic": quad, "third": third, "total": quad + third}

"""Real moment map on the flat torus and the HK-energy continuity solver.

The unknown is the periodic part phi of u = |y|^2/2 + phi, kept at zero mean.
The energy minimised along the path is F + t H with

    F = -1/2 mean(log det G),   H = 1/2 mean(rho(xi G conj(xi) G)),

whose L^2 gradient is -1/2 sum_ab d_a d_b Re[(1-t) G^{-1} + t S G^{-1}]^{ab},
S = (1 - xi G conj(xi) G)^{1/2}.  At t = 1 this is -1/2 times the residual.
"""

from dataclasses import dataclass, field, fields
import logging

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from . import kernels
from .errors import (
    HcskError,
    ImaginaryLeak,
    NoConvergence,
    NotConvex,
    SafeguardViolated,
    SpectralRadiusExceeded,
)
from .torus import (
    bilaplacian_symbol,
    dealias as _dealias,
    double_divergence,
    hessian,
    hessian_of,
)

log = logging.getLogger(__name__)

LEAK_TOL = 1e-6


def _broadcast_xi(xi, G):
    xi = np.asarray(xi, dtype=complex)
    return np.broadcast_to(xi, G.shape)


def _state(phi, xi, margin=0.0):
    G = hessian(phi)
    X = _broadcast_xi(xi, G)
    fr = kernels.frame(G, X)
    kernels.check_admissible(fr, margin)
    return G, X, fr


def residual_real(phi, xi, C=0.0, dealias=False, diagnostics=False):
    """Re sum_ab d_a d_b (S G^{-1})^{ab} + C.

    With ``diagnostics`` the sup-norm of the imaginary part is returned too.
    """
    G, X, fr = _state(phi, xi)
    T = kernels.moment_tensor(fr).reshape(G.shape)
    if dealias:
        T = _dealias(T, n=G.shape[-1])
    div = double_divergence(T)
    leak = float(np.max(np.abs(div.imag)))
    if leak > LEAK_TOL:
        raise ImaginaryLeak(leak)
    res = div.real + C
    return (res, leak) if diagnostics else res


def abreu(phi):
    """sum_ab d_a d_b (G^{-1})^{ab}, the xi = 0 case of the residual."""
    G = hessian(phi)
    return double_divergence(np.linalg.inv(G))


def hk_energy(phi, xi):
    """(F, H, F + H)."""
    G, X, fr = _state(phi, xi)
    F = -0.5 * float(np.mean(fr.logdet))
    H = 0.5 * float(np.mean(kernels.rho_density(fr)))
    return F, H, F + H


def _path_energy(fr, t):
    F = -0.5 * float(np.mean(fr.logdet))
    H = 0.5 * float(np.mean(kernels.rho_density(fr)))
    return F + t * H, F, H


def _path_tensor(fr, t, shape):
    E = t * kernels.moment_tensor(fr)
    if t != 1.0:
        E = E + (1.0 - t) * fr.Ginv
    return E.reshape(shape)


def _gradient_from(fr, t, shape):
    g = -0.5 * double_divergence(_path_tensor(fr, t, shape)).real
    return g - g.mean()


def hk_gradient(phi, xi, t=1.0):
    """L^2 gradient of F + t H, projected to zero mean."""
    G, X, fr = _state(phi, xi)
    return _gradient_from(fr, t, G.shape)


def hk_gradient_split(phi, xi):
    """Same gradient assembled as -1/2 (G^{-1})_{,ab} + Re(alpha-check xi G conj(xi))_{,ab}."""
    G, X, fr = _state(phi, xi)
    hat = kernels.hat_tensor(fr, G, X).reshape(G.shape)
    g = -0.5 * double_divergence(fr.Ginv.reshape(G.shape)).real + double_divergence(hat).real
    return g - g.mean()


class HessianOperator:
    """L^2 Hessian of F + t H at phi, acting on zero-mean scalar fields."""

    def __init__(self, phi, xi, t=1.0, state=None):
        G, X, fr = state if state is not None else _state(phi, xi)
        self.shape = G.shape
        self.t = float(t)
        self.Ginv = fr.Ginv
        self.lin = kernels.Linearization(G, X, fr) if self.t != 0.0 else None

    def tensor_derivative(self, Gdot):
        Gd = Gdot.reshape(self.Ginv.shape)
        dE = -(1.0 - self.t) * (self.Ginv @ Gd @ self.Ginv)
        if self.lin is not None:
            dE = dE + self.t * self.lin(Gd)
        return dE.reshape(self.shape)

    def __call__(self, psi):
        psi = np.asarray(psi, dtype=float)
        n = psi.ndim
        dE = self.tensor_derivative(hessian_of(psi, n))
        out = -0.5 * double_divergence(dE).real
        return out - out.mean()


def hk_hessian_apply(phi, xi, psi, t=1.0):
    return HessianOperator(phi, xi, t)(psi)


def bilaplacian_inverse(f):
    """Inverse of the Hessian at (u0, xi=0), i.e. of 1/2 Delta^2, on nonzero modes."""
    f = np.asarray(f, dtype=float)
    n = f.ndim
    sym = 0.5 * bilaplacian_symbol(f.shape[0], n)
    inv = np.zeros_like(sym)
    nz = sym != 0
    inv[nz] = 1.0 / sym[nz]
    return np.fft.ifftn(np.fft.fftn(f) * inv).real


@dataclass
class SolveOptions:
    N: int = 64
    tol: float = 1e-9
    maxit: int = 50
    eps_s: float = 0.01
    backtrack: float = 0.5
    krylov_tol: float = 1e-10
    dt0: float = 0.25
    dt_min: float = 1.0 / 64
    path_tol: float = 1e-7
    max_backtracks: int = 40
    krylov_maxit: int = 200

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"SolveOptions.{f.name} must be positive")
        if not 0 < self.eps_s < 0.5:
            raise ValueError("eps_s must lie in (0, 0.5)")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        N = int(self.N)
        if N < 8 or N & (N - 1):
            raise ValueError("N must be a power of two >= 8")


@dataclass(frozen=True)
class SolveReport:
    phi: np.ndarray
    residual_sup: float
    grad_sup: float
    energy: tuple
    trace: list
    specrad: float
    steps: int
    records: list = field(default_factory=list, repr=False)

    def summary(self):
        F, H, total = self.energy
        return {
            "residual_sup": self.residual_sup,
            "grad_sup": self.grad_sup,
            "energy": {"F": F, "H": H, "total": total},
            "specrad": self.specrad,
            "continuity_steps": self.steps,
            "trace": self.trace,
        }


class _StepFailure(Exception):
    def __init__(self, kind, detail=""):
        self.kind = kind
        super().__init__(detail)


def _trial_state(phi, X, margin):
    try:
        G = hessian(phi)
        fr = kernels.frame(G, X)
        kernels.check_admissible(fr, margin)
    except (NotConvex, SpectralRadiusExceeded):
        return None
    except HcskError:
        return None
    return G, X, fr


def _newton(phi, X, t, tol, opts, records):
    margin = opts.eps_s
    state = _trial_state(phi, X, margin)
    if state is None:
        raise _StepFailure("safeguard", "start point inadmissible")
    shape = state[0].shape
    energy, _, _ = _path_energy(state[2], t)
    N2 = phi.size

    def prec(v):
        return bilaplacian_inverse(v.reshape(phi.shape)).ravel()

    Mop = LinearOperator((N2, N2), matvec=prec, dtype=float)
    for it in range(opts.maxit + 1):
        g = _gradient_from(state[2], t, shape)
        gnorm = float(np.max(np.abs(g)))
        records.append({"t": t, "iter": it, "grad_norm": gnorm, "energy": energy,
                        "specrad": float(state[2].delta.max())})
        if gnorm <= tol:
            return phi, it, gnorm
        if it == opts.maxit:
            break
        H = HessianOperator(phi, X, t, state=state)
        Aop = LinearOperator((N2, N2), matvec=lambda v: H(v.reshape(phi.shape)).ravel(),
                             dtype=float)
        step, _ = cg(Aop, -g.ravel(), rtol=opts.krylov_tol, atol=0.0,
                     maxiter=opts.krylov_maxit, M=Mop)
        step = step.reshape(phi.shape)
        step -= step.mean()
        slope = float(np.mean(g * step))
        if slope >= 0:
            step, slope = -g, -float(np.mean(g * g))
        alpha = 1.0
        slack = 1e-13 * (1.0 + abs(energy))
        for _ in range(opts.max_backtracks):
            trial = phi + alpha * step
            st = _trial_state(trial, X, margin)
            if st is not None:
                e_trial, _, _ = _path_energy(st[2], t)
                if e_trial <= energy + 1e-4 * alpha * slope + slack:
                    break
            alpha *= opts.backtrack
        else:
            raise _StepFailure("safeguard", f"line search failed at t={t}")
        phi, state, energy = trial, st, e_trial
    raise _StepFailure("maxit", f"Newton did not reach {tol:g} at t={t}")


def solve_continuity(xi, C=0.0, opts=None, phi0=None, records=None):
    """Minimise F + t H for t stepped from 0 to 1, returning the t = 1 minimiser.

    ``xi`` is an (N, N, 2, 2) field or a constant 2x2 matrix (then opts.N sets
    the grid).  ``phi0`` is an optional starting potential.
    """
    opts = opts or SolveOptions()
    if C != 0.0:
        raise ValueError("the periodic equation is solvable only for C = 0")
    xi = np.asarray(xi, dtype=complex)
    N = xi.shape[0] if xi.ndim == 4 else int(opts.N)
    X = np.ascontiguousarray(np.broadcast_to(xi, (N, N, 2, 2)))
    phi = np.zeros((N, N)) if phi0 is None else np.array(phi0, dtype=float)
    phi = phi - phi.mean()
    records = [] if records is None else records
    trace = []

    start = _trial_state(phi, X, opts.eps_s)
    if start is None:
        raise SafeguardViolated(0.0, "(start point outside the admissible set)")

    def finish(phi, steps):
        G, _, fr = _state(phi, X)
        res = residual_real(phi, X, 0.0)
        g = _gradient_from(fr, 1.0, G.shape)
        return SolveReport(phi=phi, residual_sup=float(np.max(np.abs(res))),
                           grad_sup=float(np.max(np.abs(g))), energy=hk_energy(phi, X),
                           trace=trace, specrad=float(fr.delta.max()), steps=steps,
                           records=records)

    g1 = _gradient_from(start[2], 1.0, start[0].shape)
    if np.max(np.abs(g1)) <= opts.tol:
        return finish(phi, 0)

    t, dt, steps = 0.0, float(opts.dt0), 0
    try:
        phi, its, gn = _newton(phi, X, 0.0, opts.path_tol, opts, records)
    except _StepFailure as e:
        if e.kind == "safeguard":
            raise SafeguardViolated(0.0, str(e)) from None
        raise NoConvergence(str(e), trace) from None
    trace.append({"t": 0.0, "iterations": its, "grad_norm": gn})
    while t < 1.0:
        t_new = min(1.0, t + dt)
        tol = opts.tol if t_new == 1.0 else opts.path_tol
        try:
            phi_new, its, gn = _newton(phi, X, t_new, tol, opts, records)
        except _StepFailure as e:
            log.info("step to t=%.6g failed (%s), halving", t_new, e)
            dt *= 0.5
            if dt < opts.dt_min:
                if e.kind == "safeguard":
                    raise SafeguardViolated(t, str(e)) from None
                raise NoConvergence(f"{e} (continuity reached t={t})", trace) from None
            continue
        phi, t = phi_new, t_new
        steps += 1
        trace.append({"t": t, "iterations": its, "grad_norm": gn})
    return finish(phi, steps)

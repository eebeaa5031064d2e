import numpy as np
import pytest

from hcsk import kernels, realmm, verify
from hcsk.errors import SafeguardViolated
from hcsk.torus import TorusGrid, dealias, double_divergence, hessian, hessian_of


def _case(seed, N=16):
    rng = np.random.default_rng(seed)
    phi, xi = verify.random_field_point(rng, N)
    return phi, xi, verify.unit_direction(rng, N), rng


def _energy(phi, xi):
    return realmm.hk_energy(phi, xi)[2]


def test_gradient_matches_energy_difference_quotient(backend):
    phi, xi, psi, _ = _case(1)
    h = 1e-5
    fd = (_energy(phi + h * psi, xi) - _energy(phi - h * psi, xi)) / (2 * h)
    an = np.mean(realmm.hk_gradient(phi, xi) * psi)
    assert abs(an - fd) <= 1e-7 * abs(fd)


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0])
def test_path_gradient(t):
    phi, xi, psi, _ = _case(2)
    E = lambda p: (lambda F, H, _: F + t * H)(*realmm.hk_energy(p, xi))
    h = 1e-5
    fd = (E(phi + h * psi) - E(phi - h * psi)) / (2 * h)
    an = np.mean(realmm.hk_gradient(phi, xi, t) * psi)
    assert abs(an - fd) <= 1e-7 * max(abs(fd), 1e-3)


def test_gradient_is_minus_half_residual_and_split_form():
    phi, xi, _, _ = _case(3)
    g = realmm.hk_gradient(phi, xi)
    res = realmm.residual_real(phi, xi)
    assert np.abs(g + 0.5 * res).max() <= 1e-9
    assert np.abs(g - realmm.hk_gradient_split(phi, xi)).max() <= 1e-9


def test_residual_zero_xi_is_abreu():
    phi, _, _, _ = _case(4)
    xi = np.zeros(phi.shape + (2, 2), dtype=complex)
    assert np.allclose(realmm.residual_real(phi, xi), realmm.abreu(phi), atol=1e-10)


def test_residual_of_flat_potential_vanishes_for_constant_xi():
    N = 16
    xi = np.broadcast_to(np.array([[0.3, 0.1j], [0.1j, 0.2]]), (N, N, 2, 2))
    assert np.abs(realmm.residual_real(np.zeros((N, N)), xi)).max() <= 1e-12


def test_hessian_matches_gradient_difference_quotient(backend):
    phi, xi, psi, _ = _case(5)
    h = 1e-4
    fd = (realmm.hk_gradient(phi + h * psi, xi) - realmm.hk_gradient(phi - h * psi, xi)) / (2 * h)
    an = realmm.hk_hessian_apply(phi, xi, psi)
    assert np.abs(an - fd).max() <= 1e-6 * np.abs(fd).max()


def test_hessian_symmetric_and_positive():
    phi, xi, psi, rng = _case(6)
    chi = verify.unit_direction(rng, phi.shape[0])
    H = realmm.HessianOperator(phi, xi)
    a = np.mean(H(psi) * chi)
    b = np.mean(H(chi) * psi)
    assert a == pytest.approx(b, rel=1e-10)
    assert np.mean(H(psi) * psi) > 0


def test_hessian_pairing_equals_energy_curvature():
    phi, xi, psi, _ = _case(7)
    h = 1e-3
    fd = (_energy(phi + h * psi, xi) - 2 * _energy(phi, xi) + _energy(phi - h * psi, xi)) / h**2
    an = np.mean(realmm.hk_hessian_apply(phi, xi, psi) * psi)
    assert an == pytest.approx(fd, rel=1e-5)


def test_flat_hessian_pairing_value():
    N = 16
    y1, _ = TorusGrid(N).coords()
    psi = np.cos(2 * np.pi * y1)
    xi = np.zeros((N, N, 2, 2), dtype=complex)
    val = np.mean(realmm.hk_hessian_apply(np.zeros((N, N)), xi, psi) * psi)
    # 1/2 mean((psi_11)^2) = 1/2 (2 pi)^4 / 2
    assert val == pytest.approx(0.25 * (2 * np.pi) ** 4, rel=1e-12)


def test_preconditioner_inverts_flat_hessian():
    N = 16
    rng = np.random.default_rng(8)
    f = verify.random_smooth(rng, N, 1.0, 5)
    xi = np.zeros((N, N, 2, 2), dtype=complex)
    H = realmm.HessianOperator(np.zeros((N, N)), xi)
    assert np.allclose(H(realmm.bilaplacian_inverse(f)), f - f.mean(), atol=1e-12)


def test_solver_flat_returns_without_steps():
    rep = realmm.solve_continuity(np.zeros((2, 2)), opts=realmm.SolveOptions(N=16))
    assert rep.steps == 0 and np.abs(rep.phi).max() == 0.0


def test_solver_recovers_flat_from_perturbed_start():
    N = 16
    rng = np.random.default_rng(9)
    xi = np.array([[0.3, 0.1], [0.1, 0.2]]) + 1j * np.array([[0.1, 0.05], [0.05, 0.2]])
    recs = []
    rep = realmm.solve_continuity(xi, opts=realmm.SolveOptions(N=N),
                                  phi0=verify.random_smooth(rng, N, 0.001), records=recs)
    assert np.abs(hessian_of(rep.phi)).max() <= 1e-9
    assert rep.residual_sup <= 1e-9
    assert recs and set(recs[0]) == {"t", "iter", "grad_norm", "energy", "specrad"}
    assert rep.trace[-1]["t"] == 1.0


def test_solver_field_solution_has_small_residual():
    N = 16
    rng = np.random.default_rng(10)
    _, xi = verify.random_field_point(rng, N, target=0.4)
    rep = realmm.solve_continuity(xi, opts=realmm.SolveOptions(N=N))
    assert rep.grad_sup <= 1e-9
    assert np.abs(realmm.residual_real(rep.phi, xi)).max() <= 2e-9
    assert rep.specrad < 0.99


def test_solver_energy_decreases_along_newton_iterations():
    N = 16
    rng = np.random.default_rng(11)
    _, xi = verify.random_field_point(rng, N, target=0.4)
    recs = []
    realmm.solve_continuity(xi, opts=realmm.SolveOptions(N=N), records=recs)
    for a, b in zip(recs[:-1], recs[1:]):
        if a["t"] == b["t"]:
            assert b["energy"] <= a["energy"] + 1e-12


def test_solver_inadmissible_start():
    with pytest.raises(SafeguardViolated) as e:
        realmm.solve_continuity(1.2 * np.eye(2), opts=realmm.SolveOptions(N=16))
    assert e.value.t_reached == 0.0


def test_solver_rejects_nonzero_constant():
    with pytest.raises(ValueError):
        realmm.solve_continuity(np.zeros((2, 2)), C=1.0, opts=realmm.SolveOptions(N=16))


@pytest.mark.parametrize("kw", [{"N": 12}, {"tol": 0}, {"eps_s": 0.7}, {"backtrack": 1.5}])
def test_options_validation(kw):
    with pytest.raises(ValueError):
        realmm.SolveOptions(**kw)


def test_dealiasing_only_drops_high_modes_of_the_tensor():
    phi, xi, _, _ = _case(12, N=32)
    a = realmm.residual_real(phi, xi)
    b = realmm.residual_real(phi, xi, dealias=True)
    G = hessian(phi)
    fr = kernels.frame(G, xi)
    T = kernels.moment_tensor(fr).reshape(G.shape)
    high = double_divergence(T - dealias(T, n=2)).real
    assert np.abs((a - b) - high).max() <= 1e-9


def test_gradient_is_mean_zero():
    phi, xi, _, _ = _case(13)
    assert abs(realmm.hk_gradient(phi, xi).mean()) <= 1e-14
    assert hessian(phi).shape == phi.shape + (2, 2)

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from hcsk import matfun, oracle1d, realmm
from hcsk.errors import ConstraintViolated
from hcsk.oracle1d import FirstType, SecondType
from hcsk.torus import TorusGrid


def _sin(a, phase=0.0):
    return lambda y: a * np.exp(1j * phase) * np.sin(2 * np.pi * y)


def test_zero_profile_closed_form():
    r = oracle1d.solve_translation_invariant(SecondType(0.2, lambda y: 0 * y))
    assert abs((1 + r.k) - (1 - np.sqrt(0.96))) <= 1e-12
    assert np.abs(r.fpp).max() <= 1e-12


def test_first_type_is_flat():
    r = oracle1d.solve_translation_invariant(FirstType(lambda y: 0.3 * np.cos(2 * np.pi * y)))
    assert np.all(r.fpp == 0) and r.kind == "first"


@pytest.mark.parametrize("c", [0.3, 0.35, 0.0])
def test_c_out_of_range(c):
    with pytest.raises(ConstraintViolated):
        oracle1d.solve_translation_invariant(SecondType(c, lambda y: 0 * y))


def test_profile_larger_than_c_rejected():
    with pytest.raises(ConstraintViolated):
        oracle1d.solve_translation_invariant(SecondType(0.1, _sin(0.2)))


def _moment_entry(g, c, F):
    """(S G^{-1})^{11} at one sample via the pointwise matrix route."""
    G = np.diag([g, 1.0])
    xi = np.array([[c, F], [F, F * F / c]])
    return (matfun.sqrt_one_minus(G, xi) @ np.linalg.inv(G))[0, 0].real


@given(st.floats(0.05, 0.28), st.floats(0.0, 6.28), st.floats(0.0, 0.9), st.floats(0.0, 6.28))
def test_moment_entry_is_constant(cabs, carg, frac, farg):
    c = cabs * np.exp(1j * carg)
    h = SecondType(c, _sin(frac * cabs, farg))
    r = oracle1d.solve_translation_invariant(h, samples=256)
    F = h.F(r.y)
    vals = np.array([_moment_entry(1 + f, c, Fi) for f, Fi in zip(r.fpp, F)])
    assert np.abs(vals + r.k).max() <= 1e-10
    assert abs(r.fpp.mean()) <= 1e-12
    assert r.residual_sup <= 1e-12


def test_lift_solves_two_dimensional_equation():
    h = SecondType(0.25, lambda y: 0.2 * np.cos(2 * np.pi * y) * np.exp(1j * np.pi / 3))
    r = oracle1d.solve_translation_invariant(h, samples=1024)
    phi, xi = oracle1d.lift_to_2d(r, h, TorusGrid(64))
    assert np.abs(realmm.residual_real(phi, xi)).max() <= 1e-9


def _literal_reduction(c, F):
    """Per-sample g from |F/c|^2 + g = 2x/(|c|^2+x^2) with x = g + k, mean g = 1."""
    c2, a = abs(c) ** 2, np.abs(F / c) ** 2

    def g_of(k):
        out = np.empty_like(a)
        for i, ai in enumerate(a):
            f = lambda g: ai + g - 2 * (g + k) / (c2 + (g + k) ** 2)
            lo, hi = -k, -k + abs(c)  # branch 0 <= x <= |c|
            out[i] = brentq(f, lo, hi) if f(lo) * f(hi) < 0 else np.nan
        return out

    k = brentq(lambda k: np.mean(g_of(k)) - 1.0, -1.05, -0.95)
    return g_of(k)


def test_literal_published_reduction_does_not_solve_the_equation():
    N = 64
    h = SecondType(0.2, _sin(0.1))
    y = np.arange(N) / N
    g_lit = _literal_reduction(0.2, h.F(y))
    assert not np.any(np.isnan(g_lit))
    r = oracle1d.solve_translation_invariant(h, samples=N)
    wrong = oracle1d.Oracle1DResult(y=y, fpp=g_lit - 1.0, k=0.0, p=y, residual=y, kind="second")
    phi_w, xi = oracle1d.lift_to_2d(wrong, h, TorusGrid(N))
    phi_c, _ = oracle1d.lift_to_2d(r, h, TorusGrid(N))
    assert np.abs(realmm.residual_real(phi_w, xi)).max() > 1e-3
    assert np.abs(realmm.residual_real(phi_c, xi)).max() <= 1e-9


def test_xi_field_has_zero_determinant():
    h = SecondType(0.2 + 0.1j, _sin(0.1, 0.4))
    xi = oracle1d.xi_field(h, TorusGrid(16))
    assert np.abs(np.linalg.det(xi)).max() <= 1e-15


def test_array_profile_subsampled():
    y = np.arange(1024) / 1024
    r1 = oracle1d.solve_translation_invariant(SecondType(0.2, 0.1 * np.sin(2 * np.pi * y)), 256)
    r2 = oracle1d.solve_translation_invariant(SecondType(0.2, _sin(0.1)), 256)
    assert np.allclose(r1.fpp, r2.fpp, atol=1e-14)

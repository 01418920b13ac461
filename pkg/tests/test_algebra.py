import numpy as np
import pytest

import trimode as tm
from trimode.algebra import GeneratorLabel as G
from trimode.algebra import elementary, generator_matrix

from conftest import random_traceless

LADDERS = [G.Ip, G.Im, G.Up, G.Um, G.Vp, G.Vm]


def test_generator_matrices():
    assert np.array_equal(generator_matrix(G.I0), np.diag([0.5, -0.5, 0.0]))
    assert np.allclose(generator_matrix(G.Y), np.diag([1, 1, -2]) / 3.0)
    assert np.array_equal(generator_matrix(G.Ip), elementary(1, 2))
    assert np.array_equal(generator_matrix(G.Vm), elementary(3, 1))


def test_ladders_square_to_zero_exactly():
    for g in LADDERS:
        X = generator_matrix(g)
        assert np.count_nonzero(X @ X) == 0


def test_elementary_commutator_table():
    # [O_jk, O_mn] = delta_km O_jn - delta_jn O_mk, entrywise for all pairs
    for j in range(1, 4):
        for k in range(1, 4):
            for m in range(1, 4):
                for n in range(1, 4):
                    A, B = elementary(j, k), elementary(m, n)
                    lhs = A @ B - B @ A
                    rhs = (k == m) * elementary(j, n) - (j == n) * elementary(m, k)
                    assert np.array_equal(lhs, rhs), (j, k, m, n)


def test_cartan_ladder_commutator():
    I0, Ip = generator_matrix(G.I0), generator_matrix(G.Ip)
    assert np.array_equal(I0 @ Ip - Ip @ I0, Ip)


def test_traceless_part_examples():
    assert np.allclose(tm.traceless_part(np.eye(3)), 0.0)
    M = np.diag([1j, 0, -1j])
    assert np.allclose(tm.traceless_part(M), M)
    M = np.diag([1 + 1j, 1, 1])
    out = tm.traceless_part(M)
    assert np.allclose(out, M - ((3 + 1j) / 3) * np.eye(3))
    assert abs(np.trace(out)) < 1e-15


def test_traceless_part_idempotent(rng):
    for _ in range(50):
        M = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        once = tm.traceless_part(M)
        assert np.allclose(tm.traceless_part(once), once, atol=1e-15)


def test_traceless_part_rejects_nonfinite():
    M = np.eye(3, dtype=complex)
    M[0, 1] = np.nan
    with pytest.raises(ValueError):
        tm.traceless_part(M)


def test_decompose_basis_elements():
    c = tm.decompose(generator_matrix(G.I0))
    assert c.mu_I0 == pytest.approx(1.0)
    assert all(abs(v) < 1e-15 for k, v in c.as_dict().items() if k is not G.I0)
    c = tm.decompose(generator_matrix(G.Ip))
    assert c.mu_Ip == pytest.approx(1.0)
    assert all(abs(v) < 1e-15 for k, v in c.as_dict().items() if k is not G.Ip)


def test_decompose_coupler_family():
    # gamma=1, kappa1=2, kappa2=3 splits into i(I0 + 1.5 Y) + 2(I ladders) + 3(V ladders)
    M1 = tm.pt_cyclic(1.0, 2.0, 3.0).traceless(0.0)
    c = tm.decompose(M1)
    assert c.mu_I0 == pytest.approx(1j)
    assert c.mu_Y == pytest.approx(1.5j)
    assert c.mu_Ip == c.mu_Im == pytest.approx(2.0)
    assert c.mu_Up == c.mu_Um == pytest.approx(2.0)
    assert c.mu_Vp == c.mu_Vm == pytest.approx(3.0)


def test_decompose_requires_traceless():
    with pytest.raises(tm.NonTracelessError):
        tm.decompose(np.eye(3))


def test_reconstruct_examples():
    assert np.allclose(tm.reconstruct(tm.GellMannCoefficients()), 0.0)
    out = tm.reconstruct(tm.GellMannCoefficients(mu_I0=2.0))
    assert np.allclose(out, np.diag([1.0, -1.0, 0.0]))


def test_roundtrip_identities(rng):
    # decompose o reconstruct and reconstruct o decompose, 1000 samples
    for _ in range(1000):
        M1 = random_traceless(rng)
        scale = np.linalg.norm(M1)
        back = tm.reconstruct(tm.decompose(M1))
        assert np.max(np.abs(back - M1)) < 1e-13 * scale
    coeffs = tm.GellMannCoefficients(*(rng.normal(size=8) + 1j * rng.normal(size=8)))
    again = tm.decompose(tm.reconstruct(coeffs))
    for name in ("mu_I0", "mu_Y", "mu_Ip", "mu_Im", "mu_Up", "mu_Um", "mu_Vp", "mu_Vm"):
        assert getattr(again, name) == pytest.approx(getattr(coeffs, name), abs=1e-13)


def test_exp_generator_closed_forms():
    a = 0.3 - 0.7j
    E = tm.exp_generator(G.Ip, a)
    expected = np.eye(3, dtype=complex)
    expected[0, 1] = 1j * a
    assert np.array_equal(E, expected)
    assert np.allclose(tm.exp_generator(G.I0, a),
                       np.diag([np.exp(1j * a / 2), np.exp(-1j * a / 2), 1.0]))
    assert np.allclose(tm.exp_generator(G.Y, a),
                       np.diag([np.exp(1j * a / 3)] * 2 + [np.exp(-2j * a / 3)]))


def test_gauge_phase_traceless_family():
    fam = tm.pt_cyclic(1.0, 0.5, 0.25)
    assert tm.gauge_phase(fam, 3.0) == pytest.approx(0.0, abs=1e-12)


def test_gauge_phase_constant_gain():
    fam = tm.constant_family(1j * np.eye(3))
    assert tm.gauge_phase(fam, 2.0) == pytest.approx(2j, abs=1e-10)


def test_gauge_phase_linear_profile():
    # (1/3) integral_0^1 zeta dzeta = 1/6
    fam = tm.from_callable(lambda z: np.diag([z, 0.0, 0.0]).astype(complex))
    assert tm.gauge_phase(fam, 1.0) == pytest.approx(1.0 / 6.0, abs=1e-10)


def test_gauge_phase_nonfinite_sample_reports_position():
    def bad(z):
        M = np.zeros((3, 3), dtype=complex)
        M[0, 0] = np.inf if z > 0.5 else 0.0
        return M

    fam = tm.from_callable(bad)
    with pytest.raises(tm.IntegrationError, match="z="):
        tm.gauge_phase(fam, 1.0)

import math

import numpy as np
import pytest

import trimode as tm
from trimode.algebra import GeneratorLabel as G
from trimode.propagator import _wn_rhs

from conftest import random_traceless

SQ2 = 1.0 / math.sqrt(2.0)

# the five spectral-regime parameter sets (gamma, kappa1, kappa2)
REGIME_SETS = [
    (1.0, 1.5, 3.5),     # all-real spectrum, bounded oscillation
    (1.0, 1.5, 1.5),     # complex pair, hyperbolic growth
    (1.0, SQ2, 0.0),     # triple degeneracy, quadratic growth
    (1.0, 1.5, 0.6718),  # double degeneracy (first published root)
    (1.0, 1.5, 2.3882),  # double degeneracy (second published root)
]


def rotation_block(kappa, z):
    U = np.eye(3, dtype=complex)
    U[0, 0] = U[1, 1] = np.cos(kappa * z)
    U[0, 1] = U[1, 0] = 1j * np.sin(kappa * z)
    return U


def test_rhs_at_origin(rng):
    mu = random_traceless(rng)
    d = tm.wei_norman_rhs(tm.WeiNormanCoords(), mu)
    assert d.v_Ip == pytest.approx(mu[0, 1])
    assert d.v_Vp == pytest.approx(mu[0, 2])
    assert d.v_Up == pytest.approx(mu[1, 2])
    assert d.v_I0 == pytest.approx(mu[0, 0] - mu[1, 1])
    assert d.v_Y == pytest.approx(1.5 * (mu[0, 0] + mu[1, 1]))
    assert d.v_Vm == pytest.approx(mu[2, 0])
    assert d.v_Um == pytest.approx(mu[2, 1])
    assert d.v_Im == pytest.approx(mu[1, 0])


def test_rhs_generates_the_flow(rng):
    # d/dz reconstruct(v) = i M1 reconstruct(v) along the hierarchy's own
    # vector field, checked by a directional derivative of the product form
    for _ in range(30):
        mu = random_traceless(rng)
        y = 0.3 * (rng.normal(size=8) + 1j * rng.normal(size=8))
        dy = _wn_rhs(y, mu)
        h = 1e-6
        U_plus = tm.reconstruct_U(y + h * dy)
        U_minus = tm.reconstruct_U(y - h * dy)
        dU = (U_plus - U_minus) / (2 * h)
        target = 1j * mu @ tm.reconstruct_U(y)
        assert np.max(np.abs(dU - target)) < 1e-7


def test_reconstruct_examples():
    assert np.allclose(tm.reconstruct_U(tm.WeiNormanCoords()), np.eye(3))
    a = 0.4 + 0.2j
    out = tm.reconstruct_U(tm.WeiNormanCoords(v_I0=a))
    assert np.allclose(out, np.diag([np.exp(0.5j * a), np.exp(-0.5j * a), 1.0]))
    # two ladder factors multiplied by hand
    al, be = 0.7 - 0.1j, -0.3 + 0.5j
    out = tm.reconstruct_U(tm.WeiNormanCoords(v_Ip=al, v_Im=be))
    byhand = np.array([[1.0 - al * be, 1j * al, 0.0],
                       [1j * be, 1.0, 0.0],
                       [0.0, 0.0, 1.0]])
    assert np.allclose(out, byhand, atol=1e-15)


def test_reconstruct_unimodular(rng):
    for _ in range(100):
        y = rng.normal(size=8) + 1j * rng.normal(size=8)
        assert np.linalg.det(tm.reconstruct_U(y)) == pytest.approx(1.0, abs=1e-12)


def test_exp_constant_examples():
    assert np.allclose(tm.exp_constant(np.zeros((3, 3)), 5.0), np.eye(3))
    U = tm.exp_constant(np.diag([1j, -1j, 0.0]), np.pi)
    assert np.allclose(U, np.diag([np.exp(-np.pi), np.exp(np.pi), 1.0]))


def test_triple_degenerate_nilpotent_truncation():
    M1 = tm.pt_cyclic(1.0, SQ2, 0.0).traceless(0.0)
    M2 = M1 @ M1
    assert np.max(np.abs(M2 @ M1)) < 1e-13
    for z in np.linspace(0.0, 10.0, 21):
        trunc = np.eye(3) + 1j * z * M1 - 0.5 * z * z * M2
        err = np.max(np.abs(tm.exp_constant(M1, z) - trunc))
        assert err < 1e-10 * (1.0 + z * z * np.linalg.norm(M1) ** 2)


def test_direct_identity_family():
    res = tm.integrate_direct(tm.constant_family(np.zeros((3, 3))), 5.0, n_samples=11)
    assert np.allclose(res.U, np.eye(3), atol=1e-12)


def test_direct_matches_expm(rng):
    for _ in range(10):
        M1 = random_traceless(rng)
        fam = tm.constant_family(M1)
        res = tm.integrate_direct(fam, 2.0, tol=1e-11, n_samples=5)
        for z, U in zip(res.z_samples, res.U):
            assert np.max(np.abs(U - tm.exp_constant(M1, z))) < 1e-9


def test_direct_hermitian_is_unitary():
    fam = tm.pt_cyclic(0.0, 1.3, 0.4)   # real symmetric coupler
    res = tm.integrate_direct(fam, 10.0, n_samples=21)
    for U in res.U:
        assert np.max(np.abs(U.conj().T @ U - np.eye(3))) < 1e-10


def test_wei_norman_identity_family():
    res = tm.integrate_wei_norman(tm.constant_family(np.zeros((3, 3))), 3.0,
                                  n_samples=7)
    assert np.allclose(res.U, np.eye(3), atol=1e-12)
    assert np.allclose(res.coords, 0.0)
    assert res.blowup_events == []


def test_wei_norman_rotation_block_with_pole_crossings():
    kappa = 1.0
    M1 = kappa * (tm.elementary(1, 2) + tm.elementary(2, 1))
    res = tm.integrate_wei_norman(tm.constant_family(M1), 4.0, n_samples=81)
    for z, U in zip(res.z_samples, res.U):
        assert np.max(np.abs(U - rotation_block(kappa, z))) < 1e-8
    # the factorization has poles at kappa*z = pi/2 and (after the chart
    # reopens just before it) again about pi/2 further on
    assert len(res.blowup_events) == 2
    assert res.blowup_events[0][0] == pytest.approx(np.pi / 2, abs=1e-3)


def test_wei_norman_quadratic_growth_at_triple_degeneracy():
    g, k1, k2 = REGIME_SETS[2]
    fam = tm.pt_cyclic(g, k1, k2)
    M1 = fam.traceless(0.0)
    res = tm.integrate_wei_norman(fam, 10.0, n_samples=41)
    for z, U in zip(res.z_samples, res.U):
        trunc = np.eye(3) + 1j * z * M1 - 0.5 * z * z * (M1 @ M1)
        assert np.max(np.abs(U - trunc)) < 1e-8 * (1.0 + z * z)


@pytest.mark.parametrize("params", REGIME_SETS)
def test_wei_norman_matches_direct(params):
    fam = tm.pt_cyclic(*params)
    wn = tm.integrate_wei_norman(fam, 5.0, tol=1e-10, n_samples=41)
    dr = tm.integrate_direct(fam, 5.0, tol=1e-10, z_eval=wn.z_samples)
    err = max(np.max(np.abs(a - b)) for a, b in zip(wn.U, dr.U))
    assert err < 1e-8


def test_wei_norman_z_profile_family():
    fam = tm.pt_cyclic(lambda z: 0.5 + 0.3 * math.sin(z), 1.1,
                       lambda z: 0.8 * math.cos(0.7 * z))
    wn = tm.integrate_wei_norman(fam, 6.0, n_samples=31)
    dr = tm.integrate_direct(fam, 6.0, z_eval=wn.z_samples)
    err = max(np.max(np.abs(a - b)) for a, b in zip(wn.U, dr.U))
    assert err < 1e-8


def test_group_property(rng):
    fam = tm.pt_cyclic(1.0, 1.5, 1.5)
    z1, z2 = 1.3, 3.1
    full = tm.integrate_direct(fam, z2, z_eval=np.array([0.0, z1, z2]))
    shifted = tm.from_callable(lambda z: fam.matrix(z + z1))
    seg = tm.integrate_direct(shifted, z2 - z1, z_eval=np.array([0.0, z2 - z1]))
    U_composed = seg.U[-1] @ full.U[1]
    assert np.max(np.abs(U_composed - full.U[2])) < 1e-8


def test_unimodular_propagation():
    for params in REGIME_SETS[:3]:
        fam = tm.pt_cyclic(*params)
        res = tm.integrate_wei_norman(fam, 5.0, n_samples=11)
        for U in res.U:
            assert np.linalg.det(U) == pytest.approx(1.0, abs=1e-10)


def test_hermitian_limit_conserves_total_intensity():
    fam = tm.pt_cyclic(0.0, 1.5, 0.7)
    res = tm.integrate_direct(fam, 20.0, n_samples=41)
    E0 = np.array([1.0, 0.0, 0.0], dtype=complex)
    totals = [np.sum(np.abs(U @ E0) ** 2) for U in res.U]
    assert np.max(np.abs(np.array(totals) - 1.0)) < 1e-10


def test_finite_difference_consistency_on_samples():
    fam = tm.pt_cyclic(1.0, 1.5, 3.5)
    res = tm.integrate_direct(fam, 2.0, n_samples=401)
    h = res.z_samples[1] - res.z_samples[0]
    norm_m = np.linalg.norm(fam.traceless(0.0))
    for i in range(1, len(res.z_samples) - 1, 37):
        dU = (res.U[i + 1] - res.U[i - 1]) / (2 * h)
        target = 1j * fam.traceless(res.z_samples[i]) @ res.U[i]
        # second-order stencil: error bounded by h^2 |M|^3 |U| / 6
        bound = h * h * norm_m ** 3 * np.linalg.norm(res.U[i]) / 6.0 * 10
        assert np.max(np.abs(dU - target)) < bound


# ---------------------------------------------------------------------------
# holonomy

def circle_family(c1, c2, r):
    k1 = lambda z: c1 + r * math.cos(2 * math.pi * z)
    k2 = lambda z: c2 + r * math.sin(2 * math.pi * z)
    return tm.pt_cyclic(1.0, k1, k2)


def test_holonomy_constant_family_is_identity():
    fam = tm.constant_family(tm.pt_cyclic(1.0, 1.5, 3.5).traceless(0.0))
    res = tm.holonomy(fam, steps=64, loop=(0.0, 1.0))
    assert np.max(np.abs(res.matrix - np.eye(3))) < 1e-12
    assert abs(res.phi_I0) < 1e-12
    assert abs(res.phi_Y) < 1e-12


def test_holonomy_convergence_and_determinant():
    fam = circle_family(1.8, 0.4, 0.2)
    res = tm.holonomy(fam, steps=512, loop=(0.0, 1.0), convergence_check=True)
    assert res.convergence_ratio >= 3.0
    assert np.linalg.det(res.matrix) == pytest.approx(1.0, abs=1e-10)


def test_holonomy_area_scaling():
    big = tm.holonomy(circle_family(1.8, 0.4, 0.1), steps=512, loop=(0.0, 1.0))
    small = tm.holonomy(circle_family(1.8, 0.4, 0.05), steps=512, loop=(0.0, 1.0))
    dev_big = np.linalg.norm(big.matrix - np.eye(3))
    dev_small = np.linalg.norm(small.matrix - np.eye(3))
    assert dev_big / dev_small == pytest.approx(4.0, rel=0.25)


def test_holonomy_rejects_degenerate_path():
    fam = tm.ep3_loop(tm.LoopSpec(r=0.4253, turns=1))
    with pytest.raises(tm.FrameSingularError):
        tm.holonomy(fam, steps=256)


def test_holonomy_rejects_open_path():
    fam = tm.pt_cyclic(lambda z: 1.0 + z, 2.0, 0.3)
    with pytest.raises(ValueError, match="not closed"):
        tm.holonomy(fam, steps=64, loop=(0.0, 1.0))

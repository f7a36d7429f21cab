import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import accretion.constitutive as cm
from accretion.constitutive import MaterialError, MaterialParams, OrientationError

MP = MaterialParams()
MPK = MaterialParams(kappa=3.0)

finite = st.floats(-3, 3, allow_nan=False)
mats = arrays(np.float64, (2, 2), elements=finite)
tens3 = arrays(np.float64, (2, 2, 2), elements=finite)
angles = st.floats(0, 2 * np.pi)


def rot(a):
    return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])


def fd(f, X, eps=1e-6):
    out = np.zeros_like(X)
    for idx in np.ndindex(X.shape):
        E = np.zeros_like(X)
        E[idx] = eps
        out[idx] = (f(X + E) - f(X - E)) / (2 * eps)
    return out


# -- parameters ---------------------------------------------------------------


def test_defaults_valid():
    assert MP.violations() == []
    assert MP.q_min == 4.0


@pytest.mark.parametrize(
    "kw, msg",
    [
        (dict(q=3.0), r"\(H6\)"),
        (dict(p=2.0), r"\(H1\)"),
        (dict(delta=1.5), "delta"),
        (dict(delta=0.0), "delta"),
        (dict(c_gamma=1.2), r"\(H14\)"),
        (dict(c_R=-1.0), "c_R"),
        (dict(gamma0=0.1), "gamma0"),
    ],
)
def test_invalid_params_named(kw, msg):
    with pytest.raises(MaterialError, match=msg):
        MaterialParams(**kw).validate()


# -- stored energy ------------------------------------------------------------


def test_W_identity():
    assert cm.W(np.eye(2), MP) == 0.0
    assert np.all(cm.DW(np.eye(2), MP) == 0.0)


@settings(max_examples=200, deadline=None)
@given(mats)
def test_W_nonnegative(F):
    assert cm.W(F, MP) >= 0.0


@settings(max_examples=100, deadline=None)
@given(mats, angles)
def test_W_frame_indifferent_and_isotropic(F, a):
    Q = rot(a)
    w = cm.W(F, MP)
    assert abs(cm.W(Q @ F, MP) - w) <= 1e-12 * max(1.0, w)
    assert abs(cm.W(F @ Q, MP) - w) <= 1e-12 * max(1.0, w)


@settings(max_examples=50, deadline=None)
@given(mats)
def test_DW_matches_fd(F):
    an = cm.DW(F, MP)
    num = fd(lambda X: cm.W(X, MP), F)
    assert np.abs(an - num).max() <= 1e-5 * max(1.0, np.abs(an).max())


# -- volumetric penalty -------------------------------------------------------


def test_VJ_values():
    assert cm.VJ(np.eye(2), MP) == MP.c_J
    assert cm.VJ(2 * np.eye(2), MP) == pytest.approx(MP.c_J * 4.0 ** (-MP.q), rel=1e-15)


def test_VJ_rejects_reflection():
    with pytest.raises(OrientationError, match="orientation violated"):
        cm.VJ(np.diag([1.0, -1.0]), MP)
    with pytest.raises(OrientationError):
        cm.DVJ(np.zeros((2, 2)), MP)


@settings(max_examples=50, deadline=None)
@given(mats)
def test_DVJ_matches_fd(F):
    d = cm.det2(F)
    assume(0.2 <= d <= 5.0)
    an = cm.DVJ(F, MP)
    num = fd(lambda X: cm.VJ(X, MP), F, eps=1e-7)
    assert np.abs(an - num).max() <= 1e-5 * np.abs(an).max()


@settings(max_examples=100, deadline=None)
@given(mats)
def test_VJ_coercivity_identity(F):
    d = cm.det2(F)
    assume(d > 1e-2)
    assert cm.VJ(F, MP) * d**MP.q == pytest.approx(MP.c_J, rel=1e-12)


# -- second-grade energy ------------------------------------------------------


@pytest.mark.parametrize("eps", [0.0, 1.0])
def test_H_zero(eps):
    mp = MaterialParams(eps_H=eps)
    Z = np.zeros((2, 2, 2))
    assert cm.H2nd(Z, mp) == 0.0
    assert np.all(cm.DH(Z, mp) == 0.0)


@settings(max_examples=100, deadline=None)
@given(tens3, angles, st.sampled_from([0.0, 1.0]))
def test_H_frame_indifferent(G, a, eps):
    mp = MaterialParams(eps_H=eps)
    QG = np.einsum("ab,bcd->acd", rot(a), G)
    h = cm.H2nd(G, mp)
    assert abs(cm.H2nd(QG, mp) - h) <= 1e-12 * max(mp.c_H, h)


@settings(max_examples=100, deadline=None)
@given(tens3, tens3, st.sampled_from([0.0, 1.0]))
def test_DH_monotone(G1, G2, eps):
    mp = MaterialParams(eps_H=eps)
    m = np.sum((cm.DH(G1, mp) - cm.DH(G2, mp)) * (G1 - G2))
    n = np.sqrt(np.sum((G1 - G2) ** 2))
    assert m >= mp.c_H * 2.0 ** (2 - mp.p) * n**mp.p * (1 - 1e-9) - 1e-300


@settings(max_examples=100, deadline=None)
@given(tens3, st.sampled_from([0.0, 1.0]))
def test_H_lower_growth(G, eps):
    mp = MaterialParams(eps_H=eps)
    n = np.sqrt(np.sum(G**2))
    assert cm.H2nd(G, mp) >= mp.c_H / mp.p * n**mp.p * (1 - 1e-12)


@settings(max_examples=50, deadline=None)
@given(tens3, st.sampled_from([0.0, 1.0]))
def test_DH_matches_fd(G, eps):
    mp = MaterialParams(eps_H=eps)
    an = cm.DH(G, mp)
    num = fd(lambda X: cm.H2nd(X, mp), G)
    assert np.abs(an - num).max() <= 1e-5 * max(np.abs(an).max(), 1e-8)


# -- dissipation --------------------------------------------------------------


def test_R_vanishes_without_rate():
    F = np.array([[1.2, 0.3], [-0.1, 0.9]])
    assert cm.R(F, np.zeros((2, 2)), MP) == 0.0


def test_R_rigid_rotation_rate():
    S = np.array([[0.0, 0.7], [-0.7, 0.0]])
    assert cm.R(np.eye(2), S, MP) == 0.0


@settings(max_examples=100, deadline=None)
@given(mats, mats, angles)
def test_R_frame_indifferent(F, Fd, a):
    Q = rot(a)
    r = cm.R(F, Fd, MP)
    assert abs(cm.R(Q @ F, Q @ Fd, MP) - r) <= 1e-12 * max(1.0, r)


@settings(max_examples=50, deadline=None)
@given(mats, mats)
def test_dRdFdot_matches_fd(F, Fd):
    an = cm.dRdFdot(F, Fd, MP)
    num = fd(lambda X: cm.R(F, X, MP), Fd)
    assert np.abs(an - num).max() <= 1e-5 * max(1.0, np.abs(an).max())


def test_D_symmetries_and_coercivity(rng):
    C = np.eye(2)
    D = cm.D_tensor(C, MP)
    assert np.array_equal(D, np.swapaxes(D, 0, 1))
    assert np.array_equal(D, np.swapaxes(D, 2, 3))
    assert np.array_equal(D, np.moveaxis(D, (0, 1), (2, 3)))
    X = rng.normal(size=(100, 2, 2))
    X = X + np.swapaxes(X, 1, 2)
    q = np.einsum("nij,ijkl,nkl->n", X, D, X)
    assert np.all(q >= 0.5 * MP.c_R * np.sum(X**2, axis=(1, 2)) * (1 - 1e-12))


def test_stress_formula(rng):
    F, Fd = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    D = cm.D_tensor(F.T @ F, MP)
    alt = 2 * F @ np.einsum("ijkl,kl->ij", D, cm.Cdot(F, Fd))
    assert np.allclose(cm.dRdFdot(F, Fd, MP), alt, rtol=1e-13, atol=0)


# -- tangent moduli -----------------------------------------------------------


@pytest.mark.parametrize("fn, d2", [(cm.DW, cm.D2W), (cm.DVJ, cm.D2VJ)])
def test_second_derivatives(fn, d2, rng):
    F = np.eye(2) + 0.2 * rng.normal(size=(2, 2))
    an = d2(F, MP)
    for c in range(2):
        for d in range(2):
            E = np.zeros((2, 2))
            E[c, d] = 1e-6
            num = (fn(F + E, MP) - fn(F - E, MP)) / 2e-6
            assert np.allclose(an[:, :, c, d], num, rtol=1e-6, atol=1e-7)


def test_D2R_matches_fd(rng):
    F = np.eye(2) + 0.2 * rng.normal(size=(2, 2))
    Fd = rng.normal(size=(2, 2))
    an = cm.D2R(F, MP)
    for c in range(2):
        for d in range(2):
            E = np.zeros((2, 2))
            E[c, d] = 1e-6
            num = (cm.dRdFdot(F, Fd + E, MP) - cm.dRdFdot(F, Fd - E, MP)) / 2e-6
            assert np.allclose(an[:, :, c, d], num, rtol=1e-6, atol=1e-9)


# -- growth law and switch ----------------------------------------------------


def test_gamma_identity_and_decoupled(rng):
    assert cm.gamma(np.eye(2), MPK) == MPK.C_gamma
    F = np.eye(2) + 0.3 * rng.normal(size=(10, 2, 2))
    F = F[cm.det2(F) > 0]
    assert np.all(cm.gamma(F, MP) == MP.C_gamma)


def test_gamma_saturates():
    s = np.sqrt(1 + np.sqrt(25 / MPK.kappa))  # |F^T F - I|^2 = 50 / kappa
    assert abs(cm.gamma(s * np.eye(2), MPK) - MPK.c_gamma) <= 1e-9


@settings(max_examples=200, deadline=None)
@given(mats)
def test_gamma_range(F):
    assume(0 < cm.det2(F) <= 10)
    g = cm.gamma(F, MPK)
    assert MPK.c_gamma <= g <= MPK.C_gamma


def test_gamma_rejects_reflection():
    with pytest.raises(OrientationError):
        cm.gamma(np.diag([-1.0, 1.0]), MPK)


@settings(max_examples=50, deadline=None)
@given(mats)
def test_Dgamma_matches_fd(F):
    assume(cm.det2(F) > 0.1)
    an = cm.Dgamma(F, MPK)
    num = fd(lambda X: cm.gamma(X, MPK), F)
    assert np.abs(an - num).max() <= 1e-5 * max(1e-3, np.abs(an).max())


def test_h_switch_sharp():
    d = MP.delta
    assert cm.h_switch(-0.1, d) == 1.0
    assert cm.h_switch(0.0, d) == 1.0
    assert cm.h_switch(1e-15, d) == d
    s = np.array([-1.0, -0.0, 0.0, 5e-324, 1.0])
    assert np.array_equal(cm.h_switch(s, d), [1.0, 1.0, 1.0, d, d])

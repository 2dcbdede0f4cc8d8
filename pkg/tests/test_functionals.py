from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.special import exp1

from oracles import EULER_GAMMA, brute_force_V, gaussian
from planar_hartree.errors import GridMismatchError
from planar_hartree.experiments import smooth_random_state
from planar_hartree.functionals import (
    RECORD_KEYS,
    StatePair,
    energy_report,
    gradient,
    pairing,
    psi_beta,
)
from planar_hartree.grid import Field, l2_norm_sq, lp_norm_pow, make_grid
from planar_hartree.kernel import build_kernel
from planar_hartree.suites import directional_derivative_error


@pytest.fixture(scope="module")
def g128():
    return make_grid(8, 128)


def gaussian_pair(L, n, sep=0.5):
    g = make_grid(L, n)
    return g, StatePair(Field(g, gaussian(L, n, cx=sep)), Field(g, gaussian(L, n, cx=-sep)))


# --- psi_beta ---------------------------------------------------------------

def test_psi_zero_and_symmetric(g128):
    z = StatePair(g128.zeros(), g128.zeros())
    assert psi_beta(z, 1.0, 2.0) == 0.0
    s = smooth_random_state(g128, 0)
    same = StatePair(s.u, s.u)
    for beta, p in [(0.0, 2.0), (0.7, 2.5), (3.0, 3.0)]:
        assert psi_beta(same, beta, p) == pytest.approx(2 * (1 + beta) * lp_norm_pow(s.u, 2 * p), rel=1e-12)


@pytest.mark.parametrize("beta", [0.0, 1.0, 7.5])
def test_psi_gaussian(beta):
    g = make_grid(8, 256)
    s = StatePair(Field(g, gaussian(8, 256)), g.zeros())
    assert abs(psi_beta(s, beta, 2.0) - math.pi / 2) <= 1e-6


def test_psi_exchange_and_monotone(g128):
    s = smooth_random_state(g128, 1)
    for p in (2.0, 2.5):
        assert psi_beta(s, 0.3, p) == psi_beta(s.swapped(), 0.3, p)
        vals = [psi_beta(s, b, p) for b in (0.0, 0.5, 1.0, 4.0)]
        assert all(a < b for a, b in zip(vals, vals[1:]))


def test_psi_rejects_parameters(g128):
    s = smooth_random_state(g128, 1)
    with pytest.raises(ValueError):
        psi_beta(s, -0.1, 2.0)
    with pytest.raises(ValueError):
        psi_beta(s, 0.0, 1.9)


# --- energy_report ----------------------------------------------------------

def test_report_zero_state(g128):
    r = energy_report(StatePair(g128.zeros(), g128.zeros()), 1.0, 2.0, build_kernel(g128))
    assert all(getattr(r, k) == 0.0 for k in RECORD_KEYS if k not in ("beta", "p"))


def test_report_record_keys(g128):
    r = energy_report(smooth_random_state(g128, 2), 0.5, 2.0, build_kernel(g128))
    rec = r.as_record()
    assert tuple(rec) == RECORD_KEYS
    assert rec["beta"] == 0.5 and rec["p"] == 2.0


def test_report_definitions(g128):
    K = build_kernel(g128)
    s = smooth_random_state(g128, 3)
    p, beta = 2.5, 0.8
    r = energy_report(s, beta, p, K)
    B = r.mass_sq_sum ** 2
    assert r.mass_sq_sum == pytest.approx(l2_norm_sq(s.u) + l2_norm_sq(s.v), rel=1e-14)
    assert r.I == pytest.approx(r.kinetic / 2 + r.V / 4 - r.psi / (2 * p), rel=1e-13)
    assert r.J == pytest.approx(2 * r.kinetic - B / 4 + r.V - (4 * p - 2) / (2 * p) * r.psi, rel=1e-10)
    assert r.P == pytest.approx(r.V + B / 4 - r.psi / p, rel=1e-13)
    assert r.nehari == pytest.approx(r.kinetic + r.V - r.psi, rel=1e-13)


@pytest.mark.parametrize("seed", range(5))
def test_report_identity_random_states(g128, seed):
    K = build_kernel(g128)
    r = energy_report(smooth_random_state(g128, seed), 0.5 * seed, 2.0 + 0.25 * seed, K)
    assert abs(r.J - (2 * r.nehari - r.P)) <= 1e-10 * max(abs(r.J), r.scale)
    assert r.psi >= 0


def test_report_gaussian_pair_brute_force_n64():
    g, s = gaussian_pair(8, 64)
    K = build_kernel(g)
    r = energy_report(s, 1.0, 2.0, K)
    h = g.h
    u, v = s.u.values, s.v.values
    kinetic = 2 * math.pi  # |grad(e^{-|x-c|^2/2})|^2 integrates to pi
    psi = h * h * np.sum(u ** 4 + v ** 4 + 2 * u * u * v * v)
    V = brute_force_V(u * u + v * v, 8.0, K.origin_value)
    I_ref = kinetic / 2 + V / 4 - psi / 4
    assert abs(r.I - I_ref) <= 1e-5 * abs(I_ref)


def test_report_gaussian_pair_closed_form_n256():
    """Continuum value: V = pi^2 [(log 2 - gamma) + E1(|d|^2/2)] for centres at distance |d| = 1."""
    g, s = gaussian_pair(8, 256)
    r = energy_report(s, 1.0, 2.0, build_kernel(g))
    kinetic = 2 * math.pi
    psi = math.pi + 2 * math.exp(-0.5) * math.pi / 2
    V = math.pi ** 2 * ((math.log(2) - EULER_GAMMA) + exp1(0.5))
    I_ref = kinetic / 2 + V / 4 - psi / 4
    assert abs(r.I - I_ref) <= 1e-5 * abs(I_ref)


def test_report_grid_mismatch():
    g1, g2 = make_grid(8, 32), make_grid(8, 64)
    with pytest.raises(GridMismatchError):
        StatePair(g1.zeros(), g2.zeros())
    with pytest.raises(GridMismatchError):
        energy_report(StatePair(g1.zeros(), g1.zeros()), 1.0, 2.0, build_kernel(g2))


# --- gradient ---------------------------------------------------------------

def test_gradient_zero_state(g128):
    gu, gv = gradient(StatePair(g128.zeros(), g128.zeros()), 1.0, 2.0, build_kernel(g128))
    assert not np.any(gu.values) and not np.any(gv.values)


def test_gradient_symmetric_state(g128):
    s = smooth_random_state(g128, 4)
    gu, gv = gradient(StatePair(s.u, s.u), 1.3, 2.5, build_kernel(g128))
    np.testing.assert_array_equal(gu.values, gv.values)


@pytest.mark.parametrize("beta, p", [(0.5, 2.0), (0.0, 3.0), (2.0, 2.5)])
def test_gradient_directional_derivative(g128, beta, p):
    K = build_kernel(g128)
    s = smooth_random_state(g128, 5)
    d = smooth_random_state(g128, 6)
    assert directional_derivative_error(s, d, beta, p, K) <= 1e-5


def test_gradient_pairing_equals_nehari(g128):
    K = build_kernel(g128)
    for seed in range(3):
        s = smooth_random_state(g128, 10 + seed)
        for beta, p in [(0.0, 2.0), (1.0, 2.5), (3.0, 3.0)]:
            r = energy_report(s, beta, p, K)
            assert pairing(gradient(s, beta, p, K), (s.u, s.v)) == pytest.approx(r.nehari, rel=1e-8)


def test_gradient_rejects_small_p(g128):
    with pytest.raises(ValueError):
        gradient(smooth_random_state(g128, 0), 0.0, 1.5, build_kernel(g128))


def test_nonlinearity_vanishes_at_zero(g128):
    """Sign-changing input: the p-2 power is continuous and zero where u = 0."""
    K = build_kernel(g128)
    X, _ = g128.mesh
    u = Field(g128, X * np.exp(-(X ** 2)))
    s = StatePair(u, g128.zeros())
    gu, _ = gradient(s, 1.0, 2.5, K)
    assert np.all(np.isfinite(gu.values))

from __future__ import annotations

import math

import numpy as np
import pytest

from oracles import (
    brute_force_V,
    disk_area_fraction,
    gaussian,
    gaussian_V_closed_form,
    radial_V,
    unit_cell_log_mean,
)
from planar_hartree.errors import GridMismatchError
from planar_hartree.grid import Field, l2_norm_sq, laplacian, make_grid, rescale
from planar_hartree.kernel import (
    LATTICE_LOG_CONSTANT,
    Density,
    V_form,
    V_split,
    build_kernel,
    cell_average_log,
    density,
    log_potential,
)


def smooth_pair(L, n, seed):
    rng = np.random.default_rng(seed)
    comps = []
    for _ in range(2):
        f = np.zeros((n, n))
        for _ in range(3):
            c = rng.uniform(-0.4, 0.4, 2)
            f += gaussian(L, n, width=rng.uniform(0.6, 0.9), cx=c[0], cy=c[1], amp=rng.uniform(0.3, 1.2))
        comps.append(f)
    return comps


# --- build_kernel -----------------------------------------------------------

def test_kernel_entries_and_symmetry():
    g = make_grid(8, 64)
    K = build_kernel(g)
    assert K.entry(1, 0) == math.log(g.h)
    assert K.entry(3, 4) == pytest.approx(math.log(5 * g.h), abs=1e-15)
    assert K.entry(-3, 4) == K.entry(3, -4) == K.entry(3, 4)
    n2 = 2 * g.n
    idx = (-np.arange(n2)) % n2
    np.testing.assert_array_equal(K.samples, K.samples[np.ix_(idx, idx)])
    assert not K.samples.flags.writeable


def test_cell_average_origin_matches_quadrature():
    g = make_grid(8, 16)  # h = 1
    K = build_kernel(g, origin="cell_average")
    assert abs(K.origin_value - unit_cell_log_mean()) <= 1e-10
    assert cell_average_log(0.25) == pytest.approx(math.log(0.25) + unit_cell_log_mean(), abs=1e-12)


def test_lattice_origin_value_and_determinism():
    g = make_grid(4, 32)
    K = build_kernel(g)
    assert K.origin_rule == "lattice"
    assert K.origin_value == pytest.approx(math.log(g.h) - LATTICE_LOG_CONSTANT, abs=1e-15)
    assert LATTICE_LOG_CONSTANT == pytest.approx(1.3105329259115095, abs=1e-14)
    build_kernel.cache_clear()
    np.testing.assert_array_equal(build_kernel(g).samples, K.samples)
    with pytest.raises(ValueError):
        build_kernel(g, origin="nearest")


def test_lattice_origin_is_fourth_order():
    """V of the unit Gaussian converges at O(h^4) with the lattice origin, O(h^2) with the cell average."""
    exact = gaussian_V_closed_form()
    err = {}
    for rule in ("lattice", "cell_average"):
        err[rule] = []
        for n in (32, 64):
            g = make_grid(8, n)
            u = Field(g, gaussian(8, n))
            err[rule].append(abs(V_form(u, g.zeros(), build_kernel(g, rule)) - exact))
    assert err["lattice"][0] / err["lattice"][1] > 12
    assert 3 < err["cell_average"][0] / err["cell_average"][1] < 5


# --- log_potential ----------------------------------------------------------

def test_potential_zero_source():
    g = make_grid(8, 32)
    assert not np.any(log_potential(Density(g, np.zeros((32, 32))), build_kernel(g)).values)


def test_disk_far_field_mean_value_property():
    L, n = 8.0, 512
    g = make_grid(L, n)
    rho = disk_area_fraction(L, n)
    assert rho.sum() * g.h ** 2 == pytest.approx(math.pi, rel=1e-4)
    phi = log_potential(Density(g, rho), build_kernel(g)).values
    ring = np.abs(g.radius - 4.0) < g.h / 2
    assert ring.sum() > 50
    expected = math.pi * np.log(g.radius[ring])
    assert np.max(np.abs(phi[ring] - expected) / np.abs(expected)) <= 1e-3


def test_potential_linearity():
    g = make_grid(6, 64)
    K = build_kernel(g)
    r1, r2 = (np.abs(a) for a in smooth_pair(6, 64, 5))
    a, b = 0.7, 2.3
    lhs = log_potential(Density(g, a * r1 + b * r2), K).values
    rhs = a * log_potential(Density(g, r1), K).values + b * log_potential(Density(g, r2), K).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(lhs))


def test_potential_translation_equivariance():
    g = make_grid(8, 64)
    K = build_kernel(g)
    rho = gaussian(8, 64, width=0.8) ** 2
    shifted = np.roll(rho, 1, axis=0)  # the density is ~0 at the wrap edge
    p0 = log_potential(Density(g, rho), K).values
    p1 = log_potential(Density(g, shifted), K).values
    inner = (slice(8, 56), slice(8, 56))
    diff = np.roll(p0, 1, axis=0)[inner] - p1[inner]
    assert np.max(np.abs(diff)) <= 1e-10 * np.max(np.abs(p0))


def test_no_wraparound_for_corner_point_mass():
    g = make_grid(8, 64)
    rho = np.zeros((64, 64))
    rho[0, 0] = 1.0
    phi = log_potential(Density(g, rho), build_kernel(g)).values
    X, Y = g.mesh
    d = np.hypot(X - X[0, 0], Y - Y[0, 0])
    for idx in [(-1, -1), (-1, 0), (0, -1), (-1, 31)]:
        assert abs(phi[idx] - math.log(d[idx]) * g.h ** 2) <= 1e-12


def test_discrete_poisson_relation():
    errs = []
    for n in (256, 512):
        g = make_grid(8, n)
        rho = gaussian(8, n) ** 2
        lap = laplacian(log_potential(Density(g, rho), build_kernel(g)))
        inner = g.radius <= 4.0
        errs.append(np.max(np.abs(lap[inner] - 2 * math.pi * rho[inner])) / (2 * math.pi * rho.max()))
    assert errs[0] <= 2e-2
    assert errs[1] < errs[0]


def test_density_rejects_negative():
    g = make_grid(1, 16)
    with pytest.raises(ValueError):
        Density(g, -np.ones((16, 16)))
    u = Field(g, np.ones((16, 16)))
    assert density(u, u).values.max() == 2.0


# --- V_form -----------------------------------------------------------------

def test_V_form_zero_and_symmetry():
    g = make_grid(6, 64)
    K = build_kernel(g)
    assert V_form(g.zeros(), g.zeros(), K) == 0.0
    u, v = (Field(g, a) for a in smooth_pair(6, 64, 7))
    assert V_form(u, v, K) == V_form(v, u, K)


def test_V_form_gaussian_brute_force_n64():
    g = make_grid(8, 64)
    K = build_kernel(g)
    u = Field(g, gaussian(8, 64))
    ref = brute_force_V(u.values ** 2, 8.0, K.origin_value)
    assert abs(V_form(u, g.zeros(), K) - ref) <= 1e-6 * abs(ref)


def test_V_form_gaussian_radial_oracle_n256():
    g = make_grid(8, 256)
    u = Field(g, gaussian(8, 256))
    ref = radial_V(lambda r: math.exp(-r * r))
    assert ref == pytest.approx(gaussian_V_closed_form(), rel=1e-10)
    assert abs(V_form(u, g.zeros(), build_kernel(g)) - ref) <= 1e-3 * abs(ref)


def test_V_form_grid_mismatch():
    g1, g2 = make_grid(8, 32), make_grid(8, 64)
    with pytest.raises(GridMismatchError):
        V_form(g1.zeros(), g2.zeros(), build_kernel(g1))
    with pytest.raises(GridMismatchError):
        V_form(g1.zeros(), g1.zeros(), build_kernel(g2))


@pytest.mark.parametrize("t", [0.5, 0.75])
def test_V_scaling_identity(t):
    g = make_grid(8, 256)
    K = build_kernel(g)
    u, v = (Field(g, a) for a in smooth_pair(8, 256, 11))
    M = l2_norm_sq(u) + l2_norm_sq(v)
    V = V_form(u, v, K)
    Vt = V_form(rescale(u, t), rescale(v, t), K)
    assert abs(Vt - (t ** 4 * math.log(1 / t) * M * M + t ** 4 * V)) <= 5e-3 * abs(V)


# --- V_split ----------------------------------------------------------------

def test_V_split_zero():
    g = make_grid(4, 32)
    assert V_split(g.zeros(), g.zeros(), 2.0, build_kernel(g)) == (0.0, 0.0)


@pytest.mark.parametrize("seed", range(4))
def test_V_split_identity_and_signs(seed):
    g = make_grid(8, 128)
    K = build_kernel(g)
    u, v = (Field(g, a) for a in smooth_pair(8, 128, seed))
    V1, V2 = V_split(u, v, 2.0, K)
    V = V_form(u, v, K)
    assert abs((V1 - V2) - V) <= 1e-10 * abs(V)
    assert V1 >= 0.0 and V2 >= 0.0


def test_V_split_random_rough_fields_nonnegative_V2():
    g = make_grid(4, 32)
    rng = np.random.default_rng(0)
    K = build_kernel(g)
    for _ in range(5):
        u, v = Field(g, rng.normal(size=(32, 32))), Field(g, rng.normal(size=(32, 32)))
        assert V_split(u, v, 3.0, K)[1] >= 0.0


def test_V_split_rejects_lambda():
    g = make_grid(4, 32)
    with pytest.raises(ValueError):
        V_split(g.zeros(), g.zeros(), 1.2, build_kernel(g))

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arcsim.geometry import (
    RadialGrid,
    advective_divergence,
    ball_volume,
    grad_faces,
    h1_norm,
    integrate,
    laplacian,
    lp_norm,
    unit_sphere_area,
)


def test_unit_sphere_area_known_values():
    assert unit_sphere_area(3) == pytest.approx(4.0 * math.pi, rel=1e-15)
    assert unit_sphere_area(2) == pytest.approx(2.0 * math.pi, rel=1e-15)
    assert unit_sphere_area(4) == pytest.approx(2.0 * math.pi**2, rel=1e-15)


def test_ball_volume_known_values():
    assert ball_volume(1.0, 3) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-15)
    assert ball_volume(2.0, 2) == pytest.approx(4.0 * math.pi, rel=1e-15)


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("R,N", [(1.0, 8), (0.5, 64), (3.0, 257)])
def test_volumes_sum_to_ball(n, R, N):
    g = RadialGrid.make(R, N, n)
    assert g.total_volume == pytest.approx(ball_volume(R, n), rel=1e-12)


def test_grid_structure(grid64):
    g = grid64
    assert g.face_areas[0] == 0.0  # exact: no flux through the origin
    assert np.all(np.diff(g.faces) > 0.0)
    assert np.all(g.volumes > 0.0)
    assert g.centers.shape == (g.N,)
    assert g.faces.shape == (g.N + 1,)
    np.testing.assert_allclose(g.centers, 0.5 * (g.faces[:-1] + g.faces[1:]),
                               rtol=0, atol=0)


def test_grid_arrays_immutable(grid64):
    with pytest.raises(ValueError):
        grid64.volumes[0] = 1.0


@pytest.mark.parametrize("bad", [
    dict(R=0.0, N=16), dict(R=-1.0, N=16), dict(R=1.0, N=7),
    dict(R=1.0, N=16, n=1),
])
def test_grid_validation(bad):
    with pytest.raises(ValueError):
        RadialGrid.make(**bad)


def test_check_field_shape(grid64):
    with pytest.raises(ValueError, match="shape"):
        grid64.check_field(np.ones(grid64.N + 1))


def test_integrate_constants(grid64):
    assert integrate(grid64, np.ones(grid64.N)) == pytest.approx(
        4.0 * math.pi / 3.0, rel=1e-12)
    assert integrate(grid64, np.zeros(grid64.N)) == 0.0


def test_integrate_r_squared_second_order():
    # exact integral of r^2 over the unit ball is 4*pi/5
    exact = 4.0 * math.pi / 5.0
    errs = []
    for N in (64, 128, 256):
        g = RadialGrid.make(1.0, N)
        errs.append(abs(integrate(g, g.centers**2) - exact))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


def test_laplacian_of_constant_is_zero(grid64):
    out = laplacian(grid64, np.full(grid64.N, 3.7))
    assert np.all(out == 0.0)


def test_laplacian_of_r_squared_interior():
    # the flux form is exact for r^2 away from the outer Neumann closure:
    # the face gradient of r^2 equals 2*r_face with no truncation error
    g = RadialGrid.make(1.0, 128)
    out = laplacian(g, g.centers**2)
    np.testing.assert_allclose(out[:-1], 2.0 * g.n, rtol=1e-10)
    assert out[-1] < 2.0 * g.n  # boundary cell sees the zero-flux closure


def test_divergence_theorem_telescopes(rng, grid64):
    for _ in range(10):
        f = rng.normal(size=grid64.N)
        total = integrate(grid64, laplacian(grid64, f))
        assert abs(total) <= 1e-10 * (1.0 + np.abs(f).max())


def test_grad_faces_basic(grid64):
    assert np.all(grad_faces(grid64, np.full(grid64.N, 2.0)) == 0.0)
    g = grad_faces(grid64, grid64.centers.copy())
    assert g[0] == 0.0 and g[-1] == 0.0
    np.testing.assert_allclose(g[1:-1], 1.0, rtol=1e-12)


def test_grad_energy_quadrature_converges():
    # int |grad r|^2 over the unit ball = |B_1| = 4*pi/3; the face quadrature
    # misses O(h) at the outer face, so the error should halve with N
    exact = 4.0 * math.pi / 3.0
    errs = []
    for N in (128, 256):
        g = RadialGrid.make(1.0, N)
        gf = grad_faces(g, g.centers.copy())
        val = float(np.sum(g.face_areas * g.h * gf * gf))
        errs.append(abs(val - exact))
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.25)


def test_lp_norm_constant(grid64):
    vol = grid64.total_volume
    for p in (1.0, 1.1, 2.0):
        assert lp_norm(grid64, np.full(grid64.N, -3.0), p) == pytest.approx(
            3.0 * vol ** (1.0 / p), rel=1e-12)
    with pytest.raises(ValueError):
        lp_norm(grid64, np.ones(grid64.N), 0.5)


def test_h1_norm_constant(grid64):
    c = 2.5
    assert h1_norm(grid64, np.full(grid64.N, c)) == pytest.approx(
        c * math.sqrt(grid64.total_volume), rel=1e-12)


def test_advective_divergence_trivial_cases(grid64, rng):
    w = rng.uniform(0.1, 1.0, grid64.N)
    assert np.all(advective_divergence(grid64, w, np.full(grid64.N, 5.0)) == 0.0)
    z = rng.normal(size=grid64.N)
    assert np.all(advective_divergence(grid64, np.zeros(grid64.N), z) == 0.0)


def test_advective_divergence_conserves(grid64, rng):
    for _ in range(10):
        w = rng.uniform(0.0, 2.0, grid64.N)
        z = rng.normal(size=grid64.N)
        for scheme in ("upwind", "centered"):
            total = integrate(grid64, advective_divergence(grid64, w, z, scheme))
            assert abs(total) <= 1e-9 * (1.0 + np.abs(w).max() * np.abs(z).max())


def test_advective_divergence_upwind_picks_donor(grid64):
    # z increasing means outward face velocity, so the donor is the inner cell
    w = np.arange(1.0, grid64.N + 1.0)
    z = grid64.centers.copy()  # grad z = +1 at interior faces
    g = grad_faces(grid64, z)
    w_face = np.zeros(grid64.N + 1)
    w_face[1:-1] = w[:-1]
    expected = np.diff(grid64.face_areas * w_face * g) / grid64.volumes
    np.testing.assert_allclose(advective_divergence(grid64, w, z), expected,
                               rtol=1e-13)


def test_advective_divergence_rejects_unknown_scheme(grid64):
    with pytest.raises(ValueError, match="scheme"):
        advective_divergence(grid64, np.ones(grid64.N), np.ones(grid64.N),
                             scheme="quick")


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=8, max_value=200), st.integers(0, 2**32 - 1))
def test_property_conservation_any_field(N, seed):
    g = RadialGrid.make(1.0, N)
    r = np.random.default_rng(seed)
    f = r.normal(scale=10.0, size=N)
    w = r.uniform(0.0, 5.0, N)
    assert abs(integrate(g, laplacian(g, f))) <= 1e-7
    assert abs(integrate(g, advective_divergence(g, w, f))) <= 1e-7

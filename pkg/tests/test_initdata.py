import numpy as np
import pytest

from arcsim.functionals import AdmissibleSet, admissibility_report
from arcsim.geometry import RadialGrid, h1_norm, integrate, lp_norm
from arcsim.initdata import (
    FamilySpec,
    GridTooCoarse,
    _cell_ramp,
    concentration_family,
    helmholtz_solve,
    original_family_data,
    profile,
    sample_admissible,
)
from arcsim.model import OriginalParams, transform_state


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

def test_profile_constant(grid64):
    np.testing.assert_array_equal(profile(grid64, {"kind": "constant", "value": 2.5}),
                                  np.full(grid64.N, 2.5))


def test_profile_gaussian(grid64):
    p = profile(grid64, {"kind": "gaussian", "amplitude": 3.0, "sigma": 0.2,
                         "floor": 0.1})
    r = grid64.centers
    np.testing.assert_allclose(p, 3.0 * np.exp(-0.5 * (r / 0.2) ** 2) + 0.1,
                               rtol=1e-14)
    assert p[0] > p[-1] > 0.0
    with pytest.raises(ValueError, match="sigma"):
        profile(grid64, {"kind": "gaussian", "amplitude": 1.0, "sigma": 0.0})


def test_profile_plateau(grid64):
    p = profile(grid64, {"kind": "plateau", "r_in": 0.5, "inside": 2.0,
                         "outside": 0.25})
    assert p[0] == 2.0
    assert p[-1] == 0.25
    inside = grid64.centers < 0.5 - grid64.h
    outside = grid64.centers > 0.5 + grid64.h
    assert np.all(p[inside] == 2.0)
    assert np.all(p[outside] == 0.25)
    # default outside keeps the profile strictly positive
    q = profile(grid64, {"kind": "plateau", "r_in": 0.3})
    assert q.min() > 0.0


def test_profile_validation(grid64):
    with pytest.raises(ValueError, match="kind"):
        profile(grid64, {"value": 1.0})
    with pytest.raises(ValueError, match="unknown profile kind"):
        profile(grid64, {"kind": "sinusoid"})
    with pytest.raises(ValueError, match="unknown profile keys"):
        profile(grid64, {"kind": "constant", "value": 1.0, "vlue": 2.0})


def test_cell_ramp_geometry(grid64):
    ramp = _cell_ramp(grid64, 0.5)
    assert np.all(ramp[grid64.centers <= 0.5 - grid64.h] == 1.0)
    assert np.all(ramp[grid64.centers >= 0.5 + grid64.h] == 0.0)
    assert np.all(np.diff(ramp) <= 0.0)


# ---------------------------------------------------------------------------
# family spec
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    dict(mass=0.0, k=4),
    dict(mass=1.0, k=0),
    dict(mass=1.0, k=4, lambda_exponent=0.0),
    dict(mass=1.0, k=4, lambda_exponent=0.5),
    dict(mass=1.0, k=4, mixing="oscillating"),
    dict(mass=1.0, k=4, eps0=1.0),
    dict(mass=1.0, k=4, eps0=-0.1),
    dict(mass=1.0, k=4, eps_exponent=0.0),
])
def test_family_spec_rejects(kwargs):
    with pytest.raises(ValueError):
        FamilySpec(**kwargs)


def test_family_spec_derived_quantities():
    spec = FamilySpec(mass=1.0, k=16, lambda_exponent=0.25, eps0=0.4,
                      eps_exponent=0.5)
    assert spec.tent_height == 2.0           # 16^(1/4)
    assert spec.eps_k == pytest.approx(0.1)  # 0.4 * 16^(-1/2)
    fixed = FamilySpec(mass=1.0, k=16, mixing="fixed", eps0=0.4)
    assert fixed.eps_k == 0.4


# ---------------------------------------------------------------------------
# concentration family
# ---------------------------------------------------------------------------

def test_family_exact_mass_and_positivity(grid256):
    for k in (1, 4, 16, 64):
        spec = FamilySpec(mass=7.0, k=k)
        w, z = concentration_family(grid256, spec)
        assert integrate(grid256, w) == pytest.approx(7.0, rel=1e-14)
        assert w.min() > 0.0
        assert np.isfinite(z).all()


def test_family_grid_too_coarse(grid64):
    with pytest.raises(GridTooCoarse, match="cells"):
        concentration_family(grid64, FamilySpec(mass=1.0, k=32))


def test_family_degenerate_weight_returns_base(grid64):
    spec = FamilySpec(mass=3.0, k=4, eps0=0.0,
                      base_w={"kind": "gaussian", "amplitude": 1.0,
                              "sigma": 0.4, "floor": 0.2},
                      base_z={"kind": "constant", "value": 1.5})
    w, z = concentration_family(grid64, spec)
    base = profile(grid64, spec.base_w)
    np.testing.assert_allclose(w, base * (3.0 / integrate(grid64, base)),
                               rtol=1e-14)
    np.testing.assert_array_equal(z, np.full(grid64.N, 1.5))


def test_family_tent_is_localized(grid256):
    spec = FamilySpec(mass=5.0, k=8, base_z={"kind": "constant", "value": 2.0})
    w, z = concentration_family(grid256, spec)
    outside = grid256.centers >= grid256.R / 8
    np.testing.assert_array_equal(z[outside], 2.0)
    assert z[0] > 2.0
    assert z.max() <= 2.0 + spec.tent_height


def test_family_rejects_nonpositive_base(grid64):
    spec = FamilySpec(mass=1.0, k=4, base_w={"kind": "constant", "value": 0.0})
    with pytest.raises(ValueError, match="positive"):
        concentration_family(grid64, spec)


def test_family_tent_vanishes_in_h1_at_the_designed_rate():
    # ||z_k - base||_{W^{1,2}}^2 = k^(2 lambda) (int tent^2 + int |grad tent|^2)
    # ~ k^(1/2) * k^(-1) for lambda = 1/4, so the log-log slope is about -1/2
    grid = RadialGrid.make(1.0, 512)
    ks = [4, 8, 16, 32, 64]
    norms2 = []
    for k in ks:
        w, z = concentration_family(grid, FamilySpec(mass=5.0, k=k))
        norms2.append(h1_norm(grid, z) ** 2)
    assert all(b < a for a, b in zip(norms2, norms2[1:]))
    slope = np.polyfit(np.log(ks), np.log(norms2), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.1)


def test_family_density_converges_in_weak_lp():
    # the decaying mixing weight makes ||w_k - base||_{L^p} shrink for p
    # slightly above 1 even though the concentrated core grows in sup norm
    grid = RadialGrid.make(1.0, 512)
    base = np.ones(grid.N)
    base *= 5.0 / integrate(grid, base)
    devs, sups = [], []
    for k in (4, 8, 16, 32, 64):
        w, z = concentration_family(grid, FamilySpec(mass=5.0, k=k))
        devs.append(lp_norm(grid, w - base, 1.1))
        sups.append(w.max())
    assert all(b < a for a, b in zip(devs, devs[1:]))
    assert sups[-1] > sups[0]


# ---------------------------------------------------------------------------
# helmholtz solve
# ---------------------------------------------------------------------------

def test_helmholtz_constant(grid64):
    z = helmholtz_solve(grid64, np.full(grid64.N, 3.0), a=2.0)
    np.testing.assert_allclose(z, 1.5, rtol=1e-12)


def test_helmholtz_linearity(grid64, rng):
    a = 1.3
    w1 = rng.uniform(0, 2, grid64.N)
    w2 = rng.uniform(0, 2, grid64.N)
    z12 = helmholtz_solve(grid64, 2.0 * w1 - 0.5 * w2, a)
    z1 = helmholtz_solve(grid64, w1, a)
    z2 = helmholtz_solve(grid64, w2, a)
    np.testing.assert_allclose(z12, 2.0 * z1 - 0.5 * z2, rtol=1e-12, atol=1e-14)


def test_helmholtz_manufactured_solution_second_order():
    # phi = cos(pi r) + 2 satisfies the no-flux conditions at both ends;
    # feed it through a phi - lap phi and recover it at second order
    a = 2.0
    errs = []
    for N in (64, 128, 256):
        g = RadialGrid.make(1.0, N)
        r = g.centers
        phi = np.cos(np.pi * r) + 2.0
        w = a * phi + np.pi ** 2 * np.cos(np.pi * r) \
            + 2.0 * np.pi * np.sin(np.pi * r) / r
        z = helmholtz_solve(g, w, a)
        errs.append(np.abs(z - phi).max())
    assert errs[0] / errs[1] >= 3.5
    assert errs[1] / errs[2] >= 3.5


def test_helmholtz_discrete_residual(grid256, rng):
    from arcsim.geometry import laplacian
    w = rng.uniform(0.0, 5.0, grid256.N)
    a = 0.7
    z = helmholtz_solve(grid256, w, a)
    resid = a * z - laplacian(grid256, z) - w
    assert np.abs(resid).max() <= 1e-10 * np.abs(w).max()


def test_helmholtz_rejects_bad_decay(grid64):
    with pytest.raises(ValueError):
        helmholtz_solve(grid64, np.ones(grid64.N), a=0.0)


# ---------------------------------------------------------------------------
# admissible sampler
# ---------------------------------------------------------------------------

SAMPLE_SPEC = AdmissibleSet(mass=10.0, z_l1_bound=5.0, envelope_amplitude=2.0,
                            envelope_exponent=1.5)


def test_sampler_deterministic(grid256):
    w1, z1 = sample_admissible(grid256, SAMPLE_SPEC, seed=42)
    w2, z2 = sample_admissible(grid256, SAMPLE_SPEC, seed=42)
    np.testing.assert_array_equal(w1, w2)
    np.testing.assert_array_equal(z1, z2)
    w3, _ = sample_admissible(grid256, SAMPLE_SPEC, seed=43)
    assert not np.array_equal(w1, w3)


def test_sampler_members_are_admissible(grid256):
    for seed in range(50):
        w, z = sample_admissible(grid256, SAMPLE_SPEC, seed)
        rep = admissibility_report(grid256, w, z, SAMPLE_SPEC)
        assert rep.passed, f"seed {seed}: {rep}"


def test_sampler_mass_is_exact(grid256):
    errs = [abs(integrate(grid256, sample_admissible(grid256, SAMPLE_SPEC, s)[0])
                - SAMPLE_SPEC.mass)
            for s in range(100)]
    assert max(errs) <= 1e-12 * SAMPLE_SPEC.mass


def test_sampler_covers_both_signs(grid256):
    signs = set()
    for seed in range(20):
        _, z = sample_admissible(grid256, SAMPLE_SPEC, seed)
        signs.add(np.sign(z[0]))
    assert signs == {-1.0, 1.0}


# ---------------------------------------------------------------------------
# original-variable data
# ---------------------------------------------------------------------------

def test_original_family_data_transforms_back(grid256):
    params = OriginalParams(2, 1, 3, 1, 1, 4)  # s = 5
    spec = FamilySpec(mass=5.0, k=8, base_z={"kind": "constant", "value": 1.0})
    w_k, z_k = concentration_family(grid256, spec)
    state = original_family_data(grid256, spec, params,
                                 v2_base={"kind": "constant", "value": 0.2})
    assert state.u.min() >= 0.0
    assert state.v1.min() >= 0.0
    assert state.v2.min() >= 0.0
    t = transform_state(state, params)
    np.testing.assert_allclose(t.w, w_k, rtol=1e-12)
    np.testing.assert_allclose(t.z, z_k, rtol=1e-12, atol=1e-13)


def test_original_family_data_outside_attraction(grid256):
    params = OriginalParams(1, 2, 1, 1, 1, 1)  # s = -1: no transform exists
    spec = FamilySpec(mass=5.0, k=8)
    w_k, _ = concentration_family(grid256, spec)
    state = original_family_data(grid256, spec, params,
                                 v2_base={"kind": "constant", "value": 0.0})
    np.testing.assert_allclose(state.u, w_k, rtol=1e-14)


def test_original_family_data_rejects_negative_v2_base(grid256):
    params = OriginalParams(2, 1, 3, 1, 1, 4)
    with pytest.raises(ValueError, match="nonnegative"):
        original_family_data(grid256, FamilySpec(mass=1.0, k=8), params,
                             v2_base={"kind": "constant", "value": -1.0})

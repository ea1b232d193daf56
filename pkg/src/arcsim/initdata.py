"""Initial-data constructions: baselines, the concentration family, samplers.

The concentration family indexed by k produces pairs (w_k, z_k) at a fixed
mass m that stay close to a smooth baseline in the weak norms while driving
the free energy down:

* w_k mixes the mass-normalized baseline with a unit-mass plateau on the ball
  of radius R/k (smoothed over one grid cell), with a mixing weight eps_k;
* z_k adds a tent of height k^lambda_exponent supported on the same ball.

The default mixing weight decays, eps_k = eps0 * k^(-eps_exponent), which is
what makes ||w_k - base||_{L^p} shrink for the small p > 1 where convergence
is claimed while the concentrated pair still carries enough mass to matter;
a fixed weight (``mixing="fixed"``) is kept for blow-up scenarios where core
mass, not convergence, is the point.  lambda_exponent must stay below 1/2 or
the tent stops vanishing in W^{1,2}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solveh_banded

from .functionals import AdmissibleSet
from .geometry import RadialGrid, integrate
from .model import OriginalParams, OriginalState, transform_params

__all__ = [
    "GridTooCoarse",
    "profile",
    "FamilySpec",
    "concentration_family",
    "original_family_data",
    "helmholtz_solve",
    "sample_admissible",
]


class GridTooCoarse(ValueError):
    """The concentration scale R/k is not resolved by at least 3 cells."""


def profile(grid: RadialGrid, spec: dict) -> np.ndarray:
    """Evaluate an analytic radial profile descriptor on cell centers.

    Descriptors (dicts, as read from config files):
      {kind: constant, value: c}
      {kind: gaussian, amplitude: A, sigma: s, floor: f=0}   A*exp(-r^2/(2 s^2)) + f
      {kind: plateau, r_in: r, inside: hi=1, outside: lo=1e-8*hi}
    The plateau steps from `inside` to `outside` linearly over one grid cell
    so it stays strictly positive and mesh-resolved.
    """
    if "kind" not in spec:
        raise ValueError(f"profile descriptor needs a 'kind': {spec!r}")
    kind = spec["kind"]
    extra = set(spec) - {"kind", "value", "amplitude", "sigma", "floor",
                         "r_in", "inside", "outside"}
    if extra:
        raise ValueError(f"unknown profile keys {sorted(extra)} in {spec!r}")
    r = grid.centers
    if kind == "constant":
        return np.full(grid.N, float(spec["value"]))
    if kind == "gaussian":
        amp = float(spec["amplitude"])
        sigma = float(spec["sigma"])
        if sigma <= 0.0:
            raise ValueError(f"gaussian sigma must be > 0, got {sigma}")
        return amp * np.exp(-0.5 * (r / sigma) ** 2) + float(spec.get("floor", 0.0))
    if kind == "plateau":
        r_in = float(spec["r_in"])
        inside = float(spec.get("inside", 1.0))
        outside = float(spec.get("outside", 1e-8 * inside))
        ramp = _cell_ramp(grid, r_in)
        return outside + (inside - outside) * ramp
    raise ValueError(f"unknown profile kind {kind!r}")


def _cell_ramp(grid: RadialGrid, radius: float) -> np.ndarray:
    """1 inside B_radius, 0 outside, linear over the one-cell transition."""
    return np.clip((radius + 0.5 * grid.h - grid.centers) / grid.h, 0.0, 1.0)


@dataclass(frozen=True)
class FamilySpec:
    """Recipe for one member of the concentration family."""

    mass: float
    k: int
    base_w: dict = field(default_factory=lambda: {"kind": "constant", "value": 1.0})
    base_z: dict = field(default_factory=lambda: {"kind": "constant", "value": 0.0})
    lambda_exponent: float = 0.25
    mixing: str = "decaying"
    eps0: float = 0.5
    eps_exponent: float = 0.4

    def __post_init__(self) -> None:
        if not self.mass > 0.0:
            raise ValueError(f"mass must be > 0, got {self.mass}")
        if int(self.k) < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        if not 0.0 < self.lambda_exponent < 0.5:
            raise ValueError(
                "lambda_exponent must lie in (0, 1/2) so the tent vanishes in "
                f"W^(1,2); got {self.lambda_exponent}"
            )
        if self.mixing not in ("decaying", "fixed"):
            raise ValueError(f"mixing must be 'decaying' or 'fixed', got {self.mixing!r}")
        if not 0.0 <= self.eps0 < 1.0:
            raise ValueError(f"eps0 must lie in [0, 1), got {self.eps0}")
        if self.eps_exponent <= 0.0:
            raise ValueError(f"eps_exponent must be > 0, got {self.eps_exponent}")

    @property
    def eps_k(self) -> float:
        if self.mixing == "fixed":
            return self.eps0
        return self.eps0 * float(self.k) ** (-self.eps_exponent)

    @property
    def tent_height(self) -> float:
        return float(self.k) ** self.lambda_exponent


def concentration_family(grid: RadialGrid, spec: FamilySpec) -> tuple[np.ndarray, np.ndarray]:
    """Build (w_k, z_k); mass of w_k equals spec.mass exactly after renormalization."""
    base_w = profile(grid, spec.base_w)
    if base_w.min() <= 0.0:
        raise ValueError("base_w must be strictly positive everywhere")
    base_mass = integrate(grid, base_w)
    w_base = base_w * (spec.mass / base_mass)
    base_z = profile(grid, spec.base_z)

    eps = spec.eps_k
    if eps == 0.0:
        # degenerate index: no concentrated pair at all
        return w_base, base_z

    core_radius = grid.R / spec.k
    n_core = int(np.count_nonzero(grid.centers < core_radius))
    if n_core < 3:
        raise GridTooCoarse(
            f"concentration ball R/k={core_radius:g} covers only {n_core} cells "
            f"(need >= 3); refine the grid or lower k"
        )
    plateau = _cell_ramp(grid, core_radius)
    plateau /= integrate(grid, plateau)

    w = (1.0 - eps) * w_base + eps * spec.mass * plateau
    w *= spec.mass / integrate(grid, w)
    if w.min() <= 0.0:
        raise ValueError("family member lost positivity; check the baselines")

    tent = np.maximum(0.0, 1.0 - spec.k * grid.centers / grid.R)
    z = base_z + spec.tent_height * tent
    return w, z


def original_family_data(grid: RadialGrid, spec: FamilySpec,
                         params: OriginalParams, v2_base: dict) -> OriginalState:
    """Initial (u, v1, v2) carrying the family pair in original variables.

    In the attraction-dominated regime u = w_k / (chi*alpha - xi*gamma), so
    the combined-drift transform of the returned state is exactly (w_k, z_k).
    Otherwise no such transform exists and u = w_k directly: the control runs
    outside that regime reuse the same concentration shape at unit scale.
    v1 is the positive part of (xi*v2_base + z_k)/chi, and v2 closes the
    relation chi*v1 - xi*v2 = z_k; all three components are nonnegative by
    construction.
    """
    s = params.dominance
    w, z = concentration_family(grid, spec)
    v2_baseline = profile(grid, v2_base)
    if v2_baseline.min() < 0.0:
        raise ValueError("v2_base must be nonnegative")
    v1 = np.maximum(params.xi * v2_baseline + z, 0.0) / params.chi
    v2 = (params.chi * v1 - z) / params.xi
    np.clip(v2, 0.0, None, out=v2)  # exact zeros where the positive part binds
    return OriginalState(u=w / s if s > 0.0 else w, v1=v1, v2=v2)


def helmholtz_solve(grid: RadialGrid, w: np.ndarray, a: float) -> np.ndarray:
    """Solve -lap z + a z = w with the natural no-flux boundary, a > 0.

    Uses the volume-weighted symmetric positive definite banded form; the
    residual of the returned z satisfies ||a z - lap z - w||_inf <=
    1e-10 ||w||_inf on any admissible grid (checked in the tests, not here).
    """
    if not a > 0.0:
        raise ValueError(f"decay coefficient a must be > 0, got {a}")
    w = grid.check_field(w, "w")
    V = grid.volumes
    coupling = grid.face_areas[1:-1] / grid.h
    ab = np.zeros((2, grid.N))
    ab[0] = a * V
    ab[0, :-1] += coupling
    ab[0, 1:] += coupling
    ab[1, :-1] = -coupling
    return solveh_banded(ab, V * w, lower=True, check_finite=False)


def sample_admissible(grid: RadialGrid, spec: AdmissibleSet,
                      seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw one admissible pair (w, z), deterministic per seed.

    w is a Dirichlet-weighted mixture of a uniform background and a few
    smoothed plateaus, renormalized to the exact mass budget.  z is a signed,
    mollified power law B' (r^2 + r_s^2)^(-kappa'/2) with kappa' >= the
    envelope exponent and B' small enough that the pointwise envelope holds,
    then rescaled if either the envelope or the L1 budget binds.  The width
    r_s is log-uniform from sharp spikes (r_s << R) out to near-flat profiles
    (r_s >> R, where usually the L1 budget binds); the flat end is where the
    concentration ratio approaches its supremum over the class, so sweeps of
    this sampler see a stable empirical maximum.
    """
    spec.validate_for_dimension(grid.n)
    rng = np.random.default_rng(seed)

    n_plateaus = int(rng.integers(2, 5))
    weights = rng.dirichlet(np.ones(n_plateaus + 1))
    w = (0.15 + weights[0]) * np.ones(grid.N)
    for i in range(n_plateaus):
        radius = rng.uniform(0.15, 1.0) * grid.R
        bump = _cell_ramp(grid, radius)
        w += weights[1 + i] * bump / integrate(grid, bump)
    w *= spec.mass / integrate(grid, w)

    kappa = spec.envelope_exponent
    kappa_s = kappa + rng.uniform(0.0, 0.5)
    r_s = grid.R * 10.0 ** rng.uniform(-1.3, 0.7)
    amp = spec.envelope_amplitude * min(1.0, r_s ** (kappa_s - kappa)) * rng.uniform(0.3, 0.9)
    sign = 1.0 if rng.random() < 0.5 else -1.0
    z = sign * amp * (grid.centers**2 + r_s**2) ** (-0.5 * kappa_s)

    envelope = float(np.max(grid.centers**kappa * np.abs(z)))
    if envelope > 0.999 * spec.envelope_amplitude:
        z *= 0.999 * spec.envelope_amplitude / envelope
    z_l1 = integrate(grid, np.abs(z))
    if z_l1 > 0.999 * spec.z_l1_bound:
        z *= 0.999 * spec.z_l1_bound / z_l1
    return w, z

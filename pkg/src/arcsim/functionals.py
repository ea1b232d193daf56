"""Energy, dissipation, boundedness monitors, and per-step diagnostics.

The central objects, all evaluated on the combined-drift fields (w, z, v):

* ``energy``       E = int w ln w + (a/2) int z^2 + (1/2) int |grad z|^2 - int w z
* ``dissipation``  D = int w |grad(ln w - z)|^2 + int (a z - lap z - w)^2 >= 0
* ``energy_source``    b * int v (a z - lap z - w)

along the flow dE/dt + D = source, so the recorded residual
|dE/dt + D - source| measures how well a trajectory honours the identity.
The sign convention of the defect q = a z - lap z - w is the one under which
the identity closes and the pointwise Young split
source <= D/2 + (b^2/2) int v^2 is exact; for z solving the Helmholtz
relation -lap z + a z = w the defect vanishes while the opposite convention
evaluates to exactly 2w (see the sign-check test).

Entropy handling: cells with w <= w_floor contribute 0 to w ln w (the
continuity limit x ln x -> 0), and faces adjacent to such cells contribute 0
to the flux term.  No additive regularization anywhere.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields as dataclass_fields

import numpy as np

from .geometry import RadialGrid, grad_faces, integrate, laplacian
from .model import TransformedParams

__all__ = [
    "W_FLOOR",
    "SpacingError",
    "signal_defect",
    "energy",
    "dissipation",
    "dissipation_parts",
    "energy_source",
    "energy_residual",
    "MonitorValues",
    "monitors",
    "AdmissibleSet",
    "AdmissibilityReport",
    "admissibility_report",
    "ConcentrationTerms",
    "concentration_inequality_terms",
    "concentration_ratio",
    "superlinear_exponent",
    "DiagnosticsRecord",
    "CSV_COLUMNS",
    "make_record",
    "make_density_record",
    "fill_residuals",
]

log = logging.getLogger(__name__)

# hard-zero threshold for the entropy and flux terms; never added to w
W_FLOOR = 1e-300


class SpacingError(ValueError):
    """Record times unsuitable for the centered residual estimate."""


def _entropy(grid: RadialGrid, w: np.ndarray) -> float:
    vals = np.zeros_like(w)
    mask = w > W_FLOOR
    wm = w[mask]
    vals[mask] = wm * np.log(wm)
    return float(np.dot(vals, grid.volumes))


def _grad_sq_integral(grid: RadialGrid, f: np.ndarray) -> float:
    g = grad_faces(grid, f)
    return float(np.sum(grid.face_areas * grid.h * g * g))


def signal_defect(grid: RadialGrid, w: np.ndarray, z: np.ndarray, a: float) -> np.ndarray:
    """q = a*z - lap z - w, the residual of the quasi-stationary signal balance."""
    return a * z - laplacian(grid, z) - w


def energy(grid: RadialGrid, w: np.ndarray, z: np.ndarray, a: float) -> float:
    """Free-energy functional of the pair (w, z)."""
    w = grid.check_field(w, "w")
    z = grid.check_field(z, "z")
    return (_entropy(grid, w)
            + 0.5 * a * integrate(grid, z * z)
            + 0.5 * _grad_sq_integral(grid, z)
            - integrate(grid, w * z))


def dissipation_parts(
    grid: RadialGrid,
    w: np.ndarray,
    z: np.ndarray,
    a: float,
    w_face: str = "harmonic",
    w_floor: float = W_FLOOR,
) -> tuple[float, float]:
    """(flux term, defect term) of the dissipation, both >= 0.

    flux term   int w |grad(ln w - z)|^2 by face quadrature, with the face
                value of w a harmonic mean (arithmetic via ``w_face``) and
                faces touching a cell with w <= w_floor contributing zero;
    defect term int (a z - lap z - w)^2 by cell quadrature.
    """
    if w_face not in ("harmonic", "arithmetic"):
        raise ValueError(f"w_face must be 'harmonic' or 'arithmetic', got {w_face!r}")
    w = grid.check_field(w, "w")
    z = grid.check_field(z, "z")
    wl, wr = w[:-1], w[1:]
    ok = (wl > w_floor) & (wr > w_floor)
    gz = grad_faces(grid, z)[1:-1]
    diff = np.zeros(grid.N - 1)
    wbar = np.zeros(grid.N - 1)
    if np.any(ok):
        diff[ok] = (np.log(wr[ok]) - np.log(wl[ok])) / grid.h - gz[ok]
        if w_face == "harmonic":
            wbar[ok] = 2.0 * wl[ok] * wr[ok] / (wl[ok] + wr[ok])
        else:
            wbar[ok] = 0.5 * (wl[ok] + wr[ok])
    flux = float(np.sum(grid.face_areas[1:-1] * grid.h * wbar * diff * diff))
    q = signal_defect(grid, w, z, a)
    defect = integrate(grid, q * q)
    return flux, defect


def dissipation(grid: RadialGrid, w: np.ndarray, z: np.ndarray, a: float,
                w_face: str = "harmonic") -> float:
    """Total dissipation along the flow; nonnegative by construction."""
    flux, defect = dissipation_parts(grid, w, z, a, w_face=w_face)
    return flux + defect


def energy_source(grid: RadialGrid, w: np.ndarray, z: np.ndarray,
                  v: np.ndarray, a: float, b: float) -> float:
    """b * int v q, the coupling term driving the energy identity when b != 0."""
    v = grid.check_field(v, "v")
    q = signal_defect(grid, w, z, a)
    return b * integrate(grid, v * q)


def _three_point_derivative(t0: float, f0: float, t1: float, f1: float,
                            t2: float, f2: float) -> float:
    # derivative at t1 of the quadratic through the three points; second-order
    # accurate for any spacing, reduces to (f2 - f0)/(t2 - t0) when uniform
    return (f0 * (t1 - t2) / ((t0 - t1) * (t0 - t2))
            + f1 * (2.0 * t1 - t0 - t2) / ((t1 - t0) * (t1 - t2))
            + f2 * (t1 - t0) / ((t2 - t0) * (t2 - t1)))


def energy_residual(rec0: "DiagnosticsRecord", rec1: "DiagnosticsRecord",
                    rec2: "DiagnosticsRecord") -> float:
    """|dE/dt + D - source| at the middle of three consecutive records."""
    t0, t1, t2 = rec0.t, rec1.t, rec2.t
    dt01 = t1 - t0
    dt12 = t2 - t1
    if dt01 <= 0.0 or dt12 <= 0.0:
        raise SpacingError(f"record times must increase strictly: {t0}, {t1}, {t2}")
    ratio = max(dt01, dt12) / min(dt01, dt12)
    if ratio > 100.0:
        raise SpacingError(
            f"record spacing ratio {ratio:.3g} too lopsided for a centered estimate"
        )
    dEdt = _three_point_derivative(t0, rec0.energy, t1, rec1.energy, t2, rec2.energy)
    return abs(dEdt + rec1.dissipation - rec1.source)


@dataclass(frozen=True)
class MonitorValues:
    """The four boundedness monitors of a trajectory."""

    z_l1: float
    grad_z_lp: float
    decay_envelope: float
    v_l2: float


def monitors(grid: RadialGrid, z: np.ndarray, v: np.ndarray,
             p: float = 1.25, kappa: float = 1.5) -> MonitorValues:
    """L1 of z, L^p of grad z, the decay envelope sup r^kappa |z|, L2 of v.

    Values of p outside (1, n/(n-1)) are allowed but logged: outside that
    range the gradient norm carries no boundedness guarantee.
    """
    z = grid.check_field(z, "z")
    v = grid.check_field(v, "v")
    p = float(p)
    if p <= 0.0:
        raise ValueError(f"p must be positive, got {p}")
    p_hi = grid.n / (grid.n - 1)
    if not 1.0 < p < p_hi:
        log.warning("gradient norm exponent p=%g outside (1, %g); no bound applies",
                    p, p_hi)
    g = grad_faces(grid, z)
    grad_lp = float(np.sum(grid.face_areas * grid.h * np.abs(g) ** p)) ** (1.0 / p)
    env = float(np.max(grid.centers ** kappa * np.abs(z)))
    return MonitorValues(
        z_l1=integrate(grid, np.abs(z)),
        grad_z_lp=grad_lp,
        decay_envelope=env,
        v_l2=math.sqrt(integrate(grid, v * v)),
    )


@dataclass(frozen=True)
class AdmissibleSet:
    """Budgets of the admissible class of pairs (w, z).

    mass: exact mass of w; z_l1_bound: budget for int |z|;
    envelope_amplitude/envelope_exponent: pointwise bound
    |z(r)| <= amplitude * r^(-exponent), with exponent > n-2.
    """

    mass: float
    z_l1_bound: float
    envelope_amplitude: float
    envelope_exponent: float

    def __post_init__(self) -> None:
        for name in ("mass", "z_l1_bound", "envelope_amplitude", "envelope_exponent"):
            value = float(getattr(self, name))
            if not value > 0.0:
                raise ValueError(f"{name} must be > 0, got {value}")
            object.__setattr__(self, name, value)

    def validate_for_dimension(self, n: int) -> None:
        if not self.envelope_exponent > n - 2:
            raise ValueError(
                f"envelope_exponent must exceed n-2={n - 2}, "
                f"got {self.envelope_exponent}"
            )


@dataclass(frozen=True)
class AdmissibilityReport:
    mass: float
    mass_error: float
    w_min: float
    z_l1: float
    envelope: float
    ok_mass: bool
    ok_positive: bool
    ok_z_l1: bool
    ok_envelope: bool

    @property
    def passed(self) -> bool:
        return self.ok_mass and self.ok_positive and self.ok_z_l1 and self.ok_envelope


def admissibility_report(grid: RadialGrid, w: np.ndarray, z: np.ndarray,
                         spec: AdmissibleSet) -> AdmissibilityReport:
    """Measure a pair against the admissible-set budgets."""
    spec.validate_for_dimension(grid.n)
    w = grid.check_field(w, "w")
    z = grid.check_field(z, "z")
    mass = integrate(grid, w)
    mass_error = abs(mass - spec.mass)
    z_l1 = integrate(grid, np.abs(z))
    env = float(np.max(grid.centers ** spec.envelope_exponent * np.abs(z)))
    slack = 1.0 + 1e-12
    return AdmissibilityReport(
        mass=mass,
        mass_error=mass_error,
        w_min=float(w.min()),
        z_l1=z_l1,
        envelope=env,
        ok_mass=mass_error <= 1e-8 * (1.0 + spec.mass),
        ok_positive=bool(w.min() > 0.0),
        ok_z_l1=z_l1 <= spec.z_l1_bound * slack,
        ok_envelope=env <= spec.envelope_amplitude * slack,
    )


def superlinear_exponent(kappa: float, n: int = 3) -> float:
    """Exponent theta(kappa) = (2n+4)kappa / ((2n+4)kappa + n), in (1/2, 1).

    Governs the superlinear power 1/theta in the comparison inequality;
    requires the envelope exponent kappa > n-2.
    """
    n = int(n)
    if n < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    kappa = float(kappa)
    if not kappa > n - 2:
        raise ValueError(f"kappa must exceed n-2={n - 2}, got {kappa}")
    top = (2.0 * n + 4.0) * kappa
    return top / (top + n)


@dataclass(frozen=True)
class ConcentrationTerms:
    """Ingredients of the concentration-control inequality.

    wz_l1:     int w |z|  (the controlled quantity)
    defect_l2: L2 norm of lap z - a z + w (= L2 norm of the signal defect)
    flux_l2:   L2 norm of sqrt(w) grad(ln w - z) (root of the flux dissipation)
    """

    wz_l1: float
    defect_l2: float
    flux_l2: float


def concentration_inequality_terms(grid: RadialGrid, w: np.ndarray,
                                   z: np.ndarray, a: float) -> ConcentrationTerms:
    w = grid.check_field(w, "w")
    z = grid.check_field(z, "z")
    flux, defect_sq = dissipation_parts(grid, w, z, a)
    return ConcentrationTerms(
        wz_l1=integrate(grid, w * np.abs(z)),
        defect_l2=math.sqrt(defect_sq),
        flux_l2=math.sqrt(flux),
    )


def concentration_ratio(terms: ConcentrationTerms, theta: float) -> float:
    """wz_l1 / (defect_l2^(2 theta) + flux_l2 + 1); bounded on the admissible set."""
    if not 0.5 < theta < 1.0:
        raise ValueError(f"theta must lie in (1/2, 1), got {theta}")
    return terms.wz_l1 / (terms.defect_l2 ** (2.0 * theta) + terms.flux_l2 + 1.0)


@dataclass
class DiagnosticsRecord:
    """One diagnostics row; the CSV columns follow field order exactly."""

    t: float
    mass: float
    supnorm: float
    energy: float
    dissipation: float
    source: float
    residual: float  # filled by fill_residuals; NaN at the trajectory ends
    z_l1: float
    grad_z_lp: float
    decay_envelope: float
    v_l2: float
    wz_l1: float
    defect_l2: float
    flux_l2: float


CSV_COLUMNS = tuple(f.name for f in dataclass_fields(DiagnosticsRecord))


def make_record(grid: RadialGrid, w: np.ndarray, z: np.ndarray, v: np.ndarray,
                params: TransformedParams, t: float,
                p: float = 1.25, kappa: float = 1.5) -> DiagnosticsRecord:
    """Full diagnostics of a combined-drift state."""
    mon = monitors(grid, z, v, p=p, kappa=kappa)
    flux, defect_sq = dissipation_parts(grid, w, z, params.a)
    q = signal_defect(grid, w, z, params.a)
    return DiagnosticsRecord(
        t=float(t),
        mass=integrate(grid, w),
        supnorm=float(w.max()),
        energy=energy(grid, w, z, params.a),
        dissipation=flux + defect_sq,
        source=params.b * integrate(grid, v * q),
        residual=math.nan,
        z_l1=mon.z_l1,
        grad_z_lp=mon.grad_z_lp,
        decay_envelope=mon.decay_envelope,
        v_l2=mon.v_l2,
        wz_l1=integrate(grid, w * np.abs(z)),
        defect_l2=math.sqrt(defect_sq),
        flux_l2=math.sqrt(flux),
    )


def make_density_record(grid: RadialGrid, density: np.ndarray, t: float) -> DiagnosticsRecord:
    """Mass/sup-norm row for runs with no combined-drift form (NaN elsewhere)."""
    density = grid.check_field(density, "density")
    nan = math.nan
    return DiagnosticsRecord(
        t=float(t), mass=integrate(grid, density), supnorm=float(density.max()),
        energy=nan, dissipation=nan, source=nan, residual=nan, z_l1=nan,
        grad_z_lp=nan, decay_envelope=nan, v_l2=nan, wz_l1=nan, defect_l2=nan,
        flux_l2=nan,
    )


def fill_residuals(records: list[DiagnosticsRecord]) -> None:
    """Fill the residual column of interior records in place.

    Ends stay NaN, as does any interior record whose neighbours are too
    unevenly spaced for the centered derivative (e.g. a short final
    interval when the horizon falls just past an output stride).
    """
    for i in range(1, len(records) - 1):
        if math.isnan(records[i].energy):
            continue
        try:
            records[i].residual = energy_residual(records[i - 1], records[i],
                                                  records[i + 1])
        except SpacingError:
            pass


def monotone_energy(records: list[DiagnosticsRecord]) -> bool | None:
    """Whether F is nonincreasing across records up to the measured residual.

    Each interval gets an allowance of (largest recorded residual) * dt plus
    a roundoff term; returns None for density-only trajectories, whose rows
    carry no energy values.
    """
    if not records or math.isnan(records[0].energy):
        return None
    resids = [abs(r.residual) for r in records if not math.isnan(r.residual)]
    bound = max(resids) if resids else 0.0
    for r0, r1 in zip(records[:-1], records[1:]):
        allow = bound * (r1.t - r0.t) + 1e-12 * (1.0 + abs(r0.energy))
        if r1.energy - r0.energy > allow:
            return False
    return True

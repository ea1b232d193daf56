"""Adaptive IMEX time integration for both system forms.

Each step treats diffusion and linear decay implicitly (one tridiagonal
solve per field) and the drift term plus cross-coupling sources explicitly,
with the coupling fields frozen at the step start.  The step size follows a
parabolic CFL bound built from the current drift gradients,

    dt = min(dt_max, cfl_safety * h^2 / (2 n + h * max|grad| * n)),

which also guarantees the donor-cell density update stays nonnegative in
exact arithmetic.  Steps that would still lose positivity (only possible
with the centered scheme) are rejected and retried at half the size.

Blow-up is reported in two ways: the density sup-norm crossing a relative
threshold, or the CFL-limited dt falling below dt_min while the sup-norm
was strictly increasing over the last ten accepted steps.  A starved dt
without that growth signature is a solver failure, not blow-up, and raises
SolverStalled.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .functionals import (
    DiagnosticsRecord,
    fill_residuals,
    make_density_record,
    make_record,
)
from .geometry import ADVECTION_SCHEMES, RadialGrid, integrate
from .model import (
    OriginalParams,
    OriginalState,
    Regime,
    TransformedParams,
    TransformedState,
    classify,
    transform_params,
)


class ConfigError(ValueError):
    """Invalid run configuration."""


class PositivityLoss(RuntimeError):
    """A single explicit step produced a negative density."""


class SolverStalled(RuntimeError):
    """dt starved below dt_min without monotone sup-norm growth."""


class SolverFailure(RuntimeError):
    """The state left the valid set (non-finite values)."""


class RunStatus(enum.Enum):
    REACHED_HORIZON = "reached_horizon"
    BLOWUP_DETECTED = "blowup_detected"


# detection labels carried on blow-up outcomes
DETECT_SUP = "sup_threshold"
DETECT_DT = "dt_starvation"


@dataclass(frozen=True)
class SimConfig:
    """Time-integration and diagnostics settings for one run.

    blowup_supnorm_threshold is a factor relative to the initial sup-norm:
    the run stops once sup w >= threshold * sup w(0).
    """

    t_end: float
    dt_init: float = 1e-3
    dt_min: float = 1e-12
    dt_max: float = 1e-2
    cfl_safety: float = 0.9
    blowup_supnorm_threshold: float = 1e6
    advection_scheme: str = "upwind"
    output_stride: int = 100
    diffusion_only: bool = False
    monitor_p: float = 1.25
    monitor_kappa: float = 1.5

    def __post_init__(self):
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ConfigError(f"t_end must be positive and finite, got {self.t_end}")
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ConfigError(
                "need 0 < dt_min <= dt_init <= dt_max, got "
                f"dt_min={self.dt_min}, dt_init={self.dt_init}, dt_max={self.dt_max}"
            )
        if not (0 < self.cfl_safety <= 1):
            raise ConfigError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if not self.blowup_supnorm_threshold > 1:
            raise ConfigError(
                f"blowup_supnorm_threshold must exceed 1, got {self.blowup_supnorm_threshold}"
            )
        if self.advection_scheme not in ADVECTION_SCHEMES:
            raise ConfigError(
                f"advection_scheme must be one of {ADVECTION_SCHEMES}, "
                f"got {self.advection_scheme!r}"
            )
        if not (isinstance(self.output_stride, int) and self.output_stride >= 1):
            raise ConfigError(f"output_stride must be an integer >= 1, got {self.output_stride}")
        if not self.monitor_p > 1:
            raise ConfigError(f"monitor_p must exceed 1, got {self.monitor_p}")
        if not self.monitor_kappa > 0:
            raise ConfigError(f"monitor_kappa must be positive, got {self.monitor_kappa}")


@dataclass
class RunOutcome:
    """Everything a run produced: verdict, counters, and the diagnostics rows."""

    status: RunStatus
    detection: str | None
    t_final: float
    supnorm_final: float
    n_accepted: int
    n_rejected: int
    mass_initial: float
    mass_drift_rel: float
    records: list[DiagnosticsRecord]
    final_state: TransformedState | OriginalState
    snapshots: list[tuple[float, TransformedState | OriginalState]] = field(
        default_factory=list
    )

    @property
    def blew_up(self) -> bool:
        return self.status is RunStatus.BLOWUP_DETECTED


# ---------------------------------------------------------------------------
# single-step wrappers
# ---------------------------------------------------------------------------

def step_transformed(grid: RadialGrid, state: TransformedState,
                     params: TransformedParams, dt: float,
                     scheme: str = "upwind") -> TransformedState:
    """Advance a combined-drift state by one IMEX step of size dt."""
    if scheme not in ADVECTION_SCHEMES:
        raise ConfigError(f"unknown advection scheme {scheme!r}")
    ga = kernels.grid_arrays(grid)
    out = kernels.step_transformed(state.w, state.z, state.v,
                                   params.a, params.b, params.c, params.d,
                                   dt, ga, scheme == "centered")
    if out is None:
        raise PositivityLoss(f"density went negative at dt={dt:g}")
    return TransformedState(w=out[0], z=out[1], v=out[2])


def step_original(grid: RadialGrid, state: OriginalState,
                  params: OriginalParams, dt: float,
                  scheme: str = "upwind") -> OriginalState:
    """Advance an original-variables state by one IMEX step of size dt."""
    if scheme not in ADVECTION_SCHEMES:
        raise ConfigError(f"unknown advection scheme {scheme!r}")
    ga = kernels.grid_arrays(grid)
    out = kernels.step_original(state.u, state.v1, state.v2,
                                params.chi, params.xi, params.alpha,
                                params.beta, params.gamma, params.delta,
                                dt, ga, scheme == "centered")
    if out is None:
        raise PositivityLoss(f"density went negative at dt={dt:g}")
    return OriginalState(u=out[0], v1=out[1], v2=out[2])


# ---------------------------------------------------------------------------
# diffusion-only advance (cross-coupling kept, drift dropped)
# ---------------------------------------------------------------------------

def _advance_diffusion_only(system, fields, pvals, t, t_target, steps_done,
                            n_accept_max, cfg: SimConfig, ga, sup_threshold,
                            sup_hist, hist_count):
    """Python advance loop with the drift term removed.

    Used by the diffusion_only sanity mode; every step is accepted, so the
    dt-starvation branch cannot trigger.
    """
    n_acc = 0
    tiny = 1e-12 * max(1.0, abs(t_target))
    status = kernels.STATUS_CHUNK_DONE
    dt_cap = min(cfg.dt_max, cfg.cfl_safety * ga.h * ga.h / (2.0 * ga.n_dim))
    while n_acc < n_accept_max:
        if t_target - t <= tiny:
            status = kernels.STATUS_REACHED_TARGET
            break
        dt = dt_cap
        if steps_done + n_acc == 0:
            dt = min(dt, cfg.dt_init)
        dt = min(dt, t_target - t)
        f0, f1, f2 = fields
        if system == "transformed":
            a, b, c, d = pvals
            new0 = kernels.implicit_diffusion_solve(f0, 0.0, dt, ga)
            new1 = kernels.implicit_diffusion_solve(f1 + dt * (b * f2 + f0), a, dt, ga)
            new2 = kernels.implicit_diffusion_solve(f2 + dt * d * f0, c, dt, ga)
        else:
            _chi, _xi, alpha, beta, gamma, delta = pvals
            new0 = kernels.implicit_diffusion_solve(f0, 0.0, dt, ga)
            new1 = kernels.implicit_diffusion_solve(f1 + dt * alpha * f0, beta, dt, ga)
            new2 = kernels.implicit_diffusion_solve(f2 + dt * gamma * f0, delta, dt, ga)
        f0[:] = new0
        f1[:] = new1
        f2[:] = new2
        t += dt
        n_acc += 1
        sup = float(f0.max())
        hist_count = kernels._push_hist_py(sup_hist, hist_count, sup)
        if sup >= sup_threshold:
            status = kernels.STATUS_SUP_THRESHOLD
            break
        if t_target - t <= tiny:
            status = kernels.STATUS_REACHED_TARGET
            break
    return t, n_acc, 0, status, hist_count


# ---------------------------------------------------------------------------
# run drivers
# ---------------------------------------------------------------------------

def _next_chunk(steps_done: int, output_stride: int,
                snapshot_stride: int | None) -> int:
    """Accepted steps until the next diagnostics or snapshot event."""
    gap = output_stride - steps_done % output_stride
    if snapshot_stride is not None:
        gap = min(gap, snapshot_stride - steps_done % snapshot_stride)
    return gap


def run(grid: RadialGrid, state, params, config: SimConfig,
        snapshot_stride: int | None = None) -> RunOutcome:
    """Integrate to config.t_end or until blow-up is detected.

    Dispatches on the state/params pair: a TransformedState must come with
    TransformedParams, an OriginalState with OriginalParams.  Diagnostics
    rows are recorded at step 0, every output_stride accepted steps, and at
    the final state.  Original-variables runs in the attraction-dominated
    regime are transformed on the fly for the energy diagnostics; other
    regimes get mass/sup-norm rows only.
    """
    if snapshot_stride is not None and snapshot_stride < 1:
        raise ConfigError(f"snapshot_stride must be >= 1, got {snapshot_stride}")
    if isinstance(state, TransformedState):
        if not isinstance(params, TransformedParams):
            raise ConfigError("TransformedState requires TransformedParams")
        system = "transformed"
        pvals = (params.a, params.b, params.c, params.d)
        rec_params = params
    elif isinstance(state, OriginalState):
        if not isinstance(params, OriginalParams):
            raise ConfigError("OriginalState requires OriginalParams")
        system = "original"
        pvals = (params.chi, params.xi, params.alpha,
                 params.beta, params.gamma, params.delta)
        rec_params = (transform_params(params)
                      if classify(params) is Regime.ATTRACTION_DOMINATED else None)
    else:
        raise ConfigError(f"unsupported state type {type(state).__name__}")
    state.validate(grid)

    fields = [np.array(f, dtype=np.float64) for f in state.as_tuple()]
    ga = kernels.grid_arrays(grid)
    ws = kernels.make_workspace(grid.N)
    sup0 = float(fields[0].max())
    sup_threshold = config.blowup_supnorm_threshold * max(sup0, 1e-300)
    mass0 = integrate(grid, fields[0])
    mass_scale = max(abs(mass0), 1e-300)

    def snapshot():
        if system == "transformed":
            return TransformedState(w=fields[0].copy(), z=fields[1].copy(),
                                    v=fields[2].copy())
        return OriginalState(u=fields[0].copy(), v1=fields[1].copy(),
                             v2=fields[2].copy())

    def record(t: float) -> DiagnosticsRecord:
        if system == "transformed":
            return make_record(grid, fields[0], fields[1], fields[2], rec_params,
                               t, p=config.monitor_p, kappa=config.monitor_kappa)
        if rec_params is not None:
            chi, xi = pvals[0], pvals[1]
            s = chi * pvals[2] - xi * pvals[4]
            w = s * fields[0]
            z = chi * fields[1] - xi * fields[2]
            return make_record(grid, w, z, fields[1], rec_params,
                               t, p=config.monitor_p, kappa=config.monitor_kappa)
        return make_density_record(grid, fields[0], t)

    if config.diffusion_only:
        def advance(t, steps_done, n_max, hist_count):
            return _advance_diffusion_only(system, fields, pvals, t,
                                           config.t_end, steps_done, n_max,
                                           config, ga, sup_threshold,
                                           ws.sup_hist, hist_count)
    elif system == "transformed":
        def advance(t, steps_done, n_max, hist_count):
            return kernels.advance_transformed(
                fields[0], fields[1], fields[2], pvals, t, config.t_end,
                steps_done, n_max, config.dt_init, config.dt_min,
                config.dt_max, config.cfl_safety, sup_threshold,
                config.advection_scheme == "centered", ga, ws, hist_count)
    else:
        def advance(t, steps_done, n_max, hist_count):
            return kernels.advance_original(
                fields[0], fields[1], fields[2], pvals, t, config.t_end,
                steps_done, n_max, config.dt_init, config.dt_min,
                config.dt_max, config.cfl_safety, sup_threshold,
                config.advection_scheme == "centered", ga, ws, hist_count)

    records = [record(0.0)]
    snapshots = [(0.0, snapshot())] if snapshot_stride is not None else []
    last_recorded = 0
    t = 0.0
    steps_done = 0
    n_rejected = 0
    hist_count = 0
    mass_drift = 0.0
    status = None
    detection = None
    while status is None:
        n_max = _next_chunk(steps_done, config.output_stride, snapshot_stride)
        t, n_acc, n_rej, chunk_status, hist_count = advance(
            t, steps_done, n_max, hist_count)
        steps_done += n_acc
        n_rejected += n_rej
        if not np.isfinite(fields[0]).all():
            raise SolverFailure(f"non-finite density at t={t:g}")
        mass_drift = max(mass_drift,
                         abs(integrate(grid, fields[0]) - mass0) / mass_scale)
        if chunk_status == kernels.STATUS_CHUNK_DONE:
            if steps_done % config.output_stride == 0:
                records.append(record(t))
                last_recorded = steps_done
            if snapshot_stride is not None and steps_done % snapshot_stride == 0:
                snapshots.append((t, snapshot()))
            continue
        if chunk_status == kernels.STATUS_DT_STALLED:
            raise SolverStalled(
                f"dt fell below dt_min={config.dt_min:g} at t={t:g} without "
                "monotone sup-norm growth")
        if chunk_status == kernels.STATUS_REACHED_TARGET:
            status = RunStatus.REACHED_HORIZON
        elif chunk_status == kernels.STATUS_SUP_THRESHOLD:
            status = RunStatus.BLOWUP_DETECTED
            detection = DETECT_SUP
        elif chunk_status == kernels.STATUS_DT_STARVED:
            status = RunStatus.BLOWUP_DETECTED
            detection = DETECT_DT
        else:  # pragma: no cover - kernels only emit the statuses above
            raise SolverFailure(f"unknown advance status {chunk_status}")
    if steps_done != last_recorded:
        # A final step can be a float-roundoff sliver (t_end minus an
        # accumulated sum of equal dts); merge it into the last stride
        # record instead of emitting two near-coincident times.
        if len(records) >= 2 and (
                t - records[-1].t) < 1e-6 * (records[-1].t - records[-2].t):
            records[-1] = record(t)
        else:
            records.append(record(t))
    if snapshot_stride is not None and snapshots[-1][0] != t:
        if len(snapshots) >= 2 and (
                t - snapshots[-1][0]) < 1e-6 * (snapshots[-1][0] - snapshots[-2][0]):
            snapshots[-1] = (t, snapshot())
        else:
            snapshots.append((t, snapshot()))
    fill_residuals(records)
    return RunOutcome(
        status=status,
        detection=detection,
        t_final=t,
        supnorm_final=float(fields[0].max()),
        n_accepted=steps_done,
        n_rejected=n_rejected,
        mass_initial=mass0,
        mass_drift_rel=mass_drift,
        records=records,
        final_state=snapshot(),
        snapshots=snapshots,
    )

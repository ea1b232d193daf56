"""Hot numerical kernels: fused IMEX steps and adaptive advance loops.

Two parallel implementations live here, per this package's acceleration
policy:

* loop kernels compiled with numba ``@njit`` (the default whenever numba
  imports), and
* a pure-numpy fallback using vectorized donor-cell updates and banded
  Cholesky solves from scipy.

The environment variable ``ARCSIM_NUMBA`` selects the path at import time:
``0 / false / off / no`` forces the numpy fallback, ``1 / true / on / yes``
requires numba (ImportError if it is missing), anything else auto-detects.
``benchmarks/bench_kernels.py`` times the two paths against each other.

The scheme itself is identical on both paths: implicit Euler for diffusion
and the linear decay terms (tridiagonal solves), explicit donor-cell upwind
advection, explicit cross sources frozen at the beginning of the step.  The
donor form of the advective update plus the no-subtraction structure of the
M-matrix solves make nonnegativity of the advected density exact in floating
point whenever the CFL pre-check passes; a failed pre-check is the rejection
signal (the caller halves dt and retries).  Summing any solve row by cell
volume telescopes, so the advected density's discrete mass is conserved
exactly up to solver roundoff.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

from .geometry import RadialGrid

__all__ = [
    "NUMBA_ENABLED",
    "BACKEND",
    "STATUS_CHUNK_DONE",
    "STATUS_REACHED_TARGET",
    "STATUS_SUP_THRESHOLD",
    "STATUS_DT_STARVED",
    "STATUS_DT_STALLED",
    "GridArrays",
    "Workspace",
    "grid_arrays",
    "make_workspace",
    "thomas_solve",
    "step_transformed",
    "step_original",
    "advance_transformed",
    "advance_original",
]

# advance() chunk exit statuses
STATUS_CHUNK_DONE = 0      # accepted-step budget for this chunk exhausted
STATUS_REACHED_TARGET = 1  # t reached t_target
STATUS_SUP_THRESHOLD = 2   # density sup-norm crossed the blow-up threshold
STATUS_DT_STARVED = 3      # dt < dt_min with sup-norm rising monotonically
STATUS_DT_STALLED = 4      # dt < dt_min without monotone growth

_HIST = 10  # accepted-step sup-norm history used by the starvation test


def _resolve_backend() -> tuple[bool, object]:
    try:
        import numba
    except ImportError:
        numba = None
    raw = os.environ.get("ARCSIM_NUMBA", "auto").strip().lower()
    if raw in ("0", "false", "off", "no"):
        return False, numba
    if raw in ("1", "true", "on", "yes"):
        if numba is None:
            raise ImportError("ARCSIM_NUMBA requests numba but it is not installed")
        return True, numba
    return numba is not None, numba


NUMBA_ENABLED, _numba = _resolve_backend()
BACKEND = "numba" if NUMBA_ENABLED else "numpy"


def _njit(func):
    if _numba is None:
        return None
    return _numba.njit(cache=True)(func)


@dataclass(frozen=True)
class GridArrays:
    """Precomputed per-run grid coefficients consumed by the kernels."""

    A: np.ndarray        # face areas, (N+1,)
    V: np.ndarray        # cell volumes, (N,)
    inv_V: np.ndarray    # 1/V, (N,)
    diff_lo: np.ndarray  # A[j] / (V[j] h), lower diffusive coupling, (N,)
    diff_up: np.ndarray  # A[j+1] / (V[j] h), upper coupling, 0 in last row, (N,)
    h: float
    n_dim: float


def grid_arrays(grid: RadialGrid) -> GridArrays:
    A = grid.face_areas
    V = grid.volumes
    h = grid.h
    diff_lo = A[:-1] / (V * h)
    diff_up = A[1:] / (V * h)
    diff_up = diff_up.copy()
    diff_up[-1] = 0.0  # no flux through the outer boundary face
    return GridArrays(A=A, V=V, inv_V=1.0 / V, diff_lo=diff_lo,
                      diff_up=diff_up, h=h, n_dim=float(grid.n))


@dataclass
class Workspace:
    """Reusable scratch buffers for one run (one per concurrent run).

    f1..f3 receive the stepped fields, g1/g2 the face gradients, r1..r3 the
    reciprocal diagonals of the fused tridiagonal elimination.
    """

    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    sup_hist: np.ndarray


def make_workspace(N: int) -> Workspace:
    return Workspace(
        f1=np.empty(N), f2=np.empty(N), f3=np.empty(N),
        g1=np.empty(N + 1), g2=np.empty(N + 1),
        r1=np.empty(N), r2=np.empty(N), r3=np.empty(N),
        sup_hist=np.zeros(_HIST),
    )


# ---------------------------------------------------------------------------
# loop kernels (numba path)
# ---------------------------------------------------------------------------

def _thomas_loop(lo, di, up, x):
    """Solve the tridiagonal system in place; di and x are overwritten.

    No pivoting: rows are strictly diagonally dominant M-matrix rows
    (off-diagonals <= 0), so the elimination multipliers are <= 0 and the
    substitution sweeps never subtract -- a nonnegative right-hand side yields
    a nonnegative solution exactly, which the positivity guarantee relies on.
    """
    N = x.shape[0]
    for j in range(1, N):
        m = lo[j] / di[j - 1]
        di[j] = di[j] - m * up[j - 1]
        x[j] = x[j] - m * x[j - 1]
    x[N - 1] = x[N - 1] / di[N - 1]
    for j in range(N - 2, -1, -1):
        x[j] = (x[j] - up[j] * x[j + 1]) / di[j]


def _solve_implicit_loop(x, decay, dt, diff_lo, diff_up, lo, di, up):
    """Overwrite x with the solution of (I + dt*decay - dt*Lap) x_new = x."""
    N = x.shape[0]
    for j in range(N):
        cl = dt * diff_lo[j]
        cu = dt * diff_up[j]
        lo[j] = -cl
        up[j] = -cu
        di[j] = 1.0 + dt * decay + cl + cu
    _thomas_loop(lo, di, up, x)


def _solve_implicit3_loop(x1, dec1, x2, dec2, x3, dec3, dt,
                          diff_lo, diff_up, r1, r2, r3):
    """Overwrite x1..x3 with the solutions of (I + dt*dec_i - dt*Lap) y = x_i.

    The three systems share the off-diagonals, and their elimination
    division chains are independent, so fusing them lets the divisions
    pipeline; this is the hot path (three solves per time step, latency
    bound).  Backsubstitution multiplies by the stored reciprocals r1..r3.
    Multipliers stay <= 0 (M-matrix rows) and the eliminated diagonals stay
    >= 1, so nonnegative right-hand sides give nonnegative solutions, the
    same guarantee as _thomas_loop.
    """
    N = x1.shape[0]
    cu = dt * diff_up[0]
    base = 1.0 + dt * diff_lo[0] + cu
    r1[0] = 1.0 / (base + dt * dec1)
    r2[0] = 1.0 / (base + dt * dec2)
    r3[0] = 1.0 / (base + dt * dec3)
    up_prev = -cu
    for j in range(1, N):
        cl = dt * diff_lo[j]
        cu = dt * diff_up[j]
        lo = -cl
        base = 1.0 + cl + cu
        m1 = lo * r1[j - 1]
        m2 = lo * r2[j - 1]
        m3 = lo * r3[j - 1]
        x1[j] -= m1 * x1[j - 1]
        x2[j] -= m2 * x2[j - 1]
        x3[j] -= m3 * x3[j - 1]
        r1[j] = 1.0 / (base + dt * dec1 - m1 * up_prev)
        r2[j] = 1.0 / (base + dt * dec2 - m2 * up_prev)
        r3[j] = 1.0 / (base + dt * dec3 - m3 * up_prev)
        up_prev = -cu
    x1[N - 1] *= r1[N - 1]
    x2[N - 1] *= r2[N - 1]
    x3[N - 1] *= r3[N - 1]
    for j in range(N - 2, -1, -1):
        up_j = -dt * diff_up[j]
        x1[j] = (x1[j] - up_j * x1[j + 1]) * r1[j]
        x2[j] = (x2[j] - up_j * x2[j + 1]) * r2[j]
        x3[j] = (x3[j] - up_j * x3[j + 1]) * r3[j]


def _grad_loop(f, h, g):
    N = f.shape[0]
    g[0] = 0.0
    g[N] = 0.0
    for k in range(1, N):
        g[k] = (f[k] - f[k - 1]) / h


def _max_abs_faces_loop(g):
    m = 0.0
    N1 = g.shape[0]
    for k in range(N1):
        a = abs(g[k])
        if a > m:
            m = a
    return m


def _advect_donor_loop(w, g, dt, A, inv_V, out):
    """Donor-cell advective update: out = w - dt*div(w g).  False on CFL fail."""
    N = w.shape[0]
    for j in range(N):
        gl = g[j]
        gr = g[j + 1]
        leave = A[j] * max(-gl, 0.0) + A[j + 1] * max(gr, 0.0)
        keep = 1.0 - dt * leave * inv_V[j]
        if keep < 0.0:
            return False
        gain = 0.0
        if j > 0:
            gain += A[j] * max(gl, 0.0) * w[j - 1]
        if j < N - 1:
            gain += A[j + 1] * max(-gr, 0.0) * w[j + 1]
        out[j] = keep * w[j] + dt * gain * inv_V[j]
    return True


def _advect_centered_loop(w, g, dt, A, inv_V, out):
    """Centered-face advective update (not positivity preserving)."""
    N = w.shape[0]
    flux_left = 0.0  # A[0] = 0
    for j in range(N):
        if j < N - 1:
            flux_right = A[j + 1] * 0.5 * (w[j] + w[j + 1]) * g[j + 1]
        else:
            flux_right = 0.0
        out[j] = w[j] - dt * (flux_right - flux_left) * inv_V[j]
        flux_left = flux_right


def _step_transformed_loop(w, z, v, a, b, c, d, dt, A, inv_V,
                           diff_lo, diff_up, centered, g,
                           w_new, z_new, v_new, r1, r2, r3):
    # g holds grad z at faces, precomputed by the caller (reused across
    # rejection retries, where the state and hence the gradient is unchanged)
    N = w.shape[0]
    if centered:
        _advect_centered_loop(w, g, dt, A, inv_V, w_new)
    else:
        if not _advect_donor_loop(w, g, dt, A, inv_V, w_new):
            return False
    for j in range(N):
        z_new[j] = z[j] + dt * (b * v[j] + w[j])
        v_new[j] = v[j] + dt * d * w[j]
    _solve_implicit3_loop(w_new, 0.0, z_new, a, v_new, c, dt,
                          diff_lo, diff_up, r1, r2, r3)
    if centered:
        for j in range(N):
            if w_new[j] < 0.0:
                return False
    return True


def _step_original_loop(u, v1, v2, chi, xi, alpha, beta, gamma, delta,
                        dt, A, inv_V, diff_lo, diff_up, centered, g1, g2,
                        u_new, v1_new, v2_new, r1, r2, r3):
    # g1, g2 hold grad v1 and grad v2 at faces, precomputed by the caller
    N = u.shape[0]
    ok = True
    if centered:
        flux_left = 0.0
        for j in range(N):
            if j < N - 1:
                vel = chi * g1[j + 1] - xi * g2[j + 1]
                flux_right = A[j + 1] * 0.5 * (u[j] + u[j + 1]) * vel
            else:
                flux_right = 0.0
            u_new[j] = u[j] - dt * (flux_right - flux_left) * inv_V[j]
            flux_left = flux_right
    else:
        # two donor-cell fluxes: attraction up grad v1, repulsion down grad v2
        for j in range(N):
            gl1 = g1[j]
            gr1 = g1[j + 1]
            gl2 = g2[j]
            gr2 = g2[j + 1]
            leave = (A[j] * (chi * max(-gl1, 0.0) + xi * max(gl2, 0.0))
                     + A[j + 1] * (chi * max(gr1, 0.0) + xi * max(-gr2, 0.0)))
            keep = 1.0 - dt * leave * inv_V[j]
            if keep < 0.0:
                ok = False
                break
            gain = 0.0
            if j > 0:
                gain += A[j] * (chi * max(gl1, 0.0) + xi * max(-gl2, 0.0)) * u[j - 1]
            if j < N - 1:
                gain += A[j + 1] * (chi * max(-gr1, 0.0) + xi * max(gr2, 0.0)) * u[j + 1]
            u_new[j] = keep * u[j] + dt * gain * inv_V[j]
    if not ok:
        return False
    for j in range(N):
        v1_new[j] = v1[j] + dt * alpha * u[j]
        v2_new[j] = v2[j] + dt * gamma * u[j]
    _solve_implicit3_loop(u_new, 0.0, v1_new, beta, v2_new, delta, dt,
                          diff_lo, diff_up, r1, r2, r3)
    if centered:
        for j in range(N):
            if u_new[j] < 0.0:
                return False
    return True


def _push_hist(sup_hist, hist_count, sup):
    if hist_count < _HIST:
        sup_hist[hist_count] = sup
        return hist_count + 1
    for i in range(_HIST - 1):
        sup_hist[i] = sup_hist[i + 1]
    sup_hist[_HIST - 1] = sup
    return hist_count


def _hist_monotone(sup_hist, hist_count):
    if hist_count < _HIST:
        return False
    for i in range(_HIST - 1):
        if not sup_hist[i + 1] > sup_hist[i]:
            return False
    return True


def _sup_loop(f):
    m = f[0]
    for j in range(1, f.shape[0]):
        if f[j] > m:
            m = f[j]
    return m


def _advance_transformed_loop(w, z, v, a, b, c, d,
                              t, t_target, steps_done, n_accept_max,
                              dt_init, dt_min, dt_max, cfl, sup_threshold,
                              centered, A, inv_V, h, n_dim, diff_lo, diff_up,
                              w_new, z_new, v_new, g, r1, r2, r3,
                              sup_hist, hist_count):
    n_acc = 0
    n_rej = 0
    status = STATUS_CHUNK_DONE
    tiny = 1e-12 * max(1.0, abs(t_target))
    while n_acc < n_accept_max:
        if t_target - t <= tiny:
            status = STATUS_REACHED_TARGET
            break
        _grad_loop(z, h, g)
        gmax = _max_abs_faces_loop(g)
        dt = cfl * h * h / (2.0 * n_dim + h * gmax * n_dim)
        if dt > dt_max:
            dt = dt_max
        if steps_done + n_acc == 0 and dt > dt_init:
            dt = dt_init
        starving = dt < dt_min
        if not starving:
            if dt > t_target - t:
                dt = t_target - t
            while not _step_transformed_loop(w, z, v, a, b, c, d, dt,
                                             A, inv_V, diff_lo, diff_up,
                                             centered, g, w_new, z_new, v_new,
                                             r1, r2, r3):
                n_rej += 1
                dt = 0.5 * dt
                if dt < dt_min:
                    starving = True
                    break
        if starving:
            if _hist_monotone(sup_hist, hist_count):
                status = STATUS_DT_STARVED
            else:
                status = STATUS_DT_STALLED
            break
        w[:] = w_new
        z[:] = z_new
        v[:] = v_new
        t = t + dt
        n_acc += 1
        sup = _sup_loop(w)
        hist_count = _push_hist(sup_hist, hist_count, sup)
        if sup >= sup_threshold:
            status = STATUS_SUP_THRESHOLD
            break
        if t_target - t <= tiny:
            status = STATUS_REACHED_TARGET
            break
    return t, n_acc, n_rej, status, hist_count


def _advance_original_loop(u, v1, v2, chi, xi, alpha, beta, gamma, delta,
                           t, t_target, steps_done, n_accept_max,
                           dt_init, dt_min, dt_max, cfl, sup_threshold,
                           centered, A, inv_V, h, n_dim, diff_lo, diff_up,
                           u_new, v1_new, v2_new, g1, g2, r1, r2, r3,
                           sup_hist, hist_count):
    n_acc = 0
    n_rej = 0
    status = STATUS_CHUNK_DONE
    tiny = 1e-12 * max(1.0, abs(t_target))
    while n_acc < n_accept_max:
        if t_target - t <= tiny:
            status = STATUS_REACHED_TARGET
            break
        _grad_loop(v1, h, g1)
        _grad_loop(v2, h, g2)
        gmax = 0.0
        for k in range(g1.shape[0]):
            s = chi * abs(g1[k]) + xi * abs(g2[k])
            if s > gmax:
                gmax = s
        dt = cfl * h * h / (2.0 * n_dim + h * gmax * n_dim)
        if dt > dt_max:
            dt = dt_max
        if steps_done + n_acc == 0 and dt > dt_init:
            dt = dt_init
        starving = dt < dt_min
        if not starving:
            if dt > t_target - t:
                dt = t_target - t
            while not _step_original_loop(u, v1, v2, chi, xi, alpha, beta,
                                          gamma, delta, dt, A, inv_V,
                                          diff_lo, diff_up, centered, g1, g2,
                                          u_new, v1_new, v2_new, r1, r2, r3):
                n_rej += 1
                dt = 0.5 * dt
                if dt < dt_min:
                    starving = True
                    break
        if starving:
            if _hist_monotone(sup_hist, hist_count):
                status = STATUS_DT_STARVED
            else:
                status = STATUS_DT_STALLED
            break
        u[:] = u_new
        v1[:] = v1_new
        v2[:] = v2_new
        t = t + dt
        n_acc += 1
        sup = _sup_loop(u)
        hist_count = _push_hist(sup_hist, hist_count, sup)
        if sup >= sup_threshold:
            status = STATUS_SUP_THRESHOLD
            break
        if t_target - t <= tiny:
            status = STATUS_REACHED_TARGET
            break
    return t, n_acc, n_rej, status, hist_count


if _numba is not None:
    _thomas_loop = _numba.njit(cache=True)(_thomas_loop)
    _solve_implicit_loop = _numba.njit(cache=True)(_solve_implicit_loop)
    _solve_implicit3_loop = _numba.njit(cache=True)(_solve_implicit3_loop)
    _grad_loop = _numba.njit(cache=True)(_grad_loop)
    _max_abs_faces_loop = _numba.njit(cache=True)(_max_abs_faces_loop)
    _advect_donor_loop = _numba.njit(cache=True)(_advect_donor_loop)
    _advect_centered_loop = _numba.njit(cache=True)(_advect_centered_loop)
    _step_transformed_loop = _numba.njit(cache=True)(_step_transformed_loop)
    _step_original_loop = _numba.njit(cache=True)(_step_original_loop)
    _push_hist = _numba.njit(cache=True)(_push_hist)
    _hist_monotone = _numba.njit(cache=True)(_hist_monotone)
    _sup_loop = _numba.njit(cache=True)(_sup_loop)
    _advance_transformed_loop = _numba.njit(cache=True)(_advance_transformed_loop)
    _advance_original_loop = _numba.njit(cache=True)(_advance_original_loop)


# ---------------------------------------------------------------------------
# pure-numpy fallback path
# ---------------------------------------------------------------------------

def _solve_implicit_numpy(rhs, decay, dt, ga: GridArrays):
    """Banded-Cholesky solve of the volume-weighted symmetric form.

    The V-weighted matrix S = diag(V)*(I + dt*decay - dt*Lap) is symmetric
    positive definite with nonpositive off-diagonals, so the Cholesky sweeps
    never subtract on the right-hand-side path and nonnegative input stays
    nonnegative, matching the Thomas kernel's guarantee.
    """
    V = ga.V
    N = V.shape[0]
    coupling = dt * ga.A[1:-1] / ga.h
    ab = np.zeros((2, N))
    ab[0] = V * (1.0 + dt * decay)
    ab[0, :-1] += coupling
    ab[0, 1:] += coupling
    ab[1, :-1] = -coupling
    return solveh_banded(ab, V * rhs, lower=True, check_finite=False)


def implicit_diffusion_solve(rhs, decay, dt, ga: GridArrays):
    """Public alias of the banded solve of (I + dt*decay - dt*Lap) x = rhs."""
    return _solve_implicit_numpy(np.asarray(rhs, dtype=np.float64), decay, dt, ga)


def thomas_solve_numpy(lo, di, up, rhs):
    """Tridiagonal solve via scipy's banded LU (numpy-path reference)."""
    from scipy.linalg import solve_banded
    N = len(di)
    ab = np.zeros((3, N))
    ab[0, 1:] = up[:-1]
    ab[1] = di
    ab[2, :-1] = lo[1:]
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def thomas_solve_numba(lo, di, up, rhs):
    """Tridiagonal solve via the in-place Thomas kernel."""
    if _numba is None:
        raise RuntimeError("numba is not available")
    x = np.array(rhs, dtype=np.float64)
    di = np.array(di, dtype=np.float64)
    _thomas_loop(np.asarray(lo, dtype=np.float64), di,
                 np.asarray(up, dtype=np.float64), x)
    return x


def _grad_numpy(f, h, N):
    g = np.zeros(N + 1)
    g[1:-1] = np.diff(f) / h
    return g


def _advect_donor_numpy(w, g, dt, ga: GridArrays):
    A = ga.A
    N = w.shape[0]
    leave = A[:-1] * np.maximum(-g[:-1], 0.0) + A[1:] * np.maximum(g[1:], 0.0)
    keep = 1.0 - dt * leave * ga.inv_V
    if keep.min() < 0.0:
        return None
    gain = np.zeros(N)
    gi = g[1:-1]
    Ai = A[1:-1]
    gain[1:] += Ai * np.maximum(gi, 0.0) * w[:-1]
    gain[:-1] += Ai * np.maximum(-gi, 0.0) * w[1:]
    return keep * w + dt * gain * ga.inv_V


def _advect_centered_numpy(w, g, dt, ga: GridArrays):
    w_face = np.zeros(ga.A.shape[0])
    w_face[1:-1] = 0.5 * (w[:-1] + w[1:])
    flux = ga.A * w_face * g
    return w - dt * np.diff(flux) * ga.inv_V


def step_transformed_numpy(w, z, v, a, b, c, d, dt, ga: GridArrays,
                           centered: bool = False):
    """One IMEX step of (w, z, v); returns the new fields or None on rejection."""
    N = w.shape[0]
    g = _grad_numpy(z, ga.h, N)
    if centered:
        rhs_w = _advect_centered_numpy(w, g, dt, ga)
    else:
        rhs_w = _advect_donor_numpy(w, g, dt, ga)
        if rhs_w is None:
            return None
    w_new = _solve_implicit_numpy(rhs_w, 0.0, dt, ga)
    z_new = _solve_implicit_numpy(z + dt * (b * v + w), a, dt, ga)
    v_new = _solve_implicit_numpy(v + dt * d * w, c, dt, ga)
    if centered and w_new.min() < 0.0:
        return None
    return w_new, z_new, v_new


def step_original_numpy(u, v1, v2, chi, xi, alpha, beta, gamma, delta,
                        dt, ga: GridArrays, centered: bool = False):
    """One IMEX step of (u, v1, v2); returns the new fields or None on rejection."""
    N = u.shape[0]
    A = ga.A
    g1 = _grad_numpy(v1, ga.h, N)
    g2 = _grad_numpy(v2, ga.h, N)
    if centered:
        vel = chi * g1 - xi * g2
        u_face = np.zeros(N + 1)
        u_face[1:-1] = 0.5 * (u[:-1] + u[1:])
        rhs_u = u - dt * np.diff(A * u_face * vel) * ga.inv_V
    else:
        leave = (A[:-1] * (chi * np.maximum(-g1[:-1], 0.0) + xi * np.maximum(g2[:-1], 0.0))
                 + A[1:] * (chi * np.maximum(g1[1:], 0.0) + xi * np.maximum(-g2[1:], 0.0)))
        keep = 1.0 - dt * leave * ga.inv_V
        if keep.min() < 0.0:
            return None
        gain = np.zeros(N)
        Ai = A[1:-1]
        gain[1:] += Ai * (chi * np.maximum(g1[1:-1], 0.0)
                          + xi * np.maximum(-g2[1:-1], 0.0)) * u[:-1]
        gain[:-1] += Ai * (chi * np.maximum(-g1[1:-1], 0.0)
                           + xi * np.maximum(g2[1:-1], 0.0)) * u[1:]
        rhs_u = keep * u + dt * gain * ga.inv_V
    u_new = _solve_implicit_numpy(rhs_u, 0.0, dt, ga)
    v1_new = _solve_implicit_numpy(v1 + dt * alpha * u, beta, dt, ga)
    v2_new = _solve_implicit_numpy(v2 + dt * gamma * u, delta, dt, ga)
    if centered and u_new.min() < 0.0:
        return None
    return u_new, v1_new, v2_new


def _advance_numpy(step, cfl_speed, fields, t, t_target, steps_done,
                   n_accept_max, dt_init, dt_min, dt_max, cfl, sup_threshold,
                   ga: GridArrays, sup_hist, hist_count):
    """Shared python advance loop for the numpy fallback path."""
    n_acc = 0
    n_rej = 0
    status = STATUS_CHUNK_DONE
    tiny = 1e-12 * max(1.0, abs(t_target))
    h = ga.h
    n_dim = ga.n_dim
    while n_acc < n_accept_max:
        if t_target - t <= tiny:
            status = STATUS_REACHED_TARGET
            break
        gmax = cfl_speed(fields)
        dt = min(dt_max, cfl * h * h / (2.0 * n_dim + h * gmax * n_dim))
        if steps_done + n_acc == 0:
            dt = min(dt, dt_init)
        starving = dt < dt_min
        new_fields = None
        if not starving:
            dt = min(dt, t_target - t)
            while True:
                new_fields = step(fields, dt)
                if new_fields is not None:
                    break
                n_rej += 1
                dt *= 0.5
                if dt < dt_min:
                    starving = True
                    break
        if starving:
            status = (STATUS_DT_STARVED
                      if _hist_monotone_py(sup_hist, hist_count)
                      else STATUS_DT_STALLED)
            break
        for cur, new in zip(fields, new_fields):
            cur[:] = new
        t += dt
        n_acc += 1
        sup = float(fields[0].max())
        hist_count = _push_hist_py(sup_hist, hist_count, sup)
        if sup >= sup_threshold:
            status = STATUS_SUP_THRESHOLD
            break
        if t_target - t <= tiny:
            status = STATUS_REACHED_TARGET
            break
    return t, n_acc, n_rej, status, hist_count


def _push_hist_py(sup_hist, hist_count, sup):
    if hist_count < _HIST:
        sup_hist[hist_count] = sup
        return hist_count + 1
    sup_hist[:-1] = sup_hist[1:]
    sup_hist[-1] = sup
    return hist_count


def _hist_monotone_py(sup_hist, hist_count):
    return hist_count >= _HIST and bool(np.all(np.diff(sup_hist) > 0.0))


def advance_transformed_numpy(w, z, v, params, t, t_target, steps_done,
                              n_accept_max, dt_init, dt_min, dt_max, cfl,
                              sup_threshold, centered, ga, ws, hist_count):
    a, b, c, d = params

    def step(fields, dt):
        return step_transformed_numpy(fields[0], fields[1], fields[2],
                                      a, b, c, d, dt, ga, centered)

    def cfl_speed(fields):
        g = _grad_numpy(fields[1], ga.h, fields[1].shape[0])
        return float(np.abs(g).max())

    return _advance_numpy(step, cfl_speed, (w, z, v), t, t_target, steps_done,
                          n_accept_max, dt_init, dt_min, dt_max, cfl,
                          sup_threshold, ga, ws.sup_hist, hist_count)


def advance_original_numpy(u, v1, v2, params, t, t_target, steps_done,
                           n_accept_max, dt_init, dt_min, dt_max, cfl,
                           sup_threshold, centered, ga, ws, hist_count):
    chi, xi, alpha, beta, gamma, delta = params

    def step(fields, dt):
        return step_original_numpy(fields[0], fields[1], fields[2],
                                   chi, xi, alpha, beta, gamma, delta,
                                   dt, ga, centered)

    def cfl_speed(fields):
        N = fields[0].shape[0]
        g1 = _grad_numpy(fields[1], ga.h, N)
        g2 = _grad_numpy(fields[2], ga.h, N)
        return float((chi * np.abs(g1) + xi * np.abs(g2)).max())

    return _advance_numpy(step, cfl_speed, (u, v1, v2), t, t_target, steps_done,
                          n_accept_max, dt_init, dt_min, dt_max, cfl,
                          sup_threshold, ga, ws.sup_hist, hist_count)


# ---------------------------------------------------------------------------
# numba-path wrappers (same signatures as the numpy ones)
# ---------------------------------------------------------------------------

def step_transformed_numba(w, z, v, a, b, c, d, dt, ga: GridArrays,
                           centered: bool = False):
    if _numba is None:
        raise RuntimeError("numba is not available")
    N = w.shape[0]
    ws = make_workspace(N)
    _grad_loop(z, ga.h, ws.g1)
    ok = _step_transformed_loop(w, z, v, a, b, c, d, dt, ga.A, ga.inv_V,
                                ga.diff_lo, ga.diff_up, centered, ws.g1,
                                ws.f1, ws.f2, ws.f3, ws.r1, ws.r2, ws.r3)
    if not ok:
        return None
    return ws.f1, ws.f2, ws.f3


def step_original_numba(u, v1, v2, chi, xi, alpha, beta, gamma, delta,
                        dt, ga: GridArrays, centered: bool = False):
    if _numba is None:
        raise RuntimeError("numba is not available")
    N = u.shape[0]
    ws = make_workspace(N)
    _grad_loop(v1, ga.h, ws.g1)
    _grad_loop(v2, ga.h, ws.g2)
    ok = _step_original_loop(u, v1, v2, chi, xi, alpha, beta, gamma, delta,
                             dt, ga.A, ga.inv_V, ga.diff_lo, ga.diff_up,
                             centered, ws.g1, ws.g2, ws.f1, ws.f2, ws.f3,
                             ws.r1, ws.r2, ws.r3)
    if not ok:
        return None
    return ws.f1, ws.f2, ws.f3


def advance_transformed_numba(w, z, v, params, t, t_target, steps_done,
                              n_accept_max, dt_init, dt_min, dt_max, cfl,
                              sup_threshold, centered, ga, ws, hist_count):
    if _numba is None:
        raise RuntimeError("numba is not available")
    a, b, c, d = params
    return _advance_transformed_loop(
        w, z, v, a, b, c, d, t, t_target, steps_done, n_accept_max,
        dt_init, dt_min, dt_max, cfl, sup_threshold, centered,
        ga.A, ga.inv_V, ga.h, ga.n_dim, ga.diff_lo, ga.diff_up,
        ws.f1, ws.f2, ws.f3, ws.g1, ws.r1, ws.r2, ws.r3,
        ws.sup_hist, hist_count)


def advance_original_numba(u, v1, v2, params, t, t_target, steps_done,
                           n_accept_max, dt_init, dt_min, dt_max, cfl,
                           sup_threshold, centered, ga, ws, hist_count):
    if _numba is None:
        raise RuntimeError("numba is not available")
    chi, xi, alpha, beta, gamma, delta = params
    return _advance_original_loop(
        u, v1, v2, chi, xi, alpha, beta, gamma, delta, t, t_target,
        steps_done, n_accept_max, dt_init, dt_min, dt_max, cfl, sup_threshold,
        centered, ga.A, ga.inv_V, ga.h, ga.n_dim, ga.diff_lo, ga.diff_up,
        ws.f1, ws.f2, ws.f3, ws.g1, ws.g2, ws.r1, ws.r2, ws.r3,
        ws.sup_hist, hist_count)


if NUMBA_ENABLED:
    step_transformed = step_transformed_numba
    step_original = step_original_numba
    advance_transformed = advance_transformed_numba
    advance_original = advance_original_numba
    thomas_solve = thomas_solve_numba
else:
    step_transformed = step_transformed_numpy
    step_original = step_original_numpy
    advance_transformed = advance_transformed_numpy
    advance_original = advance_original_numpy
    thomas_solve = thomas_solve_numpy

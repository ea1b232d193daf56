"""Reference solver for the superlinear comparison ODE y' = C2*y_+^(1/theta) - C3.

The moment functional of a concentrating solution dominates a solution of
this ODE, so its finite blow-up time gives a computable upper bound on the
simulation's blow-up time.  With exponent 1/theta > 1 the dichotomy is
exact: y grows without bound iff y0 exceeds the stationary value
(C3/C2)^theta, and the blow-up time splits into a numerically integrated
part up to Y_BIG plus an analytic power-law tail.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from scipy.integrate import solve_ivp

# hand off from RK45 to the analytic tail once y reaches this value; beyond
# it the loss term is smaller than the gain term by >= C3/(C2 * 1e12)
Y_BIG = 1e12


@dataclass(frozen=True)
class BlowupOdeSpec:
    """y' = gain * max(y, 0)^(1/theta) - loss, y(0) = y0, on [0, t_cap].

    scale carries the constant relating the moment functional to y; it only
    enters certified_threshold.
    """

    y0: float
    gain: float
    theta: float
    loss: float = 0.0
    t_cap: float = 100.0
    scale: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.y0) and self.y0 > 0):
            raise ValueError(f"y0 must be positive and finite, got {self.y0}")
        if not (math.isfinite(self.gain) and self.gain > 0):
            raise ValueError(f"gain must be positive and finite, got {self.gain}")
        if not 0.5 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (1/2, 1), got {self.theta}")
        if not (math.isfinite(self.loss) and self.loss >= 0):
            raise ValueError(f"loss must be nonnegative and finite, got {self.loss}")
        if not (math.isfinite(self.t_cap) and self.t_cap > 0):
            raise ValueError(f"t_cap must be positive and finite, got {self.t_cap}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")


class OdeVerdict(enum.Enum):
    FINITE_TIME_BLOWUP = "finite_time_blowup"
    SURVIVED_TO_CAP = "survived_to_cap"


@dataclass(frozen=True)
class OdeOutcome:
    verdict: OdeVerdict
    blowup_time: float  # NaN when the solution survives to t_cap
    t_final: float      # = blowup_time on blow-up, t_cap otherwise
    y_final: float      # y(t_cap) on survival, inf on blow-up

    @property
    def blew_up(self) -> bool:
        return self.verdict is OdeVerdict.FINITE_TIME_BLOWUP


def stationary_value(spec: BlowupOdeSpec) -> float:
    """The equilibrium (loss/gain)^theta separating decay from blow-up."""
    return (spec.loss / spec.gain) ** spec.theta


def certified_threshold(spec: BlowupOdeSpec) -> float:
    """scale * ((loss/gain)^theta + 1): y0 at or above this guarantees blow-up."""
    return spec.scale * ((spec.loss / spec.gain) ** spec.theta + 1.0)


def _tail_time(y: float, gain: float, theta: float) -> float:
    """Exact blow-up time of y' = gain*y^(1/theta) started from y."""
    return theta * y ** (-(1.0 - theta) / theta) / (gain * (1.0 - theta))


def closed_form_blowup_time(spec: BlowupOdeSpec) -> float:
    """Blow-up time for loss == 0: theta * y0^(-(1-theta)/theta) / (gain*(1-theta))."""
    if spec.loss != 0.0:
        raise ValueError("closed form requires loss == 0")
    return _tail_time(spec.y0, spec.gain, spec.theta)


def ode_blowup(spec: BlowupOdeSpec, rtol: float = 1e-10) -> OdeOutcome:
    """Integrate the comparison ODE and classify the outcome.

    RK45 integrates until y crosses Y_BIG or t reaches t_cap; past Y_BIG
    the loss term is negligible relative to the certified tolerances and
    the remaining time is added in closed form.
    """
    inv_theta = 1.0 / spec.theta
    if spec.y0 >= Y_BIG:
        t_blow = _tail_time(spec.y0, spec.gain, spec.theta)
        if t_blow <= spec.t_cap:
            return OdeOutcome(OdeVerdict.FINITE_TIME_BLOWUP, t_blow,
                              t_blow, math.inf)
        return OdeOutcome(OdeVerdict.SURVIVED_TO_CAP, math.nan,
                          spec.t_cap, math.nan)

    def rhs(_t, y):
        yp = y[0] if y[0] > 0.0 else 0.0
        return (spec.gain * yp ** inv_theta - spec.loss,)

    def hit_big(_t, y):
        return y[0] - Y_BIG

    hit_big.terminal = True
    hit_big.direction = 1.0

    sol = solve_ivp(rhs, (0.0, spec.t_cap), (spec.y0,), method="RK45",
                    rtol=rtol, atol=1e-14 * max(1.0, spec.y0),
                    events=hit_big, dense_output=False)
    if not sol.success:  # pragma: no cover - RK45 on this rhs does not fail
        raise RuntimeError(f"ODE integration failed: {sol.message}")
    if sol.t_events[0].size:
        t_hit = float(sol.t_events[0][0])
        t_blow = t_hit + _tail_time(Y_BIG, spec.gain, spec.theta)
        if t_blow <= spec.t_cap:
            return OdeOutcome(OdeVerdict.FINITE_TIME_BLOWUP, t_blow,
                              t_blow, math.inf)
        return OdeOutcome(OdeVerdict.SURVIVED_TO_CAP, math.nan,
                          spec.t_cap, math.nan)
    return OdeOutcome(OdeVerdict.SURVIVED_TO_CAP, math.nan,
                      spec.t_cap, float(sol.y[0, -1]))

"""Parameter sets, states, and the change of variables between the two forms.

The original system evolves (u, v1, v2): a cell density attracted up the
gradient of v1 (sensitivity chi) and repelled down the gradient of v2
(sensitivity xi), with both signals produced by u and decaying linearly.
When attraction dominates (chi*alpha - xi*gamma > 0) the system maps onto a
three-field form (w, z, v) with a single drift field z = chi*v1 - xi*v2,
which is what the energy machinery is written in:

    w_t = lap w - div(w grad z)
    z_t = lap z - a z + b v + w
    v_t = lap v - c v + d w

with a = delta, b = (delta - beta)*chi, c = beta, d = alpha/(chi*alpha - xi*gamma).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import RadialGrid

__all__ = [
    "Regime",
    "OriginalParams",
    "TransformedParams",
    "OriginalState",
    "TransformedState",
    "NotAttractionDominated",
    "NegativeComponent",
    "classify",
    "transform_params",
    "transform_state",
    "inverse_transform_state",
]


class NotAttractionDominated(ValueError):
    """The transformation requires chi*alpha - xi*gamma > 0."""


class NegativeComponent(ValueError):
    """Inverting the state would produce a negative signal concentration."""


class Regime(enum.Enum):
    ATTRACTION_DOMINATED = "attraction_dominated"
    BALANCED = "balanced"
    REPULSION_DOMINATED = "repulsion_dominated"


@dataclass(frozen=True)
class OriginalParams:
    """Coefficients of the two-signal system; all six must be positive.

    chi, xi: attractive / repulsive sensitivities.
    alpha, beta: production and decay rates of the attractant v1.
    gamma, delta: production and decay rates of the repellent v2.
    """

    chi: float
    xi: float
    alpha: float
    beta: float
    gamma: float
    delta: float

    def __post_init__(self) -> None:
        for name in ("chi", "xi", "alpha", "beta", "gamma", "delta"):
            value = float(getattr(self, name))
            if not value > 0.0:
                raise ValueError(f"parameter {name} must be > 0, got {value}")
            object.__setattr__(self, name, value)

    @property
    def dominance(self) -> float:
        """chi*alpha - xi*gamma; positive iff attraction dominates."""
        return self.chi * self.alpha - self.xi * self.gamma


@dataclass(frozen=True)
class TransformedParams:
    """Coefficients of the single-drift form; a, c, d > 0, b unrestricted."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self) -> None:
        for name in ("a", "b", "c", "d"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("a", "c", "d"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"parameter {name} must be > 0, got {value}")


def classify(params: OriginalParams, balanced_tol: float = 0.0) -> Regime:
    """Classify by the sign of chi*alpha - xi*gamma.

    `balanced_tol` widens the Balanced band to |chi*alpha - xi*gamma| <=
    balanced_tol; the default classifies only an exact zero as balanced.
    """
    if balanced_tol < 0.0:
        raise ValueError(f"balanced_tol must be >= 0, got {balanced_tol}")
    s = params.dominance
    if abs(s) <= balanced_tol:
        return Regime.BALANCED
    return Regime.ATTRACTION_DOMINATED if s > 0.0 else Regime.REPULSION_DOMINATED


def transform_params(params: OriginalParams) -> TransformedParams:
    """Map original coefficients to the single-drift form.

    Raises NotAttractionDominated unless chi*alpha - xi*gamma > 0.
    """
    s = params.dominance
    if not s > 0.0:
        raise NotAttractionDominated(
            f"chi*alpha - xi*gamma = {s:g} <= 0; the combined-drift form only "
            "exists in the attraction-dominated regime"
        )
    return TransformedParams(
        a=params.delta,
        b=(params.delta - params.beta) * params.chi,
        c=params.beta,
        d=params.alpha / s,
    )


@dataclass(frozen=True)
class OriginalState:
    """Cell-centered fields (u, v1, v2); u, v1, v2 >= 0."""

    u: np.ndarray
    v1: np.ndarray
    v2: np.ndarray

    def validate(self, grid: RadialGrid) -> "OriginalState":
        u = grid.check_field(self.u, "u")
        v1 = grid.check_field(self.v1, "v1")
        v2 = grid.check_field(self.v2, "v2")
        for name, f in (("u", u), ("v1", v1), ("v2", v2)):
            if not np.all(np.isfinite(f)):
                raise ValueError(f"{name} contains non-finite entries")
            if f.min() < 0.0:
                raise ValueError(f"{name} must be nonnegative, min={f.min():g}")
        return OriginalState(u=u, v1=v1, v2=v2)

    def as_tuple(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.u, self.v1, self.v2


@dataclass(frozen=True)
class TransformedState:
    """Cell-centered fields (w, z, v); w >= 0, v >= 0, z sign-free."""

    w: np.ndarray
    z: np.ndarray
    v: np.ndarray

    def validate(self, grid: RadialGrid) -> "TransformedState":
        w = grid.check_field(self.w, "w")
        z = grid.check_field(self.z, "z")
        v = grid.check_field(self.v, "v")
        for name, f in (("w", w), ("z", z), ("v", v)):
            if not np.all(np.isfinite(f)):
                raise ValueError(f"{name} contains non-finite entries")
        if w.min() < 0.0:
            raise ValueError(f"w must be nonnegative, min={w.min():g}")
        if v.min() < 0.0:
            raise ValueError(f"v must be nonnegative, min={v.min():g}")
        return TransformedState(w=w, z=z, v=v)

    def as_tuple(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.w, self.z, self.v


def transform_state(state: OriginalState, params: OriginalParams) -> TransformedState:
    """(u, v1, v2) -> (w, z, v) = ((chi*alpha - xi*gamma) u, chi v1 - xi v2, v1)."""
    s = params.dominance
    if not s > 0.0:
        raise NotAttractionDominated(
            f"chi*alpha - xi*gamma = {s:g} <= 0; cannot transform the state"
        )
    u = np.asarray(state.u, dtype=np.float64)
    v1 = np.asarray(state.v1, dtype=np.float64)
    v2 = np.asarray(state.v2, dtype=np.float64)
    return TransformedState(w=s * u, z=params.chi * v1 - params.xi * v2, v=v1.copy())


def inverse_transform_state(
    state: TransformedState, params: OriginalParams
) -> OriginalState:
    """(w, z, v) -> (u, v1, v2) = (w/(chi*alpha - xi*gamma), v, (chi v - z)/xi).

    Raises NegativeComponent if the reconstructed v2 = (chi*v - z)/xi would be
    negative beyond roundoff (tolerance 1e-12 relative to the field scale).
    """
    s = params.dominance
    if not s > 0.0:
        raise NotAttractionDominated(
            f"chi*alpha - xi*gamma = {s:g} <= 0; cannot invert the state"
        )
    w = np.asarray(state.w, dtype=np.float64)
    z = np.asarray(state.z, dtype=np.float64)
    v = np.asarray(state.v, dtype=np.float64)
    v2 = (params.chi * v - z) / params.xi
    scale = max(1.0, float(np.max(np.abs(params.chi * v), initial=0.0)),
                float(np.max(np.abs(z), initial=0.0)))
    floor = -1e-12 * scale
    vmin = float(v2.min())
    if vmin < floor:
        j = int(np.argmin(v2))
        raise NegativeComponent(
            f"reconstructed v2 is negative at cell {j}: {vmin:g} "
            f"(tolerance {floor:g}); chi*v - z must stay nonnegative"
        )
    np.clip(v2, 0.0, None, out=v2)  # only roundoff-level negatives reach here
    return OriginalState(u=w / s, v1=v.copy(), v2=v2)

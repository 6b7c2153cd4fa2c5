"""Pulsed driving field and cached field integrals.

The pulse is eps0 * f(t) * sin(omega t) with a trapezoidal envelope f:
linear two-cycle turn-on, flat top, linear two-cycle turn-off.  The
integrals A(t) = -int eps, alpha(t) = int A and S(t) = int A^2 are
precomputed once on a dense uniform cache and looked up by linear
interpolation during propagation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from .core import KhatomError

__all__ = [
    "PulseParams",
    "FieldCache",
    "LaserError",
    "envelope",
    "field_value",
    "build_field_cache",
    "monochromatic_quiver",
    "INTENSITY_AU",
]

# one atomic unit of intensity, W/cm^2
INTENSITY_AU = 3.50945e16


class LaserError(KhatomError):
    module = "laser"


@dataclass(frozen=True)
class PulseParams:
    """Trapezoidal pulse: eps0 * f(t) * sin(omega t).

    Construct either from a peak field eps0 or from an intensity in
    W/cm^2 (eps0 = sqrt(I / INTENSITY_AU)).  The ramp lasts ramp_cycles
    optical cycles, the flat top ends at flat_end_cycles, the pulse at
    total_cycles.
    """

    eps0: float | None = None
    intensity: float | None = None
    period: float = 100.0
    ramp_cycles: int = 2
    flat_end_cycles: int = 10
    total_cycles: int = 12

    def __post_init__(self):
        if (self.eps0 is None) == (self.intensity is None):
            raise LaserError("give exactly one of eps0 or intensity")
        if self.eps0 is None:
            object.__setattr__(self, "eps0", np.sqrt(self.intensity / INTENSITY_AU))
        if not (0 < self.ramp_cycles < self.flat_end_cycles < self.total_cycles):
            raise LaserError("need 0 < ramp < flat_end < total cycles")
        if self.period <= 0:
            raise LaserError("period must be positive")

    @property
    def omega(self) -> float:
        return 2.0 * np.pi / self.period

    @property
    def t_ramp(self) -> float:
        return self.ramp_cycles * self.period

    @property
    def t_flat_end(self) -> float:
        return self.flat_end_cycles * self.period

    @property
    def t_final(self) -> float:
        return self.total_cycles * self.period

    @property
    def alpha0(self) -> float:
        """Quiver amplitude eps0/omega^2 of the flat-top field."""
        return self.eps0 / self.omega**2


def envelope(params: PulseParams, t):
    """Trapezoidal envelope; 0 outside [0, t_final], continuous everywhere."""
    t = np.asarray(t, dtype=float)
    up = t / params.t_ramp
    down = (params.t_final - t) / (params.t_final - params.t_flat_end)
    f = np.minimum(np.minimum(up, down), 1.0)
    f = np.where((t < 0) | (t > params.t_final), 0.0, f)
    return f if f.ndim else float(f)


def field_value(params: PulseParams, t):
    """Driving field eps0 * f(t) * sin(omega t)."""
    t = np.asarray(t, dtype=float)
    out = params.eps0 * envelope(params, t) * np.sin(params.omega * t)
    return out if out.ndim else float(out)


def monochromatic_quiver(params: PulseParams, t):
    """Flat-top quiver displacement alpha0 * sin(omega t) (no transients)."""
    t = np.asarray(t, dtype=float)
    out = params.alpha0 * np.sin(params.omega * t)
    return out if out.ndim else float(out)


@dataclass
class FieldCache:
    """Dense uniform samples of eps, A, alpha, S = int A^2 over the pulse.

    endpoint_residuals records (|A(t_final)|, |alpha(t_final)|/alpha0); a
    value above ZERO_NET_TOL means the pulse failed the zero net momentum /
    displacement check and warnings carries a message, but lookups still
    work.
    """

    params: PulseParams
    dt_field: float
    times: np.ndarray
    eps: np.ndarray
    a: np.ndarray
    alpha: np.ndarray
    s: np.ndarray
    endpoint_residuals: tuple[float, float] = (0.0, 0.0)
    warnings: list[str] = field(default_factory=list)

    ZERO_NET_TOL = 1e-6

    def _lookup(self, series, t):
        return np.interp(t, self.times, series, left=0.0, right=series[-1])

    def eps_at(self, t):
        return np.interp(t, self.times, self.eps, left=0.0, right=0.0)

    def a_at(self, t):
        return self._lookup(self.a, t)

    def alpha_at(self, t):
        return self._lookup(self.alpha, t)

    def s_at(self, t):
        return self._lookup(self.s, t)


def build_field_cache(params: PulseParams, dt_field: float) -> FieldCache:
    """Integrate eps -> A -> alpha and A^2 -> S on a dense uniform grid.

    Composite Simpson, cumulative; the node spacing should divide the
    propagation step so step midpoints land exactly on cache nodes.
    """
    if dt_field <= 0:
        raise LaserError("dt_field must be positive")
    n = int(round(params.t_final / dt_field))
    if abs(n * dt_field - params.t_final) > 1e-9 * params.t_final:
        raise LaserError("dt_field must divide the pulse duration")
    times = np.arange(n + 1) * dt_field
    eps = field_value(params, times)
    a = -cumulative_simpson(eps, dx=dt_field, initial=0.0)
    alpha = cumulative_simpson(a, dx=dt_field, initial=0.0)
    s = cumulative_simpson(a * a, dx=dt_field, initial=0.0)
    res_a = abs(a[-1])
    scale = params.alpha0 if params.alpha0 > 0 else 1.0
    res_alpha = abs(alpha[-1]) / scale
    cache = FieldCache(params, dt_field, times, eps, a, alpha, s, (res_a, res_alpha))
    if res_a > FieldCache.ZERO_NET_TOL or res_alpha > FieldCache.ZERO_NET_TOL:
        cache.warnings.append(
            "nonzero net transfer at pulse end: "
            f"|A| = {res_a:.3e}, |alpha|/alpha0 = {res_alpha:.3e}"
        )
    return cache

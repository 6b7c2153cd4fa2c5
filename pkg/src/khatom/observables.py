"""Scalar diagnostics: populations, widths, positions, autocorrelations.

The Recorder assembles the standard 14-column series during a
propagation run.  For lab runs the oscillating-frame quantities
(populations against the dressed eigenstates, mean position, the
autocorrelation and the half-line masses) are computed on the
transformed state; columns that make no sense for a mode are emitted as
nan.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import FRAME_KH, FRAME_LAB, KhatomError, WaveFunction, inner_product
from .frame import FrameTransformContext

__all__ = [
    "CSV_COLUMNS",
    "ObservableError",
    "ObservableSeries",
    "Recorder",
    "population",
    "trapped_width",
    "window_mean_x",
    "expectation_x",
    "autocorrelation",
    "half_line_masses",
    "two_level_density",
    "harmonic_amplitude",
    "write_series",
    "read_series",
]

CSV_COLUMNS = (
    "t",
    "P_b",
    "P_KH_0",
    "P_KH_1",
    "P_KH_total",
    "sigma_x",
    "mean_x_lab",
    "mean_x_kh",
    "autocorr_re",
    "autocorr_im",
    "autocorr_abs2",
    "mass_left",
    "mass_right",
    "norm",
)

HALF_LINE_WINDOW = 60.0


class ObservableError(KhatomError):
    module = "observables"


@dataclass
class ObservableSeries:
    name: str
    records: list = field(default_factory=list)

    def append(self, t: float, value) -> None:
        if self.records and t <= self.records[-1][0]:
            raise ObservableError(f"series '{self.name}': times must increase")
        if self.name.startswith("P_") and not np.isnan(value):
            if not -1e-9 <= value <= 1.0 + 1e-9:
                raise ObservableError(
                    f"series '{self.name}': population {value} outside [0, 1]"
                )
        self.records.append((t, value))

    @property
    def times(self) -> np.ndarray:
        return np.array([r[0] for r in self.records])

    @property
    def values(self) -> np.ndarray:
        return np.array([r[1] for r in self.records])


def population(psi: WaveFunction, phi: WaveFunction) -> float:
    """|<phi|psi>|^2; the frame tags must agree (inner_product checks)."""
    return float(abs(inner_product(phi, psi)) ** 2)


def _window_moments(psi: WaveFunction, window: tuple) -> tuple[float, float, float]:
    g = psi.grid
    lo, hi = window
    if lo < g.x_min or hi > g.x_max:
        raise ObservableError("window extends beyond the grid")
    sel = (g.x >= lo) & (g.x <= hi)
    den = psi.density()[sel]
    w = g.dx * den.sum()
    if w < 1e-8:
        raise ObservableError("window norm below 1e-8: nothing trapped")
    x = g.x[sel]
    mean = g.dx * np.sum(x * den) / w
    mean2 = g.dx * np.sum(x * x * den) / w
    return float(w), float(mean), float(np.sqrt(max(mean2 - mean**2, 0.0)))


def trapped_width(psi: WaveFunction, window: tuple = (-60.0, 60.0)) -> float:
    """Standard deviation of position over the window, renormalized there."""
    return _window_moments(psi, window)[2]


def window_mean_x(psi: WaveFunction, window: tuple = (-60.0, 60.0)) -> float:
    """Mean position over the window, renormalized there.

    The trapped-region mean, not the full-grid one: once ionized flux
    leaves the region of interest, the full-grid mean in the shifted
    frame reduces to the lab mean plus alpha times the surviving norm,
    which tracks norm loss rather than the cloud.
    """
    return _window_moments(psi, window)[1]


def expectation_x(psi: WaveFunction) -> float:
    return float(psi.grid.dx * np.sum(psi.grid.x * psi.density()))


def autocorrelation(psi0: WaveFunction, psit: WaveFunction) -> complex:
    """<psi0|psit>; same grid and frame required."""
    return inner_product(psi0, psit)


def half_line_masses(psi: WaveFunction) -> tuple[float, float]:
    """Density integrated over [-60, 0) and (0, 60]."""
    g = psi.grid
    den = psi.density()
    left = (g.x >= -HALF_LINE_WINDOW) & (g.x < 0)
    right = (g.x > 0) & (g.x <= HALF_LINE_WINDOW)
    return float(g.dx * den[left].sum()), float(g.dx * den[right].sum())


def two_level_density(pair0, pair1, t: float) -> np.ndarray:
    """Beat-note density of the equal-weight two-state superposition.

    (|phi0|^2 + |phi1|^2)/2 + Re[phi1 phi0*] cos(w10 t) for the real
    eigenstates; the analytic reference the propagated density must hit.
    """
    w10 = pair1.energy - pair0.energy
    f0, f1 = pair0.state.psi, pair1.state.psi
    return (
        0.5 * (np.abs(f0) ** 2 + np.abs(f1) ** 2)
        + np.real(f1 * np.conj(f0)) * np.cos(w10 * t)
    )


def harmonic_amplitude(times: np.ndarray, values: np.ndarray, omega: float) -> float:
    """Amplitude of the omega component of a uniformly sampled series."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(times) < 2:
        raise ObservableError("need at least two samples")
    detrended = values - values.mean()
    z = np.sum(detrended * np.exp(-1j * omega * times))
    return float(2.0 * abs(z) / len(times))


class Recorder:
    """Accumulates the standard observable rows during propagation.

    For lab runs, pass the atomic ground pair and a frame context; the
    dressed-state populations and oscillating-frame columns are then
    computed on the transformed snapshot.  For kh runs, those transforms
    are identities the state already lives in, and the lab-only columns
    are nan.
    """

    def __init__(
        self,
        mode: str,
        ground_pair=None,
        kh_pairs=(),
        frame_ctx: FrameTransformContext | None = None,
    ):
        from .propagator import MODE_KH, MODE_LAB  # local import, no cycle

        if mode not in (MODE_LAB, MODE_KH):
            raise ObservableError(f"unknown mode '{mode}'")
        if mode == MODE_LAB and frame_ctx is None:
            raise ObservableError("lab recording needs a frame context")
        self._lab = mode == MODE_LAB
        self.ground_pair = ground_pair
        self.kh_pairs = tuple(kh_pairs)
        self.frame_ctx = frame_ctx
        self.rows: list[tuple] = []
        self._ref_kh: WaveFunction | None = None

    def _kh_view(self, wf: WaveFunction) -> WaveFunction:
        if self._lab:
            return self.frame_ctx.lab_to_kh(wf)
        return wf

    def record(self, t: float, wf: WaveFunction) -> None:
        kh = self._kh_view(wf)
        if self._ref_kh is None:
            self._ref_kh = kh

        if self._lab and self.ground_pair is not None:
            p_b = population(wf, self.ground_pair.state)
        else:
            p_b = np.nan
        pops = [population(kh, pair.state) for pair in self.kh_pairs]
        p0 = pops[0] if len(pops) > 0 else np.nan
        p1 = pops[1] if len(pops) > 1 else np.nan
        p_tot = float(np.sum(pops)) if pops else np.nan

        try:
            sigma = trapped_width(wf)
        except ObservableError:
            sigma = np.nan
        try:
            mean_lab = window_mean_x(wf) if self._lab else np.nan
            mean_kh = window_mean_x(kh)
        except ObservableError:
            mean_lab = np.nan
            mean_kh = np.nan
        c = autocorrelation(self._ref_kh, kh)
        left, right = half_line_masses(kh)
        self.rows.append(
            (
                t,
                p_b,
                p0,
                p1,
                p_tot,
                sigma,
                mean_lab,
                mean_kh,
                c.real,
                c.imag,
                abs(c) ** 2,
                left,
                right,
                wf.norm() ** 2,
            )
        )

    def series(self) -> dict[str, ObservableSeries]:
        out = {name: ObservableSeries(name) for name in CSV_COLUMNS[1:]}
        for row in self.rows:
            t = row[0]
            for name, value in zip(CSV_COLUMNS[1:], row[1:]):
                out[name].append(t, value)
        return out

    def column(self, name: str) -> np.ndarray:
        i = CSV_COLUMNS.index(name)
        return np.array([row[i] for row in self.rows])


def write_series(path, recorder: Recorder) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in recorder.rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_series(path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise ObservableError(f"unexpected series header in {path}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        data = data.reshape(0, len(CSV_COLUMNS))
    return {name: data[:, i] for i, name in enumerate(CSV_COLUMNS)}

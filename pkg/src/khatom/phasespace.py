"""Phase-space tools: Wigner transforms, marginals, classical portraits.

The Wigner map is evaluated per output position by correlating
band-limited half-step samples of the state (2x spectral upsampling)
over a symmetric correlation window, then Fourier transforming the
correlation lag to the momentum axis.  Classical curves come straight
from energy conservation in the averaged potential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import KhatomError, SpatialGrid, WaveFunction, spectral_upsample
from .potential import AveragedPotential, local_minima_positions

__all__ = [
    "PhaseSpaceError",
    "WignerGrid",
    "PhasePortrait",
    "wigner",
    "wigner_cross",
    "wigner_marginals",
    "superposition_wigner_analytic",
    "momentum_tail_fraction",
    "equienergy_curve",
    "separatrix_energy",
    "saddle_position",
    "phase_portrait",
    "write_wigner",
    "read_wigner",
]

WIGNER_MAGIC = "KHPSW1"
PURE_STATE_BOUND = 1.0 / np.pi
DEFAULT_X_WINDOW = (-60.0, 60.0)
DEFAULT_P_WINDOW = (-0.6, 0.6)
DEFAULT_N_X = 241
DEFAULT_N_P = 201
DEFAULT_XI_MAX = 240.0
REALITY_TOL = 1e-10


class PhaseSpaceError(KhatomError):
    module = "phasespace"


@dataclass
class WignerGrid:
    x: np.ndarray
    p: np.ndarray
    values: np.ndarray
    t: float
    frame: str

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        self.values = np.asarray(self.values)
        if np.iscomplexobj(self.values):
            raise PhaseSpaceError("Wigner values must be real")
        if self.values.shape != (len(self.x), len(self.p)):
            raise PhaseSpaceError(
                f"value matrix {self.values.shape} does not match axes "
                f"({len(self.x)}, {len(self.p)})"
            )
        peak = float(np.max(np.abs(self.values))) if self.values.size else 0.0
        if peak > PURE_STATE_BOUND + 1e-3:
            raise PhaseSpaceError(
                f"|W| reaches {peak:.4f}, beyond the pure-state bound 1/pi"
            )


@dataclass
class PhasePortrait:
    energies: tuple
    curves: list
    e_sep: float


def _axes(x_window, p_window, n_x, n_p):
    if n_x < 2 or n_p < 2:
        raise PhaseSpaceError("need at least 2 points per phase-space axis")
    if not (x_window[0] < x_window[1] and p_window[0] < p_window[1]):
        raise PhaseSpaceError("windows must be increasing (lo, hi) pairs")
    return (
        np.linspace(x_window[0], x_window[1], n_x),
        np.linspace(p_window[0], p_window[1], n_p),
    )


def _sample_matrix(wf: WaveFunction, x_out: np.ndarray, m_max: int) -> np.ndarray:
    """Rows of band-limited samples psi(x_j + m*dx_up), m in [-M, M]."""
    up_grid, up = spectral_upsample(wf.grid, wf.psi, 2)
    k0 = round(-up_grid.x_min / up_grid.dx)
    if abs(up_grid.x_min + k0 * up_grid.dx) > 1e-9 * up_grid.dx:
        raise PhaseSpaceError("grid does not contain x = 0; cannot center the correlation")
    if k0 - m_max < 0 or k0 + m_max >= up_grid.n_points:
        raise PhaseSpaceError("correlation window exceeds the grid")
    spec = np.fft.fft(up)
    out = np.empty((len(x_out), 2 * m_max + 1), dtype=np.complex128)
    for j, xj in enumerate(x_out):
        row = np.fft.ifft(spec * np.exp(1j * xj * up_grid.p))
        out[j] = row[k0 - m_max : k0 + m_max + 1]
    return out


def _lag_transform(s_a: np.ndarray, s_b: np.ndarray, p_out: np.ndarray, d_xi: float) -> np.ndarray:
    """(1/2pi) sum_m conj(a(x+xi_m/2)) b(x-xi_m/2) e^{ip xi_m} d_xi."""
    m_max = (s_a.shape[1] - 1) // 2
    corr = np.conj(s_a) * s_b[:, ::-1]
    xi = (np.arange(2 * m_max + 1) - m_max) * d_xi
    kernel = np.exp(1j * np.outer(xi, p_out)) * (d_xi / (2.0 * np.pi))
    return corr @ kernel


def _check_windows(grid: SpatialGrid, x_out, p_out, xi_max):
    p_lim = np.pi / grid.dx
    if np.max(np.abs(p_out)) > p_lim:
        raise PhaseSpaceError(
            f"momentum window exceeds the resolvable range |p| <= {p_lim:.3f}"
        )
    reach = max(abs(x_out[0]), abs(x_out[-1])) + 0.5 * xi_max
    if reach > grid.x_max:
        raise PhaseSpaceError("position window plus correlation reach exceeds the grid")


def _take_real(w_complex: np.ndarray) -> np.ndarray:
    resid = float(np.max(np.abs(w_complex.imag))) if w_complex.size else 0.0
    if resid > REALITY_TOL:
        raise PhaseSpaceError(f"imaginary residue {resid:.2e} above {REALITY_TOL}")
    return np.ascontiguousarray(w_complex.real)


def wigner(
    wf: WaveFunction,
    x_window=DEFAULT_X_WINDOW,
    p_window=DEFAULT_P_WINDOW,
    n_x: int = DEFAULT_N_X,
    n_p: int = DEFAULT_N_P,
    xi_max: float = DEFAULT_XI_MAX,
    mass_tol: float = 1e-3,
) -> WignerGrid:
    """Wigner distribution of a state over a rectangular phase-space window.

    The integrated mass is checked against the window-restricted norm to
    mass_tol.  That identity presumes the state's momentum content fits
    the p window; callers feeding states with fast flux transiting the
    window (full-potential snapshots) must widen mass_tol accordingly.
    """
    x_out, p_out = _axes(x_window, p_window, n_x, n_p)
    _check_windows(wf.grid, x_out, p_out, xi_max)
    m_max = int(xi_max / wf.grid.dx)
    s = _sample_matrix(wf, x_out, m_max)
    values = _take_real(_lag_transform(s, s, p_out, wf.grid.dx))

    sel = (wf.grid.x >= x_window[0]) & (wf.grid.x <= x_window[1])
    window_norm = float(wf.grid.dx * np.sum(wf.density()[sel]))
    total = float(np.trapezoid(np.trapezoid(values, p_out, axis=1), x_out))
    if abs(total - window_norm) > mass_tol:
        raise PhaseSpaceError(
            f"Wigner mass {total:.6f} disagrees with window norm {window_norm:.6f}"
        )
    return WignerGrid(x_out, p_out, values, wf.t, wf.frame)


def wigner_cross(
    wf_a: WaveFunction,
    wf_b: WaveFunction,
    x_window=DEFAULT_X_WINDOW,
    p_window=DEFAULT_P_WINDOW,
    n_x: int = DEFAULT_N_X,
    n_p: int = DEFAULT_N_P,
    xi_max: float = DEFAULT_XI_MAX,
) -> np.ndarray:
    """Complex cross transform (1/2pi) int conj(a(x+xi/2)) b(x-xi/2) e^{ipxi} dxi."""
    if wf_a.grid != wf_b.grid:
        raise PhaseSpaceError("cross transform needs a common grid")
    x_out, p_out = _axes(x_window, p_window, n_x, n_p)
    _check_windows(wf_a.grid, x_out, p_out, xi_max)
    m_max = int(xi_max / wf_a.grid.dx)
    s_a = _sample_matrix(wf_a, x_out, m_max)
    s_b = _sample_matrix(wf_b, x_out, m_max)
    return _lag_transform(s_a, s_b, p_out, wf_a.grid.dx)


def _eval_positions(wf: WaveFunction, xs: np.ndarray) -> np.ndarray:
    """Band-limited values of psi at arbitrary positions."""
    g = wf.grid
    coeff = np.fft.fft(wf.psi) / g.n_points
    out = np.empty(len(xs), dtype=np.complex128)
    for i in range(0, len(xs), 64):
        chunk = xs[i : i + 64]
        out[i : i + 64] = np.exp(1j * np.outer(chunk - g.x_min, g.p)) @ coeff
    return out


def _eval_momenta(wf: WaveFunction, ps: np.ndarray) -> np.ndarray:
    """Continuum Fourier transform of psi at arbitrary momenta (unitary)."""
    g = wf.grid
    out = np.empty(len(ps), dtype=np.complex128)
    for i in range(0, len(ps), 64):
        chunk = ps[i : i + 64]
        out[i : i + 64] = np.exp(-1j * np.outer(chunk, g.x)) @ wf.psi
    return out * g.dx / np.sqrt(2.0 * np.pi)


def wigner_marginals(w: WignerGrid, wf: WaveFunction) -> tuple[float, float]:
    """Sup-norm residuals of the two marginals against the state's densities."""
    pos_marginal = np.trapezoid(w.values, w.p, axis=1)
    pos_density = np.abs(_eval_positions(wf, w.x)) ** 2
    r_x = float(np.max(np.abs(pos_marginal - pos_density)))

    mom_marginal = np.trapezoid(w.values, w.x, axis=0)
    mom_density = np.abs(_eval_momenta(wf, w.p)) ** 2
    r_p = float(np.max(np.abs(mom_marginal - mom_density)))
    return r_x, r_p


def superposition_wigner_analytic(
    pair0,
    pair1,
    t: float,
    x_window=DEFAULT_X_WINDOW,
    p_window=DEFAULT_P_WINDOW,
    n_x: int = DEFAULT_N_X,
    n_p: int = DEFAULT_N_P,
    xi_max: float = DEFAULT_XI_MAX,
) -> WignerGrid:
    """Closed-form Wigner evolution of the equal-weight two-state superposition.

    W(t) = (W0 + W1)/2 + Re[e^{-i w10 t} C] with C the cross transform of
    the two stationary states.  The cross term rotates at the beat
    frequency: its real part modulates the well-to-well breathing (cos),
    its imaginary part is odd in p and carries the transit momentum the
    packet has while moving between the wells (sin).
    """
    phi0, phi1 = pair0.state, pair1.state
    if phi0.grid != phi1.grid or phi0.frame != phi1.frame:
        raise PhaseSpaceError("eigenstates must share a grid and frame")
    x_out, p_out = _axes(x_window, p_window, n_x, n_p)
    _check_windows(phi0.grid, x_out, p_out, xi_max)
    m_max = int(xi_max / phi0.grid.dx)
    d_xi = phi0.grid.dx

    s0 = _sample_matrix(phi0, x_out, m_max)
    s1 = _sample_matrix(phi1, x_out, m_max)
    w0 = _take_real(_lag_transform(s0, s0, p_out, d_xi))
    w1 = _take_real(_lag_transform(s1, s1, p_out, d_xi))
    cross = _lag_transform(s0, s1, p_out, d_xi)

    w10 = pair1.energy - pair0.energy
    values = (
        0.5 * (w0 + w1)
        + np.cos(w10 * t) * cross.real
        + np.sin(w10 * t) * cross.imag
    )
    return WignerGrid(x_out, p_out, values, t, phi0.frame)


def momentum_tail_fraction(w: WignerGrid, p_cut: float = 0.25) -> float:
    """Fraction of the distribution's probability mass at |p| > p_cut.

    Signed sum, not sum of |W|: integrating the map over x first reduces
    it to the momentum marginal, so oscillatory interference fringes that
    carry no net probability do not inflate the tail.
    """
    marginal = np.sum(w.values, axis=0)
    total = float(np.sum(marginal))
    if total <= 0.0:
        return 0.0
    tail = float(np.sum(marginal[np.abs(w.p) > p_cut]))
    return tail / total


def equienergy_curve(energy: float, avg: AveragedPotential, x_window=DEFAULT_X_WINDOW) -> list:
    """Branches of p = +-sqrt(2(E - V0(x))) inside the window.

    Returns a list of (x, p) point arrays, one per connected branch;
    empty where the energy lies below the potential everywhere.
    """
    g = avg.grid
    sel = np.where((g.x >= x_window[0]) & (g.x <= x_window[1]))[0]
    radicand = 2.0 * (energy - avg.samples[sel])
    ok = radicand >= 0.0
    branches = []
    if not np.any(ok):
        return branches
    runs = np.split(np.arange(len(sel)), np.where(np.diff(ok.astype(int)) != 0)[0] + 1)
    for run in runs:
        if not ok[run[0]]:
            continue
        xs = g.x[sel[run]]
        ps = np.sqrt(radicand[run])
        branches.append((xs, ps))
        branches.append((xs, -ps))
    return branches


def _saddle_index(avg: AveragedPotential) -> int:
    minima = local_minima_positions(avg)
    if len(minima) < 2:
        raise PhaseSpaceError("averaged potential has a single well, no saddle")
    g = avg.grid
    i_lo = int(np.searchsorted(g.x, minima[0]))
    i_hi = int(np.searchsorted(g.x, minima[-1]))
    return i_lo + int(np.argmax(avg.samples[i_lo : i_hi + 1]))


def separatrix_energy(avg: AveragedPotential) -> float:
    """Energy of the central barrier top separating the two wells."""
    return float(avg.samples[_saddle_index(avg)])


def saddle_position(avg: AveragedPotential) -> float:
    return float(avg.grid.x[_saddle_index(avg)])


def phase_portrait(avg: AveragedPotential, energies, x_window=DEFAULT_X_WINDOW) -> PhasePortrait:
    curves = [equienergy_curve(e, avg, x_window) for e in energies]
    return PhasePortrait(tuple(energies), curves, separatrix_energy(avg))


def write_wigner(path, w: WignerGrid) -> None:
    header = (
        f"{WIGNER_MAGIC} {len(w.x)} {len(w.p)} "
        f"{float(w.x[0])!r} {float(w.x[-1])!r} {float(w.p[0])!r} {float(w.p[-1])!r} "
        f"{float(w.t)!r} {w.frame}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(w.values, dtype="<f8").tobytes())


def read_wigner(path) -> WignerGrid:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        if len(header) != 9 or header[0] != WIGNER_MAGIC:
            raise PhaseSpaceError(f"not a {WIGNER_MAGIC} file: {path}")
        n_x, n_p = int(header[1]), int(header[2])
        x_min, x_max, p_min, p_max, t = map(float, header[3:8])
        frame = header[8]
        payload = fh.read(n_x * n_p * 8)
    if len(payload) != n_x * n_p * 8:
        raise PhaseSpaceError("truncated Wigner payload")
    values = np.frombuffer(payload, dtype="<f8").reshape(n_x, n_p)
    x = np.linspace(x_min, x_max, n_x)
    p = np.linspace(p_min, p_max, n_p)
    return WignerGrid(x, p, values.copy(), t, frame)

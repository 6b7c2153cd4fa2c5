"""Bound states: imaginary-time relaxation and a finite-difference solver.

The atomic ground state comes from split-operator imaginary time on the
propagation grid.  The dressed-potential eigenpairs come from a
three-point finite-difference Hamiltonian with Dirichlet edges on a
dedicated fine grid, then get resampled onto the propagation grid and
polished by a short parity-projected imaginary-time relaxation so they
are eigenstates of the spectral Hamiltonian actually used to propagate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.fft import fft, ifft
from scipy.linalg import eigh_tridiagonal

from .core import FRAME_KH, SpatialGrid, WaveFunction, KhatomError, inner_product
from .potential import AveragedPotential, kh_averaged_potential

__all__ = [
    "EigenPair",
    "EigenError",
    "imaginary_time_ground_state",
    "bound_states_fd",
    "resample_to_grid",
    "kh_bound_states",
    "coherent_superposition",
    "rayleigh_energy",
    "fix_global_phase",
    "parity_of",
]

log = logging.getLogger(__name__)

PARITY_TOL = 1e-6
ANTINODE_FLOOR = 1e-3
EDGE_AMP_TOL = 1e-6
NEAR_ZERO_DISCARD = -1e-6


class EigenError(KhatomError):
    module = "eigen"


@dataclass(frozen=True)
class EigenPair:
    energy: float
    state: WaveFunction
    index: int
    parity: str  # "even", "odd" or "none"


def rayleigh_energy(v: np.ndarray, wf: WaveFunction) -> float:
    """<psi|H|psi> with spectral kinetic energy and diagonal potential."""
    g = wf.grid
    hpsi = ifft(0.5 * g.p**2 * fft(wf.psi)) + v * wf.psi
    return float(np.real(inner_product(wf, WaveFunction(g, hpsi, wf.t, wf.frame))))


def _reverse(arr: np.ndarray) -> np.ndarray:
    # x -> -x on the periodic grid (index 0 is its own mirror)
    return np.concatenate((arr[:1], arr[:0:-1]))


def parity_of(wf: WaveFunction, tol: float = PARITY_TOL) -> str:
    rev = _reverse(wf.psi)
    if np.max(np.abs(wf.psi - rev)) < tol:
        return "even"
    if np.max(np.abs(wf.psi + rev)) < tol:
        return "odd"
    return "none"


def fix_global_phase(wf: WaveFunction) -> WaveFunction:
    """Make the state real with a positive leftmost antinode.

    The largest-magnitude sample sets the complex phase; the sign is then
    chosen so the first local maximum of |psi| (above a small floor) is
    positive.  Gives reproducible superposition signs.
    """
    psi = wf.psi
    k = int(np.argmax(np.abs(psi)))
    phase = psi[k] / abs(psi[k])
    psi = np.real(psi / phase)
    a = np.abs(psi)
    floor = ANTINODE_FLOOR * a.max()
    idx = np.nonzero((a[1:-1] > a[:-2]) & (a[1:-1] >= a[2:]) & (a[1:-1] > floor))[0]
    i = int(idx[0]) + 1 if len(idx) else int(np.argmax(a))
    if psi[i] < 0:
        psi = -psi
    out = WaveFunction(wf.grid, psi.astype(complex), wf.t, wf.frame)
    return out.normalized()


def _split_step_imag(psi, expv_half, expt):
    return expv_half * ifft(expt * fft(expv_half * psi))


def imaginary_time_ground_state(
    v: np.ndarray,
    grid: SpatialGrid,
    dt_imag: float = 0.5,
    tol: float = 1e-10,
    max_steps: int = 1_000_000,
    seed: WaveFunction | None = None,
    parity: str | None = None,
    state_tol: float | None = None,
) -> EigenPair:
    """Relax to the lowest state of H = p^2/2 + V by imaginary time.

    Strang-split steps with renormalization; converged when the per-step
    change of the decay-rate energy estimate drops below tol.  The
    reported energy is the Rayleigh quotient of the converged state.
    With parity = "even"/"odd" the state is projected onto that symmetry
    sector every step, which relaxes to the lowest state of the sector.
    state_tol switches the stopping rule to the per-step sup change of
    the amplitudes, which keeps relaxing long after the energy estimate
    has flattened out (used when polishing already-good seeds).
    """
    if dt_imag <= 0 or tol <= 0:
        raise EigenError("dt_imag and tol must be positive")
    v = np.asarray(v, dtype=float)
    if len(v) != grid.n_points:
        raise EigenError("potential samples do not match the grid")

    expv_half = np.exp(-0.5 * dt_imag * v)
    expt = np.exp(-0.5 * dt_imag * grid.p**2)

    if seed is None:
        psi = np.exp(-grid.x**2 / 50.0).astype(complex)
    else:
        psi = seed.psi.copy()
    if parity is not None:
        if parity not in ("even", "odd"):
            raise EigenError(f"unknown parity sector '{parity}'")
        sign = 1.0 if parity == "even" else -1.0
        psi = 0.5 * (psi + sign * _reverse(psi))
    nrm = np.sqrt(grid.dx * np.sum(np.abs(psi) ** 2))
    if nrm == 0:
        raise EigenError("seed state vanishes (wrong parity sector?)")
    psi /= nrm

    e_prev = np.inf
    trace = []
    for step in range(max_steps):
        prev = psi
        psi = _split_step_imag(psi, expv_half, expt)
        if parity is not None:
            psi = 0.5 * (psi + sign * _reverse(psi))
        nrm = np.sqrt(grid.dx * np.sum(np.abs(psi) ** 2))
        psi /= nrm
        e_est = -np.log(nrm) / dt_imag
        if state_tol is not None:
            if np.max(np.abs(psi - prev)) < state_tol:
                break
        elif abs(e_est - e_prev) < tol:
            break
        e_prev = e_est
        if step % 1000 == 0:
            trace.append(e_est)
    else:
        raise EigenError(
            f"imaginary time did not converge in {max_steps} steps; "
            f"energy trace tail: {trace[-5:]}"
        )

    wf = fix_global_phase(WaveFunction(grid, psi))
    energy = rayleigh_energy(v, wf)
    if energy >= min(v[0], v[-1]):
        raise EigenError(
            f"converged energy {energy:.6g} is not below the edge potential; "
            "no bound state found"
        )
    return EigenPair(energy, wf, 0, parity or parity_of(wf))


def bound_states_fd(
    v: np.ndarray, grid: SpatialGrid, count_hint: int = 8
) -> list[EigenPair]:
    """All negative-energy eigenpairs of the three-point FD Hamiltonian.

    Dirichlet edges; symmetric tridiagonal eigensolve over the interior
    points.  States are normalized, real, sorted by energy, with the
    global phase fixed for reproducibility.
    """
    v = np.asarray(v, dtype=float)
    if len(v) != grid.n_points:
        raise EigenError("potential samples do not match the grid")
    dx = grid.dx
    diag = 1.0 / dx**2 + v[1:-1]
    off = np.full(grid.n_points - 3, -0.5 / dx**2)
    energies, vecs = eigh_tridiagonal(
        diag, off, select="v", select_range=(float(v.min()) - 1.0, 0.0)
    )

    pairs = []
    for i, e in enumerate(energies):
        if e > NEAR_ZERO_DISCARD:
            log.info("discarding near-threshold state E = %.3e", e)
            continue
        psi = np.zeros(grid.n_points)
        psi[1:-1] = vecs[:, i]
        psi /= np.sqrt(dx * np.sum(psi**2))
        edge_amp = max(abs(psi[1]), abs(psi[-1]))
        if edge_amp > EDGE_AMP_TOL:
            raise EigenError(
                f"eigenstate {i} has edge amplitude {edge_amp:.2e} > {EDGE_AMP_TOL}; "
                "use a wider grid"
            )
        wf = fix_global_phase(WaveFunction(grid, psi.astype(complex)))
        pairs.append(EigenPair(float(e), wf, len(pairs), parity_of(wf)))
        if len(pairs) >= count_hint:
            break
    return pairs


def resample_to_grid(wf: WaveFunction, grid_to: SpatialGrid) -> WaveFunction:
    """Band-limited resample onto another grid; zero outside the source box.

    Target points that coincide with source samples are copied directly;
    anything else goes through exact trigonometric interpolation of the
    periodic source signal.
    """
    src = wf.grid
    x_t = grid_to.x
    inside = (x_t >= src.x_min) & (x_t < src.x_max)
    out = np.zeros(grid_to.n_points, dtype=complex)

    xi = x_t[inside]
    u = (xi - src.x_min) / src.dx
    ku = np.round(u)
    if np.max(np.abs(u - ku)) < 1e-9:
        out[inside] = wf.psi[ku.astype(int) % src.n_points]
    else:
        spec = fft(wf.psi) / src.n_points
        # split the Nyquist bin across +/- so real signals stay real
        nyq = src.n_points // 2
        p = np.append(src.p, -src.p[nyq])
        coeff = np.append(spec, 0.5 * spec[nyq])
        coeff[nyq] *= 0.5
        vals = np.empty(len(xi), dtype=complex)
        chunk = 128
        for lo in range(0, len(xi), chunk):
            hi = min(lo + chunk, len(xi))
            ph = np.exp(1j * np.outer(xi[lo:hi] - src.x_min, p))
            vals[lo:hi] = ph @ coeff
        out[inside] = vals
    res = WaveFunction(grid_to, out, wf.t, wf.frame)
    return res.normalized()


def kh_bound_states(
    grid: SpatialGrid,
    alpha0: float,
    quadrature_n: int = 2048,
    solver_half_width: float = 300.0,
    solver_n: int = 2**14,
    polish: bool = True,
    averaged: AveragedPotential | None = None,
) -> list[EigenPair]:
    """Bound eigenpairs of the cycle-averaged potential on the given grid.

    Solves on a dedicated fine grid, resamples, then (optionally) relaxes
    each state within its parity sector on the target grid so the pair is
    consistent with the spectral Hamiltonian used for propagation.
    """
    solver_grid = SpatialGrid(-solver_half_width, solver_half_width, solver_n)
    v_solver = kh_averaged_potential(solver_grid, alpha0, quadrature_n).samples
    fd_pairs = bound_states_fd(v_solver, solver_grid)

    if averaged is None:
        averaged = kh_averaged_potential(grid, alpha0, quadrature_n)
    v_target = averaged.samples

    out = []
    for pair in fd_pairs:
        wf = resample_to_grid(pair.state, grid)
        if polish:
            refined = imaginary_time_ground_state(
                v_target, grid, dt_imag=0.1, seed=wf,
                parity=pair.parity, state_tol=1e-12,
            )
            wf, energy = refined.state, refined.energy
        else:
            wf = fix_global_phase(wf)
            energy = rayleigh_energy(v_target, wf)
        # dressed-potential eigenstates live in the oscillating frame
        out.append(EigenPair(energy, wf.with_frame(FRAME_KH), pair.index, pair.parity))
    return out


def coherent_superposition(
    a: EigenPair, b: EigenPair, weights: tuple[float, float] | None = None
) -> WaveFunction:
    """Normalized weighted sum of two eigenstates (equal weights default)."""
    if a.state.grid != b.state.grid:
        raise EigenError("eigenstates live on different grids")
    if a.state.frame != b.state.frame:
        raise EigenError("eigenstates carry different frame tags")
    if weights is None:
        weights = (1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0))
    wa, wb = weights
    psi = wa * a.state.psi + wb * b.state.psi
    wf = WaveFunction(a.state.grid, psi, a.state.t, a.state.frame)
    return wf.normalized()

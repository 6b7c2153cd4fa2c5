"""Grids, wave functions, and spectral primitives shared by every module.

Conventions:
  * position samples x_j = x_min + j*dx, j = 0..n-1, dx = (x_max - x_min)/n;
    the grid is periodic and x_max itself is not a sample point.
  * momentum grid p_k = 2*pi*fftfreq(n, dx), FFT ordering, spacing
    dp = 2*pi/(n*dx).
  * all spatial integrals use the midpoint rule dx*sum(...), which is
    spectrally accurate for decaying/periodic integrands on uniform grids.
  * translations of continuous-valued displacement are always spectral
    (momentum-space phase), never index rolls.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class KhatomError(Exception):
    """Base error for the package; `module` names the component that raised."""

    module = "core"


class GridError(KhatomError):
    module = "core"


class FrameError(KhatomError):
    module = "core"


FRAME_LAB = "lab"
FRAME_KH = "kh"
_FRAMES = (FRAME_LAB, FRAME_KH)


@dataclass(frozen=True)
class SpatialGrid:
    x_min: float = -1500.0
    x_max: float = 1500.0
    n_points: int = 16384

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise GridError(f"x_max must exceed x_min, got [{self.x_min}, {self.x_max}]")
        n = int(self.n_points)
        if n < 2 or n & (n - 1):
            raise GridError(f"n_points must be a power of two >= 2, got {self.n_points}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def dp(self) -> float:
        return 2.0 * np.pi / (self.n_points * self.dx)

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @cached_property
    def x(self) -> np.ndarray:
        arr = self.x_min + self.dx * np.arange(self.n_points)
        arr.flags.writeable = False
        return arr

    @cached_property
    def p(self) -> np.ndarray:
        arr = 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)
        arr.flags.writeable = False
        return arr


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0:
            raise GridError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 0:
            raise GridError("n_steps must be nonnegative")

    @property
    def t_end(self) -> float:
        return self.t0 + self.n_steps * self.dt

    def time_at(self, k: int) -> float:
        return self.t0 + k * self.dt


@dataclass
class WaveFunction:
    """Complex amplitudes on a SpatialGrid, stamped with time and frame tag."""

    grid: SpatialGrid
    psi: np.ndarray
    t: float = 0.0
    frame: str = FRAME_LAB

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=np.complex128)
        if self.psi.shape != (self.grid.n_points,):
            raise GridError(
                f"amplitude array of length {self.psi.size} does not match grid "
                f"n_points={self.grid.n_points}"
            )
        if self.frame not in _FRAMES:
            raise FrameError(f"unknown frame tag {self.frame!r}; expected one of {_FRAMES}")

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.psi.copy(), self.t, self.frame)

    def with_frame(self, frame: str) -> "WaveFunction":
        """Retag without transforming.  Legitimate only where the frames
        coincide (t <= 0 before the pulse, where A = alpha = 0)."""
        return WaveFunction(self.grid, self.psi.copy(), self.t, frame)

    def norm(self) -> float:
        return float(np.sqrt(self.grid.dx * np.sum(np.abs(self.psi) ** 2)))

    def normalized(self) -> "WaveFunction":
        n = self.norm()
        if n == 0.0:
            raise GridError("cannot normalize a zero wave function")
        return WaveFunction(self.grid, self.psi / n, self.t, self.frame)

    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2


def require_same_grid(a: WaveFunction, b: WaveFunction) -> None:
    if a.grid != b.grid:
        raise GridError(
            f"grids differ: {a.grid.n_points} pts on [{a.grid.x_min},{a.grid.x_max}] vs "
            f"{b.grid.n_points} pts on [{b.grid.x_min},{b.grid.x_max}]"
        )


def inner_product(a: WaveFunction, b: WaveFunction) -> complex:
    """dx * sum conj(a)*b; conjugate-linear in the first argument."""
    require_same_grid(a, b)
    if a.frame != b.frame:
        raise FrameError(f"frame mismatch in inner product: {a.frame!r} vs {b.frame!r}")
    return complex(a.grid.dx * np.vdot(a.psi, b.psi))


def to_momentum(wf: WaveFunction) -> np.ndarray:
    """Momentum amplitudes Phi(p_k) in FFT order, unitary convention.

    Phi_k = dx/sqrt(2 pi) * sum_j psi_j exp(-i p_k x_j), so for band-limited
    psi the values are samples of the continuum Fourier transform and
    Parseval holds exactly: sum |psi|^2 dx = sum |Phi|^2 dp.
    """
    g = wf.grid
    phase = np.exp(-1j * g.p * g.x_min)
    return (g.dx / np.sqrt(2.0 * np.pi)) * phase * np.fft.fft(wf.psi)


def from_momentum(grid: SpatialGrid, phi: np.ndarray, t: float = 0.0,
                  frame: str = FRAME_LAB) -> WaveFunction:
    """Inverse of to_momentum."""
    phi = np.asarray(phi, dtype=np.complex128)
    if phi.shape != (grid.n_points,):
        raise GridError(
            f"momentum array of length {phi.size} does not match grid n_points={grid.n_points}"
        )
    psi = np.fft.ifft(phi * np.exp(1j * grid.p * grid.x_min)) * (np.sqrt(2.0 * np.pi) / grid.dx)
    return WaveFunction(grid, psi, t, frame)


def shift_samples(grid: SpatialGrid, arr: np.ndarray, s: float) -> np.ndarray:
    """Translate samples by s: result_j ~ f(x_j - s) for band-limited f.

    Momentum-space phase multiplication; exact for band-limited signals,
    periodic wrap at the grid edges is documented behavior.
    """
    arr = np.asarray(arr, dtype=np.complex128)
    return np.fft.ifft(np.fft.fft(arr) * np.exp(-1j * s * grid.p))


def spectral_shift(wf: WaveFunction, s: float) -> WaveFunction:
    """Translate a wave function by s (a feature at x0 moves to x0 + s)."""
    return WaveFunction(wf.grid, shift_samples(wf.grid, wf.psi, s), wf.t, wf.frame)


def periodic_sinc_shift(grid: SpatialGrid, arr: np.ndarray, s: float) -> np.ndarray:
    """Reference translation by direct periodic-Dirichlet-kernel summation.

    Same band-limited interpolant as shift_samples but evaluated as an O(n^2)
    real-space convolution with explicitly constructed kernel values (no FFT
    in the translation itself). Used as an independent arithmetic path when
    validating the frame transform's density relation.
    """
    arr = np.asarray(arr, dtype=np.complex128)
    n = grid.n_points
    lags = np.arange(-(n - 1), n, dtype=float)
    u = lags * grid.dx - s
    theta = 2.0 * np.pi * u / (n * grid.dx)
    half = 0.5 * theta
    den = n * np.sin(half)
    # near-node lags hit 0/0; the limit of the kernel there is exactly 1
    tiny = np.abs(den) < n * 1e-12
    den_safe = np.where(tiny, 1.0, den)
    kernel = np.exp(-1j * half) * (np.sin(n * half) / den_safe)
    kernel[tiny] = 1.0
    full = np.convolve(arr, kernel)
    return full[n - 1:2 * n - 1]


def spectral_upsample(grid: SpatialGrid, arr: np.ndarray, factor: int):
    """Zero-pad the spectrum: same interval, factor*n samples.

    Returns (fine_grid, fine_samples). Exact for band-limited signals; the
    Nyquist coefficient is split symmetrically so real input stays real.
    """
    if factor < 1 or factor & (factor - 1):
        raise GridError(f"upsampling factor must be a power of two, got {factor}")
    arr = np.asarray(arr, dtype=np.complex128)
    n = grid.n_points
    if factor == 1:
        fine = SpatialGrid(grid.x_min, grid.x_max, n)
        return fine, arr.copy()
    m = n * factor
    spec = np.fft.fft(arr)
    out = np.zeros(m, dtype=np.complex128)
    h = n // 2
    out[:h] = spec[:h]
    out[m - h + 1:] = spec[h + 1:]
    out[h] = 0.5 * spec[h]
    out[m - h] = 0.5 * spec[h]
    fine = SpatialGrid(grid.x_min, grid.x_max, m)
    return fine, np.fft.ifft(out) * factor


def parity_project(grid: SpatialGrid, arr: np.ndarray, parity: str) -> np.ndarray:
    """Project onto the even or odd sector about x = 0.

    The mirror pairs index j with (n - j) mod n; requires a grid symmetric
    about 0 (x = 0 on the grid), which holds for the standard [-L, L) layout.
    """
    arr = np.asarray(arr)
    rev = np.concatenate((arr[:1], arr[:0:-1]))
    if parity == "even":
        return 0.5 * (arr + rev)
    if parity == "odd":
        return 0.5 * (arr - rev)
    raise GridError(f"parity must be 'even' or 'odd', got {parity!r}")


def grid_contains_origin(grid: SpatialGrid) -> bool:
    j = round(-grid.x_min / grid.dx)
    return 0 <= j < grid.n_points and abs(grid.x_min + j * grid.dx) < 1e-9 * grid.dx

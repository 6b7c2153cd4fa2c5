"""Session fixtures: grids, potentials, pulse, eigenstates.

The expensive propagation runs live here too so every test module shares
one copy.  Everything is deterministic; no tmpdir state leaks between
tests.
"""

import sys

import numpy as np
import pytest

from khatom.core import SpatialGrid, TimeGrid
from khatom.eigen import coherent_superposition, imaginary_time_ground_state, kh_bound_states
from khatom.frame import FrameTransformContext
from khatom.laser import PulseParams, build_field_cache
from khatom.observables import Recorder
from khatom.potential import atomic_potential, kh_averaged_potential
from khatom.propagator import MODE_KH, MODE_LAB, PropagationJob, propagate

ALPHA0 = 10.23


@pytest.fixture(scope="session")
def grid():
    return SpatialGrid()


@pytest.fixture(scope="session")
def v_atom(grid):
    return atomic_potential(grid.x)


@pytest.fixture(scope="session")
def averaged(grid):
    return kh_averaged_potential(grid, ALPHA0)


@pytest.fixture(scope="session")
def pulse():
    return PulseParams(intensity=5.7e13)


@pytest.fixture(scope="session")
def long_pulse():
    # extended flat top for the stabilization phenomenology runs
    return PulseParams(intensity=5.7e13, flat_end_cycles=22, total_cycles=24)


@pytest.fixture(scope="session")
def cache(pulse):
    return build_field_cache(pulse, dt_field=0.025)


@pytest.fixture(scope="session")
def long_cache(long_pulse):
    return build_field_cache(long_pulse, dt_field=0.025)


@pytest.fixture(scope="session")
def ground_pair(grid, v_atom):
    return imaginary_time_ground_state(v_atom, grid)


@pytest.fixture(scope="session")
def kh_pairs(grid, averaged):
    return kh_bound_states(grid, ALPHA0, averaged=averaged)


@pytest.fixture(scope="session")
def psi_coh(kh_pairs):
    return coherent_superposition(kh_pairs[0], kh_pairs[1])


@pytest.fixture(scope="session")
def beat_period(kh_pairs):
    return 2.0 * np.pi / (kh_pairs[1].energy - kh_pairs[0].energy)


@pytest.fixture(scope="session")
def kh_beat_run(grid, averaged, kh_pairs, psi_coh, beat_period):
    """Field-free run in the averaged well over two beat periods.

    Snapshots at the quarter-period marks; the recorded series carries
    the autocorrelation and half-line masses used by several tests.
    """
    t10 = beat_period
    rec = Recorder(MODE_KH, kh_pairs=kh_pairs)
    job = PropagationJob(
        mode=MODE_KH,
        initial=psi_coh,
        time=TimeGrid(t0=0.0, dt=0.05, n_steps=int(round(2.0 * t10 / 0.05))),
        v=averaged.samples,
        use_absorber=False,
        snapshot_times=[k * t10 / 4.0 for k in range(9)],
        observer=rec,
    )
    return propagate(job), rec


@pytest.fixture(scope="session")
def beat_wigners(kh_beat_run):
    from khatom.phasespace import wigner

    result, _ = kh_beat_run
    return [wigner(snap) for snap in result.snapshots]


@pytest.fixture(scope="session")
def lab_ground_run(grid, v_atom, pulse, cache, ground_pair, kh_pairs):
    """Default 12-cycle pulse on the field-free ground state.

    The stabilization-era series (trapped width, dressed populations,
    ground survival) come from this run.
    """
    rec = Recorder(
        MODE_LAB,
        ground_pair=ground_pair,
        kh_pairs=kh_pairs,
        frame_ctx=FrameTransformContext(cache=cache, grid=grid),
    )
    wf0 = ground_pair.state.with_frame("lab")
    job = PropagationJob(
        mode=MODE_LAB,
        initial=wf0,
        time=TimeGrid(t0=0.0, dt=0.05, n_steps=int(round(pulse.t_final / 0.05))),
        v=v_atom,
        cache=cache,
        snapshot_times=[625.0, pulse.t_final],
        observer=rec,
    )
    return propagate(job), rec


@pytest.fixture(scope="session")
def lab_ground_production(grid, v_atom, long_pulse, long_cache, ground_pair, kh_pairs):
    """24-cycle pulse on the field-free ground state, dt 0.1.

    The long-flat-top production run behind the width/population/mean
    series; observer cadence 5 keeps half-cycle structure resolvable
    after one-cycle boxcar smoothing.
    """
    rec = Recorder(
        MODE_LAB,
        ground_pair=ground_pair,
        kh_pairs=kh_pairs,
        frame_ctx=FrameTransformContext(cache=long_cache, grid=grid),
    )
    job = PropagationJob(
        mode=MODE_LAB,
        initial=ground_pair.state.with_frame("lab"),
        time=TimeGrid(t0=0.0, dt=0.1, n_steps=int(round(long_pulse.t_final / 0.1))),
        v=v_atom,
        cache=long_cache,
        snapshot_times=[600.0, 1200.0, 1800.0, long_pulse.t_final],
        observer=rec,
        observer_cadence=5,
    )
    return propagate(job), rec


@pytest.fixture(scope="session")
def lab_coh_run(grid, v_atom, long_pulse, long_cache, ground_pair, kh_pairs, psi_coh):
    """24-cycle pulse driving the dressed-state superposition.

    Starts from the two-state superposition (frames coincide at t=0)
    and keeps five flat-top snapshots trailing each of the three
    late-time window centers where the sloshing is inspected.
    """
    rec = Recorder(
        MODE_LAB,
        ground_pair=ground_pair,
        kh_pairs=kh_pairs,
        frame_ctx=FrameTransformContext(cache=long_cache, grid=grid),
    )
    wf0 = psi_coh.with_frame("lab")
    centers = (720.0, 1520.0, 2198.0)
    snaps = sorted(c + d for c in centers for d in (-80.0, -60.0, -40.0, -20.0, 0.0))
    job = PropagationJob(
        mode=MODE_LAB,
        initial=wf0,
        time=TimeGrid(t0=0.0, dt=0.05, n_steps=int(round(long_pulse.t_final / 0.05))),
        v=v_atom,
        cache=long_cache,
        snapshot_times=snaps,
        observer=rec,
    )
    return propagate(job), rec


def pytest_terminal_summary(terminalreporter):
    # the acceptance module collects one verdict line per check; echo them
    # on the real report stream where capture cannot hide the PASS lines
    for name in ("test_acceptance", "tests.test_acceptance"):
        mod = sys.modules.get(name)
        if mod is not None and getattr(mod, "VERDICTS", None):
            terminalreporter.section("acceptance verdicts")
            for line in mod.VERDICTS:
                terminalreporter.line(line)
            break

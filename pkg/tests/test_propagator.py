import numpy as np
import pytest

from khatom.core import FRAME_KH, SpatialGrid, TimeGrid, WaveFunction, inner_product
from khatom.laser import PulseParams, build_field_cache
from khatom.propagator import (
    MODE_KH,
    MODE_LAB,
    AbsorberConfig,
    PropagationJob,
    PropagationResult,
    PropagatorError,
    SplitOperator,
    build_absorber_mask,
    propagate,
    read_snapshot,
    step,
    time_evolution_phase,
    write_snapshot,
)


class NormRecorder:
    def __init__(self):
        self.rows = []

    def record(self, t, wf):
        self.rows.append((t, wf.norm()))

    def series(self):
        return self.rows


def kh_wf(grid, psi, t=0.0):
    return WaveFunction(grid, psi, t, FRAME_KH)


def test_eigenstate_single_step_stationary(kh_pairs, averaged):
    phi0 = kh_pairs[0].state
    out = step(phi0, 0.0, 0.05, MODE_KH, averaged.samples)
    assert abs(inner_product(phi0, out)) ** 2 == pytest.approx(1.0, abs=1e-8)
    assert out.t == 0.05


def test_field_free_ground_state_survival(grid, v_atom, ground_pair):
    zero_pulse = PulseParams(eps0=0.0)
    cache = build_field_cache(zero_pulse, dt_field=0.025)
    op = SplitOperator(grid, v_atom, 0.05, MODE_LAB, cache)
    psi = ground_pair.state.psi.copy()
    for k in range(1000):
        psi = op.step_array(psi, k * 0.05)
    wf = WaveFunction(grid, psi, 50.0)
    assert abs(inner_product(ground_pair.state, wf)) ** 2 == pytest.approx(1.0, abs=1e-6)


def test_free_gaussian_dispersion():
    g = SpatialGrid(-200.0, 200.0, 2048)
    sigma0 = 5.0
    psi = np.exp(-g.x**2 / (4 * sigma0**2)).astype(complex)
    wf = kh_wf(g, psi).normalized()
    op = SplitOperator(g, np.zeros(g.n_points), 0.05, MODE_KH)
    psi = wf.psi
    for k in range(1000):
        psi = op.step_array(psi, k * 0.05)
    den = np.abs(psi) ** 2
    den /= g.dx * den.sum()
    var = g.dx * np.sum(g.x**2 * den)
    want = sigma0**2 + 50.0**2 / (4 * sigma0**2)
    assert var == pytest.approx(want, rel=1e-4)


def test_unitarity_without_absorber(grid, averaged, psi_coh):
    op = SplitOperator(grid, averaged.samples, 0.05, MODE_KH)
    psi = psi_coh.psi.copy()
    for k in range(1000):
        psi = op.step_array(psi, k * 0.05)
    nrm = grid.dx * np.sum(np.abs(psi) ** 2)
    assert abs(nrm - 1.0) < 1e-11


def test_absorber_mask_shape(grid):
    mask = build_absorber_mask(grid)
    inside = np.abs(grid.x) <= 600.0
    assert np.all(mask[inside] == 1.0)
    assert np.all(mask > 0.0)
    assert np.all(mask <= 1.0)
    # monotone decay along the outgoing direction
    right = mask[grid.x > 600.0]
    assert np.all(np.diff(right) <= 1e-15)


def test_absorber_removes_outgoing_packet():
    g = SpatialGrid(-1500.0, 1500.0, 8192)
    mask = build_absorber_mask(g)
    # fast packet starting near the absorber edge, heading right
    psi = np.exp(-((g.x - 500.0) ** 2) / 200.0 + 2.0j * g.x)
    wf = kh_wf(g, psi).normalized()
    op = SplitOperator(g, np.zeros(g.n_points), 0.05, MODE_KH, mask=mask)
    psi = wf.psi
    for k in range(4000):
        psi = op.step_array(psi, k * 0.05)
    assert g.dx * np.sum(np.abs(psi) ** 2) < 0.05


def test_absorber_config_validation():
    g = SpatialGrid(-100.0, 100.0, 256)
    with pytest.raises(PropagatorError):
        build_absorber_mask(g, AbsorberConfig(inner_half_width=100.0))


def test_job_validation(grid, averaged, psi_coh, ground_pair):
    tg = TimeGrid(0.0, 0.05, 100)
    with pytest.raises(PropagatorError, match="frame"):
        PropagationJob(MODE_KH, ground_pair.state, tg, averaged.samples)
    with pytest.raises(PropagatorError, match="cache"):
        PropagationJob(MODE_LAB, ground_pair.state, tg, averaged.samples)
    with pytest.raises(PropagatorError, match="snapshot"):
        PropagationJob(
            MODE_KH, psi_coh, tg, averaged.samples, snapshot_times=(90.0,)
        )
    with pytest.raises(PropagatorError, match="mode"):
        PropagationJob("sideways", psi_coh, tg, averaged.samples)


def test_propagate_snapshots_and_observer(grid, averaged, psi_coh):
    tg = TimeGrid(0.0, 0.05, 200)
    rec = NormRecorder()
    job = PropagationJob(
        MODE_KH,
        psi_coh,
        tg,
        averaged.samples,
        snapshot_times=(0.0, 3.02, 10.0),
        observer=rec,
        observer_cadence=20,
    )
    res = propagate(job)
    assert isinstance(res, PropagationResult)
    assert len(res.snapshots) == 3
    # nearest-step placement records the actual step time
    assert res.snapshots[1].t == pytest.approx(3.0)
    assert res.snapshots[2].t == pytest.approx(10.0)
    assert res.final.t == pytest.approx(10.0)
    # observer: step 0, every 20 steps, final step (200 is on cadence)
    assert len(rec.rows) == 11
    assert res.series is rec.series()
    assert res.absorbed_norm == pytest.approx(0.0, abs=1e-12)
    assert res.final.frame == FRAME_KH


def test_propagate_aborts_on_overflow(grid, psi_coh):
    tg = TimeGrid(0.0, 0.05, 10)
    v = np.full(grid.n_points, np.inf)
    job = PropagationJob(MODE_KH, psi_coh, tg, v, use_absorber=False)
    with pytest.raises(PropagatorError, match="step 1"):
        propagate(job)


def test_kh_energy_conservation(grid, averaged, psi_coh):
    from khatom.eigen import rayleigh_energy

    op = SplitOperator(grid, averaged.samples, 0.05, MODE_KH)
    psi = psi_coh.psi.copy()
    e0 = rayleigh_energy(averaged.samples, WaveFunction(grid, psi, 0.0, FRAME_KH))
    for k in range(2000):
        psi = op.step_array(psi, k * 0.05)
    e1 = rayleigh_energy(averaged.samples, WaveFunction(grid, psi, 100.0, FRAME_KH))
    assert abs((e1 - e0) / e0) < 1e-8


def test_time_evolution_phase(kh_pairs):
    assert time_evolution_phase(kh_pairs[0], 0.0) == 1.0 + 0.0j
    w10 = kh_pairs[1].energy - kh_pairs[0].energy
    t10 = 2 * np.pi / w10
    p0 = time_evolution_phase(kh_pairs[0], t10)
    p1 = time_evolution_phase(kh_pairs[1], t10)
    assert p0 == pytest.approx(p1, abs=1e-9)
    assert abs(time_evolution_phase(-0.321, 17.3)) == pytest.approx(1.0, rel=1e-12)


def test_snapshot_round_trip(tmp_path, psi_coh):
    path = tmp_path / "state.khps"
    write_snapshot(path, psi_coh)
    back = read_snapshot(path)
    assert back.grid == psi_coh.grid
    assert back.t == psi_coh.t
    assert back.frame == psi_coh.frame
    assert np.array_equal(back.psi, psi_coh.psi)


def test_snapshot_rejects_garbage(tmp_path):
    path = tmp_path / "bad.khps"
    path.write_bytes(b"NOTASNAP 4 0 1 0 lab\n" + b"\x00" * 64)
    with pytest.raises(PropagatorError, match="not a"):
        read_snapshot(path)
    path2 = tmp_path / "short.khps"
    path2.write_bytes(b"KHPS1 256 -1.0 1.0 0.0 lab\n" + b"\x00" * 64)
    with pytest.raises(PropagatorError, match="truncated"):
        read_snapshot(path2)

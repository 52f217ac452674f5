"""Pattern taxonomy on constructed traces and on the live system.

Synthetic trajectories place triangular spikes and subthreshold bumps at
known instants, so every rule of the classifier fires on a trace whose
correct label is beyond argument. The live-system cases then pin the
labels at couplings where the attractor family is known.
"""

import numpy as np
import pytest

from nakduo.classify import (INTERMITTENT, PHASE_LOCKING, QUIESCENT,
                             SYNCHRONOUS, TS_BURSTING, TS_MMO, TS_SUB,
                             ClassifyConfig, SpikeTrain, _signature_from_counts,
                             classify_pattern, detect_spikes, input_signal,
                             mmo_signature, multistability_probe,
                             simulate_pattern)
from nakduo.errors import ConfigInvalid, NotPeriodic, WindowTooShort
from nakduo.ode import Trajectory
from nakduo.params import COLD_SEEDS, default_pair

COLUMNS = ("V1", "n1", "V2", "n2")
DT = 0.02
BASE = -60.0


def _lay_bumps(t, centers, height, half_width):
    """Triangular bumps of the given peak height over the -60 baseline."""
    v = np.full_like(t, BASE)
    for tc in centers:
        tri = 1.0 - np.abs(t - tc) / half_width
        np.maximum(v, BASE + (height - BASE) * np.clip(tri, 0.0, 1.0), out=v)
    return v


def _make_traj(spikes1, spikes2, smalls2=(), t_end=800.0):
    t = np.arange(0.0, t_end, DT)
    y = np.zeros((len(t), 4))
    y[:, 0] = _lay_bumps(t, spikes1, 0.0, 0.6)
    v2 = _lay_bumps(t, spikes2, 0.0, 0.6)
    if len(smalls2):
        v2 = np.maximum(v2, _lay_bumps(t, smalls2, -45.0, 1.5))
    y[:, 2] = v2
    y[:, 1], y[:, 3] = 0.1, 0.1
    return Trajectory(t=t, y=y, events=[], columns=COLUMNS,
                      t_end=float(t[-1]), y_end=y[-1])


def _tonic1(t_end=800.0, isi=8.0):
    return np.arange(4.0, t_end - 4.0, isi)


# ---------------------------------------------------------------------------
# spike detection
# ---------------------------------------------------------------------------

def test_detect_spikes_counts_and_times():
    centers = np.array([50.0, 120.0, 121.4, 300.0])
    traj = _make_traj(centers, [])
    st = detect_spikes(traj, 0)
    # the pair at 120/121.4 stays separate at the default 1 ms merge
    assert len(st) == 4
    assert np.all(np.abs(st.times - (centers - 0.2)) < 0.2)
    assert np.all(st.peaks > -1.0)
    assert st.threshold == -20.0


def test_detect_spikes_merges_close_crossings():
    traj = _make_traj([200.0, 200.8], [])
    assert len(detect_spikes(traj, 0, min_separation=1.0)) == 1
    assert len(detect_spikes(traj, 0, min_separation=0.3)) == 2


def test_detect_spikes_respects_threshold():
    traj = _make_traj([], [100.0, 200.0], smalls2=[150.0])
    assert len(detect_spikes(traj, 1, threshold=-20.0)) == 2
    # a lower threshold starts counting the -45 bump too
    assert len(detect_spikes(traj, 1, threshold=-50.0)) == 3


def test_spike_train_rejects_unsorted_times():
    with pytest.raises(ConfigInvalid):
        SpikeTrain(times=np.array([2.0, 1.0]), peaks=np.zeros(2),
                   threshold=-20.0)


# ---------------------------------------------------------------------------
# signature encoding
# ---------------------------------------------------------------------------

def test_signature_simple_alternation():
    assert _signature_from_counts([2, 2, 2, 2]) == "1^2"


def test_signature_grouped_spikes():
    assert _signature_from_counts([0, 0, 2, 0, 0, 2, 0, 0, 2]) == "3^2"


def test_signature_two_pair_block():
    assert _signature_from_counts([1, 2, 1, 2, 1, 2]) == "1^1 1^2"


def test_signature_tonic_is_one_up_zero():
    assert _signature_from_counts([0, 0, 0]) == "1^0"


def test_signature_aperiodic_counts_raise_with_stats():
    with pytest.raises(NotPeriodic) as exc:
        _signature_from_counts([1, 3, 2, 1, 5, 2, 4, 1, 7, 2, 6, 3])
    assert exc.value.window_stats
    assert sum(exc.value.window_stats.values()) > 0


def test_mmo_signature_from_trace():
    spikes = np.arange(20.0, 780.0, 40.0)
    smalls = np.concatenate([s + np.array([13.0, 22.0, 31.0])
                             for s in spikes[:-1]])
    traj = _make_traj(_tonic1(), spikes, smalls2=smalls)
    assert mmo_signature(traj) == "1^3"


# ---------------------------------------------------------------------------
# classification rules on constructed traces
# ---------------------------------------------------------------------------

def test_classify_quiescent_when_neuron1_silent():
    rep = classify_pattern(_make_traj([], []), default_pair(0.1))
    assert rep.label == QUIESCENT
    assert rep.n_spikes_1 == rep.n_spikes_2 == 0


def test_classify_ts_sub_when_neuron2_silent():
    rep = classify_pattern(_make_traj(_tonic1(), []), default_pair(0.1))
    assert rep.label == TS_SUB
    assert rep.n_spikes_2 == 0
    assert rep.periodic is True


def test_classify_synchronous_on_shared_spike_times():
    times = _tonic1()
    rep = classify_pattern(_make_traj(times, times + 0.4), default_pair(0.3))
    assert rep.label == SYNCHRONOUS
    assert rep.synchrony_index >= 0.95
    assert rep.max_spike_offset <= 2.0


def test_classify_bursting_on_regular_groups():
    groups = []
    for start in np.arange(10.0, 760.0, 58.0):
        groups.append(start + 6.0 * np.arange(4))
    spikes = np.concatenate(groups)
    rep = classify_pattern(_make_traj(_tonic1(), spikes), default_pair(0.1))
    assert rep.label == TS_BURSTING
    assert rep.burst_count == len(groups)


def test_classify_intermittent_on_irregular_epochs():
    blocks, start = [], 10.0
    for size, silent in ((9, 30.0), (7, 170.0), (10, 35.0), (8, 0.0)):
        blocks.append(start + 6.0 * np.arange(size))
        start = blocks[-1][-1] + silent
    spikes = np.concatenate(blocks)
    rep = classify_pattern(_make_traj(_tonic1(), spikes), default_pair(0.1))
    assert rep.label == INTERMITTENT
    assert rep.burst_count == len(blocks)


def test_classify_mmo_on_small_filled_gaps():
    spikes = np.arange(20.0, 780.0, 40.0)
    smalls = np.concatenate([s + np.array([15.0, 27.0]) for s in spikes[:-1]])
    rep = classify_pattern(_make_traj(_tonic1(), spikes, smalls2=smalls),
                           default_pair(0.1))
    assert rep.label == TS_MMO
    assert rep.mmo_signature == "1^2"
    assert rep.small_osc_count == 2 * (len(spikes) - 1)


def test_classify_phase_locking_on_bare_subharmonic():
    rep = classify_pattern(_make_traj(_tonic1(), _tonic1()[::2] + 3.0),
                           default_pair(0.1))
    assert rep.label == PHASE_LOCKING
    assert rep.synchrony_index < 0.95


def test_classify_window_too_short():
    with pytest.raises(WindowTooShort):
        classify_pattern(_make_traj(_tonic1(t_end=200.0), [], t_end=200.0),
                         default_pair(0.1))


def test_classify_is_deterministic():
    traj = _make_traj(_tonic1(), _tonic1()[::2] + 3.0)
    c = default_pair(0.1)
    assert classify_pattern(traj, c) == classify_pattern(traj, c)


def test_classify_config_is_echoed():
    cfg = ClassifyConfig(min_spikes=10)
    rep = classify_pattern(_make_traj(_tonic1(), []), default_pair(0.1), cfg)
    assert rep.config["min_spikes"] == 10


# ---------------------------------------------------------------------------
# coupling inputs
# ---------------------------------------------------------------------------

def test_input_signal_formulas():
    traj = _make_traj([], [], t_end=1.0)
    traj.y[:, 0] = -50.0
    traj.y[:, 2] = -60.0
    c = default_pair(0.2)
    yin, zin = input_signal(traj, c)
    np.testing.assert_allclose(yin, c.neuron1.I + c.q1 * (-10.0))
    np.testing.assert_allclose(zin, c.neuron2.I + c.q2 * (+10.0))


# ---------------------------------------------------------------------------
# live system
# ---------------------------------------------------------------------------

def test_live_quiescent_below_onset(tight):
    c = default_pair(0.05, I1=5.0, I2=40.0)
    traj = simulate_pattern(c, (-70.0, 0.01, -70.0, 0.01),
                            transient=400.0, window=600.0, iconfig=tight)
    assert classify_pattern(traj, c).label == QUIESCENT


def test_live_ts_sub_at_moderate_coupling(tight):
    c = default_pair(0.15)
    traj = simulate_pattern(c, (-20.0, 0.3, -20.0, 0.4),
                            transient=1500.0, window=900.0, iconfig=tight)
    rep = classify_pattern(traj, c)
    assert rep.label == TS_SUB
    assert rep.n_spikes_1 >= 50
    assert rep.n_spikes_2 == 0


def test_live_synchrony_at_strong_coupling(tight):
    c = default_pair(0.35)
    traj = simulate_pattern(c, (-20.0, 0.3, -20.0, 0.4),
                            transient=2000.0, window=900.0, iconfig=tight)
    rep = classify_pattern(traj, c)
    assert rep.label == SYNCHRONOUS
    assert rep.synchrony_index >= 0.95
    assert rep.max_spike_offset <= 2.0
    assert abs(rep.n_spikes_1 - rep.n_spikes_2) <= 1


def test_live_mmo_at_reference_coupling(tight):
    c = default_pair(0.092)
    traj = simulate_pattern(c, (-20.0, 0.3, -20.0, 0.4),
                            transient=2500.0, window=3000.0, iconfig=tight)
    rep = classify_pattern(traj, c)
    assert rep.label == TS_MMO
    assert rep.small_osc_count > 0


def test_live_multistability_at_burst_fold(tight):
    # seeds chosen in the two basins that coexist at this coupling: one
    # lands on the grouped-spiking cycle, the other on the subthreshold
    # attractor
    seeds = [COLD_SEEDS[0], (-72.786420, 0.081614, -49.998806, 0.276538)]
    c = default_pair(0.096783)
    results = multistability_probe(c, seeds, transient=2500.0,
                                   window=3000.0, iconfig=tight)
    labels = {rep.label for _, rep in results}
    assert labels == {TS_BURSTING, TS_SUB}


def test_multistability_probe_carries_errors(tight):
    c = default_pair(0.35)
    results = multistability_probe(c, COLD_SEEDS, transient=150.0,
                                   window=150.0, iconfig=tight)
    assert all(isinstance(item, WindowTooShort) for _, item in results)


def test_multistability_probe_rejects_empty_seed_list():
    with pytest.raises(ConfigInvalid):
        multistability_probe(default_pair(0.1), [])

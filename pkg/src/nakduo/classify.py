"""Oscillation-pattern taxonomy over simulated voltage traces.

Labels a post-transient trajectory of the coupled pair as one of the
observed regimes: phase locking, mixed-mode oscillations, bursting,
subthreshold-only, intermittent switching, synchrony, or quiescence.
All patterns are defined visually in the source material, so every
threshold here is an explicit config knob echoed back in the report.
"""

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigInvalid, NakduoError, NotPeriodic, WindowTooShort
from .ode import IntegratorConfig, Trajectory, integrate, field_coupled
from .params import CoupledSystem

QUIESCENT = "Quiescent"
TS_SUB = "TS_Sub"
SYNCHRONOUS = "Synchronous"
TS_BURSTING = "TS_Bursting"
TS_MMO = "TS_MMO"
INTERMITTENT = "Intermittent"
PHASE_LOCKING = "PhaseLocking"


@dataclass(frozen=True)
class ClassifyConfig:
    """Every visual judgement call, spelled out.

    burst_gap_factor separates spike groups on the ISI axis. A burst
    pattern needs its silent gaps mutually regular (within
    gap_regularity of each other) and its group sizes stereotyped
    (within size_regularity of the median, median at least
    burst_min_size); grouped spiking that fails the size test but whose
    silent gaps carry subthreshold oscillations is a mixed mode, and
    irregular gaps with long epochs are intermittency. mmo_gap_fraction
    is the share of the relevant gaps that must carry a subthreshold
    oscillation.
    """

    spike_threshold: float = -20.0
    min_separation: float = 1.0
    small_osc_floor: float = 2.0
    burst_gap_factor: float = 3.0
    gap_regularity: float = 3.0
    size_regularity: float = 1.5
    burst_min_size: int = 2
    sync_offset: float = 2.0
    sync_index_min: float = 0.95
    mmo_gap_fraction: float = 0.5
    min_spikes: int = 50
    epoch_isis: int = 3

    def as_dict(self):
        return {k: getattr(self, k) for k in (
            "spike_threshold", "min_separation", "small_osc_floor",
            "burst_gap_factor", "gap_regularity", "size_regularity",
            "burst_min_size", "sync_offset", "sync_index_min",
            "mmo_gap_fraction", "min_spikes", "epoch_isis")}


@dataclass(frozen=True)
class SpikeTrain:
    times: np.ndarray
    peaks: np.ndarray
    threshold: float

    def __post_init__(self):
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ConfigInvalid("spike times must increase")

    def __len__(self):
        return len(self.times)

    @property
    def isis(self):
        return np.diff(self.times)


@dataclass(frozen=True)
class PatternReport:
    label: str
    n_spikes_1: int
    n_spikes_2: int
    small_osc_count: int
    burst_count: int
    mmo_signature: Optional[str]
    synchrony_index: float
    max_spike_offset: float
    mean_vdiff_at_spikes: float
    periodic: Optional[bool]
    config: dict = field(default_factory=dict)


def _voltage_column(columns, neuron_index):
    names = {0: ("V1", "V"), 1: ("V2",)}[int(neuron_index)]
    for name in names:
        if name in columns:
            return list(columns).index(name)
    raise ConfigInvalid(f"no voltage column for neuron {neuron_index} "
                        f"in {columns}")


def detect_spikes(traj: Trajectory, neuron_index, threshold=-20.0,
                  min_separation=1.0) -> SpikeTrain:
    """Upward threshold crossings, merged within ``min_separation`` ms.

    Peak voltage is refined on the dense interpolant when the trajectory
    carries one, otherwise on the accepted-step samples.
    """
    col = _voltage_column(traj.columns, neuron_index)
    t, v = traj.t, traj.y[:, col]
    above = v >= threshold
    ups = np.flatnonzero(~above[:-1] & above[1:])
    times, peaks = [], []
    for k in ups:
        # linear crossing estimate between samples k and k+1
        frac = (threshold - v[k]) / (v[k + 1] - v[k])
        tc = t[k] + frac * (t[k + 1] - t[k])
        if times and tc - times[-1] < min_separation:
            continue
        # peak within the suprathreshold run that starts here
        j = k + 1
        while j < len(v) - 1 and v[j + 1] >= threshold:
            j += 1
        seg = slice(k, min(j + 2, len(v)))
        if traj.has_dense:
            tq = np.linspace(t[seg.start], t[min(seg.stop, len(t)) - 1], 64)
            vv = traj.eval(tq)[:, col]
            peaks.append(float(vv.max()))
        else:
            peaks.append(float(v[seg].max()))
        times.append(float(tc))
    return SpikeTrain(times=np.asarray(times), peaks=np.asarray(peaks),
                      threshold=float(threshold))


def input_signal(traj: Trajectory, c: CoupledSystem, times=None):
    """Drive-plus-coupling inputs Y(t) into neuron 1 and Z(t) into 2."""
    if times is None:
        y = traj.y
    else:
        y = np.atleast_2d(traj.eval(np.asarray(times, dtype=float)))
    v1, v2 = y[:, 0], y[:, 2]
    yin = c.neuron1.I + c.q1 * (v2 - v1)
    zin = c.neuron2.I + c.q2 * (v1 - v2)
    return yin, zin


def _small_oscillations(traj, col, lo_t, hi_t, threshold, floor, dt=0.05):
    """Count subthreshold local maxima with prominence >= floor in a gap."""
    if hi_t - lo_t < 4 * dt:
        return 0
    tq = np.arange(lo_t, hi_t, dt)
    v = (traj.eval(tq)[:, col] if traj.has_dense
         else np.interp(tq, traj.t, traj.y[:, col]))
    peaks = np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])) + 1
    count = 0
    last = 0
    for p in peaks:
        if v[p] >= threshold:
            continue
        trough = v[last:p].min() if p > last else v[p]
        if v[p] - trough >= floor:
            count += 1
            last = p
    return count


def _gap_small_counts(traj, col, spike_times, threshold, floor, margin=1.5):
    counts = []
    for a, b in zip(spike_times[:-1], spike_times[1:]):
        counts.append(_small_oscillations(traj, col, a + margin, b - 0.2,
                                          threshold, floor))
    return np.asarray(counts, dtype=int)


def _burst_groups(times, gap_factor):
    """Split spike times into groups at ISIs >= gap_factor * median.

    Returns (groups, gaps, cuts) where cuts indexes the splitting ISIs,
    which is also their position in the per-gap small-oscillation counts.
    """
    if len(times) < 3:
        return [times], np.empty(0), np.empty(0, dtype=int)
    isi = np.diff(times)
    med = float(np.median(isi))
    cut = np.flatnonzero(isi >= gap_factor * med)
    groups = np.split(times, cut + 1)
    gaps = isi[cut]
    return groups, gaps, cut


def _isi_periodic(isi, max_period=16, tol=0.02):
    """Does the ISI sequence repeat with some period <= max_period?"""
    if len(isi) < 6:
        return None
    scale = float(np.median(isi))
    for k in range(1, min(max_period, len(isi) // 2) + 1):
        if np.max(np.abs(isi[k:] - isi[:-k])) < tol * scale:
            return True
    return False


def _synchrony(t1, t2, offset):
    off = np.array([float(np.min(np.abs(t2 - t))) for t in t1])
    index = float(np.mean(off <= offset)) if len(off) else 0.0
    return index, (float(off.max()) if len(off) else np.inf)


def classify_pattern(traj: Trajectory, c: CoupledSystem,
                     config: ClassifyConfig = None) -> PatternReport:
    """Label the window by the first matching rule.

    Rule order: Quiescent, TS_Sub, Synchronous, TS_Bursting, TS_MMO,
    Intermittent, PhaseLocking. The window must already be transient-free
    and hold at least ``config.min_spikes`` neuron-1 spikes.
    """
    cfg = config or ClassifyConfig()
    s1 = detect_spikes(traj, 0, cfg.spike_threshold, cfg.min_separation)
    s2 = detect_spikes(traj, 1, cfg.spike_threshold, cfg.min_separation)
    col2 = _voltage_column(traj.columns, 1)

    def report(label, periodic=None, signature=None, bursts=0, smalls=0,
               sync=(0.0, np.inf)):
        vdiff = np.nan
        if len(s1):
            yat = (np.atleast_2d(traj.eval(s1.times)) if traj.has_dense
                   else traj.y[np.searchsorted(traj.t, s1.times).clip(
                       0, len(traj.t) - 1)])
            vdiff = float(np.mean(np.abs(yat[:, 0] - yat[:, col2])))
        return PatternReport(
            label=label, n_spikes_1=len(s1), n_spikes_2=len(s2),
            small_osc_count=int(smalls), burst_count=int(bursts),
            mmo_signature=signature, synchrony_index=float(sync[0]),
            max_spike_offset=float(sync[1]),
            mean_vdiff_at_spikes=vdiff, periodic=periodic,
            config=cfg.as_dict())

    if len(s1) == 0:
        return report(QUIESCENT)
    if len(s1) < cfg.min_spikes:
        raise WindowTooShort(
            f"{len(s1)} neuron-1 spikes < {cfg.min_spikes}")
    if len(s2) == 0:
        return report(TS_SUB, periodic=_isi_periodic(s1.isis))

    periodic = _isi_periodic(s2.isis)
    sync = _synchrony(s1.times, s2.times, cfg.sync_offset)
    if (sync[0] >= cfg.sync_index_min and sync[1] <= cfg.sync_offset
            and abs(len(s2) - len(s1)) <= 0.05 * len(s1)):
        return report(SYNCHRONOUS, periodic=periodic, sync=sync)

    groups, gaps, cuts = _burst_groups(s2.times, cfg.burst_gap_factor)
    smalls = _gap_small_counts(traj, col2, s2.times, cfg.spike_threshold,
                               cfg.small_osc_floor)

    def mmo_report():
        signature = None
        try:
            signature = _signature_from_counts(smalls)
        except NotPeriodic:
            pass
        return report(TS_MMO, periodic=periodic, smalls=smalls.sum(),
                      signature=signature, sync=sync)

    if len(gaps) >= 2:
        regular = float(gaps.max()) <= cfg.gap_regularity * float(
            np.median(gaps))
        sizes = np.array([len(g) for g in groups])
        med_size = float(np.median(sizes))
        stereotyped = (med_size >= cfg.burst_min_size
                       and sizes.max() <= cfg.size_regularity * med_size)
        # silent gaps that carry subthreshold cycles mark a small phase
        cut_mmo = float(np.mean(smalls[cuts] >= 1)) >= cfg.mmo_gap_fraction
        if regular and stereotyped:
            return report(TS_BURSTING, periodic=periodic, bursts=len(groups),
                          smalls=smalls.sum(), sync=sync)
        if regular and cut_mmo:
            return mmo_report()
        if np.any(sizes - 1 >= cfg.epoch_isis):
            return report(INTERMITTENT, periodic=periodic,
                          bursts=len(groups), smalls=smalls.sum(), sync=sync)
        if cut_mmo:
            return mmo_report()

    if len(smalls) and np.mean(smalls >= 1) >= cfg.mmo_gap_fraction:
        return mmo_report()
    return report(PHASE_LOCKING, periodic=periodic, sync=sync)


def _signature_from_counts(small_counts):
    """Run-length encode (large, small) alternation and find its period.

    A gap with zero subthreshold oscillations joins its two spikes into
    one large run, so a burst of L spikes followed by s small cycles
    encodes as the pair (L, s).
    """
    small_counts = np.asarray(small_counts, dtype=int)
    if len(small_counts) == 0 or not small_counts.any():
        return "1^0"
    pairs = []
    run = 1
    for s in small_counts:
        if s == 0:
            run += 1
        else:
            pairs.append((run, int(s)))
            run = 1
    if not pairs:
        raise NotPeriodic("no complete large-small alternations",
                          window_stats={})
    for period in range(1, len(pairs) // 2 + 1):
        reps = len(pairs) // period
        if reps < 2:
            break
        ok = all(pairs[i] == pairs[i % period]
                 for i in range(period, reps * period))
        if ok and reps * period >= 0.8 * len(pairs):
            block = pairs[:period]
            return " ".join(f"{l}^{s}" for l, s in block)
    stats = {}
    for p in pairs:
        stats[p] = stats.get(p, 0) + 1
    raise NotPeriodic("no repeating large-small block", window_stats=stats)


def mmo_signature(traj: Trajectory, c: CoupledSystem = None,
                  config: ClassifyConfig = None) -> str:
    """Repeating large^small signature of a mixed-mode window.

    Raises NotPeriodic (carrying windowed pair statistics) when no block
    repeats, which is the expected outcome for chaotic mixed modes.
    """
    cfg = config or ClassifyConfig()
    s2 = detect_spikes(traj, 1, cfg.spike_threshold, cfg.min_separation)
    if len(s2) < 3:
        raise WindowTooShort("need at least 3 neuron-2 spikes")
    col2 = _voltage_column(traj.columns, 1)
    smalls = _gap_small_counts(traj, col2, s2.times, cfg.spike_threshold,
                               cfg.small_osc_floor)
    return _signature_from_counts(smalls)


def simulate_pattern(c: CoupledSystem, y0, transient=3000.0, window=4000.0,
                     iconfig: IntegratorConfig = None) -> Trajectory:
    """Integrate past the transient and return a dense analysis window."""
    iconfig = iconfig or IntegratorConfig()
    fld = field_coupled(c)
    warm = integrate(fld, np.asarray(y0, dtype=float), (0.0, transient),
                     iconfig, record=False)
    return integrate(fld, warm.y_end, (0.0, window), iconfig, dense=True)


def multistability_probe(c: CoupledSystem, initial_conditions: Sequence,
                         transient=3000.0, window=4000.0,
                         config: ClassifyConfig = None,
                         iconfig: IntegratorConfig = None
                         ) -> List[Tuple[np.ndarray, object]]:
    """Classify each seed independently; errors ride along per item."""
    if not len(initial_conditions):
        raise ConfigInvalid("need at least one initial condition")
    out = []
    for y0 in initial_conditions:
        y0 = np.asarray(y0, dtype=float)
        try:
            traj = simulate_pattern(c, y0, transient, window, iconfig)
            out.append((y0, classify_pattern(traj, c, config)))
        except NakduoError as err:
            out.append((y0, err))
    return out

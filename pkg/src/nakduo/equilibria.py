"""Equilibrium location, continuation in I, and onset classification.

The single neuron is planar, so codimension-1 points reduce to sign
changes of two scalar test functions along the branch: det J for folds
and trace J for Hopf points (the latter only where det > 0). Both are
refined by bisection along the continuation chord.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import (
    BranchEscapedBox, ConfigInvalid, Inconclusive, NoConvergence,
    NoRecurrence, StepSizeUnderflow,
)
from .model import gating_inf, jacobian_single, rhs_single
from .ode import Field, IntegratorConfig, collect_crossings, field_single, plane
from .params import NeuronParams

V_BOX = (-90.0, 40.0)
N_BOX = (0.0, 1.0)

STABLE = "Stable"
SADDLE = "Saddle"
UNSTABLE = "UnstableNodeFocus"

FOLD = "Fold"
HOPF = "Hopf"
SNIC = "SNIC"
SN_OFF_CYCLE = "SaddleNodeOffCycle"
SUB_HOPF = "SubcriticalHopf"
SUPER_HOPF = "SupercriticalHopf"


@dataclass(frozen=True)
class Equilibrium:
    state: np.ndarray
    eigenvalues: np.ndarray
    klass: str

    @property
    def V(self):
        return float(self.state[0])

    @property
    def n(self):
        return float(self.state[1])


@dataclass(frozen=True)
class BranchPoint:
    I: float
    kind: str
    equilibrium: Equilibrium


@dataclass
class Branch:
    """Continuation result: arrays along the branch plus flagged points."""

    I: np.ndarray
    states: np.ndarray
    klass: List[str]
    points: List[BranchPoint]


def _classify(eigvals):
    det = float(np.prod(eigvals).real)
    if det < 0.0:
        return SADDLE
    if max(eigvals.real) < 0.0:
        return STABLE
    return UNSTABLE


def _equilibrium_at(p, state):
    jac = jacobian_single(p, state)
    eig = np.linalg.eigvals(jac)
    return Equilibrium(state=np.asarray(state, dtype=float),
                       eigenvalues=eig, klass=_classify(eig))


def _newton_polish(p, state, tol=1e-12, max_iter=60):
    """Damped Newton on the planar field; returns None on failure."""
    y = np.asarray(state, dtype=float).copy()
    for _ in range(max_iter):
        r = rhs_single(p, y)
        nr = np.linalg.norm(r)
        if nr <= tol:
            return y
        jac = jacobian_single(p, y)
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        for _ in range(30):
            cand = y + lam * step
            if np.linalg.norm(rhs_single(p, cand)) < nr:
                y = cand
                break
            lam *= 0.5
        else:
            return None
    r = rhs_single(p, y)
    return y if np.linalg.norm(r) <= tol else None


def _n_on_v_nullcline(p, V):
    """n solving Vdot = 0 at V; infinite where the K term vanishes."""
    drive = p.I - p.g_L * (V - p.E_L) \
        - p.g_Na * gating_inf(V, p.m_half, p.k_m) * (V - p.E_Na)
    den = p.g_K * (V - p.E_K)
    with np.errstate(divide="ignore", invalid="ignore"):
        return drive / den


def find_equilibria(p: NeuronParams, grid_points=2000) -> List[Equilibrium]:
    """All equilibria in the box V in [-90, 40], n in [0, 1].

    Scans the reduced scalar function n_inf(V) - n_nullcline(V) for sign
    changes on a uniform V grid, polishes each bracket by damped Newton,
    and deduplicates. Raises NoConvergence if a bracket refuses to polish
    from every seed.
    """
    lo = max(V_BOX[0], p.E_K + 1e-9)
    vs = np.linspace(lo + 1e-9, V_BOX[1], grid_points)
    gap = gating_inf(vs, p.n_half, p.k_n) - _n_on_v_nullcline(p, vs)
    good = np.isfinite(gap)
    roots = []
    failures = 0
    brackets = 0
    for k in range(len(vs) - 1):
        if not (good[k] and good[k + 1]):
            continue
        if gap[k] == 0.0:
            lo_v = hi_v = vs[k]
        elif gap[k] * gap[k + 1] < 0.0:
            lo_v, hi_v = vs[k], vs[k + 1]
        else:
            continue
        brackets += 1
        converged = None
        for frac in (0.5, 0.0, 1.0):
            v0 = lo_v + frac * (hi_v - lo_v)
            n0 = float(np.clip(_n_on_v_nullcline(p, v0), -0.5, 1.5))
            converged = _newton_polish(p, np.array([v0, n0]))
            if converged is not None:
                break
        if converged is None:
            failures += 1
            continue
        roots.append(converged)
    if brackets and failures == brackets:
        raise NoConvergence("Newton failed from every grid bracket")
    uniq = []
    for r in roots:
        if not (V_BOX[0] - 1e-6 <= r[0] <= V_BOX[1] + 1e-6
                and N_BOX[0] - 1e-6 <= r[1] <= N_BOX[1] + 1e-6):
            continue
        if any(np.linalg.norm(r - u) < 1e-6 for u in uniq):
            continue
        uniq.append(r)
    uniq.sort(key=lambda s: s[0])
    return [_equilibrium_at(p, s) for s in uniq]


# ---------------------------------------------------------------------------
# pseudo-arclength continuation in I
# ---------------------------------------------------------------------------

def _extended_jacobian(p, V, n, I):
    jac = jacobian_single(p.with_current(I), (V, n))
    ext = np.empty((2, 3))
    ext[:, :2] = jac
    ext[0, 2] = 1.0 / p.C
    ext[1, 2] = 0.0
    return ext


def _branch_tangent(p, u, prev=None):
    ext = _extended_jacobian(p, *u)
    _, _, vt = np.linalg.svd(ext)
    tan = vt[-1]
    if prev is not None and np.dot(tan, prev) < 0.0:
        tan = -tan
    elif prev is None and tan[2] < 0.0:
        tan = -tan
    return tan


def _corrector(p, u_pred, tangent, tol=1e-11, max_iter=12):
    """Newton for rhs = 0 constrained to the hyperplane through u_pred."""
    u = u_pred.copy()
    for _ in range(max_iter):
        r = rhs_single(p.with_current(u[2]), u[:2])
        g = np.dot(u - u_pred, tangent)
        if np.linalg.norm(r) <= tol and abs(g) <= tol:
            return u
        full = np.vstack([_extended_jacobian(p, *u), tangent])
        try:
            du = np.linalg.solve(full, -np.array([r[0], r[1], g]))
        except np.linalg.LinAlgError:
            return None
        u = u + du
        if abs(u[0]) > 500.0 or abs(u[1]) > 50.0 or abs(u[2]) > 1e4:
            return None
    return None


def _tests_at(p, u):
    jac = jacobian_single(p.with_current(u[2]), u[:2])
    return float(np.linalg.det(jac)), float(np.trace(jac))


def _bisect_branch(p, u_a, u_b, pick, tol_I=1e-4, max_iter=80):
    """Bisect a sign change of ``pick`` along the chord between branch points."""
    f_a = pick(*_tests_at(p, u_a))
    for _ in range(max_iter):
        if abs(u_a[2] - u_b[2]) <= tol_I and np.linalg.norm(u_a - u_b) < 1e-3:
            break
        chord = u_b - u_a
        norm = np.linalg.norm(chord)
        if norm < 1e-14:
            break
        mid = _corrector(p, 0.5 * (u_a + u_b), chord / norm)
        if mid is None:
            break
        f_m = pick(*_tests_at(p, mid))
        if f_a * f_m <= 0.0:
            u_b = mid
        else:
            u_a, f_a = mid, f_m
    return 0.5 * (u_a + u_b)


def continue_equilibrium(p: NeuronParams, I_range: Tuple[float, float],
                         start: Optional[np.ndarray] = None,
                         ds=0.05, max_points=20000) -> Branch:
    """Trace one equilibrium branch across I_range by pseudo-arclength.

    Starts from ``start`` (or the lowest-V equilibrium at I_range[0]),
    follows the branch through folds, and flags sign changes of det J
    (fold) and trace J with det > 0 (Hopf), bisection-refined to
    |dI| <= 1e-4. Raises BranchEscapedBox if the branch leaves the state
    box before the parameter interval is covered.
    """
    I_lo, I_hi = float(min(I_range)), float(max(I_range))
    p0 = p.with_current(I_lo)
    if start is None:
        eqs = find_equilibria(p0)
        if not eqs:
            raise NoConvergence(f"no equilibrium at I = {I_lo:g}")
        start = eqs[0].state
    state = _newton_polish(p0, np.asarray(start, dtype=float))
    if state is None:
        raise NoConvergence("could not polish the starting equilibrium")

    u = np.array([state[0], state[1], I_lo])
    tangent = _branch_tangent(p, u)
    us = [u.copy()]
    tests = [_tests_at(p, u)]
    step = ds
    points: List[BranchPoint] = []

    while len(us) < max_points:
        if u[2] >= I_hi:
            break
        tangent = _branch_tangent(p, u, tangent)
        nxt = None
        while step >= 1e-10:
            nxt = _corrector(p, u + step * tangent, tangent)
            if nxt is not None:
                break
            step *= 0.5
        if nxt is None:
            raise NoConvergence(
                f"corrector failed near I = {u[2]:.6g}")
        in_v = V_BOX[0] - 5.0 <= nxt[0] <= V_BOX[1] + 5.0
        in_n = N_BOX[0] - 0.5 <= nxt[1] <= N_BOX[1] + 0.5
        if not (in_v and in_n):
            raise BranchEscapedBox(
                f"branch left the state box at I = {nxt[2]:.6g}")

        det0, tr0 = tests[-1]
        det1, tr1 = _tests_at(p, nxt)
        if det0 * det1 < 0.0:
            u_star = _bisect_branch(p, u, nxt, lambda d, t: d)
            eq = _equilibrium_at(p.with_current(u_star[2]), u_star[:2])
            points.append(BranchPoint(I=float(u_star[2]), kind=FOLD,
                                      equilibrium=eq))
        if tr0 * tr1 < 0.0 and min(det0, det1) > 0.0:
            u_star = _bisect_branch(p, u, nxt, lambda d, t: t)
            eq = _equilibrium_at(p.with_current(u_star[2]), u_star[:2])
            points.append(BranchPoint(I=float(u_star[2]), kind=HOPF,
                                      equilibrium=eq))

        u = nxt
        us.append(u.copy())
        tests.append((det1, tr1))
        step = min(step * 1.5, ds)

    Is = np.array([q[2] for q in us])
    states = np.array([q[:2] for q in us])
    klass = [_equilibrium_at(p.with_current(q[2]), q[:2]).klass for q in us]
    points.sort(key=lambda bp: bp.I)
    return Branch(I=Is, states=states, klass=klass, points=points)


# ---------------------------------------------------------------------------
# onset classification and f-I curves
# ---------------------------------------------------------------------------

def _settled_period(field: Field, y0, section_value, t_max,
                    config: IntegratorConfig, n_crossings=12, n_intervals=5):
    """Mean of the last ISIs on the section, or None without recurrence."""
    sec = plane(0, section_value, direction=1, label="cross")
    try:
        times, _, _ = collect_crossings(field, y0, sec, n_crossings,
                                        config=config, t_max=t_max)
    except NoRecurrence:
        return None
    isi = np.diff(times)
    if len(isi) < n_intervals:
        return None
    tail = isi[-n_intervals:]
    if tail.std() > 0.05 * tail.mean():
        return None
    return float(tail.mean())


def classify_fold_as_snic(p: NeuronParams, fold: BranchPoint,
                          field_at: Optional[Callable[[float], Field]] = None,
                          start_at: Optional[Callable[[float], np.ndarray]] = None,
                          section_value=-20.0, t_max=60000.0,
                          config: IntegratorConfig = None) -> str:
    """Decide whether a fold of equilibria sits on an invariant circle.

    Probes just past the fold (I + 1e-3) and far past it (I + 1): SNIC
    when a stable periodic orbit exists at both probes and the near
    period exceeds ten times the far period. A demonstrable absence of a
    periodic orbit past the fold gives SaddleNodeOffCycle; anything else
    is Inconclusive.
    """
    config = config or IntegratorConfig(max_time=max(t_max, 1e6))
    if field_at is None:
        field_at = lambda I: field_single(p.with_current(I))
    if start_at is None:
        start_at = lambda I: fold.equilibrium.state + np.array([1.0, 0.0])

    periods = {}
    escaped = {}
    for delta in (1e-3, 1.0):
        I = fold.I + delta
        try:
            periods[delta] = _settled_period(field_at(I), start_at(I),
                                             section_value, t_max, config)
            escaped[delta] = False
        except StepSizeUnderflow:
            periods[delta] = None
            escaped[delta] = True

    near, far = periods[1e-3], periods[1.0]
    if near is not None and far is not None:
        return SNIC if near > 10.0 * far else SN_OFF_CYCLE
    if near is None and far is None:
        if escaped[1e-3] or escaped[1.0]:
            return SN_OFF_CYCLE
        raise Inconclusive("no periodic orbit found either side of the fold")
    raise Inconclusive("periodic orbit found at only one probe current")


def hopf_frequency(point: BranchPoint) -> float:
    """Linear frequency (Hz) of the pair crossing the axis at a Hopf point."""
    im = np.abs(point.equilibrium.eigenvalues.imag).max()
    return 1000.0 * im / (2.0 * np.pi)


_REVERSED_KERNEL = None


def _reversed_single_field(p: NeuronParams) -> Field:
    """Time-reversed single-neuron field (compiled once, then cached)."""
    global _REVERSED_KERNEL
    if _REVERSED_KERNEL is None:
        from . import kernels

        def reversed_rhs(t, y, q, out):
            kernels.rhs_single_kernel(t, y, q, out)
            out[0] = -out[0]
            out[1] = -out[1]

        _REVERSED_KERNEL = kernels.compile_field(reversed_rhs)
    from .ode import make_field
    from .params import pack_neuron
    return make_field(_REVERSED_KERNEL, pack_neuron(p), 2, ("V", "n"),
                      compiled=True)


def subcritical_probe(p: NeuronParams, hopf: BranchPoint,
                      deltas=(1.0, 0.25), config: IntegratorConfig = None):
    """Amplitudes of the unstable cycle below a Hopf point.

    Integrates the time-reversed field from a kick off the focus; the
    unstable cycle attracts in reverse time. Returns the peak-to-peak V
    amplitude per delta; shrinking amplitude toward the Hopf point is the
    subcritical signature.
    """
    config = config or IntegratorConfig()
    amps = {}
    for delta in deltas:
        I = hopf.I - delta
        pd = p.with_current(I)
        eqs = find_equilibria(pd)
        focus = min(eqs, key=lambda e: abs(e.V - hopf.equilibrium.V))
        if focus.klass != STABLE:
            raise Inconclusive("no stable focus below the flagged Hopf point")
        fld = _reversed_single_field(pd)
        y0 = focus.state + np.array([2.0, 0.0])
        sec = plane(0, focus.V, direction=1, label="ret")
        try:
            _, states, _ = collect_crossings(fld, y0, sec, 30, config=config,
                                             transient=20, t_max=20000.0)
        except (NoRecurrence, StepSizeUnderflow) as exc:
            raise Inconclusive(
                f"reverse-time orbit did not settle at I = {I:g}") from exc
        amps[delta] = _cycle_amplitude(fld, states[-1], sec, config)
    return amps


def _cycle_amplitude(field, anchor, section, config):
    from .ode import integrate
    times, _, yend = collect_crossings(field, anchor, section, 2,
                                       config=config, t_max=5000.0)
    period = times[-1] - times[0]
    traj = integrate(field, yend, (0.0, period), config)
    return float(traj.y[:, 0].max() - traj.y[:, 0].min())


def hopf_criticality(p: NeuronParams, hopf: BranchPoint, **kw) -> str:
    """Subcritical iff an unstable cycle below the point shrinks onto it."""
    amps = subcritical_probe(p, hopf, **kw)
    deltas = sorted(amps)
    if amps[deltas[0]] < amps[deltas[-1]]:
        return SUB_HOPF
    return SUPER_HOPF


def fi_curve(p: NeuronParams, I_range: Tuple[float, float], n_points: int,
             transient=2000.0, window=4000.0, threshold=-20.0,
             config: IntegratorConfig = None):
    """Firing frequency (Hz) over a current grid; 0 marks quiescence.

    Each point integrates past ``transient`` ms from the gating-consistent
    rest state, then counts threshold crossings over ``window`` ms.
    Near-onset points with fewer than two spikes in the window report 0.
    """
    from .model import resting_state
    from .ode import integrate

    if n_points < 2:
        raise ConfigInvalid("n_points must be at least 2")
    config = config or IntegratorConfig()
    Is = np.linspace(I_range[0], I_range[1], n_points)
    out = []
    y0 = resting_state(p, -65.0)
    for I in Is:
        fld = field_single(p.with_current(I))
        warm = integrate(fld, y0, (0.0, transient), config, record=False)
        sec = plane(0, threshold, direction=1, label="spike")
        traj = integrate(fld, warm.y_end, (0.0, window), config,
                         events=[sec], record=False)
        times = np.array([e.t for e in traj.events])
        if len(times) < 2:
            out.append((float(I), 0.0))
            continue
        freq = 1000.0 * (len(times) - 1) / (times[-1] - times[0])
        out.append((float(I), float(freq)))
    return out

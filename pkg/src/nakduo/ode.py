"""Adaptive integration with dense output, events, and variational flow.

The public entry points wrap the compiled RK5(4) core from kernels.py.
A `Field` bundles a kernel-signature function with its packed parameter
vector; constructors below build them from parameter objects. Events on
coordinate hyperplanes are located inside the core; events with a general
scalar function are located afterwards on the stored interpolant.
"""

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .errors import (
    AnalysisFailed, ConfigInvalid, MaxTimeExceeded, NoRecurrence,
    StepSizeUnderflow,
)
from .params import (
    CoupledSystem, IntegratorConfig, NeuronParams, pack_coupled, pack_neuron,
)

SINGLE_COLUMNS = ("V", "n")
COUPLED_COLUMNS = ("V1", "n1", "V2", "n2")


@dataclass(frozen=True)
class Field:
    """A flat-signature vector field plus its packed parameters.

    base_dim differs from dim only for variational fields, where the state
    is followed by the fundamental matrix (row-major) and one quadrature
    slot accumulating trace J.
    """

    f: Callable
    p: np.ndarray
    dim: int
    columns: Tuple[str, ...]
    base_dim: int = 0

    def __post_init__(self):
        if self.base_dim == 0:
            object.__setattr__(self, "base_dim", self.dim)


def field_single(p: NeuronParams) -> Field:
    return Field(kernels.rhs_single_kernel, pack_neuron(p), 2, SINGLE_COLUMNS)


def field_coupled(c: CoupledSystem) -> Field:
    return Field(kernels.rhs_coupled_kernel, pack_coupled(c), 4, COUPLED_COLUMNS)


def field_single_var(p: NeuronParams) -> Field:
    return Field(kernels.rhs_single_var_kernel, pack_neuron(p), 7,
                 SINGLE_COLUMNS, base_dim=2)


def field_coupled_var(c: CoupledSystem) -> Field:
    return Field(kernels.rhs_coupled_var_kernel, pack_coupled(c), 21,
                 COUPLED_COLUMNS, base_dim=4)


def make_field(pyfunc, p, dim, columns=None, compiled=False) -> Field:
    """Wrap a user-written ``f(t, y, p, out)`` for the integrator."""
    f = pyfunc if compiled else kernels.compile_field(pyfunc)
    cols = tuple(columns) if columns else tuple(f"y{i}" for i in range(dim))
    return Field(f, np.asarray(p, dtype=float), dim, cols)


def make_variational_field(pyfunc, jacfunc, p, dim, columns=None) -> Field:
    fvar = kernels.make_variational_field(
        kernels.compile_field(pyfunc), kernels.compile_field(jacfunc), dim)
    cols = tuple(columns) if columns else tuple(f"y{i}" for i in range(dim))
    return Field(fvar, np.asarray(p, dtype=float), dim + dim * dim + 1,
                 cols, base_dim=dim)


@dataclass(frozen=True)
class EventSpec:
    """A located crossing condition.

    Either ``component``/``value`` describe the hyperplane
    y[component] == value (fast in-core path), or ``g`` is a scalar
    function of the state located on the stored interpolant. ``terminal``
    may be False, True (stop at first hit), or an integer count.
    """

    component: Optional[int] = None
    value: float = 0.0
    direction: int = 0
    terminal: object = False
    label: str = "event"
    g: Optional[Callable] = None

    def __post_init__(self):
        if (self.component is None) == (self.g is None):
            raise ConfigInvalid("EventSpec needs exactly one of component or g")
        if self.direction not in (-1, 0, 1):
            raise ConfigInvalid("direction must be -1, 0, or +1")

    @property
    def stop_count(self):
        if self.terminal is False or self.terminal is None:
            return 0
        if self.terminal is True:
            return 1
        cnt = int(self.terminal)
        if cnt <= 0:
            raise ConfigInvalid("terminal count must be positive")
        return cnt


def plane(component, value, direction=0, terminal=False, label=None) -> EventSpec:
    if label is None:
        label = f"y{component}={value:g}"
    return EventSpec(component=component, value=float(value),
                     direction=direction, terminal=terminal, label=label)


@dataclass
class EventRecord:
    t: float
    label: str
    y: np.ndarray


@dataclass
class Trajectory:
    """Accepted-step samples, optional dense coefficients, event log."""

    t: np.ndarray
    y: np.ndarray
    events: list
    columns: Tuple[str, ...]
    t_end: float
    y_end: np.ndarray
    nsteps: int = 0
    nfev: int = 0
    # quartic interpolant per interval: qs[k] applies on
    # [t[k], t[k] + hs[k]], evaluated at s = (tq - t[k]) / hs[k]
    qs: Optional[np.ndarray] = None
    hs: Optional[np.ndarray] = None

    def column(self, name):
        return self.y[:, self.columns.index(name)]

    @property
    def has_dense(self):
        return self.qs is not None and len(self.qs) > 0

    def eval(self, tq):
        """Evaluate the dense interpolant at query times."""
        if self.qs is None or len(self.qs) == 0:
            raise ConfigInvalid("trajectory was recorded without dense output")
        scalar = np.ndim(tq) == 0
        tq = np.atleast_1d(np.asarray(tq, dtype=float))
        if tq.size and (tq.min() < self.t[0] - 1e-12 or tq.max() > self.t_end + 1e-12):
            raise ConfigInvalid("query time outside the integrated span")
        idx = np.clip(np.searchsorted(self.t, tq, side="right") - 1, 0,
                      len(self.qs) - 1)
        s = (tq - self.t[idx]) / self.hs[idx]
        powers = np.stack([s, s**2, s**3, s**4], axis=-1)
        out = self.y[idx] + self.hs[idx][:, None] * np.einsum(
            "kim,km->ki", self.qs[idx], powers)
        return out[0] if scalar else out

    def eval_component(self, tq, comp):
        return np.atleast_2d(self.eval(tq))[:, comp]

    def events_for(self, label):
        return [e for e in self.events if e.label == label]

    def to_csv(self, path):
        header = "t," + ",".join(self.columns)
        data = np.column_stack([self.t, self.y])
        np.savetxt(path, data, delimiter=",", header=header, comments="",
                   fmt="%.12g")

    def events_to_csv(self, path):
        header = "t,label," + ",".join(self.columns)
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for e in self.events:
                row = ",".join(f"{v:.12g}" for v in e.y)
                fh.write(f"{e.t:.12g},{e.label},{row}\n")


def _split_events(events, dim):
    plane_specs = []
    callable_specs = []
    for ev in events:
        if ev.component is not None:
            if not (0 <= ev.component < dim):
                raise ConfigInvalid("event component out of range")
            plane_specs.append(ev)
        else:
            callable_specs.append(ev)
    terminals = [ev for ev in events if ev.stop_count]
    if len(terminals) > 1:
        raise ConfigInvalid("at most one terminal event is supported")
    return plane_specs, callable_specs, (terminals[0] if terminals else None)


def integrate(field: Field, y0, t_span, config: IntegratorConfig = None,
              events: Sequence[EventSpec] = (), record=True, dense=False,
              first_step=0.0, step_budget=200_000_000) -> Trajectory:
    """Integrate ``field`` over t_span with event location.

    Parameters
    ----------
    field : Field
    y0 : array of field.dim initial values
    t_span : (t0, t1) with t1 >= t0; the span must fit config.max_time
    config : IntegratorConfig, defaults to IntegratorConfig()
    events : EventSpecs; at most one may be terminal
    record : keep accepted-step samples (required for dense/callable events)
    dense : keep the per-step interpolant for later evaluation

    Returns
    -------
    Trajectory

    Raises
    ------
    StepSizeUnderflow, MaxTimeExceeded, ConfigInvalid
    """
    config = config or IntegratorConfig()
    t0, t1 = float(t_span[0]), float(t_span[1])
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (field.dim,):
        raise ConfigInvalid(f"y0 must have shape ({field.dim},)")
    if not np.all(np.isfinite(y0)):
        raise ConfigInvalid("y0 must be finite")
    if t1 < t0:
        raise ConfigInvalid("t_span must be forward in time")
    if t1 - t0 > config.max_time:
        raise MaxTimeExceeded(
            f"span {t1 - t0:g} ms exceeds max_time {config.max_time:g} ms")

    plane_specs, callable_specs, terminal = _split_events(events, field.dim)
    if callable_specs:
        dense = True
    if dense:
        record = True
    if terminal is not None and terminal.g is not None and not record:
        dense = record = True

    if t1 == t0:
        return Trajectory(t=np.array([t0]), y=y0[None, :].copy(), events=[],
                          columns=field.columns, t_end=t0, y_end=y0.copy())

    if plane_specs:
        ev_idx = np.array([ev.component for ev in plane_specs], np.int64)
        ev_val = np.array([ev.value for ev in plane_specs])
        ev_dir = np.array([ev.direction for ev in plane_specs], np.int64)
    else:
        ev_idx, ev_val, ev_dir = (kernels.NO_EVENTS_IDX, kernels.NO_EVENTS_VAL,
                                  kernels.NO_EVENTS_DIR)
    stop_spec = -1
    stop_count = 0
    if terminal is not None and terminal.component is not None:
        stop_spec = plane_specs.index(terminal)
        stop_count = terminal.stop_count

    (status, t_end, y_end, ts, ys, qs, hs, ev_spec, ev_t, ev_y,
     nsteps, nfev) = kernels.dopri5(
        field.f, y0, t0, t1, field.p,
        config.rtol, config.atol, config.max_step, first_step,
        ev_idx, ev_val, ev_dir, stop_spec, stop_count,
        record, dense, step_budget)

    if status == kernels.STATUS_UNDERFLOW:
        raise StepSizeUnderflow(f"step size underflow at t = {t_end:g} ms")
    if status == kernels.STATUS_STEP_BUDGET:
        raise AnalysisFailed(f"step budget exhausted at t = {t_end:g} ms")

    events_out = [EventRecord(t=ev_t[k], label=plane_specs[ev_spec[k]].label,
                              y=ev_y[k].copy())
                  for k in range(len(ev_t))]

    traj = Trajectory(t=ts.copy() if record else np.array([t0, t_end]),
                      y=ys.copy() if record else np.vstack([y0, y_end]),
                      events=events_out, columns=field.columns,
                      t_end=t_end, y_end=y_end.copy(), nsteps=int(nsteps),
                      nfev=int(nfev),
                      qs=qs.copy() if dense else None,
                      hs=hs.copy() if dense else None)

    if callable_specs:
        _locate_callable_events(traj, callable_specs)
        term = terminal if (terminal is not None and terminal.g is not None) else None
        if term is not None:
            _truncate_at_terminal(traj, term)
        traj.events.sort(key=lambda e: e.t)
    return traj


def _locate_callable_events(traj, specs):
    """Scan stored intervals for sign changes of each g and refine."""
    n = traj.y.shape[1]
    for spec in specs:
        g_nodes = np.array([spec.g(traj.y[k]) for k in range(len(traj.t))])
        for k in range(len(traj.qs)):
            g0, g1 = g_nodes[k], g_nodes[k + 1]
            up = g0 < 0.0 <= g1
            down = g0 > 0.0 >= g1
            if not ((spec.direction > 0 and up) or (spec.direction < 0 and down)
                    or (spec.direction == 0 and (up or down))):
                continue
            h = traj.hs[k]
            q = traj.qs[k]
            yk = traj.y[k]

            def g_of_s(s):
                powers = np.array([s, s * s, s**3, s**4])
                return spec.g(yk + h * (q @ powers))

            s_hi = (traj.t[k + 1] - traj.t[k]) / h
            if g_of_s(0.0) * g_of_s(s_hi) > 0.0:
                # interpolant roundoff lost the node sign change
                continue
            s_star = brentq(g_of_s, 0.0, s_hi, xtol=1e-14)
            powers = np.array([s_star, s_star**2, s_star**3, s_star**4])
            y_star = yk + h * (q @ powers)
            traj.events.append(EventRecord(t=traj.t[k] + s_star * h,
                                           label=spec.label, y=y_star))


def _truncate_at_terminal(traj, spec):
    hits = [e for e in traj.events if e.label == spec.label]
    if len(hits) < spec.stop_count:
        return
    cut = sorted(hits, key=lambda e: e.t)[spec.stop_count - 1]
    keep = np.searchsorted(traj.t, cut.t, side="right")
    if keep and traj.t[keep - 1] == cut.t:
        keep -= 1
    traj.t = np.append(traj.t[:keep], cut.t)
    traj.y = np.vstack([traj.y[:keep], cut.y])
    if traj.qs is not None:
        traj.qs = traj.qs[:keep]
        traj.hs = traj.hs[:keep]
    traj.t_end = cut.t
    traj.y_end = cut.y.copy()
    traj.events = [e for e in traj.events if e.t <= cut.t]


def integrate_with_variational(field_var: Field, y0, t_span,
                               config: IntegratorConfig = None, record=False):
    """Co-integrate the variational system along the trajectory.

    ``field_var`` must be a variational Field (base_dim < dim). Returns
    (Trajectory of the base state, fundamental matrix at t_end, integral
    of trace J along the way). The trajectory's step samples carry only
    the base columns.
    """
    config = config or IntegratorConfig()
    n = field_var.base_dim
    if field_var.dim != n + n * n + 1:
        raise ConfigInvalid("field_var is not a variational field")
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (n,):
        raise ConfigInvalid(f"y0 must have shape ({n},)")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 == t0:
        traj = Trajectory(t=np.array([t0]), y=y0[None, :].copy(), events=[],
                          columns=field_var.columns, t_end=t0, y_end=y0.copy())
        return traj, np.eye(n), 0.0

    yaug = np.zeros(field_var.dim)
    yaug[:n] = y0
    yaug[n:n + n * n] = np.eye(n).ravel()
    traj_aug = integrate(field_var, yaug, t_span, config, record=record)
    phi = traj_aug.y_end[n:n + n * n].reshape(n, n).copy()
    quad = float(traj_aug.y_end[n + n * n])
    traj = Trajectory(t=traj_aug.t, y=traj_aug.y[:, :n], events=[],
                      columns=field_var.columns, t_end=traj_aug.t_end,
                      y_end=traj_aug.y_end[:n].copy(),
                      nsteps=traj_aug.nsteps, nfev=traj_aug.nfev)
    return traj, phi, quad


def collect_crossings(field: Field, y0, section: EventSpec, n_crossings,
                      config: IntegratorConfig = None, transient=0,
                      t_max=None):
    """Gather section crossings without storing the trajectory.

    Integrates until ``transient + n_crossings`` hits of ``section`` and
    returns (times, states, final state). Raises NoRecurrence when the
    time budget runs out first.
    """
    config = config or IntegratorConfig()
    if section.component is None:
        raise ConfigInvalid("collect_crossings needs a hyperplane section")
    if n_crossings <= 0:
        raise ConfigInvalid("n_crossings must be positive")
    budget = config.max_time if t_max is None else float(t_max)
    total = int(transient) + int(n_crossings)
    spec = EventSpec(component=section.component, value=section.value,
                     direction=section.direction, terminal=total,
                     label=section.label)
    traj = integrate(field, y0, (0.0, budget), config, events=[spec],
                     record=False)
    hits = traj.events
    if len(hits) < total:
        raise NoRecurrence(
            f"only {len(hits)} of {total} section crossings within "
            f"{budget:g} ms")
    times = np.array([e.t for e in hits[transient:]])
    states = np.array([e.y for e in hits[transient:]])
    return times, states, traj.y_end

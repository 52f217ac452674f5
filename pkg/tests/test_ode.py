"""Integrator correctness against closed-form flows and matrix exponentials."""

import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.linalg import expm

from nakduo.errors import (ConfigInvalid, MaxTimeExceeded, NoRecurrence)
from nakduo.ode import (EventSpec, collect_crossings, field_coupled,
                        field_single, field_coupled_var, integrate,
                        integrate_with_variational, make_field,
                        make_variational_field, plane)
from nakduo.params import IntegratorConfig, default_pair, integrator_neuron

TIGHT = IntegratorConfig(rtol=1e-10, atol=1e-12)


def _harmonic():
    def f(t, y, p, out):
        out[0] = y[1]
        out[1] = -y[0]
    return make_field(f, np.zeros(1), 2, columns=("x", "v"))


def _linear_field(A):
    n = A.shape[0]

    def f(t, y, p, out):
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += p[i * n + j] * y[j]
            out[i] = acc
    return make_field(f, A.ravel().copy(), n)


# ---------------------------------------------------------------------------
# closed-form accuracy
# ---------------------------------------------------------------------------

def test_harmonic_oscillator_end_state():
    traj = integrate(_harmonic(), [1.0, 0.0], (0.0, 20.0), TIGHT)
    want = np.array([np.cos(20.0), -np.sin(20.0)])
    np.testing.assert_allclose(traj.y_end, want, atol=1e-8)
    assert traj.nsteps > 0 and traj.nfev > traj.nsteps
    assert np.all(np.diff(traj.t) > 0)
    assert np.all(np.diff(traj.t) <= TIGHT.max_step + 1e-12)


def test_linear_system_matches_matrix_exponential():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(3, 3)) * 0.8
    y0 = rng.normal(size=3)
    traj = integrate(_linear_field(A), y0, (0.0, 2.0), TIGHT)
    np.testing.assert_allclose(traj.y_end, expm(2.0 * A) @ y0,
                               rtol=1e-7, atol=1e-9)


def test_dense_output_tracks_the_flow():
    traj = integrate(_harmonic(), [1.0, 0.0], (0.0, 12.0), TIGHT, dense=True)
    assert traj.has_dense
    tq = np.linspace(0.0, 12.0, 257)
    vals = traj.eval(tq)
    np.testing.assert_allclose(vals[:, 0], np.cos(tq), atol=1e-8)
    np.testing.assert_allclose(vals[:, 1], -np.sin(tq), atol=1e-8)
    # scalar query and component helper agree
    assert traj.eval(1.3)[0] == pytest.approx(np.cos(1.3), abs=1e-8)
    assert traj.eval_component([1.3], 1)[0] == pytest.approx(-np.sin(1.3),
                                                             abs=1e-8)
    with pytest.raises(ConfigInvalid):
        traj.eval(12.5)


# ---------------------------------------------------------------------------
# event location
# ---------------------------------------------------------------------------

def test_plane_event_times_on_harmonic():
    # x(t) = cos t falls through 0 at pi/2 + 2 pi k, rises at 3 pi/2 + 2 pi k
    traj = integrate(_harmonic(), [1.0, 0.0], (0.0, 25.0), TIGHT,
                     events=[plane(0, 0.0, direction=-1, label="down"),
                             plane(0, 0.0, direction=+1, label="up")])
    down = np.array([e.t for e in traj.events_for("down")])
    up = np.array([e.t for e in traj.events_for("up")])
    np.testing.assert_allclose(down, np.pi / 2 + 2 * np.pi * np.arange(4),
                               atol=1e-9)
    np.testing.assert_allclose(up, 3 * np.pi / 2 + 2 * np.pi * np.arange(4),
                               atol=1e-9)
    # undirected spec sees the union
    both = integrate(_harmonic(), [1.0, 0.0], (0.0, 25.0), TIGHT,
                     events=[plane(0, 0.0)])
    assert len(both.events) == len(down) + len(up)
    ts = [e.t for e in both.events]
    assert ts == sorted(ts)


def test_event_state_lies_on_the_plane():
    c = default_pair(0.1)
    traj = integrate(field_coupled(c), [-60.0, 0.1, -55.0, 0.05],
                     (0.0, 200.0), TIGHT, events=[plane(0, -20.0, direction=1)])
    assert len(traj.events) > 5
    for e in traj.events:
        assert e.y[0] == pytest.approx(-20.0, abs=1e-7)


def test_terminal_event_truncates():
    one = integrate(_harmonic(), [1.0, 0.0], (0.0, 50.0), TIGHT,
                    events=[plane(0, 0.0, direction=-1, terminal=True)])
    assert one.t_end == pytest.approx(np.pi / 2, abs=1e-9)
    assert len(one.events) == 1
    third = integrate(_harmonic(), [1.0, 0.0], (0.0, 50.0), TIGHT,
                      events=[plane(0, 0.0, direction=-1, terminal=3)])
    assert third.t_end == pytest.approx(np.pi / 2 + 4 * np.pi, abs=1e-9)
    assert len(third.events) == 3


def test_callable_event_matches_plane_event():
    spec_g = EventSpec(g=lambda y: y[0], direction=-1, label="root")
    traj = integrate(_harmonic(), [1.0, 0.0], (0.0, 25.0), TIGHT,
                     events=[spec_g])
    got = np.array([e.t for e in traj.events])
    np.testing.assert_allclose(got, np.pi / 2 + 2 * np.pi * np.arange(4),
                               atol=1e-8)


def test_event_spec_validation():
    with pytest.raises(ConfigInvalid):
        EventSpec()  # neither component nor g
    with pytest.raises(ConfigInvalid):
        EventSpec(component=0, g=lambda y: y[0])
    with pytest.raises(ConfigInvalid):
        EventSpec(component=0, direction=2)
    with pytest.raises(ConfigInvalid):
        integrate(_harmonic(), [1.0, 0.0], (0.0, 1.0), TIGHT,
                  events=[plane(0, 0.0, terminal=True),
                          plane(1, 0.0, terminal=True)])
    with pytest.raises(ConfigInvalid):
        integrate(_harmonic(), [1.0, 0.0], (0.0, 1.0), TIGHT,
                  events=[plane(7, 0.0)])


# ---------------------------------------------------------------------------
# validation and failure modes
# ---------------------------------------------------------------------------

def test_integrate_rejects_bad_spans_and_states():
    fld = _harmonic()
    with pytest.raises(ConfigInvalid):
        integrate(fld, [1.0, 0.0], (1.0, 0.0), TIGHT)
    with pytest.raises(ConfigInvalid):
        integrate(fld, [1.0], (0.0, 1.0), TIGHT)
    with pytest.raises(ConfigInvalid):
        integrate(fld, [np.nan, 0.0], (0.0, 1.0), TIGHT)
    with pytest.raises(MaxTimeExceeded):
        integrate(fld, [1.0, 0.0], (0.0, 10.0),
                  IntegratorConfig(max_time=5.0))


def test_zero_length_span_is_a_no_op():
    traj = integrate(_harmonic(), [0.3, -0.4], (2.0, 2.0), TIGHT)
    assert traj.t_end == 2.0
    np.testing.assert_array_equal(traj.y_end, [0.3, -0.4])


# ---------------------------------------------------------------------------
# variational flow
# ---------------------------------------------------------------------------

def test_variational_matrix_matches_expm():
    A = np.array([[0.0, 1.0], [-2.0, -0.3]])

    def f(t, y, p, out):
        out[0] = p[0] * y[0] + p[1] * y[1]
        out[1] = p[2] * y[0] + p[3] * y[1]

    def jac(t, y, p, out):
        out[0, 0] = p[0]
        out[0, 1] = p[1]
        out[1, 0] = p[2]
        out[1, 1] = p[3]

    fld = make_variational_field(f, jac, A.ravel().copy(), 2)
    traj, phi, quad = integrate_with_variational(fld, [0.7, -0.1], (0.0, 3.0),
                                                 TIGHT)
    np.testing.assert_allclose(phi, expm(3.0 * A), rtol=1e-7, atol=1e-9)
    # the quadrature accumulates trace(A) * t for a constant matrix
    assert quad == pytest.approx(np.trace(A) * 3.0, abs=1e-9)
    assert np.linalg.det(phi) == pytest.approx(np.exp(quad), rel=1e-8)
    np.testing.assert_allclose(traj.y_end, expm(3.0 * A) @ [0.7, -0.1],
                               rtol=1e-7, atol=1e-9)


def test_determinant_identity_on_neuron_field():
    # det of the fundamental matrix must equal exp of the divergence
    # integral along any trajectory, not just linear ones. The window is
    # kept short: this field contracts volume near e^-3 per ms, and past
    # det ~ 1e-12 the 4x4 determinant is all cancellation noise.
    c = default_pair(0.086)
    fld = field_coupled_var(c)
    traj, phi, quad = integrate_with_variational(
        fld, [-55.0, 0.05, -50.0, 0.1], (0.0, 6.0), TIGHT)
    det = np.linalg.det(phi)
    assert det > 0
    assert np.log(det) == pytest.approx(quad, abs=1e-6)


def test_variational_field_shape_is_checked():
    c = default_pair(0.1)
    with pytest.raises(ConfigInvalid):
        integrate_with_variational(field_coupled(c), [0.0, 0.0, 0.0, 0.0],
                                   (0.0, 1.0), TIGHT)


# ---------------------------------------------------------------------------
# crossing collection
# ---------------------------------------------------------------------------

def test_collect_crossings_skips_transient():
    times, states, last = collect_crossings(
        _harmonic(), np.array([1.0, 0.0]), plane(0, 0.0, direction=-1),
        n_crossings=3, config=TIGHT, transient=2, t_max=60.0)
    want = np.pi / 2 + 2 * np.pi * np.array([2.0, 3.0, 4.0])
    np.testing.assert_allclose(times, want, atol=1e-9)
    assert states.shape == (3, 2)
    assert last.shape == (2,)


def test_collect_crossings_raises_no_recurrence():
    p = integrator_neuron(0.0)  # rests near -70 mV, never spikes
    with pytest.raises(NoRecurrence):
        collect_crossings(field_single(p), np.array([-65.0, 0.1]),
                          plane(0, 0.0, direction=1), n_crossings=2,
                          config=TIGHT, t_max=100.0)


# ---------------------------------------------------------------------------
# CSV output and kernel-path parity
# ---------------------------------------------------------------------------

def test_trajectory_csv_round_trip(tmp_path):
    c = default_pair(0.2)
    traj = integrate(field_coupled(c), [-60.0, 0.1, -55.0, 0.05],
                     (0.0, 20.0), TIGHT)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "t,V1,n1,V2,n2"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_allclose(data[:, 0], traj.t, rtol=1e-11)
    np.testing.assert_allclose(data[:, 1:], traj.y, rtol=1e-11, atol=1e-11)


PARITY_SNIPPET = """
import numpy as np
from nakduo import kernels
from nakduo.ode import field_coupled, integrate
from nakduo.params import IntegratorConfig, default_pair
cfg = IntegratorConfig(rtol=1e-10, atol=1e-12)
c = default_pair(0.086)
traj = integrate(field_coupled(c), np.array([-55.0, 0.05, -50.0, 0.1]),
                 (0.0, 100.0), cfg)
print(int(kernels.NUMBA_ENABLED))
print(" ".join(repr(float(v)) for v in traj.y_end))
"""


def _run_parity(no_numba):
    env = dict(os.environ)
    if no_numba:
        env["NAKDUO_NO_NUMBA"] = "1"
    else:
        env.pop("NAKDUO_NO_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", PARITY_SNIPPET], env=env,
                         capture_output=True, text=True, check=True)
    lines = out.stdout.strip().splitlines()
    return int(lines[0]), np.array([float(v) for v in lines[1].split()])


def test_pure_numpy_fallback_matches_compiled_path():
    flag_np, y_np = _run_parity(no_numba=True)
    assert flag_np == 0
    flag_nb, y_nb = _run_parity(no_numba=False)
    # same algorithm either way; when numba is importable the flag is on
    np.testing.assert_allclose(y_np, y_nb, rtol=1e-9, atol=1e-9)

"""Vector-field correctness: gating curve, hand checks, Jacobians, JSON."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nakduo.errors import ConfigInvalid
from nakduo.model import (gating_inf, jacobian_coupled, jacobian_single,
                          resting_state, resting_state_coupled, rhs_coupled,
                          rhs_single)
from nakduo.params import (CoupledSystem, IntegratorConfig, NeuronParams,
                           default_pair, dump_coupled, integrator_neuron,
                           load_coupled, resonator_neuron)


# ---------------------------------------------------------------------------
# gating curve
# ---------------------------------------------------------------------------

def test_gating_midpoint_and_unit_slope_points():
    assert gating_inf(-30.0, -30.0, 7.0) == pytest.approx(0.5, abs=1e-15)
    # one slope above/below the midpoint: logistic of +-1
    lo = 1.0 / (1.0 + math.exp(1.0))
    hi = 1.0 / (1.0 + math.exp(-1.0))
    assert gating_inf(-23.0, -30.0, 7.0) == pytest.approx(hi, abs=1e-15)
    assert gating_inf(-37.0, -30.0, 7.0) == pytest.approx(lo, abs=1e-15)


def test_gating_matches_logistic_formula_on_grid():
    V = np.linspace(-120.0, 40.0, 401)
    want = 1.0 / (1.0 + np.exp((-45.0 - V) / 5.0))
    got = gating_inf(V, -45.0, 5.0)
    np.testing.assert_allclose(got, want, rtol=1e-14, atol=1e-300)


@given(half=st.floats(-80.0, -10.0), slope=st.floats(1.0, 20.0),
       x=st.floats(0.0, 100.0))
@settings(max_examples=200, deadline=None)
def test_gating_symmetry_property(half, slope, x):
    # the logistic is odd about its midpoint
    s = gating_inf(half + x, half, slope) + gating_inf(half - x, half, slope)
    assert s == pytest.approx(1.0, abs=1e-12)


@given(half=st.floats(-80.0, -10.0), slope=st.floats(1.0, 20.0),
       v=st.floats(-150.0, 80.0))
@settings(max_examples=200, deadline=None)
def test_gating_bounded_and_monotone(half, slope, v):
    a = gating_inf(v, half, slope)
    b = gating_inf(v + 0.5, half, slope)
    assert 0.0 < a <= 1.0
    assert b >= a
    if abs(v - half) < 20.0 * slope:
        assert b > a


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------

def test_rhs_exact_at_gating_midpoint():
    # at V = -30 both activations sit at 1/2 and every term is a round
    # number: dV = -48 + 180 - 120 = 12, dn = 0
    p = integrator_neuron(I=0.0)
    dv, dn = rhs_single(p, [-30.0, 0.5])
    assert dv == pytest.approx(12.0, abs=1e-12)
    assert dn == pytest.approx(0.0, abs=1e-15)
    dv5, _ = rhs_single(p.with_current(5.0), [-30.0, 0.5])
    assert dv5 == pytest.approx(17.0, abs=1e-12)


def _rhs_reference(p, V, n):
    """Straight-line reimplementation of the membrane equation."""
    m = 1.0 / (1.0 + math.exp((p.m_half - V) / p.k_m))
    ninf = 1.0 / (1.0 + math.exp((p.n_half - V) / p.k_n))
    dv = (p.I - p.g_L * (V - p.E_L) - p.g_Na * m * (V - p.E_Na)
          - p.g_K * n * (V - p.E_K)) / p.C
    return np.array([dv, (ninf - n) / p.tau])


def test_rhs_single_matches_reference_on_random_states():
    rng = np.random.default_rng(7)
    for p in (integrator_neuron(12.95), resonator_neuron(51.2),
              NeuronParams(C=2.0, tau=0.3, I=-4.0)):
        for _ in range(50):
            V = rng.uniform(-90.0, 20.0)
            n = rng.uniform(0.0, 1.0)
            np.testing.assert_allclose(rhs_single(p, [V, n]),
                                       _rhs_reference(p, V, n),
                                       rtol=1e-12, atol=1e-12)


def test_coupled_decouples_at_zero_coupling():
    c = default_pair(0.0, q1=0.0)
    rng = np.random.default_rng(3)
    for _ in range(20):
        s = np.concatenate([rng.uniform([-90, 0], [20, 1]),
                            rng.uniform([-90, 0], [20, 1])])
        full = rhs_coupled(c, s)
        np.testing.assert_allclose(full[:2], rhs_single(c.neuron1, s[:2]),
                                   rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(full[2:], rhs_single(c.neuron2, s[2:]),
                                   rtol=1e-13, atol=1e-13)


def test_coupling_terms_enter_voltage_rows_only():
    base = default_pair(0.0, q1=0.0)
    c = CoupledSystem(neuron1=base.neuron1, neuron2=base.neuron2,
                      q1=0.07, q2=0.19)
    s = np.array([-52.0, 0.31, -44.0, 0.08])
    extra = rhs_coupled(c, s) - rhs_coupled(base, s)
    want = np.array([0.07 * (s[2] - s[0]), 0.0, 0.19 * (s[0] - s[2]), 0.0])
    np.testing.assert_allclose(extra, want, rtol=1e-12, atol=1e-12)


def test_gap_junction_current_is_conservative():
    # equal conductances: whatever charge leaves one cell enters the other
    c = default_pair(0.11, q1=0.11)
    s = np.array([-60.0, 0.2, -35.0, 0.6])
    d = rhs_coupled(c, s)
    d1 = rhs_single(c.neuron1, s[:2])
    d2 = rhs_single(c.neuron2, s[2:])
    assert (d[0] - d1[0]) + (d[2] - d2[0]) == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# Jacobians against central differences
# ---------------------------------------------------------------------------

def _fd_jacobian(fun, y, h=1e-5):
    y = np.asarray(y, dtype=float)
    cols = []
    for k in range(len(y)):
        e = np.zeros_like(y)
        e[k] = h
        cols.append((fun(y + e) - fun(y - e)) / (2.0 * h))
    return np.column_stack(cols)


def test_jacobian_single_matches_finite_differences():
    rng = np.random.default_rng(11)
    p = resonator_neuron(51.2)
    for _ in range(100):
        y = np.array([rng.uniform(-90.0, 20.0), rng.uniform(0.0, 1.0)])
        J = jacobian_single(p, y)
        Jfd = _fd_jacobian(lambda s: rhs_single(p, s), y)
        np.testing.assert_allclose(J, Jfd, rtol=1e-6, atol=1e-6)


def test_jacobian_coupled_matches_finite_differences():
    rng = np.random.default_rng(13)
    for _ in range(100):
        c = default_pair(rng.uniform(0.0, 0.5), q1=rng.uniform(0.0, 0.5))
        y = np.array([rng.uniform(-90.0, 20.0), rng.uniform(0.0, 1.0),
                      rng.uniform(-90.0, 20.0), rng.uniform(0.0, 1.0)])
        J = jacobian_coupled(c, y)
        Jfd = _fd_jacobian(lambda s: rhs_coupled(c, s), y)
        np.testing.assert_allclose(J, Jfd, rtol=1e-6, atol=1e-6)


def test_coupled_jacobian_off_blocks_are_the_couplings():
    c = default_pair(0.23, q1=0.09)
    J = jacobian_coupled(c, [-50.0, 0.4, -60.0, 0.1])
    assert J[0, 2] == pytest.approx(0.09, abs=1e-12)
    assert J[2, 0] == pytest.approx(0.23, abs=1e-12)
    assert J[0, 3] == J[1, 2] == J[1, 3] == 0.0
    assert J[2, 1] == J[3, 0] == J[3, 1] == 0.0


# ---------------------------------------------------------------------------
# start states
# ---------------------------------------------------------------------------

def test_resting_state_zeroes_the_gate_equation():
    p = resonator_neuron(10.0)
    s = resting_state(p, V=-58.0)
    assert rhs_single(p, s)[1] == pytest.approx(0.0, abs=1e-14)
    s4 = resting_state_coupled(default_pair(0.1), V1=-70.0, V2=-50.0)
    assert s4.shape == (4,)
    assert s4[0] == -70.0 and s4[2] == -50.0


# ---------------------------------------------------------------------------
# parameter objects and JSON I/O
# ---------------------------------------------------------------------------

def test_parameter_validation_rejects_bad_values():
    with pytest.raises(ConfigInvalid):
        NeuronParams(tau=0.0)
    with pytest.raises(ConfigInvalid):
        NeuronParams(k_m=-1.0)
    with pytest.raises(ConfigInvalid):
        NeuronParams(E_K=-60.0, E_L=-78.0)  # violates E_K < E_L
    with pytest.raises(ConfigInvalid):
        CoupledSystem(integrator_neuron(), resonator_neuron(), q1=-0.1)
    with pytest.raises(ConfigInvalid):
        IntegratorConfig(rtol=0.0)


def test_json_round_trip_is_exact(tmp_path):
    c = default_pair(0.08616, I1=12.95, I2=51.2, q1=0.05)
    path = tmp_path / "params.json"
    path.write_text(dump_coupled(c))
    back = load_coupled(str(path))
    assert back == c
    # dict input takes the same path
    assert load_coupled(json.loads(dump_coupled(c))) == c


def test_load_coupled_rejects_unknown_fields(tmp_path):
    with pytest.raises(ConfigInvalid):
        load_coupled({"neuron3": {}})
    with pytest.raises(ConfigInvalid):
        load_coupled({"neuron1": {"gNa": 4.0}})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigInvalid):
        load_coupled(str(bad))


def test_load_coupled_current_overrides():
    c = load_coupled({"I1": 13.0, "I2": 50.0, "q2": 0.2})
    assert c.neuron1.I == 13.0 and c.neuron2.I == 50.0 and c.q2 == 0.2
    # neuron-level current survives unless a top-level override appears
    c2 = load_coupled({"neuron1": {"I": 9.5}})
    assert c2.neuron1.I == 9.5


def test_default_pair_uses_calibrated_drives():
    c = default_pair(0.0)
    assert c.neuron1.I == pytest.approx(12.95)
    assert c.neuron2.I == pytest.approx(51.20)
    assert c.neuron1.tau == 1.0 and c.neuron2.tau == pytest.approx(0.9)
    assert c.neuron1.n_half == -30.0 and c.neuron2.n_half == -45.0

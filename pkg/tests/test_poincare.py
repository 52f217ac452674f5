"""Rotation numbers and curve diagnostics on orbits with known answers.

Synthetic section orbits are rigid rotations placed on an ellipse in the
(V1, n1) plane of a 4-state layout: rotation by p/q must come back locked
with exactly that ratio, an irrational rotation must classify as
quasiperiodic with the rotation number right to the sampling bound 2/N,
and scattered or kinked point sets must trip the curve diagnostics.
"""

import numpy as np
import pytest

from nakduo.errors import ConfigInvalid, CurveFitFailed
from nakduo.ode import plane
from nakduo.poincare import (QUASIPERIODIC, RATIONAL_LOCKED, OrbitDiagram,
                             SectionOrbit, orbit_diagram, rotation_number,
                             section_orbit, torus_smoothness)

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _rigid_orbit(rho, n=1000, r_fn=None, rng=None, theta0=0.123):
    theta = theta0 + 2.0 * np.pi * rho * np.arange(n)
    r = np.ones(n) if r_fn is None else np.asarray(r_fn(theta), dtype=float)
    if rng is not None:
        theta = rng.uniform(0.0, 2.0 * np.pi, n)
        r = rng.uniform(0.7, 1.3, n)
    states = np.zeros((n, 4))
    states[:, 0] = -50.0 + 8.0 * r * np.cos(theta)
    states[:, 1] = 0.30 + 0.05 * r * np.sin(theta)
    states[:, 2] = -50.0
    states[:, 3] = 0.40
    return SectionOrbit(states=states, times=np.arange(n, dtype=float),
                        section=plane(2, -50.0, direction=1),
                        columns=("V1", "n1", "V2", "n2"))


# ---------------------------------------------------------------------------
# rotation classification on rigid rotations
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("p,q", [(1, 2), (3, 7), (2, 5), (5, 13)])
def test_rational_rotation_locks_with_exact_ratio(p, q):
    est = rotation_number(_rigid_orbit(p / q))
    assert est.classification == RATIONAL_LOCKED
    assert est.locked
    assert est.locked_ratio == (p, q)
    assert est.rho == pytest.approx(p / q, abs=1e-12)


def test_locked_orbit_is_q_periodic_within_tolerance():
    orbit = _rigid_orbit(3 / 7)
    est = rotation_number(orbit)
    q = est.locked_ratio[1]
    assert q <= 64
    pts = orbit.planar()
    gap = np.linalg.norm(pts[q:] - pts[:-q], axis=1).max()
    diam = np.linalg.norm(pts.max(0) - pts.min(0))
    assert gap <= 1e-5 * diam


def test_golden_mean_rotation_is_quasiperiodic():
    # the positive-advance convention reports the mirror value 1 - g
    n = 2000
    est = rotation_number(_rigid_orbit(GOLDEN, n=n))
    assert est.classification == QUASIPERIODIC
    assert not est.locked
    assert est.locked_ratio is None
    assert abs(est.rho - (1.0 - GOLDEN)) <= 2.0 / n
    assert est.confidence < 1e-3


def test_mirror_rotations_report_the_same_ratio():
    # stepping +5/7 of a turn visits the same points as stepping -2/7,
    # so both constructions must land on the oriented ratio (2, 7)
    a = rotation_number(_rigid_orbit(5 / 7))
    b = rotation_number(_rigid_orbit(2 / 7))
    assert a.locked_ratio == b.locked_ratio == (2, 7)
    assert a.rho == b.rho


def test_rotation_number_invariant_to_starting_crossing():
    n = 1500
    a = rotation_number(_rigid_orbit(GOLDEN, n=n, theta0=0.0))
    b = rotation_number(_rigid_orbit(GOLDEN, n=n, theta0=2.9))
    assert abs(a.rho - b.rho) <= 2.0 / n
    assert a.classification == b.classification == QUASIPERIODIC


def test_high_denominator_lock_defers_to_curve():
    # 1/100 exceeds the denominator cap of 64, so the locked test cannot
    # claim it; the points still fill a curve and the mean advance wins
    n = 2000
    est = rotation_number(_rigid_orbit(1.0 / 100.0, n=n))
    assert est.classification == QUASIPERIODIC
    assert abs(est.rho - 0.01) <= 2.0 / n


def test_rotation_number_needs_enough_crossings():
    with pytest.raises(ConfigInvalid):
        rotation_number(_rigid_orbit(GOLDEN, n=300))


def test_scattered_cloud_fails_the_curve_fit():
    # dense scatter can pass the radial-dispersion test, but its mean
    # advance is a random walk and the half-window estimates disagree
    rng = np.random.default_rng(42)
    with pytest.raises(CurveFitFailed, match="stabilize"):
        rotation_number(_rigid_orbit(GOLDEN, n=510, rng=rng))


def test_sparse_clusters_fail_the_coverage_check():
    # a lock with q beyond the revisit cap leaves most angular bins
    # empty once radial jitter breaks the exact-revisit test
    jitter = 0.02 * np.random.default_rng(7).standard_normal(800)
    clustered = _rigid_orbit(1.0 / 10.0, n=800, r_fn=None)
    bumpy = _rigid_orbit(1.0 / 10.0, n=800,
                         r_fn=lambda th: 1.0 + jitter)
    with pytest.raises(CurveFitFailed, match="cover"):
        rotation_number(bumpy)
    assert rotation_number(clustered).locked_ratio == (1, 10)


# ---------------------------------------------------------------------------
# smoothness scoring
# ---------------------------------------------------------------------------

def test_smooth_circle_scores_low():
    score, flagged = torus_smoothness(_rigid_orbit(GOLDEN, n=1200))
    assert score < 10.0
    assert not flagged


def test_kinked_curve_is_flagged():
    # |sin| folds put 36 corners on the curve, enough that the
    # 95th-percentile turning angle sits inside the corner population
    kinked = _rigid_orbit(GOLDEN, n=600,
                          r_fn=lambda th: 1.0 + 0.35 * np.abs(np.sin(18.0 * th)))
    score, flagged = torus_smoothness(kinked)
    assert score > 30.0
    assert flagged


def test_smoothness_threshold_is_adjustable():
    smooth = _rigid_orbit(GOLDEN, n=1200)
    score, flagged = torus_smoothness(smooth, threshold_deg=0.1)
    assert flagged and score > 0.1


# ---------------------------------------------------------------------------
# the real torus at weak coupling
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def torus_orbit(torus_state, section_v2, tight):
    c, y = torus_state
    return section_orbit(c, y, section_v2, 620, transient=200, config=tight)


def test_section_orbit_lies_on_the_section(torus_orbit, section_v2):
    assert len(torus_orbit) == 620
    np.testing.assert_allclose(torus_orbit.states[:, 2], -50.0, atol=1e-7)
    assert torus_orbit.planar().shape == (620, 3)
    assert np.all(np.diff(torus_orbit.times) > 0)


def test_weakly_coupled_attractor_is_a_smooth_torus(torus_orbit):
    est = rotation_number(torus_orbit)
    assert est.classification == QUASIPERIODIC
    assert 0.0 < est.rho < 1.0
    score, flagged = torus_smoothness(torus_orbit)
    assert not flagged
    assert score < 15.0


# ---------------------------------------------------------------------------
# parameter sweeps
# ---------------------------------------------------------------------------

def test_orbit_diagram_policies_and_shape(tight):
    from nakduo.params import default_pair
    c = default_pair(0.35)
    sec = plane(2, -41.5, direction=1)
    y0 = np.array([-20.0, 0.3, -20.0, 0.4])
    for policy in ("warm", "cold"):
        diag = orbit_diagram(c, (0.35, 0.351), 2, sec, observable="V1",
                             y0=y0, n_crossings=25, transient=60,
                             policy=policy, config=tight)
        assert isinstance(diag, OrbitDiagram)
        assert diag.observable == "V1"
        assert diag.failures == {}
        assert len(diag.values) == 2
        assert all(len(v) == 25 for v in diag.values)
        np.testing.assert_allclose(diag.q2, [0.35, 0.351])
        # the synchronous cycle pins the observable to a narrow band
        for v in diag.values:
            assert np.ptp(v) < 25.0


def test_orbit_diagram_records_failures(tight):
    # V2 never drops below the potassium reversal, so a section down
    # there is never crossed and every sweep point lands in failures
    from nakduo.params import default_pair
    c = default_pair(0.15)
    sec = plane(2, -120.0, direction=1)
    y0 = np.array([-20.0, 0.3, -55.0, 0.03])
    diag = orbit_diagram(c, (0.15, 0.155), 2, sec, observable="V2", y0=y0,
                         n_crossings=10, transient=5, policy="cold",
                         config=tight, t_max=800.0)
    assert set(diag.failures) == {0, 1}
    assert all(len(v) == 0 for v in diag.values)


def test_orbit_diagram_validation(tight):
    from nakduo.params import default_pair
    c = default_pair(0.35)
    sec = plane(2, -41.5, direction=1)
    with pytest.raises(ConfigInvalid):
        orbit_diagram(c, (0.3, 0.31), 1, sec)
    with pytest.raises(ConfigInvalid):
        orbit_diagram(c, (0.3, 0.31), 2, sec, policy="tepid")
    with pytest.raises(ConfigInvalid):
        orbit_diagram(c, (0.3, 0.31), 2, sec, observable="V9")

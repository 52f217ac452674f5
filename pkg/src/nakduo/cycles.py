"""Limit cycles of the coupled pair: shooting, Floquet analysis,
continuation in q2, and detection of cycle bifurcations.

Cycles are anchored on a hyperplane section and located as fixed points
of the m-th return map, where m is the number of same-direction section
crossings per period (detected from recurrence of the seed trajectory).
The return-map Jacobian comes from the variational flow, so Newton steps,
Floquet multipliers, and bifurcation test functions all share one
monodromy computation.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import (
    BranchLost, ConfigInvalid, Inconclusive, NewtonDiverged,
    NoRecurrence, StepSizeUnderflow,
)
from .ode import (
    EventSpec, Field, IntegratorConfig, collect_crossings, field_coupled,
    field_coupled_var, integrate, integrate_with_variational, plane,
)
from .params import CoupledSystem

STABLE = "Stable"
SADDLE = "Saddle"
UNSTABLE = "Unstable"

FOLD_OF_CYCLES = "FoldOfCycles"
PERIOD_DOUBLING = "PeriodDoubling"
NEIMARK_SACKER = "NeimarkSacker"
HOMOCLINIC_SNPO = "HomoclinicToSaddleNodeCycle"

# voltage components are O(100) mV while gating variables are O(1);
# this weight makes mixed-state norms meaningful
_STATE_WEIGHT = {"v": 1.0, "n": 100.0}


def _weights(columns):
    return np.array([_STATE_WEIGHT.get(c[0].lower(), 1.0) if c else 1.0
                     for c in columns])


@dataclass(frozen=True)
class LimitCycle:
    anchor: np.ndarray
    T: float
    multipliers: np.ndarray
    stability: str
    section: EventSpec
    returns: int
    col_max: np.ndarray
    col_min: np.ndarray
    residual: float

    @property
    def period(self) -> float:
        return self.T


@dataclass(frozen=True)
class CycleBifurcation:
    q2: float
    kind: str
    cycle: LimitCycle
    details: Optional[dict] = None


@dataclass
class CycleBranch:
    q2: np.ndarray
    cycles: List[LimitCycle]
    points: List[CycleBifurcation]
    last_good: Optional[float] = None


def _classify_multipliers(mults):
    idx = int(np.argmin(np.abs(mults - 1.0)))
    rest = np.abs(np.delete(mults, idx))
    outside = int(np.sum(rest > 1.0))
    if outside == 0:
        return STABLE
    if outside == len(rest):
        return UNSTABLE
    return SADDLE


class _Shooter:
    """Newton shooting on the m-th return map of a hyperplane section."""

    def __init__(self, fld: Field, fld_var: Field, section: EventSpec,
                 returns: int, config: IntegratorConfig):
        if section.component is None:
            raise ConfigInvalid("shooting needs a hyperplane section")
        self.fld = fld
        self.var = fld_var
        self.section = section
        self.k = section.component
        self.v = section.value
        self.m = int(returns)
        self.config = config
        self.dim = fld.dim if fld.base_dim is None else fld.base_dim
        self.free = [i for i in range(self.dim) if i != self.k]

    def return_point(self, x, t_cap):
        """m-th section return: (tau, state). Raises NoRecurrence."""
        spec = EventSpec(component=self.k, value=self.v,
                         direction=self.section.direction, terminal=self.m,
                         label="ret")
        traj = integrate(self.fld, x, (0.0, t_cap), self.config,
                         events=[spec], record=False)
        if len(traj.events) < self.m:
            raise NoRecurrence(
                f"{len(traj.events)} of {self.m} returns within {t_cap:g} ms")
        ev = traj.events[self.m - 1]
        return ev.t, ev.y

    def monodromy(self, x, tau):
        traj, phi, _ = integrate_with_variational(self.var, x, (0.0, tau),
                                                  self.config)
        f_end = np.empty(self.dim)
        self.fld.f(tau, traj.y_end, self.fld.p, f_end)
        return phi, f_end, traj.y_end

    def map_jacobian(self, phi, f_end):
        """Return-map derivative: project the monodromy onto the section."""
        fk = f_end[self.k]
        if abs(fk) < 1e-14:
            raise NewtonDiverged("flow tangent to the section at return")
        proj = np.eye(self.dim) - np.outer(f_end, np.eye(self.dim)[self.k]) / fk
        dp_full = proj @ phi
        return dp_full[np.ix_(self.free, self.free)]

    def embed(self, xr):
        x = np.empty(self.dim)
        x[self.k] = self.v
        x[self.free] = xr
        return x

    def newton(self, x0, T0, tol=1e-10, max_iter=25):
        """Solve P_m(x) = x on the section; returns (x, tau, phi, f_end)."""
        x = x0.copy()
        x[self.k] = self.v
        t_cap = max(20.0 * T0, T0 + 100.0)
        last = None
        for _ in range(max_iter):
            tau, x_ret = self.return_point(x, t_cap)
            r_full = x_ret - x
            res = np.linalg.norm(r_full)
            phi, f_end, _ = self.monodromy(x, tau)
            last = (x, tau, phi, f_end, res)
            if res <= tol:
                return x, tau, phi, f_end, res
            dp = self.map_jacobian(phi, f_end)
            rhs = -r_full[self.free]
            try:
                cond = np.linalg.cond(dp - np.eye(self.dim - 1))
                delta = np.linalg.solve(dp - np.eye(self.dim - 1), rhs)
            except np.linalg.LinAlgError as exc:
                raise NewtonDiverged("singular return-map system") from exc
            if cond > 1e8:
                raise _IllConditioned(last)
            lam = 1.0
            improved = False
            for _ in range(8):
                cand = self.embed(x[self.free] + lam * delta)
                try:
                    _, cand_ret = self.return_point(cand, t_cap)
                except NoRecurrence:
                    lam *= 0.5
                    continue
                if np.linalg.norm(cand_ret - cand) < res:
                    x = cand
                    improved = True
                    break
                lam *= 0.5
            if not improved:
                raise NewtonDiverged(
                    f"no residual decrease below {res:.3g}")
        raise NewtonDiverged(f"residual {last[4]:.3g} after {max_iter} steps")


class _IllConditioned(Exception):
    def __init__(self, last):
        self.last = last


def _multiple_shooting(shooter: _Shooter, x0, T0, segments=4, tol=1e-10,
                       max_iter=30):
    """Fallback for stiff cycles: match ``segments`` arcs plus a phase pin."""
    d = shooter.dim
    k, v = shooter.k, shooter.v
    cfg = shooter.config
    traj = integrate(shooter.fld, x0, (0.0, T0), cfg)
    nodes = [traj.eval(j * T0 / segments) for j in range(segments)]
    T = T0
    n_un = segments * d + 1
    for _ in range(max_iter):
        F = np.zeros(n_un)
        J = np.zeros((n_un, n_un))
        phis = []
        for j in range(segments):
            tr, phi, _ = integrate_with_variational(
                shooter.var, nodes[j], (0.0, T / segments), cfg)
            nxt = nodes[(j + 1) % segments]
            F[j * d:(j + 1) * d] = tr.y_end - nxt
            f_end = np.empty(d)
            shooter.fld.f(T / segments, tr.y_end, shooter.fld.p, f_end)
            J[j * d:(j + 1) * d, j * d:(j + 1) * d] = phi
            J[j * d:(j + 1) * d,
              ((j + 1) % segments) * d:((j + 1) % segments + 1) * d] \
                -= np.eye(d)
            J[j * d:(j + 1) * d, -1] = f_end / segments
            phis.append(phi)
        F[-1] = nodes[0][k] - v
        J[-1, k] = 1.0
        res = np.linalg.norm(F[:-1]) + abs(F[-1])
        if res <= tol:
            mono = np.eye(d)
            for phi in phis:
                mono = phi @ mono
            return nodes[0], T, mono, res
        try:
            delta = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise NewtonDiverged("singular multiple-shooting system") from exc
        for j in range(segments):
            nodes[j] = nodes[j] + delta[j * d:(j + 1) * d]
        T = T + delta[-1]
        if T <= 0:
            raise NewtonDiverged("period collapsed in multiple shooting")
    raise NewtonDiverged("multiple shooting did not converge")


def _detect_returns(fld: Field, seed, section: EventSpec,
                    config: IntegratorConfig, transient_crossings,
                    probe_crossings, t_max):
    """Recurrence order m and an anchor from the seed trajectory."""
    times, states, _ = collect_crossings(
        fld, seed, section, probe_crossings, config=config,
        transient=transient_crossings, t_max=t_max)
    w = _weights(fld.columns)
    tail = states[-1]
    scale = max(np.linalg.norm((states - states.mean(0)) * w, axis=1).max(),
                1e-9)
    ds = np.array([np.linalg.norm((states[-1 - m] - tail) * w)
                   for m in range(1, len(states) - 1)])
    # settled orbit: take the smallest order that lands back on the tail
    # point, so a superstable cycle is not inflated to a multiple cover
    # by noise-level distance fluctuations between its revisits
    same = np.nonzero(ds <= max(1e-4, 1e-4 * scale))[0]
    if len(same):
        best_m = int(same[0]) + 1
    else:
        best_m, best_d = None, np.inf
        for m in range(1, len(states) - 1):
            d = ds[m - 1]
            if d < best_d * 0.5 and d < 0.2 * scale:
                best_m, best_d = m, d
                if d < 1e-4 * scale:
                    break
        if best_m is None:
            best_m = 1
    idx = len(states) - 1
    T0 = times[idx] - times[idx - best_m]
    return best_m, states[idx], T0


def _cycle_extrema(fld: Field, anchor, T, config, samples=4000):
    traj = integrate(fld, anchor, (0.0, T), config, dense=True)
    tq = np.linspace(0.0, T, samples)
    vals = traj.eval(tq)
    return vals.max(axis=0), vals.min(axis=0)


def _build(c: Optional[CoupledSystem], fld, fld_var):
    if fld is not None and fld_var is not None:
        return fld, fld_var
    if c is None:
        raise ConfigInvalid("need a coupled system or explicit fields")
    return (fld or field_coupled(c)), (fld_var or field_coupled_var(c))


def find_limit_cycle(c: Optional[CoupledSystem], seed, section: EventSpec,
                     returns: Optional[int] = None, transient_crossings=60,
                     probe_crossings=80, t_max=60000.0,
                     config: IntegratorConfig = None,
                     fld: Field = None, fld_var: Field = None) -> LimitCycle:
    """Locate a limit cycle anchored on ``section`` near ``seed``.

    Settles the seed trajectory onto the section, infers the number of
    same-direction crossings per period from recurrence, then runs Newton
    on the shooting residual with the variational Jacobian. Saddle cycles
    need a close seed and ``returns`` given explicitly (their transients
    leave, so recurrence detection is skipped when ``returns`` is set with
    ``transient_crossings=0``).
    """
    fld, fld_var = _build(c, fld, fld_var)
    config = config or IntegratorConfig()
    shooter = _Shooter(fld, fld_var, section, returns or 1, config)
    if returns is None:
        m, anchor, T0 = _detect_returns(fld, seed, section, config,
                                        transient_crossings, probe_crossings,
                                        t_max)
        shooter.m = m
    else:
        # saddle cycles drift away from the seed, so anchor on the first
        # post-transient crossing rather than the last
        m = int(returns)
        times, states, _ = collect_crossings(
            fld, seed, section, m + 1, config=config,
            transient=transient_crossings, t_max=t_max)
        anchor, T0 = states[0], times[m] - times[0]
    try:
        x, tau, phi, f_end, res = shooter.newton(anchor, T0)
        mults = np.linalg.eigvals(phi)
    except _IllConditioned:
        x, tau, mono, res = _multiple_shooting(shooter, anchor, T0)
        mults = np.linalg.eigvals(mono)
    col_max, col_min = _cycle_extrema(fld, x, tau, config)
    return LimitCycle(anchor=x, T=float(tau), multipliers=mults,
                      stability=_classify_multipliers(mults),
                      section=section, returns=shooter.m,
                      col_max=col_max, col_min=col_min, residual=float(res))


def floquet_multipliers(c: Optional[CoupledSystem], cycle: LimitCycle,
                        config: IntegratorConfig = None,
                        fld_var: Field = None) -> np.ndarray:
    """Eigenvalues of the monodromy matrix over one period at the anchor."""
    if fld_var is None:
        fld_var = field_coupled_var(c)
    config = config or IntegratorConfig()
    _, phi, _ = integrate_with_variational(fld_var, cycle.anchor,
                                           (0.0, cycle.T), config)
    return np.linalg.eigvals(phi)


# ---------------------------------------------------------------------------
# continuation in q2
# ---------------------------------------------------------------------------

def _test_fold(mults, trivial_idx):
    rest = np.delete(mults, trivial_idx)
    return float(np.real(np.prod(rest - 1.0)))


def _test_pd(mults, trivial_idx):
    rest = np.delete(mults, trivial_idx)
    return float(np.real(np.prod(rest + 1.0)))


def _test_ns(mults, trivial_idx):
    rest = np.delete(mults, trivial_idx)
    pair = rest[np.abs(rest.imag) > 1e-7]
    if len(pair) < 2:
        return -1.0
    return float(np.max(np.abs(pair)) - 1.0)


def _trivial_index(mults):
    return int(np.argmin(np.abs(mults - 1.0)))


class _Family:
    """Shooting system with q2 appended as a continuation unknown."""

    def __init__(self, family: Callable[[float], Tuple[Field, Field]],
                 section: EventSpec, returns: int, config: IntegratorConfig):
        self.family = family
        self.section = section
        self.m = returns
        self.config = config
        self._cache = {}

    def shooter(self, q2) -> _Shooter:
        key = round(float(q2), 14)
        if key not in self._cache:
            fld, fld_var = self.family(float(q2))
            self._cache[key] = _Shooter(fld, fld_var, self.section, self.m,
                                        self.config)
            if len(self._cache) > 8:
                self._cache.pop(next(iter(self._cache)))
        return self._cache[key]

    def residual(self, u, T_hint):
        """u = (reduced state, q2) -> (residual on section, tau, phi, f_end)."""
        sh = self.shooter(u[-1])
        x = sh.embed(u[:-1])
        t_cap = max(20.0 * T_hint, T_hint + 200.0)
        tau, x_ret = sh.return_point(x, t_cap)
        r = (x_ret - x)[sh.free]
        return r, tau, sh, x

    def jacobian(self, u, tau, sh, x, dq=2e-6):
        phi, f_end, _ = sh.monodromy(x, tau)
        dp = sh.map_jacobian(phi, f_end)
        n = len(sh.free)
        jac = np.empty((n, n + 1))
        jac[:, :n] = dp - np.eye(n)
        t_cap = max(20.0 * tau, tau + 200.0)
        shp = self.shooter(u[-1] + dq)
        shm = self.shooter(u[-1] - dq)
        _, rp = shp.return_point(x, t_cap)
        _, rm = shm.return_point(x, t_cap)
        jac[:, n] = ((rp - rm)[sh.free]) / (2.0 * dq)
        return jac, phi, f_end


def _branch_tangent_cycle(fam, u, tau, prev=None):
    r, tau2, sh, x = fam.residual(u, tau)
    jac, phi, f_end = fam.jacobian(u, tau2, sh, x)
    _, _, vt = np.linalg.svd(jac)
    tan = vt[-1]
    if prev is not None and np.dot(tan, prev) < 0.0:
        tan = -tan
    elif prev is None and tan[-1] < 0.0:
        tan = -tan
    return tan, tau2, phi


def _corrector_cycle(fam, u_pred, tangent, T_hint, tol=1e-9, max_iter=10):
    u = u_pred.copy()
    tau = T_hint
    for _ in range(max_iter):
        try:
            r, tau, sh, x = fam.residual(u, tau)
        except NoRecurrence:
            return None
        g = np.dot(u - u_pred, tangent)
        if np.linalg.norm(r) <= tol and abs(g) <= tol:
            phi, f_end, _ = sh.monodromy(x, tau)
            return u, tau, phi
        jac, phi, f_end = fam.jacobian(u, tau, sh, x)
        full = np.vstack([jac, tangent])
        try:
            du = np.linalg.solve(full, -np.append(r, g))
        except np.linalg.LinAlgError:
            return None
        u = u + du
        if not np.all(np.isfinite(u)):
            return None
    return None


def _point_from(sh: _Shooter, fam: _Family, u, tau, phi, config):
    mults = np.linalg.eigvals(phi)
    x = sh.embed(u[:-1])
    fld, _ = fam.family(float(u[-1]))
    col_max, col_min = _cycle_extrema(fld, x, tau, config)
    r, _, _, _ = fam.residual(u, tau)
    return LimitCycle(anchor=x, T=float(tau), multipliers=mults,
                      stability=_classify_multipliers(mults),
                      section=fam.section, returns=fam.m,
                      col_max=col_max, col_min=col_min,
                      residual=float(np.linalg.norm(r)))


def _bisect_cycle_test(fam, u_a, u_b, tau_hint, test, tol_q=1e-5,
                       max_iter=60):
    """Bisect a multiplier test-function sign change along the chord."""
    r = fam.residual(u_a, tau_hint)
    jac_a = fam.jacobian(u_a, r[1], r[2], r[3])
    f_a = test(np.linalg.eigvals(jac_a[1]))
    tau = r[1]
    for _ in range(max_iter):
        if abs(u_a[-1] - u_b[-1]) <= tol_q \
                and np.linalg.norm(u_a - u_b) <= 1e-3:
            break
        chord = u_b - u_a
        nrm = np.linalg.norm(chord)
        if nrm < 1e-13:
            break
        mid = _corrector_cycle(fam, 0.5 * (u_a + u_b), chord / nrm, tau)
        if mid is None:
            break
        u_m, tau, phi = mid
        f_m = test(np.linalg.eigvals(phi))
        if f_a * f_m <= 0.0:
            u_b = u_m
        else:
            u_a, f_a = u_m, f_m
    return 0.5 * (u_a + u_b), tau


def _bisect_fold_turn(fam, u_a, u_b, tan_a, tau_hint, tol_q=1e-5,
                      max_iter=60):
    """Bisect the sign change of the tangent q2-component (branch fold)."""
    f_a = tan_a[-1]
    tau = tau_hint
    prev = tan_a
    for _ in range(max_iter):
        if np.linalg.norm(u_a - u_b) <= 1e-4:
            break
        chord = u_b - u_a
        nrm = np.linalg.norm(chord)
        if nrm < 1e-13:
            break
        mid = _corrector_cycle(fam, 0.5 * (u_a + u_b), chord / nrm, tau)
        if mid is None:
            break
        u_m, tau, phi = mid
        tan_m, tau, phi = _branch_tangent_cycle(fam, u_m, tau, prev)
        if f_a * tan_m[-1] <= 0.0:
            u_b = u_m
        else:
            u_a, f_a, prev = u_m, tan_m[-1], tan_m
    return 0.5 * (u_a + u_b), tau


def continue_cycle(c: Optional[CoupledSystem], cycle: LimitCycle,
                   q2_range: Tuple[float, float], ds=0.002, max_points=4000,
                   config: IntegratorConfig = None,
                   family: Callable[[float], Tuple[Field, Field]] = None,
                   q2_start: Optional[float] = None) -> CycleBranch:
    """Pseudo-arclength continuation of a cycle branch in q2.

    Follows the branch from ``q2_start`` (default c.q2) across q2_range,
    through folds, flagging FoldOfCycles at branch turning points and
    PeriodDoubling / NeimarkSacker where the multiplier test functions
    change sign, each bisection-refined to |dq2| <= 1e-5. Raises
    BranchLost (with last_good) if the corrector fails before the range
    is covered.
    """
    config = config or IntegratorConfig()
    if family is None:
        if c is None:
            raise ConfigInvalid("need a coupled system or a field family")
        base = c

        def family(q2):
            sys_q = base.with_q2(q2)
            return field_coupled(sys_q), field_coupled_var(sys_q)

    q_lo, q_hi = float(min(q2_range)), float(max(q2_range))
    q0 = float(c.q2 if (q2_start is None and c is not None) else
               (q2_start if q2_start is not None else q_lo))
    fam = _Family(family, cycle.section, cycle.returns, config)

    sh0 = fam.shooter(q0)
    u = np.append(cycle.anchor[sh0.free], q0)
    tau = cycle.T
    try:
        tangent, tau, phi = _branch_tangent_cycle(fam, u, tau)
    except NoRecurrence as exc:
        raise BranchLost("starting cycle does not return", last_good=q0) \
            from exc

    qs = [q0]
    cycles_out = [_point_from(fam.shooter(q0), fam, u, tau, phi, config)]
    points: List[CycleBifurcation] = []
    mults = np.linalg.eigvals(phi)
    step = ds

    pd_test = lambda mm: _test_pd(mm, _trivial_index(mm))
    ns_test = lambda mm: _test_ns(mm, _trivial_index(mm))

    while len(qs) < max_points:
        if len(qs) > 1 and (u[-1] >= q_hi or u[-1] <= q_lo):
            break
        nxt = None
        while step >= 1e-8:
            nxt = _corrector_cycle(fam, u + step * tangent, tangent, tau)
            if nxt is not None:
                break
            step *= 0.5
        if nxt is None:
            return CycleBranch(np.array(qs), cycles_out, points,
                               last_good=float(u[-1]))
        u_new, tau_new, phi_new = nxt
        mults_new = np.linalg.eigvals(phi_new)
        try:
            tan_new, tau_new, phi_new = _branch_tangent_cycle(
                fam, u_new, tau_new, tangent)
        except NoRecurrence:
            return CycleBranch(np.array(qs), cycles_out, points,
                               last_good=float(u[-1]))

        if tangent[-1] * tan_new[-1] < 0.0:
            u_star, tau_s = _bisect_fold_turn(fam, u.copy(), u_new.copy(),
                                              tangent, tau)
            res = _corrector_cycle(fam, u_star, tan_new, tau_s)
            if res is not None:
                us, ts, ps = res
                cyc = _point_from(fam.shooter(us[-1]), fam, us, ts, ps, config)
                points.append(CycleBifurcation(q2=float(us[-1]),
                                               kind=FOLD_OF_CYCLES, cycle=cyc))

        for test, kind in ((pd_test, PERIOD_DOUBLING),
                           (ns_test, NEIMARK_SACKER)):
            if test(mults) * test(mults_new) < 0.0:
                u_star, tau_s = _bisect_cycle_test(fam, u.copy(),
                                                   u_new.copy(), tau, test)
                chord = (u_new - u) / np.linalg.norm(u_new - u)
                res = _corrector_cycle(fam, u_star, chord, tau_s)
                if res is not None:
                    us, ts, ps = res
                    cyc = _point_from(fam.shooter(us[-1]), fam, us, ts, ps,
                                      config)
                    points.append(CycleBifurcation(q2=float(us[-1]),
                                                   kind=kind, cycle=cyc))

        u, tau, tangent, mults = u_new, tau_new, tan_new, mults_new
        qs.append(float(u[-1]))
        cycles_out.append(_point_from(fam.shooter(u[-1]), fam, u, tau,
                                      phi_new, config))
        step = min(step * 1.4, ds)

    points.sort(key=lambda bp: bp.q2)
    return CycleBranch(np.array(qs), cycles_out, points)


# ---------------------------------------------------------------------------
# homoclinic bifurcation to a saddle-node cycle
# ---------------------------------------------------------------------------

def detect_homoclinic_snpo(c: CoupledSystem, q2_bracket: Tuple[float, float],
                           section: EventSpec, seed,
                           returns: Optional[int] = None,
                           config: IntegratorConfig = None,
                           tol_q=2e-6, scaling_deltas=(1e-3, 4e-3),
                           escape_radius=15.0,
                           t_max=60000.0) -> CycleBifurcation:
    """Localize the disappearance of a stable cycle in q2.

    Bisects on "cycle findable by shooting" inside the bracket, warm-
    starting each probe from the nearest found anchor. The point is
    labeled HomoclinicToSaddleNodeCycle only if the dominant nontrivial
    multiplier approaches +1 from below and the post-bifurcation
    trajectory lingers near the dead cycle's ghost (passage time above
    5x the period, with passage times at two distances consistent with
    inverse-square-root scaling).
    """
    config = config or IntegratorConfig()
    q_a, q_b = float(q2_bracket[0]), float(q2_bracket[1])
    sgn = 1.0 if q_b > q_a else -1.0
    w = _weights(("V", "n", "V", "n"))

    def try_find(q2, warm_seed, warm_returns):
        sys_q = c.with_q2(q2)
        try:
            cyc = find_limit_cycle(sys_q, warm_seed, section,
                                   returns=warm_returns,
                                   transient_crossings=0 if warm_returns
                                   else 60,
                                   t_max=t_max, config=config)
        except (NoRecurrence, NewtonDiverged, StepSizeUnderflow):
            return None
        if cyc.stability != STABLE:
            return None
        return cyc

    cyc_a = try_find(q_a, seed, returns)
    if cyc_a is None:
        raise Inconclusive(f"no stable cycle at bracket start q2 = {q_a:g}")
    extent = max(np.linalg.norm((cyc_a.col_max - cyc_a.col_min) * w), 1e-6)

    def same_cycle(cyc, ref):
        drift = np.linalg.norm((cyc.anchor - ref.anchor) * w)
        return drift < 0.5 * extent and abs(cyc.T - ref.T) < 0.5 * ref.T

    cyc_b = try_find(q_b, cyc_a.anchor, cyc_a.returns)
    if cyc_b is not None and same_cycle(cyc_b, cyc_a):
        raise Inconclusive(
            "cycle persists across the whole bracket; nothing to detect")

    lo, hi = q_a, q_b
    last = cyc_a
    while abs(hi - lo) > tol_q:
        mid = 0.5 * (lo + hi)
        got = try_find(mid, last.anchor, last.returns)
        if got is not None and not same_cycle(got, last):
            got = None
        if got is not None:
            lo, last = mid, got
        else:
            hi = mid
    q_star = 0.5 * (lo + hi)

    mults = last.multipliers
    rest = np.delete(mults, _trivial_index(mults))
    real_rest = rest.real[np.abs(rest.imag) < 1e-6]
    mu_max = float(real_rest.max()) if len(real_rest) else \
        float(np.max(np.abs(rest)))

    # ghost passage: iterate the section map just past the point and time
    # the escape from a ball around the dead cycle's crossing set
    _, base_states, _ = collect_crossings(
        field_coupled(c.with_q2(lo)), last.anchor, section,
        max(last.returns, 1) + 1, config=config, t_max=t_max)

    def passage_time(q2):
        fld = field_coupled(c.with_q2(q2))
        spec = EventSpec(component=section.component, value=section.value,
                         direction=section.direction, terminal=0,
                         label="cross")
        traj = integrate(fld, last.anchor, (0.0, t_max), config,
                         events=[spec], record=False)
        for ev in traj.events:
            d = min(np.linalg.norm((ev.y - b) * w) for b in base_states)
            if d > escape_radius:
                return ev.t
        return t_max

    d1, d2 = sorted(scaling_deltas)
    t1 = passage_time(q_star + sgn * d1)
    t2 = passage_time(q_star + sgn * d2)
    lingers = t1 > 5.0 * last.T
    ratio = t1 / max(t2, 1e-9)
    expect = float(np.sqrt(d2 / d1))
    scaling_ok = 0.45 * expect <= ratio <= 2.2 * expect

    details = {"mu_max": mu_max, "passage": {d1: t1, d2: t2},
               "ratio": ratio, "expected_ratio": expect,
               "lingers": bool(lingers), "scaling_ok": bool(scaling_ok)}
    if not (mu_max > 0.5 and lingers):
        raise Inconclusive(f"no saddle-node ghost signature: {details}")
    return CycleBifurcation(q2=float(q_star), kind=HOMOCLINIC_SNPO,
                            cycle=last, details=details)

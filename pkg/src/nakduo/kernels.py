"""Hot numerical kernels: vector fields, Jacobians, and the RK5(4) core.

Everything here is written in the numba-compatible subset of Python and
compiled with ``@njit`` when numba is available. Setting the environment
variable ``NAKDUO_NO_NUMBA=1`` (before import) switches the whole module
to plain Python with identical semantics; the pure path is two to three
orders of magnitude slower and exists for verification and benchmarking.

Vector fields use the flat signature ``f(t, y, p, out)`` where ``p`` is a
packed parameter vector (see params.py) so that one compiled integrator
serves every field. Parameter packs never alias state.
"""

import math
import os

import numpy as np

from .params import (
    P_C, P_GL, P_EL, P_GNA, P_ENA, P_GK, P_EK,
    P_MHALF, P_KM, P_NHALF, P_KN, P_TAU, P_I,
    NEURON_PACK, PQ1, PQ2,
)

NUMBA_ENABLED = os.environ.get("NAKDUO_NO_NUMBA", "").strip() not in ("1", "true", "yes")

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a hard dep, but stay runnable
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def compile_field(pyfunc):
    """Compile a ``f(t, y, p, out)`` field the same way built-ins are."""
    if NUMBA_ENABLED:
        return njit(cache=False, nogil=True)(pyfunc)
    return pyfunc


# ---------------------------------------------------------------------------
# gating and vector fields
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def sigmoid(v, half, slope):
    # overflow-safe logistic: the exp argument is kept nonpositive
    z = (v - half) / slope
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def rhs_single_kernel(t, y, p, out):
    v = y[0]
    n = y[1]
    m = sigmoid(v, p[P_MHALF], p[P_KM])
    ninf = sigmoid(v, p[P_NHALF], p[P_KN])
    ionic = (p[P_GL] * (v - p[P_EL])
             + p[P_GNA] * m * (v - p[P_ENA])
             + p[P_GK] * n * (v - p[P_EK]))
    out[0] = (p[P_I] - ionic) / p[P_C]
    out[1] = (ninf - n) / p[P_TAU]


@njit(cache=True, nogil=True)
def jac_single_kernel(t, y, p, out):
    v = y[0]
    n = y[1]
    m = sigmoid(v, p[P_MHALF], p[P_KM])
    ninf = sigmoid(v, p[P_NHALF], p[P_KN])
    dm = m * (1.0 - m) / p[P_KM]
    dninf = ninf * (1.0 - ninf) / p[P_KN]
    out[0, 0] = (-p[P_GL] - p[P_GNA] * (dm * (v - p[P_ENA]) + m) - p[P_GK] * n) / p[P_C]
    out[0, 1] = -p[P_GK] * (v - p[P_EK]) / p[P_C]
    out[1, 0] = dninf / p[P_TAU]
    out[1, 1] = -1.0 / p[P_TAU]


@njit(cache=True, nogil=True)
def rhs_coupled_kernel(t, y, p, out):
    v1 = y[0]
    n1 = y[1]
    v2 = y[2]
    n2 = y[3]
    q1 = p[PQ1]
    q2 = p[PQ2]

    m1 = sigmoid(v1, p[P_MHALF], p[P_KM])
    n1inf = sigmoid(v1, p[P_NHALF], p[P_KN])
    ionic1 = (p[P_GL] * (v1 - p[P_EL])
              + p[P_GNA] * m1 * (v1 - p[P_ENA])
              + p[P_GK] * n1 * (v1 - p[P_EK]))
    out[0] = (p[P_I] + q1 * (v2 - v1) - ionic1) / p[P_C]
    out[1] = (n1inf - n1) / p[P_TAU]

    o = NEURON_PACK
    m2 = sigmoid(v2, p[o + P_MHALF], p[o + P_KM])
    n2inf = sigmoid(v2, p[o + P_NHALF], p[o + P_KN])
    ionic2 = (p[o + P_GL] * (v2 - p[o + P_EL])
              + p[o + P_GNA] * m2 * (v2 - p[o + P_ENA])
              + p[o + P_GK] * n2 * (v2 - p[o + P_EK]))
    out[2] = (p[o + P_I] + q2 * (v1 - v2) - ionic2) / p[o + P_C]
    out[3] = (n2inf - n2) / p[o + P_TAU]


@njit(cache=True, nogil=True)
def jac_coupled_kernel(t, y, p, out):
    v1 = y[0]
    n1 = y[1]
    v2 = y[2]
    n2 = y[3]
    q1 = p[PQ1]
    q2 = p[PQ2]
    o = NEURON_PACK

    m1 = sigmoid(v1, p[P_MHALF], p[P_KM])
    n1inf = sigmoid(v1, p[P_NHALF], p[P_KN])
    dm1 = m1 * (1.0 - m1) / p[P_KM]
    dn1inf = n1inf * (1.0 - n1inf) / p[P_KN]
    m2 = sigmoid(v2, p[o + P_MHALF], p[o + P_KM])
    n2inf = sigmoid(v2, p[o + P_NHALF], p[o + P_KN])
    dm2 = m2 * (1.0 - m2) / p[o + P_KM]
    dn2inf = n2inf * (1.0 - n2inf) / p[o + P_KN]

    for i in range(4):
        for j in range(4):
            out[i, j] = 0.0
    out[0, 0] = (-p[P_GL] - p[P_GNA] * (dm1 * (v1 - p[P_ENA]) + m1)
                 - p[P_GK] * n1 - q1) / p[P_C]
    out[0, 1] = -p[P_GK] * (v1 - p[P_EK]) / p[P_C]
    out[0, 2] = q1 / p[P_C]
    out[1, 0] = dn1inf / p[P_TAU]
    out[1, 1] = -1.0 / p[P_TAU]
    out[2, 0] = q2 / p[o + P_C]
    out[2, 2] = (-p[o + P_GL] - p[o + P_GNA] * (dm2 * (v2 - p[o + P_ENA]) + m2)
                 - p[o + P_GK] * n2 - q2) / p[o + P_C]
    out[2, 3] = -p[o + P_GK] * (v2 - p[o + P_EK]) / p[o + P_C]
    out[3, 2] = dn2inf / p[o + P_TAU]
    out[3, 3] = -1.0 / p[o + P_TAU]


# Fused variational fields. Layout: state, then the fundamental matrix in
# row-major order, then one quadrature slot integrating trace J (used for
# the Abel-Liouville determinant identity). Fusing keeps the Jacobian
# evaluation allocation-free inside the stepper.

@njit(cache=True, nogil=True)
def rhs_single_var_kernel(t, y, p, out):
    rhs_single_kernel(t, y, p, out)
    v = y[0]
    n = y[1]
    m = sigmoid(v, p[P_MHALF], p[P_KM])
    ninf = sigmoid(v, p[P_NHALF], p[P_KN])
    dm = m * (1.0 - m) / p[P_KM]
    dninf = ninf * (1.0 - ninf) / p[P_KN]
    a00 = (-p[P_GL] - p[P_GNA] * (dm * (v - p[P_ENA]) + m) - p[P_GK] * n) / p[P_C]
    a01 = -p[P_GK] * (v - p[P_EK]) / p[P_C]
    a10 = dninf / p[P_TAU]
    a11 = -1.0 / p[P_TAU]
    for j in range(2):
        r0 = y[2 + j]
        r1 = y[4 + j]
        out[2 + j] = a00 * r0 + a01 * r1
        out[4 + j] = a10 * r0 + a11 * r1
    out[6] = a00 + a11


@njit(cache=True, nogil=True)
def rhs_coupled_var_kernel(t, y, p, out):
    rhs_coupled_kernel(t, y, p, out)
    v1 = y[0]
    n1 = y[1]
    v2 = y[2]
    n2 = y[3]
    q1 = p[PQ1]
    q2 = p[PQ2]
    o = NEURON_PACK

    m1 = sigmoid(v1, p[P_MHALF], p[P_KM])
    n1inf = sigmoid(v1, p[P_NHALF], p[P_KN])
    dm1 = m1 * (1.0 - m1) / p[P_KM]
    dn1inf = n1inf * (1.0 - n1inf) / p[P_KN]
    m2 = sigmoid(v2, p[o + P_MHALF], p[o + P_KM])
    n2inf = sigmoid(v2, p[o + P_NHALF], p[o + P_KN])
    dm2 = m2 * (1.0 - m2) / p[o + P_KM]
    dn2inf = n2inf * (1.0 - n2inf) / p[o + P_KN]

    a00 = (-p[P_GL] - p[P_GNA] * (dm1 * (v1 - p[P_ENA]) + m1)
           - p[P_GK] * n1 - q1) / p[P_C]
    a01 = -p[P_GK] * (v1 - p[P_EK]) / p[P_C]
    a02 = q1 / p[P_C]
    a10 = dn1inf / p[P_TAU]
    a11 = -1.0 / p[P_TAU]
    a20 = q2 / p[o + P_C]
    a22 = (-p[o + P_GL] - p[o + P_GNA] * (dm2 * (v2 - p[o + P_ENA]) + m2)
           - p[o + P_GK] * n2 - q2) / p[o + P_C]
    a23 = -p[o + P_GK] * (v2 - p[o + P_EK]) / p[o + P_C]
    a32 = dn2inf / p[o + P_TAU]
    a33 = -1.0 / p[o + P_TAU]

    for j in range(4):
        r0 = y[4 + j]
        r1 = y[8 + j]
        r2 = y[12 + j]
        r3 = y[16 + j]
        out[4 + j] = a00 * r0 + a01 * r1 + a02 * r2
        out[8 + j] = a10 * r0 + a11 * r1
        out[12 + j] = a20 * r0 + a22 * r2 + a23 * r3
        out[16 + j] = a32 * r2 + a33 * r3
    out[20] = a00 + a11 + a22 + a33


def make_variational_field(field, jacobian, n):
    """Augment a generic field with its variational system and trace quadrature.

    Both inputs use the flat kernel signature; the result has dimension
    n + n*n + 1 with the fundamental matrix stored row-major after the
    state and the integral of trace J in the last slot.
    """
    def fvar(t, y, p, out):
        field(t, y[:n], p, out[:n])
        jac = np.empty((n, n))
        jacobian(t, y[:n], p, jac)
        tr = 0.0
        for i in range(n):
            tr += jac[i, i]
            for j in range(n):
                acc = 0.0
                for k in range(n):
                    acc += jac[i, k] * y[n + k * n + j]
                out[n + i * n + j] = acc
        out[n + n * n] = tr
    return compile_field(fvar)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) with quartic dense output
# ---------------------------------------------------------------------------

RK_C = np.array([0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0])
RK_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
     -5103.0 / 18656.0],
])
RK_B = np.array([35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0,
                 -2187.0 / 6784.0, 11.0 / 84.0])
# y5 - y4hat, applied to all seven stages (the last is FSAL)
RK_E = np.array([71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
                 -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0])
# Shampine's quartic interpolant for the pair: y(t0 + s*h) = y0 + h*Q@[s..s^4]
RK_P = np.array([
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0,
     -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0,
     87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0,
     -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0,
     701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0,
     -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0,
     69997945.0 / 29380423.0],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
EPS = 2.220446049250313e-16

STATUS_DONE = 0
STATUS_UNDERFLOW = 1
STATUS_EVENT_STOP = 2
STATUS_STEP_BUDGET = 3


@njit(nogil=True)
def _dense_component(y_old_i, q, h, s):
    s2 = s * s
    return y_old_i + h * (q[0] * s + q[1] * s2 + q[2] * s2 * s + q[3] * s2 * s2)


@njit(nogil=True)
def _fill_q(K, Q, n):
    for i in range(n):
        for m in range(4):
            acc = 0.0
            for s in range(7):
                acc += K[s, i] * RK_P[s, m]
            Q[i, m] = acc


@njit(nogil=True)
def _initial_step(f, t0, y0, p, f0, rtol, atol, max_step, span, n):
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y0[i])
        d0 += (y0[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = math.sqrt(d0 / n)
    d1 = math.sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = np.empty(n)
    f1 = np.empty(n)
    for i in range(n):
        y1[i] = y0[i] + h0 * f0[i]
    f(t0 + h0, y1, p, f1)
    d2 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y0[i])
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = math.sqrt(d2 / n) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, max_step, span)


@njit(nogil=True)
def dopri5(f, y0, t0, t1, p, rtol, atol, max_step, first_step,
           ev_idx, ev_val, ev_dir, stop_spec, stop_count,
           record_steps, record_dense, nmax):
    """Integrate ``f`` from t0 to t1 with plane-event location.

    Events are hyperplanes ``y[ev_idx[k]] == ev_val[k]`` crossed in
    direction ev_dir[k] (+1 rising, -1 falling, 0 both), located on the
    quartic interpolant by bisection. When ``stop_spec >= 0`` integration
    stops at the stop_count-th event of that spec. Returns the final
    status/time/state, recorded step points, dense coefficients, the
    event log, and evaluation counters.
    """
    n = y0.shape[0]
    n_ev = ev_idx.shape[0]
    span = t1 - t0

    K = np.empty((7, n))
    Q = np.empty((n, 4))
    ytmp = np.empty(n)
    ynew = np.empty(n)
    yev = np.empty(n)

    t = t0
    y = y0.copy()
    f(t, y, p, K[0])
    nfev = 1

    if first_step > 0.0:
        h = min(first_step, max_step, span)
    else:
        h = _initial_step(f, t0, y, p, K[0], rtol, atol, max_step, span, n)
        nfev += 1

    cap_s = 4096 if record_steps else 1
    ts = np.empty(cap_s)
    ys = np.empty((cap_s, n))
    cap_q = cap_s if record_dense else 1
    qs = np.empty((cap_q, n, 4))
    # hs[k] is the true step length of interval k; it exceeds ts[k+1]-ts[k]
    # only when a terminal event truncated the interval.
    hs = np.empty(cap_q)
    ns = 0
    if record_steps:
        ts[0] = t
        for i in range(n):
            ys[0, i] = y[i]
        ns = 1

    cap_e = 256
    ev_spec_out = np.empty(cap_e, np.int64)
    ev_t_out = np.empty(cap_e)
    ev_y_out = np.empty((cap_e, n))
    ev_counts = np.zeros(max(n_ev, 1), np.int64)
    ne = 0

    # per-step event scratch (each spec triggers at most once per step)
    st_spec = np.empty(max(n_ev, 1), np.int64)
    st_theta = np.empty(max(n_ev, 1))

    status = STATUS_DONE
    nsteps = 0

    while t < t1:
        if nsteps >= nmax:
            status = STATUS_STEP_BUDGET
            break
        hmin = 10.0 * EPS * max(abs(t), abs(t1))
        if h < hmin:
            status = STATUS_UNDERFLOW
            break
        last = False
        if t + h >= t1:
            h = t1 - t
            last = True

        for s in range(1, 6):
            for i in range(n):
                acc = 0.0
                for j in range(s):
                    acc += RK_A[s, j] * K[j, i]
                ytmp[i] = y[i] + h * acc
            f(t + RK_C[s] * h, ytmp, p, K[s])
        for i in range(n):
            acc = 0.0
            for j in range(6):
                acc += RK_B[j] * K[j, i]
            ynew[i] = y[i] + h * acc
        tnew = t + h
        f(tnew, ynew, p, K[6])
        nfev += 6
        nsteps += 1

        err = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(7):
                acc += RK_E[j] * K[j, i]
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            err += (h * acc / sc) ** 2
        err = math.sqrt(err / n)

        if err > 1.0:
            h = h * max(MIN_FACTOR, SAFETY * err ** -0.2)
            continue

        # accepted step
        need_q = record_dense
        n_trig = 0
        for k in range(n_ev):
            g0 = y[ev_idx[k]] - ev_val[k]
            g1 = ynew[ev_idx[k]] - ev_val[k]
            up = g0 < 0.0 and g1 >= 0.0
            down = g0 > 0.0 and g1 <= 0.0
            if (ev_dir[k] > 0 and up) or (ev_dir[k] < 0 and down) \
                    or (ev_dir[k] == 0 and (up or down)):
                st_spec[n_trig] = k
                st_theta[n_trig] = -1.0
                n_trig += 1
                need_q = True
        if need_q:
            _fill_q(K, Q, n)

        stopped = False
        if n_trig > 0:
            for m in range(n_trig):
                k = st_spec[m]
                idx = ev_idx[k]
                target = ev_val[k]
                lo = 0.0
                hi = 1.0
                glo = y[idx] - target
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    gm = _dense_component(y[idx], Q[idx], h, mid) - target
                    if (glo <= 0.0 and gm <= 0.0) or (glo > 0.0 and gm > 0.0):
                        lo = mid
                        glo = gm
                    else:
                        hi = mid
                st_theta[m] = 0.5 * (lo + hi)
            # record in time order; a terminal hit discards later ones
            for m in range(n_trig):
                best = -1
                btheta = 2.0
                for j in range(n_trig):
                    if st_theta[j] >= 0.0 and st_theta[j] < btheta:
                        best = j
                        btheta = st_theta[j]
                if best < 0:
                    break
                st_theta[best] = -1.0
                k = st_spec[best]
                tev = t + btheta * h
                for i in range(n):
                    yev[i] = _dense_component(y[i], Q[i], h, btheta)
                yev[ev_idx[k]] = ev_val[k]
                if ne >= cap_e:
                    cap_e *= 2
                    tmp_s = np.empty(cap_e, np.int64)
                    tmp_t = np.empty(cap_e)
                    tmp_y = np.empty((cap_e, n))
                    for r in range(ne):
                        tmp_s[r] = ev_spec_out[r]
                        tmp_t[r] = ev_t_out[r]
                        for i in range(n):
                            tmp_y[r, i] = ev_y_out[r, i]
                    ev_spec_out = tmp_s
                    ev_t_out = tmp_t
                    ev_y_out = tmp_y
                ev_spec_out[ne] = k
                ev_t_out[ne] = tev
                for i in range(n):
                    ev_y_out[ne, i] = yev[i]
                ne += 1
                ev_counts[k] += 1
                if stop_spec >= 0 and k == stop_spec and ev_counts[k] >= stop_count:
                    tnew = tev
                    for i in range(n):
                        ynew[i] = yev[i]
                    stopped = True
                    break

        if record_steps:
            if ns >= cap_s:
                cap_s *= 2
                tmp_ts = np.empty(cap_s)
                tmp_ys = np.empty((cap_s, n))
                for r in range(ns):
                    tmp_ts[r] = ts[r]
                    for i in range(n):
                        tmp_ys[r, i] = ys[r, i]
                ts = tmp_ts
                ys = tmp_ys
                if record_dense:
                    tmp_qs = np.empty((cap_s, n, 4))
                    tmp_hs = np.empty(cap_s)
                    for r in range(ns):
                        tmp_hs[r] = hs[r]
                        for i in range(n):
                            for m in range(4):
                                tmp_qs[r, i, m] = qs[r, i, m]
                    qs = tmp_qs
                    hs = tmp_hs
            ts[ns] = tnew
            for i in range(n):
                ys[ns, i] = ynew[i]
            if record_dense:
                for i in range(n):
                    for m in range(4):
                        qs[ns - 1, i, m] = Q[i, m]
                hs[ns - 1] = h
            ns += 1

        if stopped:
            t = tnew
            for i in range(n):
                y[i] = ynew[i]
            status = STATUS_EVENT_STOP
            break

        t = tnew
        for i in range(n):
            y[i] = ynew[i]
            K[0, i] = K[6, i]

        if err == 0.0:
            factor = MAX_FACTOR
        else:
            factor = min(MAX_FACTOR, SAFETY * err ** -0.2)
        h = min(h * factor, max_step)
        if last and status == STATUS_DONE and t >= t1:
            break

    nq = ns - 1 if (record_dense and ns > 0) else 0
    return (status, t, y,
            ts[:ns], ys[:ns], qs[:nq], hs[:nq],
            ev_spec_out[:ne], ev_t_out[:ne], ev_y_out[:ne],
            nsteps, nfev)


NO_EVENTS_IDX = np.empty(0, np.int64)
NO_EVENTS_VAL = np.empty(0)
NO_EVENTS_DIR = np.empty(0, np.int64)

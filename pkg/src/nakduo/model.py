"""Single-neuron and coupled vector fields with analytic Jacobians.

Thin, allocating wrappers over the packed kernels for interactive use and
tests; the integrator consumes the kernels directly. States follow the
array convention from params.py: ``[V, n]`` and ``[V1, n1, V2, n2]``.
"""

import numpy as np

from . import kernels
from .params import NeuronParams, CoupledSystem, pack_neuron, pack_coupled


def gating_inf(V, half, slope):
    """Steady-state activation 1/(1 + exp((half - V)/slope)).

    Parameters
    ----------
    V : float or ndarray
        Membrane potential (mV).
    half : float
        Half-activation potential (mV).
    slope : float
        Activation slope (mV), must be positive.

    Returns
    -------
    float or ndarray in (0, 1), strictly increasing in V.
    """
    z = (np.asarray(V, dtype=float) - half) / slope
    out = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                   np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    if np.isscalar(V) or np.ndim(V) == 0:
        return float(out)
    return out


def rhs_single(p: NeuronParams, state):
    """Time derivative (dV/dt, dn/dt) of one neuron at ``state``."""
    y = np.asarray(state, dtype=float)
    out = np.empty(2)
    kernels.rhs_single_kernel(0.0, y, pack_neuron(p), out)
    return out


def rhs_coupled(c: CoupledSystem, state):
    """Time derivative of the gap-junction pair at ``state``."""
    y = np.asarray(state, dtype=float)
    out = np.empty(4)
    kernels.rhs_coupled_kernel(0.0, y, pack_coupled(c), out)
    return out


def jacobian_single(p: NeuronParams, state):
    """Analytic 2x2 Jacobian of rhs_single at ``state``."""
    y = np.asarray(state, dtype=float)
    out = np.empty((2, 2))
    kernels.jac_single_kernel(0.0, y, pack_neuron(p), out)
    return out


def jacobian_coupled(c: CoupledSystem, state):
    """Analytic 4x4 Jacobian of rhs_coupled at ``state``."""
    y = np.asarray(state, dtype=float)
    out = np.empty((4, 4))
    kernels.jac_coupled_kernel(0.0, y, pack_coupled(c), out)
    return out


def resting_state(p: NeuronParams, V=-65.0):
    """A reasonable start state: V with its gating equilibrium n_inf(V)."""
    return np.array([V, gating_inf(V, p.n_half, p.k_n)])


def resting_state_coupled(c: CoupledSystem, V1=-65.0, V2=-65.0):
    s1 = resting_state(c.neuron1, V1)
    s2 = resting_state(c.neuron2, V2)
    return np.concatenate([s1, s2])

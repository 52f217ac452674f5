"""Parameter containers, JSON I/O, and packed arrays for the kernels.

States are plain float64 ndarrays by convention: a single neuron is
``[V, n]`` and the coupled pair is ``[V1, n1, V2, n2]``. Parameter objects
are frozen dataclasses; the integration kernels consume flat packed copies
(see `pack_neuron` / `pack_coupled`) so they stay numba-friendly.
"""

import json
import math
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from .errors import ConfigInvalid

# Packed single-neuron layout (13 floats). Coupled packs are two neuron
# blocks followed by [q1, q2], 28 floats total.
P_C, P_GL, P_EL, P_GNA, P_ENA, P_GK, P_EK = 0, 1, 2, 3, 4, 5, 6
P_MHALF, P_KM, P_NHALF, P_KN, P_TAU, P_I = 7, 8, 9, 10, 11, 12
NEURON_PACK = 13
PQ1, PQ2 = 26, 27
COUPLED_PACK = 28

NEURON_FIELDS = (
    "C", "g_L", "g_Na", "g_K", "E_L", "E_Na", "E_K",
    "m_half", "k_m", "n_half", "k_n", "tau", "I",
)


@dataclass(frozen=True)
class NeuronParams:
    """Constants of one persistent-sodium plus potassium neuron.

    Conductances in mS/cm^2, potentials in mV, C in uF/cm^2, tau in ms,
    I in uA/cm^2. `n_half`/`k_n` shape the slow gate, `m_half`/`k_m` the
    instantaneous one.
    """

    C: float = 1.0
    g_L: float = 1.0
    g_Na: float = 4.0
    g_K: float = 4.0
    E_L: float = -78.0
    E_Na: float = 60.0
    E_K: float = -90.0
    m_half: float = -30.0
    k_m: float = 7.0
    n_half: float = -30.0
    k_n: float = 5.0
    tau: float = 1.0
    I: float = 0.0

    def __post_init__(self):
        if self.C <= 0 or self.tau <= 0:
            raise ConfigInvalid("C and tau must be positive")
        if self.k_m <= 0 or self.k_n <= 0:
            raise ConfigInvalid("activation slopes k_m, k_n must be positive")
        if min(self.g_L, self.g_Na, self.g_K) < 0:
            raise ConfigInvalid("conductances must be nonnegative")
        if not (self.E_K < self.E_L < self.E_Na):
            raise ConfigInvalid("reversal potentials must satisfy E_K < E_L < E_Na")

    def with_current(self, I):
        return replace(self, I=float(I))


@dataclass(frozen=True)
class CoupledSystem:
    """Two neurons joined by a linear gap junction.

    q1 scales the (V2 - V1) current into neuron 1, q2 the (V1 - V2)
    current into neuron 2. Drive currents live on the neurons.
    """

    neuron1: NeuronParams
    neuron2: NeuronParams
    q1: float = 0.05
    q2: float = 0.0

    def __post_init__(self):
        if self.q1 < 0 or self.q2 < 0:
            raise ConfigInvalid("coupling strengths must be nonnegative")

    def with_q2(self, q2):
        return replace(self, q2=float(q2))


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive integrator settings.

    max_step bounds a single step so plane crossings cannot straddle two
    sign changes; max_time is the budget for one integrate() call.
    """

    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float = 1.0
    max_time: float = 1.0e6

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ConfigInvalid("tolerances must be positive")
        if self.max_step <= 0 or self.max_time <= 0:
            raise ConfigInvalid("max_step and max_time must be positive")


def integrator_neuron(I=0.0):
    """Type I cell: slow gate centered at -30 mV, unit time constant."""
    return NeuronParams(n_half=-30.0, tau=1.0, I=I)


def resonator_neuron(I=0.0):
    """Type II cell: slow gate centered at -45 mV, tau = 0.9 ms."""
    return NeuronParams(n_half=-45.0, tau=0.9, I=I)


# Drive currents of the reference pair. I1 keeps neuron 1 spiking just
# past its onset at 11.98; I2 holds neuron 2 in its bistable band below
# the subthreshold-oscillation limit at 51.94. Calibrated so the pair
# reproduces the reference coupling landmarks: subthreshold branch fold
# near q2 = 0.243, skipping onset near 0.0868, mixed-mode fold near
# 0.098, and 1:1 synchrony at q2 = 0.35.
DEFAULT_I1 = 12.95
DEFAULT_I2 = 51.20


def default_pair(q2=0.0, I1=None, I2=None, q1=0.05):
    """The reference coupled system: spiking integrator, silent resonator."""
    return CoupledSystem(
        neuron1=integrator_neuron(DEFAULT_I1 if I1 is None else I1),
        neuron2=resonator_neuron(DEFAULT_I2 if I2 is None else I2),
        q1=q1,
        q2=q2,
    )


# Fixed cold-start states, one per basin family probed in the reference
# analyses: both park neuron 2 mid-spike with distinct phases of neuron 1.
COLD_SEEDS = (
    np.array([-62.2114, 0.0027, -5.4806, 0.6079]),
    np.array([-55.1947, 0.0051, -4.5256, 0.6247]),
)


def pack_neuron(p, out=None):
    """Flatten NeuronParams into the 13-float kernel layout."""
    if out is None:
        out = np.empty(NEURON_PACK)
    out[P_C] = p.C
    out[P_GL] = p.g_L
    out[P_EL] = p.E_L
    out[P_GNA] = p.g_Na
    out[P_ENA] = p.E_Na
    out[P_GK] = p.g_K
    out[P_EK] = p.E_K
    out[P_MHALF] = p.m_half
    out[P_KM] = p.k_m
    out[P_NHALF] = p.n_half
    out[P_KN] = p.k_n
    out[P_TAU] = p.tau
    out[P_I] = p.I
    return out


def pack_coupled(c):
    """Flatten a CoupledSystem into the 28-float kernel layout."""
    out = np.empty(COUPLED_PACK)
    pack_neuron(c.neuron1, out[:NEURON_PACK])
    pack_neuron(c.neuron2, out[NEURON_PACK:2 * NEURON_PACK])
    out[PQ1] = c.q1
    out[PQ2] = c.q2
    return out


def _neuron_from_dict(d, label):
    unknown = set(d) - set(NEURON_FIELDS)
    if unknown:
        raise ConfigInvalid(f"{label}: unknown fields {sorted(unknown)}")
    base = asdict(integrator_neuron() if label == "neuron1" else resonator_neuron())
    base.update(d)
    return NeuronParams(**{k: float(v) for k, v in base.items()})


def load_coupled(path_or_dict):
    """Build a CoupledSystem from a JSON file path or a parsed dict.

    The document holds one object per neuron plus scalars q1, q2 and
    optional I1, I2 which override the per-neuron drive currents.
    """
    if isinstance(path_or_dict, dict):
        doc = path_or_dict
    else:
        with open(path_or_dict) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigInvalid(f"bad JSON in {path_or_dict}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigInvalid("parameter document must be a JSON object")
    known = {"neuron1", "neuron2", "q1", "q2", "I1", "I2"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigInvalid(f"unknown top-level fields {sorted(unknown)}")
    n1 = _neuron_from_dict(doc.get("neuron1", {}), "neuron1")
    n2 = _neuron_from_dict(doc.get("neuron2", {}), "neuron2")
    if "neuron1" not in doc or "I" not in doc["neuron1"]:
        n1 = n1.with_current(DEFAULT_I1)
    if "neuron2" not in doc or "I" not in doc["neuron2"]:
        n2 = n2.with_current(DEFAULT_I2)
    if "I1" in doc:
        n1 = n1.with_current(float(doc["I1"]))
    if "I2" in doc:
        n2 = n2.with_current(float(doc["I2"]))
    q1 = float(doc.get("q1", 0.05))
    q2 = float(doc.get("q2", 0.0))
    for name, v in (("q1", q1), ("q2", q2)):
        if not math.isfinite(v):
            raise ConfigInvalid(f"{name} must be finite")
    return CoupledSystem(neuron1=n1, neuron2=n2, q1=q1, q2=q2)


def dump_coupled(c):
    """Canonical JSON text for a CoupledSystem; stable for round-trips."""
    doc = {
        "neuron1": asdict(c.neuron1),
        "neuron2": asdict(c.neuron2),
        "q1": c.q1,
        "q2": c.q2,
        "I1": c.neuron1.I,
        "I2": c.neuron2.I,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"

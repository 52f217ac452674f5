"""Bifurcation and oscillation-pattern analysis for a gap-junction pair.

A spiking integrator neuron (type I excitability) coupled to a silent
resonator (type II) through an electrical synapse. The package provides
the vector fields, an event-locating adaptive integrator, equilibrium and
limit-cycle continuation with Floquet analysis, Poincare-section tooling
(rotation numbers, torus smoothness, orbit diagrams), and a classifier
for the oscillation patterns of the pair.
"""

from .errors import (
    AnalysisFailed, BranchEscapedBox, BranchLost, ConfigInvalid,
    CurveFitFailed, Inconclusive, MaxTimeExceeded, NakduoError,
    NewtonDiverged, NoConvergence, NoRecurrence, NotPeriodic,
    StepSizeUnderflow, WindowTooShort,
)
from .params import (
    CoupledSystem, IntegratorConfig, NeuronParams, COLD_SEEDS,
    default_pair, dump_coupled, integrator_neuron, load_coupled,
    resonator_neuron,
)
from .model import (
    gating_inf, jacobian_coupled, jacobian_single, resting_state,
    resting_state_coupled, rhs_coupled, rhs_single,
)
from .ode import (
    EventSpec, Field, Trajectory, collect_crossings, field_coupled,
    field_coupled_var, field_single, field_single_var, integrate,
    integrate_with_variational, make_field, make_variational_field, plane,
)
from .equilibria import (
    Branch, BranchPoint, Equilibrium, classify_fold_as_snic,
    continue_equilibrium, fi_curve, find_equilibria, hopf_criticality,
    hopf_frequency, subcritical_probe,
)
from .cycles import (
    CycleBifurcation, CycleBranch, LimitCycle, continue_cycle,
    detect_homoclinic_snpo, find_limit_cycle, floquet_multipliers,
)
from .poincare import (
    OrbitDiagram, RotationEstimate, SectionOrbit, orbit_diagram,
    rotation_number, section_orbit, torus_breakdown_bracket,
    torus_smoothness,
)
from .classify import (
    ClassifyConfig, PatternReport, SpikeTrain, classify_pattern,
    detect_spikes, input_signal, mmo_signature, multistability_probe,
    simulate_pattern,
)

__version__ = "0.1.0"

"""Analytically solvable two-level control pulses from a single generator q(tau)."""
from .core import (ModelParams, RotationSpec, TimeGrid, Unitary2, axis_angle, compose, dagger, infidelity,
                   pauli_traces, rotation, rx, rz)
from .errors import (ConstraintViolation, InvalidParameter, PulseForgeError, VerificationFailure)
from .qfamilies import (FAMILIES, QFamily, QSample, closed_form_J, custom_family, family_arctan_trig, family_cos,
                        family_from_samples, family_from_spec, family_gauss_cos, family_sinh_exp, family_tanh,
                        validate_initial_conditions, validity_domain)
from .rotation import tail_fit, total_evolution, tune_target_rotation, xz_plane_checks
from .synth import PulseSolution, evolution_at, synthesize, synthesize_zero_splitting, two_axis_lift
from .verify import PropagatorConfig, VerificationReport, compare, ode_residual, propagate_numeric
from .wgen import PSpec, WTable, build_table, generated_family, invert_w, validate_p, w_integral

__version__ = "0.1.0"

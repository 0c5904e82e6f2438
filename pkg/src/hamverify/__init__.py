"""Verification toolkit for non-autonomous Hamiltonian systems.

Represents time-dependent Hamiltonian systems on the phase space (t, q, p),
lifts them to equivalent autonomous systems with the extra momentum p0,
numerically verifies complete-integrability and superintegrability
conditions, and validates generalized action-angle charts on a catalog of
reference systems.
"""

from .action_angle import (ActionAngleChart, RegaugeSpec, action_loop_integral,
                           chart_verify, frequencies, initial_data_check,
                           measured_frequencies, regauge, round_trip_defect)
from .catalog import CatalogEntry, catalog_entries, get_entry
from .duals import Dual2
from .dynamics import (IntegratorConfig, Trajectory, completeness_probe,
                       equivalence_check, integrate_extended,
                       integrate_vertical)
from .errors import (ArityError, BlowupDetected, ChartDomainError, ConfigError,
                     DegenerateSampleBox, EvalError, HamverifyError,
                     MissingVariable, NonConvergedPeriod, NotClosedOrbit,
                     ParseError, StepLimitExceeded, VariableIndexError,
                     WrongCount)
from .expr import (FunctionField, Gradient, Hessian, ScalarField, evaluate,
                   free_variables, node_count, parse, to_source)
from .integrability import (RankReport, StructureMatrix, VerifierVerdict,
                            closure_check, corank_check, full_jacobian,
                            independence_check, integrals_residual,
                            involution_check, lifted_report, structure_matrix,
                            verify_complete, verify_superintegrable)
from .lift import (ExtendedPoint, LiftedSystem, extended_bracket, i0,
                   lift_system, project, projection_identity_defect,
                   section_H, u_H_star)
from .phase_space import (PhasePoint, SystemSpec, VerticalTangent,
                          commutator_defect, gamma_H, gamma_commutator_defect,
                          hamiltonian_vector_field, lie_derivative,
                          vertical_bracket)
from .sampling import Box, sample_extended_points, sample_phase_points

__version__ = "0.1.0"

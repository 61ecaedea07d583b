"""S1-averaging calculus for vector fields with periodic flows.

Averaging and integral operators on tensor fields, global solutions of
homological equations, first-order normal forms and slow-fast Hamiltonian
systems, each checked pointwise by residuals.
"""
__version__ = "0.1.0"

from .errors import (S1AvgError, ValenceError, DomainError, SingularPointError, ClosureError,
                     PeriodDetectionError, IntegrationError, NotInvariantError, SolvabilityError,
                     DegenerateError, ConfigError)
from .tensor import (CoordChart, TensorField, Valence, SympyField, from_sympy, wedge,
                     interior_form, interior_multivector, exterior_derivative, lie_derivative,
                     lie_bracket)
from .flows import IntegratorConfig, PeriodicFlow, OrbitSample, flow, flow_with_jacobian, \
    detect_period
from .averaging import (averaged, s_field, s2_field, lie_upsilon_field, lie_X_field, average, s_op,
                        s_squared, lie_upsilon, lie_X)
from .homological import (SolutionBundle, solve_function, solve_kvector, solve_vector, solve_kform,
                          necessary_conditions_kvector, necessary_conditions_kform,
                          decompose_closed_form, probe_points)
from .normal_forms import (PerturbedSystem, NormalFormResult, build_generator, averaged_remainder,
                           check_normalization_condition, normalize_first_order,
                           choose_vertical_killer)
from .slowfast import (ProductPhaseSpace, SlowFastHamiltonian, partial_derivatives,
                       hamiltonian_split, monodromy, periodicity_certificate,
                       check_frequency_preservation, hamiltonize, invariant_symplectic, quartic_constant_c, is_resonant,
                       resonance_table)
from .scenarios import get_scenario, SCENARIOS

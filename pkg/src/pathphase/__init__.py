"""Non-cyclic spatial geometric phase in a two-path interferometer loop."""

from .bloch import (BlochVector, SpherePath, absorber_polar_angle, bloch_from_state,
                    build_evolution_path, geometric_phase_from_area, signed_solid_angle)
from .circuit_io import (CircuitSpec, SweepConfig, emit_results, parse_circuit, parse_sweep,
                         simulate_circuit)
from .errors import (DomainError, GeodesicError, OrthogonalityError, ParseError,
                     UnidentifiableError)
from .fringes import (FringeFit, Interferogram, SweepRow, damped_phase_model, fit_fringe,
                      fit_visibility_C, fringe_contrast_curve, phase_sweep,
                      residual_dynamical_phase, synthesize_interferogram)
from .state import (Attenuate, PathState, PhaseDecomposition, PhaseShift, RecombineQ,
                    SplitToQ, apply_element, compensated_shifts, cyclic_geometric_phase,
                    evolve_second_loop, pancharatnam_phase, phase_decomposition)

__version__ = "0.1.0"

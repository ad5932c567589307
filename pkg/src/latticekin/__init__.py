"""Quantum Boltzmann relaxation dynamics of spinless lattice fermions
in a charge-density-wave background.

Typical workflow: build a :class:`BrillouinGrid` and :class:`BandStructure`
from :class:`ModelParams`, enumerate a :class:`ScatteringTable`, construct an
initial :class:`DistributionState` from a scenario, and integrate
:func:`collision_rhs` with :func:`evolve`.
"""

from .collision import (DistributionState, ScatteringTable,
                        build_scattering_table, collision_activity,
                        collision_rhs, default_sigma, delta_kernel,
                        ground_state, load_table, save_table,
                        weak_coupling_rhs)
from .diagnostics import (DiagnosticsRecord, FermiFit, backreaction_rate,
                          band_populations, collect_record, crystal_momentum,
                          fit_fermi_dirac, h_functional,
                          particle_hole_distance, total_energy)
from .errors import (ConfigParseError, ConfigValidationError,
                     DegenerateBandsError, EmptyRegionError,
                     InsufficientDataError, LatticeKinError,
                     StepUnderflowError, TableCacheError, TableTooLargeError,
                     UnsupportedChannelError)
from .integrator import IntegratorConfig, evolve, step_adaptive, time_scale
from .lattice import (BandStructure, BrillouinGrid, ChannelSet, ModelParams,
                      band_energies, hopping_dispersion, interaction_fourier,
                      rotation_matrix, wrap_momentum)
from .matrix_elements import (ALL_CHANNELS, PH_CHANNEL, STRONG_CHANNELS,
                              backreaction_weight, matrix_element_full,
                              matrix_element_strong)
from .scenarios import (OutputPlan, RunConfig, ScenarioKind, ScenarioSpec,
                        build_initial_state, init_asymmetric, init_ground,
                        init_symmetric, load_config, serialize_config)

__version__ = "0.1.0"

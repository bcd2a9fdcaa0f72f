"""decolab: decoherence vs. relaxation timescales of a bath-monitored free particle."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, DegenerateStateError, DomainError,
                     RegimeWarning, RunTooShortError, StateDiagnosticError,
                     TraceDriftError)
from .timescales import (BOLTZMANN_SI, HBAR_SI, PhysicalParams, TimescalePair,
                         classical_limit_sweep, decoherence_time,
                         popular_thermal_wavelength, thermal_de_broglie,
                         timescale_ratio)
from .grids import (CatInfo, DensityGrid, SpatialGrid, WavefunctionGrid,
                    export_diagonal_csv, load_density, save_density)
from .states import (cat_state, gaussian_packet, incoherent_mixture,
                     locate_extrema, pure_density)
from .evolution import (DecoherenceCoefficient, EvolutionConfig, Evolver,
                        decoherence_step, dissipation_step, evolve,
                        kinetic_step, pure_decoherence_exact)
from .observables import (MeasuredTimescales, Probe, RateFit, Trajectory,
                          coherence_peak, fit_exponential_rate,
                          measure_timescales, momentum_expectation,
                          position_distribution, position_moments, purity,
                          standard_probes)
from .measurement import (JointState, SystemState, evolve_joint,
                          impulsive_coupling, prepared_apparatus)

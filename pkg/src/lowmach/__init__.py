"""Pseudo-spectral toolkit for the low Mach number limit of quantum fluids.

Simulates the scaled quantum hydrodynamic system on the periodic torus
through its wave-function formulation, alongside incompressible Euler and
the averaged acoustic oscillation equation, and certifies the singular
limit through a relative entropy functional and convergence sweeps.
"""

from .acoustic import (AcousticPair, apply_group, build_U, build_Ubar,
                       compute_G, filter_pair, mso_residuals, pair_norm)
from .config import (RunConfig, build_initial_spec, config_lines, echo_config,
                     parse_config_file, parse_config_text)
from .entropy import (ConvergenceReport, EntropyTrace, convergence_metrics,
                      density_fluctuation, energy, energy_components,
                      fit_gronwall, relative_entropy, renormalized_pressure,
                      report_from_traces, run_pipeline, sweep)
from .errors import (ConfigError, GridMismatchError, LowmachError,
                     NumericalBlowupError, PropertyViolationError,
                     RealizabilityError, StepSizeError, SweepError,
                     TimeSyncError, UsageError, VacuumError)
from .pressure import pressure_potential, psi_limit_constant
from .resonance import (OscillationProfile, b1_form, b1_profile, b2_form,
                        b2_profile, branch_compose, branch_decompose,
                        certify_resonance_table, is_resonant,
                        orthogonality_report, resonant_triple_columns,
                        resonant_triples, time_average_oracle_b1,
                        time_average_oracle_b2)
from .snapshots import (export_slice, format_float, load_field, read_sidecar,
                        save_field, write_sidecar)
from .solvers import (EulerState, InitialDataSpec, QhdState, WaveFunction,
                      build_initial_data, euler_dt_default, euler_step,
                      limit_dt_default, limit_step, madelung, nls_dt_default,
                      nls_hamiltonian, nls_step, qhd_residuals)
from .spectral import (ScalarField, SpectralCoefficients, TorusGrid,
                       VectorField, dealias, divergence, fft_forward,
                       fft_inverse, gradient, laplacian, lebesgue_norm,
                       leray_decompose, norm, random_band_field, same_grid,
                       sobolev_norm, solve_poisson)

__version__ = "0.1.0"

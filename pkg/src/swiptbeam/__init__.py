"""Robust max-min harvested-energy beamforming for AN-aided secure MU-MIMO
SWIPT with a cooperative jammer: scenario generation, exact metrics, the
SOCP-based successive convex approximation solver, baselines, and a
Monte-Carlo experiment harness."""

from .baselines import SCHEMES, solve_scheme
from .conic_backend import (ConicSolution, ResidualReport, SolverOptions,
                            check_solution, read_socp, solve)
from .metrics import (BeamformingSolution, WorstCaseReport,
                      eavesdropper_rate, eavesdropper_rate_trace,
                      empirical_worst_case, harvested_power_cr,
                      harvested_power_er, secrecy_rate, sinr_cr)
from .robust_bounds import (GramSet, RobustBounds, build_gram_set,
                            compute_robust_bounds, gram_perturbation)
from .scenario import (ChannelSet, Geometry, NoiseAndEfficiency, PowerBudget,
                       Scenario, ScenarioParams, SystemDims, dbm_to_watts,
                       generate_scenario, load_scenario_text, make_scenario,
                       path_loss_amplitude, sample_bounded_error,
                       save_scenario_text, watts_to_dbm)
from .socp_builder import (BuildConfig, ConicProblem, ExpansionPoint,
                           assemble_socp, format_socp, qol_value, taylor_qol)
from .spca import (InitializationError, IterationTrace, SpcaConfig, SpcaResult,
                   ValidationReport, find_initial_point, revalidate_solution,
                   run_spca, validate_solution)
from .experiments import (ExperimentSpec, parse_experiment_file,
                          read_results_csv, run_experiment, summarize)

__version__ = "0.1.0"

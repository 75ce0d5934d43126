"""Distributed power control with partial channel-state information.

Synthesis of one-shot decision functions by best-response dynamics, the
long-term utility region at desk scale, classical baselines and a Monte
Carlo evaluation harness over block-fading channels.
"""
from .baselines import (BaselinePolicy, bpc_cs, full_power, goodman_equilibrium,
                        goodman_target_sinr, iwfa, water_fill)
from .evaluation import EvalResult, paired_difference, simulate, sweep_curve
from .model import (ActionAlphabet, Psi, Scenario, UtilitySpec, build_smallcell_scenario,
                    energy_efficiency, instantaneous_utility, interference_scenario,
                    mac_scenario, power_grid, shannon_rate, sinr, sinr_array, utility_array,
                    weighted_utility)
from .observe import (GainQuantizer, ObservationModel, StateAlphabet, build_noisy_individual,
                      build_observation, build_state_alphabet, calibrate_noise,
                      discrete_state_alphabet, exponential_gain_law, max_entropy_quantize,
                      realized_esnr)
from .presets import (Problem, mac_qos_problem, multiband_mac_problem, random_problem,
                      reference_problem)
from .region import (AuxiliaryMix, BudgetExceeded, RegionFrontier, VertexPayoff,
                     cardinality_bound, enumerate_vertices, exhaustive_frontier,
                     exhaustive_optimum, factorization_check, per_user_expected_utilities,
                     qos_mixture_lp)
from .simplex import linprog_max
from .synth import (DecisionProfile, SynthReport, best_response_score, best_response_scores,
                    expected_weighted_utility, multistart_synthesize, naive_scores,
                    ops_per_sweep, per_user_utilities, synthesize)

__version__ = "0.1.0"

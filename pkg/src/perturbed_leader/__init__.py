"""Follow the Perturbed Leader with adaptive learning rates, plus a harness
that checks its regret bounds empirically."""

from .core import (Decision, ExpertPool, GameState, LossVector, accumulate,
                   best_expert_in_hindsight, make_countable_pool, make_pool, make_uniform_pool)
from .environments import (Bernoulli, FixedSequence, FlKiller, LastChoicePunisher,
                           make_environment, make_fl_killer)
from .exact import (PenalizedScore, choice_probabilities, choice_probabilities_quadrature,
                    choice_probabilities_subset_sum, expected_loss)
from .harness import (BoundReport, evaluate_bound, high_probability_check, monte_carlo_regret,
                      play, ratio_convergence_check, run_game)
from .perturbation import (Perturbation, Regime, sample_exponential_vector, shifted_max_cdf,
                           shifted_max_expectation_bound, shifted_max_tail_bound)
from .predictors import (DeterministicWeights, FollowTheLeader, Fpl, HierarchicalFpl,
                         fl_decide, fpl_decide, ifpl_decide, weight_vector)
from .scenarios import list_scenarios, run_scenario
from .schedules import Schedule

__version__ = "0.1.0"
